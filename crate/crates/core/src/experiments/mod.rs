//! Synthetic newsvendor study, measure concentration, and the rolling
//! portfolio backtest.

mod backtest;
mod concentration;
mod disappointment;
mod output;
mod synthetic;

pub use backtest::{certainty_equivalent, rolling_backtest, rolling_returns, sharpe_ratio, BacktestConfig, BacktestMetrics};
pub use concentration::{
    concentration_curve, concentration_curve_with_atoms, normal_quantile_atoms, w1_to_normal, ConcentrationRow,
    CONCENTRATION_QUERY, TRUE_LAW_ATOMS,
};
pub use disappointment::{disappointment, DisappointmentRow};
pub use output::{schedule_scale, write_backtest_csv, write_concentration_csv, write_disappointment_csv, BacktestRow};
pub use synthetic::{generate_newsvendor_data, SyntheticConfig, SyntheticInstance};
