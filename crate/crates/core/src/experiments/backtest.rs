use serde::{Deserialize, Serialize};

use crate::apps::{empirical_cvar, equally_weighted, solve_portfolio, Policy, PolicyKind, PortfolioParams};
use crate::data::Dataset;
use crate::dro::dot;
use crate::error::{Error, Result};

/// Rolling-sample setup. The radius rule lives in `policy.schedule`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    /// Estimation window `M` in months.
    pub window: usize,
    pub policy: Policy,
    #[serde(default)]
    pub portfolio: PortfolioParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestMetrics {
    pub sharpe: f64,
    pub e_cvar: f64,
    pub ceq: f64,
    pub returns: Vec<f64>,
}

/// Sample mean and standard deviation (divisor `count - 1`).
fn mean_std(returns: &[f64]) -> Result<(f64, f64)> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InsufficientReturns(n));
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, var.sqrt()))
}

fn checked_mean_std(returns: &[f64]) -> Result<(f64, f64)> {
    let (mean, std) = mean_std(returns)?;
    if std <= 1e-12 * (1.0 + mean.abs()) {
        return Err(Error::ZeroVolatility);
    }
    Ok((mean, std))
}

/// `mean / std`.
pub fn sharpe_ratio(returns: &[f64]) -> Result<f64> {
    let (mean, std) = checked_mean_std(returns)?;
    Ok(mean / std)
}

/// `mean - std^2`.
pub fn certainty_equivalent(returns: &[f64]) -> Result<f64> {
    let (mean, std) = checked_mean_std(returns)?;
    Ok(mean - std * std)
}

impl BacktestMetrics {
    pub fn from_returns(returns: Vec<f64>, eta: f64) -> Result<Self> {
        let (mean, std) = checked_mean_std(&returns)?;
        Ok(BacktestMetrics {
            sharpe: mean / std,
            e_cvar: empirical_cvar(&returns, eta)?,
            ceq: mean - std * std,
            returns,
        })
    }
}

/// Out-of-sample returns of the rolling-sample procedure, one per month
/// `M+1..T` in time order.
///
/// Window `t` (1-based) trains on months `t..t+M-1` and earns the return of
/// month `t+M`. NW policies fit on the lagged pairs `(x_{i-1}, y_i)` inside the
/// window and query at the window's last covariate row; other policies use
/// the window's `M` outcomes with uniform weights.
pub fn rolling_returns(data: &Dataset, cfg: &BacktestConfig) -> Result<Vec<f64>> {
    let m = cfg.window;
    let t_total = data.len();
    if m < 2 {
        return Err(Error::invalid("backtest window must be at least 2"));
    }
    if t_total <= m {
        return Err(Error::invalid(format!("need more than {m} months, have {t_total}")));
    }
    cfg.portfolio.validate()?;
    let d = data.dim_y();
    let ys = data.outcomes();
    let mut out = Vec::with_capacity(t_total - m);
    for start in 0..t_total - m {
        let z = window_decision(data, cfg, start).map_err(|e| Error::Window {
            window: start + 1,
            source: Box::new(e),
        })?;
        debug_assert_eq!(z.len(), d);
        out.push(dot(&ys[start + m], &z));
    }
    Ok(out)
}

fn window_decision(data: &Dataset, cfg: &BacktestConfig, start: usize) -> Result<Vec<f64>> {
    let m = cfg.window;
    let d = data.dim_y();
    let policy = &cfg.policy;
    if policy.kind == PolicyKind::Ew {
        return equally_weighted(d);
    }
    let (train, query) = if policy.kind.uses_kernel() {
        let lagged = Dataset::new(
            data.covariates()[start..start + m - 1].to_vec(),
            data.outcomes()[start + 1..start + m].to_vec(),
        )?;
        (lagged, data.covariates()[start + m - 1].clone())
    } else {
        (data.slice(start..start + m)?, Vec::new())
    };
    let weights = policy.weights(&train, &query)?;
    let eps = policy.radius(train.len())?;
    let sol = solve_portfolio(&cfg.portfolio, &weights, train.outcomes(), eps)?.require_optimal()?;
    Ok(sol.decision[..d].to_vec())
}

/// Rolling returns plus SR, E-CVaR (at `cfg.portfolio.eta`) and CEQ.
pub fn rolling_backtest(data: &Dataset, cfg: &BacktestConfig) -> Result<BacktestMetrics> {
    let returns = rolling_returns(data, cfg)?;
    BacktestMetrics::from_returns(returns, cfg.portfolio.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dro::RadiusSchedule;
    use crate::kernel::KernelSpec;

    fn ew() -> BacktestConfig {
        BacktestConfig {
            window: 2,
            policy: Policy::new(PolicyKind::Ew, KernelSpec::default(), RadiusSchedule::Fixed { epsilon: 0.0 }),
            portfolio: PortfolioParams::default(),
        }
    }

    fn months(rows: &[[f64; 2]]) -> Dataset {
        let r: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Dataset::new(r.clone(), r).unwrap()
    }

    #[test]
    fn ew_five_months() {
        let data = months(&[[0.01, 0.03], [0.02, -0.02], [0.04, 0.00], [-0.01, 0.07], [0.03, -0.01]]);
        let m = rolling_backtest(&data, &ew()).unwrap();
        // half-half returns in months 3..5: 0.02, 0.03, 0.01
        assert_eq!(m.returns.len(), 3);
        assert!((m.sharpe - 2.0).abs() < 1e-12);
        assert!((m.ceq - 0.0199).abs() < 1e-12);
        assert!((m.e_cvar + 0.01).abs() < 1e-12);
    }

    #[test]
    fn constant_returns_have_zero_volatility() {
        let data = months(&[[0.01, 0.01]; 6]);
        assert!(matches!(rolling_backtest(&data, &ew()), Err(Error::ZeroVolatility)));
    }

    #[test]
    fn sample_statistics() {
        let r = [0.01, 0.03, -0.02];
        let mean: f64 = 0.02 / 3.0;
        let var = ((0.01 - mean).powi(2) + (0.03 - mean).powi(2) + (-0.02 - mean).powi(2)) / 2.0;
        assert!((sharpe_ratio(&r).unwrap() - mean / var.sqrt()).abs() < 1e-14);
        assert!((certainty_equivalent(&r).unwrap() - (mean - var)).abs() < 1e-15);
        assert!(matches!(sharpe_ratio(&[0.1]), Err(Error::InsufficientReturns(1))));
    }

    #[test]
    fn window_errors_carry_index() {
        let data = months(&[[0.01, 0.03], [0.02, -0.02], [0.04, 0.00]]);
        let mut cfg = ew();
        cfg.window = 3;
        assert!(rolling_returns(&data, &cfg).is_err());
        cfg.window = 2;
        cfg.policy.kind = PolicyKind::NaiveDro;
        cfg.policy.schedule = RadiusSchedule::Fixed { epsilon: -1.0 };
        assert!(matches!(rolling_returns(&data, &cfg), Err(Error::Window { window: 1, .. })));
    }
}
