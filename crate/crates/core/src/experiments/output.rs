//! CSV layouts for experiment results.

use std::io::Write;

use serde::Serialize;

use crate::dro::RadiusSchedule;
use crate::error::{Error, Result};

use super::backtest::BacktestMetrics;
use super::concentration::ConcentrationRow;
use super::disappointment::DisappointmentRow;
use crate::apps::Policy;

#[derive(Debug, Serialize)]
struct ConcentrationRecord {
    n: usize,
    rep_count: usize,
    median_w1: f64,
}

/// One line of a backtest summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestRow {
    pub portfolio: String,
    pub policy: String,
    /// Scale parameter of the radius rule; empty for non-robust policies.
    pub k: Option<f64>,
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "ECVaR")]
    pub ecvar: f64,
    #[serde(rename = "CEQ")]
    pub ceq: f64,
}

impl BacktestRow {
    pub fn new(portfolio: impl Into<String>, policy: &Policy, metrics: &BacktestMetrics) -> Self {
        BacktestRow {
            portfolio: portfolio.into(),
            policy: policy.kind.to_string(),
            k: policy.kind.is_robust().then(|| schedule_scale(&policy.schedule)),
            sr: metrics.sharpe,
            ecvar: metrics.e_cvar,
            ceq: metrics.ceq,
        }
    }
}

/// The multiplier a schedule applies: `epsilon`, `C`, `k`, or `sqrt(log(c1/alpha)/c2)`.
pub fn schedule_scale(schedule: &RadiusSchedule) -> f64 {
    match *schedule {
        RadiusSchedule::Fixed { epsilon } => epsilon,
        RadiusSchedule::COverN { c } => c,
        RadiusSchedule::RootM { k, .. } => k,
        RadiusSchedule::Theorem { c1, c2, alpha } => ((c1 / alpha).ln() / c2).max(0.0).sqrt(),
    }
}

fn write_rows<T: Serialize>(mut out: impl Write, comment: Option<&str>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: "<output>".into(),
        source: e,
    };
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(io)
}

/// `policy,n,epsilon_rule,epsilon,sims,rate,failures`, preceded by `# <comment>`
/// when given.
pub fn write_disappointment_csv(out: impl Write, comment: Option<&str>, rows: &[DisappointmentRow]) -> Result<()> {
    write_rows(out, comment, rows)
}

/// `n,rep_count,median_w1`.
pub fn write_concentration_csv(out: impl Write, comment: Option<&str>, rows: &[ConcentrationRow]) -> Result<()> {
    write_rows(
        out,
        comment,
        rows.iter().map(|r| ConcentrationRecord {
            n: r.n,
            rep_count: r.rep_count,
            median_w1: r.median_w1,
        }),
    )
}

/// `portfolio,policy,k,SR,ECVaR,CEQ`.
pub fn write_backtest_csv(out: impl Write, comment: Option<&str>, rows: &[BacktestRow]) -> Result<()> {
    write_rows(out, comment, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::PolicyKind;

    #[test]
    fn headers() {
        let mut buf = Vec::new();
        let row = DisappointmentRow {
            policy: PolicyKind::NwDro,
            n: 20,
            epsilon_rule: "fixed".into(),
            epsilon: 2.0,
            sims: 200,
            rate: 0.125,
            failures: 0,
        };
        write_disappointment_csv(&mut buf, Some("config-hash: ab"), &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# config-hash: ab\npolicy,n,epsilon_rule,epsilon,sims,rate,failures\nnw-dro,20,fixed,2.0,200,0.125,0\n"
        );

        let mut buf = Vec::new();
        let row = ConcentrationRow {
            n: 100,
            rep_count: 50,
            median_w1: 1.5,
            resamples: 3,
        };
        write_concentration_csv(&mut buf, None, &[row]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,rep_count,median_w1\n100,50,1.5\n");

        let mut buf = Vec::new();
        let row = BacktestRow {
            portfolio: "10ind".into(),
            policy: "ew".into(),
            k: None,
            sr: 0.2,
            ecvar: 0.1,
            ceq: 0.01,
        };
        write_backtest_csv(&mut buf, None, &[row]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "portfolio,policy,k,SR,ECVaR,CEQ\n10ind,ew,,0.2,0.1,0.01\n");
    }
}
