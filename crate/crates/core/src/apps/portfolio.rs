use serde::{Deserialize, Serialize};

use crate::dro::{solve_dro, AffinePiece, AmbiguitySet, DecisionConstraints, DroSolution, PiecewiseAffineCost, PolyhedralSupport};
use crate::error::{Error, Result};
use crate::kernel::WeightVector;

/// Mean-CVaR allocation: minimize `CVaR_eta(-Y.z) - gamma E[Y.z]` over the
/// simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortfolioParams {
    pub eta: f64,
    pub gamma: f64,
}

impl Default for PortfolioParams {
    fn default() -> Self {
        PortfolioParams { eta: 0.05, gamma: 1.0 }
    }
}

impl PortfolioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid(format!("CVaR level eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Cost over the decision `(z, v)` with `d` assets:
    /// `max{-(gamma + 1/eta) y.z + (1 - 1/eta) v, -gamma y.z + v}`.
    pub fn cost(&self, assets: usize) -> Result<PiecewiseAffineCost> {
        self.validate()?;
        if assets == 0 {
            return Err(Error::invalid("portfolio needs at least one asset"));
        }
        let inv = 1.0 / self.eta;
        let piece = |scale: f64, v_coef: f64| {
            let slope = (0..assets)
                .map(|j| {
                    let mut row = vec![0.0; assets + 1];
                    row[j] = -scale;
                    row
                })
                .collect();
            let mut intercept = vec![0.0; assets + 1];
            intercept[assets] = v_coef;
            AffinePiece {
                slope,
                slope_offset: vec![0.0; assets],
                intercept,
                intercept_offset: 0.0,
            }
        };
        let pieces = vec![piece(self.gamma + inv, 1.0 - inv), piece(self.gamma, 1.0)];
        PiecewiseAffineCost::new(assets + 1, pieces, PolyhedralSupport::unbounded(assets))
    }
}

/// Kernel-weighted DRO portfolio. The returned decision is `(z_1..z_d, v)`
/// with `z` on the simplex and `v` the CVaR threshold.
pub fn solve_portfolio(
    params: &PortfolioParams,
    weights: &WeightVector,
    samples: &[Vec<f64>],
    eps: f64,
) -> Result<DroSolution> {
    let d = samples.first().map_or(0, Vec::len);
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let cost = params.cost(d)?;
    let amb = AmbiguitySet::weighted(samples, weights, eps)?;
    solve_dro(&cost, &amb, &DecisionConstraints::simplex(d + 1, d))
}

/// Empirical CVaR of the loss `-r`:
/// `min_v v + (1/(eta T)) sum_t (-r_t - v)_+`, attained at some `v = -r_t`.
pub fn empirical_cvar(returns: &[f64], eta: f64) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::invalid("empirical CVaR needs at least one return"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("CVaR level eta must lie in (0, 1), got {eta}")));
    }
    let scale = 1.0 / (eta * returns.len() as f64);
    let objective = |v: f64| v + scale * returns.iter().map(|r| (-r - v).max(0.0)).sum::<f64>();
    Ok(returns
        .iter()
        .map(|r| objective(-r))
        .fold(f64::INFINITY, f64::min))
}

/// `1/d` in every asset.
pub fn equally_weighted(d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::invalid("equally weighted portfolio needs d >= 1"));
    }
    Ok(vec![1.0 / d as f64; d])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvar_examples() {
        assert!((empirical_cvar(&[0.03; 7], 0.05).unwrap() + 0.03).abs() < 1e-15);
        let mut r = vec![0.0; 20];
        r[0] = -1.0;
        assert!((empirical_cvar(&r, 0.05).unwrap() - 1.0).abs() < 1e-12);
        assert!(empirical_cvar(&[], 0.05).is_err());
        assert!(empirical_cvar(&[1.0], 1.0).is_err());
    }

    #[test]
    fn cvar_matches_grid_search() {
        let r = [0.012, -0.034, 0.051, -0.002, 0.007, -0.061, 0.023, 0.018];
        let eta = 0.3;
        let exact = empirical_cvar(&r, eta).unwrap();
        let obj = |v: f64| v + r.iter().map(|x| (-x - v).max(0.0)).sum::<f64>() / (eta * r.len() as f64);
        let spacing = 0.2 / 10_000.0;
        let grid = (0..=10_000).map(|k| -0.1 + k as f64 * spacing).map(obj).fold(f64::INFINITY, f64::min);
        assert!(exact <= grid + 1e-12);
        assert!(grid - exact <= spacing * (1.0 + 1.0 / eta));
    }

    #[test]
    fn equal_weights() {
        assert_eq!(equally_weighted(1).unwrap(), vec![1.0]);
        assert_eq!(equally_weighted(4).unwrap(), vec![0.25; 4]);
        assert!(equally_weighted(0).is_err());
    }

    #[test]
    fn deterministic_single_asset() {
        let p = PortfolioParams::default();
        let sol = solve_portfolio(&p, &WeightVector::uniform(3), &vec![vec![0.02]; 3], 0.0).unwrap();
        assert!((sol.decision[0] - 1.0).abs() < 1e-12);
        assert!((sol.decision[1] + 0.02).abs() < 1e-9);
        assert!((sol.value - (-0.02 - 0.02)).abs() < 1e-9);
    }

    #[test]
    fn dominant_asset_takes_everything() {
        let samples = vec![vec![0.05, 0.01], vec![0.02, -0.01], vec![-0.01, -0.03], vec![0.04, 0.0]];
        let sol = solve_portfolio(&PortfolioParams::default(), &WeightVector::uniform(4), &samples, 0.0).unwrap();
        assert!((sol.decision[0] - 1.0).abs() < 1e-9 && sol.decision[1].abs() < 1e-9);
    }

    #[test]
    fn asset_count_mismatch() {
        let err = solve_portfolio(&PortfolioParams::default(), &WeightVector::uniform(2), &[vec![0.1, 0.2], vec![0.1]], 0.0);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
