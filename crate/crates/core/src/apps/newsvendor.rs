use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dro::{AffinePiece, DroSolution, PiecewiseAffineCost, PolyhedralSupport};
use crate::error::{Error, Result};
use crate::kernel::WeightVector;
use crate::lp::{self, LpModel, LpStatus, Relation};

/// Newsvendor with cost `max{b (y - z), h (z - y)}` and demand in `[L, U]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewsvendorParams {
    /// Backorder cost `b`.
    pub backorder: f64,
    /// Holding cost `h`.
    pub holding: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for NewsvendorParams {
    fn default() -> Self {
        NewsvendorParams {
            backorder: 10.0,
            holding: 1.0,
            lower: 0.0,
            upper: 300.0,
        }
    }
}

impl NewsvendorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.backorder > 0.0 && self.holding > 0.0) || !self.backorder.is_finite() || !self.holding.is_finite() {
            return Err(Error::invalid("newsvendor costs b and h must be positive"));
        }
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::invalid("newsvendor support needs finite L < U"));
        }
        Ok(())
    }

    /// `b / (b + h)`.
    pub fn critical_fractile(&self) -> f64 {
        self.backorder / (self.backorder + self.holding)
    }

    pub fn cost_at(&self, z: f64, y: f64) -> f64 {
        (self.backorder * (y - z)).max(self.holding * (z - y))
    }

    /// The cost as a generic piecewise-affine function of `(z, y)`.
    pub fn cost(&self) -> Result<PiecewiseAffineCost> {
        self.validate()?;
        let (b, h) = (self.backorder, self.holding);
        let pieces = vec![
            AffinePiece {
                slope: vec![vec![0.0]],
                slope_offset: vec![b],
                intercept: vec![-b],
                intercept_offset: 0.0,
            },
            AffinePiece {
                slope: vec![vec![0.0]],
                slope_offset: vec![-h],
                intercept: vec![h],
                intercept_offset: 0.0,
            },
        ];
        PiecewiseAffineCost::new(1, pieces, PolyhedralSupport::interval(self.lower, self.upper)?)
    }
}

/// Kernel-weighted DRO newsvendor via its explicit LP.
///
/// Variables are `z >= 0`, `lambda >= 0`, free `s_i`, and four support
/// multipliers `gamma_i1..gamma_i4 >= 0` per sample:
///
/// ```text
/// -b z + (y_i - L) g1 + (U - y_i) g2 <= s_i - b y_i
///  h z + (y_i - L) g3 + (U - y_i) g4 <= s_i + h y_i
/// -lambda + b <= g2 - g1 <= lambda + b
/// -lambda - h <= g4 - g3 <= lambda - h
/// ```
///
/// Among optimal order quantities the smallest is returned, so `eps = 0`
/// yields the lowest weighted `b/(b+h)`-quantile of the samples.
pub fn solve_newsvendor(
    params: &NewsvendorParams,
    weights: &WeightVector,
    samples: &[f64],
    eps: f64,
) -> Result<DroSolution> {
    params.validate()?;
    if weights.len() != samples.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            found: weights.len(),
        });
    }
    if samples.is_empty() {
        return Err(Error::invalid("newsvendor needs at least one sample"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("radius must be finite and >= 0, got {eps}")));
    }
    let (lo, hi) = (params.lower, params.upper);
    if let Some(i) = samples.iter().position(|y| !(lo..=hi).contains(y)) {
        return Err(Error::invalid(format!(
            "sample {i} ({}) outside demand support [{lo}, {hi}]",
            samples[i]
        )));
    }
    let (b, h) = (params.backorder, params.holding);
    let n = samples.len();

    let mut m = LpModel::new();
    let z = m.add_var(0.0, 0.0, f64::INFINITY);
    let lam = m.add_var(eps, 0.0, f64::INFINITY);
    let s0 = m.add_vars(n, 0.0, f64::NEG_INFINITY, f64::INFINITY);
    for (i, &w) in weights.as_slice().iter().enumerate() {
        m.set_cost(s0 + i, w);
    }
    let g0 = m.add_vars(4 * n, 0.0, 0.0, f64::INFINITY);
    for (i, &y) in samples.iter().enumerate() {
        let s = s0 + i;
        let g = |k: usize| g0 + 4 * i + k;
        m.add_constraint(&[(z, -b), (g(0), y - lo), (g(1), hi - y), (s, -1.0)], Relation::Le, -b * y);
        m.add_constraint(&[(z, h), (g(2), y - lo), (g(3), hi - y), (s, -1.0)], Relation::Le, h * y);
        m.add_constraint(&[(g(1), 1.0), (g(0), -1.0), (lam, 1.0)], Relation::Ge, b);
        m.add_constraint(&[(g(1), 1.0), (g(0), -1.0), (lam, -1.0)], Relation::Le, b);
        m.add_constraint(&[(g(3), 1.0), (g(2), -1.0), (lam, 1.0)], Relation::Ge, -h);
        m.add_constraint(&[(g(3), 1.0), (g(2), -1.0), (lam, -1.0)], Relation::Le, -h);
    }
    let first = lp::solve(&m)?;
    if first.status != LpStatus::Optimal {
        return Ok(DroSolution {
            decision: Vec::new(),
            value: f64::NAN,
            lambda: f64::NAN,
            slacks: Vec::new(),
            status: first.status,
        });
    }

    // Second stage: smallest z on the optimal face.
    let mut lex = m.optimal_face(&first, 1e-9);
    for j in 0..lex.num_vars() {
        lex.set_cost(j, 0.0);
    }
    lex.set_cost(z, 1.0);
    let best = first.objective_value;
    let slack = best + 1e-9 * (1.0 + best.abs());
    let chosen = match lp::solve(&lex) {
        Ok(sol) if sol.is_optimal() && sol.values[z] <= first.values[z] && m.evaluate(&sol.values) <= slack => sol,
        _ => first,
    };
    // The inner supremum per sample, exactly: with z and lambda fixed it is
    // attained at y_i or an end of [L, U]. The LP's own s_i can sit loose by
    // up to the optimality tolerance over w_i when w_i is tiny.
    let (zv, lv) = (chosen.values[z], chosen.values[lam]);
    let slacks: Vec<f64> = samples
        .iter()
        .map(|&y| {
            [y, lo, hi]
                .iter()
                .map(|&t| params.cost_at(zv, t) - lv * (t - y).abs())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let value = lv * eps + weights.as_slice().iter().zip(&slacks).map(|(w, s)| w * s).sum::<f64>();
    Ok(DroSolution {
        decision: vec![zv],
        value,
        lambda: lv,
        slacks,
        status: LpStatus::Optimal,
    })
}

/// `E[c(z, Y)]` for `Y ~ Normal(mean, std^2)`, in closed form.
pub fn true_newsvendor_cost(params: &NewsvendorParams, z: f64, mean: f64, std: f64) -> Result<f64> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::invalid(format!("demand std must be positive, got {std}")));
    }
    let phi = Normal::standard();
    let u = (mean - z) / std;
    let density = phi.pdf(u);
    let shortage = (mean - z) * phi.cdf(u) + std * density;
    let excess = (z - mean) * phi.cdf(-u) + std * density;
    Ok(params.backorder * shortage + params.holding * excess)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_point_fractile() {
        let samples: Vec<f64> = (1..=11).map(f64::from).collect();
        let sol = solve_newsvendor(&NewsvendorParams::default(), &WeightVector::uniform(11), &samples, 0.0).unwrap();
        assert!((sol.decision[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn single_sample_is_matched() {
        let sol = solve_newsvendor(&NewsvendorParams::default(), &WeightVector::uniform(1), &[42.0], 0.0).unwrap();
        assert!((sol.decision[0] - 42.0).abs() < 1e-9);
        assert!(sol.value.abs() < 1e-9);
    }

    #[test]
    fn out_of_support_sample_is_rejected() {
        let err = solve_newsvendor(&NewsvendorParams::default(), &WeightVector::uniform(2), &[5.0, 301.0], 1.0);
        assert!(matches!(err, Err(Error::InvalidInput(m)) if m.contains("sample 1")));
    }

    #[test]
    fn closed_form_cost() {
        let p = NewsvendorParams {
            backorder: 1.0,
            holding: 1.0,
            ..Default::default()
        };
        let v = true_newsvendor_cost(&p, 100.0, 100.0, 4.0).unwrap();
        assert!((v - 4.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let far = true_newsvendor_cost(&NewsvendorParams::default(), 1e4, 100.0, 4.0).unwrap();
        assert!((far - (1e4 - 100.0)).abs() < 1e-9);
        assert!(true_newsvendor_cost(&p, 1.0, 1.0, 0.0).is_err());
    }
}
