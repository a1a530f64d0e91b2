//! Exact Wasserstein distances between discrete measures.
//!
//! The transport problem is solved as a dense LP, which is plenty for the
//! few-hundred-atom instances this crate produces. Scalar type-1 distances also
//! have a closed form, `W1 = integral |F_mu - F_nu|`, used by the concentration
//! study and cross-checked against the LP in tests.

use serde::{Deserialize, Serialize};

use crate::data::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::lp::{self, LpModel, Relation};

/// Norm on the outcome space used as transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundNorm {
    #[default]
    Euclidean,
    L1,
}

impl GroundNorm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            GroundNorm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            GroundNorm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Optimal transport plan between two measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    /// `plan[i][j]` is the mass moved from atom `i` of the first measure to
    /// atom `j` of the second.
    pub plan: Vec<Vec<f64>>,
    /// `sum_ij plan_ij |a_i - b_j|^p`, before taking the p-th root.
    pub cost_pow: f64,
    pub order: f64,
}

impl Coupling {
    pub fn distance(&self) -> f64 {
        self.cost_pow.max(0.0).powf(1.0 / self.order)
    }
}

/// Type-`p` Wasserstein distance under the Euclidean ground norm.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(f64, Coupling)> {
    wasserstein_with_norm(mu, nu, p, GroundNorm::Euclidean)
}

pub fn wasserstein_with_norm(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    norm: GroundNorm,
) -> Result<(f64, Coupling)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("order p must be in [1, inf), got {p}")));
    }
    let (m, k) = (mu.len(), nu.len());
    let mut model = LpModel::new();
    for a in mu.support() {
        for b in nu.support() {
            model.add_var(norm.distance(a, b).powf(p), 0.0, f64::INFINITY);
        }
    }
    for (i, &w) in mu.weights().iter().enumerate() {
        let terms: Vec<_> = (0..k).map(|j| (i * k + j, 1.0)).collect();
        model.add_constraint(&terms, Relation::Eq, w);
    }
    for (j, &w) in nu.weights().iter().enumerate() {
        let terms: Vec<_> = (0..m).map(|i| (i * k + j, 1.0)).collect();
        model.add_constraint(&terms, Relation::Eq, w);
    }
    let sol = lp::solve(&model)?.require_optimal()?;
    // drop round-off mass so that the p-th root does not amplify it
    let plan: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..k)
                .map(|j| match sol.values[i * k + j] {
                    v if v > 1e-13 => v,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let cost_pow = plan
        .iter()
        .flatten()
        .zip(model.objective())
        .map(|(q, c)| q * c)
        .sum();
    let coupling = Coupling { plan, cost_pow, order: p };
    Ok((coupling.distance(), coupling))
}

fn scalar_atoms(m: &DiscreteMeasure) -> Result<Vec<(f64, f64)>> {
    if m.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "scalar transport needs d_y = 1, got {}",
            m.dim()
        )));
    }
    Ok(m.atoms().map(|(y, w)| (y[0], w)).collect())
}

/// `W1` between scalar measures via the CDF formula.
pub fn wasserstein1_scalar(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(w1_cdf(scalar_atoms(mu)?, scalar_atoms(nu)?))
}

/// `integral |F_a - F_b|` for weighted scalar atoms.
pub(crate) fn w1_cdf(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> f64 {
    // signed masses: +a, -b; the running sum is F_a - F_b
    let mut events: Vec<(f64, f64)> = a
        .into_iter()
        .chain(b.into_iter().map(|(y, w)| (y, -w)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cdf_gap = 0.0;
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// `|W1 primal - Kantorovich dual|` for scalar measures.
///
/// The dual maximizes `sum_s phi(s) (mu(s) - nu(s))` over potentials on the
/// merged support with `|phi(s) - phi(t)| <= |s - t|`. In one dimension the
/// constraints between consecutive points imply all the others.
pub fn kantorovich_dual_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (primal, dual) = kantorovich_values(mu, nu)?;
    Ok((primal - dual).abs())
}

/// `(primal W1 from the transport LP, optimum of the potential LP)`.
pub fn kantorovich_values(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, f64)> {
    let a = scalar_atoms(mu)?;
    let b = scalar_atoms(nu)?;
    let mut points: Vec<f64> = a.iter().chain(&b).map(|p| p.0).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let index = |y: f64| points.binary_search_by(|p| p.total_cmp(&y)).expect("merged support");
    let mut net = vec![0.0; points.len()];
    for &(y, w) in &a {
        net[index(y)] += w;
    }
    for &(y, w) in &b {
        net[index(y)] -= w;
    }

    let mut model = LpModel::new();
    for (s, &mass) in net.iter().enumerate() {
        // maximize => minimize the negation; phi is pinned at the left end
        let bound = if s == 0 { 0.0 } else { f64::NEG_INFINITY };
        let upper = if s == 0 { 0.0 } else { f64::INFINITY };
        model.add_var(-mass, bound, upper);
    }
    for s in 1..points.len() {
        let gap = points[s] - points[s - 1];
        model.add_constraint(&[(s, 1.0), (s - 1, -1.0)], Relation::Le, gap);
        model.add_constraint(&[(s, 1.0), (s - 1, -1.0)], Relation::Ge, -gap);
    }
    let dual = -lp::solve(&model)?.require_optimal()?.objective_value;
    let (primal, _) = wasserstein_p(mu, nu, 1.0)?;
    Ok((primal, dual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::from_scalars(points, weights).unwrap()
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let mu = scalar(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        let (d, plan) = wasserstein_p(&mu, &mu, 2.0).unwrap();
        assert!(d.abs() < 1e-12);
        assert!((plan.plan[1][1] - 0.5).abs() < 1e-12);
        assert_eq!(kantorovich_dual_check(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn point_masses() {
        let (d, _) = wasserstein_p(&scalar(&[2.0], &[1.0]), &scalar(&[-1.5], &[1.0]), 1.0).unwrap();
        assert!((d - 3.5).abs() < 1e-12);
        let (primal, dual) = kantorovich_values(&scalar(&[0.0], &[1.0]), &scalar(&[1.0], &[1.0])).unwrap();
        assert!((primal - 1.0).abs() < 1e-12 && (dual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_atoms_to_midpoint() {
        let mu = scalar(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = scalar(&[0.5], &[1.0]);
        let (d, _) = wasserstein_p(&mu, &nu, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!((wasserstein1_scalar(&mu, &nu).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn euclidean_and_l1_ground_norms() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![3.0, 4.0]]).unwrap();
        assert!((wasserstein_p(&mu, &nu, 1.0).unwrap().0 - 5.0).abs() < 1e-12);
        let (d, _) = wasserstein_with_norm(&mu, &nu, 1.0, GroundNorm::L1).unwrap();
        assert!((d - 7.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = scalar(&[0.0], &[1.0]);
        let b = DiscreteMeasure::uniform(vec![vec![0.0, 1.0]]).unwrap();
        assert!(matches!(wasserstein_p(&a, &b, 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(wasserstein_p(&a, &a, 0.5).is_err());
        assert!(matches!(kantorovich_dual_check(&b, &b), Err(Error::Unsupported(_))));
    }
}
