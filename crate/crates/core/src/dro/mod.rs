//! Type-1 Wasserstein DRO for piecewise-affine costs.
//!
//! The cost is `c(z, y) = max_k (f_k(z).y + g_k(z))` with `f_k`, `g_k` affine in
//! the decision `z`, and outcomes restricted to a polyhedron `{y : A y <= b}`.
//! Over the ball of radius `eps` around a weighted empirical measure, the
//! worst-case expectation is the LP
//!
//! ```text
//! min   lambda * eps + sum_i w_i s_i
//! s.t.  g_k(z) + f_k(z).y_i + gamma_ik.(b - A y_i) <= s_i      for all i, k
//!       -lambda <= (A^T gamma_ik - f_k(z))_j <= lambda        for all i, k, j
//!       gamma_ik >= 0,  z in Z
//! ```
//!
//! The per-coordinate bound on `lambda` makes the transport metric the L1 norm
//! on `y`. Without support constraints the `gamma` blocks drop out and the
//! bound becomes `|f_k(z)_j| <= lambda`.

mod oracle;
mod reformulation;
mod worst_case;

use serde::{Deserialize, Serialize};

use crate::data::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::kernel::WeightVector;
use crate::lp::{LpStatus, Relation};

pub use oracle::{primal_grid_value, regularization_gap};
pub use reformulation::{build_reformulation, evaluate_decision, solve_dro, LpLayout};
pub use worst_case::{worst_case_distribution, worst_case_with_lambda, WorstCase};

/// One affine piece `c_k(z, y) = (F z + f0).y + (gc.z + g0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    /// `d_y x d_z` matrix `F`.
    pub slope: Vec<Vec<f64>>,
    pub slope_offset: Vec<f64>,
    pub intercept: Vec<f64>,
    pub intercept_offset: f64,
}

impl AffinePiece {
    /// Piece whose `y`-slope and intercept do not depend on the decision.
    pub fn constant(dim_z: usize, slope: Vec<f64>, intercept: f64) -> Self {
        AffinePiece {
            slope: vec![vec![0.0; dim_z]; slope.len()],
            slope_offset: slope,
            intercept: vec![0.0; dim_z],
            intercept_offset: intercept,
        }
    }

    /// `f_k(z)`.
    pub fn slope_at(&self, z: &[f64]) -> Vec<f64> {
        self.slope
            .iter()
            .zip(&self.slope_offset)
            .map(|(row, f0)| f0 + dot(row, z))
            .collect()
    }

    /// `g_k(z)`.
    pub fn intercept_at(&self, z: &[f64]) -> f64 {
        self.intercept_offset + dot(&self.intercept, z)
    }

    pub fn value(&self, z: &[f64], y: &[f64]) -> f64 {
        dot(&self.slope_at(z), y) + self.intercept_at(z)
    }
}

/// Outcome set `{y : A y <= b}`. No rows means all of `R^{d_y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralSupport {
    dim: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl PolyhedralSupport {
    pub fn new(dim: usize, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        if dim == 0 {
            return Err(Error::invalid("outcome dimension must be positive"));
        }
        for row in &a {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::invalid("support constraints must be finite"));
        }
        Ok(PolyhedralSupport { dim, a, b })
    }

    pub fn unbounded(dim: usize) -> Self {
        PolyhedralSupport {
            dim,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// `lo <= y <= hi`, written as `-y <= -lo` and `y <= hi` per coordinate.
    /// Infinite bounds are skipped.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let dim = lo.len();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for j in 0..dim {
            if lo[j].is_nan() || hi[j].is_nan() || !(lo[j] < hi[j]) {
                return Err(Error::invalid(format!("box side {j} needs lo < hi")));
            }
            let mut e = vec![0.0; dim];
            if lo[j].is_finite() {
                e[j] = -1.0;
                a.push(e.clone());
                b.push(-lo[j]);
            }
            if hi[j].is_finite() {
                e[j] = 1.0;
                a.push(e);
                b.push(hi[j]);
            }
        }
        PolyhedralSupport::new(dim, a, b)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        PolyhedralSupport::boxed(&[lo], &[hi])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.a.iter().zip(&self.b).all(|(row, b)| dot(row, y) <= b + tol)
    }

    /// Coordinate bounds when every row involves a single coordinate.
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut lo = vec![f64::NEG_INFINITY; self.dim];
        let mut hi = vec![f64::INFINITY; self.dim];
        for (row, &b) in self.a.iter().zip(&self.b) {
            let mut nz = row.iter().enumerate().filter(|(_, v)| **v != 0.0);
            let (j, &v) = match (nz.next(), nz.next()) {
                (Some(first), None) => first,
                (None, _) if b >= 0.0 => continue,
                _ => return None,
            };
            if v > 0.0 {
                hi[j] = hi[j].min(b / v);
            } else {
                lo[j] = lo[j].max(b / v);
            }
        }
        Some((lo, hi))
    }

    pub fn is_bounded_box(&self) -> bool {
        self.as_box()
            .is_some_and(|(lo, hi)| lo.iter().chain(&hi).all(|v| v.is_finite()))
    }
}

/// `max_k c_k(z, y)` over a polyhedral outcome set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffineCost {
    dim_z: usize,
    pieces: Vec<AffinePiece>,
    support: PolyhedralSupport,
}

impl PiecewiseAffineCost {
    pub fn new(dim_z: usize, pieces: Vec<AffinePiece>, support: PolyhedralSupport) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invalid("cost needs at least one piece"));
        }
        let dim_y = support.dim();
        for p in &pieces {
            if p.slope.len() != dim_y || p.slope_offset.len() != dim_y {
                return Err(Error::DimensionMismatch {
                    expected: dim_y,
                    found: p.slope_offset.len(),
                });
            }
            if p.intercept.len() != dim_z || p.slope.iter().any(|r| r.len() != dim_z) {
                return Err(Error::DimensionMismatch {
                    expected: dim_z,
                    found: p.intercept.len(),
                });
            }
            let all = p.slope.iter().flatten().chain(&p.slope_offset).chain(&p.intercept);
            if all.chain([&p.intercept_offset]).any(|v| !v.is_finite()) {
                return Err(Error::invalid("cost coefficients must be finite"));
            }
        }
        Ok(PiecewiseAffineCost {
            dim_z,
            pieces,
            support,
        })
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    pub fn dim_y(&self) -> usize {
        self.support.dim()
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn support(&self) -> &PolyhedralSupport {
        &self.support
    }

    pub fn value(&self, z: &[f64], y: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.value(z, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of pieces within `tol` of the maximum at `(z, y)`.
    pub fn active_pieces(&self, z: &[f64], y: &[f64], tol: f64) -> Vec<usize> {
        let vals: Vec<f64> = self.pieces.iter().map(|p| p.value(z, y)).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..vals.len()).filter(|&k| vals[k] >= top - tol).collect()
    }

    /// Lipschitz constant in `y` with respect to the L1 metric:
    /// `max_k ||f_k(z)||_inf`.
    pub fn lipschitz_y(&self, z: &[f64]) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.slope_at(z))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_decision(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim_z {
            return Err(Error::DimensionMismatch {
                expected: self.dim_z,
                found: z.len(),
            });
        }
        Ok(())
    }
}

/// Wasserstein ball around a discrete nominal measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySet {
    pub center: DiscreteMeasure,
    pub order_p: f64,
    pub radius: f64,
}

impl AmbiguitySet {
    /// Type-1 ball.
    pub fn new(center: DiscreteMeasure, radius: f64) -> Result<Self> {
        AmbiguitySet::with_order(center, 1.0, radius)
    }

    pub fn with_order(center: DiscreteMeasure, order_p: f64, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be finite and >= 0, got {radius}")));
        }
        if !(order_p >= 1.0 && order_p.is_finite()) {
            return Err(Error::invalid(format!("order p must be in [1, inf), got {order_p}")));
        }
        Ok(AmbiguitySet {
            center,
            order_p,
            radius,
        })
    }

    /// Ball around `sum_i w_i delta_{y_i}`.
    pub fn weighted(outcomes: &[Vec<f64>], weights: &WeightVector, radius: f64) -> Result<Self> {
        if outcomes.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: outcomes.len(),
                found: weights.len(),
            });
        }
        let center = DiscreteMeasure::new(outcomes.to_vec(), weights.as_slice().to_vec())?;
        AmbiguitySet::new(center, radius)
    }
}

/// Rule mapping the sample size to a ball radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusSchedule {
    Fixed { epsilon: f64 },
    COverN { c: f64 },
    /// `sqrt(log(c1 / alpha) / (c2 n))`.
    Theorem { c1: f64, c2: f64, alpha: f64 },
    /// `k * m^(1 / dim_y)`, independent of `n`.
    RootM { k: f64, m: usize, dim_y: usize },
}

impl RadiusSchedule {
    pub fn radius(&self, n: usize) -> Result<f64> {
        radius(self, n)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RadiusSchedule::Fixed { .. } => "fixed",
            RadiusSchedule::COverN { .. } => "c_over_n",
            RadiusSchedule::Theorem { .. } => "theorem",
            RadiusSchedule::RootM { .. } => "root_m",
        }
    }
}

pub fn radius(schedule: &RadiusSchedule, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let nonneg = |name: &str, v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
        }
    };
    match *schedule {
        RadiusSchedule::Fixed { epsilon } => nonneg("epsilon", epsilon),
        RadiusSchedule::COverN { c } => Ok(nonneg("C", c)? / n as f64),
        RadiusSchedule::Theorem { c1, c2, alpha } => {
            if !(c1 > 0.0 && c2 > 0.0 && alpha > 0.0 && alpha < 1.0) {
                return Err(Error::invalid("theorem schedule needs c1, c2 > 0 and alpha in (0, 1)"));
            }
            let log = (c1 / alpha).ln();
            let min_n = (log / c2).ceil().max(1.0) as usize;
            if (n as f64) < log / c2 {
                return Err(Error::SampleTooSmall { n, min_n });
            }
            Ok((log / (c2 * n as f64)).max(0.0).sqrt())
        }
        RadiusSchedule::RootM { k, m, dim_y } => {
            if m == 0 || dim_y == 0 {
                return Err(Error::invalid("root_m schedule needs m, dim_y >= 1"));
            }
            Ok(nonneg("k", k)? * (m as f64).powf(1.0 / dim_y as f64))
        }
    }
}

/// Feasible set `Z` for the decision: coordinate bounds plus linear rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionConstraints {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl DecisionConstraints {
    pub fn free(dim: usize) -> Self {
        DecisionConstraints {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            rows: Vec::new(),
        }
    }

    pub fn nonnegative(dim: usize) -> Self {
        DecisionConstraints {
            lower: vec![0.0; dim],
            ..DecisionConstraints::free(dim)
        }
    }

    /// `z = value`, used to evaluate a given decision.
    pub fn fixed(value: &[f64]) -> Self {
        DecisionConstraints {
            lower: value.to_vec(),
            upper: value.to_vec(),
            rows: Vec::new(),
        }
    }

    /// The first `simplex_dim` coordinates lie on the probability simplex;
    /// the rest are free.
    pub fn simplex(dim: usize, simplex_dim: usize) -> Self {
        let mut c = DecisionConstraints::free(dim);
        let mut row = vec![0.0; dim];
        for j in 0..simplex_dim.min(dim) {
            c.lower[j] = 0.0;
            row[j] = 1.0;
        }
        c.rows.push((row, Relation::Eq, 1.0));
        c
    }

    pub fn with_bounds(mut self, j: usize, lo: f64, hi: f64) -> Self {
        self.lower[j] = lo;
        self.upper[j] = hi;
        self
    }

    pub fn with_row(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.rows.push((coeffs, relation, rhs));
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[(Vec<f64>, Relation, f64)] {
        &self.rows
    }
}

/// Solution of the joint LP over the decision and the dual variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroSolution {
    pub decision: Vec<f64>,
    /// Optimal worst-case expected cost.
    pub value: f64,
    pub lambda: f64,
    pub slacks: Vec<f64>,
    pub status: LpStatus,
}

impl DroSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            s => Err(Error::NotOptimal(s.as_str())),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
