//! Dense linear programming.
//!
//! Models are `min c.v` subject to row constraints `a.v {<=,=,>=} rhs` and
//! per-variable bounds `lo <= v <= hi` (either side may be infinite). They
//! are solved by a bounded revised simplex method; see [`simplex`].
//!
//! Tolerances used by the solver:
//!
//! | quantity                         | value  |
//! |----------------------------------|--------|
//! | primal feasibility               | 1e-8   |
//! | reduced-cost optimality          | 1e-9   |
//! | minimum pivot magnitude          | 1e-9   |

mod export;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::solve;

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LpModel {
    pub fn new() -> Self {
        LpModel::default()
    }

    /// Adds a variable and returns its index. Existing rows get a zero
    /// coefficient for it.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        for c in &mut self.constraints {
            c.coeffs.push(0.0);
        }
        self.objective.len() - 1
    }

    /// Adds `count` variables sharing cost and bounds; returns the first index.
    pub fn add_vars(&mut self, count: usize, cost: f64, lower: f64, upper: f64) -> usize {
        let first = self.num_vars();
        for _ in 0..count {
            self.add_var(cost, lower, upper);
        }
        first
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Adds a constraint from `(variable, coefficient)` pairs. Repeated
    /// variables accumulate.
    pub fn add_constraint(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.push_row(coeffs, relation, rhs)
    }

    /// Adds a dense constraint row; its length must equal the variable count.
    pub fn add_dense_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<usize> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars(),
                found: coeffs.len(),
            });
        }
        Ok(self.push_row(coeffs, relation, rhs))
    }

    fn push_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// The face of optimal solutions certified by `sol`: variables with a
    /// reduced cost beyond `tol` are pinned to the bound they rest on and rows
    /// with a dual beyond `tol` become equalities. Minimizing a secondary
    /// objective over the face is an exact lexicographic second stage.
    pub fn optimal_face(&self, sol: &LpSolution, tol: f64) -> LpModel {
        let mut face = self.clone();
        for (j, &d) in sol.reduced_costs.iter().enumerate() {
            if d > tol && self.lower[j].is_finite() {
                face.upper[j] = self.lower[j];
            } else if d < -tol && self.upper[j].is_finite() {
                face.lower[j] = self.upper[j];
            }
        }
        for (c, &y) in face.constraints.iter_mut().zip(&sol.duals) {
            if y.abs() > tol {
                c.relation = Relation::Eq;
            }
        }
        face
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Scales the objective in place.
    pub fn scale_objective(&mut self, factor: f64) {
        self.objective.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_vars() == 0 {
            return Err(Error::invalid("linear program has no variables"));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("objective has a non-finite coefficient"));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("variable {j} has invalid bounds [{lo}, {hi}]")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.num_vars() {
                return Err(Error::invalid(format!("row {i} has the wrong length")));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Plain-text listing of the model; see the `export` module for the layout.
    pub fn to_listing(&self) -> String {
        export::listing(self)
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for ((&v, &lo), &hi) in values.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(values).map(|(a, v)| a * v).sum();
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

/// Result of [`solve`].
///
/// When optimal, `duals[i]` is the multiplier of row `i` and
/// `reduced_costs = c - A^T duals`. For a minimization, `<=` rows have
/// nonpositive duals and `>=` rows nonnegative ones; a variable resting at its
/// lower bound has a nonnegative reduced cost, one at its upper bound a
/// nonpositive one, and basic variables zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            s => Err(Error::NotOptimal(s.as_str())),
        }
    }

    /// `b.y + sum_j d_j v_j`, which equals the primal objective at a
    /// complementary pair.
    pub fn dual_objective(&self, model: &LpModel) -> f64 {
        let rows: f64 = model
            .constraints()
            .iter()
            .zip(&self.duals)
            .map(|(c, y)| c.rhs * y)
            .sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&self.values)
            .map(|(d, v)| if *d == 0.0 { 0.0 } else { d * v })
            .sum();
        rows + bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_extends_rows_when_adding_vars() {
        let mut m = LpModel::new();
        let x = m.add_var(1.0, 0.0, f64::INFINITY);
        m.add_constraint(&[(x, 1.0)], Relation::Ge, 1.0);
        let y = m.add_var(1.0, 0.0, f64::INFINITY);
        assert_eq!(m.constraints()[0].coeffs, vec![1.0, 0.0]);
        m.add_constraint(&[(y, 2.0), (y, 1.0)], Relation::Le, 4.0);
        assert_eq!(m.constraints()[1].coeffs, vec![0.0, 3.0]);
        assert!(m.add_dense_constraint(vec![1.0], Relation::Eq, 0.0).is_err());
    }

    #[test]
    fn validation_rejects_nan() {
        let mut m = LpModel::new();
        assert!(m.validate().is_err());
        let x = m.add_var(f64::NAN, 0.0, 1.0);
        assert!(m.validate().is_err());
        m.set_cost(x, 1.0);
        m.add_constraint(&[(x, f64::NAN)], Relation::Le, 1.0);
        assert!(m.validate().is_err());
        assert!(solve(&m).is_err());
    }
}
