//! Bounded revised simplex with an explicit dense basis inverse.
//!
//! Rows are brought to equality form with one slack per inequality; a
//! phase-one objective over per-row artificials finds a feasible basis.
//! Pricing is Dantzig's largest reduced cost until the pivot count exceeds
//! `10 * (rows + columns)`, after which Bland's smallest-index rule takes over.
//! Ratio-test ties go to the lowest variable index.

use super::{LpModel, LpSolution, LpStatus, Relation, FEASIBILITY_TOL, OPTIMALITY_TOL};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    ncols: usize,
    /// Column-major constraint matrix including slacks and artificials.
    cols: Vec<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Row-major `m x m` inverse of the basis matrix.
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    bland_after: usize,
    max_iterations: usize,
}

/// Solves `model`. Infeasible and unbounded programs are reported through
/// [`LpSolution::status`]; malformed models are errors.
pub fn solve(model: &LpModel) -> Result<LpSolution> {
    model.validate()?;
    let n = model.num_vars();

    if model
        .lower()
        .iter()
        .zip(model.upper())
        .any(|(lo, hi)| lo > &(hi + FEASIBILITY_TOL))
    {
        return Ok(not_optimal(LpStatus::Infeasible, n, model.num_constraints()));
    }

    let mut kept = Vec::new();
    for (i, row) in model.constraints().iter().enumerate() {
        if row.coeffs.iter().all(|&a| a == 0.0) {
            let ok = match row.relation {
                Relation::Le => row.rhs >= -FEASIBILITY_TOL,
                Relation::Ge => row.rhs <= FEASIBILITY_TOL,
                Relation::Eq => row.rhs.abs() <= FEASIBILITY_TOL,
            };
            if !ok {
                return Ok(not_optimal(LpStatus::Infeasible, n, model.num_constraints()));
            }
        } else {
            kept.push(i);
        }
    }

    let mut lp = Simplex::build(model, &kept);
    let art_start = lp.ncols - lp.m;

    let phase_one: Vec<f64> = (0..lp.ncols).map(|j| if j >= art_start { 1.0 } else { 0.0 }).collect();
    lp.run(&phase_one)?;
    lp.refactor()?;
    let infeasibility: f64 = (art_start..lp.ncols).map(|j| lp.x[j].max(0.0)).sum();
    let b_scale = 1.0 + lp.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeasibility > FEASIBILITY_TOL * b_scale {
        let mut sol = not_optimal(LpStatus::Infeasible, n, model.num_constraints());
        sol.iterations = lp.iterations;
        return Ok(sol);
    }
    for j in art_start..lp.ncols {
        lp.hi[j] = 0.0;
        if lp.state[j] != VarState::Basic {
            lp.x[j] = 0.0;
            lp.state[j] = VarState::AtLower;
        }
    }

    let mut phase_two = vec![0.0; lp.ncols];
    phase_two[..n].copy_from_slice(model.objective());
    if let PhaseEnd::Unbounded = lp.run(&phase_two)? {
        let mut sol = not_optimal(LpStatus::Unbounded, n, model.num_constraints());
        sol.values = lp.x[..n].to_vec();
        sol.objective_value = f64::NEG_INFINITY;
        sol.iterations = lp.iterations;
        return Ok(sol);
    }
    lp.refactor()?;

    let y = lp.duals(&phase_two);
    let reduced: Vec<f64> = (0..n)
        .map(|j| {
            if lp.state[j] == VarState::Basic {
                0.0
            } else {
                phase_two[j] - dot(lp.col(j), &y)
            }
        })
        .collect();
    let mut duals = vec![0.0; model.num_constraints()];
    for (k, &i) in kept.iter().enumerate() {
        duals[i] = y[k];
    }
    let values = lp.x[..n].to_vec();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: model.evaluate(&values),
        values,
        duals,
        reduced_costs: reduced,
        iterations: lp.iterations,
    })
}

fn not_optimal(status: LpStatus, n: usize, rows: usize) -> LpSolution {
    LpSolution {
        status,
        values: vec![f64::NAN; n],
        objective_value: match status {
            LpStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        },
        duals: vec![f64::NAN; rows],
        reduced_costs: vec![f64::NAN; n],
        iterations: 0,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Simplex {
    fn build(model: &LpModel, kept: &[usize]) -> Self {
        let n = model.num_vars();
        let m = kept.len();
        let rows: Vec<_> = kept.iter().map(|&i| &model.constraints()[i]).collect();
        let slacks = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let ncols = n + slacks + m;

        let mut cols = vec![0.0; ncols * m];
        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        for j in 0..n {
            for (k, row) in rows.iter().enumerate() {
                cols[j * m + k] = row.coeffs[j];
            }
            lo.push(model.lower()[j]);
            hi.push(model.upper()[j]);
        }
        let mut s = n;
        let mut slack_of = vec![None; m];
        for (k, row) in rows.iter().enumerate() {
            let sign = match row.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => continue,
            };
            cols[s * m + k] = sign;
            lo.push(0.0);
            hi.push(f64::INFINITY);
            slack_of[k] = Some((s, sign));
            s += 1;
        }
        let b: Vec<f64> = rows.iter().map(|r| r.rhs).collect();

        let mut x = vec![0.0; ncols];
        let mut state = vec![VarState::AtLower; ncols];
        for j in 0..n + slacks {
            if lo[j].is_finite() {
                x[j] = lo[j];
            } else if hi[j].is_finite() {
                x[j] = hi[j];
                state[j] = VarState::AtUpper;
            } else {
                state[j] = VarState::Free;
            }
        }

        // artificial k carries the residual of row k with a sign making it >= 0
        let mut residual = b.clone();
        for j in 0..n + slacks {
            if x[j] != 0.0 {
                for k in 0..m {
                    residual[k] -= cols[j * m + k] * x[j];
                }
            }
        }
        let art = n + slacks;
        let mut binv = vec![0.0; m * m];
        let mut basis = Vec::with_capacity(m);
        for k in 0..m {
            let sign = if residual[k] < 0.0 { -1.0 } else { 1.0 };
            cols[(art + k) * m + k] = sign;
            lo.push(0.0);
            match slack_of[k] {
                // the slack absorbs the residual: start from it and pin the artificial
                Some((sj, ssign)) if residual[k] * ssign >= 0.0 => {
                    hi.push(0.0);
                    x[sj] = residual[k] * ssign;
                    state[sj] = VarState::Basic;
                    basis.push(sj);
                    binv[k * m + k] = ssign;
                }
                _ => {
                    hi.push(f64::INFINITY);
                    x[art + k] = residual[k].abs();
                    state[art + k] = VarState::Basic;
                    basis.push(art + k);
                    binv[k * m + k] = sign;
                }
            }
        }

        let size = m + ncols;
        Simplex {
            m,
            ncols,
            cols,
            b,
            lo,
            hi,
            x,
            state,
            basis,
            binv,
            since_refactor: 0,
            iterations: 0,
            bland_after: 10 * size,
            max_iterations: 200 * size + 10_000,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let c = cost[bj];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, r) in y.iter_mut().zip(row) {
                    *yk += c * r;
                }
            }
        }
        y
    }

    /// Rebuilds the basis inverse from scratch and recomputes basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // Gauss-Jordan on [B | I] with partial pivoting
        let mut a = vec![0.0; m * m];
        for (i, &bj) in self.basis.iter().enumerate() {
            for k in 0..m {
                a[k * m + i] = self.cols[bj * m + k];
            }
        }
        let mut inv = vec![0.0; m * m];
        for k in 0..m {
            inv[k * m + k] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::Numerical("singular basis during refactorization".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(c * m + k, p * m + k);
                    inv.swap(c * m + k, p * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;

        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (r, a) in rhs.iter_mut().zip(self.col(j)) {
                    *r -= a * xj;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.basis[i]] = dot(row, &rhs);
        }
        Ok(())
    }

    fn run(&mut self, cost: &[f64]) -> Result<PhaseEnd> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::IterationLimit(self.max_iterations));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.duals(cost);
            let bland = self.iterations >= self.bland_after;

            // pricing
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = cost[j] - dot(self.col(j), &y);
                let dir = match st {
                    VarState::AtLower if d < -OPTIMALITY_TOL => 1.0,
                    VarState::AtUpper if d > OPTIMALITY_TOL => -1.0,
                    VarState::Free if d.abs() > OPTIMALITY_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            // entering column in the current basis
            for (i, a) in alpha.iter_mut().enumerate() {
                *a = dot(&self.binv[i * m..(i + 1) * m], self.col(q));
            }

            // ratio test
            let mut step = self.hi[q] - self.lo[q];
            if !step.is_finite() {
                step = f64::INFINITY;
            }
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                let a = alpha[i];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let bj = self.basis[i];
                let (t, to_upper) = if rate < 0.0 {
                    if !self.lo[bj].is_finite() {
                        continue;
                    }
                    ((self.x[bj] - self.lo[bj]) / -rate, false)
                } else {
                    if !self.hi[bj].is_finite() {
                        continue;
                    }
                    ((self.hi[bj] - self.x[bj]) / rate, true)
                };
                let t = t.max(0.0);
                let better = if step.is_finite() {
                    let tie = 1e-12 * (1.0 + step);
                    match leave {
                        // a tie with the entering variable's own bound keeps the basis
                        None => t < step - tie,
                        Some((r, _)) => {
                            t < step - tie || ((t - step).abs() <= tie && bj < self.basis[r])
                        }
                    }
                } else {
                    true
                };
                if better {
                    step = t;
                    leave = Some((i, to_upper));
                }
            }
            if step == f64::INFINITY {
                return Ok(PhaseEnd::Unbounded);
            }

            self.iterations += 1;
            let delta = dir * step;
            self.x[q] += delta;
            for i in 0..m {
                if alpha[i] != 0.0 {
                    self.x[self.basis[i]] -= alpha[i] * delta;
                }
            }

            match leave {
                None => {
                    // bound flip of the entering variable
                    if dir > 0.0 {
                        self.x[q] = self.hi[q];
                        self.state[q] = VarState::AtUpper;
                    } else {
                        self.x[q] = self.lo[q];
                        self.state[q] = VarState::AtLower;
                    }
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    if to_upper {
                        self.x[out] = self.hi[out];
                        self.state[out] = VarState::AtUpper;
                    } else {
                        self.x[out] = self.lo[out];
                        self.state[out] = VarState::AtLower;
                    }
                    self.state[q] = VarState::Basic;
                    self.basis[r] = q;

                    let piv = alpha[r];
                    for k in 0..m {
                        self.binv[r * m + k] /= piv;
                    }
                    for i in 0..m {
                        if i == r || alpha[i] == 0.0 {
                            continue;
                        }
                        let f = alpha[i];
                        for k in 0..m {
                            self.binv[i * m + k] -= f * self.binv[r * m + k];
                        }
                    }
                    self.since_refactor += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpModel;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn minimize_nonnegative_variable() {
        let mut m = LpModel::new();
        m.add_var(1.0, 0.0, INF);
        let s = solve(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.values, vec![0.0]);
        assert_eq!(s.objective_value, 0.0);
    }

    #[test]
    fn simplex_corner() {
        let mut m = LpModel::new();
        let x = m.add_var(-1.0, 0.0, INF);
        let y = m.add_var(-1.0, 0.0, INF);
        m.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        let s = solve(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 1.0).abs() < 1e-12);
        assert!((s.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut m = LpModel::new();
        let x = m.add_var(1.0, 0.0, INF);
        m.add_constraint(&[(x, 1.0)], Relation::Le, -1.0);
        assert_eq!(solve(&m).unwrap().status, LpStatus::Infeasible);

        let mut m = LpModel::new();
        m.add_var(1.0, 2.0, 1.0);
        assert_eq!(solve(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut m = LpModel::new();
        let x = m.add_var(-1.0, 0.0, INF);
        let y = m.add_var(0.0, 0.0, INF);
        m.add_constraint(&[(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min |x - 3| written with a free x and epigraph t
        let mut m = LpModel::new();
        let x = m.add_var(0.0, -INF, INF);
        let t = m.add_var(1.0, -INF, INF);
        m.add_constraint(&[(t, 1.0), (x, -1.0)], Relation::Ge, -3.0);
        m.add_constraint(&[(t, 1.0), (x, 1.0)], Relation::Ge, 3.0);
        let s = solve(&m).unwrap();
        assert!(s.objective_value.abs() < 1e-12);
        assert!((s.values[x] - 3.0).abs() < 1e-12);

        let mut m = LpModel::new();
        let a = m.add_var(1.0, 0.0, INF);
        let b = m.add_var(2.0, 0.0, INF);
        m.add_constraint(&[(a, 1.0), (b, 1.0)], Relation::Eq, 4.0);
        m.add_constraint(&[(a, 1.0), (b, 1.0)], Relation::Eq, 4.0);
        m.add_constraint(&[], Relation::Le, 0.0);
        let s = solve(&m).unwrap();
        assert!((s.objective_value - 4.0).abs() < 1e-12);
        assert_eq!(s.duals[2], 0.0);
    }

    #[test]
    fn empty_row_with_violated_rhs_is_infeasible() {
        let mut m = LpModel::new();
        m.add_var(1.0, 0.0, 1.0);
        m.add_constraint(&[], Relation::Ge, 1.0);
        assert_eq!(solve(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn upper_bounded_variables_flip() {
        let mut m = LpModel::new();
        let x = m.add_var(-1.0, 0.0, 2.0);
        let y = m.add_var(-2.0, -1.0, 3.0);
        m.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Le, 10.0);
        let s = solve(&m).unwrap();
        assert!((s.objective_value + 8.0).abs() < 1e-12);
        assert!(s.reduced_costs[x] < 0.0 && s.reduced_costs[y] < 0.0);
    }

    #[test]
    fn no_rows() {
        let mut m = LpModel::new();
        m.add_var(-1.0, -INF, 5.0);
        m.add_var(1.0, -2.0, INF);
        let s = solve(&m).unwrap();
        assert_eq!(s.values, vec![5.0, -2.0]);
        m.add_var(1.0, -INF, 0.0);
        assert_eq!(solve(&m).unwrap().status, LpStatus::Unbounded);
    }
}
