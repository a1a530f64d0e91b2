use crate::error::{Error, Result};
use crate::lp::{self, LpModel, LpStatus, Relation};

use super::{dot, AmbiguitySet, DecisionConstraints, DroSolution, PiecewiseAffineCost};

/// Variable positions in the reformulated LP.
///
/// Order: `z` (d_z), `lambda`, `s` (n), then `gamma_ik` blocks of length
/// `d1` for `i` major, `k` minor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpLayout {
    pub dim_z: usize,
    pub n: usize,
    pub pieces: usize,
    pub support_rows: usize,
}

impl LpLayout {
    pub fn z(&self, j: usize) -> usize {
        j
    }

    pub fn lambda(&self) -> usize {
        self.dim_z
    }

    pub fn s(&self, i: usize) -> usize {
        self.dim_z + 1 + i
    }

    pub fn gamma(&self, i: usize, k: usize, r: usize) -> usize {
        self.dim_z + 1 + self.n + (i * self.pieces + k) * self.support_rows + r
    }

    pub fn num_vars(&self) -> usize {
        self.dim_z + 1 + self.n * (1 + self.pieces * self.support_rows)
    }
}

fn check_inputs(cost: &PiecewiseAffineCost, amb: &AmbiguitySet, dc: &DecisionConstraints) -> Result<()> {
    if amb.order_p != 1.0 {
        return Err(Error::Unsupported(format!(
            "LP reformulation needs order p = 1 (got {}); use primal_grid_value",
            amb.order_p
        )));
    }
    if amb.center.dim() != cost.dim_y() {
        return Err(Error::DimensionMismatch {
            expected: cost.dim_y(),
            found: amb.center.dim(),
        });
    }
    if dc.dim() != cost.dim_z() {
        return Err(Error::DimensionMismatch {
            expected: cost.dim_z(),
            found: dc.dim(),
        });
    }
    Ok(())
}

/// Joint LP over `(z, lambda, s, gamma)` whose optimum is the worst-case
/// expected cost minimized over `Z`.
pub fn build_reformulation(
    cost: &PiecewiseAffineCost,
    amb: &AmbiguitySet,
    decision: &DecisionConstraints,
) -> Result<(LpModel, LpLayout)> {
    check_inputs(cost, amb, decision)?;
    let support = cost.support();
    let layout = LpLayout {
        dim_z: cost.dim_z(),
        n: amb.center.len(),
        pieces: cost.pieces().len(),
        support_rows: support.num_rows(),
    };
    let (dz, dy, d1) = (layout.dim_z, cost.dim_y(), layout.support_rows);

    let mut m = LpModel::new();
    for j in 0..dz {
        m.add_var(0.0, decision.lower()[j], decision.upper()[j]);
    }
    m.add_var(amb.radius, 0.0, f64::INFINITY);
    for &w in amb.center.weights() {
        m.add_var(w, f64::NEG_INFINITY, f64::INFINITY);
    }
    m.add_vars(layout.n * layout.pieces * d1, 0.0, 0.0, f64::INFINITY);

    for (coeffs, rel, rhs) in decision.rows() {
        let terms: Vec<_> = coeffs.iter().enumerate().map(|(j, &a)| (layout.z(j), a)).collect();
        m.add_constraint(&terms, *rel, *rhs);
    }

    let lam = layout.lambda();
    for (i, y) in amb.center.support().iter().enumerate() {
        for (k, piece) in cost.pieces().iter().enumerate() {
            // g_k(z) + f_k(z).y_i + gamma.(b - A y_i) - s_i <= 0
            let mut terms: Vec<(usize, f64)> = (0..dz)
                .map(|l| {
                    let slope: f64 = (0..dy).map(|j| piece.slope[j][l] * y[j]).sum();
                    (layout.z(l), piece.intercept[l] + slope)
                })
                .collect();
            for r in 0..d1 {
                terms.push((layout.gamma(i, k, r), support.b()[r] - dot(&support.a()[r], y)));
            }
            terms.push((layout.s(i), -1.0));
            let rhs = -piece.intercept_offset - dot(&piece.slope_offset, y);
            m.add_constraint(&terms, Relation::Le, rhs);

            if d1 == 0 && i > 0 {
                continue;
            }
            // -lambda <= (A^T gamma - F z - f0)_j <= lambda
            for j in 0..dy {
                let mut terms: Vec<(usize, f64)> = (0..dz).map(|l| (layout.z(l), -piece.slope[j][l])).collect();
                for r in 0..d1 {
                    terms.push((layout.gamma(i, k, r), support.a()[r][j]));
                }
                let f0 = piece.slope_offset[j];
                terms.push((lam, -1.0));
                m.add_constraint(&terms, Relation::Le, f0);
                terms.last_mut().expect("lambda term").1 = 1.0;
                m.add_constraint(&terms, Relation::Ge, f0);
            }
        }
    }
    Ok((m, layout))
}

/// Minimizes the worst-case expected cost over the decision set.
///
/// An infeasible or unbounded LP is reported through `status` with empty
/// vectors and a NaN value.
pub fn solve_dro(
    cost: &PiecewiseAffineCost,
    amb: &AmbiguitySet,
    decision: &DecisionConstraints,
) -> Result<DroSolution> {
    let (model, layout) = build_reformulation(cost, amb, decision)?;
    let sol = lp::solve(&model)?;
    if sol.status != LpStatus::Optimal {
        return Ok(DroSolution {
            decision: Vec::new(),
            value: f64::NAN,
            lambda: f64::NAN,
            slacks: Vec::new(),
            status: sol.status,
        });
    }
    let v = polish(&model, &layout, sol.values);
    Ok(DroSolution {
        decision: v[..layout.dim_z].to_vec(),
        value: model.evaluate(&v),
        lambda: v[layout.lambda()],
        slacks: (0..layout.n).map(|i| v[layout.s(i)]).collect(),
        status: LpStatus::Optimal,
    })
}

/// Re-solves with `z` and `lambda` fixed and unit cost on every `s_i`, so each
/// `s_i` is its own inner supremum. A sample whose weight is below the
/// optimality tolerance otherwise may keep a loose `s_i`.
fn polish(model: &LpModel, layout: &LpLayout, values: Vec<f64>) -> Vec<f64> {
    let mut inner = model.clone();
    for j in 0..inner.num_vars() {
        inner.set_cost(j, 0.0);
    }
    for j in (0..layout.dim_z).chain([layout.lambda()]) {
        inner.set_bounds(j, values[j], values[j]);
    }
    for i in 0..layout.n {
        inner.set_cost(layout.s(i), 1.0);
    }
    match lp::solve(&inner) {
        Ok(sol) if sol.is_optimal() && model.evaluate(&sol.values) <= model.evaluate(&values) => sol.values,
        _ => values,
    }
}

/// Worst-case expected cost `c_D(z)` of a fixed decision.
pub fn evaluate_decision(cost: &PiecewiseAffineCost, amb: &AmbiguitySet, z: &[f64]) -> Result<DroSolution> {
    cost.check_decision(z)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("decision must be finite"));
    }
    solve_dro(cost, amb, &DecisionConstraints::fixed(z))?.require_optimal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DiscreteMeasure;
    use crate::dro::{AffinePiece, PolyhedralSupport};

    fn newsvendor(lo: f64, hi: f64) -> PiecewiseAffineCost {
        let pieces = vec![
            AffinePiece {
                slope: vec![vec![0.0]],
                slope_offset: vec![10.0],
                intercept: vec![-10.0],
                intercept_offset: 0.0,
            },
            AffinePiece {
                slope: vec![vec![0.0]],
                slope_offset: vec![-1.0],
                intercept: vec![1.0],
                intercept_offset: 0.0,
            },
        ];
        PiecewiseAffineCost::new(1, pieces, PolyhedralSupport::interval(lo, hi).unwrap()).unwrap()
    }

    #[test]
    fn constant_piece_needs_no_lambda() {
        let cost = PiecewiseAffineCost::new(
            2,
            vec![AffinePiece::constant(2, vec![0.0], 3.5)],
            PolyhedralSupport::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let center = DiscreteMeasure::from_scalars(&[0.2, 0.9], &[0.5, 0.5]).unwrap();
        for eps in [0.0, 0.3, 50.0] {
            let amb = AmbiguitySet::new(center.clone(), eps).unwrap();
            let sol = evaluate_decision(&cost, &amb, &[1.0, -2.0]).unwrap();
            assert!((sol.value - 3.5).abs() < 1e-12);
            assert!(sol.lambda.abs() < 1e-12);
        }
    }

    #[test]
    fn newsvendor_layout_has_four_gammas_per_sample() {
        let center = DiscreteMeasure::from_scalars(&[40.0], &[1.0]).unwrap();
        let amb = AmbiguitySet::new(center, 1.0).unwrap();
        let (m, layout) = build_reformulation(&newsvendor(0.0, 300.0), &amb, &DecisionConstraints::nonnegative(1)).unwrap();
        assert_eq!(layout.n * layout.pieces * layout.support_rows, 4);
        assert_eq!(m.num_vars(), 1 + 1 + 1 + 4);
        // two cost rows plus 2 norm rows per piece
        assert_eq!(m.num_constraints(), 2 + 4);
    }

    #[test]
    fn fractile_at_zero_radius() {
        let pts: Vec<f64> = (1..=11).map(f64::from).collect();
        let center = DiscreteMeasure::from_scalars(&pts, &[1.0; 11]).unwrap();
        let amb = AmbiguitySet::new(center, 0.0).unwrap();
        let sol = solve_dro(&newsvendor(0.0, 300.0), &amb, &DecisionConstraints::nonnegative(1)).unwrap();
        // the objective is flat on [10, 11]; the smallest-fractile choice is
        // made by the newsvendor solver
        assert!((10.0 - 1e-9..=11.0 + 1e-9).contains(&sol.decision[0]));
        let saa: f64 = pts.iter().map(|y| (10.0 * (y - 10.0)).max(10.0 - y)).sum::<f64>() / 11.0;
        assert!((sol.value - saa).abs() < 1e-9);
        let recon = sol.lambda * 0.0 + sol.slacks.iter().sum::<f64>() / 11.0;
        assert!((recon - sol.value).abs() < 1e-7);
    }

    #[test]
    fn infeasible_decision_set_is_reported() {
        let center = DiscreteMeasure::from_scalars(&[1.0], &[1.0]).unwrap();
        let amb = AmbiguitySet::new(center, 0.5).unwrap();
        let dc = DecisionConstraints::nonnegative(1).with_row(vec![1.0], Relation::Le, -1.0);
        let sol = solve_dro(&newsvendor(0.0, 10.0), &amb, &dc).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(sol.require_optimal().is_err());
    }

    #[test]
    fn higher_order_is_unsupported() {
        let center = DiscreteMeasure::from_scalars(&[1.0], &[1.0]).unwrap();
        let amb = AmbiguitySet::with_order(center, 2.0, 0.5).unwrap();
        let err = solve_dro(&newsvendor(0.0, 10.0), &amb, &DecisionConstraints::nonnegative(1)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(ref m) if m.contains("primal_grid_value")));
    }
}
