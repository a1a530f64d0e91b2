//! Brute-force checks of the reformulation.

use crate::data::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::lp::{self, LpModel, Relation};

use super::reformulation::evaluate_decision;
use super::AmbiguitySet;
use super::PiecewiseAffineCost;

/// Lower bound on the worst-case expectation from a discretized primal.
///
/// Each sample's mass may be moved to points of a uniform grid on the (box)
/// support, or left at any sample point, subject to the transport budget
/// `sum q_ig |g - y_i|_1^p <= eps^p`. The gap to the exact value is at most
/// `lipschitz * spacing`, since snapping an optimal target toward its source
/// sample never increases transport.
pub fn primal_grid_value(
    cost: &PiecewiseAffineCost,
    amb: &AmbiguitySet,
    z: &[f64],
    grid_points: usize,
) -> Result<f64> {
    cost.check_decision(z)?;
    let dim = cost.dim_y();
    if amb.center.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: amb.center.dim(),
        });
    }
    if dim > 2 {
        return Err(Error::Unsupported(format!("grid oracle needs d_y <= 2, got {dim}")));
    }
    if grid_points < 11 {
        return Err(Error::invalid(format!("grid needs at least 11 points per axis, got {grid_points}")));
    }
    let (lo, hi) = match cost.support().as_box() {
        Some((lo, hi)) if lo.iter().chain(&hi).all(|v| v.is_finite()) => (lo, hi),
        _ => return Err(Error::invalid("grid oracle needs a bounded box support")),
    };

    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let step = (hi[j] - lo[j]) / (grid_points - 1) as f64;
            (0..grid_points)
                .map(|g| if g + 1 == grid_points { hi[j] } else { lo[j] + step * g as f64 })
                .collect()
        })
        .collect();
    let mut candidates: Vec<Vec<f64>> = match dim {
        1 => axes[0].iter().map(|&a| vec![a]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| vec![a, b]))
            .collect(),
    };
    candidates.extend(amb.center.support().iter().cloned());

    let p = amb.order_p;
    let gains: Vec<f64> = candidates.iter().map(|g| cost.value(z, g)).collect();
    let n = amb.center.len();
    let m = candidates.len();
    let mut model = LpModel::new();
    for _ in 0..n {
        for &c in &gains {
            model.add_var(-c, 0.0, f64::INFINITY);
        }
    }
    for (i, &w) in amb.center.weights().iter().enumerate() {
        let terms: Vec<_> = (0..m).map(|g| (i * m + g, 1.0)).collect();
        model.add_constraint(&terms, Relation::Eq, w);
    }
    let mut budget = Vec::with_capacity(n * m);
    for (i, y) in amb.center.support().iter().enumerate() {
        for (g, c) in candidates.iter().enumerate() {
            let d: f64 = c.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
            budget.push((i * m + g, d.powf(p)));
        }
    }
    model.add_constraint(&budget, Relation::Le, amb.radius.powf(p));
    Ok(-lp::solve(&model)?.require_optimal()?.objective_value)
}

/// `|c_D(z; eps) - (SAA(z) + eps * R(z))|` for each radius, where `R` is the
/// largest `||grad_y c(z, y_i)||_inf` over positive-weight samples (the dual
/// of the L1 transport metric).
///
/// Errors with the offending sample indices when the cost has a kink at a
/// positive-weight sample.
pub fn regularization_gap(
    cost: &PiecewiseAffineCost,
    center: &DiscreteMeasure,
    z: &[f64],
    epsilons: &[f64],
) -> Result<Vec<(f64, f64)>> {
    cost.check_decision(z)?;
    let slopes: Vec<Vec<f64>> = cost.pieces().iter().map(|p| p.slope_at(z)).collect();
    let mut kinks = Vec::new();
    let mut reg = 0.0f64;
    let mut saa = 0.0;
    for (i, (y, w)) in center.atoms().enumerate() {
        let c = cost.value(z, y);
        saa += w * c;
        if w == 0.0 {
            continue;
        }
        let active = cost.active_pieces(z, y, 1e-9 * (1.0 + c.abs()));
        if active.iter().any(|&k| slopes[k] != slopes[active[0]]) {
            kinks.push(i);
            continue;
        }
        let norm = slopes[active[0]].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        reg = reg.max(norm);
    }
    if !kinks.is_empty() {
        return Err(Error::Kink(kinks));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let amb = AmbiguitySet::new(center.clone(), eps)?;
            let dual = evaluate_decision(cost, &amb, z)?.value;
            Ok((eps, (dual - saa - eps * reg).abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn zero_radius_is_weighted_average() {
        let cost = newsvendor(0.0, 50.0);
        let center = DiscreteMeasure::from_scalars(&[3.3, 17.9, 41.0], &[0.2, 0.3, 0.5]).unwrap();
        let amb = AmbiguitySet::new(center.clone(), 0.0).unwrap();
        let v = primal_grid_value(&cost, &amb, &[20.0], 11).unwrap();
        let exact = center.expectation(|y| cost.value(&[20.0], y));
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn single_sample_matches_grid_scan() {
        let cost = newsvendor(0.0, 10.0);
        let center = DiscreteMeasure::from_scalars(&[4.0], &[1.0]).unwrap();
        let eps = 1.7;
        let amb = AmbiguitySet::new(center, eps).unwrap();
        let v = primal_grid_value(&cost, &amb, &[5.0], 101).unwrap();
        // one atom may also be split, so the scan is over pairs of grid points
        let grid: Vec<f64> = (0..101).map(|g| g as f64 / 10.0).chain([4.0]).collect();
        let mut best = f64::NEG_INFINITY;
        for &a in &grid {
            for &b in &grid {
                let (da, db) = ((a - 4.0f64).abs(), (b - 4.0f64).abs());
                let (ca, cb) = (cost.value(&[5.0], &[a]), cost.value(&[5.0], &[b]));
                // mass t at a and 1 - t at b; both value and transport are linear in t
                let mut ts = vec![0.0, 1.0];
                if da != db {
                    ts.push((eps - db) / (da - db));
                }
                for t in ts {
                    if (0.0..=1.0).contains(&t) && t * da + (1.0 - t) * db <= eps + 1e-12 {
                        best = best.max(t * ca + (1.0 - t) * cb);
                    }
                }
            }
        }
        assert!((v - best).abs() < 1e-9, "{v} vs {best}");
    }

    #[test]
    fn grid_refinement_tightens_gap() {
        let cost = newsvendor(0.0, 30.0);
        let center = DiscreteMeasure::from_scalars(&[2.05, 11.3, 27.7], &[0.3, 0.3, 0.4]).unwrap();
        let amb = AmbiguitySet::new(center, 1.37).unwrap();
        let z = [12.2];
        let exact = evaluate_decision(&cost, &amb, &z).unwrap().value;
        let g101 = exact - primal_grid_value(&cost, &amb, &z, 101).unwrap();
        let g201 = exact - primal_grid_value(&cost, &amb, &z, 201).unwrap();
        assert!(g101 >= -1e-9 && g201 >= -1e-9);
        assert!(g201 <= 0.5 * g101 + 1e-9, "{g101} -> {g201}");
    }

    #[test]
    fn constant_cost_has_no_gap() {
        let cost = PiecewiseAffineCost::new(
            1,
            vec![AffinePiece::constant(1, vec![0.0], 2.0)],
            PolyhedralSupport::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let center = DiscreteMeasure::from_scalars(&[0.5], &[1.0]).unwrap();
        for (_, gap) in regularization_gap(&cost, &center, &[0.0], &[0.5, 0.1]).unwrap() {
            assert!(gap < 1e-12);
        }
    }

    #[test]
    fn interior_single_sample_has_no_gap() {
        let cost = newsvendor(0.0, 100.0);
        let center = DiscreteMeasure::from_scalars(&[60.0], &[1.0]).unwrap();
        for (_, gap) in regularization_gap(&cost, &center, &[50.0], &[0.1, 1.0, 5.0]).unwrap() {
            assert!(gap < 1e-9);
        }
    }

    #[test]
    fn kink_is_reported() {
        let cost = newsvendor(0.0, 100.0);
        let center = DiscreteMeasure::from_scalars(&[10.0, 50.0, 50.0], &[0.2, 0.0, 0.8]).unwrap();
        match regularization_gap(&cost, &center, &[50.0], &[0.1]) {
            Err(Error::Kink(idx)) => assert_eq!(idx, vec![2]),
            other => panic!("{other:?}"),
        }
    }
}
