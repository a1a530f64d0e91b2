//! Worst-case distribution recovery.
//!
//! For a fixed decision and the optimal `lambda`, each sample `y_i` is moved to
//! a maximizer of `c(z, y) - lambda |y - y_i|_1` over the support. The set of
//! maximizers can be a segment or a ray; the transport budget `eps` is spent
//! greedily along those sets, splitting at most one sample into two atoms.

use serde::Serialize;

use crate::data::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::lp::{self, LpModel, LpStatus, Relation};

use super::reformulation::evaluate_decision;
use super::{dot, AmbiguitySet, PiecewiseAffineCost, PolyhedralSupport};

/// Orthant enumeration for non-box supports is exponential in `d_y`.
const MAX_POLYTOPE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub measure: DiscreteMeasure,
    pub lambda: f64,
    /// Dual objective `lambda * eps + sum_i w_i s_i` at this `lambda`.
    pub value: f64,
    /// Sample whose mass was divided between two atoms (the last atom of
    /// `measure` is the second half).
    pub split: Option<usize>,
}

/// Solves the inner LP for `z` and extracts a worst-case measure.
pub fn worst_case_distribution(cost: &PiecewiseAffineCost, amb: &AmbiguitySet, z: &[f64]) -> Result<WorstCase> {
    let sol = evaluate_decision(cost, amb, z)?;
    let mut wc = worst_case_with_lambda(cost, amb, z, sol.lambda)?;
    wc.value = sol.value;
    Ok(wc)
}

/// Maximizers of the penalized cost for one piece and one sample.
#[derive(Debug, Clone)]
struct PieceArgmax {
    value: f64,
    near: Vec<f64>,
    d_near: f64,
    far: Vec<f64>,
    d_far: f64,
    /// Every point between `near` and `far` (or along the ray) is a maximizer
    /// and the L1 distance grows linearly along the way.
    linear_path: bool,
}

impl PieceArgmax {
    fn point_at(&self, t: f64) -> Vec<f64> {
        if self.d_far.is_finite() {
            let span = self.d_far - self.d_near;
            let frac = if span > 0.0 { ((t - self.d_near) / span).clamp(0.0, 1.0) } else { 0.0 };
            return self.near.iter().zip(&self.far).map(|(a, b)| a + frac * (b - a)).collect();
        }
        let ray: Vec<usize> = (0..self.far.len()).filter(|&j| self.far[j].is_infinite()).collect();
        let step = (t - self.d_near).max(0.0) / ray.len() as f64;
        let mut y = self.near.clone();
        for j in ray {
            y[j] += step * self.far[j].signum();
        }
        y
    }
}

/// Same as [`worst_case_distribution`] with a caller-supplied `lambda`.
pub fn worst_case_with_lambda(
    cost: &PiecewiseAffineCost,
    amb: &AmbiguitySet,
    z: &[f64],
    lambda: f64,
) -> Result<WorstCase> {
    cost.check_decision(z)?;
    if amb.order_p != 1.0 {
        return Err(Error::Unsupported("worst-case extraction needs order p = 1".into()));
    }
    if amb.center.dim() != cost.dim_y() {
        return Err(Error::DimensionMismatch {
            expected: cost.dim_y(),
            found: amb.center.dim(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let eps = amb.radius;
    let center = &amb.center;
    if eps == 0.0 {
        let value = center.expectation(|y| cost.value(z, y));
        return Ok(WorstCase {
            measure: center.clone(),
            lambda,
            value,
            split: None,
        });
    }
    let support = cost.support();
    for (i, y) in center.support().iter().enumerate() {
        if !support.contains(y, 1e-9 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())))) {
            return Err(Error::invalid(format!("sample {i} lies outside the outcome support")));
        }
    }

    let slopes: Vec<Vec<f64>> = cost.pieces().iter().map(|p| p.slope_at(z)).collect();
    let boxed = support.as_box();
    let mut per_sample = Vec::with_capacity(center.len());
    for y in center.support() {
        let mut options = Vec::with_capacity(slopes.len());
        for (piece, a) in cost.pieces().iter().zip(&slopes) {
            let base = piece.intercept_at(z);
            let opt = match &boxed {
                Some((lo, hi)) => box_argmax(a, base, y, lo, hi, lambda)?,
                None => polytope_argmax(a, base, y, support, lambda)?,
            };
            options.push(opt);
        }
        per_sample.push(options);
    }

    // Ties across pieces: keep all pieces within tolerance of the best value.
    let mut best = Vec::with_capacity(center.len());
    let mut tied = Vec::with_capacity(center.len());
    for options in &per_sample {
        let top = options.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * (1.0 + top.abs());
        best.push(top);
        tied.push(options.iter().filter(|o| o.value >= top - tol).collect::<Vec<_>>());
    }
    let lowest = |i: usize| {
        tied[i]
            .iter()
            .min_by(|a, b| a.d_near.total_cmp(&b.d_near))
            .expect("at least one piece")
    };
    let highest = |i: usize| {
        tied[i]
            .iter()
            .max_by(|a, b| a.d_far.total_cmp(&b.d_far))
            .expect("at least one piece")
    };

    let w = center.weights();
    let base_transport: f64 = (0..center.len()).map(|i| w[i] * lowest(i).d_near).sum();
    if base_transport > eps + 1e-9 * (1.0 + eps) {
        return Err(Error::Numerical(format!(
            "lambda {lambda} is not optimal: minimal transport {base_transport} exceeds radius {eps}"
        )));
    }
    let mut remaining = if lambda > 1e-9 { eps - base_transport } else { 0.0 };

    let mut support_out = Vec::with_capacity(center.len() + 1);
    let mut weights_out = Vec::with_capacity(center.len() + 1);
    let mut extra = None;
    let mut split = None;
    for i in 0..center.len() {
        let lo = lowest(i);
        let hi = highest(i);
        let cap = w[i] * (hi.d_far - lo.d_near);
        if w[i] == 0.0 || remaining <= 0.0 || !(cap > 0.0) {
            support_out.push(lo.near.clone());
        } else if cap <= remaining {
            remaining -= cap;
            support_out.push(hi.far.clone());
        } else {
            let t = lo.d_near + remaining / w[i];
            remaining = 0.0;
            let path = tied[i]
                .iter()
                .find(|o| o.linear_path && o.d_near <= t && t <= o.d_far);
            match path {
                Some(o) => support_out.push(o.point_at(t)),
                None => {
                    // mix the nearest maximizer with a farther one
                    let (d_far, far) = if hi.d_far.is_finite() {
                        (hi.d_far, hi.far.clone())
                    } else {
                        (hi.d_near, hi.near.clone())
                    };
                    let share = w[i] * (t - lo.d_near) / (d_far - lo.d_near);
                    support_out.push(lo.near.clone());
                    weights_out.push(w[i] - share);
                    extra = Some((far, share));
                    split = Some(i);
                    continue;
                }
            }
        }
        weights_out.push(w[i]);
    }
    if let Some((y, share)) = extra {
        support_out.push(y);
        weights_out.push(share);
    }

    let value = lambda * eps + (0..center.len()).map(|i| w[i] * best[i]).sum::<f64>();
    Ok(WorstCase {
        measure: DiscreteMeasure::new(support_out, weights_out)?,
        lambda,
        value,
        split,
    })
}

/// Separable case: `max a.y + base - lambda |y - y0|_1` over `lo <= y <= hi`.
fn box_argmax(a: &[f64], base: f64, y0: &[f64], lo: &[f64], hi: &[f64], lambda: f64) -> Result<PieceArgmax> {
    let d = y0.len();
    let (mut near, mut far) = (y0.to_vec(), y0.to_vec());
    for j in 0..d {
        let tol = 1e-9 * (1.0 + lambda.max(a[j].abs()));
        let unbounded = |bound: f64| -> Result<f64> {
            if bound.is_finite() {
                Ok(bound)
            } else {
                Err(Error::UnboundedWorstCase {
                    lambda,
                    required: a[j].abs(),
                })
            }
        };
        if lambda <= tol && a[j].abs() <= tol {
            continue;
        }
        if a[j] > lambda + tol {
            near[j] = unbounded(hi[j])?;
            far[j] = near[j];
        } else if a[j] < -lambda - tol {
            near[j] = unbounded(lo[j])?;
            far[j] = near[j];
        } else if a[j] >= lambda - tol {
            far[j] = hi[j];
        } else if a[j] <= -lambda + tol {
            far[j] = lo[j];
        }
    }
    let d_near = l1(&near, y0);
    let d_far = l1(&far, y0);
    let value = dot(a, &near) + base - lambda * d_near;
    Ok(PieceArgmax {
        value,
        near,
        d_near,
        far,
        d_far,
        // every coordinate moves away from y0, so distances add up linearly
        linear_path: true,
    })
}

/// General polyhedron: enumerate sign orthants of `y - y0`, on each of which
/// the L1 distance is linear.
fn polytope_argmax(a: &[f64], base: f64, y0: &[f64], support: &PolyhedralSupport, lambda: f64) -> Result<PieceArgmax> {
    let d = y0.len();
    if d > MAX_POLYTOPE_DIM {
        return Err(Error::Unsupported(format!(
            "worst case on a general polyhedron supports d_y <= {MAX_POLYTOPE_DIM}"
        )));
    }
    let orthant_model = |signs: &[f64]| {
        let mut m = LpModel::new();
        for &s in signs {
            if s > 0.0 {
                m.add_var(0.0, 0.0, f64::INFINITY);
            } else {
                m.add_var(0.0, f64::NEG_INFINITY, 0.0);
            }
        }
        for (row, &b) in support.a().iter().zip(support.b()) {
            let terms: Vec<_> = row.iter().copied().enumerate().collect();
            m.add_constraint(&terms, Relation::Le, b - dot(row, y0));
        }
        m
    };
    // gain(delta) = a.delta - lambda * signs.delta on the orthant
    let gain = |signs: &[f64]| -> Vec<f64> { (0..d).map(|j| a[j] - lambda * signs[j]).collect() };

    let orthants: Vec<Vec<f64>> = (0..1usize << d)
        .map(|mask| (0..d).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect())
        .collect();

    let mut top = f64::NEG_INFINITY;
    for signs in &orthants {
        let mut m = orthant_model(signs);
        for (j, g) in gain(signs).into_iter().enumerate() {
            m.set_cost(j, -g);
        }
        let sol = lp::solve(&m)?;
        match sol.status {
            LpStatus::Optimal => top = top.max(-sol.objective_value),
            LpStatus::Unbounded => {
                return Err(Error::UnboundedWorstCase {
                    lambda,
                    required: a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
                })
            }
            LpStatus::Infeasible => {}
        }
    }
    if top == f64::NEG_INFINITY {
        return Err(Error::invalid("outcome support is empty"));
    }
    let floor = top - 1e-9 * (1.0 + top.abs());

    let mut near: Option<(f64, Vec<f64>)> = None;
    let mut far: Option<(f64, Vec<f64>)> = None;
    for signs in &orthants {
        let mut m = orthant_model(signs);
        let terms: Vec<_> = gain(signs).into_iter().enumerate().collect();
        m.add_constraint(&terms, Relation::Ge, floor);
        for direction in [1.0, -1.0] {
            for (j, &s) in signs.iter().enumerate() {
                m.set_cost(j, direction * s);
            }
            let sol = lp::solve(&m)?;
            match sol.status {
                LpStatus::Optimal => {
                    let delta = sol.values;
                    let dist = direction * sol.objective_value;
                    let point: Vec<f64> = y0.iter().zip(&delta).map(|(y, dv)| y + dv).collect();
                    let slot = if direction > 0.0 { &mut near } else { &mut far };
                    let better = slot
                        .as_ref()
                        .is_none_or(|(d0, _)| if direction > 0.0 { dist < *d0 } else { dist > *d0 });
                    if better {
                        *slot = Some((dist.max(0.0), point));
                    }
                }
                LpStatus::Unbounded => {
                    return Err(Error::Unsupported(
                        "unbounded set of worst-case points on a general polyhedron".into(),
                    ))
                }
                LpStatus::Infeasible => {}
            }
        }
    }
    let (d_near, near) = near.ok_or_else(|| Error::Numerical("no maximizer found".into()))?;
    let (d_far, far) = far.ok_or_else(|| Error::Numerical("no maximizer found".into()))?;
    Ok(PieceArgmax {
        value: top + dot(a, y0) + base,
        near,
        d_near,
        far,
        d_far,
        linear_path: false,
    })
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dro::AffinePiece;

    fn newsvendor(support: PolyhedralSupport) -> PiecewiseAffineCost {
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
        PiecewiseAffineCost::new(1, pieces, support).unwrap()
    }

    #[test]
    fn zero_radius_returns_center() {
        let center = DiscreteMeasure::from_scalars(&[3.0, 8.0], &[0.25, 0.75]).unwrap();
        let amb = AmbiguitySet::new(center.clone(), 0.0).unwrap();
        let wc = worst_case_distribution(&newsvendor(PolyhedralSupport::interval(0.0, 20.0).unwrap()), &amb, &[5.0])
            .unwrap();
        assert_eq!(wc.measure, center);
        assert_eq!(wc.split, None);
    }

    #[test]
    fn single_sample_moves_toward_shortage() {
        let cost = newsvendor(PolyhedralSupport::interval(0.0, 100.0).unwrap());
        let center = DiscreteMeasure::from_scalars(&[40.0], &[1.0]).unwrap();
        let amb = AmbiguitySet::new(center, 0.5).unwrap();
        let wc = worst_case_distribution(&cost, &amb, &[40.0]).unwrap();
        assert_eq!(wc.measure.len(), 1);
        assert!((wc.measure.support()[0][0] - 40.5).abs() < 1e-9);
        assert!((wc.lambda - 10.0).abs() < 1e-9);
        assert!((wc.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn general_polytope_matches_box_path() {
        // [0, 100] with a scaled lower bound and a redundant upper row
        let poly = PolyhedralSupport::new(1, vec![vec![1.0], vec![-2.0], vec![0.5]], vec![100.0, 0.0, 60.0]).unwrap();
        assert!(poly.as_box().is_some());
        let cost = newsvendor(PolyhedralSupport::interval(0.0, 100.0).unwrap());
        let center = DiscreteMeasure::from_scalars(&[10.0, 70.0], &[0.5, 0.5]).unwrap();
        let amb = AmbiguitySet::new(center.clone(), 3.0).unwrap();
        let a = worst_case_distribution(&cost, &amb, &[50.0]).unwrap();
        let opts = polytope_argmax(&[10.0], -500.0, &[70.0], &poly, a.lambda).unwrap();
        let boxed = box_argmax(&[10.0], -500.0, &[70.0], &[0.0], &[100.0], a.lambda).unwrap();
        assert!((opts.value - boxed.value).abs() < 1e-9);
        assert!((opts.d_near - boxed.d_near).abs() < 1e-9);
        assert!((opts.d_far - boxed.d_far).abs() < 1e-9);
    }

    #[test]
    fn unbounded_support_needs_large_lambda() {
        let cost = newsvendor(PolyhedralSupport::unbounded(1));
        let center = DiscreteMeasure::from_scalars(&[4.0], &[1.0]).unwrap();
        let amb = AmbiguitySet::new(center, 1.0).unwrap();
        let err = worst_case_with_lambda(&cost, &amb, &[4.0], 5.0).unwrap_err();
        assert!(matches!(err, Error::UnboundedWorstCase { required, .. } if required == 10.0));
        // at the optimal lambda the mass slides along the ray
        let wc = worst_case_distribution(&cost, &amb, &[4.0]).unwrap();
        assert!((wc.measure.support()[0][0] - 5.0).abs() < 1e-9);
    }
}
