use nwdro_core::dro::{evaluate_decision, worst_case_distribution};
use nwdro_core::transport::{wasserstein_with_norm, GroundNorm};
use nwdro_core::{
    solve_newsvendor, AffinePiece, AmbiguitySet, DiscreteMeasure, NewsvendorParams, PiecewiseAffineCost,
    PolyhedralSupport, WeightVector,
};
use proptest::prelude::*;

fn weights(raw: &[f64]) -> WeightVector {
    let total: f64 = raw.iter().sum();
    WeightVector::from_weights(raw.iter().map(|w| w / total).collect()).unwrap()
}

fn newsvendor_instance() -> impl Strategy<Value = (Vec<f64>, WeightVector)> {
    (1usize..=6).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..300.0, n),
            proptest::collection::vec(0.05f64..1.0, n),
        )
            .prop_map(|(ys, w)| (ys, weights(&w)))
    })
}

fn worst_value(ys: &[f64], w: &WeightVector, z: f64, eps: f64) -> f64 {
    let cost = NewsvendorParams::default().cost().unwrap();
    let outcomes: Vec<Vec<f64>> = ys.iter().map(|y| vec![*y]).collect();
    let amb = AmbiguitySet::weighted(&outcomes, w, eps).unwrap();
    evaluate_decision(&cost, &amb, &[z]).unwrap().value
}

/// Unit triangle `{y >= 0, y1 + y2 <= 1}`: not a box, so the polytope path runs.
fn triangle() -> PolyhedralSupport {
    PolyhedralSupport::new(
        2,
        vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
        vec![0.0, 0.0, 1.0],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimal_value_is_nondecreasing_and_concave_in_radius(
        (ys, w) in newsvendor_instance(),
        a in 0.0f64..20.0,
        b in 0.0f64..20.0,
    ) {
        let p = NewsvendorParams::default();
        let v = |eps: f64| solve_newsvendor(&p, &w, &ys, eps).unwrap().value;
        let (lo, hi) = (a.min(b), a.max(b));
        let (vlo, vhi, vmid) = (v(lo), v(hi), v(0.5 * (lo + hi)));
        let tol = 1e-9 * (1.0 + vhi.abs());
        prop_assert!(vlo <= vhi + tol);
        prop_assert!(vmid + tol >= 0.5 * (vlo + vhi));
    }

    #[test]
    fn worst_case_cost_is_convex_in_decision(
        (ys, w) in newsvendor_instance(),
        z1 in 0.0f64..300.0,
        z2 in 0.0f64..300.0,
        eps in 0.0f64..10.0,
    ) {
        let mid = worst_value(&ys, &w, 0.5 * (z1 + z2), eps);
        let ends = 0.5 * (worst_value(&ys, &w, z1, eps) + worst_value(&ys, &w, z2, eps));
        prop_assert!(mid <= ends + 1e-9 * (1.0 + ends.abs()));
    }

    #[test]
    fn triangle_worst_case_is_certified(
        pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.05f64..1.0), 1..=4),
        slopes in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -1.0f64..1.0), 1..=3),
        eps in 0.0f64..0.6,
    ) {
        // fold each point into the triangle
        let ys: Vec<Vec<f64>> = pts
            .iter()
            .map(|&(a, b, _)| if a + b <= 1.0 { vec![a, b] } else { vec![1.0 - a, 1.0 - b] })
            .collect();
        let raw: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let center = DiscreteMeasure::new(ys, raw).unwrap();
        let pieces = slopes.iter().map(|&(f1, f2, g)| AffinePiece::constant(1, vec![f1, f2], g)).collect();
        let cost = PiecewiseAffineCost::new(1, pieces, triangle()).unwrap();
        let amb = AmbiguitySet::new(center.clone(), eps).unwrap();

        let wc = worst_case_distribution(&cost, &amb, &[0.0]).unwrap();
        prop_assert!(wc.measure.len() <= center.len() + 1);
        for (y, _) in wc.measure.atoms() {
            prop_assert!(cost.support().contains(y, 1e-9));
        }
        let (dist, _) = wasserstein_with_norm(&center, &wc.measure, 1.0, GroundNorm::L1).unwrap();
        prop_assert!(dist <= eps + 1e-7);
        let expected = wc.measure.expectation(|y| cost.value(&[0.0], y));
        prop_assert!((expected - wc.value).abs() <= 1e-6, "E = {expected}, dual = {}", wc.value);
    }
}

#[test]
fn zero_radius_value_is_the_weighted_average() {
    let ys = [3.0, 9.0, 4.0];
    let w = weights(&[0.2, 0.5, 0.3]);
    let p = NewsvendorParams::default();
    let z = 6.0;
    let direct: f64 = w.as_slice().iter().zip(ys).map(|(wi, y)| wi * p.cost_at(z, y)).sum();
    assert!((worst_value(&ys, &w, z, 0.0) - direct).abs() < 1e-10);
}
