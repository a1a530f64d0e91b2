use nwdro_core::apps::empirical_cvar;
use nwdro_core::experiments::{
    disappointment, generate_newsvendor_data, rolling_returns, BacktestConfig, SyntheticConfig,
};
use nwdro_core::{Dataset, KernelSpec, NewsvendorParams, Policy, PolicyKind, PortfolioParams, RadiusSchedule};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn weekday_demand_at_reference_temperature() {
    let cfg = SyntheticConfig {
        seed: 3,
        ..Default::default()
    };
    let inst = generate_newsvendor_data(&cfg, 100_000).unwrap();
    // Y - (t - 20) on weekdays has the law of weekday demand at t = 20.
    let shifted: Vec<f64> = inst
        .data
        .covariates()
        .iter()
        .zip(inst.data.outcomes())
        .filter(|(x, _)| x[1] <= 5.0)
        .map(|(x, y)| y[0] - (x[0] - 20.0))
        .collect();
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    assert!((mean - 100.0).abs() <= 3.0 * 4.0 / (shifted.len() as f64).sqrt(), "mean {mean}");
}

#[test]
fn weekend_query_mean() {
    let cfg = SyntheticConfig::default();
    let x = [22.7, 6.0];
    assert!((cfg.conditional_mean(&x) - (100.0 + 2.7 + 20.0)).abs() < 1e-12);
}

#[test]
fn disappointment_falls_with_radius() {
    let cfg = SyntheticConfig {
        seed: 19,
        ..Default::default()
    };
    let params = NewsvendorParams::default();
    for kind in [PolicyKind::NaiveDro, PolicyKind::NwDro] {
        let rates: Vec<f64> = [0.0, 2.0, params.upper - params.lower]
            .iter()
            .map(|&epsilon| {
                let policy = Policy::new(kind, KernelSpec::default(), RadiusSchedule::Fixed { epsilon });
                disappointment(&cfg, &params, &policy, 20, 100).unwrap().rate
            })
            .collect();
        assert!(rates[0] >= rates[1] && rates[1] >= rates[2], "{kind}: {rates:?}");
        assert_eq!(rates[2], 0.0);
    }
}

#[test]
fn disappointment_ignores_thread_count() {
    let cfg = SyntheticConfig {
        seed: 7,
        ..Default::default()
    };
    let policy = Policy::new(PolicyKind::NwDro, KernelSpec::default(), RadiusSchedule::Fixed { epsilon: 2.0 });
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| disappointment(&cfg, &NewsvendorParams::default(), &policy, 20, 40).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn ew_is_rejected_for_the_newsvendor() {
    let policy = Policy::new(PolicyKind::Ew, KernelSpec::default(), RadiusSchedule::Fixed { epsilon: 0.0 });
    assert!(disappointment(&SyntheticConfig::default(), &NewsvendorParams::default(), &policy, 10, 5).is_err());
}

fn random_months(t: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..t).map(|_| (0..d).map(|_| rng.random_range(-0.08..0.1)).collect()).collect()
}

#[test]
fn backtest_return_count_and_order() {
    let rows = random_months(14, 3, 1);
    let data = Dataset::new(rows.clone(), rows.clone()).unwrap();
    for kind in [PolicyKind::Ew, PolicyKind::NaiveSo, PolicyKind::NwDro] {
        let cfg = BacktestConfig {
            window: 6,
            policy: Policy::new(kind, KernelSpec::default(), RadiusSchedule::RootM { k: 0.01, m: 6, dim_y: 3 }),
            portfolio: PortfolioParams::default(),
        };
        let r = rolling_returns(&data, &cfg).unwrap();
        assert_eq!(r.len(), 14 - 6);
        if kind == PolicyKind::Ew {
            for (t, ret) in r.iter().enumerate() {
                let expected = rows[t + 6].iter().sum::<f64>() / 3.0;
                assert!((ret - expected).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn shuffled_months_change_decisions_but_cvar_is_order_free() {
    let rows = random_months(12, 2, 9);
    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let cfg = BacktestConfig {
        window: 4,
        policy: Policy::new(PolicyKind::NaiveSo, KernelSpec::default(), RadiusSchedule::Fixed { epsilon: 0.0 }),
        portfolio: PortfolioParams::default(),
    };
    let a = rolling_returns(&Dataset::new(rows.clone(), rows).unwrap(), &cfg).unwrap();
    let b = rolling_returns(&Dataset::new(shuffled.clone(), shuffled).unwrap(), &cfg).unwrap();
    assert_ne!(a, b);

    let mut permuted = a.clone();
    permuted.reverse();
    let eta = 0.2;
    assert!((empirical_cvar(&a, eta).unwrap() - empirical_cvar(&permuted, eta).unwrap()).abs() < 1e-15);
}
