use rayon::prelude::*;
use serde::Serialize;

use crate::apps::{solve_newsvendor, true_newsvendor_cost, NewsvendorParams, Policy, PolicyKind};
use crate::error::{Error, Result};

use super::synthetic::SyntheticConfig;

/// Out-of-sample disappointment estimate for one policy and sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisappointmentRow {
    pub policy: PolicyKind,
    pub n: usize,
    pub epsilon_rule: String,
    pub epsilon: f64,
    pub sims: usize,
    /// Fraction of solved instances whose true expected cost reaches the
    /// optimal value. NaN when every instance failed.
    pub rate: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Disappointed,
    Kept,
    Failed,
}

/// Estimates `P(E[c(z_n, Y) | x] >= J_n)` over `sims` independent instances.
///
/// Instance `k` uses seed `cfg.seed + k`, so results do not depend on how
/// the work is scheduled across threads. Instances whose solve fails are
/// excluded from the rate and counted in `failures`.
pub fn disappointment(
    cfg: &SyntheticConfig,
    params: &NewsvendorParams,
    policy: &Policy,
    n: usize,
    sims: usize,
) -> Result<DisappointmentRow> {
    cfg.validate()?;
    params.validate()?;
    if sims == 0 {
        return Err(Error::invalid("sims must be at least 1"));
    }
    if policy.kind == PolicyKind::Ew {
        return Err(Error::invalid("the equally weighted policy has no newsvendor counterpart"));
    }
    let eps = policy.radius(n)?;
    let outcomes: Vec<Outcome> = (0..sims)
        .into_par_iter()
        .map(|k| instance(cfg, params, policy, n, eps, cfg.seed.wrapping_add(k as u64)))
        .collect();
    let failures = outcomes.iter().filter(|o| **o == Outcome::Failed).count();
    let bad = outcomes.iter().filter(|o| **o == Outcome::Disappointed).count();
    let solved = sims - failures;
    Ok(DisappointmentRow {
        policy: policy.kind,
        n,
        epsilon_rule: if policy.kind.is_robust() {
            policy.schedule.label().to_string()
        } else {
            "none".to_string()
        },
        epsilon: eps,
        sims,
        rate: if solved == 0 { f64::NAN } else { bad as f64 / solved as f64 },
        failures,
    })
}

fn instance(cfg: &SyntheticConfig, params: &NewsvendorParams, policy: &Policy, n: usize, eps: f64, seed: u64) -> Outcome {
    let run = || -> Result<bool> {
        let inst = cfg.generate_with_seed(n, seed)?;
        let weights = policy.weights(&inst.data, &inst.query)?;
        let samples: Vec<f64> = inst.data.outcomes().iter().map(|y| y[0]).collect();
        let sol = solve_newsvendor(params, &weights, &samples, eps)?.require_optimal()?;
        let truth = true_newsvendor_cost(params, sol.decision[0], inst.true_mean, inst.true_std)?;
        Ok(truth >= sol.value)
    };
    match run() {
        Ok(true) => Outcome::Disappointed,
        Ok(false) => Outcome::Kept,
        Err(_) => Outcome::Failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dro::RadiusSchedule;
    use crate::kernel::KernelSpec;

    #[test]
    fn single_simulation_is_binary_and_reproducible() {
        let cfg = SyntheticConfig {
            seed: 7,
            ..Default::default()
        };
        let policy = Policy::new(PolicyKind::NwDro, KernelSpec::default(), RadiusSchedule::Fixed { epsilon: 2.0 });
        let a = disappointment(&cfg, &NewsvendorParams::default(), &policy, 20, 1).unwrap();
        assert!(a.rate == 0.0 || a.rate == 1.0);
        assert_eq!(a, disappointment(&cfg, &NewsvendorParams::default(), &policy, 20, 1).unwrap());
    }

    #[test]
    fn huge_radius_never_disappoints() {
        let cfg = SyntheticConfig::default();
        let params = NewsvendorParams::default();
        let policy = Policy::new(PolicyKind::NaiveDro, KernelSpec::default(), RadiusSchedule::Fixed { epsilon: 300.0 });
        let row = disappointment(&cfg, &params, &policy, 10, 20).unwrap();
        assert_eq!(row.rate, 0.0);
        assert_eq!(row.failures, 0);
        assert_eq!(row.epsilon_rule, "fixed");
    }
}
