use std::path::{Path, PathBuf};

use nwdro_core::data::{load_measure_csv, load_returns_table, load_samples_csv};
use nwdro_core::dro::{build_reformulation, worst_case_distribution};
use nwdro_core::experiments::{
    concentration_curve, disappointment, rolling_backtest, write_backtest_csv, write_concentration_csv,
    write_disappointment_csv, BacktestConfig, BacktestRow,
};
use nwdro_core::transport::wasserstein_with_norm;
use nwdro_core::{
    solve_newsvendor, solve_portfolio, AmbiguitySet, Dataset, DecisionConstraints, DiscreteMeasure, Error,
    GroundNorm, Policy, PolicyKind, RadiusSchedule, Result, WeightVector,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Problem, RunConfig};

pub(crate) struct Output {
    pub json: Value,
    /// CSV body without the hash line.
    pub csv: Vec<u8>,
}

pub(crate) fn dispatch(name: &str, cfg: &RunConfig, lp_out: Option<&Path>) -> Result<Output> {
    match name {
        "weights" => weights(cfg),
        "wdist" => wdist(cfg),
        "solve-newsvendor" => solve_nv(cfg, lp_out),
        "solve-portfolio" => solve_pf(cfg),
        "worst-case" => worst_case(cfg),
        "disappointment" => run_disappointment(cfg),
        "concentration" => run_concentration(cfg),
        "backtest" => run_backtest(cfg),
        other => Err(Error::InvalidInput(format!("unknown command {other}"))),
    }
}

fn to_json(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn required<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::InvalidInput(format!("missing {what}")))
}

fn csv_text(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let path = required(&cfg.data, "--data")?;
    load_samples_csv(path, *required(&cfg.dim_x, "--dx")?)
}

fn single_policy(cfg: &RunConfig) -> Result<PolicyKind> {
    match cfg.policy.as_deref() {
        None => Ok(PolicyKind::NwDro),
        Some([k]) => Ok(*k),
        Some(_) => Err(Error::InvalidInput("this command takes a single policy".into())),
    }
}

fn policy(cfg: &RunConfig, kind: PolicyKind) -> Result<Policy> {
    let schedule = match cfg.radius_schedule() {
        Some(s) => s,
        None if kind.is_robust() => return Err(Error::InvalidInput(format!("{kind} needs --eps or a schedule"))),
        None => RadiusSchedule::Fixed { epsilon: 0.0 },
    };
    Ok(Policy::new(kind, cfg.kernel.unwrap_or_default(), schedule))
}

/// Outcomes, nominal weights and radius for a single-decision solve.
struct Nominal {
    kind: Option<PolicyKind>,
    outcomes: Vec<Vec<f64>>,
    weights: WeightVector,
    eps: f64,
}

fn nominal(cfg: &RunConfig) -> Result<Nominal> {
    if let Some(ys) = &cfg.samples {
        if cfg.data.is_some() {
            return Err(Error::InvalidInput("give either samples or data, not both".into()));
        }
        let weights = match &cfg.weights {
            Some(w) => WeightVector::from_weights(w.clone())?,
            None => WeightVector::uniform(ys.len()),
        };
        let eps = match cfg.radius_schedule() {
            Some(s) => s.radius(ys.len())?,
            None => 0.0,
        };
        return Ok(Nominal {
            kind: None,
            outcomes: ys.iter().map(|y| vec![*y]).collect(),
            weights,
            eps,
        });
    }
    let data = load_data(cfg)?;
    let kind = single_policy(cfg)?;
    let pol = policy(cfg, kind)?;
    let weights = if kind.uses_kernel() {
        pol.weights(&data, required(&cfg.query, "--query")?)?
    } else {
        WeightVector::uniform(data.len())
    };
    Ok(Nominal {
        kind: Some(kind),
        outcomes: data.outcomes().to_vec(),
        weights,
        eps: pol.radius(data.len())?,
    })
}

fn scalar_outcomes(outcomes: &[Vec<f64>]) -> Result<Vec<f64>> {
    outcomes
        .iter()
        .map(|y| match y.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::DimensionMismatch { expected: 1, found: y.len() }),
        })
        .collect()
}

fn weights(cfg: &RunConfig) -> Result<Output> {
    let data = load_data(cfg)?;
    let w = nwdro_core::compute_weights(&data, required(&cfg.query, "--query")?, &cfg.kernel.unwrap_or_default())?;
    let csv = csv_text("index,weight", w.as_slice().iter().enumerate().map(|(i, v)| format!("{i},{v}")));
    Ok(Output {
        json: json!({
            "bandwidth": w.bandwidth(),
            "effective_support": w.effective_support(),
            "weights": w.as_slice(),
        }),
        csv,
    })
}

fn wdist(cfg: &RunConfig) -> Result<Output> {
    let a = load_measure_csv(required(&cfg.a, "--a")?)?;
    let b = load_measure_csv(required(&cfg.b, "--b")?)?;
    let p = cfg.p.unwrap_or(1.0);
    let norm = cfg.norm.unwrap_or(GroundNorm::Euclidean);
    let (distance, coupling) = wasserstein_with_norm(&a, &b, p, norm)?;
    let mut rows = Vec::new();
    for (i, row) in coupling.plan.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > 0.0 {
                rows.push(format!("{i},{j},{m}"));
            }
        }
    }
    Ok(Output {
        json: json!({ "distance": distance, "order": p, "norm": norm, "plan": coupling.plan }),
        csv: csv_text("i,j,mass", rows),
    })
}

fn solution_csv(decision: &[f64], value: f64, lambda: f64) -> Vec<u8> {
    let mut rows: Vec<String> = decision.iter().enumerate().map(|(j, z)| format!("z{},{z}", j + 1)).collect();
    rows.push(format!("value,{value}"));
    rows.push(format!("lambda,{lambda}"));
    csv_text("quantity,value", rows)
}

fn solve_nv(cfg: &RunConfig, lp_out: Option<&Path>) -> Result<Output> {
    let params = cfg.newsvendor.unwrap_or_default();
    let nom = nominal(cfg)?;
    if nom.kind == Some(PolicyKind::Ew) {
        return Err(Error::InvalidInput("ew is a portfolio benchmark".into()));
    }
    let ys = scalar_outcomes(&nom.outcomes)?;
    let sol = solve_newsvendor(&params, &nom.weights, &ys, nom.eps)?.require_optimal()?;
    if let Some(path) = lp_out {
        let amb = AmbiguitySet::weighted(&nom.outcomes, &nom.weights, nom.eps)?;
        let (model, _) = build_reformulation(&params.cost()?, &amb, &DecisionConstraints::nonnegative(1))?;
        write_file(path, model.to_listing().as_bytes())?;
    }
    Ok(Output {
        csv: solution_csv(&sol.decision, sol.value, sol.lambda),
        json: json!({
            "policy": nom.kind,
            "epsilon": nom.eps,
            "order_quantity": sol.decision[0],
            "value": sol.value,
            "lambda": sol.lambda,
            "weights": nom.weights.as_slice(),
        }),
    })
}

fn solve_pf(cfg: &RunConfig) -> Result<Output> {
    let params = cfg.portfolio.unwrap_or_default();
    let data = load_data(cfg)?;
    let kind = single_policy(cfg)?;
    if kind == PolicyKind::Ew {
        let z = nwdro_core::apps::equally_weighted(data.dim_y())?;
        return Ok(Output {
            csv: csv_text("quantity,value", z.iter().enumerate().map(|(j, v)| format!("z{},{v}", j + 1))),
            json: json!({ "policy": kind, "allocation": z }),
        });
    }
    let pol = policy(cfg, kind)?;
    let weights = if kind.uses_kernel() {
        pol.weights(&data, required(&cfg.query, "--query")?)?
    } else {
        WeightVector::uniform(data.len())
    };
    let eps = pol.radius(data.len())?;
    let sol = solve_portfolio(&params, &weights, data.outcomes(), eps)?.require_optimal()?;
    let d = data.dim_y();
    Ok(Output {
        csv: solution_csv(&sol.decision, sol.value, sol.lambda),
        json: json!({
            "policy": kind,
            "epsilon": eps,
            "allocation": &sol.decision[..d],
            "threshold": sol.decision[d],
            "value": sol.value,
            "lambda": sol.lambda,
        }),
    })
}

fn worst_case(cfg: &RunConfig) -> Result<Output> {
    let z = required(&cfg.z, "--z")?;
    let nom = nominal(cfg)?;
    let cost = match cfg.problem.unwrap_or(Problem::Newsvendor) {
        Problem::Newsvendor => cfg.newsvendor.unwrap_or_default().cost()?,
        Problem::Portfolio => {
            let d = nom.outcomes.first().map_or(0, Vec::len);
            cfg.portfolio.unwrap_or_default().cost(d)?
        }
    };
    let amb = AmbiguitySet::weighted(&nom.outcomes, &nom.weights, nom.eps)?;
    let wc = worst_case_distribution(&cost, &amb, z)?;
    Ok(Output {
        csv: measure_csv(&wc.measure),
        json: json!({
            "epsilon": nom.eps,
            "value": wc.value,
            "lambda": wc.lambda,
            "split": wc.split,
            "atoms": wc.measure.support(),
            "weights": wc.measure.weights(),
        }),
    })
}

fn measure_csv(m: &DiscreteMeasure) -> Vec<u8> {
    let header: Vec<String> = std::iter::once("w".to_string())
        .chain((1..=m.dim()).map(|j| format!("y{j}")))
        .collect();
    let rows = m.atoms().map(|(y, w)| {
        std::iter::once(w)
            .chain(y.iter().copied())
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    });
    csv_text(&header.join(","), rows)
}

const EXPERIMENT_POLICIES: [PolicyKind; 4] =
    [PolicyKind::NaiveSo, PolicyKind::NaiveDro, PolicyKind::NwSo, PolicyKind::NwDro];

fn run_disappointment(cfg: &RunConfig) -> Result<Output> {
    let syn = cfg.synthetic_config();
    let params = cfg.newsvendor.unwrap_or_default();
    let kinds = cfg.policy.clone().unwrap_or_else(|| EXPERIMENT_POLICIES.to_vec());
    let ns = required(&cfg.n, "--n")?;
    let sims = cfg.sims.unwrap_or(200);
    let mut rows = Vec::new();
    for &kind in &kinds {
        let pol = policy(cfg, kind)?;
        for &n in ns {
            rows.push(disappointment(&syn, &params, &pol, n, sims)?);
        }
    }
    let mut csv = Vec::new();
    write_disappointment_csv(&mut csv, None, &rows)?;
    Ok(Output { json: to_json(&rows)?, csv })
}

fn run_concentration(cfg: &RunConfig) -> Result<Output> {
    let ns = required(&cfg.ns, "--ns")?;
    let rows = concentration_curve(&cfg.synthetic_config(), &cfg.kernel.unwrap_or_default(), ns, cfg.reps.unwrap_or(50))?;
    let mut csv = Vec::new();
    write_concentration_csv(&mut csv, None, &rows)?;
    Ok(Output { json: to_json(&rows)?, csv })
}

fn run_backtest(cfg: &RunConfig) -> Result<Output> {
    let path = required(&cfg.returns, "--returns")?;
    let table = load_returns_table(path)?;
    let data = table.to_dataset()?;
    let window = *required(&cfg.window, "--window")?;
    let name = cfg.portfolio_name.clone().unwrap_or_else(|| stem(path));
    let kernel = cfg.kernel.unwrap_or_default();
    let portfolio = cfg.portfolio.unwrap_or_default();
    let kinds = cfg.policy.clone().unwrap_or_else(|| PolicyKind::ALL.to_vec());

    let mut policies = Vec::new();
    for kind in kinds {
        if !kind.is_robust() {
            policies.push(Policy::new(kind, kernel, RadiusSchedule::Fixed { epsilon: 0.0 }));
        } else if let Some(ks) = &cfg.k {
            for &k in ks {
                let schedule = RadiusSchedule::RootM { k, m: window, dim_y: data.dim_y() };
                policies.push(Policy::new(kind, kernel, schedule));
            }
        } else {
            policies.push(policy(cfg, kind)?);
        }
    }
    let mut rows = Vec::new();
    for pol in policies {
        let metrics = rolling_backtest(&data, &BacktestConfig { window, policy: pol, portfolio })?;
        rows.push(BacktestRow::new(name.clone(), &pol, &metrics));
    }
    let mut csv = Vec::new();
    write_backtest_csv(&mut csv, None, &rows)?;
    Ok(Output { json: to_json(&rows)?, csv })
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "portfolio".into(), |s| s.to_string_lossy().into_owned())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })
}
