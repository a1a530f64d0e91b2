//! JSON run configuration. Every field is optional; command-line flags
//! override whatever the file sets.

use std::path::{Path, PathBuf};

use nwdro_core::experiments::SyntheticConfig;
use nwdro_core::transport::GroundNorm;
use nwdro_core::{Error, KernelSpec, NewsvendorParams, PolicyKind, PortfolioParams, RadiusSchedule, Result};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Newsvendor,
    Portfolio,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Sample CSV (`x1..,y1..`).
    pub data: Option<PathBuf>,
    pub dim_x: Option<usize>,
    pub query: Option<Vec<f64>>,
    /// Scalar newsvendor demands, an alternative to `data`.
    pub samples: Option<Vec<f64>>,
    /// Nominal weights for `samples`; uniform when absent.
    pub weights: Option<Vec<f64>>,

    #[serde(deserialize_with = "one_or_many")]
    pub policy: Option<Vec<PolicyKind>>,
    pub kernel: Option<KernelSpec>,
    /// Shorthand for `schedule = {"kind": "fixed", "epsilon": eps}`.
    pub eps: Option<f64>,
    pub schedule: Option<RadiusSchedule>,
    pub newsvendor: Option<NewsvendorParams>,
    pub portfolio: Option<PortfolioParams>,

    pub problem: Option<Problem>,
    pub z: Option<Vec<f64>>,

    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub p: Option<f64>,
    pub norm: Option<GroundNorm>,

    pub synthetic: Option<SyntheticConfig>,
    pub seed: Option<u64>,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Option<Vec<usize>>,
    pub sims: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub reps: Option<usize>,

    pub returns: Option<PathBuf>,
    pub window: Option<usize>,
    pub k: Option<Vec<f64>>,
    pub portfolio_name: Option<String>,

    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Radius rule: `schedule` if set, else the fixed `eps`.
    pub fn radius_schedule(&self) -> Option<RadiusSchedule> {
        self.schedule.or(self.eps.map(|epsilon| RadiusSchedule::Fixed { epsilon }))
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        let mut cfg = self.synthetic.clone().unwrap_or_default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }

    /// SHA-256 over the command, the merged configuration, and the bytes of
    /// every input file it names. `out` and `threads` do not change results
    /// and are left out.
    pub fn hash(&self, command: &str) -> Result<String> {
        let mut keyed = self.clone();
        keyed.out = None;
        keyed.threads = None;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(serde_json::to_vec(&keyed).map_err(|e| Error::InvalidInput(e.to_string()))?);
        for path in [&self.data, &self.a, &self.b, &self.returns].into_iter().flatten() {
            let bytes = std::fs::read(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            h.update(b"\n");
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }
}
