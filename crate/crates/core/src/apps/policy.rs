use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dro::RadiusSchedule;
use crate::error::{Error, Result};
use crate::kernel::{compute_weights, KernelSpec, WeightVector};

/// The five benchmark rules. Each is a configuration of the same engine:
/// SO kinds use radius 0, Naive kinds use uniform weights, EW ignores data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Ew,
    NaiveSo,
    NwSo,
    NaiveDro,
    NwDro,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Ew,
        PolicyKind::NaiveSo,
        PolicyKind::NwSo,
        PolicyKind::NaiveDro,
        PolicyKind::NwDro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ew => "ew",
            PolicyKind::NaiveSo => "naive-so",
            PolicyKind::NwSo => "nw-so",
            PolicyKind::NaiveDro => "naive-dro",
            PolicyKind::NwDro => "nw-dro",
        }
    }

    pub fn uses_kernel(self) -> bool {
        matches!(self, PolicyKind::NwSo | PolicyKind::NwDro)
    }

    pub fn is_robust(self) -> bool {
        matches!(self, PolicyKind::NaiveDro | PolicyKind::NwDro)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown policy '{s}' (expected ew, naive-so, nw-so, naive-dro, nw-dro)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub kind: PolicyKind,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub schedule: RadiusSchedule,
}

impl Policy {
    pub fn new(kind: PolicyKind, kernel: KernelSpec, schedule: RadiusSchedule) -> Self {
        Policy { kind, kernel, schedule }
    }

    /// Nominal weights on the rows of `data`.
    pub fn weights(&self, data: &Dataset, query: &[f64]) -> Result<WeightVector> {
        if self.kind.uses_kernel() {
            compute_weights(data, query, &self.kernel)
        } else {
            Ok(WeightVector::uniform(data.len()))
        }
    }

    /// Ball radius for `n` samples.
    pub fn radius(&self, n: usize) -> Result<f64> {
        if self.kind.is_robust() {
            self.schedule.radius(n)
        } else {
            Ok(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{BandwidthRule, KernelFamily};

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("nw".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn configurations() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0], vec![5.0]], vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Gaussian, BandwidthRule::Fixed(1.0)).raw();
        let sched = RadiusSchedule::Fixed { epsilon: 2.0 };
        let so = Policy::new(PolicyKind::NwSo, kernel, sched);
        let dro = Policy::new(PolicyKind::NaiveDro, kernel, sched);
        assert_eq!(so.radius(3).unwrap(), 0.0);
        assert_eq!(dro.radius(3).unwrap(), 2.0);
        assert_eq!(dro.weights(&data, &[0.0]).unwrap(), WeightVector::uniform(3));
        let w = so.weights(&data, &[0.0]).unwrap();
        assert!(w.as_slice()[0] > w.as_slice()[2]);
    }
}
