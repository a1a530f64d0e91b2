//! Nadaraya-Watson weights for the nominal conditional distribution.
//!
//! Given historical covariates `x_i`, a query `x`, a kernel `K` and a
//! bandwidth `h`, the weight of sample `i` is
//!
//! ```text
//! w_i = K((x - x_i) / h) / sum_j K((x - x_j) / h)
//! ```
//!
//! The Gaussian kernel has unbounded support, so it does not satisfy the
//! bounded-support envelope used by the concentration guarantee; it is kept
//! because it is the kernel of choice in practice.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `1{|u| <= 1}`
    Naive,
    /// `(1 - |u|^2)_+`
    Epanechnikov,
    /// `exp(-|u|^2)`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed(f64),
    /// `h_n = n^(-exponent)` with `exponent` in `(0, 1/d_x)`.
    Rate(f64),
    /// `h_n = n^(-1/(d_x + 4))`.
    Classical,
}

impl BandwidthRule {
    pub fn bandwidth(&self, n: usize, dim_x: usize) -> Result<f64> {
        let n = n as f64;
        match *self {
            BandwidthRule::Fixed(h) => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
                }
                Ok(h)
            }
            BandwidthRule::Rate(exponent) => {
                let limit = 1.0 / dim_x.max(1) as f64;
                if !(exponent > 0.0 && exponent < limit) {
                    return Err(Error::invalid(format!(
                        "bandwidth exponent must lie in (0, {limit}), got {exponent}"
                    )));
                }
                Ok(n.powf(-exponent))
            }
            BandwidthRule::Classical => Ok(n.powf(-1.0 / (dim_x as f64 + 4.0))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: BandwidthRule,
    /// z-score each covariate dimension with the historical mean and sample
    /// standard deviation before evaluating the kernel.
    pub standardize: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            bandwidth: BandwidthRule::Classical,
            standardize: true,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: BandwidthRule) -> Self {
        KernelSpec {
            family,
            bandwidth,
            standardize: true,
        }
    }

    pub fn raw(mut self) -> Self {
        self.standardize = false;
        self
    }
}

/// Kernel evaluated at a scaled offset `u`.
pub fn kernel_value(family: KernelFamily, u: &[f64]) -> f64 {
    profile(family, squared_norm(u))
}

fn squared_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

/// Kernel as a function of `|u|^2`.
fn profile(family: KernelFamily, sq: f64) -> f64 {
    match family {
        KernelFamily::Naive => {
            if sq <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        KernelFamily::Epanechnikov => (1.0 - sq).max(0.0),
        KernelFamily::Gaussian => (-sq).exp(),
    }
}

/// Normalized Nadaraya-Watson weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    bandwidth: f64,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / n as f64; n],
            bandwidth: f64::INFINITY,
        }
    }

    /// Arbitrary simplex weights, e.g. from an external estimator.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightVector {
            weights,
            bandwidth: f64::NAN,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Bandwidth used to produce the weights (infinite for uniform weights).
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn effective_support(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }
}

/// Per-dimension scale applied to covariate offsets. Offsets are
/// translation-free, so only the spread matters.
struct Scaling {
    scale: Vec<f64>,
}

impl Scaling {
    fn identity(dim: usize) -> Self {
        Scaling {
            scale: vec![1.0; dim],
        }
    }

    fn fit(covariates: &[Vec<f64>]) -> Result<Self> {
        let n = covariates.len();
        let dim = covariates[0].len();
        if n < 2 {
            return Ok(Scaling::identity(dim));
        }
        let mut center = vec![0.0; dim];
        for x in covariates {
            for (c, v) in center.iter_mut().zip(x) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= n as f64);
        let mut scale = vec![0.0; dim];
        for x in covariates {
            for ((s, v), c) in scale.iter_mut().zip(x).zip(&center) {
                *s += (v - c) * (v - c);
            }
        }
        let mut any_spread = false;
        for s in &mut scale {
            *s = (*s / (n as f64 - 1.0)).sqrt();
            if *s > 0.0 {
                any_spread = true;
            } else {
                // constant dimension: offsets are identical for all samples
                *s = 1.0;
            }
        }
        if !any_spread && dim > 0 {
            return Err(Error::invalid(
                "cannot standardize: every covariate dimension is constant",
            ));
        }
        Ok(Scaling { scale })
    }

    fn squared_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.scale)
            .map(|((x, y), s)| {
                let d = (x - y) / s;
                d * d
            })
            .sum()
    }
}

/// Kernel weights of every sample in `data` for covariate `query`.
pub fn compute_weights(data: &Dataset, query: &[f64], kernel: &KernelSpec) -> Result<WeightVector> {
    if query.len() != data.dim_x() {
        return Err(Error::DimensionMismatch {
            expected: data.dim_x(),
            found: query.len(),
        });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("query covariate is not finite"));
    }
    let n = data.len();
    let h = kernel.bandwidth.bandwidth(n, data.dim_x())?;
    let scaling = if kernel.standardize {
        Scaling::fit(data.covariates())?
    } else {
        Scaling::identity(data.dim_x())
    };

    // squared norms of the scaled offsets (x - x_i) / h
    let sq: Vec<f64> = data
        .covariates()
        .iter()
        .map(|xi| scaling.squared_distance(query, xi) / (h * h))
        .collect();

    let raw: Vec<f64> = match kernel.family {
        // shift by the minimum so far-away queries do not underflow to zero
        KernelFamily::Gaussian => {
            let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
            sq.iter().map(|s| (-(s - min)).exp()).collect()
        }
        family => sq.iter().map(|&s| profile(family, s)).collect(),
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        let nearest = sq.iter().copied().fold(f64::INFINITY, f64::min).sqrt() * h;
        return Err(Error::NoNeighbors {
            min_bandwidth: nearest,
        });
    }
    Ok(WeightVector {
        weights: raw.iter().map(|k| k / total).collect(),
        bandwidth: h,
    })
}
