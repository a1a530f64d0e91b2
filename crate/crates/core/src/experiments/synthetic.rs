use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Demand model: temperature `t ~ N(temp_mean, temp_var)`, weekday
/// `d ~ U{1..7}`, and `Y | (t, d) ~ N(demand_base + (t - temp_mean) +
/// weekend_lift * 1{d weekend}, demand_var)`. Second parameters are variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub temp_mean: f64,
    pub temp_var: f64,
    pub demand_base: f64,
    pub weekend_lift: f64,
    pub demand_var: f64,
    pub weekend_days: Vec<u32>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            temp_mean: 20.0,
            temp_var: 4.0,
            demand_base: 100.0,
            weekend_lift: 20.0,
            demand_var: 16.0,
            weekend_days: vec![6, 7],
            seed: 0,
        }
    }
}

/// One generated training set together with a fresh query and the true
/// conditional demand law at that query.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub data: Dataset,
    pub query: Vec<f64>,
    pub true_mean: f64,
    pub true_std: f64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temp_var > 0.0 && self.demand_var > 0.0) || !self.temp_var.is_finite() || !self.demand_var.is_finite() {
            return Err(Error::invalid("synthetic variances must be positive and finite"));
        }
        if ![self.temp_mean, self.demand_base, self.weekend_lift].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("synthetic parameters must be finite"));
        }
        Ok(())
    }

    /// Mean demand given covariates `(t, d)`.
    pub fn conditional_mean(&self, x: &[f64]) -> f64 {
        let weekend = self.weekend_days.iter().any(|&w| f64::from(w) == x[1]);
        self.demand_base + (x[0] - self.temp_mean) + if weekend { self.weekend_lift } else { 0.0 }
    }

    pub fn demand_std(&self) -> f64 {
        self.demand_var.sqrt()
    }

    fn draw_covariate(&self, rng: &mut ChaCha8Rng, temp: &Normal<f64>) -> Vec<f64> {
        let t = temp.sample(rng);
        let d = rng.random_range(1..=7u32);
        vec![t, f64::from(d)]
    }

    /// Training set and query from `seed` (ignoring `self.seed`).
    pub fn generate_with_seed(&self, n: usize, seed: u64) -> Result<SyntheticInstance> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let temp = Normal::new(self.temp_mean, self.temp_var.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
        let noise = Normal::new(0.0, self.demand_std()).map_err(|e| Error::invalid(e.to_string()))?;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.draw_covariate(&mut rng, &temp);
            ys.push(vec![self.conditional_mean(&x) + noise.sample(&mut rng)]);
            xs.push(x);
        }
        let query = self.draw_covariate(&mut rng, &temp);
        Ok(SyntheticInstance {
            data: Dataset::new(xs, ys)?,
            true_mean: self.conditional_mean(&query),
            true_std: self.demand_std(),
            query,
        })
    }
}

/// Training set and query drawn with `cfg.seed`.
pub fn generate_newsvendor_data(cfg: &SyntheticConfig, n: usize) -> Result<SyntheticInstance> {
    cfg.generate_with_seed(n, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let cfg = SyntheticConfig {
            seed: 11,
            ..Default::default()
        };
        let a = generate_newsvendor_data(&cfg, 30).unwrap();
        assert_eq!(a, generate_newsvendor_data(&cfg, 30).unwrap());
        assert_ne!(a, cfg.generate_with_seed(30, 12).unwrap());
        for x in a.data.covariates() {
            assert!((1.0..=7.0).contains(&x[1]) && x[1].fract() == 0.0);
        }
    }

    #[test]
    fn weekend_mean() {
        let cfg = SyntheticConfig::default();
        assert_eq!(cfg.conditional_mean(&[23.5, 6.0]), 100.0 + 3.5 + 20.0);
        assert_eq!(cfg.conditional_mean(&[23.5, 7.0]), 123.5);
        assert_eq!(cfg.conditional_mean(&[23.5, 5.0]), 103.5);
        assert_eq!(cfg.demand_std(), 4.0);
    }
}
