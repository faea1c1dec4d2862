//! Monte Carlo critical values for the SN scan and the NOT threshold.
//!
//! The limiting law of the scan maximum is free of nuisance parameters, so its
//! quantiles are approximated by scanning iid surrogate series. The NOT
//! threshold is the quantile of the largest interval maximum over a fixed
//! interval set, again under iid normal data.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SncpError};
use crate::random::{self, DOMAIN_QUANTILES, DOMAIN_THRESHOLD};
use crate::segmentation::RandomIntervalSet;
use crate::sn::{IntervalTable, SnConfig, SnScanner};

pub const DEFAULT_LEVELS: [f64; 5] = [0.90, 0.95, 0.99, 0.995, 0.999];

/// Surrogate error law used when simulating the null.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullNoise {
    #[default]
    Gaussian,
    /// Uniform on `[-1/2, 1/2)`.
    CenteredUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRequest {
    pub epsilon: f64,
    pub delta: f64,
    pub order: usize,
    pub levels: Vec<f64>,
    pub replications: usize,
    pub grid_n: usize,
    #[serde(default)]
    pub noise: NullNoise,
}

impl Default for QuantileRequest {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.02,
            order: 1,
            levels: DEFAULT_LEVELS.to_vec(),
            replications: 10_000,
            grid_n: 1000,
            noise: NullNoise::Gaussian,
        }
    }
}

impl QuantileRequest {
    pub fn config(&self) -> Result<SnConfig> {
        SnConfig::new(self.epsilon, self.delta, self.order)
    }

    pub fn validate(&self) -> Result<()> {
        self.config()?;
        validate_levels(&self.levels)?;
        if self.replications == 0 {
            return Err(SncpError::config("replications must be positive"));
        }
        Ok(())
    }
}

/// Simulated critical values keyed by level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub epsilon: f64,
    pub delta: f64,
    pub p: usize,
    pub quantiles: BTreeMap<String, f64>,
    pub replications: usize,
    pub grid_n: usize,
    pub seed: u64,
}

impl QuantileTable {
    pub fn get(&self, level: f64) -> Option<f64> {
        self.quantiles.get(&level_key(level)).copied()
    }
}

pub fn level_key(level: f64) -> String {
    format!("{level}")
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(SncpError::config("at least one quantile level is required"));
    }
    for &l in levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(SncpError::config(format!("quantile level {l} outside (0, 1)")));
        }
    }
    Ok(())
}

/// Scan maxima `G_n` of `replications` surrogate series, in replicate order.
pub fn null_statistics(req: &QuantileRequest, seed: u64) -> Result<Vec<f64>> {
    req.validate()?;
    let cfg = req.config()?;
    let n = req.grid_n;
    if cfg.h(n) == 0 || n < 2 * cfg.h(n) {
        return Err(SncpError::config(format!(
            "trimming epsilon={} leaves no candidates at grid_n={n}",
            req.epsilon
        )));
    }
    (0..req.replications as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = random::stream_rng(seed, DOMAIN_QUANTILES, b);
            let x = match req.noise {
                NullNoise::Gaussian => random::standard_normals(&mut rng, n),
                NullNoise::CenteredUniform => random::centered_uniforms(&mut rng, n),
            };
            let scanner = SnScanner::from_values(&x, &cfg)?;
            scanner.max_stat(1, n).map(|m| m.statistic).map_err(|e| {
                SncpError::config(format!(
                    "trimming (epsilon={}, delta={}) infeasible at grid_n={n}: {e}",
                    req.epsilon, req.delta
                ))
            })
        })
        .collect()
}

/// Empirical quantiles of the scan maximum under the null.
pub fn limiting_quantiles(req: &QuantileRequest, seed: u64) -> Result<QuantileTable> {
    let mut draws = null_statistics(req, seed)?;
    sort(&mut draws);
    let quantiles = req
        .levels
        .iter()
        .map(|&l| (level_key(l), empirical_quantile(&draws, l)))
        .collect();
    Ok(QuantileTable {
        epsilon: req.epsilon,
        delta: req.delta,
        p: req.order,
        quantiles,
        replications: req.replications,
        grid_n: req.grid_n,
        seed,
    })
}

pub(crate) fn sort(x: &mut [f64]) {
    x.sort_by(|a, b| a.total_cmp(b));
}

/// Order statistic `x_(⌈level·B⌉)` of sorted draws.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let b = sorted.len();
    let idx = ((level * b as f64 - 1e-9).ceil() as usize).clamp(1, b);
    sorted[idx - 1]
}

/// Standard error of the empirical quantile, from the spread of the order
/// statistics one binomial standard deviation either side.
pub fn quantile_standard_error(sorted: &[f64], level: f64) -> f64 {
    let b = sorted.len() as f64;
    let sd = (level * (1.0 - level) / b).sqrt();
    let lo = empirical_quantile(sorted, (level - sd).max(1.0 / b));
    let hi = empirical_quantile(sorted, (level + sd).min(1.0));
    0.5 * (hi - lo)
}

/// Tabulated critical values of the scan maximum for a linear trend.
const REFERENCE: [(f64, f64, [f64; 5]); 8] = [
    (0.1, 0.01, [14.963, 19.284, 32.168, 36.145, 45.354]),
    (0.1, 0.02, [24.959, 32.727, 53.645, 64.898, 92.982]),
    (0.1, 0.03, [38.277, 50.872, 83.713, 107.062, 137.433]),
    (0.1, 0.04, [54.569, 76.244, 116.497, 144.437, 182.786]),
    (0.2, 0.01, [4.656, 5.905, 9.691, 12.037, 14.148]),
    (0.2, 0.02, [7.217, 9.404, 15.486, 18.389, 24.079]),
    (0.2, 0.03, [10.526, 13.767, 23.060, 26.758, 36.388]),
    (0.2, 0.04, [14.439, 19.075, 33.049, 37.426, 49.495]),
];

/// Tabulated critical value for `p = 1`, if `(epsilon, delta, level)` is one
/// of the tabulated combinations.
pub fn reference_critical_value(epsilon: f64, delta: f64, level: f64) -> Option<f64> {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let col = DEFAULT_LEVELS.iter().position(|&l| close(l, level))?;
    REFERENCE
        .iter()
        .find(|(e, d, _)| close(*e, epsilon) && close(*d, delta))
        .map(|(_, _, q)| q[col])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRequest {
    pub n: usize,
    pub intervals: RandomIntervalSet,
    pub replications: usize,
    pub level: f64,
}

impl ThresholdRequest {
    pub fn new(intervals: RandomIntervalSet) -> Self {
        Self {
            n: intervals.n,
            intervals,
            replications: 1000,
            level: 0.95,
        }
    }
}

fn check_threshold_inputs(
    intervals: &RandomIntervalSet,
    n: usize,
    cfg: &SnConfig,
    replications: usize,
    level: f64,
) -> Result<()> {
    cfg.validate()?;
    validate_levels(&[level])?;
    if replications == 0 {
        return Err(SncpError::config("threshold replications must be positive"));
    }
    let h = cfg.h(n);
    if intervals.intervals.is_empty() {
        return Err(SncpError::config("interval set is empty"));
    }
    if intervals.n != n {
        return Err(SncpError::config(format!(
            "interval set drawn for n={} used with n={n}",
            intervals.n
        )));
    }
    for &(s, e) in &intervals.intervals {
        if h == 0 || s == 0 || e > n || s >= e || e - s + 1 < 2 * h {
            return Err(SncpError::config(format!(
                "interval ({s}, {e}) infeasible for n={n}, h={h}"
            )));
        }
    }
    Ok(())
}

fn null_series(n: usize, seed: u64, b: u64) -> Vec<f64> {
    random::standard_normals(&mut random::stream_rng(seed, DOMAIN_THRESHOLD, b), n)
}

/// Largest interval maximum over the fixed interval set for each of the
/// `B` null replicates, in replicate order.
pub fn not_null_maxima(req: &ThresholdRequest, cfg: &SnConfig, seed: u64) -> Result<Vec<f64>> {
    check_threshold_inputs(&req.intervals, req.n, cfg, req.replications, req.level)?;
    (0..req.replications as u64)
        .into_par_iter()
        .map(|b| {
            let scanner = SnScanner::from_values(&null_series(req.n, seed, b), cfg)?;
            let mut best = f64::NEG_INFINITY;
            for &(s, e) in &req.intervals.intervals {
                let m = scanner.max_stat(s, e).map_err(|err| {
                    SncpError::config(format!("interval ({s}, {e}) infeasible: {err}"))
                })?;
                best = best.max(m.statistic);
            }
            Ok(best)
        })
        .collect()
}

/// Interval tables of `B` null series of one length. Thresholds for any
/// number of interval sets are then read off without rescanning; replicate
/// `b` uses the same draw as in [`not_null_maxima`].
#[derive(Clone, Debug)]
pub struct NullBank {
    n: usize,
    cfg: SnConfig,
    tables: Vec<IntervalTable>,
}

impl NullBank {
    pub fn new(n: usize, cfg: &SnConfig, replications: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if replications == 0 {
            return Err(SncpError::config("threshold replications must be positive"));
        }
        let tables = (0..replications as u64)
            .into_par_iter()
            .map(|b| SnScanner::from_values(&null_series(n, seed, b), cfg)?.interval_table())
            .collect::<Result<_>>()?;
        Ok(Self { n, cfg: *cfg, tables })
    }

    pub fn replications(&self) -> usize {
        self.tables.len()
    }

    pub fn null_maxima(&self, intervals: &RandomIntervalSet) -> Result<Vec<f64>> {
        check_threshold_inputs(intervals, self.n, &self.cfg, self.tables.len(), 0.5)?;
        self.tables
            .iter()
            .map(|table| {
                let mut best = f64::NEG_INFINITY;
                for &(s, e) in &intervals.intervals {
                    let g = table.statistic(s, e);
                    if g == f64::NEG_INFINITY {
                        return Err(SncpError::config(format!(
                            "interval ({s}, {e}) has no feasible candidate"
                        )));
                    }
                    best = best.max(g);
                }
                Ok(best)
            })
            .collect()
    }

    pub fn threshold(&self, intervals: &RandomIntervalSet, level: f64) -> Result<f64> {
        validate_levels(&[level])?;
        let mut maxima = self.null_maxima(intervals)?;
        sort(&mut maxima);
        Ok(empirical_quantile(&maxima, level))
    }
}

/// NOT threshold: the `level` quantile of the null maxima.
pub fn not_threshold(req: &ThresholdRequest, cfg: &SnConfig, seed: u64) -> Result<f64> {
    let mut maxima = not_null_maxima(req, cfg, seed)?;
    sort(&mut maxima);
    Ok(empirical_quantile(&maxima, req.level))
}
