//! Data-generating processes, segmentation accuracy metrics and the Monte
//! Carlo experiments for single-break testing and multiple-break estimation.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, empirical_quantile, NullBank};
use crate::error::{Result, SncpError};
use crate::random::{self, DOMAIN_AR1, DOMAIN_MULTI_CP, DOMAIN_SIZE_POWER};
use crate::regression::{PolyCoefficients, TimeSeries};
use crate::segmentation::{self, sample_intervals_on_stream, segments_from, DetectConfig};
use crate::sn::{SnConfig, SnScanner};

/// Stationary Gaussian AR(1) errors with marginal standard deviation `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ar1Spec {
    pub rho: f64,
    pub sigma: f64,
}

impl Ar1Spec {
    pub fn new(rho: f64, sigma: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(SncpError::argument(format!("AR(1) coefficient {rho} not in (-1, 1)")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SncpError::argument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { rho, sigma })
    }

    pub fn innovation_sd(&self) -> f64 {
        self.sigma * (1.0 - self.rho * self.rho).sqrt()
    }
}

/// Draws `n` values of the AR(1) process started from its stationary law.
pub fn ar1_from<R: Rng + ?Sized>(rng: &mut R, n: usize, spec: &Ar1Spec) -> Vec<f64> {
    let innov = spec.innovation_sd();
    let mut out = Vec::with_capacity(n);
    let mut u = 0.0;
    for t in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        u = if t == 0 { spec.sigma * z } else { spec.rho * u + innov * z };
        out.push(u);
    }
    out
}

pub fn gen_ar1(n: usize, spec: &Ar1Spec, seed: u64) -> Result<Vec<f64>> {
    let spec = Ar1Spec::new(spec.rho, spec.sigma)?;
    Ok(ar1_from(&mut random::stream_rng(seed, DOMAIN_AR1, 0), n, &spec))
}

/// Piecewise polynomial mean on `1..=n`; segment `i` ends at `breakpoints[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTrendSpec {
    pub n: usize,
    pub breakpoints: Vec<usize>,
    pub segments: Vec<PolyCoefficients>,
}

impl PiecewiseTrendSpec {
    pub fn new(n: usize, breakpoints: Vec<usize>, segments: Vec<PolyCoefficients>) -> Result<Self> {
        if segments.len() != breakpoints.len() + 1 {
            return Err(SncpError::argument(format!(
                "{} breakpoints need {} segments, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                segments.len()
            )));
        }
        let mut prev = 0;
        for &b in &breakpoints {
            if b <= prev || b >= n {
                return Err(SncpError::argument(format!(
                    "breakpoints must be increasing inside 1..{n}"
                )));
            }
            prev = b;
        }
        if segments.windows(2).any(|w| w[0] == w[1]) {
            return Err(SncpError::argument("adjacent segments share coefficients"));
        }
        Ok(Self {
            n,
            breakpoints,
            segments,
        })
    }

    /// Mean at time `t` (1-based).
    pub fn mean(&self, t: usize) -> f64 {
        let seg = self.breakpoints.partition_point(|&b| b < t);
        self.segments[seg].eval(t as f64 / self.n as f64)
    }
}

pub fn gen_piecewise(spec: &PiecewiseTrendSpec, errors: &[f64]) -> Result<TimeSeries> {
    if errors.len() != spec.n {
        return Err(SncpError::argument(format!(
            "expected {} errors, got {}",
            spec.n,
            errors.len()
        )));
    }
    TimeSeries::new((1..=spec.n).map(|t| spec.mean(t) + errors[t - 1]).collect())
}

/// Four linear segments on `n = 100` with breaks at 20, 40 and 70.
pub fn multi_cp_spec() -> PiecewiseTrendSpec {
    PiecewiseTrendSpec::new(
        100,
        vec![20, 40, 70],
        vec![
            PolyCoefficients::linear(3.0, 3.2),
            PolyCoefficients::linear(5.8, 1.8),
            PolyCoefficients::linear(9.8, 0.8),
            PolyCoefficients::linear(15.05, 0.05),
        ],
    )
    .expect("valid built-in spec")
}

/// Over-segmentation error `d1`, under-segmentation error `d2` and their
/// maximum. When exactly one set is empty the missing side is reported as `n`.
pub fn hausdorff(true_cps: &[usize], est_cps: &[usize], n: usize) -> (usize, usize, usize) {
    fn directed(from: &[usize], to: &[usize]) -> usize {
        from.iter()
            .map(|&a| to.iter().map(|&b| a.abs_diff(b)).min().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
    match (true_cps.is_empty(), est_cps.is_empty()) {
        (true, true) => (0, 0, 0),
        (false, true) => (0, n, n),
        (true, false) => (n, 0, n),
        (false, false) => {
            let d1 = directed(est_cps, true_cps);
            let d2 = directed(true_cps, est_cps);
            (d1, d2, d1.max(d2))
        }
    }
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index of the segmentations of `1..=n` induced by two sets of
/// change-points.
pub fn adjusted_rand_index(cps_a: &[usize], cps_b: &[usize], n: usize) -> f64 {
    let seg_a = segments_from(cps_a, n);
    let seg_b = segments_from(cps_b, n);
    let mut index = 0.0;
    for &(s1, e1) in &seg_a {
        for &(s2, e2) in &seg_b {
            let lo = s1.max(s2);
            let hi = e1.min(e2);
            if lo <= hi {
                index += choose2(hi - lo + 1);
            }
        }
    }
    let sum_a: f64 = seg_a.iter().map(|&(s, e)| choose2(e - s + 1)).sum();
    let sum_b: f64 = seg_b.iter().map(|&(s, e)| choose2(e - s + 1)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return if seg_a == seg_b { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

/// Settings of the size and size-adjusted power experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePowerConfig {
    pub n: usize,
    pub rhos: Vec<f64>,
    /// Nominal test levels, e.g. 0.05.
    pub alphas: Vec<f64>,
    pub replications: usize,
    pub sigma: f64,
    pub sn: SnConfig,
    pub seed: u64,
}

impl Default for SizePowerConfig {
    fn default() -> Self {
        Self {
            n: 500,
            rhos: vec![-0.5, -0.2, 0.0, 0.2, 0.5],
            alphas: vec![0.05, 0.10],
            replications: 1000,
            sigma: 0.15,
            sn: SnConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePowerRow {
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub size: f64,
    /// Null quantile used in place of the critical value for power.
    pub adjusted_critical_value: f64,
    pub power: f64,
}

/// Null trend `3 + 0.05 t` and the alternative whose slope halves at `n/2`.
fn size_power_means(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let half = n / 2;
    let null = (1..=n).map(|t| 3.0 + 0.05 * t as f64).collect();
    let alt = (1..=n)
        .map(|t| {
            let s = t as f64 / nf;
            if t <= half {
                3.0 + 0.06 * nf * s
            } else {
                3.0 + 0.015 * nf + 0.03 * nf * s
            }
        })
        .collect();
    (null, alt)
}

/// Rejection rates of the scan test under the null and the one-break
/// alternative. Both series of a replicate share the same error draw.
pub fn run_size_power(cfg: &SizePowerConfig) -> Result<Vec<SizePowerRow>> {
    cfg.sn.validate()?;
    if cfg.replications == 0 {
        return Err(SncpError::argument("replications must be positive"));
    }
    let mut cvs = Vec::with_capacity(cfg.alphas.len());
    for &a in &cfg.alphas {
        let cv = calibration::reference_critical_value(cfg.sn.epsilon, cfg.sn.delta, 1.0 - a)
            .filter(|_| cfg.sn.order == 1)
            .ok_or_else(|| {
                SncpError::config(format!(
                    "no tabulated critical value for epsilon={}, delta={}, p={}, alpha={a}",
                    cfg.sn.epsilon, cfg.sn.delta, cfg.sn.order
                ))
            })?;
        cvs.push(cv);
    }
    let n = cfg.n;
    let (null_mean, alt_mean) = size_power_means(n);
    let mut rows = Vec::new();
    for (ri, &rho) in cfg.rhos.iter().enumerate() {
        let spec = Ar1Spec::new(rho, cfg.sigma)?;
        let pairs: Vec<(f64, f64)> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let idx = (ri * cfg.replications + r) as u64;
                let mut rng = random::stream_rng(cfg.seed, DOMAIN_SIZE_POWER, idx);
                let u = ar1_from(&mut rng, n, &spec);
                let g = |mean: &[f64]| -> Result<f64> {
                    let y: Vec<f64> = mean.iter().zip(&u).map(|(m, e)| m + e).collect();
                    Ok(SnScanner::from_values(&y, &cfg.sn)?.max_stat(1, n)?.statistic)
                };
                Ok((g(&null_mean)?, g(&alt_mean)?))
            })
            .collect::<Result<_>>()?;
        let mut null: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        calibration::sort(&mut null);
        let reps = cfg.replications as f64;
        for (&alpha, &cv) in cfg.alphas.iter().zip(&cvs) {
            let adjusted = empirical_quantile(&null, 1.0 - alpha);
            let size = pairs.iter().filter(|p| p.0 > cv).count() as f64 / reps;
            let power = pairs.iter().filter(|p| p.1 > adjusted).count() as f64 / reps;
            rows.push(SizePowerRow {
                n,
                rho,
                alpha,
                critical_value: cv,
                size,
                adjusted_critical_value: adjusted,
                power,
            });
        }
    }
    Ok(rows)
}

pub fn write_size_power_csv<W: Write>(rows: &[SizePowerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "rho", "alpha", "critical_value", "size", "adjusted_critical_value", "power"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.rho.to_string(),
            r.alpha.to_string(),
            r.critical_value.to_string(),
            format!("{:.3}", r.size),
            format!("{:.6}", r.adjusted_critical_value),
            format!("{:.3}", r.power),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Settings of the multiple change-point experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiCpConfig {
    pub replications: usize,
    pub rhos: Vec<f64>,
    pub sigma: f64,
    pub detect: DetectConfig,
}

impl Default for MultiCpConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            rhos: vec![-0.5, -0.2, 0.0, 0.2, 0.5],
            sigma: 0.15,
            detect: DetectConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiCpRow {
    pub rho: f64,
    pub ari: f64,
    pub d1: f64,
    pub d2: f64,
    pub dh: f64,
    /// Share of replicates by estimated number of change-points.
    pub m_hat_freq: BTreeMap<usize, f64>,
    pub replications: usize,
}

impl MultiCpRow {
    /// Share of replicates with `|m̂ − m| = off` (`off = None` means `> 1`).
    pub fn share_off(&self, m: usize, off: Option<usize>) -> f64 {
        self.m_hat_freq
            .iter()
            .filter(|(&k, _)| match off {
                Some(o) => k.abs_diff(m) == o,
                None => k.abs_diff(m) > 1,
            })
            .map(|(_, &v)| v)
            .sum()
    }
}

/// Runs the four-segment design through the detection pipeline. Every
/// replicate draws its own interval set and threshold; the thresholds are read
/// from one bank of null interval tables shared by all replicates.
pub fn run_multi_cp(cfg: &MultiCpConfig) -> Result<Vec<MultiCpRow>> {
    let spec = multi_cp_spec();
    let n = spec.n;
    let det = &cfg.detect;
    det.sn.validate()?;
    if cfg.replications == 0 {
        return Err(SncpError::argument("replications must be positive"));
    }
    let h = det.sn.h(n);
    let bank = NullBank::new(n, &det.sn, det.replications, det.seed)?;
    let mut rows = Vec::new();
    for (ri, &rho) in cfg.rhos.iter().enumerate() {
        let ar = Ar1Spec::new(rho, cfg.sigma)?;
        let found: Vec<Vec<usize>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let idx = (ri * cfg.replications + r) as u64;
                let intervals = sample_intervals_on_stream(n, det.intervals, h, det.seed, 1 + idx)?;
                let zeta = bank.threshold(&intervals, det.threshold_level)?;
                let mut rng = random::stream_rng(det.seed, DOMAIN_MULTI_CP, idx);
                let y = gen_piecewise(&spec, &ar1_from(&mut rng, n, &ar))?;
                let table = SnScanner::new(&y, &det.sn)?.interval_table()?;
                let scores: Vec<_> = intervals.intervals.iter().map(|&(s, e)| table.get(s, e)).collect();
                Ok(segmentation::not_recursion(n, h, &intervals, &scores, zeta).tau_hat)
            })
            .collect::<Result<_>>()?;
        rows.push(summarize(rho, &spec.breakpoints, &found, n));
    }
    Ok(rows)
}

fn summarize(rho: f64, truth: &[usize], found: &[Vec<usize>], n: usize) -> MultiCpRow {
    let reps = found.len() as f64;
    let (mut ari, mut d1, mut d2, mut dh) = (0.0, 0.0, 0.0, 0.0);
    let mut freq = BTreeMap::new();
    for est in found {
        ari += adjusted_rand_index(truth, est, n);
        let (a, b, c) = hausdorff(truth, est, n);
        d1 += a as f64;
        d2 += b as f64;
        dh += c as f64;
        *freq.entry(est.len()).or_insert(0.0) += 1.0;
    }
    for v in freq.values_mut() {
        *v /= reps;
    }
    MultiCpRow {
        rho,
        ari: ari / reps,
        d1: d1 / reps,
        d2: d2 / reps,
        dh: dh / reps,
        m_hat_freq: freq,
        replications: found.len(),
    }
}

pub fn write_multi_cp_csv<W: Write>(rows: &[MultiCpRow], true_m: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "ari", "d1", "d2", "dh", "m_hat_exact", "m_hat_off_by_1", "m_hat_off_by_more"])?;
    for r in rows {
        w.write_record([
            r.rho.to_string(),
            format!("{:.3}", r.ari),
            format!("{:.3}", r.d1),
            format!("{:.3}", r.d2),
            format!("{:.3}", r.dh),
            format!("{:.3}", r.share_off(true_m, Some(0))),
            format!("{:.3}", r.share_off(true_m, Some(1))),
            format!("{:.3}", r.share_off(true_m, None)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adjusted Rand index by enumerating every pair of time points.
    fn ari_by_pairs(a: &[usize], b: &[usize], n: usize) -> f64 {
        let label = |cps: &[usize], t: usize| cps.iter().filter(|&&c| c < t).count();
        let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 1..=n {
            for j in (i + 1)..=n {
                let sa = label(a, i) == label(a, j);
                let sb = label(b, i) == label(b, j);
                total += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / total;
        let max = 0.5 * (only_a + only_b);
        (both - expected) / (max - expected)
    }

    #[test]
    fn ar1_validation() {
        assert!(gen_ar1(10, &Ar1Spec { rho: 1.0, sigma: 1.0 }, 0).is_err());
        assert!(gen_ar1(10, &Ar1Spec { rho: 0.2, sigma: 0.0 }, 0).is_err());
        assert_eq!(
            gen_ar1(10, &Ar1Spec { rho: 0.2, sigma: 1.0 }, 3).unwrap(),
            gen_ar1(10, &Ar1Spec { rho: 0.2, sigma: 1.0 }, 3).unwrap()
        );
    }

    #[test]
    fn ar1_moments() {
        let n = 100_000;
        let moments = |rho: f64, sigma: f64| {
            let u = gen_ar1(n, &Ar1Spec { rho, sigma }, 42).unwrap();
            let m = u.iter().sum::<f64>() / n as f64;
            let var = u.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            let c1 = u.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / n as f64;
            (var, c1 / var)
        };
        let (v, _) = moments(0.0, 1.0);
        assert!((v - 1.0).abs() < 0.03, "{v}");
        let (_, r) = moments(0.5, 1.0);
        assert!((r - 0.5).abs() < 0.02, "{r}");
        let (v, _) = moments(-0.5, 0.15);
        assert!((v.sqrt() / 0.15 - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn piecewise_mean() {
        let spec = multi_cp_spec();
        let y = gen_piecewise(&spec, &[0.0; 100]).unwrap();
        assert!((y.value(20) - 3.64).abs() < 1e-12);
        assert!((y.value(21) - (5.8 + 1.8 * 0.21)).abs() < 1e-12);
        for &b in &spec.breakpoints {
            let seg = spec.breakpoints.iter().position(|&x| x == b).unwrap();
            let s = (b + 1) as f64 / 100.0;
            let jump = spec.segments[seg + 1].eval(s) - spec.segments[seg].eval(s);
            let gap = spec.mean(b + 1) - spec.segments[seg].eval(s);
            assert!((gap - jump).abs() < 1e-12);
        }
        assert!(gen_piecewise(&spec, &[0.0; 99]).is_err());
        let same = PolyCoefficients::linear(1.0, 1.0);
        assert!(PiecewiseTrendSpec::new(10, vec![5], vec![same.clone(), same]).is_err());
        assert!(PiecewiseTrendSpec::new(10, vec![10], vec![
            PolyCoefficients::linear(0.0, 1.0),
            PolyCoefficients::linear(1.0, 1.0)
        ])
        .is_err());
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff(&[20, 40, 70], &[20, 40, 70], 100), (0, 0, 0));
        assert_eq!(hausdorff(&[20, 40, 70], &[22, 40, 69], 100), (2, 2, 2));
        assert_eq!(hausdorff(&[20, 40, 70], &[40], 100), (0, 30, 30));
        assert_eq!(hausdorff(&[], &[], 100), (0, 0, 0));
        assert_eq!(hausdorff(&[20], &[], 100), (0, 100, 100));
        assert_eq!(hausdorff(&[], &[20], 100), (100, 0, 100));
    }

    #[test]
    fn ari_matches_pair_counting() {
        assert_eq!(adjusted_rand_index(&[20, 40, 70], &[20, 40, 70], 100), 1.0);
        assert_eq!(adjusted_rand_index(&[], &[], 100), 1.0);
        let cases: [(&[usize], &[usize]); 5] = [
            (&[50], &[]),
            (&[20, 40, 70], &[22, 40, 69]),
            (&[20, 40, 70], &[40]),
            (&[10, 90], &[30, 60]),
            (&[1, 99], &[50]),
        ];
        for (a, b) in cases {
            let direct = ari_by_pairs(a, b, 100);
            let fast = adjusted_rand_index(a, b, 100);
            assert!((direct - fast).abs() < 1e-12, "{a:?} {b:?}: {direct} vs {fast}");
        }
        let shifted = adjusted_rand_index(&[50], &[51], 100);
        assert!((1.0 - shifted) < 0.05 && shifted < 1.0);
        assert!((shifted - ari_by_pairs(&[50], &[51], 100)).abs() < 1e-12);
    }

    #[test]
    fn size_power_smoke() {
        let cfg = SizePowerConfig {
            n: 100,
            rhos: vec![0.0],
            alphas: vec![0.05],
            replications: 40,
            ..SizePowerConfig::default()
        };
        let a = run_size_power(&cfg).unwrap();
        assert_eq!(a, run_size_power(&cfg).unwrap());
        assert_eq!(a.len(), 1);
        assert!(a[0].size <= 0.3 && a[0].power >= 0.5, "{a:?}");
        let mut buf = Vec::new();
        write_size_power_csv(&a, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,rho,alpha"));
        let bad = SizePowerConfig {
            sn: SnConfig::new(0.15, 0.02, 1).unwrap(),
            ..cfg
        };
        assert!(matches!(run_size_power(&bad), Err(SncpError::Config(_))));
    }

    #[test]
    fn multi_cp_smoke() {
        let cfg = MultiCpConfig {
            replications: 20,
            rhos: vec![0.0],
            detect: DetectConfig {
                intervals: 100,
                replications: 100,
                ..DetectConfig::default()
            },
            ..MultiCpConfig::default()
        };
        let rows = run_multi_cp(&cfg).unwrap();
        assert_eq!(rows, run_multi_cp(&cfg).unwrap());
        let total: f64 = rows[0].m_hat_freq.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rows[0].ari > 0.5, "{rows:?}");
        let mut buf = Vec::new();
        write_multi_cp_csv(&rows, 3, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
