//! Random intervals and narrowest-over-threshold multiple change-point search.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, ThresholdRequest};
use crate::error::{Result, SncpError};
use crate::random::{self, DOMAIN_INTERVALS};
use crate::regression::TimeSeries;
use crate::sn::{IntervalMax, SnConfig, SnScanner};

/// Random sub-intervals `(s, e)` of `1..=n`, each of length at least `2h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomIntervalSet {
    pub n: usize,
    pub h: usize,
    pub intervals: Vec<(usize, usize)>,
}

impl RandomIntervalSet {
    pub fn m(&self) -> usize {
        self.intervals.len()
    }
}

/// Draws `m` intervals uniformly from the feasible pairs
/// `{(s, e) : 1 ≤ s < e ≤ n, e − s + 1 ≥ 2h}` by rejection.
pub fn sample_intervals(n: usize, m: usize, h: usize, seed: u64) -> Result<RandomIntervalSet> {
    sample_intervals_on_stream(n, m, h, seed, 0)
}

/// As [`sample_intervals`], drawing from substream `stream` of `seed`.
pub fn sample_intervals_on_stream(
    n: usize,
    m: usize,
    h: usize,
    seed: u64,
    stream: u64,
) -> Result<RandomIntervalSet> {
    if m == 0 {
        return Err(SncpError::config("interval count M must be positive"));
    }
    if n < 2 || n < 2 * h {
        return Err(SncpError::config(format!(
            "n={n} too short for intervals of length 2h={}",
            2 * h
        )));
    }
    let mut rng = random::stream_rng(seed, DOMAIN_INTERVALS, stream);
    let max_attempts = 1000 * m;
    let mut intervals = Vec::with_capacity(m);
    let mut attempts = 0;
    while intervals.len() < m {
        if attempts == max_attempts {
            return Err(SncpError::config(format!(
                "rejection sampling exhausted {max_attempts} attempts (n={n}, h={h})"
            )));
        }
        attempts += 1;
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        let (s, e) = (a.min(b), a.max(b));
        if s < e && e - s + 1 >= 2 * h {
            intervals.push((s, e));
        }
    }
    Ok(RandomIntervalSet { n, h, intervals })
}

/// One accepted change-point and the evidence behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tau: usize,
    /// Narrowest interval over the threshold.
    pub interval: (usize, usize),
    pub statistic: f64,
    pub threshold: f64,
    /// Working interval of the recursion step that found `tau`.
    pub search_window: (usize, usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangePointResult {
    pub tau_hat: Vec<usize>,
    pub m_hat: usize,
    pub detections: Vec<Detection>,
}

impl ChangePointResult {
    /// Builds a result from bare change-point locations.
    pub fn from_locations(n: usize, mut tau: Vec<usize>) -> Result<Self> {
        tau.sort_unstable();
        tau.dedup();
        if let Some(&t) = tau.iter().find(|&&t| t == 0 || t >= n) {
            return Err(SncpError::argument(format!(
                "change-point {t} outside 1..{n}"
            )));
        }
        Ok(Self {
            m_hat: tau.len(),
            tau_hat: tau,
            detections: Vec::new(),
        })
    }

    /// Segments `[start, end]` induced on `1..=n`; each change-point closes a
    /// segment.
    pub fn segments(&self, n: usize) -> Vec<(usize, usize)> {
        segments_from(&self.tau_hat, n)
    }
}

pub(crate) fn segments_from(tau: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(tau.len() + 1);
    let mut start = 1;
    for &t in tau {
        out.push((start, t));
        start = t + 1;
    }
    out.push((start, n));
    out
}

/// Scan maximum of every interval; `None` where no candidate is feasible.
pub fn score_intervals(
    scanner: &SnScanner,
    intervals: &RandomIntervalSet,
) -> Result<Vec<Option<IntervalMax>>> {
    intervals
        .intervals
        .par_iter()
        .map(|&(s, e)| match scanner.max_stat(s, e) {
            Ok(m) => Ok(Some(m)),
            Err(SncpError::NoCandidate { .. }) => Ok(None),
            Err(err) => Err(err),
        })
        .collect()
}

/// Narrowest-over-threshold recursion given the interval scores.
pub fn not_recursion(
    n: usize,
    h: usize,
    intervals: &RandomIntervalSet,
    scores: &[Option<IntervalMax>],
    zeta: f64,
) -> ChangePointResult {
    let mut detections = Vec::new();
    let mut stack = vec![(1, n)];
    while let Some((s, e)) = stack.pop() {
        if e < s || e - s + 1 < 2 * h {
            continue;
        }
        let mut pick: Option<(usize, usize, usize, IntervalMax)> = None;
        for (i, (&(si, ei), score)) in intervals.intervals.iter().zip(scores).enumerate() {
            let Some(score) = score else { continue };
            if si < s || ei > e || ei - si + 1 < 2 * h || !(score.statistic > zeta) {
                continue;
            }
            let key = (ei - si + 1, si, i);
            if pick.is_none_or(|(l, ps, pi, _)| key < (l, ps, pi)) {
                pick = Some((key.0, key.1, key.2, *score));
            }
        }
        let Some((_, _, i, score)) = pick else { continue };
        let tau = score.k;
        detections.push(Detection {
            tau,
            interval: intervals.intervals[i],
            statistic: score.statistic,
            threshold: zeta,
            search_window: (s, e),
        });
        stack.push((tau + 1, e));
        stack.push((s, tau));
    }
    detections.sort_by_key(|d| d.tau);
    ChangePointResult {
        tau_hat: detections.iter().map(|d| d.tau).collect(),
        m_hat: detections.len(),
        detections,
    }
}

/// Narrowest-over-threshold detection with a given threshold `zeta`.
pub fn sn_not(
    series: &TimeSeries,
    cfg: &SnConfig,
    intervals: &RandomIntervalSet,
    zeta: f64,
) -> Result<ChangePointResult> {
    if !(zeta > 0.0) {
        return Err(SncpError::argument(format!("threshold must be positive, got {zeta}")));
    }
    let n = series.len();
    let h = cfg.h(n);
    if intervals.n != n || intervals.h != h {
        return Err(SncpError::config(format!(
            "interval set (n={}, h={}) does not match series (n={n}, h={h})",
            intervals.n, intervals.h
        )));
    }
    let scanner = SnScanner::new(series, cfg)?;
    let scores = score_intervals(&scanner, intervals)?;
    Ok(not_recursion(n, h, intervals, &scores, zeta))
}

/// Settings of the full detection pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub sn: SnConfig,
    /// Number of random intervals `M`.
    pub intervals: usize,
    /// Null replicates `B` for the threshold.
    pub replications: usize,
    pub threshold_level: f64,
    pub seed: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            sn: SnConfig::default(),
            intervals: 300,
            replications: 1000,
            threshold_level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub n: usize,
    pub tau_hat: Vec<usize>,
    pub m_hat: usize,
    pub zeta: f64,
    pub detections: Vec<Detection>,
    pub segments: Vec<(usize, usize)>,
}

impl DetectionReport {
    pub fn result(&self) -> ChangePointResult {
        ChangePointResult {
            tau_hat: self.tau_hat.clone(),
            m_hat: self.m_hat,
            detections: self.detections.clone(),
        }
    }
}

/// Draws the interval set, calibrates the threshold on it and runs the search.
pub fn detect(series: &TimeSeries, cfg: &DetectConfig) -> Result<DetectionReport> {
    cfg.sn.validate()?;
    let n = series.len();
    let h = cfg.sn.h(n);
    if h == 0 {
        return Err(SncpError::config(format!(
            "series of length {n} too short for epsilon={}",
            cfg.sn.epsilon
        )));
    }
    let intervals = sample_intervals(n, cfg.intervals, h, cfg.seed)?;
    let req = ThresholdRequest {
        n,
        intervals: intervals.clone(),
        replications: cfg.replications,
        level: cfg.threshold_level,
    };
    let zeta = calibration::not_threshold(&req, &cfg.sn, cfg.seed)?;
    let found = sn_not(series, &cfg.sn, &intervals, zeta)?;
    Ok(DetectionReport {
        n,
        segments: found.segments(n),
        tau_hat: found.tau_hat,
        m_hat: found.m_hat,
        zeta,
        detections: found.detections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn broken_line(n: usize, tau: usize, noise_seed: u64) -> TimeSeries {
        let mut state = noise_seed;
        let v = (1..=n)
            .map(|t| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                let s = t as f64 / n as f64;
                let trend = if t <= tau { 2.0 * s } else { 2.0 * tau as f64 / n as f64 - 3.0 * (s - tau as f64 / n as f64) };
                trend + 0.05 * u
            })
            .collect();
        TimeSeries::new(v).unwrap()
    }

    #[test]
    fn exact_length_gives_full_interval() {
        let set = sample_intervals(20, 15, 10, 4).unwrap();
        assert!(set.intervals.iter().all(|&iv| iv == (1, 20)));
        assert!(sample_intervals(19, 1, 10, 4).is_err());
        assert!(sample_intervals(50, 0, 5, 4).is_err());
    }

    #[test]
    fn intervals_respect_constraints() {
        for seed in 0..10 {
            let set = sample_intervals(100, 300, 10, seed).unwrap();
            assert_eq!(set.m(), 300);
            for &(s, e) in &set.intervals {
                assert!(1 <= s && s < e && e <= 100 && e - s + 1 >= 20);
            }
        }
        assert_eq!(sample_intervals(100, 50, 10, 3), sample_intervals(100, 50, 10, 3));
    }

    #[test]
    fn segments_cover_range() {
        let r = ChangePointResult::from_locations(100, vec![70, 20, 40]).unwrap();
        assert_eq!(r.segments(100), vec![(1, 20), (21, 40), (41, 70), (71, 100)]);
        assert_eq!(ChangePointResult::default().segments(5), vec![(1, 5)]);
        assert!(ChangePointResult::from_locations(100, vec![100]).is_err());
    }

    #[test]
    fn narrowest_interval_wins() {
        let set = RandomIntervalSet {
            n: 100,
            h: 10,
            intervals: vec![(1, 60), (21, 60), (11, 50)],
        };
        let scores = vec![
            Some(IntervalMax { statistic: 90.0, k: 30 }),
            Some(IntervalMax { statistic: 50.0, k: 41 }),
            Some(IntervalMax { statistic: 60.0, k: 35 }),
        ];
        let r = not_recursion(100, 10, &set, &scores, 40.0);
        // lengths 60, 40, 40: the tie goes to the smaller start
        assert_eq!(r.detections[0].interval, (11, 50));
        assert_eq!(r.tau_hat, vec![35]);
        let r = not_recursion(100, 10, &set, &scores, 55.0);
        assert_eq!(r.tau_hat, vec![35]);
        let r = not_recursion(100, 10, &set, &scores, 70.0);
        assert_eq!(r.tau_hat, vec![30]);
        assert_eq!(not_recursion(100, 10, &set, &scores, 95.0).m_hat, 0);
    }

    #[test]
    fn recursion_splits_at_detected_point() {
        let set = RandomIntervalSet {
            n: 100,
            h: 10,
            intervals: vec![(1, 100), (1, 45), (51, 100)],
        };
        let scores = vec![
            Some(IntervalMax { statistic: 90.0, k: 50 }),
            Some(IntervalMax { statistic: 80.0, k: 20 }),
            Some(IntervalMax { statistic: 70.0, k: 75 }),
        ];
        let r = not_recursion(100, 10, &set, &scores, 10.0);
        // (1, 45) is narrowest, so the split at 20 comes first and (1, 100)
        // never fits inside a later working interval
        assert_eq!(r.tau_hat, vec![20, 75]);
        assert_eq!(r.detections[0].search_window, (1, 100));
        assert_eq!(r.detections[1].search_window, (21, 100));
    }

    #[test]
    fn finds_single_break_and_respects_threshold_order() {
        let cfg = DetectConfig {
            intervals: 100,
            replications: 200,
            seed: 2,
            ..DetectConfig::default()
        };
        let y = broken_line(100, 50, 7);
        let rep = detect(&y, &cfg).unwrap();
        assert_eq!(rep.m_hat, 1, "{rep:?}");
        assert!((48..=52).contains(&rep.tau_hat[0]), "{:?}", rep.tau_hat);
        assert_eq!(rep.segments, vec![(1, rep.tau_hat[0]), (rep.tau_hat[0] + 1, 100)]);

        let set = sample_intervals(100, 100, cfg.sn.h(100), 2).unwrap();
        let mut last = usize::MAX;
        for zeta in [1.0, 10.0, 40.0, 100.0, 1e3, 1e5, 1e8] {
            let m = sn_not(&y, &cfg.sn, &set, zeta).unwrap().m_hat;
            assert!(m <= last);
            last = m;
        }
        assert!(sn_not(&y, &cfg.sn, &set, 0.0).is_err());
        let wrong = sample_intervals(100, 10, 5, 2).unwrap();
        assert!(sn_not(&y, &cfg.sn, &wrong, 40.0).is_err());
    }
}
