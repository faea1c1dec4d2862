//! Per-segment trend refits, growth-rate summaries and residual
//! autocorrelation diagnostics.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SncpError};
use crate::regression::{ols_fit, segment_residuals, PolyCoefficients, TimeSeries};
use crate::segmentation::ChangePointResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub start: usize,
    pub end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_label: Option<NaiveDate>,
    pub coefficients: PolyCoefficients,
    /// Slope coefficient divided by `n`: the mean one-step increment of an
    /// exactly linear segment.
    pub normalized_slope: f64,
    /// Set when the segment was too short for the requested order and was
    /// fitted as a constant.
    pub constant_only: bool,
}

/// Refits each segment of `cps` by least squares. Segments with fewer than
/// `order + 2` points get a constant fit and are flagged.
pub fn fit_segments(
    series: &TimeSeries,
    cps: &ChangePointResult,
    order: usize,
) -> Result<Vec<SegmentFit>> {
    let n = series.len();
    if let Some(&t) = cps.tau_hat.iter().find(|&&t| t == 0 || t >= n) {
        return Err(SncpError::argument(format!(
            "change-point {t} invalid for series of length {n}"
        )));
    }
    if cps.tau_hat.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SncpError::argument("change-points must be strictly increasing"));
    }
    cps.segments(n)
        .into_iter()
        .map(|(start, end)| {
            let len = end + 1 - start;
            let (coefficients, constant_only) = if len >= order + 2 {
                (ols_fit(series, start, end, order)?, false)
            } else {
                let mean = (start..=end).map(|t| series.value(t)).sum::<f64>() / len as f64;
                (PolyCoefficients::new(vec![mean])?, true)
            };
            Ok(SegmentFit {
                start,
                end,
                start_label: series.label(start),
                normalized_slope: coefficients.slope() / n as f64,
                coefficients,
                constant_only,
            })
        })
        .collect()
}

/// Within-segment residuals concatenated in time order.
pub fn pooled_residuals(series: &TimeSeries, fits: &[SegmentFit]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(series.len());
    for f in fits {
        out.extend(segment_residuals(series, f.start, f.end, &f.coefficients)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountrySummary {
    pub s_max: f64,
    pub s_cur: f64,
    /// `s_cur / s_max`; `None` when `s_max` is zero.
    pub ratio: Option<f64>,
    /// Start of the latest segment minus start of the steepest one.
    pub days_between: i64,
    pub max_segment_start: usize,
    pub current_segment_start: usize,
    /// Lag-one autocorrelation of the pooled residuals; `None` when they are
    /// constant or fewer than two.
    pub rho_hat: Option<f64>,
}

pub fn country_summary(fits: &[SegmentFit], residuals: &[f64]) -> Result<CountrySummary> {
    let last = fits
        .last()
        .ok_or_else(|| SncpError::argument("at least one segment is required"))?;
    let mut steepest = &fits[0];
    for f in &fits[1..] {
        if f.normalized_slope > steepest.normalized_slope {
            steepest = f;
        }
    }
    let s_max = steepest.normalized_slope;
    let s_cur = last.normalized_slope;
    let rho_hat = if residuals.len() >= 2 {
        acf(residuals, 1).ok().map(|r| r[0])
    } else {
        None
    };
    Ok(CountrySummary {
        s_max,
        s_cur,
        ratio: (s_max != 0.0).then(|| s_cur / s_max),
        days_between: last.start as i64 - steepest.start as i64,
        max_segment_start: steepest.start,
        current_segment_start: last.start,
        rho_hat,
    })
}

/// Sample autocorrelations at lags `1..=max_lag` (mean-centred, denominator
/// `n` at every lag).
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(SncpError::argument(format!(
            "need more than {max_lag} observations, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(SncpError::argument("autocorrelation of a constant sequence"));
    }
    Ok((1..=max_lag)
        .map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

/// Autocorrelations and partial autocorrelations at lags `1..=max_lag`, the
/// latter by the Durbin–Levinson recursion.
pub fn acf_pacf(x: &[f64], max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = acf(x, max_lag)?;
    let mut pacf = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let (num, den) = phi.iter().enumerate().fold((r[k - 1], 1.0), |(num, den), (j, p)| {
            (num - p * r[k - 2 - j], den - p * r[j])
        });
        let kk = num / den;
        let prev = phi.clone();
        for j in 0..phi.len() {
            phi[j] = prev[j] - kk * prev[k - 2 - j];
        }
        phi.push(kk);
        pacf.push(kk);
    }
    Ok((r, pacf))
}
