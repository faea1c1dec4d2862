//! Extrapolation of the latest trend segment: linear, quadratic or logistic
//! curves in `s = t/n`, evaluated `k` steps past the end of the series and
//! mapped back to counts.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SncpError};
use crate::linalg::{self, Matrix, Vector, MAX_DIM};
use crate::regression::{ols_fit, TimeSeries};
use crate::segmentation::{detect, DetectConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Quadratic,
    Logistic,
}

impl Family {
    fn min_points(self) -> usize {
        match self {
            Family::Linear => 3,
            Family::Quadratic => 4,
            Family::Logistic => 5,
        }
    }
}

/// A fitted curve. Parameters are `(a, b)`, `(c, d, e)` or `(L, α, t₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolantFit {
    pub family: Family,
    pub parameters: Vec<f64>,
    pub fit_window: (usize, usize),
    pub n: usize,
    pub converged: bool,
    pub sse: f64,
}

impl ExtrapolantFit {
    pub fn eval(&self, s: f64) -> f64 {
        let p = &self.parameters;
        match self.family {
            Family::Linear => p[0] + p[1] * s,
            Family::Quadratic => p[0] + p[1] * s + p[2] * s * s,
            Family::Logistic => logistic(p[0], p[1], p[2], s),
        }
    }
}

fn logistic(l: f64, alpha: f64, t0: f64, s: f64) -> f64 {
    l / (1.0 + (-alpha * (s - t0)).exp())
}

/// Gradient of the logistic curve with respect to `(L, α, t₀)` at `s`.
pub fn logistic_gradient(params: [f64; 3], s: f64) -> [f64; 3] {
    let [l, alpha, t0] = params;
    let sig = 1.0 / (1.0 + (-alpha * (s - t0)).exp());
    let core = l * sig * (1.0 - sig);
    [sig, core * (s - t0), -core * alpha]
}

/// Outcome of a logistic least-squares fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticFit {
    pub params: [f64; 3],
    pub sse: f64,
    pub converged: bool,
}

const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-10;
const RESTARTS: usize = 5;

fn sse(params: [f64; 3], s: &[f64], y: &[f64]) -> f64 {
    s.iter()
        .zip(y)
        .map(|(&si, &yi)| (yi - logistic(params[0], params[1], params[2], si)).powi(2))
        .sum()
}

/// Starting values: `L` just above the largest observation, `α` and `t₀`
/// from a straight-line fit of `logit(y / L)` against `s`.
fn initial_guess(s: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax > 0.0) {
        return None;
    }
    let l0 = 1.05 * ymax;
    let pts: Vec<(f64, f64)> = s
        .iter()
        .zip(y)
        .filter(|(_, &yi)| yi > 0.0)
        .map(|(&si, &yi)| (si, (yi / (l0 - yi)).ln()))
        .collect();
    let m = pts.len() as f64;
    let (mut alpha, mut t0) = (f64::NAN, f64::NAN);
    if pts.len() >= 2 {
        let sbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let zbar = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - sbar).powi(2)).sum();
        let sxz: f64 = pts.iter().map(|p| (p.0 - sbar) * (p.1 - zbar)).sum();
        alpha = sxz / sxx;
        t0 = sbar - zbar / alpha;
    }
    if !(alpha > 0.0 && alpha.is_finite() && t0.is_finite()) {
        let (lo, hi) = (s[0], s[s.len() - 1]);
        alpha = 4.0 / (hi - lo).max(1e-3);
        t0 = 0.5 * (lo + hi);
    }
    Some([l0, alpha, t0])
}

/// Damped Gauss–Newton (Levenberg–Marquardt) from one starting point.
fn levenberg_marquardt(start: [f64; 3], s: &[f64], y: &[f64]) -> LogisticFit {
    let mut theta = start;
    let mut cur = sse(theta, s, y);
    let mut lambda = 1e-3;
    if !cur.is_finite() {
        return LogisticFit {
            params: theta,
            sse: cur,
            converged: false,
        };
    }
    for _ in 0..MAX_ITER {
        if cur == 0.0 {
            return LogisticFit {
                params: theta,
                sse: cur,
                converged: true,
            };
        }
        let mut jtj: Matrix = [[0.0; MAX_DIM]; MAX_DIM];
        let mut jtr: Vector = [0.0; MAX_DIM];
        for (&si, &yi) in s.iter().zip(y) {
            let g = logistic_gradient(theta, si);
            let r = yi - logistic(theta[0], theta[1], theta[2], si);
            for a in 0..3 {
                jtr[a] += g[a] * r;
                for b in 0..3 {
                    jtj[a][b] += g[a] * g[b];
                }
            }
        }
        loop {
            let mut damped = jtj;
            for a in 0..3 {
                damped[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            let step = linalg::solve(&damped, &jtr, 3);
            let trial = step.map(|d| [theta[0] + d[0], theta[1] + d[1], theta[2] + d[2]]);
            let trial_sse = trial.filter(|t| t[0] > 0.0).map(|t| sse(t, s, y));
            match (trial, trial_sse) {
                (Some(t), Some(e)) if e.is_finite() && e < cur => {
                    let rel = (cur - e) / cur;
                    theta = t;
                    cur = e;
                    lambda = (lambda / 10.0).max(1e-15);
                    if rel < REL_TOL {
                        return LogisticFit {
                            params: theta,
                            sse: cur,
                            converged: true,
                        };
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e12 {
                        // no damped step improves: a stationary point
                        return LogisticFit {
                            params: theta,
                            sse: cur,
                            converged: true,
                        };
                    }
                }
            }
        }
    }
    LogisticFit {
        params: theta,
        sse: cur,
        converged: false,
    }
}

/// Least-squares logistic fit with a few deterministic restarts around the
/// initial guess. Returns the best fit found, converged or not.
pub fn fit_logistic(s: &[f64], y: &[f64]) -> Result<LogisticFit> {
    if s.len() != y.len() || s.len() < Family::Logistic.min_points() {
        return Err(SncpError::argument(
            "logistic fit needs at least 5 matching abscissae and responses",
        ));
    }
    let Some(start) = initial_guess(s, y) else {
        return Ok(LogisticFit {
            params: [f64::NAN; 3],
            sse: f64::INFINITY,
            converged: false,
        });
    };
    let mut best = levenberg_marquardt(start, s, y);
    const JITTER: [(f64, f64, f64); RESTARTS] = [
        (1.2, 1.0, 0.0),
        (1.0, 0.5, 0.05),
        (1.5, 2.0, -0.05),
        (2.0, 0.25, 0.1),
        (1.1, 4.0, -0.1),
    ];
    for (fl, fa, dt) in JITTER {
        if best.converged {
            break;
        }
        let trial = levenberg_marquardt([start[0] * fl, start[1] * fa, start[2] + dt], s, y);
        if (trial.converged && !best.converged) || trial.sse < best.sse {
            best = trial;
        }
    }
    Ok(best)
}

/// Fits `family` to the window `[start, n]` of the series.
pub fn fit_extrapolant(series: &TimeSeries, start: usize, family: Family) -> Result<ExtrapolantFit> {
    let n = series.len();
    if start == 0 || start > n {
        return Err(SncpError::argument(format!("segment start {start} outside 1..={n}")));
    }
    if n + 1 - start < family.min_points() {
        return Err(SncpError::DegenerateWindow {
            start,
            end: n,
            order: match family {
                Family::Linear => 1,
                _ => 2,
            },
        });
    }
    let nf = n as f64;
    let s: Vec<f64> = (start..=n).map(|t| t as f64 / nf).collect();
    let y: Vec<f64> = (start..=n).map(|t| series.value(t)).collect();
    let (parameters, converged) = match family {
        Family::Linear => (ols_fit(series, start, n, 1)?.coeffs, true),
        Family::Quadratic => (ols_fit(series, start, n, 2)?.coeffs, true),
        Family::Logistic => {
            let fit = fit_logistic(&s, &y)?;
            (fit.params.to_vec(), fit.converged)
        }
    };
    let mut out = ExtrapolantFit {
        family,
        parameters,
        fit_window: (start, n),
        n,
        converged,
        sse: 0.0,
    };
    out.sse = s.iter().zip(&y).map(|(&si, &yi)| (yi - out.eval(si)).powi(2)).sum();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub family: Family,
    pub k: usize,
    /// Prediction on the log scale.
    pub y_hat: f64,
    pub count_hat: f64,
    /// `count_hat` rounded half-up.
    pub count_rounded: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    /// Set when a logistic fit failed and a quadratic was used instead.
    pub fallback: bool,
    pub fit: ExtrapolantFit,
    pub change_points: Vec<usize>,
}

impl ForecastResult {
    /// Attaches the signed relative error `(forecast − truth) / truth` of the
    /// rounded count.
    pub fn with_truth(mut self, truth: f64) -> Result<Self> {
        if !(truth > 0.0) {
            return Err(SncpError::argument(format!("truth must be positive, got {truth}")));
        }
        self.relative_error = Some((self.count_rounded as f64 - truth) / truth);
        Ok(self)
    }
}

/// Evaluates the fit at `s = 1 + k/n`.
pub fn forecast_k(fit: &ExtrapolantFit, n: usize, k: usize) -> Result<ForecastResult> {
    if k == 0 {
        return Err(SncpError::argument("forecast horizon must be at least 1"));
    }
    let y_hat = fit.eval(1.0 + k as f64 / n as f64);
    let count_hat = y_hat.exp();
    Ok(ForecastResult {
        family: fit.family,
        k,
        y_hat,
        count_hat,
        count_rounded: (count_hat + 0.5).floor() as u64,
        relative_error: None,
        fallback: false,
        fit: fit.clone(),
        change_points: Vec::new(),
    })
}

/// Detects change-points, fits `family` on the last segment and forecasts
/// `k` steps ahead. With `baseline`, detection is skipped and the whole
/// series is used. A non-converged logistic fit falls back to a quadratic.
pub fn forecast_pipeline(
    series: &TimeSeries,
    cfg: &DetectConfig,
    family: Family,
    k: usize,
    baseline: bool,
) -> Result<ForecastResult> {
    let n = series.len();
    let change_points = if baseline {
        Vec::new()
    } else {
        detect(series, cfg)?.tau_hat
    };
    let start = change_points.last().map_or(1, |t| t + 1);
    let mut fit = fit_extrapolant(series, start, family)?;
    let mut fallback = false;
    if family == Family::Logistic && !fit.converged {
        fit = fit_extrapolant(series, start, Family::Quadratic)?;
        fallback = true;
    }
    let mut out = forecast_k(&fit, n, k)?;
    out.fallback = fallback;
    out.change_points = change_points;
    Ok(out)
}
