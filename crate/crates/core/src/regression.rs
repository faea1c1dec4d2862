//! Polynomial trend design and least-squares fits on subwindows.
//!
//! All abscissae are `t / n` with `n` the length of the full series, also when
//! fitting a subwindow. Indices are 1-based and windows are inclusive.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SncpError};
use crate::linalg::{self, Matrix, Vector, MAX_DIM};

/// Highest polynomial order handled by the fitting kernels.
pub const MAX_ORDER: usize = MAX_DIM - 1;

/// Ordered real observations with optional calendar labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<NaiveDate>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SncpError::argument("time series must not be empty"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SncpError::argument(format!(
                "non-finite value at t={}",
                pos + 1
            )));
        }
        Ok(Self {
            values,
            labels: None,
        })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<NaiveDate>) -> Result<Self> {
        let mut ts = Self::new(values)?;
        if labels.len() != ts.values.len() {
            return Err(SncpError::argument(format!(
                "{} labels for {} values",
                labels.len(),
                ts.values.len()
            )));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SncpError::argument("labels must be strictly increasing"));
        }
        ts.labels = Some(labels);
        Ok(ts)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[NaiveDate]> {
        self.labels.as_deref()
    }

    /// Observation at 1-based index `t`.
    pub fn value(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    /// Label at 1-based index `t`, if labels are present.
    pub fn label(&self, t: usize) -> Option<NaiveDate> {
        self.labels.as_ref().map(|l| l[t - 1])
    }

    /// Applies `f(t, y)` to every observation, keeping labels.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &y)| f(i + 1, y))
            .collect();
        let mut out = Self::new(values)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Series in reverse time order (labels dropped).
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            values,
            labels: None,
        }
    }
}

/// Trend coefficients `(β_0, …, β_p)` in the basis `1, s, …, s^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyCoefficients {
    pub order: usize,
    pub coeffs: Vec<f64>,
}

impl PolyCoefficients {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(SncpError::argument("at least one coefficient required"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SncpError::argument("coefficients must be finite"));
        }
        Ok(Self {
            order: coeffs.len() - 1,
            coeffs,
        })
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        Self {
            order: 1,
            coeffs: vec![intercept, slope],
        }
    }

    /// Evaluates the polynomial at abscissa `s` (Horner).
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// Linear coefficient, zero for a constant-only fit.
    pub fn slope(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }
}

/// Regressor row `(1, s, s², …, s^p)` with `s = t / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignRow(pub Vec<f64>);

pub fn design_row(t: usize, n: usize, order: usize) -> Result<DesignRow> {
    if n == 0 || t == 0 || t > n {
        return Err(SncpError::argument(format!(
            "index t={t} outside 1..={n}"
        )));
    }
    let s = t as f64 / n as f64;
    let mut row = Vec::with_capacity(order + 1);
    let mut pow = 1.0;
    for _ in 0..=order {
        row.push(pow);
        pow *= s;
    }
    Ok(DesignRow(row))
}

fn check_window(n: usize, i: usize, j: usize, order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(SncpError::argument(format!(
            "polynomial order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    if i == 0 || i >= j || j > n {
        return Err(SncpError::argument(format!(
            "window [{i}, {j}] invalid for series of length {n}"
        )));
    }
    if j - i + 1 < order + 2 {
        return Err(SncpError::DegenerateWindow {
            start: i,
            end: j,
            order,
        });
    }
    Ok(())
}

/// Least-squares polynomial fit of order `order` on the window `[i, j]`.
///
/// The normal equations are formed in a centred and rescaled local basis and
/// the solution is mapped back to the global `s = t/n` basis.
pub fn ols_fit(series: &TimeSeries, i: usize, j: usize, order: usize) -> Result<PolyCoefficients> {
    let n = series.len();
    check_window(n, i, j, order)?;
    let nf = n as f64;
    let dim = order + 1;
    let centre = (i + j) as f64 / (2.0 * nf);
    let half = ((j - i) as f64 / (2.0 * nf)).max(f64::MIN_POSITIVE);

    let mut gram: Matrix = [[0.0; MAX_DIM]; MAX_DIM];
    let mut rhs: Vector = [0.0; MAX_DIM];
    for t in i..=j {
        let u = (t as f64 / nf - centre) / half;
        let y = series.value(t);
        let mut row = [0.0; MAX_DIM];
        let mut pow = 1.0;
        for r in row.iter_mut().take(dim) {
            *r = pow;
            pow *= u;
        }
        for a in 0..dim {
            rhs[a] += row[a] * y;
            for b in a..dim {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
    }
    let local = linalg::solve(&gram, &rhs, dim).ok_or(SncpError::DegenerateWindow {
        start: i,
        end: j,
        order,
    })?;

    // Σ γ_m ((s - c)/w)^m expanded in powers of s.
    let mut global = vec![0.0; dim];
    for (m, gamma) in local.iter().take(dim).enumerate() {
        let g = gamma / half.powi(m as i32);
        let mut binom = 1.0;
        for r in 0..=m {
            // C(m, r) s^r (-c)^(m-r)
            global[r] += g * binom * (-centre).powi((m - r) as i32);
            binom = binom * (m - r) as f64 / (r + 1) as f64;
        }
    }
    PolyCoefficients::new(global)
        .map_err(|_| SncpError::DegenerateWindow { start: i, end: j, order })
}

/// Residuals `Y_t − β̂·F(t/n)` over the window `[i, j]`.
pub fn segment_residuals(
    series: &TimeSeries,
    i: usize,
    j: usize,
    fit: &PolyCoefficients,
) -> Result<Vec<f64>> {
    let n = series.len();
    if i == 0 || i > j || j > n {
        return Err(SncpError::argument(format!(
            "window [{i}, {j}] invalid for series of length {n}"
        )));
    }
    if fit.coeffs.len() != fit.order + 1 {
        return Err(SncpError::argument("coefficient vector does not match order"));
    }
    let nf = n as f64;
    Ok((i..=j)
        .map(|t| series.value(t) - fit.eval(t as f64 / nf))
        .collect())
}
