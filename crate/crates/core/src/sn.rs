//! Self-normalized contrast statistics for a change in polynomial trend.
//!
//! For a subsample `[t1, t2]` and candidate break `k` the contrast compares the
//! fits on `[t1, k]` and `[k+1, t2]`; the self-normalizer sums outer products of
//! recursive subsample fit differences on each side of `k` (with local trimming
//! `d = ⌊nδ⌋`), and the statistic is the quadratic form `Dᵀ V⁻¹ D`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SncpError};
use crate::linalg::{self, Matrix, Vector, MAX_DIM};
use crate::regression::{TimeSeries, MAX_ORDER};

/// Relative size (against the largest |Y_t|) below which subsample fit
/// differences are rounding noise, e.g. on an exactly polynomial series.
const NORMALIZER_FLOOR: f64 = 1e-9;

/// Trimming and model-order configuration of the SN statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnConfig {
    /// Global trimming fraction; candidate ranges and minimum interval
    /// length are driven by `h = ⌊εn⌋`.
    pub epsilon: f64,
    /// Local trimming fraction `d = ⌊δn⌋` used inside the self-normalizer.
    pub delta: f64,
    /// Polynomial order of the trend.
    pub order: usize,
}

impl Default for SnConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.02,
            order: 1,
        }
    }
}

/// `⌊f·n⌋`, tolerant of representation error in `f` (0.1·1000 is 100).
pub(crate) fn floor_fraction(f: f64, n: usize) -> usize {
    (f * n as f64 + 1e-9).floor().max(0.0) as usize
}

impl SnConfig {
    pub fn new(epsilon: f64, delta: f64, order: usize) -> Result<Self> {
        let cfg = Self {
            epsilon,
            delta,
            order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(SncpError::config(format!(
                "epsilon must lie in (0, 1/2), got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < self.epsilon / 2.0) {
            return Err(SncpError::config(format!(
                "delta must satisfy 0 < delta < epsilon/2, got delta={} epsilon={}",
                self.delta, self.epsilon
            )));
        }
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(SncpError::config(format!(
                "polynomial order must lie in 1..={MAX_ORDER}, got {}",
                self.order
            )));
        }
        Ok(())
    }

    pub fn h(&self, n: usize) -> usize {
        floor_fraction(self.epsilon, n)
    }

    pub fn d(&self, n: usize) -> usize {
        floor_fraction(self.delta, n)
    }
}

/// Full record of the statistic at one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnEvaluation {
    pub k: usize,
    pub contrast: Vec<f64>,
    pub normalizer: Vec<Vec<f64>>,
    pub statistic: f64,
}

/// Maximum of the statistic over the candidate range of an interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMax {
    pub statistic: f64,
    pub k: usize,
}

/// Precomputed state for evaluating SN statistics on one series.
///
/// Immutable after construction and `Sync`, so intervals can be scanned from
/// several workers at once.
#[derive(Clone, Debug)]
pub struct SnScanner {
    cfg: SnConfig,
    n: usize,
    h: usize,
    d: usize,
    /// Normalizers whose entries all fall below this are treated as zero.
    v_floor: f64,
    values: Vec<f64>,
    /// `(t/n)·Y_t`
    sy: Vec<f64>,
    half_inv_n: f64,
    inv_len: Vec<f64>,
    /// Inverse centred abscissa sum of squares of a window, by length.
    inv_sxx: Vec<f64>,
}

/// Moments of a window grown one observation at a time. Summing each window
/// directly keeps full precision on short windows far from the origin.
#[derive(Clone, Copy, Debug)]
struct Running<const D: usize> {
    y: [f64; D],
    s: [f64; 2 * MAX_DIM - 1],
}

impl<const D: usize> Default for Running<D> {
    fn default() -> Self {
        Self {
            y: [0.0; D],
            s: [0.0; 2 * MAX_DIM - 1],
        }
    }
}

impl SnScanner {
    pub fn new(series: &TimeSeries, cfg: &SnConfig) -> Result<Self> {
        Self::from_values(series.values(), cfg)
    }

    pub fn from_values(values: &[f64], cfg: &SnConfig) -> Result<Self> {
        cfg.validate()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SncpError::argument("series contains non-finite values"));
        }
        let n = values.len();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nf = n as f64;
        Ok(Self {
            cfg: *cfg,
            n,
            h: cfg.h(n),
            d: cfg.d(n),
            v_floor: (NORMALIZER_FLOOR * scale).powi(2),
            values: values.to_vec(),
            sy: values
                .iter()
                .enumerate()
                .map(|(i, y)| (i + 1) as f64 / nf * y)
                .collect(),
            half_inv_n: 0.5 / nf,
            inv_len: (0..=n).map(|l| 1.0 / l as f64).collect(),
            inv_sxx: (0..=n)
                .map(|l| {
                    let l = l as f64;
                    12.0 * nf * nf / (l * (l * l - 1.0))
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn config(&self) -> &SnConfig {
        &self.cfg
    }

    fn dim(&self) -> usize {
        self.cfg.order + 1
    }

    // Every subsample fit needs p+2 points, so with d = 0 the boundary
    // terms are dropped as if d were 1.
    fn trim(&self) -> usize {
        self.d.max(1)
    }

    fn left_range(&self, t1: usize, k: usize) -> (usize, usize) {
        let p = self.cfg.order;
        let lo = t1 + p + self.trim();
        let hi = k as isize - p as isize - 1 - self.trim() as isize;
        (lo, hi.max(0) as usize)
    }

    fn right_range(&self, k: usize, t2: usize) -> (usize, usize) {
        let p = self.cfg.order;
        let lo = k + 2 + p + self.trim();
        let hi = t2 as isize - p as isize - self.trim() as isize;
        (lo, hi.max(0) as usize)
    }

    fn check_triplet(&self, t1: usize, k: usize, t2: usize) -> Result<()> {
        let need = self.cfg.order + 2;
        if t1 == 0 || t2 > self.n || t1 >= k || k >= t2 {
            return Err(SncpError::argument(format!(
                "need 1 <= t1 < k < t2 <= {}, got ({t1}, {k}, {t2})",
                self.n
            )));
        }
        if k + 1 < t1 + need {
            return Err(SncpError::DegenerateWindow {
                start: t1,
                end: k,
                order: self.cfg.order,
            });
        }
        if t2 < k + need {
            return Err(SncpError::DegenerateWindow {
                start: k + 1,
                end: t2,
                order: self.cfg.order,
            });
        }
        Ok(())
    }

    /// Contrast vector `D(t1, k, t2)`.
    pub fn contrast(&self, t1: usize, k: usize, t2: usize) -> Result<Vec<f64>> {
        let (d, _) = self.point(t1, k, t2)?;
        Ok(d[..self.dim()].to_vec())
    }

    /// Self-normalizer `V = L + R` at `(t1, k, t2)`.
    pub fn self_normalizer(&self, t1: usize, k: usize, t2: usize) -> Result<Vec<Vec<f64>>> {
        let (_, v) = self.point(t1, k, t2)?;
        let dim = self.dim();
        Ok((0..dim).map(|a| v[a][..dim].to_vec()).collect())
    }

    fn point(&self, t1: usize, k: usize, t2: usize) -> Result<(Vector, Matrix)> {
        match self.dim() {
            2 => self.point_with::<2>(t1, k, t2),
            3 => self.point_with::<3>(t1, k, t2),
            _ => self.point_with::<4>(t1, k, t2),
        }
    }

    fn point_with<const D: usize>(&self, t1: usize, k: usize, t2: usize) -> Result<(Vector, Matrix)> {
        self.check_triplet(t1, k, t2)?;
        let (left, right) = self.anchored::<D>(t1, t2);
        let degenerate = |a, b| SncpError::DegenerateWindow {
            start: a,
            end: b,
            order: self.cfg.order,
        };
        let l = left[k - t1].ok_or_else(|| degenerate(t1, k))?;
        let r = right[k + 1 - t1].ok_or_else(|| degenerate(k + 1, t2))?;
        let w = contrast_weight(t1, k, t2);
        let mut dv: Vector = [0.0; MAX_DIM];
        for a in 0..D {
            dv[a] = w * (l[a] - r[a]);
        }
        let v = self.normalizer_with::<D>(t1, k, t2, |i| left[i - t1], |i| right[i - t1])?;
        Ok((dv, v))
    }

    /// Statistic `T(t1, k, t2) = Dᵀ V⁻¹ D`.
    pub fn sn_stat(&self, t1: usize, k: usize, t2: usize) -> Result<f64> {
        Ok(self.evaluate(t1, k, t2)?.statistic)
    }

    pub fn evaluate(&self, t1: usize, k: usize, t2: usize) -> Result<SnEvaluation> {
        let (dv, vm) = self.point(t1, k, t2)?;
        let dim = self.dim();
        let statistic = self
            .quadratic_form(&vm, &dv, dim)
            .ok_or(SncpError::SingularNormalizer { k })?;
        Ok(SnEvaluation {
            k,
            contrast: dv[..dim].to_vec(),
            normalizer: (0..dim).map(|a| vm[a][..dim].to_vec()).collect(),
            statistic,
        })
    }

    /// Candidate range `{s+h−1, …, e−h}` of the interval `[s, e]`.
    pub fn candidates(&self, s: usize, e: usize) -> Result<std::ops::RangeInclusive<usize>> {
        if self.h == 0 {
            return Err(SncpError::config(format!(
                "h = floor(epsilon*n) is zero for n = {}",
                self.n
            )));
        }
        if s == 0 || e > self.n || s > e {
            return Err(SncpError::argument(format!(
                "interval [{s}, {e}] outside 1..={}",
                self.n
            )));
        }
        if e - s + 1 < 2 * self.h {
            return Err(SncpError::IntervalTooShort {
                start: s,
                end: e,
                min_len: 2 * self.h,
            });
        }
        Ok((s + self.h - 1)..=(e - self.h))
    }

    /// Statistic at every candidate of `[s, e]`; `None` where the candidate is
    /// infeasible or its normalizer singular.
    pub fn profile(&self, s: usize, e: usize) -> Result<Vec<(usize, Option<f64>)>> {
        let range = self.candidates(s, e)?;
        match self.dim() {
            2 => Ok(self.scan::<2>(s, e, range)),
            3 => Ok(self.scan::<3>(s, e, range)),
            _ => Ok(self.scan::<4>(s, e, range)),
        }
    }

    /// Maximum statistic over the candidates of `[s, e]` and its location.
    /// Ties go to the smallest candidate; infeasible or singular candidates
    /// are skipped.
    pub fn max_stat(&self, s: usize, e: usize) -> Result<IntervalMax> {
        let mut best: Option<IntervalMax> = None;
        for (k, t) in self.profile(s, e)? {
            if let Some(t) = t {
                if best.is_none_or(|b| t > b.statistic) {
                    best = Some(IntervalMax { statistic: t, k });
                }
            }
        }
        best.ok_or(SncpError::NoCandidate { start: s, end: e })
    }

    fn scan<const D: usize>(
        &self,
        s: usize,
        e: usize,
        range: std::ops::RangeInclusive<usize>,
    ) -> Vec<(usize, Option<f64>)> {
        let (anchored_left, anchored_right) = self.anchored::<D>(s, e);

        range
            .map(|k| {
                if self.check_triplet(s, k, e).is_err() {
                    return (k, None);
                }
                let (Some(left), Some(right)) = (anchored_left[k - s], anchored_right[k + 1 - s])
                else {
                    return (k, None);
                };
                let v = self.normalizer_with::<D>(
                    s,
                    k,
                    e,
                    |i| anchored_left[i - s],
                    |i| anchored_right[i - s],
                );
                let Ok(v) = v else {
                    return (k, None);
                };
                let w = contrast_weight(s, k, e);
                let mut dv: Vector = [0.0; MAX_DIM];
                for a in 0..D {
                    dv[a] = w * (left[a] - right[a]);
                }
                (k, self.quadratic_form(&v, &dv, D))
            })
            .collect()
    }

    /// `β̂_{s,i}` and `β̂_{i,e}` for every `i` in `[s, e]` (indexed by `i - s`),
    /// `None` where the window has fewer than p+2 points.
    fn anchored<const D: usize>(&self, s: usize, e: usize) -> (Vec<Option<Vector>>, Vec<Option<Vector>>) {
        let need = self.cfg.order + 2;
        let mut left: Vec<Option<Vector>> = vec![None; e + 1 - s];
        let mut acc = Running::<D>::default();
        for i in s..=e {
            self.push(&mut acc, i);
            if i + 1 >= s + need {
                left[i - s] = self.window_fit(&acc, s, i);
            }
        }
        let mut right: Vec<Option<Vector>> = vec![None; e + 1 - s];
        let mut acc = Running::<D>::default();
        for i in (s..=e).rev() {
            self.push(&mut acc, i);
            if e + 1 >= i + need {
                right[i - s] = self.window_fit(&acc, i, e);
            }
        }
        (left, right)
    }

    #[inline(always)]
    fn push<const D: usize>(&self, acc: &mut Running<D>, t: usize) {
        let y = self.values[t - 1];
        if D == 2 {
            acc.y[0] += y;
            acc.y[1] += self.sy[t - 1];
        } else {
            let s = t as f64 / self.n as f64;
            let mut pow = 1.0;
            for m in 0..(2 * D - 1) {
                acc.s[m] += pow;
                if m < D {
                    acc.y[m] += pow * y;
                }
                pow *= s;
            }
        }
    }

    /// Fit on `[i, j]` from the running moments of exactly that window.
    #[inline(always)]
    fn window_fit<const D: usize>(&self, acc: &Running<D>, i: usize, j: usize) -> Option<Vector> {
        if D == 2 {
            let len = j + 1 - i;
            let sbar = (i + j) as f64 * self.half_inv_n;
            let b = (acc.y[1] - sbar * acc.y[0]) * self.inv_sxx[len];
            let a = acc.y[0] * self.inv_len[len] - b * sbar;
            Some([a, b, 0.0, 0.0])
        } else {
            let mut gram: Matrix = [[0.0; MAX_DIM]; MAX_DIM];
            let mut rhs: Vector = [0.0; MAX_DIM];
            for a in 0..D {
                for b in 0..D {
                    gram[a][b] = acc.s[a + b];
                }
                rhs[a] = acc.y[a];
            }
            linalg::solve(&gram, &rhs, D)
        }
    }

    /// `dᵀ V⁻¹ d` through a pivoted solve; `None` when `V` is singular or
    /// numerically zero relative to the data magnitude.
    fn quadratic_form(&self, v: &Matrix, d: &Vector, dim: usize) -> Option<f64> {
        let vmax = v
            .iter()
            .take(dim)
            .flat_map(|r| r.iter().take(dim))
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if vmax <= self.v_floor {
            return None;
        }
        let x = linalg::solve(v, d, dim)?;
        let q = linalg::dot(d, &x, dim);
        q.is_finite().then_some(q.max(0.0))
    }

    /// Sums the left and right normalizer terms; `anchored_left(i)` must give
    /// `β̂_{t1,i}` and `anchored_right(i)` must give `β̂_{i,t2}`.
    #[inline(always)]
    fn normalizer_with<const D: usize>(
        &self,
        t1: usize,
        k: usize,
        t2: usize,
        anchored_left: impl Fn(usize) -> Option<Vector>,
        anchored_right: impl Fn(usize) -> Option<Vector>,
    ) -> Result<Matrix> {
        let (llo, lhi) = self.left_range(t1, k);
        let (rlo, rhi) = self.right_range(k, t2);
        if llo > lhi || rlo > rhi {
            return Err(SncpError::InfeasibleCandidate {
                start: t1,
                k,
                end: t2,
            });
        }
        let degenerate = |a, b| SncpError::DegenerateWindow {
            start: a,
            end: b,
            order: self.cfg.order,
        };

        let mut acc = [[0.0; D]; D];
        let mut window = Running::<D>::default();
        for t in (lhi + 1)..=k {
            self.push(&mut window, t);
        }
        for i in (llo..=lhi).rev() {
            // window holds [i+1, k]
            let a = anchored_left(i).ok_or_else(|| degenerate(t1, i))?;
            let b = self.window_fit(&window, i + 1, k).ok_or_else(|| degenerate(i + 1, k))?;
            let w = ((i + 1 - t1) as f64 * (k - i) as f64).powi(2);
            outer_add::<D>(&mut acc, &a, &b, w);
            self.push(&mut window, i);
        }
        let cl = ((k + 1 - t1) as f64 * (t2 + 1 - t1) as f64).powi(2);

        let mut acc_r = [[0.0; D]; D];
        let mut window = Running::<D>::default();
        for t in (k + 1)..rlo {
            self.push(&mut window, t);
        }
        for i in rlo..=rhi {
            // window holds [k+1, i-1]
            let a = anchored_right(i).ok_or_else(|| degenerate(i, t2))?;
            let b = self.window_fit(&window, k + 1, i - 1).ok_or_else(|| degenerate(k + 1, i - 1))?;
            let w = ((i - 1 - k) as f64 * (t2 + 1 - i) as f64).powi(2);
            outer_add::<D>(&mut acc_r, &a, &b, w);
            self.push(&mut window, i);
        }
        let cr = ((t2 + 1 - t1) as f64 * (t2 - k) as f64).powi(2);

        let mut v: Matrix = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..D {
            for b in a..D {
                let x = acc[a][b] / cl + acc_r[a][b] / cr;
                v[a][b] = x;
                v[b][a] = x;
            }
        }
        Ok(v)
    }
}

/// Scan maxima `G(s, e)` of every interval of length at least `2h`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalTable {
    n: usize,
    h: usize,
    /// Start offset of each `s` in the flat arrays.
    offsets: Vec<usize>,
    statistic: Vec<f64>,
    argmax: Vec<u32>,
}

impl IntervalTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> usize {
        self.h
    }

    fn index(&self, s: usize, e: usize) -> Option<usize> {
        let min_len = 2 * self.h;
        if s == 0 || e > self.n || e + 1 < s + min_len {
            return None;
        }
        Some(self.offsets[s - 1] + (e + 1 - s - min_len))
    }

    /// Maximum over the candidates of `[s, e]`; `None` when the interval is too
    /// short or has no feasible candidate.
    pub fn get(&self, s: usize, e: usize) -> Option<IntervalMax> {
        let i = self.index(s, e)?;
        let statistic = self.statistic[i];
        (statistic > f64::NEG_INFINITY).then(|| IntervalMax {
            statistic,
            k: self.argmax[i] as usize,
        })
    }

    /// Statistic only, `-inf` where [`get`](Self::get) gives `None`.
    pub fn statistic(&self, s: usize, e: usize) -> f64 {
        self.index(s, e).map_or(f64::NEG_INFINITY, |i| self.statistic[i])
    }
}

impl SnScanner {
    /// Tabulates `G(s, e)` for every admissible interval at once.
    ///
    /// The left part of the normalizer depends on `(s, k)` only and the right
    /// part on `(k, e)` only, up to the common factor `(e − s + 1)⁻²`, so both
    /// are accumulated once and combined per triple. Time is O(n³) and memory
    /// O(n²); this pays off for short series scanned over many intervals.
    pub fn interval_table(&self) -> Result<IntervalTable> {
        if self.h == 0 {
            return Err(SncpError::config(format!(
                "h = floor(epsilon*n) is zero for n = {}",
                self.n
            )));
        }
        Ok(match self.dim() {
            2 => self.table_with::<2>(),
            3 => self.table_with::<3>(),
            _ => self.table_with::<4>(),
        })
    }

    fn table_with<const D: usize>(&self) -> IntervalTable {
        let n = self.n;
        let need = self.cfg.order + 2;
        let at = |a: usize, b: usize| (a - 1) * n + (b - 1);

        let mut fits: Vec<Option<Vector>> = vec![None; n * n];
        for a in 1..=n {
            let mut acc = Running::<D>::default();
            for b in a..=n {
                self.push(&mut acc, b);
                if b + 1 >= a + need {
                    fits[at(a, b)] = self.window_fit(&acc, a, b);
                }
            }
        }
        let fit = |a: usize, b: usize| fits[at(a, b)];

        // left[(t1, k)] and right[(k, t2)], without the (t2 - t1 + 1)^-2 factor
        let mut left: Vec<Option<[[f64; D]; D]>> = vec![None; n * n];
        let mut right: Vec<Option<[[f64; D]; D]>> = vec![None; n * n];
        for a in 1..=n {
            for b in (a + 1)..=n {
                let (llo, lhi) = self.left_range(a, b);
                if llo <= lhi {
                    left[at(a, b)] = (|| {
                        let mut acc = [[0.0; D]; D];
                        for i in llo..=lhi {
                            let w = ((i + 1 - a) as f64 * (b - i) as f64).powi(2);
                            outer_add::<D>(&mut acc, &fit(a, i)?, &fit(i + 1, b)?, w);
                        }
                        Some(scale_upper(acc, ((b + 1 - a) as f64).powi(2)))
                    })();
                }
                let (rlo, rhi) = self.right_range(a, b);
                if rlo <= rhi {
                    right[at(a, b)] = (|| {
                        let mut acc = [[0.0; D]; D];
                        for i in rlo..=rhi {
                            let w = ((i - 1 - a) as f64 * (b + 1 - i) as f64).powi(2);
                            outer_add::<D>(&mut acc, &fit(i, b)?, &fit(a + 1, i - 1)?, w);
                        }
                        Some(scale_upper(acc, ((b - a) as f64).powi(2)))
                    })();
                }
            }
        }

        let h = self.h;
        let min_len = 2 * h;
        let mut offsets = Vec::with_capacity(n);
        let mut statistic = Vec::new();
        let mut argmax = Vec::new();
        for s in 1..=n {
            offsets.push(statistic.len());
            if s + min_len > n + 1 {
                continue;
            }
            for e in (s + min_len - 1)..=n {
                let len2 = ((e + 1 - s) as f64).powi(2);
                let mut best = (f64::NEG_INFINITY, 0u32);
                for k in (s + h - 1)..=(e - h) {
                    if self.check_triplet(s, k, e).is_err() {
                        continue;
                    }
                    let (Some(l), Some(r), Some(fl), Some(fr)) =
                        (left[at(s, k)], right[at(k, e)], fit(s, k), fit(k + 1, e))
                    else {
                        continue;
                    };
                    let w = contrast_weight(s, k, e);
                    let mut dv: Vector = [0.0; MAX_DIM];
                    for a in 0..D {
                        dv[a] = w * (fl[a] - fr[a]);
                    }
                    let mut v: Matrix = [[0.0; MAX_DIM]; MAX_DIM];
                    for a in 0..D {
                        for b in a..D {
                            let x = (l[a][b] + r[a][b]) / len2;
                            v[a][b] = x;
                            v[b][a] = x;
                        }
                    }
                    if let Some(t) = self.quadratic_form(&v, &dv, D) {
                        if t > best.0 {
                            best = (t, k as u32);
                        }
                    }
                }
                statistic.push(best.0);
                argmax.push(best.1);
            }
        }
        IntervalTable {
            n,
            h,
            offsets,
            statistic,
            argmax,
        }
    }
}

fn scale_upper<const D: usize>(mut m: [[f64; D]; D], div: f64) -> [[f64; D]; D] {
    for (r, row) in m.iter_mut().enumerate() {
        for x in row.iter_mut().skip(r) {
            *x /= div;
        }
    }
    m
}

#[inline(always)]
fn outer_add<const D: usize>(acc: &mut [[f64; D]; D], a: &Vector, b: &Vector, w: f64) {
    let mut diff = [0.0; D];
    for m in 0..D {
        diff[m] = a[m] - b[m];
    }
    for r in 0..D {
        let wr = w * diff[r];
        for c in r..D {
            acc[r][c] += wr * diff[c];
        }
    }
}

fn contrast_weight(t1: usize, k: usize, t2: usize) -> f64 {
    let len = (t2 + 1 - t1) as f64;
    (k + 1 - t1) as f64 * (t2 - k) as f64 / len.powf(1.5)
}


pub fn contrast(series: &TimeSeries, t1: usize, k: usize, t2: usize, cfg: &SnConfig) -> Result<Vec<f64>> {
    SnScanner::new(series, cfg)?.contrast(t1, k, t2)
}

pub fn self_normalizer(
    series: &TimeSeries,
    t1: usize,
    k: usize,
    t2: usize,
    cfg: &SnConfig,
) -> Result<Vec<Vec<f64>>> {
    SnScanner::new(series, cfg)?.self_normalizer(t1, k, t2)
}

pub fn sn_stat(series: &TimeSeries, t1: usize, k: usize, t2: usize, cfg: &SnConfig) -> Result<f64> {
    SnScanner::new(series, cfg)?.sn_stat(t1, k, t2)
}

/// `G(s, e)` with its maximizing candidate. On `(1, n)` this is the
/// full-sample test statistic and the single change-point estimate.
pub fn max_stat(series: &TimeSeries, s: usize, e: usize, cfg: &SnConfig) -> Result<(f64, usize)> {
    let m = SnScanner::new(series, cfg)?.max_stat(s, e)?;
    Ok((m.statistic, m.k))
}
