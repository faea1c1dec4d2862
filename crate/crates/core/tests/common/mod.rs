//! Straightforward reference implementations shared by the integration tests.
#![allow(dead_code)]

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c] == 0.0 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..m {
            let f = a[r][c] / a[c][c];
            for k in c..m {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Least squares of `y[i..=j]` (1-based) on `(1, t/n, …, (t/n)^p)` via the
/// normal equations; `None` below `p + 2` points.
pub fn ols(y: &[f64], i: usize, j: usize, p: usize) -> Option<Vec<f64>> {
    if j < i || j + 1 - i < p + 2 {
        return None;
    }
    let n = y.len() as f64;
    let mut g = vec![vec![0.0; p + 1]; p + 1];
    let mut r = vec![0.0; p + 1];
    for t in i..=j {
        let x = t as f64 / n;
        let row: Vec<f64> = (0..=p).map(|a| x.powi(a as i32)).collect();
        for a in 0..=p {
            r[a] += row[a] * y[t - 1];
            for b in 0..=p {
                g[a][b] += row[a] * row[b];
            }
        }
    }
    gauss(g, r)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub struct Oracle {
    pub contrast: Vec<f64>,
    pub normalizer: Vec<Vec<f64>>,
    /// `None` when the normalizer is singular.
    pub statistic: Option<f64>,
}

/// Contrast, self-normalizer and statistic at `(t1, k, t2)` with local trim
/// `trim`, by direct summation. `None` when a window or a sum is empty.
pub fn oracle(y: &[f64], t1: usize, k: usize, t2: usize, p: usize, trim: usize) -> Option<Oracle> {
    let dim = p + 1;
    let whole = (t2 - t1 + 1) as f64;
    let left = ols(y, t1, k, p)?;
    let right = ols(y, k + 1, t2, p)?;
    let w = (k - t1 + 1) as f64 * (t2 - k) as f64 / whole.powf(1.5);
    let contrast: Vec<f64> = diff(&left, &right).iter().map(|v| w * v).collect();

    let mut v = vec![vec![0.0; dim]; dim];
    let mut terms = 0;
    let add = |v: &mut Vec<Vec<f64>>, weight: f64, d: &[f64]| {
        for a in 0..dim {
            for b in 0..dim {
                v[a][b] += weight * d[a] * d[b];
            }
        }
    };
    // left sum: i from t1+p+trim to k-p-1-trim
    let lo = t1 + p + trim;
    if k >= p + 1 + trim {
        let hi = k - p - 1 - trim;
        for i in lo..=hi {
            let wt = ((i - t1 + 1) as f64).powi(2) * ((k - i) as f64).powi(2)
                / (((k - t1 + 1) as f64).powi(2) * whole.powi(2));
            let d = diff(&ols(y, t1, i, p)?, &ols(y, i + 1, k, p)?);
            add(&mut v, wt, &d);
            terms += 1;
        }
    }
    if terms == 0 {
        return None;
    }
    // right sum: i from k+2+p+trim to t2-p-trim
    let mut rterms = 0;
    let lo = k + 2 + p + trim;
    if t2 >= p + trim {
        let hi = t2 - p - trim;
        for i in lo..=hi {
            let wt = ((i - 1 - k) as f64).powi(2) * ((t2 - i + 1) as f64).powi(2)
                / (whole.powi(2) * ((t2 - k) as f64).powi(2));
            let d = diff(&ols(y, i, t2, p)?, &ols(y, k + 1, i - 1, p)?);
            add(&mut v, wt, &d);
            rterms += 1;
        }
    }
    if rterms == 0 {
        return None;
    }
    let statistic = gauss(v.clone(), contrast.clone())
        .map(|x| x.iter().zip(&contrast).map(|(a, b)| a * b).sum());
    Some(Oracle {
        contrast,
        normalizer: v,
        statistic,
    })
}

/// Largest absolute entry.
pub fn max_abs<'a>(x: impl IntoIterator<Item = &'a f64>) -> f64 {
    x.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Small deterministic generator so oracle inputs do not depend on the crate.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
