//! Tiny dense linear algebra for (p+1)×(p+1) normal equations.

/// Largest supported system dimension (polynomial order 3).
pub const MAX_DIM: usize = 4;

pub type Vector = [f64; MAX_DIM];
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

/// Relative pivot floor below which a system is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Solves `a x = b` on the leading `dim`×`dim` block by Gaussian elimination
/// with partial pivoting. Returns `None` when a pivot falls below
/// `PIVOT_TOL` times the largest entry of `a`.
pub fn solve(a: &Matrix, b: &Vector, dim: usize) -> Option<Vector> {
    debug_assert!((1..=MAX_DIM).contains(&dim));
    let mut m = *a;
    let mut x = *b;

    let mut scale = 0.0_f64;
    for row in m.iter().take(dim) {
        for v in row.iter().take(dim) {
            scale = scale.max(v.abs());
        }
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let floor = PIVOT_TOL * scale;

    for col in 0..dim {
        let mut piv = col;
        let mut best = m[col][col].abs();
        for r in (col + 1)..dim {
            let v = m[r][col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < floor {
            return None;
        }
        if piv != col {
            m.swap(piv, col);
            x.swap(piv, col);
        }
        let d = m[col][col];
        for r in (col + 1)..dim {
            let f = m[r][col] / d;
            if f != 0.0 {
                for c in col..dim {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
    }

    for col in (0..dim).rev() {
        let mut acc = x[col];
        for c in (col + 1)..dim {
            acc -= m[col][c] * x[c];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

pub fn dot(a: &Vector, b: &Vector, dim: usize) -> f64 {
    a.iter().zip(b.iter()).take(dim).map(|(x, y)| x * y).sum()
}
