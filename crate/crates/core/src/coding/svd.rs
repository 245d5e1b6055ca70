//! Leading left singular vector of a tall or wide real matrix given by columns.

use nalgebra::{DMatrix, SymmetricEigen};

/// Dimension up to which the explicit Gram eigendecomposition is used.
const DENSE_LIMIT: usize = 160;
const MAX_SWEEPS: usize = 400;
const BLOCK: usize = 3;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Σ_p (u·y_p)²`.
pub(crate) fn rayleigh(columns: &[Vec<f64>], u: &[f64]) -> f64 {
    columns.iter().map(|y| dot(u, y).powi(2)).sum()
}

/// `Y (Yᵀ v)`.
fn gram_apply(columns: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for y in columns {
        let c = dot(y, v);
        if c != 0.0 {
            for (o, yi) in out.iter_mut().zip(y) {
                *o += c * yi;
            }
        }
    }
}

/// Modified Gram-Schmidt; drops vectors that become negligible.
fn orthonormalize(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let n = norm(&v);
        if n > 1e-10 * n0 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    out
}

fn top_eigvec(m: DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(m);
    let (idx, &val) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, (i, v)| {
                if *v > *best.1 {
                    (i, v)
                } else {
                    best
                }
            });
    (val, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// Unit vector `u` maximizing `Σ_p (u·y_p)²` over the columns `y_p`, or `None`
/// if every column is zero. `start` seeds the iterative path.
pub(crate) fn leading_left_singular(columns: &[Vec<f64>], start: &[f64]) -> Option<Vec<f64>> {
    let count = columns.len();
    if count == 0 {
        return None;
    }
    let dim = columns[0].len();
    if columns.iter().all(|c| c.iter().all(|&v| v == 0.0)) {
        return None;
    }

    let mut u = if count <= DENSE_LIMIT && count <= dim {
        let g = DMatrix::from_fn(count, count, |i, j| dot(&columns[i], &columns[j]));
        let (_, v) = top_eigvec(g);
        let mut u = vec![0.0; dim];
        for (y, c) in columns.iter().zip(&v) {
            u.iter_mut().zip(y).for_each(|(ui, yi)| *ui += c * yi);
        }
        u
    } else if dim <= DENSE_LIMIT {
        let mut c = DMatrix::<f64>::zeros(dim, dim);
        for y in columns {
            for i in 0..dim {
                if y[i] == 0.0 {
                    continue;
                }
                for j in i..dim {
                    c[(i, j)] += y[i] * y[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                c[(i, j)] = c[(j, i)];
            }
        }
        top_eigvec(c).1
    } else {
        subspace_iteration(columns, start)
    };

    let n = norm(&u);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= n);
    Some(u)
}

fn subspace_iteration(columns: &[Vec<f64>], start: &[f64]) -> Vec<f64> {
    let dim = columns[0].len();
    let biggest = columns
        .iter()
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .expect("non-empty")
        .clone();
    let mut sum = vec![0.0; dim];
    for y in columns {
        // align signs with the start vector so the sum does not cancel
        let s = if dot(y, start) < 0.0 { -1.0 } else { 1.0 };
        sum.iter_mut().zip(y).for_each(|(a, b)| *a += s * b);
    }
    let mut basis = orthonormalize(vec![start.to_vec(), biggest, sum]);
    let mut prev = f64::NEG_INFINITY;
    let mut best = basis[0].clone();
    let mut tmp = vec![0.0; dim];
    for _ in 0..MAX_SWEEPS {
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|q| {
                gram_apply(columns, q, &mut tmp);
                tmp.clone()
            })
            .collect();
        basis = orthonormalize(images);
        if basis.is_empty() {
            break;
        }
        // Rayleigh-Ritz on the current block
        let k = basis.len();
        let mut h = DMatrix::<f64>::zeros(k, k);
        let projected: Vec<Vec<f64>> = basis
            .iter()
            .map(|q| columns.iter().map(|y| dot(y, q)).collect())
            .collect();
        for i in 0..k {
            for j in i..k {
                let v = dot(&projected[i], &projected[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let (val, coef) = top_eigvec(h);
        let mut ritz = vec![0.0; dim];
        for (q, c) in basis.iter().zip(&coef) {
            ritz.iter_mut().zip(q).for_each(|(r, qi)| *r += c * qi);
        }
        best = ritz;
        if (val - prev).abs() <= 1e-14 * val.abs() {
            break;
        }
        prev = val;
        if basis.len() > BLOCK {
            basis.truncate(BLOCK);
        }
    }
    best
}
