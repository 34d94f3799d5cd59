//! Small dense helpers shared by the numerical modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out = m * x` for a square matrix stored by nalgebra (column major).
pub fn mat_vec_into(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = m.shape();
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += m[(r, c)] * x[c];
        }
        *o = acc;
    }
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    mat_vec_into(m, x, &mut out);
    out
}

/// `xi · m xi`.
pub fn quadratic_form(m: &DMatrix<f64>, xi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            acc += xi[r] * m[(r, c)] * xi[c];
        }
    }
    acc
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let m = rows[0].len();
    for r in rows {
        if r.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a square matrix, rejecting numerically singular input.
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let condition = condition_number(m);
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::SingularMatrix { condition });
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { condition })?;
    Ok((inv, condition))
}

/// Orthonormal frame of `xi`'s orthogonal complement, built by Gram-Schmidt
/// over the standard basis in index order. Candidates that are (nearly)
/// dependent on the frame built so far are skipped.
pub fn orthonormal_complement(xi: &[f64]) -> Vec<Vec<f64>> {
    let d = xi.len();
    let n = norm(xi);
    let mut frame: Vec<Vec<f64>> = vec![xi.iter().map(|x| x / n).collect()];
    for k in 0..d {
        if frame.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for f in &frame {
                let c = dot(&v, f);
                for (vi, fi) in v.iter_mut().zip(f) {
                    *vi -= c * fi;
                }
            }
        }
        let len = norm(&v);
        if len > 1e-8 {
            frame.push(v.iter().map(|x| x / len).collect());
        }
    }
    frame.remove(0);
    frame
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss rule on `[0,1]^d`: flattened points and weights.
pub fn tensor_gauss(d: usize, q: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre_unit(q);
    let total = q.pow(d as u32);
    let mut pts = Vec::with_capacity(total);
    let mut ws = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; d];
        let mut w = 1.0;
        for pk in p.iter_mut() {
            let idx = rem % q;
            rem /= q;
            *pk = nodes[idx];
            w *= weights[idx];
        }
        pts.push(p);
        ws.push(w);
    }
    (pts, ws)
}

/// Uniform sample from SO(d): QR of a Gaussian matrix with the sign fix
/// that makes the distribution Haar, then a column flip to land in SO(d).
pub fn haar_rotation<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let g: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..d {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for q in 1..=12 {
            let (x, w) = gauss_legendre_unit(q);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..(2 * q) {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((num - exact).abs() < 1e-13, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn complement_frame_is_orthonormal() {
        let xi = [1.0, 1.0, -0.5];
        let f = orthonormal_complement(&xi);
        assert_eq!(f.len(), 2);
        for a in &f {
            assert!(dot(a, &xi).abs() < 1e-14);
            assert!((norm(a) - 1.0).abs() < 1e-14);
        }
        assert!(dot(&f[0], &f[1]).abs() < 1e-14);
        // first complement vector comes from e1
        let f2 = orthonormal_complement(&[0.0, 1.0]);
        assert_eq!(f2[0], vec![1.0, 0.0]);
    }

    #[test]
    fn haar_sample_is_rotation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for d in 2..=4 {
            let r = haar_rotation(d, &mut rng);
            let id = r.transpose() * &r;
            assert!((id - DMatrix::identity(d, d)).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_inverse_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            checked_inverse(&m),
            Err(Error::SingularMatrix { .. })
        ));
    }
}
