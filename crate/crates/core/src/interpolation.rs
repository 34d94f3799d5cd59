//! Multilinear patches on cubes, the rigidity check and the discrete Korn
//! constant.
//!
//! Vertex `w ∈ {0,1}^d` is stored at index `Σ_i w_i 2^i`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::tensor_gauss;
use crate::reduce::{par_map_range, tree_sum};

/// Displacements at the `2^d` vertices of the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeVertexData {
    d: usize,
    values: Vec<Vec<f64>>,
}

impl CubeVertexData {
    pub fn new(d: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if d < 1 || values.len() != 1 << d {
            return Err(invalid(
                "values",
                format!("expected {} vertices, got {}", 1usize << d, values.len()),
            ));
        }
        for v in &values {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("values", "vertex values must be finite"));
            }
        }
        Ok(Self { d, values })
    }

    /// Sample `f` at the vertices.
    pub fn from_fn(d: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let values = (0..1usize << d).map(|w| f(&vertex(d, w))).collect();
        Self { d, values }
    }

    /// Inverse of [`CubeVertexData::flatten`].
    pub fn from_flat(d: usize, flat: &[f64]) -> Self {
        let values = flat.chunks(d).map(|c| c.to_vec()).collect();
        Self { d, values }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, w: usize) -> &[f64] {
        &self.values[w]
    }

    /// Coordinates `[w·d + r]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

/// Coordinates of vertex `w`.
pub fn vertex(d: usize, w: usize) -> Vec<f64> {
    (0..d).map(|i| (w >> i & 1) as f64).collect()
}

fn blend(d: usize, w: usize, x: &[f64]) -> f64 {
    let mut b = 1.0;
    for (i, xi) in x.iter().enumerate().take(d) {
        b *= if w >> i & 1 == 1 { *xi } else { 1.0 - xi };
    }
    b
}

fn interpolate_unchecked(data: &CubeVertexData, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (w, v) in data.values.iter().enumerate() {
        let b = blend(data.d, w, x);
        for (o, vr) in out.iter_mut().zip(v) {
            *o += b * vr;
        }
    }
}

/// Multilinear interpolation at `x ∈ [0,1]^d`.
pub fn interpolate(data: &CubeVertexData, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != data.d {
        return Err(Error::DimensionMismatch {
            expected: data.d,
            got: x.len(),
        });
    }
    if x.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::OutsideCube(x.to_vec()));
    }
    let mut out = vec![0.0; data.d];
    interpolate_unchecked(data, x, &mut out);
    Ok(out)
}

/// `∇v(x)` on the unit cube, `[(r, k)] = ∂_k v_r`.
pub fn gradient(data: &CubeVertexData, x: &[f64]) -> DMatrix<f64> {
    let d = data.d;
    let mut g = DMatrix::zeros(d, d);
    for (w, v) in data.values.iter().enumerate() {
        for k in 0..d {
            let mut b = if w >> k & 1 == 1 { 1.0 } else { -1.0 };
            for (i, xi) in x.iter().enumerate() {
                if i != k {
                    b *= if w >> i & 1 == 1 { *xi } else { 1.0 - xi };
                }
            }
            for r in 0..d {
                g[(r, k)] += b * v[r];
            }
        }
    }
    g
}

/// `e(v)(x) = (∇v + ∇vᵀ)/2` on the unit cube.
pub fn sym_gradient(data: &CubeVertexData, x: &[f64]) -> DMatrix<f64> {
    let g = gradient(data, x);
    (&g + g.transpose()) * 0.5
}

/// Multilinear patch on the cube `origin + side·[0,1]^d`.
#[derive(Clone, Debug)]
pub struct MultilinearPatch {
    pub data: CubeVertexData,
    pub origin: Vec<f64>,
    pub side: f64,
}

impl MultilinearPatch {
    pub fn local(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.origin)
            .map(|(x, o)| (x - o) / self.side)
            .collect()
    }

    /// Evaluate at a global point (no containment check).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let t = self.local(x);
        interpolate_unchecked(&self.data, &t, out);
    }

    pub fn sym_gradient(&self, x: &[f64]) -> DMatrix<f64> {
        sym_gradient(&self.data, &self.local(x)) / self.side
    }
}

/// A finite-difference relation `ξ·(v(to) − v(from))` between two vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub xi: Vec<f64>,
    pub from: usize,
    pub to: usize,
}

/// Edge relations along every `e_k` and face-diagonal relations along
/// `e_i ± e_j` (`i < j`, signs in lexicographic pair order, default `+`).
///
/// For `e_i − e_j` the pair runs from the vertex with `w_j = 1, w_i = 0` to
/// the one with `w_i = 1, w_j = 0`.
pub fn relations(d: usize, pair_signs: Option<&[i8]>) -> Vec<Relation> {
    let unit = |k: usize| -> Vec<f64> { (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect() };
    let mut out = Vec::new();
    for k in 0..d {
        for w in 0..1usize << d {
            if w >> k & 1 == 0 {
                out.push(Relation {
                    xi: unit(k),
                    from: w,
                    to: w | 1 << k,
                });
            }
        }
    }
    let mut p = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let sign = pair_signs.map_or(1, |s| s[p]);
            p += 1;
            for w in 0..1usize << d {
                if w >> i & 1 == 0 && w >> j & 1 == 0 {
                    let mut xi = unit(i);
                    xi[j] = sign as f64;
                    let (from, to) = if sign > 0 {
                        (w, w | 1 << i | 1 << j)
                    } else {
                        (w | 1 << j, w | 1 << i)
                    };
                    out.push(Relation { xi, from, to });
                }
            }
        }
    }
    out
}

fn residual(data: &CubeVertexData, rel: &Relation) -> f64 {
    let (a, b) = (data.value(rel.to), data.value(rel.from));
    rel.xi
        .iter()
        .enumerate()
        .map(|(r, x)| x * (a[r] - b[r]))
        .sum()
}

/// Largest residual over the edge and `e_i + e_j` diagonal relations.
pub fn rigidity_defect(data: &CubeVertexData) -> f64 {
    relations(data.d, None)
        .iter()
        .map(|r| residual(data, r).abs())
        .fold(0.0, f64::max)
}

/// Right-hand side `Σ |ξ·(v(to) − v(from))|^p` over all relations.
pub fn fd_rhs(data: &CubeVertexData, p: f64, pair_signs: Option<&[i8]>) -> f64 {
    let terms: Vec<f64> = relations(data.d, pair_signs)
        .iter()
        .map(|r| residual(data, r).abs().powf(p))
        .collect();
    tree_sum(&terms)
}

/// Default Gauss order: exact for `p = 2`, eight points per axis otherwise.
pub fn default_order(d: usize, p: f64) -> usize {
    if p == 2.0 {
        d.max(2)
    } else {
        8
    }
}

/// `∫_{[0,1]^d} |e(v)|_F^p` by tensor Gauss quadrature with `q` points per axis.
pub fn cube_energy(data: &CubeVertexData, p: f64, q: usize) -> f64 {
    let (pts, ws) = tensor_gauss(data.d, q);
    let terms: Vec<f64> = pts
        .iter()
        .zip(&ws)
        .map(|(x, w)| w * sym_gradient(data, x).norm().powf(p))
        .collect();
    tree_sum(&terms)
}

/// Matrix of the linear map `v ↦ rigid restriction` with columns spanning
/// `{w ↦ A w + b : A skew}` at the vertices, orthonormalized.
pub fn rigid_basis(d: usize) -> DMatrix<f64> {
    let n = d << d;
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for r in 0..d {
        let mut c = DVector::zeros(n);
        for w in 0..1usize << d {
            c[w * d + r] = 1.0;
        }
        cols.push(c);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            // A = e_i e_jᵀ − e_j e_iᵀ
            let mut c = DVector::zeros(n);
            for w in 0..1usize << d {
                let x = vertex(d, w);
                c[w * d + i] = x[j];
                c[w * d + j] = -x[i];
            }
            cols.push(c);
        }
    }
    let m = DMatrix::from_columns(&cols);
    m.qr().q()
}

/// Orthonormal basis of the orthogonal complement of [`rigid_basis`].
pub fn quotient_basis(d: usize) -> DMatrix<f64> {
    let n = d << d;
    let r = rigid_basis(d);
    let proj = DMatrix::identity(n, n) - &r * r.transpose();
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

fn relation_matrix(d: usize, pair_signs: Option<&[i8]>) -> DMatrix<f64> {
    let rels = relations(d, pair_signs);
    let n = d << d;
    let mut c = DMatrix::zeros(rels.len(), n);
    for (row, rel) in rels.iter().enumerate() {
        for r in 0..d {
            c[(row, rel.to * d + r)] += rel.xi[r];
            c[(row, rel.from * d + r)] -= rel.xi[r];
        }
    }
    c
}

/// Orthogonal projection onto the data satisfying every relation exactly.
///
/// The kernel is computed from the relation matrix itself, independently of
/// [`rigid_basis`].
pub fn project_compatible(data: &CubeVertexData) -> CubeVertexData {
    let d = data.d;
    let c = relation_matrix(d, None);
    let eig = SymmetricEigen::new(c.transpose() * &c);
    let scale = eig.eigenvalues.amax();
    let v = DVector::from_vec(data.flatten());
    let mut out = DVector::zeros(v.len());
    for k in 0..v.len() {
        if eig.eigenvalues[k] <= 1e-10 * scale {
            let e = eig.eigenvectors.column(k);
            out += e * e.dot(&v);
        }
    }
    CubeVertexData::from_flat(d, out.as_slice())
}

/// Korn constant estimation method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KornMethod {
    /// Generalized symmetric eigenproblem, `p = 2` only.
    Eig,
    /// Projected gradient ascent from seeded random starts.
    Search,
}

impl std::str::FromStr for KornMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eig" => Ok(Self::Eig),
            "search" => Ok(Self::Search),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for KornMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Eig => "eig",
            Self::Search => "search",
        })
    }
}

#[derive(Clone, Debug)]
pub struct KornOptions {
    pub seed: u64,
    pub starts: usize,
    pub max_iter: usize,
    /// Gauss order; [`default_order`] when `None`.
    pub q: Option<usize>,
}

impl Default for KornOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 200,
            max_iter: 400,
            q: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KornEstimate {
    pub d: usize,
    pub p: f64,
    pub method: KornMethod,
    pub seed: u64,
    /// Estimate of the optimal constant.
    pub constant: f64,
    /// Best ratio actually attained by a vertex dataset.
    pub lower_bound: f64,
    pub quotient_dim: usize,
}

/// Linear maps `v ↦ e(v)(x_g)` (row-major `d×d` entries) at Gauss points.
struct StrainOperator {
    d: usize,
    weights: Vec<f64>,
    maps: Vec<DMatrix<f64>>,
}

impl StrainOperator {
    fn new(d: usize, q: usize) -> Self {
        let n = d << d;
        let (pts, weights) = tensor_gauss(d, q);
        let maps = pts
            .iter()
            .map(|x| {
                let mut b = DMatrix::zeros(d * d, n);
                for col in 0..n {
                    let mut flat = vec![0.0; n];
                    flat[col] = 1.0;
                    let e = sym_gradient(&CubeVertexData::from_flat(d, &flat), x);
                    for r in 0..d {
                        for c in 0..d {
                            b[(r * d + c, col)] = e[(r, c)];
                        }
                    }
                }
                b
            })
            .collect();
        Self { d, weights, maps }
    }

    fn quadratic_form(&self) -> DMatrix<f64> {
        let n = self.d << self.d;
        let mut e = DMatrix::zeros(n, n);
        for (w, b) in self.weights.iter().zip(&self.maps) {
            e += b.transpose() * b * *w;
        }
        e
    }
}

fn check_korn_args(d: usize, p: f64) -> Result<()> {
    if !(2..=3).contains(&d) {
        return Err(invalid("d", "only d = 2 and d = 3 are supported"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", "exponent must be at least 1"));
    }
    Ok(())
}

/// Estimate the best `C` with `∫|e(v)|^p ≤ C · fd_rhs(v, p)` over the
/// quotient by rigid motions.
pub fn korn_constant(
    d: usize,
    p: f64,
    method: KornMethod,
    opts: &KornOptions,
) -> Result<KornEstimate> {
    check_korn_args(d, p)?;
    let quotient = quotient_basis(d);
    let k = quotient.ncols();
    let rel = relation_matrix(d, None);
    let f_w = quotient.transpose() * (rel.transpose() * &rel) * &quotient;
    let f_eig = SymmetricEigen::new(f_w.clone());
    let f_min = f_eig.eigenvalues.min();
    if f_min <= 1e-10 * f_eig.eigenvalues.amax() {
        return Err(Error::RigidKernelViolation(f_min));
    }
    let q = opts.q.unwrap_or_else(|| default_order(d, p));
    let strain = StrainOperator::new(d, q);
    let (constant, lower_bound) = match method {
        KornMethod::Eig => {
            if p != 2.0 {
                return Err(invalid("method", "the eigenvalue method requires p = 2"));
            }
            let e_w = quotient.transpose() * strain.quadratic_form() * &quotient;
            let l = f_w
                .cholesky()
                .ok_or(Error::RigidKernelViolation(f_min))?
                .l();
            let l_inv = l.try_inverse().ok_or(Error::RigidKernelViolation(f_min))?;
            let m = &l_inv * e_w * l_inv.transpose();
            let m = (&m + m.transpose()) * 0.5;
            let c = SymmetricEigen::new(m).eigenvalues.max();
            (c, c)
        }
        KornMethod::Search => {
            let problem = SearchProblem {
                strain: &strain,
                quotient: &quotient,
                rel: &rel,
                p,
            };
            let results = par_map_range(opts.starts, |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(s as u64);
                let start: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                problem.ascend(start, opts.max_iter)
            });
            let best = results.iter().copied().fold(0.0, f64::max);
            (best, best)
        }
    };
    Ok(KornEstimate {
        d,
        p,
        method,
        seed: opts.seed,
        constant,
        lower_bound,
        quotient_dim: k,
    })
}

struct SearchProblem<'a> {
    strain: &'a StrainOperator,
    quotient: &'a DMatrix<f64>,
    rel: &'a DMatrix<f64>,
    p: f64,
}

impl SearchProblem<'_> {
    /// Ratio and its gradient with respect to the quotient coordinates.
    fn ratio_grad(&self, c: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.p;
        let v = self.quotient * c;
        let n = v.len();
        let mut num = 0.0;
        let mut g_num = DVector::zeros(n);
        for (w, b) in self.strain.weights.iter().zip(&self.strain.maps) {
            let e = b * &v;
            let nrm = e.norm();
            if nrm > 0.0 {
                num += w * nrm.powf(p);
                g_num += b.transpose() * (e * (w * p * nrm.powf(p - 2.0)));
            }
        }
        let r = self.rel * &v;
        let mut den = 0.0;
        let mut g_den_r = DVector::zeros(r.len());
        for (i, ri) in r.iter().enumerate() {
            let a = ri.abs();
            if a > 0.0 {
                den += a.powf(p);
                g_den_r[i] = p * a.powf(p - 1.0) * ri.signum();
            }
        }
        let g_den = self.rel.transpose() * g_den_r;
        let ratio = num / den;
        let g = (g_num - g_den * ratio) / den;
        (ratio, self.quotient.transpose() * g)
    }

    fn ascend(&self, start: Vec<f64>, max_iter: usize) -> f64 {
        let mut c = DVector::from_vec(start);
        c /= c.norm();
        let (mut ratio, mut grad) = self.ratio_grad(&c);
        let mut step = 0.1;
        for _ in 0..max_iter {
            // the ratio is scale invariant: its gradient is tangent to the
            // sphere, so step along it and renormalize
            let gn = grad.norm();
            if gn < 1e-13 || step < 1e-12 {
                break;
            }
            let mut trial = &c + &grad * (step / gn);
            trial /= trial.norm();
            let (r, g) = self.ratio_grad(&trial);
            if r > ratio {
                c = trial;
                ratio = r;
                grad = g;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        ratio
    }
}
