//! Domains, displacement fields and slicing direction sets.
//!
//! Fields are total functions on `R^d`: they evaluate to zero outside their
//! support. A field either carries exact piecewise-affine structure (the
//! generator class, used by the exact oracle paths) or is an opaque closure
//! that can only be sampled.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{checked_inverse, dot, mat_vec, mat_vec_into, norm};

/// Anything that maps points of `R^d` to displacements in `R^d`.
pub trait Displacement: Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Open axis-aligned box `(lower, upper)`.
///
/// A box produced by [`BoxDomain::inner_region`] may be empty; every other
/// constructor enforces `lower[i] < upper[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.len() < 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be at least 2, got {}",
                lower.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidDomain(format!(
                    "side {i}: lower {l} must be below upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![1.0; d]).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_empty(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| l >= u)
    }

    pub fn side(&self, i: usize) -> f64 {
        (self.upper[i] - self.lower[i]).max(0.0)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *l < *x && *x < *u)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    /// `Ω_ε = {x : dist(x, ∂Ω) > √d·ε}`; for a box this shrinks each side by
    /// `√d·ε` and may come out empty.
    pub fn inner_region(&self, eps: f64) -> BoxDomain {
        let shrink = (self.dim() as f64).sqrt() * eps.max(0.0);
        BoxDomain {
            lower: self.lower.iter().map(|l| l + shrink).collect(),
            upper: self.upper.iter().map(|u| u - shrink).collect(),
        }
    }

    /// Intersection with another box (possibly empty).
    pub fn intersect(&self, other: &BoxDomain) -> BoxDomain {
        BoxDomain {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.max(*b))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a.min(*b))
                .collect(),
        }
    }

    /// Box grown by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> BoxDomain {
        BoxDomain {
            lower: self.lower.iter().map(|l| l - margin).collect(),
            upper: self.upper.iter().map(|u| u + margin).collect(),
        }
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Parameter interval `{s : z + s·ξ ∈ Ω}` (slab method), `None` when the
    /// line misses the open box.
    pub fn line_interval(&self, z: &[f64], xi: &[f64]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.dim() {
            if xi[i] == 0.0 {
                if !(self.lower[i] < z[i] && z[i] < self.upper[i]) {
                    return None;
                }
                continue;
            }
            let a = (self.lower[i] - z[i]) / xi[i];
            let b = (self.upper[i] - z[i]) / xi[i];
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        (lo < hi).then_some((lo, hi))
    }

    /// Clamp a point into the closed box.
    pub fn clamp_into(&self, x: &mut [f64]) {
        for i in 0..self.dim() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

impl fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sides: Vec<String> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| format!("({l}, {u})"))
            .collect();
        write!(f, "{}", sides.join(" x "))
    }
}

/// Linear image of a reference box, `support = forward(base)`.
#[derive(Clone, Debug)]
pub struct Support {
    base: BoxDomain,
    map: Option<LinearMap>,
}

#[derive(Clone, Debug)]
struct LinearMap {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Support {
    pub fn boxed(base: BoxDomain) -> Self {
        Self { base, map: None }
    }

    pub fn is_box(&self) -> bool {
        self.map.is_none()
    }

    pub fn base(&self) -> &BoxDomain {
        &self.base
    }

    pub fn as_box(&self) -> Option<&BoxDomain> {
        self.map.is_none().then_some(&self.base)
    }

    fn to_base(&self, y: &[f64]) -> Vec<f64> {
        match &self.map {
            None => y.to_vec(),
            Some(m) => mat_vec(&m.inverse, y),
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match &self.map {
            None => self.base.contains(y),
            Some(_) => self.base.contains(&self.to_base(y)),
        }
    }

    pub fn contains_closed(&self, y: &[f64]) -> bool {
        match &self.map {
            None => self.base.contains_closed(y),
            Some(m) => {
                let x = mat_vec(&m.inverse, y);
                let tol = 1e-12;
                x.iter()
                    .zip(self.base.lower.iter().zip(&self.base.upper))
                    .all(|(x, (l, u))| *l - tol <= *x && *x <= *u + tol)
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match &self.map {
            None => self.base.volume(),
            Some(m) => self.base.volume() * m.forward.determinant().abs(),
        }
    }

    pub fn line_interval(&self, z: &[f64], xi: &[f64]) -> Option<(f64, f64)> {
        match &self.map {
            None => self.base.line_interval(z, xi),
            Some(m) => self
                .base
                .line_interval(&mat_vec(&m.inverse, z), &mat_vec(&m.inverse, xi)),
        }
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let corners = self.base.corners();
        match &self.map {
            None => corners,
            Some(m) => corners.iter().map(|c| mat_vec(&m.forward, c)).collect(),
        }
    }

    pub fn bounding_box(&self) -> BoxDomain {
        let corners = self.corners();
        let d = self.base.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for c in &corners {
            for i in 0..d {
                lower[i] = lower[i].min(c[i]);
                upper[i] = upper[i].max(c[i]);
            }
        }
        BoxDomain { lower, upper }
    }

    /// Closed description `{x : n·x ≤ c}` of the support.
    pub fn constraints(&self) -> Vec<crate::geometry::Constraint> {
        use crate::geometry::Constraint;
        let d = self.base.dim();
        let mut out = Vec::with_capacity(2 * d);
        for i in 0..d {
            let row: Vec<f64> = match &self.map {
                None => (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect(),
                Some(m) => (0..d).map(|k| m.inverse[(i, k)]).collect(),
            };
            out.push(Constraint::new(row.clone(), self.base.upper[i]));
            out.push(Constraint::new(
                row.iter().map(|x| -x).collect(),
                -self.base.lower[i],
            ));
        }
        out
    }

    /// Support after `y = a·x`.
    fn mapped(&self, a: &DMatrix<f64>, a_inv: &DMatrix<f64>) -> Support {
        let map = match &self.map {
            None => LinearMap {
                forward: a.clone(),
                inverse: a_inv.clone(),
            },
            Some(m) => LinearMap {
                forward: a * &m.forward,
                inverse: &m.inverse * a_inv,
            },
        };
        // collapse back to a plain box when the composite is the identity
        let d = self.base.dim();
        if (&map.forward - DMatrix::<f64>::identity(d, d)).amax() < 1e-14 {
            return Support::boxed(self.base.clone());
        }
        Support {
            base: self.base.clone(),
            map: Some(map),
        }
    }
}

/// Open half-space `normal · x < offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn contains(&self, x: &[f64]) -> bool {
        dot(&self.normal, x) < self.offset
    }
}

/// Convex polyhedral region: intersection of open half-spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub halfspaces: Vec<Halfspace>,
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }

    /// Parameter interval of the open line `z + s·ξ` inside the region.
    pub fn line_interval(&self, z: &[f64], xi: &[f64]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for h in &self.halfspaces {
            let a = dot(&h.normal, xi);
            let b = h.offset - dot(&h.normal, z);
            if a == 0.0 {
                if b <= 0.0 {
                    return None;
                }
            } else if a > 0.0 {
                hi = hi.min(b / a);
            } else {
                lo = lo.max(b / a);
            }
        }
        (lo < hi).then_some((lo, hi))
    }
}

/// An affine term `matrix·x + shift` switched on inside `region`.
#[derive(Clone, Debug)]
pub struct AffineIncrement {
    pub region: Region,
    pub matrix: DMatrix<f64>,
    pub shift: Vec<f64>,
}

/// Exact structure of a generator field:
/// `u(x) = G x + b + Σ_k χ_{R_k}(x) (A_k x + w_k)` inside the support.
///
/// Jumps live on the boundaries of the regions `R_k`; the absolutely
/// continuous slice derivative along `ξ` is `ξ·(G + Σ_active A_k)ξ`.
#[derive(Clone, Debug)]
pub struct PiecewiseAffine {
    pub gradient: DMatrix<f64>,
    pub shift: Vec<f64>,
    pub increments: Vec<AffineIncrement>,
}

impl PiecewiseAffine {
    pub fn affine(gradient: DMatrix<f64>, shift: Vec<f64>) -> Self {
        Self {
            gradient,
            shift,
            increments: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        mat_vec_into(&self.gradient, x, out);
        for (o, b) in out.iter_mut().zip(&self.shift) {
            *o += b;
        }
        let d = self.dim();
        for inc in &self.increments {
            if inc.region.contains(x) {
                for r in 0..d {
                    let mut acc = inc.shift[r];
                    for c in 0..d {
                        acc += inc.matrix[(r, c)] * x[c];
                    }
                    out[r] += acc;
                }
            }
        }
    }

    /// Infinitesimal rigid motion: skew gradient and no increments.
    pub fn is_rigid(&self) -> bool {
        let g = &self.gradient;
        self.increments.is_empty() && (g + g.transpose()).amax() <= 1e-14 * (1.0 + g.amax())
    }

    /// Merge two structures on the same support (pointwise sum).
    pub fn sum(&self, other: &PiecewiseAffine) -> PiecewiseAffine {
        let mut increments = self.increments.clone();
        increments.extend(other.increments.iter().cloned());
        PiecewiseAffine {
            gradient: &self.gradient + &other.gradient,
            shift: self
                .shift
                .iter()
                .zip(&other.shift)
                .map(|(a, b)| a + b)
                .collect(),
            increments,
        }
    }

    /// Structure of `y ↦ A^{-T} u(A^{-1} y)`.
    fn conjugated(&self, a_inv: &DMatrix<f64>) -> PiecewiseAffine {
        let a_inv_t = a_inv.transpose();
        PiecewiseAffine {
            gradient: &a_inv_t * &self.gradient * a_inv,
            shift: mat_vec(&a_inv_t, &self.shift),
            increments: self
                .increments
                .iter()
                .map(|inc| AffineIncrement {
                    region: Region {
                        halfspaces: inc
                            .region
                            .halfspaces
                            .iter()
                            .map(|h| Halfspace {
                                normal: mat_vec(&a_inv_t, &h.normal),
                                offset: h.offset,
                            })
                            .collect(),
                    },
                    matrix: &a_inv_t * &inc.matrix * a_inv,
                    shift: mat_vec(&a_inv_t, &inc.shift),
                })
                .collect(),
        }
    }
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum Source {
    Exact(Arc<PiecewiseAffine>),
    Custom(Arc<FieldFn>),
}

/// Displacement field `u : R^d → R^d`, zero outside its support.
///
/// Immutable after construction; evaluation is safe from many threads.
#[derive(Clone)]
pub struct VectorField {
    domain: BoxDomain,
    support: Support,
    source: Source,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("domain", &self.domain)
            .field("exact", &self.metadata().is_some())
            .finish()
    }
}

impl VectorField {
    /// Field given by a closure, evaluated on the closed box and zero outside.
    pub fn from_fn<F>(domain: BoxDomain, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            support: Support::boxed(domain.clone()),
            domain,
            source: Source::Custom(Arc::new(f)),
        }
    }

    /// Field with exact piecewise-affine structure.
    pub fn exact(domain: BoxDomain, structure: PiecewiseAffine) -> Result<Self> {
        if structure.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: structure.dim(),
            });
        }
        Ok(Self {
            support: Support::boxed(domain.clone()),
            domain,
            source: Source::Exact(Arc::new(structure)),
        })
    }

    /// Bounding box of the support.
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn metadata(&self) -> Option<&PiecewiseAffine> {
        match &self.source {
            Source::Exact(s) => Some(s),
            Source::Custom(_) => None,
        }
    }

    /// Evaluate the underlying formula without the support mask.
    pub fn eval_unmasked(&self, x: &[f64], out: &mut [f64]) {
        match &self.source {
            Source::Exact(s) => s.eval_into(x, out),
            Source::Custom(f) => f(x, out),
        }
    }
}

impl Displacement for VectorField {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        if self.support.contains_closed(x) {
            self.eval_unmasked(x, out);
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
        }
    }
}

/// Change of basis `v(y) = A^{-T} u(A^{-1} y)` on the image `A(Ω)`.
///
/// Returns the transformed field and the condition number of `A`.
pub fn transform_basis(field: &VectorField, a: &DMatrix<f64>) -> Result<(VectorField, f64)> {
    let d = field.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.nrows(),
        });
    }
    let (a_inv, condition) = checked_inverse(a)?;
    let support = field.support.mapped(a, &a_inv);
    let domain = support.bounding_box();
    let source = match &field.source {
        Source::Exact(s) => Source::Exact(Arc::new(s.conjugated(&a_inv))),
        Source::Custom(f) => {
            let f = Arc::clone(f);
            let a_inv_t = a_inv.transpose();
            let a_inv = a_inv.clone();
            Source::Custom(Arc::new(move |y: &[f64], out: &mut [f64]| {
                let x = mat_vec(&a_inv, y);
                let mut u = vec![0.0; x.len()];
                f(&x, &mut u);
                mat_vec_into(&a_inv_t, &u, out);
            }))
        }
    };
    Ok((
        VectorField {
            domain,
            support,
            source,
        },
        condition,
    ))
}

/// Factor `w` with `Λ_v^{Aξ} = w · Λ_u^ξ` for `v = A^{-T} u(A^{-1}·)`:
/// slices correspond one to one, only the hyperplane measure changes.
pub fn pullback_weight(a: &DMatrix<f64>, xi: &[f64]) -> f64 {
    a.determinant().abs() * norm(xi) / norm(&mat_vec(a, xi))
}

/// How a slicing direction was obtained from the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionKind {
    Basis(usize),
    /// `e_i + sign·e_j`, `i < j`.
    Pair {
        i: usize,
        j: usize,
        sign: i8,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub xi: Vec<f64>,
    pub threshold: f64,
    pub kind: DirectionKind,
}

impl Direction {
    pub fn weight(&self) -> f64 {
        norm(&self.xi)
    }
}

/// The `d(d+1)/2` slicing directions `{e_i} ∪ {e_i ± e_j}` with their jump
/// thresholds.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    basis: DMatrix<f64>,
    directions: Vec<Direction>,
}

impl DirectionSet {
    pub fn canonical(d: usize) -> Self {
        make_direction_set(&DMatrix::identity(d, d), None, None).expect("identity basis")
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        let d = self.dim();
        self.basis == DMatrix::identity(d, d)
    }

    pub fn min_threshold(&self) -> f64 {
        self.directions
            .iter()
            .map(|d| d.threshold)
            .fold(f64::INFINITY, f64::min)
    }

    /// Sign used for the pair `(i, j)`, `i < j`.
    pub fn pair_sign(&self, i: usize, j: usize) -> i8 {
        self.directions
            .iter()
            .find_map(|d| match d.kind {
                DirectionKind::Pair { i: a, j: b, sign } if a == i && b == j => Some(sign),
                _ => None,
            })
            .unwrap_or(1)
    }

    pub fn pair_signs(&self) -> Vec<i8> {
        self.directions
            .iter()
            .filter_map(|d| match d.kind {
                DirectionKind::Pair { sign, .. } => Some(sign),
                _ => None,
            })
            .collect()
    }
}

/// Build `V = {e_i} ∪ {e_i + s_ij e_j : i < j}` from the columns of `basis`.
///
/// `pair_signs` lists `s_ij` in lexicographic `(i, j)` order (default `+1`);
/// `thresholds` lists `β_ξ` in the order of the returned directions (default 1).
pub fn make_direction_set(
    basis: &DMatrix<f64>,
    pair_signs: Option<&[i8]>,
    thresholds: Option<&[f64]>,
) -> Result<DirectionSet> {
    let d = basis.nrows();
    if basis.ncols() != d || d < 2 {
        return Err(Error::DegenerateBasis(format!(
            "basis must be square with d >= 2, got {}x{}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let condition = crate::linalg::condition_number(basis);
    if !condition.is_finite() || condition > 1e10 {
        return Err(Error::DegenerateBasis(format!(
            "columns are linearly dependent (condition {condition:e})"
        )));
    }
    let n_pairs = d * (d - 1) / 2;
    let n = d + n_pairs;
    if let Some(s) = pair_signs {
        if s.len() != n_pairs {
            return Err(invalid(
                "pair_signs",
                format!("expected {n_pairs} entries, got {}", s.len()),
            ));
        }
        if s.iter().any(|s| *s != 1 && *s != -1) {
            return Err(invalid("pair_signs", "entries must be +1 or -1"));
        }
    }
    if let Some(t) = thresholds {
        if t.len() != n {
            return Err(invalid(
                "thresholds",
                format!("expected {n} entries, got {}", t.len()),
            ));
        }
        if t.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(invalid("thresholds", "every threshold must be positive"));
        }
    }
    let col = |i: usize| -> Vec<f64> { (0..d).map(|r| basis[(r, i)]).collect() };
    let mut directions = Vec::with_capacity(n);
    for i in 0..d {
        directions.push(Direction {
            xi: col(i),
            threshold: 1.0,
            kind: DirectionKind::Basis(i),
        });
    }
    let mut p = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let sign = pair_signs.map_or(1, |s| s[p]);
            let (a, b) = (col(i), col(j));
            directions.push(Direction {
                xi: a.iter().zip(&b).map(|(a, b)| a + sign as f64 * b).collect(),
                threshold: 1.0,
                kind: DirectionKind::Pair { i, j, sign },
            });
            p += 1;
        }
    }
    if let Some(t) = thresholds {
        for (dir, b) in directions.iter_mut().zip(t) {
            dir.threshold = *b;
        }
    }
    Ok(DirectionSet {
        basis: basis.clone(),
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_field(d: usize) -> VectorField {
        VectorField::exact(
            BoxDomain::unit(d),
            PiecewiseAffine::affine(DMatrix::identity(d, d), vec![0.0; d]),
        )
        .unwrap()
    }

    #[test]
    fn inner_region_examples() {
        let unit = BoxDomain::unit(2);
        assert_eq!(unit.inner_region(0.0), unit);
        let shrink = 2f64.sqrt() * 0.1;
        let inner = unit.inner_region(0.1);
        assert!(!inner.is_empty());
        for i in 0..2 {
            assert!((inner.lower()[i] - shrink).abs() < 1e-15);
            assert!((inner.upper()[i] - (1.0 - shrink)).abs() < 1e-15);
        }
        assert!(unit.inner_region(0.5).is_empty());
        assert_eq!(unit.inner_region(0.5).volume(), 0.0);
    }

    #[test]
    fn box_rejects_inverted_sides() {
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn line_interval_of_unit_square() {
        let unit = BoxDomain::unit(2);
        let (a, b) = unit.line_interval(&[0.0, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
        let (a, b) = unit.line_interval(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
        assert!(unit.line_interval(&[0.0, 2.0], &[1.0, 0.0]).is_none());
    }

    #[test]
    fn field_is_zero_outside() {
        let u = identity_field(2);
        assert_eq!(u.eval(&[0.25, 0.5]), vec![0.25, 0.5]);
        assert_eq!(u.eval(&[1.5, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_transform_is_pointwise_identity() {
        let u = identity_field(2);
        let (v, cond) = transform_basis(&u, &DMatrix::identity(2, 2)).unwrap();
        assert!((cond - 1.0).abs() < 1e-12);
        assert!(v.support().is_box());
        for x in [[0.1, 0.2], [0.7, 0.9]] {
            assert_eq!(u.eval(&x), v.eval(&x));
        }
    }

    #[test]
    fn diagonal_transform_matches_formula() {
        let u = identity_field(2);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let (v, _) = transform_basis(&u, &a).unwrap();
        assert_eq!(v.domain().upper(), &[2.0, 1.0]);
        // v(y) = A^{-T} A^{-1} y = (y1/4, y2)
        let y = [1.2, 0.3];
        let got = v.eval(&y);
        assert!((got[0] - 0.3).abs() < 1e-15 && (got[1] - 0.3).abs() < 1e-15);
        assert!((v.support().volume() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_preserves_rigidity() {
        let d = 2;
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let u = VectorField::exact(
            BoxDomain::unit(d),
            PiecewiseAffine::affine(skew, vec![0.3, -0.2]),
        )
        .unwrap();
        let t = 0.4f64;
        let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let (v, _) = transform_basis(&u, &r).unwrap();
        assert!(v.metadata().unwrap().is_rigid());
        assert!(!v.support().is_box());
    }

    #[test]
    fn singular_transform_is_rejected() {
        let u = identity_field(2);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            transform_basis(&u, &a),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn custom_field_roundtrip() {
        let u = VectorField::from_fn(BoxDomain::unit(2), |x, out| {
            out[0] = x[0] * x[1];
            out[1] = x[0].sin();
        });
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let (v, _) = transform_basis(&u, &a).unwrap();
        let a_inv = a.clone().try_inverse().unwrap();
        let (w, _) = transform_basis(&v, &a_inv).unwrap();
        for x in [[0.2, 0.3], [0.8, 0.1], [0.5, 0.95]] {
            let (p, q) = (u.eval(&x), w.eval(&x));
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_set_examples() {
        let v = DirectionSet::canonical(2);
        let xs: Vec<_> = v.directions().iter().map(|d| d.xi.clone()).collect();
        assert_eq!(xs, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(DirectionSet::canonical(3).len(), 6);
        let minus = make_direction_set(&DMatrix::identity(2, 2), Some(&[-1]), None).unwrap();
        assert_eq!(minus.directions()[2].xi, vec![1.0, -1.0]);
        assert_eq!(minus.pair_sign(0, 1), -1);
        let degenerate = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 1.0]);
        assert!(matches!(
            make_direction_set(&degenerate, None, None),
            Err(Error::DegenerateBasis(_))
        ));
        assert!(
            make_direction_set(&DMatrix::identity(2, 2), None, Some(&[1.0, 0.0, 1.0])).is_err()
        );
    }
}
