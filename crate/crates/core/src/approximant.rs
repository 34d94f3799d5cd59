//! Anchored `ε`-lattice, bad-cube excision and the piecewise-multilinear
//! approximant `u^ε`.
//!
//! Lattice points are `ε(y + j)` for `j ∈ Z^d`; cube `i` is
//! `ε(y + i) + ε[0,1)^d`. A cube is OUTSIDE when its closure is not inside
//! the open domain, BAD when some edge or face-diagonal difference along a
//! direction of `V` exceeds that direction's threshold, GOOD otherwise.

use std::fmt::Write as _;

use serde::Serialize;

use crate::anchor::{measure_discrepancy, select_anchor, AnchorDiagnostics, AnchorOptions};
use crate::error::{Error, Result};
use crate::field_model::{BoxDomain, DirectionSet, Displacement, VectorField};
use crate::interpolation::{
    cube_energy, default_order, fd_rhs, relations, CubeVertexData, MultilinearPatch, Relation,
};
use crate::linalg::gauss_legendre_unit;
use crate::reduce::{par_map_range, tree_sum};
use crate::slicing::{lambda_v, DirectionalEnergy, Quadrature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CubeClass {
    Outside,
    Bad,
    Good,
}

impl CubeClass {
    pub fn label(self) -> &'static str {
        match self {
            CubeClass::Outside => "OUTSIDE",
            CubeClass::Bad => "BAD",
            CubeClass::Good => "GOOD",
        }
    }
}

/// Classified lattice with cached vertex samples.
#[derive(Clone, Debug)]
pub struct CubeLattice {
    eps: f64,
    anchor: Vec<f64>,
    domain: BoxDomain,
    dirs: DirectionSet,
    /// Lowest cube index per axis.
    lo: Vec<i64>,
    /// Number of cubes per axis.
    counts: Vec<usize>,
    classes: Vec<CubeClass>,
    /// `u(ε(y + j))`, flattened over the vertex range (counts + 1 per axis).
    samples: Vec<f64>,
    relations: Vec<Relation>,
}

fn check_anchor(anchor: &[f64], d: usize) -> Result<()> {
    if anchor.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: anchor.len(),
        });
    }
    if anchor.iter().any(|y| !(0.0..1.0).contains(y)) {
        return Err(crate::error::invalid(
            "anchor",
            "components must lie in [0, 1)",
        ));
    }
    Ok(())
}

/// Lattice offsets `ξ ∈ Z^d` of a canonical direction set.
fn check_lattice_dirs(dirs: &DirectionSet) -> Result<()> {
    if !dirs.is_canonical() {
        let xi = dirs.directions()[0].xi.clone();
        return Err(Error::NotLatticeDirection(xi));
    }
    Ok(())
}

impl CubeLattice {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn lowest_index(&self) -> &[i64] {
        &self.lo
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[CubeClass] {
        &self.classes
    }

    pub fn count(&self, class: CubeClass) -> usize {
        self.classes.iter().filter(|c| **c == class).count()
    }

    /// Integer index of cube number `flat`.
    pub fn cube_index(&self, flat: usize) -> Vec<i64> {
        let mut rem = flat;
        self.counts
            .iter()
            .zip(&self.lo)
            .map(|(n, lo)| {
                let k = rem % n;
                rem /= n;
                lo + k as i64
            })
            .collect()
    }

    /// Flat number of cube `i`, `None` outside the covered range.
    pub fn cube_flat(&self, i: &[i64]) -> Option<usize> {
        let mut flat = 0;
        let mut stride = 1;
        for k in 0..self.dim() {
            let off = i[k] - self.lo[k];
            if off < 0 || off >= self.counts[k] as i64 {
                return None;
            }
            flat += off as usize * stride;
            stride *= self.counts[k];
        }
        Some(flat)
    }

    pub fn class_of(&self, i: &[i64]) -> CubeClass {
        self.cube_flat(i)
            .map_or(CubeClass::Outside, |f| self.classes[f])
    }

    /// Position `ε(y + j)`.
    pub fn point(&self, j: &[i64]) -> Vec<f64> {
        j.iter()
            .zip(&self.anchor)
            .map(|(j, y)| self.eps * (y + *j as f64))
            .collect()
    }

    fn vertex_flat(&self, j: &[i64]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for k in 0..self.dim() {
            flat += (j[k] - self.lo[k]) as usize * stride;
            stride *= self.counts[k] + 1;
        }
        flat
    }

    /// Cached `u(ε(y + j))` for `j` in the vertex range.
    pub fn sample(&self, j: &[i64]) -> &[f64] {
        let d = self.dim();
        let f = self.vertex_flat(j);
        &self.samples[f * d..(f + 1) * d]
    }

    /// Vertex data of cube `i` in unit-cube numbering.
    pub fn vertex_data(&self, i: &[i64]) -> CubeVertexData {
        let d = self.dim();
        let mut j = vec![0i64; d];
        let values = (0..1usize << d)
            .map(|w| {
                for k in 0..d {
                    j[k] = i[k] + (w >> k & 1) as i64;
                }
                self.sample(&j).to_vec()
            })
            .collect();
        CubeVertexData::new(d, values).expect("cached samples are finite")
    }

    /// `max_ξ,pairs |ξ·Δu| − β_ξ > 0` test for one cube.
    fn is_bad(&self, i: &[i64]) -> bool {
        let data = self.vertex_data(i);
        self.relations.iter().any(|rel| {
            let threshold = self.threshold_of(&rel.xi);
            let a = data.value(rel.to);
            let b = data.value(rel.from);
            let diff: f64 = rel
                .xi
                .iter()
                .enumerate()
                .map(|(r, x)| x * (a[r] - b[r]))
                .sum();
            diff.abs() > threshold
        })
    }

    fn threshold_of(&self, xi: &[f64]) -> f64 {
        self.dirs
            .directions()
            .iter()
            .find(|d| d.xi == xi)
            .map_or(1.0, |d| d.threshold)
    }

    /// Whether the closed cube `i` lies in the open domain.
    pub fn cube_inside(&self, i: &[i64]) -> bool {
        (0..self.dim()).all(|k| {
            let a = self.eps * (self.anchor[k] + i[k] as f64);
            let b = self.eps * (self.anchor[k] + i[k] as f64 + 1.0);
            self.domain.lower()[k] < a && b < self.domain.upper()[k]
        })
    }
}

/// Lowest endpoints `j` (integer lattice indices) of the edges or face
/// diagonals of cube `i` parallel to `ξ`; `j` and `j + ξ` are both vertices.
pub fn edge_pairs(i: &[i64], xi: &[f64], dirs: &DirectionSet) -> Result<Vec<Vec<i64>>> {
    check_lattice_dirs(dirs)?;
    if !dirs.directions().iter().any(|d| d.xi == xi) {
        return Err(Error::NotLatticeDirection(xi.to_vec()));
    }
    let d = i.len();
    let signs = dirs.pair_signs();
    Ok(relations(d, Some(&signs))
        .into_iter()
        .filter(|r| r.xi == xi)
        .map(|r| (0..d).map(|k| i[k] + (r.from >> k & 1) as i64).collect())
        .collect())
}

/// Sample vertices and classify every cube meeting the domain's box.
pub fn classify(
    field: &VectorField,
    eps: f64,
    anchor: &[f64],
    dirs: &DirectionSet,
) -> Result<CubeLattice> {
    let d = field.dim();
    if !(eps > 0.0) {
        return Err(crate::error::invalid("eps", "must be positive"));
    }
    check_anchor(anchor, d)?;
    check_lattice_dirs(dirs)?;
    if dirs.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: dirs.dim(),
        });
    }
    let domain = field
        .support()
        .as_box()
        .ok_or_else(|| Error::Unsupported("lattice approximants need a box domain".into()))?
        .clone();
    let mut lo = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let a = (domain.lower()[k] / eps - anchor[k]).floor() as i64;
        let b = (domain.upper()[k] / eps - anchor[k]).ceil() as i64;
        lo.push(a);
        counts.push((b - a).max(1) as usize);
    }
    let n_vertices: usize = counts.iter().map(|c| c + 1).product();
    let vertex_rows: Vec<Vec<f64>> = par_map_range(n_vertices, |flat| {
        let mut rem = flat;
        let x: Vec<f64> = (0..d)
            .map(|k| {
                let m = counts[k] + 1;
                let j = lo[k] + (rem % m) as i64;
                rem /= m;
                eps * (anchor[k] + j as f64)
            })
            .collect();
        field.eval(&x)
    });
    let samples = vertex_rows.into_iter().flatten().collect();
    let signs = dirs.pair_signs();
    let mut lattice = CubeLattice {
        eps,
        anchor: anchor.to_vec(),
        domain,
        dirs: dirs.clone(),
        lo,
        counts,
        classes: Vec::new(),
        samples,
        relations: relations(d, Some(&signs)),
    };
    let n_cubes: usize = lattice.counts.iter().product();
    let classes = par_map_range(n_cubes, |flat| {
        let i = lattice.cube_index(flat);
        if !lattice.cube_inside(&i) {
            CubeClass::Outside
        } else if lattice.is_bad(&i) {
            CubeClass::Bad
        } else {
            CubeClass::Good
        }
    });
    lattice.classes = classes;
    Ok(lattice)
}

/// Piecewise-multilinear field: the vertex interpolant on GOOD cubes, zero
/// elsewhere.
#[derive(Clone, Debug)]
pub struct Approximant {
    lattice: CubeLattice,
    p: f64,
}

/// Build `u^ε` on a classified lattice.
pub fn build(lattice: CubeLattice, p: f64) -> Result<Approximant> {
    if !(p >= 1.0) {
        return Err(crate::error::invalid("p", "exponent must be at least 1"));
    }
    Ok(Approximant { lattice, p })
}

/// Sample, classify and build in one call.
pub fn approximate(
    field: &VectorField,
    eps: f64,
    anchor: &[f64],
    dirs: &DirectionSet,
    p: f64,
) -> Result<Approximant> {
    build(classify(field, eps, anchor, dirs)?, p)
}

impl Approximant {
    pub fn lattice(&self) -> &CubeLattice {
        &self.lattice
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Index of the cube containing `x`.
    pub fn locate(&self, x: &[f64]) -> Vec<i64> {
        let l = &self.lattice;
        x.iter()
            .zip(&l.anchor)
            .map(|(x, y)| (x / l.eps - y).floor() as i64)
            .collect()
    }

    /// Patch of a GOOD cube.
    pub fn patch(&self, i: &[i64]) -> Option<MultilinearPatch> {
        let l = &self.lattice;
        (l.class_of(i) == CubeClass::Good).then(|| MultilinearPatch {
            data: l.vertex_data(i),
            origin: l.point(i),
            side: l.eps,
        })
    }
}

impl Displacement for Approximant {
    fn dim(&self) -> usize {
        self.lattice.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let i = self.locate(x);
        match self.patch(&i) {
            Some(patch) => patch.eval_into(x, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }
}

/// Energy and bad-set accounting for one approximant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub eps: f64,
    pub p: f64,
    /// `∫_{Ω_ε} |e(u^ε)|^p`.
    pub energy: f64,
    /// `H^{d-1}(∂B^ε ∩ Ω_ε)`.
    pub perimeter: f64,
    /// `H^{d-1}(∂B^ε)`.
    pub perimeter_total: f64,
    /// `|B^ε|`.
    pub bad_volume: f64,
    pub bad_count: usize,
    pub good_count: usize,
    /// `Λ^V` for `p = 1`, `Λ^{p,V}` otherwise.
    pub lambda: f64,
    /// `Σ|ξ|Λ^ξ` (or its `p` variant).
    pub m: f64,
    /// `(energy + perimeter) / lambda`; `0/0` is reported as 0.
    pub ratio: f64,
    pub ratio_infinite: bool,
}

fn clipped_energy(data: &CubeVertexData, lo: &[f64], hi: &[f64], p: f64) -> f64 {
    let d = data.dim();
    let (nodes, weights) = gauss_legendre_unit(16);
    let total = nodes.len().pow(d as u32);
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mut x = vec![0.0; d];
    let terms: Vec<f64> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut w = 1.0;
            for k in 0..d {
                let idx = rem % nodes.len();
                rem /= nodes.len();
                x[k] = lo[k] + nodes[idx] * (hi[k] - lo[k]);
                w *= weights[idx];
            }
            w * crate::interpolation::sym_gradient(data, &x).norm().powf(p)
        })
        .collect();
    tree_sum(&terms) * vol
}

/// Sum the GOOD-cube energies over `Ω_ε` and count exposed BAD faces.
pub fn energy_report(appr: &Approximant, energies: &DirectionalEnergy) -> EnergyReport {
    let l = &appr.lattice;
    let p = appr.p;
    let d = l.dim();
    let eps = l.eps;
    let inner = l.domain.inner_region(eps);
    let q = default_order(d, p);
    let scale = eps.powf(d as f64 - p);
    let rows: Vec<(f64, f64, f64)> = par_map_range(l.len(), |flat| {
        let i = l.cube_index(flat);
        match l.classes[flat] {
            CubeClass::Outside => (0.0, 0.0, 0.0),
            CubeClass::Good => {
                if inner.is_empty() {
                    return (0.0, 0.0, 0.0);
                }
                let origin = l.point(&i);
                let mut lo = vec![0.0; d];
                let mut hi = vec![1.0; d];
                for k in 0..d {
                    lo[k] = ((inner.lower()[k] - origin[k]) / eps).clamp(0.0, 1.0);
                    hi[k] = ((inner.upper()[k] - origin[k]) / eps).clamp(0.0, 1.0);
                }
                if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
                    return (0.0, 0.0, 0.0);
                }
                let data = l.vertex_data(&i);
                let full = lo.iter().all(|a| *a == 0.0) && hi.iter().all(|b| *b == 1.0);
                let e = if full {
                    cube_energy(&data, p, q)
                } else {
                    clipped_energy(&data, &lo, &hi, p)
                };
                (e * scale, 0.0, 0.0)
            }
            CubeClass::Bad => {
                let mut exposed = 0.0;
                let mut exposed_inner = 0.0;
                let origin = l.point(&i);
                for k in 0..d {
                    for step in [-1i64, 1] {
                        let mut nb = i.clone();
                        nb[k] += step;
                        if l.class_of(&nb) == CubeClass::Bad {
                            continue;
                        }
                        exposed += 1.0;
                        let mut center: Vec<f64> = origin.iter().map(|o| o + 0.5 * eps).collect();
                        center[k] = origin[k] + if step > 0 { eps } else { 0.0 };
                        if inner.contains(&center) {
                            exposed_inner += 1.0;
                        }
                    }
                }
                (0.0, exposed, exposed_inner)
            }
        }
    });
    let energy = tree_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let face = eps.powi(d as i32 - 1);
    let perimeter_total = face * rows.iter().map(|r| r.1).sum::<f64>();
    let perimeter = face * rows.iter().map(|r| r.2).sum::<f64>();
    let bad_count = l.count(CubeClass::Bad);
    let lambda = energies.lambda_for_p();
    let numerator = energy + perimeter;
    let (ratio, ratio_infinite) = if lambda > 0.0 {
        (numerator / lambda, false)
    } else if numerator <= 1e-12 {
        // rounding on a rigid field
        (0.0, false)
    } else {
        (f64::INFINITY, true)
    };
    EnergyReport {
        eps,
        p,
        energy,
        perimeter,
        perimeter_total,
        bad_volume: bad_count as f64 * eps.powi(d as i32),
        bad_count,
        good_count: l.count(CubeClass::Good),
        lambda,
        m: energies.m_for_p(),
        ratio,
        ratio_infinite,
    }
}

/// Worst per-cube ratio `∫_Q|e|^p / (ε^{d-p} Σ|ξ·Δu|^p)` over GOOD cubes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerCubeCheck {
    pub max_ratio: f64,
    pub violations: usize,
    pub checked: usize,
}

/// Compare every GOOD cube's energy with `c_korn` times its difference sum.
pub fn per_cube_check(appr: &Approximant, c_korn: f64) -> PerCubeCheck {
    let l = &appr.lattice;
    let d = l.dim();
    let p = appr.p;
    let q = default_order(d, p);
    let signs = l.dirs.pair_signs();
    let ratios: Vec<Option<(f64, bool)>> = par_map_range(l.len(), |flat| {
        if l.classes[flat] != CubeClass::Good {
            return None;
        }
        let data = l.vertex_data(&l.cube_index(flat));
        // the ε^{d-p} factors of both sides cancel
        let e = cube_energy(&data, p, q);
        let r = fd_rhs(&data, p, Some(&signs));
        // rounding floor on rigid data, scaled to the vertex magnitudes
        let scale = data.flatten().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = 1e-24 * (1.0 + scale).powf(p);
        if e <= floor {
            return Some((0.0, false));
        }
        let ratio = if r > 0.0 { e / r } else { f64::INFINITY };
        Some((ratio, e > c_korn * r * (1.0 + 1e-9) + floor))
    });
    let mut out = PerCubeCheck {
        max_ratio: 0.0,
        violations: 0,
        checked: 0,
    };
    for (r, violated) in ratios.into_iter().flatten() {
        out.checked += 1;
        out.max_ratio = out.max_ratio.max(r);
        out.violations += violated as usize;
    }
    out
}

/// Plain-text dump: lattice parameters, per-cube class and vertex values.
pub fn dump(appr: &Approximant) -> String {
    let l = &appr.lattice;
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.17e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(s, "d {}", l.dim());
    let _ = writeln!(s, "eps {:.17e}", l.eps);
    let _ = writeln!(s, "p {}", appr.p);
    let _ = writeln!(s, "anchor {}", join(&l.anchor));
    let _ = writeln!(s, "lower {}", join(l.domain.lower()));
    let _ = writeln!(s, "upper {}", join(l.domain.upper()));
    for flat in 0..l.len() {
        let i = l.cube_index(flat);
        let idx: Vec<String> = i.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "cube {} {}", idx.join(" "), l.classes[flat].label());
    }
    let d = l.dim();
    let n: usize = l.counts.iter().map(|c| c + 1).product();
    for flat in 0..n {
        let mut rem = flat;
        let j: Vec<i64> = (0..d)
            .map(|k| {
                let m = l.counts[k] + 1;
                let v = l.lo[k] + (rem % m) as i64;
                rem /= m;
                v
            })
            .collect();
        let idx: Vec<String> = j.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "vertex {} {}", idx.join(" "), join(l.sample(&j)));
    }
    s
}

/// One line of a convergence sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub report: EnergyReport,
    pub anchor: AnchorDiagnostics,
    /// `|{x ∈ Ω ∩ B_R : |u^ε − u| > η}|`.
    pub discrepancy: f64,
    pub probe_step: f64,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub eta: f64,
    pub radius: f64,
    pub quad: Quadrature,
    pub anchor: AnchorOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            eta: 0.01,
            radius: 1e6,
            quad: Quadrature::default(),
            anchor: AnchorOptions::default(),
        }
    }
}

/// Anchor, approximate and report at every `ε`.
pub fn convergence_sweep(
    field: &VectorField,
    eps_list: &[f64],
    dirs: &DirectionSet,
    p: f64,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    let energies = lambda_v(field, dirs, &opts.quad, p)?;
    sweep_with_energy(field, eps_list, dirs, &energies, opts)
}

/// [`convergence_sweep`] with precomputed directional energies.
pub fn sweep_with_energy(
    field: &VectorField,
    eps_list: &[f64],
    dirs: &DirectionSet,
    energies: &DirectionalEnergy,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    let p = energies.p;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (y, diag) = select_anchor(field, eps, dirs, energies, &opts.anchor)?;
        let appr = approximate(field, eps, &y, dirs, p)?;
        let report = energy_report(&appr, energies);
        let step = opts.anchor.probe_step.unwrap_or(eps / 8.0).min(eps / 8.0);
        let discrepancy =
            measure_discrepancy(field, &appr, field.domain(), opts.radius, opts.eta, step)?;
        rows.push(SweepRow {
            report,
            anchor: diag,
            discrepancy,
            probe_step: step,
        });
    }
    Ok(rows)
}
