//! Kernel discretizations `u^ε_y`, truncations `T_k`, the quality functional
//! `Φ_ε(y)` and anchor selection.
//!
//! Fields are extended by zero outside their support, so every integral
//! below runs over the support inflated by `ε` (the union of all kernel
//! supports centred at points of the closed domain).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field_model::{BoxDomain, DirectionSet, Displacement, VectorField};
use crate::interpolation::relations;
use crate::linalg::norm;
use crate::reduce::{par_map_range, tree_sum};
use crate::slicing::DirectionalEnergy;

/// `T_k(t) = t (1 ∧ k/|t|)`: radial clamp to the closed ball of radius `k`.
pub fn truncate(t: &[f64], k: f64) -> Vec<f64> {
    let mut out = t.to_vec();
    truncate_in_place(&mut out, k);
    out
}

pub fn truncate_in_place(t: &mut [f64], k: f64) {
    let n = norm(t);
    if n > k {
        let s = k / n;
        t.iter_mut().for_each(|x| *x *= s);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Kernel {
    /// `χ_{[−½,½)^d}`: value of the nearest lattice point.
    Indicator,
    /// `Π_i (1 − |x_i|)^+`: multilinear interpolation of lattice values.
    Hat,
}

/// `Σ_{x̄} u(x̄) K((x − x̄)/ε)` over the anchored lattice `x̄ = ε(y + j)`.
#[derive(Clone, Debug)]
pub struct KernelDiscretization {
    field: VectorField,
    eps: f64,
    anchor: Vec<f64>,
    kernel: Kernel,
}

pub fn kernel_discretize(
    field: &VectorField,
    eps: f64,
    anchor: &[f64],
    kernel: Kernel,
) -> Result<KernelDiscretization> {
    check_eps_anchor(eps, anchor, field.dim())?;
    Ok(KernelDiscretization {
        field: field.clone(),
        eps,
        anchor: anchor.to_vec(),
        kernel,
    })
}

fn check_eps_anchor(eps: f64, anchor: &[f64], d: usize) -> Result<()> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if anchor.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: anchor.len(),
        });
    }
    if anchor.iter().any(|y| !(0.0..1.0).contains(y)) {
        return Err(invalid("anchor", "components must lie in [0, 1)"));
    }
    Ok(())
}

/// Index of the lattice point whose indicator cell contains `x`.
fn indicator_index(x: f64, eps: f64, y: f64) -> i64 {
    (x / eps - y + 0.5).floor() as i64
}

impl KernelDiscretization {
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    fn point(&self, j: &[i64]) -> Vec<f64> {
        j.iter()
            .zip(&self.anchor)
            .map(|(j, y)| self.eps * (y + *j as f64))
            .collect()
    }

    /// Number of lattice points with nonzero kernel weight at `x`.
    pub fn touched(&self, x: &[f64]) -> usize {
        match self.kernel {
            Kernel::Indicator => 1,
            Kernel::Hat => {
                let t: Vec<f64> = x
                    .iter()
                    .zip(&self.anchor)
                    .map(|(x, y)| x / self.eps - y)
                    .collect();
                t.iter()
                    .map(|t| if t.fract() == 0.0 { 1 } else { 2 })
                    .product()
            }
        }
    }
}

impl Displacement for KernelDiscretization {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match self.kernel {
            Kernel::Indicator => {
                let j: Vec<i64> = (0..d)
                    .map(|k| indicator_index(x[k], self.eps, self.anchor[k]))
                    .collect();
                self.field.eval_into(&self.point(&j), out);
            }
            Kernel::Hat => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut j0 = vec![0i64; d];
                let mut t = vec![0.0; d];
                for k in 0..d {
                    let s = x[k] / self.eps - self.anchor[k];
                    j0[k] = s.floor() as i64;
                    t[k] = s - j0[k] as f64;
                }
                let mut j = vec![0i64; d];
                let mut v = vec![0.0; d];
                for w in 0..1usize << d {
                    let mut b = 1.0;
                    for k in 0..d {
                        let on = w >> k & 1 == 1;
                        j[k] = j0[k] + on as i64;
                        b *= if on { t[k] } else { 1.0 - t[k] };
                    }
                    if b == 0.0 {
                        continue;
                    }
                    self.field.eval_into(&self.point(&j), &mut v);
                    for (o, vi) in out.iter_mut().zip(&v) {
                        *o += b * vi;
                    }
                }
            }
        }
    }
}

/// `Σ_{x̄} Δ((x − x̄)/ε)` summed over every lattice point within one cell
/// of `x`, straight from the kernel formula.
pub fn hat_weight_sum(eps: f64, anchor: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let base: Vec<i64> = (0..d)
        .map(|k| (x[k] / eps - anchor[k]).floor() as i64)
        .collect();
    let mut total = 0.0;
    for code in 0..3usize.pow(d as u32) {
        let mut rem = code;
        let mut w = 1.0;
        for k in 0..d {
            let off = (rem % 3) as i64 - 1;
            rem /= 3;
            let xbar = eps * (anchor[k] + (base[k] + off) as f64);
            w *= (1.0 - ((x[k] - xbar) / eps).abs()).max(0.0);
        }
        total += w;
    }
    total
}

/// Lattice values `u(ε(y + j))` over a block of indices.
struct LatticeCache {
    lo: Vec<i64>,
    counts: Vec<usize>,
    values: Vec<f64>,
    sup: f64,
}

impl LatticeCache {
    fn new(field: &VectorField, eps: f64, y: &[f64], region: &BoxDomain) -> Self {
        let d = field.dim();
        let mut lo = Vec::with_capacity(d);
        let mut counts = Vec::with_capacity(d);
        for k in 0..d {
            let a = (region.lower()[k] / eps - y[k]).floor() as i64 - 1;
            let b = (region.upper()[k] / eps - y[k]).ceil() as i64 + 1;
            lo.push(a);
            counts.push((b - a + 1) as usize);
        }
        let n: usize = counts.iter().product();
        let mut values = vec![0.0; n * d];
        let mut x = vec![0.0; d];
        let mut sup: f64 = 0.0;
        for flat in 0..n {
            let mut rem = flat;
            for k in 0..d {
                x[k] = eps * (y[k] + (lo[k] + (rem % counts[k]) as i64) as f64);
                rem /= counts[k];
            }
            let out = &mut values[flat * d..(flat + 1) * d];
            field.eval_into(&x, out);
            sup = sup.max(norm(out));
        }
        Self {
            lo,
            counts,
            values,
            sup,
        }
    }

    fn get(&self, j: &[i64]) -> &[f64] {
        let d = j.len();
        let mut flat = 0;
        let mut stride = 1;
        for k in 0..d {
            let off = (j[k] - self.lo[k]).clamp(0, self.counts[k] as i64 - 1) as usize;
            flat += off * stride;
            stride *= self.counts[k];
        }
        &self.values[flat * d..(flat + 1) * d]
    }
}

/// Precomputed probe grid for `Φ_ε`; reusable across anchors.
pub struct PhiEstimator<'a> {
    field: &'a VectorField,
    eps: f64,
    region: BoxDomain,
    steps: Vec<f64>,
    counts: Vec<usize>,
    probe_u: Vec<f64>,
    probe_r: Vec<f64>,
    probe_sup: f64,
    k_max: usize,
}

impl<'a> PhiEstimator<'a> {
    /// `probe_step` defaults to `ε/8` and is capped there.
    pub fn new(field: &'a VectorField, eps: f64, probe_step: Option<f64>) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        let target = probe_step.unwrap_or(eps / 8.0).min(eps / 8.0);
        if !(target > 0.0) {
            return Err(invalid("probe_step", "must be positive"));
        }
        let d = field.dim();
        let region = field.domain().inflate(eps);
        let mut steps = Vec::with_capacity(d);
        let mut counts = Vec::with_capacity(d);
        for k in 0..d {
            let n = (region.side(k) / target).ceil().max(1.0) as usize;
            counts.push(n);
            steps.push(region.side(k) / n as f64);
        }
        let n: usize = counts.iter().product();
        let mut probe_u = vec![0.0; n * d];
        let mut probe_r = vec![0.0; n];
        let mut x = vec![0.0; d];
        let mut sup: f64 = 0.0;
        for flat in 0..n {
            let mut rem = flat;
            for k in 0..d {
                x[k] = region.lower()[k] + ((rem % counts[k]) as f64 + 0.5) * steps[k];
                rem /= counts[k];
            }
            let out = &mut probe_u[flat * d..(flat + 1) * d];
            field.eval_into(&x, out);
            sup = sup.max(norm(out));
            probe_r[flat] = norm(&x);
        }
        let reach = region.corners().iter().map(|c| norm(c)).fold(0.0, f64::max);
        Ok(Self {
            field,
            eps,
            steps,
            counts,
            probe_u,
            probe_r,
            probe_sup: sup,
            k_max: (reach.ceil() as usize).max(1),
            region,
        })
    }

    pub fn probe_step(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    pub fn probe_count(&self) -> usize {
        self.probe_r.len()
    }

    /// Number of series terms kept (`K_max + 4`).
    pub fn terms(&self) -> usize {
        self.k_max + 4
    }

    /// Bound on the dropped tail `Σ_{k>K} 2^{-k} ∫_{B_k}(…) ≤ 4|S|(K+2)/2^K`.
    pub fn tail_bound(&self) -> f64 {
        let k = self.terms() as f64;
        4.0 * self.region.volume() * (k + 2.0) / 2f64.powf(k)
    }

    fn probe_point(&self, flat: usize, x: &mut [f64]) {
        let mut rem = flat;
        for k in 0..x.len() {
            x[k] = self.region.lower()[k] + ((rem % self.counts[k]) as f64 + 0.5) * self.steps[k];
            rem /= self.counts[k];
        }
    }

    /// `Φ_ε(y)` truncated after `K_max + 4` terms.
    pub fn phi(&self, y: &[f64]) -> Result<f64> {
        check_eps_anchor(self.eps, y, self.field.dim())?;
        let d = self.field.dim();
        let cache = LatticeCache::new(self.field, self.eps, y, &self.region);
        let big_k = self.terms();
        // from k_sat on, T_k is the identity on every value involved
        let k_sat = (self.probe_sup.max(cache.sup).ceil() as usize).max(1);
        let weights = SeriesWeights::new(k_sat, big_k);
        let axes: Vec<AxisTable> = (0..d).map(|k| AxisTable::new(self, &cache, y, k)).collect();
        let cell: f64 = self.steps.iter().product();
        let sum = match d {
            1 => self.phi_rows::<1, 2>(&cache, &axes, &weights),
            2 => self.phi_rows::<2, 4>(&cache, &axes, &weights),
            3 => self.phi_rows::<3, 8>(&cache, &axes, &weights),
            4 => self.phi_rows::<4, 16>(&cache, &axes, &weights),
            _ => return Err(Error::Unsupported(format!("Φ_ε in dimension {d}"))),
        };
        Ok(sum * cell)
    }

    /// Sum of the integrand over all probes; `N = 2^D` corners per cell.
    fn phi_rows<const D: usize, const N: usize>(
        &self,
        cache: &LatticeCache,
        axes: &[AxisTable],
        weights: &SeriesWeights,
    ) -> f64 {
        let mut corner_offsets = [0usize; N];
        for (w, o) in corner_offsets.iter_mut().enumerate() {
            *o = (0..D)
                .filter(|k| w >> k & 1 == 1)
                .map(|k| axes[k].stride)
                .sum();
        }
        let per_row = self.counts[0];
        let rows = self.probe_count() / per_row;
        let values = &cache.values;
        let partial = par_map_range(rows, |row| {
            let mut terms = Vec::with_capacity(per_row);
            // offsets and blend coordinates shared by the whole row
            let mut base0 = 0;
            let mut basei = 0;
            let mut rem = row;
            let mut tail = [0.0; D];
            for k in 1..D {
                let m = rem % self.counts[k];
                rem /= self.counts[k];
                base0 += axes[k].off0[m];
                basei += axes[k].offi[m];
                tail[k] = axes[k].t[m];
            }
            let mut blend = [0.0; N];
            let mut corners = [[0.0; D]; N];
            let mut q = [0.0; D];
            let mut u = [0.0; D];
            for c in 0..per_row {
                let flat = row * per_row + c;
                let start = base0 + axes[0].off0[c];
                tail[0] = axes[0].t[c];
                for w in 0..N {
                    let mut b = 1.0;
                    for (k, t) in tail.iter().enumerate() {
                        b *= if w >> k & 1 == 1 { *t } else { 1.0 - t };
                    }
                    blend[w] = b;
                    let at = (start + corner_offsets[w]) * D;
                    corners[w].copy_from_slice(&values[at..at + D]);
                }
                let qi = (basei + axes[0].offi[c]) * D;
                q.copy_from_slice(&values[qi..qi + D]);
                u.copy_from_slice(&self.probe_u[flat * D..(flat + 1) * D]);
                terms.push(integrand(
                    &u,
                    self.probe_r[flat],
                    &q,
                    &blend,
                    &corners,
                    weights,
                ));
            }
            tree_sum(&terms)
        });
        tree_sum(&partial)
    }

    /// `(‖T_k(v_ℓ) − T_k(u)‖, ‖v_ℓ − T_ℓ(u)‖)` in `L¹(B_k)` where `v_ℓ` is the
    /// kernel discretization of `T_ℓ(u)`; the first never exceeds the second.
    pub fn truncation_chain(
        &self,
        y: &[f64],
        k: f64,
        l: f64,
        kernel: Kernel,
    ) -> Result<(f64, f64)> {
        check_eps_anchor(self.eps, y, self.field.dim())?;
        let cache = LatticeCache::new(self.field, self.eps, y, &self.region);
        let d = self.field.dim();
        let cell: f64 = self.steps.iter().product();
        let rows: Vec<(f64, f64)> = par_map_range(self.probe_count(), |flat| {
            if self.probe_r[flat] >= k {
                return (0.0, 0.0);
            }
            let mut ws = Workspace::new(d);
            self.probe_point(flat, &mut ws.x);
            let u = &self.probe_u[flat * d..(flat + 1) * d];
            let mut v = vec![0.0; d];
            match kernel {
                Kernel::Indicator => {
                    for i in 0..d {
                        ws.ji[i] = indicator_index(ws.x[i], self.eps, y[i]);
                    }
                    v = truncate(cache.get(&ws.ji), l);
                }
                Kernel::Hat => {
                    for i in 0..d {
                        let s = ws.x[i] / self.eps - y[i];
                        ws.j0[i] = s.floor() as i64;
                        ws.t[i] = s - ws.j0[i] as f64;
                    }
                    for w in 0..1usize << d {
                        let mut b = 1.0;
                        for i in 0..d {
                            let on = w >> i & 1 == 1;
                            ws.j[i] = ws.j0[i] + on as i64;
                            b *= if on { ws.t[i] } else { 1.0 - ws.t[i] };
                        }
                        let c = truncate(cache.get(&ws.j), l);
                        for i in 0..d {
                            v[i] += b * c[i];
                        }
                    }
                }
            }
            let lhs = dist(&truncate(&v, k), &truncate(u, k));
            let rhs = dist(&v, &truncate(u, l));
            (lhs, rhs)
        });
        let lhs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        Ok((tree_sum(&lhs) * cell, tree_sum(&rhs) * cell))
    }
}

fn norm_fixed<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Σ_k 2^{-k}[r < k](|T_k(u(x̄_Q)) − T_k(u)| + |Σ_w b_w T_k(u(x̄_w)) − T_k(u)|)`
/// at one probe.
fn integrand<const D: usize, const N: usize>(
    u: &[f64; D],
    r: f64,
    q: &[f64; D],
    blend: &[f64; N],
    corners: &[[f64; D]; N],
    weights: &SeriesWeights,
) -> f64 {
    let u_norm = norm_fixed(u);
    let q_norm = norm_fixed(q);
    let mut corner_norms = [0.0; N];
    for (n, c) in corner_norms.iter_mut().zip(corners) {
        *n = norm_fixed(c);
    }
    let mut total = 0.0;
    let mut scale = 1.0;
    for k in 1..weights.k_sat.min(weights.big_k + 1) {
        scale *= 0.5;
        if r >= k as f64 {
            continue;
        }
        let kf = k as f64;
        let su = clamp_scale(u_norm, kf);
        let sq = clamp_scale(q_norm, kf);
        let mut h = [0.0; D];
        for w in 0..N {
            let b = blend[w] * clamp_scale(corner_norms[w], kf);
            for i in 0..D {
                h[i] += b * corners[w][i];
            }
        }
        let mut eq = 0.0;
        let mut eh = 0.0;
        for i in 0..D {
            let tu = su * u[i];
            eq += (sq * q[i] - tu).powi(2);
            eh += (h[i] - tu).powi(2);
        }
        total += scale * (eq.sqrt() + eh.sqrt());
    }
    let weight = weights.saturated(r);
    if weight > 0.0 {
        let mut h = [0.0; D];
        for w in 0..N {
            for i in 0..D {
                h[i] += blend[w] * corners[w][i];
            }
        }
        let mut eq = 0.0;
        let mut eh = 0.0;
        for i in 0..D {
            eq += (q[i] - u[i]).powi(2);
            eh += (h[i] - u[i]).powi(2);
        }
        total += weight * (eq.sqrt() + eh.sqrt());
    }
    total
}

/// `W(r) = Σ_{k_sat ≤ k ≤ K} 2^{-k} [r < k]` tabulated by `⌊r⌋`.
struct SeriesWeights {
    k_sat: usize,
    big_k: usize,
    table: Vec<f64>,
}

impl SeriesWeights {
    fn new(k_sat: usize, big_k: usize) -> Self {
        let table = (0..=big_k)
            .map(|m| {
                (k_sat.max(m + 1)..=big_k)
                    .map(|k| 0.5f64.powi(k as i32))
                    .sum()
            })
            .collect();
        Self {
            k_sat,
            big_k,
            table,
        }
    }

    fn saturated(&self, r: f64) -> f64 {
        // r < k  ⇔  k ≥ ⌊r⌋ + 1
        self.table.get(r.floor() as usize).copied().unwrap_or(0.0)
    }
}

/// Per-axis lattice offsets and blend coordinates of every probe column.
struct AxisTable {
    stride: usize,
    off0: Vec<usize>,
    offi: Vec<usize>,
    t: Vec<f64>,
}

impl AxisTable {
    fn new(est: &PhiEstimator<'_>, cache: &LatticeCache, y: &[f64], k: usize) -> Self {
        let stride: usize = cache.counts[..k].iter().product();
        let n = est.counts[k];
        let mut off0 = Vec::with_capacity(n);
        let mut offi = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let top = cache.counts[k] as i64 - 1;
        for m in 0..n {
            let x = est.region.lower()[k] + (m as f64 + 0.5) * est.steps[k];
            let s = x / est.eps - y[k];
            let j0 = s.floor() as i64;
            let ji = (s + 0.5).floor() as i64;
            off0.push((j0 - cache.lo[k]).clamp(0, top - 1) as usize * stride);
            offi.push((ji - cache.lo[k]).clamp(0, top) as usize * stride);
            t.push(s - j0 as f64);
        }
        Self {
            stride,
            off0,
            offi,
            t,
        }
    }
}

struct Workspace {
    x: Vec<f64>,
    t: Vec<f64>,
    j0: Vec<i64>,
    j: Vec<i64>,
    ji: Vec<i64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            t: vec![0.0; d],
            j0: vec![0; d],
            j: vec![0; d],
            ji: vec![0; d],
        }
    }
}

/// Factor with `T_k(t) = s t` for `|t| = n`.
fn clamp_scale(n: f64, k: f64) -> f64 {
    if n > k {
        k / n
    } else {
        1.0
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `Φ_ε(y)` for a single anchor.
pub fn phi_epsilon(
    field: &VectorField,
    eps: f64,
    y: &[f64],
    probe_step: Option<f64>,
) -> Result<f64> {
    PhiEstimator::new(field, eps, probe_step)?.phi(y)
}

/// Discrete anchor energy
/// `ε^{d-1} Σ_ξ Σ_j (|ξ·(u(x_j + εξ) − u(x_j))| ∧ β_ξ)` over lattice points
/// `x_j = ε(y + j)` with both ends in the open domain; for `p > 1` the
/// summand is `|ξ·Δu|^p ∧ 1`.
pub fn energy_avg(
    field: &VectorField,
    eps: f64,
    y: &[f64],
    dirs: &DirectionSet,
    p: f64,
) -> Result<f64> {
    check_eps_anchor(eps, y, field.dim())?;
    let d = field.dim();
    let domain = field.domain();
    let cache = LatticeCache::new(field, eps, y, domain);
    let offsets: Vec<(Vec<i64>, &[f64], f64)> = dirs
        .directions()
        .iter()
        .map(|dir| {
            let off = dir.xi.iter().map(|x| x.round() as i64).collect();
            (off, dir.xi.as_slice(), dir.threshold)
        })
        .collect();
    if offsets
        .iter()
        .any(|(o, xi, _)| o.iter().zip(xi.iter()).any(|(a, b)| *a as f64 != *b))
    {
        return Err(Error::NotLatticeDirection(dirs.directions()[0].xi.clone()));
    }
    let mut lo = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let a = (domain.lower()[k] / eps - y[k]).floor() as i64;
        let b = (domain.upper()[k] / eps - y[k]).ceil() as i64;
        lo.push(a);
        counts.push((b - a + 1) as usize);
    }
    let n: usize = counts.iter().product();
    let inside = |j: &[i64]| -> bool {
        (0..d).all(|k| {
            let x = eps * (y[k] + j[k] as f64);
            domain.lower()[k] < x && x < domain.upper()[k]
        })
    };
    let terms: Vec<f64> = (0..n)
        .map(|flat| {
            let mut rem = flat;
            let j: Vec<i64> = (0..d)
                .map(|k| {
                    let v = lo[k] + (rem % counts[k]) as i64;
                    rem /= counts[k];
                    v
                })
                .collect();
            if !inside(&j) {
                return 0.0;
            }
            let a = cache.get(&j);
            let mut acc = 0.0;
            for (off, xi, beta) in &offsets {
                let t: Vec<i64> = j.iter().zip(off).map(|(a, b)| a + b).collect();
                if !inside(&t) {
                    continue;
                }
                let b = cache.get(&t);
                let diff: f64 = (0..d).map(|r| xi[r] * (b[r] - a[r])).sum::<f64>().abs();
                acc += if p == 1.0 {
                    diff.min(*beta)
                } else {
                    diff.powf(p).min(1.0)
                };
            }
            acc
        })
        .collect();
    Ok(eps.powi(d as i32 - 1) * tree_sum(&terms))
}

/// Absolute slack on both anchor predicates, absorbing rounding when the
/// right-hand side vanishes (rigid fields).
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Everything known about one candidate anchor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnchorDiagnostics {
    pub y: Vec<f64>,
    pub phi: f64,
    /// Candidate mean of `Φ_ε`, the estimate of `∫_Q Φ_ε`.
    pub mean_phi: f64,
    /// `√mean_phi`.
    pub threshold: f64,
    pub in_q_eps: bool,
    pub energy_avg: f64,
    /// `2M` (or `2M_p`).
    pub two_m: f64,
    pub in_q_upper: bool,
    pub tail_bound: f64,
}

impl AnchorDiagnostics {
    pub fn feasible(&self) -> bool {
        self.in_q_eps && self.in_q_upper
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorOptions {
    pub n_candidates: usize,
    pub seed: u64,
    /// Probe step for `Φ_ε`; `ε/8` when absent (never coarser).
    pub probe_step: Option<f64>,
}

impl Default for AnchorOptions {
    fn default() -> Self {
        Self {
            n_candidates: 16,
            seed: 0,
            probe_step: None,
        }
    }
}

/// Candidate `c` of a seeded stream, uniform in `[0,1)^d`; independent of
/// how many candidates are drawn or evaluated in parallel.
pub fn candidate(seed: u64, c: usize, d: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(c as u64);
    (0..d).map(|_| rng.random::<f64>()).collect()
}

/// Evaluate both anchor predicates on every candidate.
pub fn anchor_diagnostics(
    field: &VectorField,
    eps: f64,
    dirs: &DirectionSet,
    energies: &DirectionalEnergy,
    opts: &AnchorOptions,
) -> Result<Vec<AnchorDiagnostics>> {
    if opts.n_candidates < 4 {
        return Err(invalid(
            "n_candidates",
            "at least 4 candidates are required",
        ));
    }
    let d = field.dim();
    let est = PhiEstimator::new(field, eps, opts.probe_step)?;
    let p = energies.p;
    let two_m = 2.0 * energies.m_for_p();
    let rows: Vec<Result<(Vec<f64>, f64, f64)>> = (0..opts.n_candidates)
        .map(|c| {
            let y = candidate(opts.seed, c, d);
            let phi = est.phi(&y)?;
            let e = energy_avg(field, eps, &y, dirs, p)?;
            Ok((y, phi, e))
        })
        .collect();
    let rows: Vec<(Vec<f64>, f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let phis: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mean_phi = tree_sum(&phis) / phis.len() as f64;
    let threshold = mean_phi.sqrt();
    let tail_bound = est.tail_bound();
    Ok(rows
        .into_iter()
        .map(|(y, phi, e)| AnchorDiagnostics {
            y,
            phi,
            mean_phi,
            threshold,
            in_q_eps: phi <= threshold + FEASIBILITY_TOL,
            energy_avg: e,
            two_m,
            in_q_upper: e <= two_m + FEASIBILITY_TOL,
            tail_bound,
        })
        .collect())
}

/// First candidate satisfying `Φ_ε(y) ≤ √mean` and `energy_avg(y) ≤ 2M`.
pub fn select_anchor(
    field: &VectorField,
    eps: f64,
    dirs: &DirectionSet,
    energies: &DirectionalEnergy,
    opts: &AnchorOptions,
) -> Result<(Vec<f64>, AnchorDiagnostics)> {
    let diags = anchor_diagnostics(field, eps, dirs, energies, opts)?;
    if let Some(d) = diags.iter().find(|d| d.feasible()) {
        return Ok((d.y.clone(), d.clone()));
    }
    let best_phi = diags.iter().map(|d| d.phi).fold(f64::INFINITY, f64::min);
    let best_energy = diags
        .iter()
        .map(|d| d.energy_avg)
        .fold(f64::INFINITY, f64::min);
    Err(Error::NoFeasibleAnchor {
        tried: diags.len(),
        best_phi,
        threshold: diags[0].threshold,
        best_energy,
        two_m: diags[0].two_m,
    })
}

/// Lebesgue measure of `{x ∈ region ∩ B_R : |u(x) − v(x)| > η}` by counting
/// cell-centred probes of step `≤ step`.
pub fn measure_discrepancy(
    u: &dyn Displacement,
    v: &dyn Displacement,
    region: &BoxDomain,
    radius: f64,
    eta: f64,
    step: f64,
) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(invalid("eta", "must be positive"));
    }
    if !(step > 0.0) {
        return Err(invalid("step", "must be positive"));
    }
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    let d = region.dim();
    let counts: Vec<usize> = (0..d)
        .map(|k| (region.side(k) / step).ceil().max(1.0) as usize)
        .collect();
    let steps: Vec<f64> = (0..d).map(|k| region.side(k) / counts[k] as f64).collect();
    let per_row = counts[0];
    let rows = counts.iter().product::<usize>() / per_row;
    let hits: Vec<usize> = par_map_range(rows, |row| {
        let mut x = vec![0.0; d];
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        let mut n = 0;
        for c in 0..per_row {
            let mut rem = row * per_row + c;
            for k in 0..d {
                x[k] = region.lower()[k] + ((rem % counts[k]) as f64 + 0.5) * steps[k];
                rem /= counts[k];
            }
            if norm(&x) >= radius {
                continue;
            }
            u.eval_into(&x, &mut a);
            v.eval_into(&x, &mut b);
            if dist(&a, &b) > eta {
                n += 1;
            }
        }
        n
    });
    let cell: f64 = steps.iter().product();
    Ok(hits.iter().sum::<usize>() as f64 * cell)
}

/// Worst-case number of BAD cubes implied by an anchor energy: every BAD
/// cube holds a pair whose capped difference is at least `min β` (or
/// `min β^p ∧ 1`).
pub fn bad_count_bound(two_m: f64, dirs: &DirectionSet, p: f64) -> f64 {
    let floor = dirs
        .directions()
        .iter()
        .map(|d| {
            if p == 1.0 {
                d.threshold
            } else {
                d.threshold.powf(p).min(1.0)
            }
        })
        .fold(f64::INFINITY, f64::min);
    two_m / floor
}

/// Number of distinct pair relations per cube (edges plus diagonals).
pub fn pairs_per_cube(d: usize) -> usize {
    relations(d, None).len()
}
