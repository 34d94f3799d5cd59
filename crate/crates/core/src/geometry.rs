//! Convex polytopes in dimension 2 and 3 given by linear inequalities.
//!
//! Only what the exact energy oracle needs: vertex enumeration, interior
//! test, and measure/centroid of lower-dimensional convex pieces.

use crate::linalg::{dot, norm};

const TOL: f64 = 1e-9;

/// Closed half-space `normal · x ≤ offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Constraint {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn flipped(&self) -> Self {
        Self {
            normal: self.normal.iter().map(|x| -x).collect(),
            offset: -self.offset,
        }
    }

    fn slack(&self, x: &[f64]) -> f64 {
        (self.offset - dot(&self.normal, x)) / norm(&self.normal).max(1e-300)
    }
}

fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let m = nalgebra::DMatrix::from_fn(d, d, |r, c| a[r][c]);
    let lu = m.lu();
    let x = lu.solve(&nalgebra::DVector::from_column_slice(b))?;
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Vertices of the bounded polytope `{x : all constraints}` (deduplicated).
pub fn vertices(constraints: &[Constraint], d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for combo in combinations(constraints.len(), d) {
        let a: Vec<Vec<f64>> = combo
            .iter()
            .map(|&i| constraints[i].normal.clone())
            .collect();
        let b: Vec<f64> = combo.iter().map(|&i| constraints[i].offset).collect();
        // skip (near) parallel plane sets
        let m = nalgebra::DMatrix::from_fn(d, d, |r, c| a[r][c]);
        if m.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = solve(&a, &b) else { continue };
        if constraints.iter().all(|c| c.slack(&x) >= -TOL)
            && !out
                .iter()
                .any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() < TOL))
        {
            out.push(x);
        }
    }
    out
}

/// Affine dimension of a point set (`-1` for the empty set).
pub fn affine_dim(points: &[Vec<f64>]) -> isize {
    let Some(p0) = points.first() else {
        return -1;
    };
    let d = p0.len();
    if points.len() == 1 {
        return 0;
    }
    let m = nalgebra::DMatrix::from_fn(points.len() - 1, d, |r, c| points[r + 1][c] - p0[c]);
    let sv = m.singular_values();
    let scale = sv.max().max(1e-300);
    sv.iter().filter(|s| **s > 1e-9 * scale.max(1.0)).count() as isize
}

/// Whether the closed polytope has nonempty interior.
pub fn has_interior(constraints: &[Constraint], d: usize) -> bool {
    affine_dim(&vertices(constraints, d)) == d as isize
}

/// `(measure, centroid)` of a convex set of affine dimension `k ≤ 2`
/// spanned by `points` (`k = 1`: length, `k = 2`: area).
pub fn convex_measure(points: &[Vec<f64>], k: usize) -> (f64, Vec<f64>) {
    if points.is_empty() {
        return (0.0, Vec::new());
    }
    let d = points[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|i| points.iter().map(|p| p[i]).sum::<f64>() / points.len() as f64)
        .collect();
    match k {
        1 => {
            // extreme pair along the principal direction
            let mut best = (0.0, 0, 0);
            for a in 0..points.len() {
                for b in (a + 1)..points.len() {
                    let l = dist(&points[a], &points[b]);
                    if l > best.0 {
                        best = (l, a, b);
                    }
                }
            }
            let (l, a, b) = best;
            let mid = (0..d)
                .map(|i| 0.5 * (points[a][i] + points[b][i]))
                .collect();
            (l, mid)
        }
        2 => polygon_area(points, &mean),
        _ => (0.0, mean),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn polygon_area(points: &[Vec<f64>], mean: &[f64]) -> (f64, Vec<f64>) {
    let d = mean.len();
    if points.len() < 3 {
        return (0.0, mean.to_vec());
    }
    // in-plane frame from the two most spread directions
    let rel: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(mean).map(|(a, b)| a - b).collect())
        .collect();
    let u = rel
        .iter()
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .unwrap()
        .clone();
    let nu = norm(&u);
    let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
    let mut v = rel
        .iter()
        .map(|r| {
            let c = dot(r, &u);
            r.iter()
                .zip(&u)
                .map(|(a, b)| a - c * b)
                .collect::<Vec<f64>>()
        })
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .unwrap();
    let nv = norm(&v);
    if nv < 1e-14 {
        return (0.0, mean.to_vec());
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut pts: Vec<(f64, f64)> = rel.iter().map(|r| (dot(r, &u), dot(r, &v))).collect();
    pts.sort_by(|a, b| a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)));
    let mut area = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        let cross = x0 * y1 - x1 * y0;
        area += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    area *= 0.5;
    if area.abs() < 1e-300 {
        return (0.0, mean.to_vec());
    }
    cx /= 6.0 * area;
    cy /= 6.0 * area;
    let centroid = (0..d).map(|i| mean[i] + cx * u[i] + cy * v[i]).collect();
    (area.abs(), centroid)
}
