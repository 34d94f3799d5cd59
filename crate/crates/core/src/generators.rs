//! Analytic test fields with closed-form energies.
//!
//! A [`GeneratorSpec`] is the text descriptor of a field: a box and a
//! [`FieldKind`]. [`build_field`] turns it into a [`VectorField`] carrying
//! exact piecewise-affine metadata and [`exact_lambda`] evaluates `Λ^ξ`
//! from that metadata without any slicing.
//!
//! Descriptor format (TOML):
//!
//! ```toml
//! name = "crack_vertical"
//! dim = 2
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//!
//! [field]
//! kind = "scalar_jump"      # rigid | linear | piecewise_rigid | scalar_jump | sum
//! normal = [1.0, 0.0]
//! offset = 0.5
//! jump = [2.0, 0.0]
//! ```
//!
//! Matrices are arrays of rows. `piecewise_rigid` takes a `base` motion and
//! `pieces`, each a list of open `halfspaces` (`normal·x < offset`) with its
//! own rigid motion; the base motion holds outside every piece.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field_model::{
    AffineIncrement, BoxDomain, DirectionSet, Displacement, Halfspace, PiecewiseAffine, Region,
    VectorField,
};
use crate::geometry::{affine_dim, convex_measure, has_interior, vertices, Constraint};
use crate::linalg::{dot, from_rows, mat_vec, norm, quadratic_form};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub skew: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub halfspaces: Vec<HalfspaceSpec>,
    pub skew: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `x ↦ A x + b`, `A` skew.
    Rigid {
        skew: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
    /// `x ↦ G x + b`.
    Linear {
        gradient: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
    PiecewiseRigid {
        base: Option<RigidMotion>,
        pieces: Vec<Piece>,
    },
    /// Constant `jump` on `{normal·x > offset}`, zero elsewhere.
    ScalarJump {
        normal: Vec<f64>,
        offset: f64,
        jump: Vec<f64>,
    },
    #[serde(alias = "custom-sum")]
    Sum { terms: Vec<FieldKind> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub field: FieldKind,
}

impl GeneratorSpec {
    pub fn domain(&self) -> Result<BoxDomain> {
        if self.lower.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.lower.len(),
            });
        }
        BoxDomain::new(self.lower.clone(), self.upper.clone())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("descriptor serializes")
    }
}

/// Parse a descriptor; `origin` names the source in error messages.
pub fn parse_spec(text: &str, origin: &Path) -> Result<GeneratorSpec> {
    toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_spec(path: &Path) -> Result<GeneratorSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text, path)
}

/// `corpus:<name>` or a descriptor path.
pub fn resolve_spec(source: &str) -> Result<GeneratorSpec> {
    match source.strip_prefix("corpus:") {
        Some(name) => corpus_spec(name),
        None => load_spec(Path::new(source)),
    }
}

const CORPUS: [(&str, &str); 8] = [
    (
        "rigid_rotation",
        include_str!("../corpus/rigid_rotation.toml"),
    ),
    ("rigid_motion", include_str!("../corpus/rigid_motion.toml")),
    (
        "linear_identity",
        include_str!("../corpus/linear_identity.toml"),
    ),
    ("linear_shear", include_str!("../corpus/linear_shear.toml")),
    (
        "crack_vertical",
        include_str!("../corpus/crack_vertical.toml"),
    ),
    ("crack_tilted", include_str!("../corpus/crack_tilted.toml")),
    (
        "crack_rotating",
        include_str!("../corpus/crack_rotating.toml"),
    ),
    (
        "sum_linear_crack",
        include_str!("../corpus/sum_linear_crack.toml"),
    ),
];

pub fn corpus_names() -> Vec<&'static str> {
    CORPUS.iter().map(|(n, _)| *n).collect()
}

pub fn corpus_spec(name: &str) -> Result<GeneratorSpec> {
    let (_, text) = CORPUS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| invalid("field", format!("no corpus field named `{name}`")))?;
    parse_spec(text, Path::new(&format!("corpus/{name}.toml")))
}

/// All corpus descriptors in fixed order.
pub fn corpus() -> Vec<GeneratorSpec> {
    corpus_names()
        .into_iter()
        .map(|n| corpus_spec(n).expect("corpus descriptors parse"))
        .collect()
}

fn matrix(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    let m = from_rows(rows)?;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.nrows(),
        });
    }
    Ok(m)
}

fn vector(v: &[f64], d: usize) -> Result<Vec<f64>> {
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    Ok(v.to_vec())
}

fn skew(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    let a = matrix(rows, d)?;
    if (&a + a.transpose()).amax() != 0.0 {
        return Err(invalid("skew", "rigid motions need A + Aᵀ = 0 exactly"));
    }
    Ok(a)
}

fn closed(region: &Region) -> Vec<Constraint> {
    region
        .halfspaces
        .iter()
        .map(|h| Constraint::new(h.normal.clone(), h.offset))
        .collect()
}

fn box_constraints(domain: &BoxDomain) -> Vec<Constraint> {
    crate::field_model::Support::boxed(domain.clone()).constraints()
}

fn structure(kind: &FieldKind, domain: &BoxDomain) -> Result<PiecewiseAffine> {
    let d = domain.dim();
    match kind {
        FieldKind::Rigid { skew: a, shift } => {
            Ok(PiecewiseAffine::affine(skew(a, d)?, vector(shift, d)?))
        }
        FieldKind::Linear { gradient, shift } => Ok(PiecewiseAffine::affine(
            matrix(gradient, d)?,
            vector(shift, d)?,
        )),
        FieldKind::PiecewiseRigid { base, pieces } => {
            let (a0, b0) = match base {
                Some(m) => (skew(&m.skew, d)?, vector(&m.shift, d)?),
                None => (DMatrix::zeros(d, d), vec![0.0; d]),
            };
            let mut out = PiecewiseAffine::affine(a0.clone(), b0.clone());
            for piece in pieces {
                let a = skew(&piece.skew, d)?;
                let b = vector(&piece.shift, d)?;
                let mut halfspaces = Vec::with_capacity(piece.halfspaces.len());
                for h in &piece.halfspaces {
                    let normal = vector(&h.normal, d)?;
                    if norm(&normal) == 0.0 {
                        return Err(invalid("normal", "half-space normal must be nonzero"));
                    }
                    halfspaces.push(Halfspace {
                        normal,
                        offset: h.offset,
                    });
                }
                out.increments.push(AffineIncrement {
                    region: Region { halfspaces },
                    matrix: &a - &a0,
                    shift: b.iter().zip(&b0).map(|(x, y)| x - y).collect(),
                });
            }
            let boxed = box_constraints(domain);
            for i in 0..out.increments.len() {
                for j in (i + 1)..out.increments.len() {
                    let mut c = boxed.clone();
                    c.extend(closed(&out.increments[i].region));
                    c.extend(closed(&out.increments[j].region));
                    if has_interior(&c, d) {
                        return Err(Error::OverlappingRegions(i, j));
                    }
                }
            }
            Ok(out)
        }
        FieldKind::ScalarJump {
            normal,
            offset,
            jump,
        } => {
            let normal = vector(normal, d)?;
            if norm(&normal) == 0.0 {
                return Err(invalid("normal", "crack normal must be nonzero"));
            }
            let mut out = PiecewiseAffine::affine(DMatrix::zeros(d, d), vec![0.0; d]);
            out.increments.push(AffineIncrement {
                region: Region {
                    halfspaces: vec![Halfspace {
                        normal: normal.iter().map(|x| -x).collect(),
                        offset: -offset,
                    }],
                },
                matrix: DMatrix::zeros(d, d),
                shift: vector(jump, d)?,
            });
            Ok(out)
        }
        FieldKind::Sum { terms } => {
            let mut out = PiecewiseAffine::affine(DMatrix::zeros(d, d), vec![0.0; d]);
            for t in terms {
                out = out.sum(&structure(t, domain)?);
            }
            Ok(out)
        }
    }
}

/// Field with exact metadata for a descriptor.
pub fn build_field(spec: &GeneratorSpec) -> Result<VectorField> {
    let domain = spec.domain()?;
    let s = structure(&spec.field, &domain)?;
    VectorField::exact(domain, s)
}

/// Closed-form `Λ^ξ` and `Λ^{p,ξ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactLambda {
    pub lambda: f64,
    pub lambda_p: f64,
}

pub fn exact_lambda(spec: &GeneratorSpec, xi: &[f64], beta: f64, p: f64) -> Result<ExactLambda> {
    exact_lambda_field(&build_field(spec)?, xi, beta, p)
}

/// Closed-form energies from a field's metadata.
///
/// The slice derivative is `ξ·Gξ` everywhere (increments must have
/// `ξ·A_kξ = 0`), and every facet of an increment region contributes
/// `∫_facet (|ξ·[u]| ∧ β) dH^{d-1} · |ν·ξ|/|ξ|`.
pub fn exact_lambda_field(
    field: &VectorField,
    xi: &[f64],
    beta: f64,
    p: f64,
) -> Result<ExactLambda> {
    let meta = field.metadata().ok_or(Error::MissingMetadata)?;
    let d = field.dim();
    if xi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: xi.len(),
        });
    }
    let xn = norm(xi);
    if xn == 0.0 {
        return Err(invalid("xi", "direction must be nonzero"));
    }
    if !(beta > 0.0) || !(p >= 1.0) {
        return Err(invalid("beta", "need beta > 0 and p >= 1"));
    }
    if d > 3 {
        return Err(Error::Unsupported("closed forms exist for d <= 3".into()));
    }
    let support = field.support();
    let boxed = support.constraints();
    for (k, inc) in meta.increments.iter().enumerate() {
        if quadratic_form(&inc.matrix, xi).abs() > 1e-12 * (1.0 + inc.matrix.amax()) {
            return Err(Error::Unsupported(format!(
                "increment {k} changes the slice derivative"
            )));
        }
        for j in (k + 1)..meta.increments.len() {
            let mut c = boxed.clone();
            c.extend(closed(&inc.region));
            c.extend(closed(&meta.increments[j].region));
            if !vertices(&c, d).is_empty() {
                return Err(Error::Unsupported(format!(
                    "regions {k} and {j} touch; their facets would overlap"
                )));
            }
        }
    }
    let slope = quadratic_form(&meta.gradient, xi).abs();
    let volume = support.volume();
    let mut lambda = slope * volume / xn;
    let mut lambda_p = slope.powf(p) * volume / xn;

    for inc in &meta.increments {
        // f(x) = ξ·(A x + w) is the slice jump across this region's boundary
        let a: Vec<f64> = mat_vec(&inc.matrix.transpose(), xi);
        let a0 = dot(xi, &inc.shift);
        let region = closed(&inc.region);
        for h in &inc.region.halfspaces {
            let mut facet = boxed.clone();
            facet.extend(region.iter().cloned());
            facet.push(Constraint::new(h.normal.clone(), h.offset).flipped());
            let pts = vertices(&facet, d);
            if affine_dim(&pts) != d as isize - 1 {
                continue;
            }
            let (area, centroid) = convex_measure(&pts, d - 1);
            if !support.contains(&centroid) {
                continue;
            }
            let factor = dot(&h.normal, xi).abs() / (norm(&h.normal) * xn);
            let f = |x: &[f64]| dot(&a, x) + a0;
            lambda += factor * truncated_integral(&facet, &a, a0, beta, d, area, f(&centroid));
            let vanishes = norm(&a) <= 1e-14 && a0.abs() <= 1e-14;
            if !vanishes {
                lambda_p += factor * area;
            }
        }
    }
    Ok(ExactLambda { lambda, lambda_p })
}

/// `∫_facet |f| ∧ β` for affine `f = a·x + a0`, split where `f = 0, ±β`.
fn truncated_integral(
    facet: &[Constraint],
    a: &[f64],
    a0: f64,
    beta: f64,
    d: usize,
    area: f64,
    f_centroid: f64,
) -> f64 {
    if norm(a) <= 1e-14 {
        return f_centroid.abs().min(beta) * area;
    }
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    // (lower, upper) bounds on f for each band, with the band's integrand
    let bands: [(Option<f64>, Option<f64>); 4] = [
        (Some(beta), None),
        (Some(0.0), Some(beta)),
        (Some(-beta), Some(0.0)),
        (None, Some(-beta)),
    ];
    let mut total = 0.0;
    for (lo, hi) in bands {
        let mut c = facet.to_vec();
        if let Some(lo) = lo {
            c.push(Constraint::new(neg.clone(), a0 - lo));
        }
        if let Some(hi) = hi {
            c.push(Constraint::new(a.to_vec(), hi - a0));
        }
        let pts = vertices(&c, d);
        if affine_dim(&pts) != d as isize - 1 {
            continue;
        }
        let (m, centroid) = convex_measure(&pts, d - 1);
        let value = match (lo, hi) {
            (Some(_), None) | (None, Some(_)) => beta,
            _ => (dot(a, &centroid) + a0).abs(),
        };
        total += value * m;
    }
    total
}

/// Closed-form energies of every corpus field on the canonical directions.
#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub name: String,
    pub lambdas: Vec<f64>,
    pub lambda_v: f64,
    pub m: f64,
}

pub fn corpus_oracles() -> Result<Vec<OracleRow>> {
    corpus()
        .iter()
        .map(|spec| {
            let dirs = DirectionSet::canonical(spec.dim);
            let mut lambdas = Vec::new();
            let mut m = 0.0;
            for dir in dirs.directions() {
                let l = exact_lambda(spec, &dir.xi, dir.threshold, 1.0)?.lambda;
                m += norm(&dir.xi) * l;
                lambdas.push(l);
            }
            Ok(OracleRow {
                name: spec.name.clone(),
                lambda_v: lambdas.iter().sum(),
                lambdas,
                m,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn spec(kind: FieldKind) -> GeneratorSpec {
        GeneratorSpec {
            name: "t".into(),
            dim: 2,
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            field: kind,
        }
    }

    fn crack(c: f64) -> GeneratorSpec {
        spec(FieldKind::ScalarJump {
            normal: vec![1.0, 0.0],
            offset: 0.5,
            jump: vec![c, 0.0],
        })
    }

    #[test]
    fn build_examples() {
        let r = build_field(&spec(FieldKind::Rigid {
            skew: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
            shift: vec![0.0, 0.0],
        }))
        .unwrap();
        assert_eq!(r.eval(&[0.3, 0.6]), vec![0.6, -0.3]);
        let id = build_field(&spec(FieldKind::Linear {
            gradient: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            shift: vec![0.0, 0.0],
        }))
        .unwrap();
        assert_eq!(id.eval(&[0.3, 0.6]), vec![0.3, 0.6]);
        let step = build_field(&spec(FieldKind::PiecewiseRigid {
            base: None,
            pieces: vec![Piece {
                halfspaces: vec![HalfspaceSpec {
                    normal: vec![-1.0, 0.0],
                    offset: -0.5,
                }],
                skew: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                shift: vec![3.0, 0.0],
            }],
        }))
        .unwrap();
        assert_eq!(step.eval(&[0.2, 0.5]), vec![0.0, 0.0]);
        assert_eq!(step.eval(&[0.7, 0.5]), vec![3.0, 0.0]);
    }

    #[test]
    fn rejects_non_skew_rigid() {
        let bad = spec(FieldKind::Rigid {
            skew: vec![vec![0.0, 1.0], vec![-0.5, 0.0]],
            shift: vec![0.0, 0.0],
        });
        assert!(build_field(&bad).is_err());
    }

    #[test]
    fn rejects_overlapping_pieces() {
        // {x1 < 0.6} and {x1 > 0.4}
        let half = |n: f64| Piece {
            halfspaces: vec![HalfspaceSpec {
                normal: vec![n, 0.0],
                offset: 0.5 * n + 0.1,
            }],
            skew: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            shift: vec![1.0, 0.0],
        };
        let s = spec(FieldKind::PiecewiseRigid {
            base: None,
            pieces: vec![half(1.0), half(-1.0)],
        });
        assert!(matches!(
            build_field(&s),
            Err(Error::OverlappingRegions(0, 1))
        ));
    }

    #[test]
    fn exact_examples() {
        let id = spec(FieldKind::Linear {
            gradient: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            shift: vec![0.0, 0.0],
        });
        // ξ·Gξ = 2 over parameter length ℓ/|ξ|
        let l = exact_lambda(&id, &[1.0, 1.0], 1.0, 1.0).unwrap();
        assert!((l.lambda - SQRT_2).abs() < 1e-14);
        assert!((l.lambda_p - SQRT_2).abs() < 1e-14);
        let l = exact_lambda(&id, &[1.0, 1.0], 1.0, 2.0).unwrap();
        assert!((l.lambda_p - 4.0 / SQRT_2).abs() < 1e-14);

        let c = crack(3.0);
        assert!((exact_lambda(&c, &[1.0, 0.0], 1.0, 1.0).unwrap().lambda - 1.0).abs() < 1e-14);
        assert_eq!(exact_lambda(&c, &[0.0, 1.0], 1.0, 1.0).unwrap().lambda, 0.0);
        let diag = exact_lambda(&c, &[1.0, 1.0], 1.0, 1.0).unwrap().lambda;
        assert!((diag - FRAC_1_SQRT_2).abs() < 1e-14);

        let rigid = corpus_spec("rigid_motion").unwrap();
        for xi in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.3, -2.0]] {
            assert_eq!(exact_lambda(&rigid, &xi, 1.0, 1.0).unwrap().lambda, 0.0);
        }
    }

    #[test]
    fn rotating_crack_integrates_truncated_opening() {
        // opening along e2 is 0.5·x1 + 0.8, truncated at 1 from x1 = 0.4
        let s = corpus_spec("crack_rotating").unwrap();
        let l = exact_lambda(&s, &[0.0, 1.0], 1.0, 1.0).unwrap().lambda;
        assert!((l - 0.96).abs() < 1e-12, "{l}");
        // along e1+e2 the opening 0.5·x1 + 0.85 reaches 1 at x1 = 0.3
        let l = exact_lambda(&s, &[1.0, 1.0], 1.0, 1.0).unwrap().lambda;
        let direct = (0.3 * 0.85 + 0.25 * 0.09 + 0.7) * FRAC_1_SQRT_2;
        assert!((l - direct).abs() < 1e-12, "{l} {direct}");
        assert_eq!(exact_lambda(&s, &[1.0, 0.0], 1.0, 1.0).unwrap().lambda, 0.0);
    }

    #[test]
    fn corpus_parses_and_roundtrips() {
        let all = corpus();
        assert_eq!(all.len(), 8);
        for s in &all {
            build_field(s).unwrap();
            let back: GeneratorSpec = toml::from_str(&s.to_toml()).unwrap();
            assert_eq!(&back, s);
        }
        let rows = corpus_oracles().unwrap();
        let id = rows.iter().find(|r| r.name == "linear_identity").unwrap();
        assert!((id.lambda_v - (2.0 + SQRT_2)).abs() < 1e-13);
    }

    #[test]
    fn custom_sum_alias() {
        let text = r#"
            name = "s"
            dim = 2
            lower = [0.0, 0.0]
            upper = [1.0, 1.0]
            [field]
            kind = "custom-sum"
            [[field.terms]]
            kind = "linear"
            gradient = [[1.0, 0.0], [0.0, 1.0]]
            shift = [0.0, 0.0]
        "#;
        let s = parse_spec(text, Path::new("inline")).unwrap();
        assert!(matches!(s.field, FieldKind::Sum { .. }));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_spec(Path::new("/nonexistent/field.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/field.toml"));
    }
}
