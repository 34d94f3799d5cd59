//! Batch front end: run configuration, the subcommands and their reports.
//!
//! Every subcommand writes `<command>.csv` and `<command>.json` into the
//! output directory. Exit codes: 0 ok, 1 a checked bound failed, 2 bad input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::anchor::measure_discrepancy;
use crate::anchor::select_anchor;
use crate::anchor::{anchor_diagnostics, bad_count_bound, AnchorOptions};
use crate::approximant::{approximate, dump, energy_report, per_cube_check, SweepOptions};
use crate::error::{invalid, Error, Result};
use crate::field_model::{
    make_direction_set, transform_basis, DirectionSet, Displacement, VectorField,
};
use crate::generators::{build_field, corpus, corpus_oracles, exact_lambda_field, resolve_spec};
use crate::interpolation::{korn_constant, KornMethod, KornOptions};
use crate::linalg::from_rows;
use crate::report::{create_dir, vector_cell, write_file, Cell, Table};
use crate::slicing::{lambda_v, DirectionalEnergy, Quadrature, SlicePath};

pub const THREADS_ENV: &str = "GBD_SLICE_THREADS";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionsConfig {
    /// Basis vectors (rows); canonical when absent.
    pub basis: Option<Vec<Vec<f64>>>,
    /// One sign per unordered pair `i < j`, lexicographic.
    pub signs: Option<Vec<i8>>,
    /// One jump threshold per direction, in direction-set order.
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub h: f64,
    pub delta: f64,
    pub tau: Option<f64>,
    pub path: SlicePath,
    pub probe_step: Option<f64>,
    /// Gauss order for cube energies in the Korn estimate.
    pub q: Option<usize>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let quad = Quadrature::default();
        Self {
            h: quad.h,
            delta: quad.delta,
            tau: quad.tau,
            path: quad.path,
            probe_step: None,
            q: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        let a = AnchorOptions::default();
        Self {
            n_candidates: a.n_candidates,
            seed: a.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eta: f64,
    pub radius: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let s = SweepOptions::default();
        Self {
            eta: s.eta,
            radius: s.radius,
        }
    }
}

/// Everything a subcommand needs; loaded from TOML, then overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Spec file path or `corpus:<name>`.
    pub field: String,
    pub eps: Vec<f64>,
    pub p: f64,
    pub directions: DirectionsConfig,
    pub quadrature: QuadratureConfig,
    pub anchor: AnchorConfig,
    pub sweep: SweepConfig,
    /// Output directory; not echoed into reports.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            field: "corpus:crack_vertical".into(),
            eps: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            p: 1.0,
            directions: DirectionsConfig::default(),
            quadrature: QuadratureConfig::default(),
            anchor: AnchorConfig::default(),
            sweep: SweepConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(invalid("eps", "list is empty"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("eps", "entries must be positive"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps", "list must be strictly decreasing"));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(invalid("p", "must be a finite number ≥ 1"));
        }
        if !(self.sweep.eta > 0.0) {
            return Err(invalid("sweep.eta", "must be positive"));
        }
        if !(self.sweep.radius > 0.0) {
            return Err(invalid("sweep.radius", "must be positive"));
        }
        if let Some(s) = self.quadrature.probe_step {
            if !(s > 0.0) {
                return Err(invalid("quadrature.probe_step", "must be positive"));
            }
        }
        if self.quadrature.q == Some(0) {
            return Err(invalid("quadrature.q", "must be positive"));
        }
        if self.anchor.n_candidates < 4 {
            return Err(invalid(
                "anchor.n_candidates",
                "at least 4 candidates are required",
            ));
        }
        if let Some(t) = &self.directions.thresholds {
            if t.iter().any(|b| !(*b > 0.0)) {
                return Err(invalid("directions.thresholds", "must be positive"));
            }
        }
        self.quad().validate()
    }

    pub fn quad(&self) -> Quadrature {
        Quadrature {
            h: self.quadrature.h,
            delta: self.quadrature.delta,
            tau: self.quadrature.tau,
            path: self.quadrature.path,
        }
    }

    pub fn anchor_options(&self) -> AnchorOptions {
        AnchorOptions {
            n_candidates: self.anchor.n_candidates,
            seed: self.anchor.seed,
            probe_step: self.quadrature.probe_step,
        }
    }

    fn echo(&self, command: &str) -> serde_json::Value {
        json!({ "command": command, "config": self })
    }

    pub fn load_field(&self) -> Result<VectorField> {
        build_field(&resolve_spec(&self.field)?)
    }

    pub fn direction_set(&self, d: usize) -> Result<DirectionSet> {
        let basis = match &self.directions.basis {
            Some(rows) => from_rows(rows)?.transpose(),
            None => nalgebra::DMatrix::identity(d, d),
        };
        if basis.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: basis.nrows(),
            });
        }
        make_direction_set(
            &basis,
            self.directions.signs.as_deref(),
            self.directions.thresholds.as_deref(),
        )
    }
}

/// Field and directions in the frame where the approximant is built: a
/// non-canonical basis is moved to the canonical one by change of variables.
fn lattice_frame(cfg: &RunConfig) -> Result<(VectorField, DirectionSet)> {
    let field = cfg.load_field()?;
    let dirs = cfg.direction_set(field.dim())?;
    if dirs.is_canonical() {
        return Ok((field, dirs));
    }
    let (moved, _) = transform_basis(&field, dirs.basis())?;
    let canonical = make_direction_set(
        &nalgebra::DMatrix::identity(field.dim(), field.dim()),
        Some(&dirs.pair_signs()),
        Some(
            &dirs
                .directions()
                .iter()
                .map(|d| d.threshold)
                .collect::<Vec<_>>(),
        ),
    )?;
    Ok((moved, canonical))
}

/// Tables produced by a command plus any failed bound checks.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub dumps: Vec<(String, String)>,
    pub violations: Vec<String>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        create_dir(dir)?;
        let mut written = Vec::new();
        for (stem, table) in &self.tables {
            let (a, b) = table.write(dir, stem)?;
            written.push(a);
            written.push(b);
        }
        for (name, text) in &self.dumps {
            let path = dir.join(name);
            write_file(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Per-direction slice energies with the four totals and exact oracles.
pub fn cmd_energy(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let field = cfg.load_field()?;
    let dirs = cfg.direction_set(field.dim())?;
    let e = lambda_v(&field, &dirs, &cfg.quad(), cfg.p)?;
    let mut t = Table::new(
        "energy",
        cfg.echo("energy"),
        &[
            "row",
            "xi",
            "threshold",
            "weight",
            "lambda",
            "lambda_p",
            "exact_lambda",
            "exact_lambda_p",
            "h",
            "delta",
            "exact_path",
        ],
    );
    let mut exact_total = Some((0.0, 0.0, 0.0, 0.0));
    for (k, entry) in e.entries.iter().enumerate() {
        let exact = exact_lambda_field(&field, &entry.xi, entry.threshold, cfg.p).ok();
        let w = crate::linalg::norm(&entry.xi);
        exact_total = match (exact_total, &exact) {
            (Some((a, b, c, d)), Some(x)) => Some((
                a + x.lambda,
                b + x.lambda_p,
                c + w * x.lambda,
                d + w * x.lambda_p,
            )),
            _ => None,
        };
        t.push(vec![
            format!("direction_{k}").into(),
            vector_cell(&entry.xi),
            entry.threshold.into(),
            w.into(),
            entry.lambda.into(),
            entry.lambda_p.into(),
            exact.as_ref().map(|x| x.lambda).into(),
            exact.as_ref().map(|x| x.lambda_p).into(),
            e.h.into(),
            e.delta.into(),
            e.exact_path.into(),
        ]);
    }
    t.push(vec![
        "total".into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        e.lambda_v().into(),
        e.lambda_pv().into(),
        exact_total.map(|x| x.0).into(),
        exact_total.map(|x| x.1).into(),
        e.h.into(),
        e.delta.into(),
        e.exact_path.into(),
    ]);
    t.push(vec![
        "weighted_total".into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        e.m().into(),
        e.m_p().into(),
        exact_total.map(|x| x.2).into(),
        exact_total.map(|x| x.3).into(),
        e.h.into(),
        e.delta.into(),
        e.exact_path.into(),
    ]);
    Ok(Outcome {
        tables: vec![("energy".into(), t)],
        ..Outcome::default()
    })
}

pub const APPROXIMATE_COLUMNS: &[&str] = &[
    "eps",
    "p",
    "lambda",
    "m",
    "energy",
    "perimeter",
    "perimeter_total",
    "bad_volume",
    "bad_count",
    "good_count",
    "ratio",
    "discrepancy",
    "eta",
    "y",
    "phi",
    "threshold",
    "in_q_eps",
    "energy_avg",
    "two_m",
    "in_q_upper",
    "bad_count_bound",
    "bad_bound_ok",
    "korn_constant",
    "per_cube_max_ratio",
    "per_cube_violations",
];

/// Anchor, approximate and report at every `ε`, with an approximant dump each.
pub fn cmd_approximate(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let (field, dirs) = lattice_frame(cfg)?;
    let d = field.dim();
    let energies = lambda_v(&field, &dirs, &cfg.quad(), cfg.p)?;
    let korn = if cfg.p == 2.0 {
        let opts = KornOptions {
            q: cfg.quadrature.q,
            ..KornOptions::default()
        };
        Some(korn_constant(d, 2.0, KornMethod::Eig, &opts)?.constant)
    } else {
        None
    };
    let mut out = Outcome::default();
    let mut t = Table::new("approximate", cfg.echo("approximate"), APPROXIMATE_COLUMNS);
    for (k, &eps) in cfg.eps.iter().enumerate() {
        let row = approximate_row(cfg, &field, &dirs, &energies, eps, korn)?;
        if let Some(v) = &row.violation {
            out.violations.push(format!("eps={eps}: {v}"));
        }
        out.dumps.push((format!("approximant_{k}.txt"), row.dump));
        t.push(row.cells);
    }
    out.tables.push(("approximate".into(), t));
    Ok(out)
}

struct ApproximateRow {
    cells: Vec<Cell>,
    dump: String,
    violation: Option<String>,
}

fn approximate_row(
    cfg: &RunConfig,
    field: &VectorField,
    dirs: &DirectionSet,
    energies: &DirectionalEnergy,
    eps: f64,
    korn: Option<f64>,
) -> Result<ApproximateRow> {
    let d = field.dim();
    let (y, diag) = select_anchor(field, eps, dirs, energies, &cfg.anchor_options())?;
    let appr = approximate(field, eps, &y, dirs, cfg.p)?;
    let r = energy_report(&appr, energies);
    let step = cfg
        .quadrature
        .probe_step
        .unwrap_or(eps / 8.0)
        .min(eps / 8.0);
    let disc = measure_discrepancy(
        field,
        &appr,
        field.domain(),
        cfg.sweep.radius,
        cfg.sweep.eta,
        step,
    )?;
    let bound = bad_count_bound(diag.two_m, dirs, cfg.p);
    let scaled = eps.powi(d as i32 - 1) * r.bad_count as f64;
    // the bound is implied only when the anchor energy sits below 2M
    let bad_ok = !diag.in_q_upper || scaled <= bound * (1.0 + 1e-12);
    let check = korn.map(|c| per_cube_check(&appr, c));
    let mut violation = None;
    if !bad_ok {
        violation = Some(format!("ε^(d-1)·bad_count = {scaled} exceeds {bound}"));
    }
    if let Some(c) = &check {
        if c.violations > 0 {
            violation = Some(format!("{} per-cube Korn violations", c.violations));
        }
    }
    let cells = vec![
        eps.into(),
        cfg.p.into(),
        r.lambda.into(),
        r.m.into(),
        r.energy.into(),
        r.perimeter.into(),
        r.perimeter_total.into(),
        r.bad_volume.into(),
        r.bad_count.into(),
        r.good_count.into(),
        r.ratio.into(),
        disc.into(),
        cfg.sweep.eta.into(),
        vector_cell(&y),
        diag.phi.into(),
        diag.threshold.into(),
        diag.in_q_eps.into(),
        diag.energy_avg.into(),
        diag.two_m.into(),
        diag.in_q_upper.into(),
        bound.into(),
        bad_ok.into(),
        korn.into(),
        check.as_ref().map(|c| c.max_ratio).into(),
        check.map_or(Cell::Empty, |c| c.violations.into()),
    ];
    Ok(ApproximateRow {
        cells,
        dump: dump(&appr),
        violation,
    })
}

/// One Korn estimate, read from or added to `korn_cache.csv` in `out`.
pub fn cmd_korn(
    d: usize,
    p: f64,
    method: KornMethod,
    seed: u64,
    q: Option<usize>,
    out: &Path,
) -> Result<Outcome> {
    if !(1..=4).contains(&d) {
        return Err(invalid("d", "supported dimensions are 1 to 4"));
    }
    let cache_path = out.join("korn_cache.csv");
    let mut cache = read_korn_cache(&cache_path)?;
    let key = (d, p.to_string(), method.to_string(), seed);
    let (constant, lower_bound, quotient_dim, cached) = match cache.iter().find(|r| r.key() == key)
    {
        Some(r) => (r.constant, r.lower_bound, r.quotient_dim, true),
        None => {
            let opts = KornOptions {
                seed,
                q,
                ..KornOptions::default()
            };
            let e = korn_constant(d, p, method, &opts)?;
            cache.push(KornCacheRow {
                d,
                p,
                method,
                seed,
                constant: e.constant,
                lower_bound: e.lower_bound,
                quotient_dim: e.quotient_dim,
            });
            (e.constant, e.lower_bound, e.quotient_dim, false)
        }
    };
    let params = json!({ "command": "korn", "d": d, "p": p, "method": method.to_string(), "seed": seed, "q": q });
    let mut t = Table::new(
        "korn",
        params,
        &[
            "d",
            "p",
            "method",
            "seed",
            "constant",
            "lower_bound",
            "quotient_dim",
            "cached",
        ],
    );
    t.push(vec![
        d.into(),
        p.into(),
        method.to_string().into(),
        Cell::Int(seed as i64),
        constant.into(),
        lower_bound.into(),
        quotient_dim.into(),
        cached.into(),
    ]);
    create_dir(out)?;
    write_file(&cache_path, &korn_cache_text(&cache))?;
    Ok(Outcome {
        tables: vec![("korn".into(), t)],
        ..Outcome::default()
    })
}

#[derive(Clone, Debug, PartialEq)]
struct KornCacheRow {
    d: usize,
    p: f64,
    method: KornMethod,
    seed: u64,
    constant: f64,
    lower_bound: f64,
    quotient_dim: usize,
}

impl KornCacheRow {
    fn key(&self) -> (usize, String, String, u64) {
        (
            self.d,
            self.p.to_string(),
            self.method.to_string(),
            self.seed,
        )
    }
}

const KORN_CACHE_HEADER: &str = "d,p,method,seed,constant,lower_bound,quotient_dim";

fn read_korn_cache(path: &Path) -> Result<Vec<KornCacheRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize| Error::Parse {
        path: path.to_path_buf(),
        message: format!("malformed cache line {line}"),
    };
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line == KORN_CACHE_HEADER || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(n + 1));
        }
        rows.push(KornCacheRow {
            d: f[0].parse().map_err(|_| bad(n + 1))?,
            p: f[1].parse().map_err(|_| bad(n + 1))?,
            method: f[2].parse().map_err(|_| bad(n + 1))?,
            seed: f[3].parse().map_err(|_| bad(n + 1))?,
            constant: f[4].parse().map_err(|_| bad(n + 1))?,
            lower_bound: f[5].parse().map_err(|_| bad(n + 1))?,
            quotient_dim: f[6].parse().map_err(|_| bad(n + 1))?,
        });
    }
    Ok(rows)
}

fn korn_cache_text(rows: &[KornCacheRow]) -> String {
    let mut s = format!("# schema={}\n{KORN_CACHE_HEADER}\n", crate::report::SCHEMA);
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.d, r.p, r.method, r.seed, r.constant, r.lower_bound, r.quotient_dim
        ));
    }
    s
}

/// Both anchor predicates for every candidate at every `ε`.
pub fn cmd_anchor_diag(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let (field, dirs) = lattice_frame(cfg)?;
    let energies = lambda_v(&field, &dirs, &cfg.quad(), cfg.p)?;
    let mut t = Table::new(
        "anchor-diag",
        cfg.echo("anchor-diag"),
        &[
            "eps",
            "candidate",
            "y",
            "phi",
            "mean_phi",
            "threshold",
            "in_q_eps",
            "energy_avg",
            "two_m",
            "in_q_upper",
            "feasible",
            "tail_bound",
        ],
    );
    let mut out = Outcome::default();
    for &eps in &cfg.eps {
        let diags = anchor_diagnostics(&field, eps, &dirs, &energies, &cfg.anchor_options())?;
        if !diags.iter().any(|d| d.feasible()) {
            out.violations
                .push(format!("eps={eps}: no feasible anchor"));
        }
        for (c, a) in diags.iter().enumerate() {
            t.push(vec![
                eps.into(),
                c.into(),
                vector_cell(&a.y),
                a.phi.into(),
                a.mean_phi.into(),
                a.threshold.into(),
                a.in_q_eps.into(),
                a.energy_avg.into(),
                a.two_m.into(),
                a.in_q_upper.into(),
                a.feasible().into(),
                a.tail_bound.into(),
            ]);
        }
    }
    out.tables.push(("anchor-diag".into(), t));
    Ok(out)
}

/// Corpus names with their exact `Λ^V` and `M` oracles.
pub fn cmd_corpus_list() -> Result<Outcome> {
    let mut t = Table::new(
        "corpus-list",
        json!({ "command": "corpus list" }),
        &["name", "dim", "kind", "lambda_v", "m"],
    );
    for (spec, oracle) in corpus().iter().zip(corpus_oracles()?) {
        let kind = toml::Value::try_from(&spec.field)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str().map(str::to_string)))
            .unwrap_or_default();
        t.push(vec![
            spec.name.clone().into(),
            spec.dim.into(),
            kind.into(),
            oracle.lambda_v.into(),
            oracle.m.into(),
        ]);
    }
    Ok(Outcome {
        tables: vec![("corpus".into(), t)],
        ..Outcome::default()
    })
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    Ok(pool.install(f))
}

#[derive(Debug, Parser)]
#[command(
    name = "gbd-slice",
    version,
    about = "Directional slice energies and cube approximants"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Field spec path or corpus:<name>
    #[arg(long, global = true)]
    pub field: Option<String>,
    /// Comma-separated, strictly decreasing lattice sizes
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-direction slice energies and totals
    Energy,
    /// Anchored approximants over the ε list
    Approximate,
    /// Discrete Korn constant
    Korn {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value = "eig")]
        method: KornMethod,
    },
    /// Anchor predicates over sampled anchors
    AnchorDiag,
    /// Built-in test fields
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// Names and oracle values
    List,
    /// Print a field's spec file
    Show { name: String },
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(f) = &self.field {
            cfg.field = f.clone();
        }
        if let Some(e) = &self.eps {
            cfg.eps = e.clone();
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(s) = self.seed {
            cfg.anchor.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoFeasibleAnchor { .. } | Error::RigidKernelViolation(_) => 1,
        _ => 2,
    }
}

/// Execute a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(out) => {
            for v in &out.violations {
                eprintln!("bound violated: {v}");
            }
            if out.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.common.resolve()?;
    let threads = cli.common.threads.unwrap_or(0);
    if threads == 0 && cli.common.threads.is_some() {
        return Err(invalid("threads", "must be positive"));
    }
    let work = || -> Result<Outcome> {
        match &cli.command {
            Command::Energy => cmd_energy(&cfg),
            Command::Approximate => cmd_approximate(&cfg),
            Command::Korn { d, method } => cmd_korn(
                *d,
                cfg.p,
                *method,
                cfg.anchor.seed,
                cfg.quadrature.q,
                &cfg.out,
            ),
            Command::AnchorDiag => cmd_anchor_diag(&cfg),
            Command::Corpus {
                action: CorpusAction::List,
            } => cmd_corpus_list(),
            Command::Corpus {
                action: CorpusAction::Show { name },
            } => {
                print!("{}", crate::generators::corpus_spec(name)?.to_toml());
                Ok(Outcome::default())
            }
        }
    };
    let out = if threads > 0 {
        with_threads(threads, work)??
    } else {
        work()?
    };
    for (_, t) in &out.tables {
        print!("{}", t.to_csv());
    }
    if !out.tables.is_empty() || !out.dumps.is_empty() {
        out.write(&cfg.out)?;
    }
    Ok(out)
}
