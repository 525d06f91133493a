//! Command dispatch for the `chaosbound` binary. Output goes to the writers
//! passed in, so tests can drive commands in-process.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chaosbound::bounds::{all_profiles, best_bound, BoundProfile, Theorem};
use chaosbound::error::{BoundsError, FlatteningError, GraphError, SampleError, SchemaError};
use chaosbound::flattening::{
    build_table, flattening_norm_sq, oracle_check_with, parameters_from_table, FlatteningClass, DEFAULT_ORACLE_CAP,
};
use chaosbound::graph::{
    materialize_graph_matrix_trial, norm_exponents, shape_coupled_schema, sigma_bound_check, Shape,
};
use chaosbound::linalg::{default_max_iters, spectral_norm, DEFAULT_NORM_TOL};
use chaosbound::sampler::{monte_carlo, scaling_fit_reports, Caps, SampleConfig, SampleMode, Target};
use chaosbound::schema::{ellipsoid_schemas, khatri_rao_schema, tensor_pca_schemas, ChaosSchema};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;
pub const EXIT_CAP: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "chaosbound", version, about = "Flattening tables, norm bounds and Monte Carlo checks for matrix chaoses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Flattening table, chaos parameters and bound profiles of a schema.
    Analyze(AnalyzeArgs),
    /// Separator, exponents and edge ordering of a graph-matrix shape.
    Graph(GraphArgs),
    /// Monte Carlo estimate of the expected spectral norm.
    Sample(SampleArgs),
    /// Compare every flattening formula against its explicit matrix.
    Verify(VerifyArgs),
    /// Fit the growth exponent of the mean norm over a dimension sweep.
    Scaling(ScalingArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Schema JSON file.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Shape JSON file.
    #[arg(long)]
    pub shape: Option<PathBuf>,
    /// Built-in example: khatri-rao-q2, tensor-pca-1, tensor-pca-2,
    /// ellipsoid-phi, ellipsoid-psi, wigner, zshape, star.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Coupled,
    Decoupled,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Coupled => SampleMode::Coupled,
            ModeArg::Decoupled => SampleMode::Decoupled,
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
    /// Symbol bindings such as `d=5,n=7`; enables numeric evaluation.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    /// Directory for table.csv and profiles.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    /// Label count used to evaluate edgeless shapes.
    #[arg(long)]
    pub n: Option<u64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: Source,
    /// Symbol bindings such as `d=3,n=4`; required.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    /// Largest side of an explicit flattening.
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    pub cap: u64,
    /// Lowers the first index's exponent in the formula; a negative control.
    #[arg(long, hide = true)]
    pub inject_exponent_fault: bool,
}

#[derive(Args, Debug)]
pub struct SamplingArgs {
    /// Number of independent trials; 10 for sample, 20 per size for scaling.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    #[arg(long, env = "CHAOSBOUND_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Defaults to coupled for shapes, decoupled for schemas.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Symbol bindings such as `d=5,n=7`.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    /// Largest `rows · cols` of a materialized matrix.
    #[arg(long)]
    pub cap: Option<u128>,
    /// Divide each variable by its standard deviation.
    #[arg(long)]
    pub standardize: bool,
    /// Directory that also receives the report as CSV and JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Shorthand for `--dims n=N`.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, value_enum, default_value_t = SampleFormat::Csv)]
    pub format: SampleFormat,
}

#[derive(Args, Debug)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Symbol being swept.
    #[arg(long, default_value = "n")]
    pub sweep: String,
    /// Values of the swept symbol, e.g. `64,128,256`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<u64>,
    /// Ties another symbol to the sweep, e.g. `n=d^2`.
    #[arg(long, value_parser = parse_link)]
    pub link: Vec<Link>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

pub type Dims = BTreeMap<String, u64>;

fn parse_dims(s: &str) -> Result<Dims, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| format!("expected name=value, got `{p}`"))?;
            let v: u64 = v.trim().parse().map_err(|e| format!("bad value in `{p}`: {e}"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub symbol: String,
    pub base: String,
    pub power: u32,
}

fn parse_link(s: &str) -> Result<Link, String> {
    let (sym, rhs) = s.split_once('=').ok_or_else(|| format!("expected sym=base^k, got `{s}`"))?;
    let (base, power) = match rhs.split_once('^') {
        Some((b, k)) => (b, k.trim().parse::<u32>().map_err(|e| format!("bad power in `{s}`: {e}"))?),
        None => (rhs, 1),
    };
    Ok(Link { symbol: sym.trim().into(), base: base.trim().into(), power })
}

pub const BUILTINS: [&str; 8] =
    ["khatri-rao-q2", "tensor-pca-1", "tensor-pca-2", "ellipsoid-phi", "ellipsoid-psi", "wigner", "zshape", "star"];

#[derive(Clone, Debug)]
pub enum Input {
    Schema(ChaosSchema),
    Shape(Shape),
}

/// Built-in examples, with symbolic dimensions.
pub fn builtin(name: &str) -> Option<Input> {
    let schema = |s: ChaosSchema| Some(Input::Schema(s.unbind()));
    match name {
        "khatri-rao-q2" => schema(khatri_rao_schema(2, 1, 1).expect("q = 2 is valid")),
        "tensor-pca-1" => schema(tensor_pca_schemas(1, 1).0),
        "tensor-pca-2" => schema(tensor_pca_schemas(1, 1).1),
        "ellipsoid-phi" => schema(ellipsoid_schemas(1, 1).0),
        "ellipsoid-psi" => schema(ellipsoid_schemas(1, 1).1),
        "wigner" => Some(Input::Shape(Shape::wigner())),
        "zshape" => Some(Input::Shape(Shape::z_shape())),
        "star" => Some(Input::Shape(Shape::star())),
        _ => None,
    }
}

/// A failed command: exit code plus what to print.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Failure {
    fn new(code: i32, stderr: impl Into<String>) -> Self {
        Failure { code, stdout: String::new(), stderr: stderr.into() }
    }
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::new(EXIT_INVALID, e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Sample(e) => e.into(),
            e => Failure::new(EXIT_INVALID, e.to_string()),
        }
    }
}

impl From<SampleError> for Failure {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::CapExceeded { .. } => Failure::new(EXIT_CAP, e.to_string()),
            SampleError::InvalidConfig(_) => Failure::new(EXIT_USAGE, e.to_string()),
            e => Failure::new(EXIT_INVALID, e.to_string()),
        }
    }
}

impl From<FlatteningError> for Failure {
    fn from(e: FlatteningError) -> Self {
        match e {
            FlatteningError::OracleTooLarge { .. } => Failure::new(EXIT_CAP, e.to_string()),
            e => Failure::new(EXIT_INVALID, e.to_string()),
        }
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        Failure::new(EXIT_INVALID, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_INVALID, format!("{}: {e}", path.display()))
}

fn load(source: &Source) -> Result<Input, Failure> {
    if let Some(name) = &source.builtin {
        return builtin(name).ok_or_else(|| {
            Failure::new(EXIT_USAGE, format!("unknown builtin `{name}`; expected one of {}", BUILTINS.join(", ")))
        });
    }
    if let Some(path) = &source.schema {
        let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        let schema = ChaosSchema::from_json(&text).map_err(|e| {
            let body = serde_json::json!({ "violations": [{ "kind": "malformed", "message": e.to_string() }] });
            Failure { code: EXIT_INVALID, stdout: format!("{body}\n"), stderr: e.to_string() }
        })?;
        return Ok(Input::Schema(schema));
    }
    let path = source.shape.as_ref().expect("clap requires one source");
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(Input::Shape(Shape::from_json(&text)?))
}

fn expect_schema(input: Input) -> ChaosSchema {
    match input {
        Input::Schema(s) => s,
        Input::Shape(shape) => shape_coupled_schema(&shape, None),
    }
}

/// Validation failures print the violation list as JSON on stdout.
fn validated(schema: ChaosSchema) -> Result<ChaosSchema, Failure> {
    let report = schema.validate();
    if report.is_ok() {
        Ok(schema)
    } else {
        Err(Failure { code: EXIT_INVALID, stdout: format!("{}\n", report.to_json()), stderr: report.to_string() })
    }
}

fn bind(schema: &ChaosSchema, dims: &Option<Dims>) -> Result<ChaosSchema, Failure> {
    match dims {
        Some(d) => Ok(schema.bind(d)?),
        None => Ok(schema.clone()),
    }
}

/// Twelve significant digits, trailing zeros trimmed.
pub fn fmt_value(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 11 - x.abs().log10().floor() as i32;
    let s = if (0..=15).contains(&digits) { format!("{:.*}", digits as usize, x) } else { format!("{x:.11e}") };
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String, Failure> {
    let schema = validated(bind(&expect_schema(load(&args.source)?), &args.dims)?)?;
    let table = build_table(&schema);
    if args.format == TableFormat::Csv {
        return Ok(table.render_csv());
    }
    let params = parameters_from_table(schema.q, &table);
    let mut out = String::new();
    let labels: Vec<String> = (0..schema.p).map(|u| schema.label(u)).collect();
    let dims: Vec<String> = schema.dims.iter().map(|d| d.to_string()).collect();
    writeln!(out, "chaos of order q = {} over indices {} with sizes {}", schema.q, labels.join(" "), dims.join(" ")).ok();
    writeln!(out, "distribution: {}", schema.distribution.name()).ok();
    writeln!(out).ok();
    out.push_str(&table.render_text());
    writeln!(out).ok();
    writeln!(out, "parameters:").ok();
    for class in FlatteningClass::NAMED {
        let name = match class {
            FlatteningClass::Sigma => "σ",
            FlatteningClass::V => "v",
            _ => "r",
        };
        let value = params.get(class).value.map(|v| format!(" = {}", fmt_value(v))).unwrap_or_default();
        writeln!(out, "  {name} = {}{value}", params.render(class)).ok();
    }
    if table.is_upper_bound() {
        writeln!(out, "  (weighted chaos: parameters are upper bounds)").ok();
    }
    writeln!(out).ok();
    writeln!(out, "bound profiles:").ok();
    let numeric = schema.is_bound();
    let profiles: Vec<BoundProfile> = if numeric {
        all_profiles(&schema)?
    } else {
        Theorem::ALL.iter().map(|&t| BoundProfile::symbolic(t, schema.q)).collect()
    };
    for p in &profiles {
        writeln!(out, "  {}", p.canonical()).ok();
        if let Some(v) = p.numeric_value {
            writeln!(out, "    {} ≈ {}", p.instantiated(), fmt_value(v)).ok();
        }
    }
    if numeric {
        writeln!(out, "  note: hidden constants C_q, c_q set to 1").ok();
        if let Some(p) = profiles.iter().find(|p| p.notes.len() > 1) {
            writeln!(out, "  note: {}", p.notes[1]).ok();
        }
        let (best, why) = best_bound(&schema)?;
        writeln!(out).ok();
        writeln!(out, "best bound: {}", best.theorem).ok();
        writeln!(out, "  {why}").ok();
    }
    if let Some(dir) = &args.out {
        write_file(dir, "table.csv", &table.render_csv())?;
        write_file(dir, "profiles.json", &serde_json::to_string_pretty(&profiles).expect("profiles serialize"))?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct GraphJson<'a> {
    report: &'a chaosbound::graph::GraphBoundReport,
    sigma_check: &'a chaosbound::graph::SigmaBoundReport,
}

fn rational(r: num_rational::Ratio<i64>) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn cmd_graph(args: &GraphArgs) -> Result<String, Failure> {
    let shape = match load(&args.source)? {
        Input::Shape(s) => s,
        Input::Schema(_) => return Err(Failure::new(EXIT_USAGE, "graph expects a shape")),
    };
    let report = norm_exponents(&shape);
    let check = sigma_bound_check(&shape)?;
    if args.format == ReportFormat::Json {
        let body = GraphJson { report: &report, sigma_check: &check };
        return Ok(format!("{}\n", serde_json::to_string_pretty(&body).expect("report serializes")));
    }
    let mut out = String::new();
    let tuple = |vs: &[usize]| vs.iter().map(|&v| shape.names[v].as_str()).collect::<Vec<_>>().join(", ");
    writeln!(
        out,
        "shape: {} vertices, {} edges; U = ({}), V = ({})",
        shape.n_vertices(),
        shape.edges.len(),
        tuple(&shape.left),
        tuple(&shape.right)
    )
    .ok();
    if shape.edges.is_empty() {
        let n = args.n.unwrap_or(8).max(shape.n_vertices() as u64);
        let m = materialize_graph_matrix_trial(&shape, n, 0, 0, &Caps::default())?;
        let norm = spectral_norm(&m, DEFAULT_NORM_TOL, default_max_iters(m.rows().max(m.cols()))).value;
        writeln!(out, "deterministic; norm {} (n = {n})", fmt_value(norm)).ok();
        return Ok(out);
    }
    let sep = &report.separator;
    writeln!(out, "S_min = {} (size {})", shape.name_list(&sep.separator), sep.size).ok();
    writeln!(out, "certificate paths:").ok();
    for p in &sep.disjoint_paths {
        writeln!(out, "  {}", p.iter().map(|&v| shape.names[v].as_str()).collect::<Vec<_>>().join(" - ")).ok();
    }
    writeln!(out, "W_iso = {}", shape.name_list(&report.w_iso)).ok();
    writeln!(
        out,
        "poly n^({}), log power {} = 1/2·{}",
        rational(report.poly_exponent),
        rational(report.log_exponent),
        report.f
    )
    .ok();
    writeln!(
        out,
        "  |V| = {}, |S_min| = {}, |U∩V| = {}, |W| = {}, |W_iso| = {}, f = {}",
        shape.n_vertices(),
        sep.size,
        shape.both_sides().len(),
        shape.middle().len(),
        report.w_iso.len(),
        report.f
    )
    .ok();
    let edge = |e: usize| format!("{}{}", shape.names[shape.edges[e].0], shape.names[shape.edges[e].1]);
    let ord = &report.ordering;
    writeln!(out, "edge ordering: {}", ord.order.iter().map(|&e| edge(e)).collect::<Vec<_>>().join(" ")).ok();
    writeln!(out, "  k1 = {} path edges, k2 = {} cover edges, k = {} ≤ f = {}", ord.k1, ord.k2, ord.k(), report.f).ok();
    let sat = check.orientations.iter().filter(|o| o.satisfiable).count();
    let max = check.orientations.iter().map(|o| o.sigma_exponent).max().expect("at least one orientation");
    writeln!(
        out,
        "σ cross-check: {} orientations ({} satisfiable), max σ exponent {}, {}",
        check.orientations.len(),
        sat,
        rational(max),
        if check.tight {
            "equal to the poly exponent and attained at a minimum separator"
        } else if check.within {
            "within the poly exponent"
        } else {
            "ABOVE the poly exponent"
        }
    )
    .ok();
    Ok(out)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<String, Failure> {
    let schema = validated(bind(&expect_schema(load(&args.source)?), &args.dims)?)?;
    if !schema.is_bound() {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("verify needs numeric sizes; bind {} with --dims", schema.symbols().join(", ")),
        ));
    }
    let fault = args.inject_exponent_fault;
    let report = oracle_check_with(&schema, args.cap, |s, a| {
        let v = flattening_norm_sq(s, a).norm_sq_numeric.expect("bound schema");
        if fault {
            v / s.sizes().expect("bound schema")[0] as f64
        } else {
            v
        }
    })?;
    let mut out = String::new();
    let exact = schema.weight.is_trivial();
    writeln!(
        out,
        "oracle check: {} flattenings, {}",
        report.rows.len(),
        if exact { "formula must equal the explicit norm²" } else { "formula must bound the explicit norm²" }
    )
    .ok();
    for r in &report.rows {
        writeln!(
            out,
            "{} {:<12} formula {:<10} explicit {:<10} {}",
            r.class.symbol(),
            r.placements,
            fmt_value(r.formula_norm_sq),
            fmt_value(r.explicit_norm_sq),
            if r.pass { "ok" } else { "MISMATCH" }
        )
        .ok();
    }
    if !exact {
        writeln!(out, "upper-bound rows: {} (weighted chaos)", report.rows.len()).ok();
    }
    let failures: Vec<_> = report.failures().collect();
    if failures.is_empty() {
        writeln!(out, "all {} rows pass", report.rows.len()).ok();
        Ok(out)
    } else {
        let mut err = String::new();
        for r in &failures {
            writeln!(
                err,
                "mismatch at {} assignment {}: formula {} vs explicit {}",
                r.class.ascii(),
                r.placements,
                fmt_value(r.formula_norm_sq),
                fmt_value(r.explicit_norm_sq)
            )
            .ok();
        }
        writeln!(out, "{} of {} rows fail", failures.len(), report.rows.len()).ok();
        Err(Failure { code: EXIT_ORACLE, stdout: out, stderr: err })
    }
}

fn sample_config(input: &Input, s: &SamplingArgs, dims: Dims, default_trials: u64) -> Result<SampleConfig, Failure> {
    let (target, default_mode) = match input {
        Input::Schema(x) => (Target::Schema(validated(x.clone())?), SampleMode::Decoupled),
        Input::Shape(x) => (Target::Shape(x.clone()), SampleMode::Coupled),
    };
    let mut caps = Caps::default();
    if let Some(c) = s.cap {
        caps.cells = c;
    }
    Ok(SampleConfig {
        target,
        mode: s.mode.map(Into::into).unwrap_or(default_mode),
        dims,
        trials: s.trials.unwrap_or(default_trials) as usize,
        seed: s.seed,
        standardize: s.standardize,
        caps,
        ..SampleConfig::default()
    })
}

pub fn cmd_sample(args: &SampleArgs) -> Result<String, Failure> {
    let input = load(&args.source)?;
    let mut dims = args.sampling.dims.clone().unwrap_or_default();
    if let Some(n) = args.n {
        dims.insert("n".into(), n);
    }
    let config = sample_config(&input, &args.sampling, dims, 10)?;
    let report = monte_carlo(&config)?;
    if let Some(dir) = &args.sampling.out {
        write_file(dir, "sample.csv", &report.to_csv())?;
        write_file(dir, "sample.json", &report.to_json())?;
    }
    Ok(match args.format {
        SampleFormat::Csv => report.to_csv(),
        SampleFormat::Json => format!("{}\n", report.to_json()),
    })
}

/// Predicted growth exponent of the norm along the sweep: σ's largest degree
/// for schemas, the poly exponent for shapes swept in `n`.
pub fn predicted_exponent(input: &Input, sweep: &str, links: &[Link]) -> Option<f64> {
    match input {
        Input::Shape(shape) => {
            (sweep == "n").then(|| {
                let r = norm_exponents(shape).poly_exponent;
                *r.numer() as f64 / *r.denom() as f64
            })
        }
        Input::Schema(schema) => {
            let mut rate: BTreeMap<String, f64> = BTreeMap::from([(sweep.to_string(), 1.0)]);
            for l in links {
                if l.base == sweep {
                    rate.insert(l.symbol.clone(), l.power as f64);
                }
            }
            let params = parameters_from_table(schema.q, &build_table(&schema.unbind()));
            let top = params.sigma.norm_sq.terms().iter().map(|m| m.sweep_degree(&rate)).fold(0.0, f64::max);
            Some(top / 2.0)
        }
    }
}

pub fn cmd_scaling(args: &ScalingArgs) -> Result<String, Failure> {
    let input = load(&args.source)?;
    if args.sizes.len() < 3 {
        return Err(Failure::new(EXIT_USAGE, "scaling needs at least 3 sizes"));
    }
    let base = args.sampling.dims.clone().unwrap_or_default();
    let mut series = Vec::new();
    for &size in &args.sizes {
        let mut dims = base.clone();
        dims.insert(args.sweep.clone(), size);
        for l in &args.link {
            let b = *dims
                .get(&l.base)
                .ok_or_else(|| Failure::new(EXIT_USAGE, format!("link base `{}` is not bound", l.base)))?;
            let v = b
                .checked_pow(l.power)
                .ok_or_else(|| Failure::new(EXIT_USAGE, format!("{}^{} overflows", l.base, l.power)))?;
            dims.insert(l.symbol.clone(), v);
        }
        let config = sample_config(&input, &args.sampling, dims, 20)?;
        series.push((size as f64, monte_carlo(&config)?));
    }
    let fit = scaling_fit_reports(&series)?;
    let target = predicted_exponent(&input, &args.sweep, &args.link);
    if let Some(dir) = &args.sampling.out {
        write_file(dir, "scaling.csv", &fit.to_csv())?;
        write_file(dir, "scaling.json", &fit.to_json())?;
    }
    if args.format == ReportFormat::Json {
        let body = serde_json::json!({ "fit": fit, "target": target });
        return Ok(format!("{}\n", serde_json::to_string_pretty(&body).expect("json")));
    }
    let mut out = String::from("dim,mean,stderr\n");
    for p in &fit.points {
        writeln!(out, "{},{},{}", p.dim, p.mean, p.stderr).ok();
    }
    let target = target.map(fmt_value).unwrap_or_else(|| "unknown".into());
    writeln!(out, "slope {} ± {} (target {target})", fmt_value(fit.slope), fmt_value(fit.slope_ci)).ok();
    Ok(out)
}

pub fn dispatch(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Graph(a) => cmd_graph(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Scaling(a) => cmd_scaling(a),
    }
}

/// Parses and runs one invocation; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(f) => {
            let _ = out.write_all(f.stdout.as_bytes());
            if !f.stderr.is_empty() {
                let _ = writeln!(err, "error: {}", f.stderr.trim_end());
            }
            f.code
        }
    }
}
