//! `tcx` — command-line surface of the tensor-complex toolkit.
//!
//! The subcommands tie the library together end to end: build masked
//! grid domains, sample closed-form tensor fields onto them, verify the
//! composition and commutation identities of the named operator
//! complexes, run compatibility checks that combine local residuals
//! with period integrals, reconstruct potentials from compatible
//! fields, count cohomology dimensions from mesh topology, and render
//! any JSON report as a CSV table for external plotting.
//!
//! Exit codes separate scientific verdicts from tooling failures:
//! `0` success or a compatible verdict, `2` an incompatible verdict (or
//! a failed verification), `3` inconclusive, `1` usage and I/O errors.
//! Failures print a machine-readable `{"error":{...}}` object on
//! standard error; all file outputs are written atomically.
//!
//! `TC_THREADS` caps worker threads. Every pipeline stage currently
//! runs single-threaded with fixed-order reductions for determinism,
//! so the cap is validated and recorded in reports but never exceeded.

mod reports;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tcx_core::calculus::{self, MetricChart};
use tcx_core::cohomology;
use tcx_core::compat::{self, CheckKind, CheckOptions, CompatReport};
use tcx_core::expr::Expr;
use tcx_core::fields::{DomainRef, TensorField, Valence};
use tcx_core::io;
use tcx_core::isomorphisms::{self, Diagram};
use tcx_core::mesh::{build_domain, Chart, Domain, GridSpec, MaskRule};
use tcx_core::potentials::{self, GradKind, DEFAULT_PANELS};
use tcx_core::probe;
use tcx_core::{Error, Result};

use reports::{emit, input, render_csv, write_text_atomic, Input, TOOL, VERSION};

#[derive(Parser)]
#[command(
    name = "tcx",
    version,
    about = "Discrete tensor-complex toolkit: domains, fields, compatibility, potentials, cohomology"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build and write masked grid domains.
    Domain {
        #[command(subcommand)]
        cmd: DomainCmd,
    },
    /// Sample closed-form fields onto a domain.
    Field {
        #[command(subcommand)]
        cmd: FieldCmd,
    },
    /// Verify composition and commutation identities of a named complex.
    #[command(name = "verify-complex")]
    VerifyComplex(VerifyArgs),
    /// Compatibility checks: local residuals plus period integrals.
    Compat {
        #[command(subcommand)]
        cmd: CompatCmd,
    },
    /// Reconstruct potentials from compatible fields.
    Potential {
        #[command(subcommand)]
        cmd: PotentialCmd,
    },
    /// Betti numbers and the cohomology dimensions a complex inherits.
    Cohomology(CohomologyArgs),
    /// Render report files for external tools.
    Report {
        #[command(subcommand)]
        cmd: ReportCmd,
    },
}

#[derive(Subcommand)]
enum DomainCmd {
    /// Build a domain from a grid, a mask rule, and a chart.
    Build(DomainBuildArgs),
}

#[derive(Args)]
struct DomainBuildArgs {
    /// Node counts per axis, e.g. `33,33` or `17,17,9`.
    #[arg(long)]
    grid: String,
    /// Chart coordinates of the first node, e.g. `-1.8,-1.8`.
    #[arg(long, allow_hyphen_values = true)]
    origin: String,
    /// Node spacing per axis, e.g. `0.1125,0.1125`.
    #[arg(long, allow_hyphen_values = true)]
    spacing: String,
    /// Mask rule: `full`, `annulus(rin,rout)`, `solid-torus(R,r)`,
    /// `spherical-shell(rin,rout)`, or `box-minus-box`.
    #[arg(long, default_value = "full")]
    rule: String,
    /// Chart: `cartesian2`, `cartesian3`, or `spherical`.
    #[arg(long)]
    chart: String,
    /// Output domain file (`tdom-1` JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FieldCmd {
    /// Sample component expressions onto every masked-in node.
    Sample(FieldSampleArgs),
}

#[derive(Args)]
struct FieldSampleArgs {
    /// Domain file to sample on.
    #[arg(long)]
    domain: PathBuf,
    /// Valence: `scalar`, `vector`, `tensor20`, `tensor02sym`,
    /// `twopoint`, `point`, `curv4`, `curv5`, `form(k,m)`, ...
    #[arg(long)]
    valence: String,
    /// Component assignment `name=expression` over `x1,x2,x3`;
    /// repeatable. Missing components are zero.
    #[arg(long = "comp")]
    comps: Vec<String>,
    /// Output field file (`tfld-1` JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Complex id: `gcd`, `GCD`, `gc`, `sd`, `GC`, `SD`,
    /// `elasticity3d`, `elasticity2d`, `derham`, `codifferential`.
    #[arg(long)]
    complex: String,
    /// Domain file; its chart must match the complex.
    #[arg(long)]
    domain: PathBuf,
    /// Number of random polynomial probe fields.
    #[arg(long, default_value_t = 5)]
    probes: usize,
    /// Base seed; probe `i` uses `seed + i`.
    #[arg(long)]
    seed: u64,
    /// Residual tolerance for the pass verdict.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Sphere radius on the spherical chart.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CompatCmd {
    /// Run one compatibility check and report the verdict.
    Check(CompatArgs),
}

#[derive(Args)]
struct CompatArgs {
    /// Check kind, e.g. `grad2d`, `curlT3d`, `linstrain3d`, `beltrami`,
    /// `greenC`, `shell`.
    #[arg(long)]
    kind: String,
    /// Field file to check.
    #[arg(long)]
    field: PathBuf,
    /// Second fundamental form for the `shell` kind.
    #[arg(long)]
    second: Option<PathBuf>,
    /// Optional domain file; must match the field's embedded domain.
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Chain file with loops/surfaces overriding the canonical
    /// generators.
    #[arg(long)]
    chains: Option<PathBuf>,
    /// Local residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol_local: f64,
    /// Period integral tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol_period: f64,
    /// Ambient sectional curvature for the `greenC` kind.
    #[arg(long, default_value_t = 0.0)]
    khat: f64,
    /// Sphere radius on the spherical chart.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PotentialCmd {
    /// Reconstruct a potential whose derivative reproduces the field.
    Reconstruct(PotentialArgs),
}

#[derive(Args)]
struct PotentialArgs {
    /// Potential kind: `grad`, `Grad`, `surfGrad`, `displacement`
    /// (tree integration from a base node), `s` (planar rotated
    /// gradient), or `curlT` (cone homotopy about a star center).
    #[arg(long)]
    kind: String,
    /// Field file to reconstruct from.
    #[arg(long)]
    field: PathBuf,
    /// Base node multi-index `i,j` or `i,j,k` (tree-integrated kinds).
    #[arg(long)]
    base: Option<String>,
    /// Star-shape center `x,y,z` in chart coordinates (`curlT` kind).
    #[arg(long, allow_hyphen_values = true)]
    star_center: Option<String>,
    /// Simpson panels per radial segment (`curlT` kind).
    #[arg(long, default_value_t = DEFAULT_PANELS)]
    panels: usize,
    /// Local residual tolerance of the gating check.
    #[arg(long, default_value_t = 1e-6)]
    tol_local: f64,
    /// Period tolerance of the gating check.
    #[arg(long, default_value_t = 1e-6)]
    tol_period: f64,
    /// Sphere radius on the spherical chart.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Output field file for the potential.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CohomologyArgs {
    /// Domain file whose topology to measure.
    #[arg(long)]
    domain: PathBuf,
    /// Optional complex id (`gcd`, `gc`, `sd`, `calabi`,
    /// `elasticity2d`, `elasticity3d`, ...); prints its cohomology
    /// dimensions instead of raw Betti numbers.
    #[arg(long)]
    complex: Option<String>,
    /// Also write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Flatten a JSON report into `key,value` CSV rows.
    Render(RenderArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Input JSON report.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error("usage", &e.to_string());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = match &e {
                Error::NotCompatible { verdict } if verdict == "incompatible" => 2,
                Error::NotCompatible { .. } => 3,
                _ => 1,
            };
            emit_error(&error_kind(&e), &e.to_string());
            ExitCode::from(code)
        }
    }
}

/// Machine-readable error on standard error.
fn emit_error(kind: &str, message: &str) {
    let obj = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{obj}");
}

/// Stable error-kind token: the variant name of the library error.
fn error_kind(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| c == ' ' || c == '{' || c == '(')
        .next()
        .unwrap_or("error")
        .to_string()
}

/// Validated `TC_THREADS` cap (default 1; every stage is currently
/// single-threaded, so the cap is recorded rather than consumed).
fn thread_cap() -> Result<usize> {
    match std::env::var("TC_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n >= 1).ok_or(
            Error::UnknownId {
                kind: v,
                what: "TC_THREADS value".into(),
            },
        ),
    }
}

fn run(cli: Cli) -> Result<u8> {
    let threads = thread_cap()?;
    match cli.cmd {
        Cmd::Domain {
            cmd: DomainCmd::Build(a),
        } => domain_build(a),
        Cmd::Field {
            cmd: FieldCmd::Sample(a),
        } => field_sample(a),
        Cmd::VerifyComplex(a) => verify_complex(a, threads),
        Cmd::Compat {
            cmd: CompatCmd::Check(a),
        } => compat_check(a, threads),
        Cmd::Potential {
            cmd: PotentialCmd::Reconstruct(a),
        } => potential_reconstruct(a),
        Cmd::Cohomology(a) => cohomology_cmd(a, threads),
        Cmd::Report {
            cmd: ReportCmd::Render(a),
        } => report_render(a),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<T>().map_err(|_| Error::UnknownId {
                kind: s.to_string(),
                what: what.to_string(),
            })
        })
        .collect()
}

fn metric_for(chart: Chart, radius: f64) -> MetricChart {
    if chart == Chart::Spherical {
        MetricChart::spherical(radius)
    } else {
        MetricChart::cartesian(chart)
    }
}

fn read_domain_ref(path: &Path) -> Result<DomainRef> {
    Ok(Arc::new(io::read_domain(path)?))
}

// ---------------------------------------------------------------- domain

#[derive(Serialize)]
struct DomainSummary {
    out: String,
    chart: &'static str,
    rule: &'static str,
    nodes: usize,
    masked_in: usize,
}

fn domain_build(a: DomainBuildArgs) -> Result<u8> {
    let dims: Vec<usize> = parse_list(&a.grid, "grid")?;
    let origin: Vec<f64> = parse_list(&a.origin, "origin")?;
    let spacing: Vec<f64> = parse_list(&a.spacing, "spacing")?;
    let grid = GridSpec::new(dims, origin, spacing)?;
    let rule = MaskRule::parse(&a.rule)?;
    let chart = Chart::parse(&a.chart)?;
    let domain = build_domain(grid, rule, chart)?;
    io::write_domain(&a.out, &domain)?;
    let summary = DomainSummary {
        out: a.out.display().to_string(),
        chart: domain.chart.name(),
        rule: domain.rule.name(),
        nodes: domain.grid.node_count(),
        masked_in: domain.mask.iter().filter(|&&m| m).count(),
    };
    emit(&summary, None)?;
    Ok(0)
}

// ----------------------------------------------------------------- field

#[derive(Serialize)]
struct FieldSummary {
    out: String,
    valence: String,
    components: usize,
    nodes: usize,
}

fn field_sample(a: FieldSampleArgs) -> Result<u8> {
    let domain = read_domain_ref(&a.domain)?;
    let valence = Valence::parse(&a.valence, domain.dim())?;
    let mut comps: Vec<(String, Expr)> = Vec::with_capacity(a.comps.len());
    for assign in &a.comps {
        let (name, rhs) = assign.split_once('=').ok_or_else(|| Error::UnknownId {
            kind: assign.clone(),
            what: "component assignment (expected name=expression)".into(),
        })?;
        comps.push((name.trim().to_string(), Expr::parse(rhs)?));
    }
    let field = TensorField::sample(domain, valence, &comps)?;
    io::write_field(&a.out, &field)?;
    let summary = FieldSummary {
        out: a.out.display().to_string(),
        valence: field.valence.name(field.dim()),
        components: field.data.len(),
        nodes: field.domain.grid.node_count(),
    };
    emit(&summary, None)?;
    Ok(0)
}

// -------------------------------------------------------- verify-complex

#[derive(Serialize)]
struct CompositionRow {
    chain: usize,
    first: &'static str,
    second: &'static str,
    probe: usize,
    seed: u64,
    residual: f64,
}

#[derive(Serialize)]
struct DiagramRow {
    diagram: &'static str,
    tensor_op: &'static str,
    form_op: &'static str,
    probe: usize,
    seed: u64,
    residual: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    tool: &'static str,
    version: &'static str,
    threads: usize,
    inputs: Vec<Input>,
    complex: String,
    chart: &'static str,
    probes: usize,
    seed: u64,
    tol: f64,
    composition: Vec<CompositionRow>,
    diagrams: Vec<DiagramRow>,
    max_residual: f64,
    pass: bool,
}

/// The commutation diagram exercising the same operators as a complex.
/// The pure form-side complexes have no tensor/form square to compare.
fn diagram_for(complex_id: &str) -> Option<Diagram> {
    let name = match complex_id {
        "gcd" => "gcd-forms",
        "GCD" => "GCD-forms",
        "gc" => "gc-forms",
        "sd" => "sd-forms",
        "GC" => "GC-forms",
        "SD" => "SD-forms",
        "elasticity3d" => "elasticity3d-calabi",
        "elasticity2d" => "elasticity2d-calabi",
        _ => return None,
    };
    isomorphisms::diagrams().into_iter().find(|d| d.name == name)
}

fn verify_complex(a: VerifyArgs, threads: usize) -> Result<u8> {
    let domain = read_domain_ref(&a.domain)?;
    let complex = calculus::complex_by_id(&a.complex)?;
    if complex.chart != domain.chart {
        return Err(Error::ChartMismatch {
            op: format!("verify-complex {}", complex.id),
            expected: complex.chart.name().into(),
            got: domain.chart.name().into(),
        });
    }
    let mc = metric_for(domain.chart, a.radius);
    let diagram = diagram_for(&a.complex);

    let mut composition = Vec::new();
    let mut diagrams = Vec::new();
    for p in 0..a.probes {
        let seed = a.seed + p as u64;
        for (ci, chain) in complex.chains.iter().enumerate() {
            let mut valence = chain.start;
            for pair in chain.ops.windows(2) {
                let probe_field = probe::polynomial_probe(&domain, valence, seed);
                let residual =
                    calculus::composition_residual(pair[0], pair[1], &probe_field, Some(&mc))?;
                composition.push(CompositionRow {
                    chain: ci,
                    first: pair[0].name(),
                    second: pair[1].name(),
                    probe: p,
                    seed,
                    residual,
                });
                valence = pair[0].output_valence(valence, domain.dim())?;
            }
        }
        if let Some(d) = &diagram {
            for sq in &d.squares {
                let probe_field = probe::polynomial_probe(&domain, sq.probe, seed);
                let residual = isomorphisms::diagram_residual(
                    (sq.iso_in, sq.iso_out),
                    sq.op_tensor,
                    sq.op_form,
                    sq.sign,
                    &probe_field,
                    Some(&mc),
                )?;
                diagrams.push(DiagramRow {
                    diagram: d.name,
                    tensor_op: sq.op_tensor.name(),
                    form_op: sq.op_form.name(),
                    probe: p,
                    seed,
                    residual,
                });
            }
        }
    }

    let residuals = composition
        .iter()
        .map(|r| r.residual)
        .chain(diagrams.iter().map(|r| r.residual));
    let mut max_residual: f64 = 0.0;
    let mut saw_nan = false;
    for r in residuals {
        if r.is_nan() {
            saw_nan = true;
        } else {
            max_residual = max_residual.max(r);
        }
    }
    let pass = !saw_nan && max_residual <= a.tol;

    let report = VerifyReport {
        tool: TOOL,
        version: VERSION,
        threads,
        inputs: vec![input("domain", &a.domain)?],
        complex: complex.id.to_string(),
        chart: complex.chart.name(),
        probes: a.probes,
        seed: a.seed,
        tol: a.tol,
        composition,
        diagrams,
        max_residual,
        pass,
    };
    emit(&report, a.out.as_deref())?;
    Ok(if pass {
        0
    } else if saw_nan {
        3
    } else {
        2
    })
}

// ---------------------------------------------------------------- compat

#[derive(Serialize)]
struct CompatOptionsEcho {
    tol_local: f64,
    tol_period: f64,
    khat: f64,
    radius: f64,
}

#[derive(Serialize)]
struct CompatEnvelope {
    tool: &'static str,
    version: &'static str,
    threads: usize,
    inputs: Vec<Input>,
    options: CompatOptionsEcho,
    report: CompatReport,
}

/// The `--domain` flag re-states which domain a check is about; reject
/// the run when it disagrees with the domain embedded in the field.
fn require_same_domain(path: &Path, given: &Domain, embedded: &Domain) -> Result<()> {
    let same = given.grid.dims == embedded.grid.dims
        && given.grid.origin == embedded.grid.origin
        && given.grid.spacing == embedded.grid.spacing
        && given.chart == embedded.chart
        && given.mask == embedded.mask;
    if same {
        Ok(())
    } else {
        Err(Error::Format {
            path: path.display().to_string(),
            msg: "domain file does not match the domain embedded in the field".into(),
        })
    }
}

fn compat_check(a: CompatArgs, threads: usize) -> Result<u8> {
    let kind = CheckKind::parse(&a.kind)?;
    let field = io::read_field(&a.field)?;
    let mut inputs = vec![input("field", &a.field)?];
    let second = match &a.second {
        Some(p) => {
            inputs.push(input("second", p)?);
            Some(io::read_field(p)?)
        }
        None => None,
    };
    if let Some(dpath) = &a.domain {
        let given = io::read_domain(dpath)?;
        require_same_domain(dpath, &given, &field.domain)?;
        inputs.push(input("domain", dpath)?);
    }
    let mut opts = CheckOptions {
        tol_local: a.tol_local,
        tol_period: a.tol_period,
        khat: a.khat,
        metric: Some(metric_for(field.domain.chart, a.radius)),
        ..CheckOptions::default()
    };
    if let Some(cpath) = &a.chains {
        let (loops, surfaces) = io::read_chains(cpath)?;
        opts.loops = Some(loops);
        opts.surfaces = Some(surfaces);
        inputs.push(input("chains", cpath)?);
    }
    let report = compat::check(kind, &field, second.as_ref(), &opts)?;
    let verdict = report.verdict;
    let envelope = CompatEnvelope {
        tool: TOOL,
        version: VERSION,
        threads,
        inputs,
        options: CompatOptionsEcho {
            tol_local: a.tol_local,
            tol_period: a.tol_period,
            khat: a.khat,
            radius: a.radius,
        },
        report,
    };
    emit(&envelope, a.out.as_deref())?;
    Ok(match verdict {
        compat::Verdict::Compatible => 0,
        compat::Verdict::Incompatible => 2,
        compat::Verdict::Inconclusive => 3,
    })
}

// ------------------------------------------------------------- potential

#[derive(Serialize)]
struct PotentialSummary {
    out: String,
    kind: String,
    valence: String,
    components: usize,
}

fn potential_reconstruct(a: PotentialArgs) -> Result<u8> {
    let field = io::read_field(&a.field)?;
    let opts = CheckOptions {
        tol_local: a.tol_local,
        tol_period: a.tol_period,
        metric: Some(metric_for(field.domain.chart, a.radius)),
        ..CheckOptions::default()
    };
    let base = |flag: &Option<String>| -> Result<Vec<usize>> {
        let s = flag.as_deref().ok_or_else(|| Error::UnknownId {
            kind: "missing --base".into(),
            what: "base node (required for this kind)".into(),
        })?;
        parse_list(s, "base")
    };
    let potential = match a.kind.as_str() {
        "curlT" => {
            let center: Option<Vec<f64>> = a
                .star_center
                .as_deref()
                .map(|s| parse_list(s, "star-center"))
                .transpose()?;
            potentials::reconstruct_curlT(&field, center.as_deref(), a.panels, &opts)?
        }
        "s" => potentials::reconstruct_s(&field, &base(&a.base)?, &opts)?,
        other => {
            potentials::reconstruct_grad(GradKind::parse(other)?, &field, &base(&a.base)?, &opts)?
        }
    };
    io::write_field(&a.out, &potential)?;
    let summary = PotentialSummary {
        out: a.out.display().to_string(),
        kind: a.kind,
        valence: potential.valence.name(potential.dim()),
        components: potential.data.len(),
    };
    emit(&summary, None)?;
    Ok(0)
}

// ------------------------------------------------------------ cohomology

#[derive(Serialize)]
struct CohomologyEnvelope {
    tool: &'static str,
    version: &'static str,
    threads: usize,
    inputs: Vec<Input>,
    betti: cohomology::BettiReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    complex: Option<cohomology::ComplexDims>,
}

fn cohomology_cmd(a: CohomologyArgs, threads: usize) -> Result<u8> {
    let domain = io::read_domain(&a.domain)?;
    let betti = cohomology::betti(&domain)?;
    let complex = a
        .complex
        .as_deref()
        .map(|id| cohomology::complex_dims(id, &betti))
        .transpose()?;

    // Compact verdict on standard output: the dimension table when a
    // complex was named, the Betti numbers otherwise.
    let mut map = serde_json::Map::new();
    match &complex {
        Some(dims) => {
            for (name, dim) in &dims.dims {
                map.insert(name.clone(), serde_json::json!(dim));
            }
        }
        None => {
            for (k, b) in betti.betti.iter().enumerate() {
                map.insert(format!("b{k}"), serde_json::json!(b));
            }
        }
    }
    println!("{}", serde_json::Value::Object(map));

    if a.out.is_some() {
        let envelope = CohomologyEnvelope {
            tool: TOOL,
            version: VERSION,
            threads,
            inputs: vec![input("domain", &a.domain)?],
            betti,
            complex,
        };
        let text = reports::to_json(&envelope)?;
        write_text_atomic(a.out.as_deref().unwrap(), &text)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------- report

fn report_render(a: RenderArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::Io {
        path: a.input.display().to_string(),
        source: e,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: a.input.display().to_string(),
            source: e,
        })?;
    let csv = render_csv(&value);
    match &a.out {
        Some(path) => write_text_atomic(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}
