//! Command-line front end: reads a JSON run configuration, applies flag
//! overrides, dispatches to the engine and writes a versioned JSON report.

pub mod config;
pub mod csv;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use finsler_core::comparison::{
    berwald_density_check, knorm, myers_constants, myers_verify, segment_check, volume_comparison_check, BallSpec,
    BerwaldOptions, SamplingOptions, SegmentOptions, VolumeOptions, SCHEMA_VERSION,
};
use finsler_core::connection::{min_ricci, MinRicciOptions};
use finsler_core::geodesic::{integrate_geodesic, GeodesicOptions};
use finsler_core::indicatrix::uniformity_constant;
use finsler_core::measures::ball_measure;
use finsler_core::{ChartPoint, ComparisonReport, FinslerError, MeasureKind, MetricModel, TangentSample};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{ConfigError, RunConfig};
pub use csv::emit_geodesic_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Finsler geometry engine and comparison checks")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model as inline JSON, e.g. '{"family":"roundSphere","dim":2,"radius":1}'.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long = "K", global = true)]
    pub big_k: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long = "R", global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true)]
    pub centers: Option<usize>,
    #[arg(long, global = true)]
    pub pairs: Option<usize>,
    /// Measure: BH or HT.
    #[arg(long, global = true)]
    pub kind: Option<MeasureKind>,
    /// Segment test function as JSON, e.g. '{"kind":"one"}'.
    #[arg(long, global = true)]
    pub f: Option<String>,
    /// Path of the JSON report.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Path of the geodesic CSV trace.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Minimal Ricci curvature and uniformity constant at spread points.
    Curvature,
    /// Integrates a geodesic; writes a CSV trace with --csv.
    Geodesic,
    /// Measure of a forward ball.
    Ball,
    /// Integral curvature norm.
    Knorm,
    /// Constant chain of the diameter bound.
    Constants,
    /// Runs one comparison check.
    Verify {
        #[arg(value_enum)]
        check: Check,
    },
    /// Every command and every check applicable to the model.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Segment,
    Myers,
    Berwald,
    Volcomp,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Curvature => "curvature".into(),
            Command::Geodesic => "geodesic".into(),
            Command::Ball => "ball".into(),
            Command::Knorm => "knorm".into(),
            Command::Constants => "constants".into(),
            Command::Verify { check } => format!("verify {}", check.name()),
            Command::All => "all".into(),
        }
    }
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Segment => "segment",
            Check::Myers => "myers",
            Check::Berwald => "berwald",
            Check::Volcomp => "volcomp",
        }
    }
}

/// Serialized report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub timing: Timing,
    pub results: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Config(ConfigError),
    Engine(FinslerError),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(m) | RunError::Io(m) => f.write_str(m),
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<FinslerError> for RunError {
    fn from(e: FinslerError) -> Self {
        RunError::Engine(e)
    }
}

/// Outcome of a command: a JSON payload, summary lines and the verdict.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: Value,
    pub summary: Vec<String>,
    pub pass: bool,
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, field: &str) -> Result<T, RunError> {
    serde_json::from_str(text).map_err(|e| {
        RunError::Config(ConfigError {
            field: field.into(),
            constraint: format!("malformed JSON: {e}"),
        })
    })
}

/// Merges file, flags and defaults (flags > file > defaults).
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg: RunConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Io(format!("cannot read config {}: {e}", path.display())))?;
            parse_json(&text, "config")?
        }
        None => RunConfig::default(),
    };
    if let Some(m) = &cli.model {
        cfg.model = Some(parse_json(m, "model")?);
    }
    if let Some(f) = &cli.f {
        cfg.segment.f = parse_json(f, "segment.f")?;
    }
    let p = &mut cfg.params;
    macro_rules! set {
        ($src:expr, $dst:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(cli.q, p.q);
    set!(cli.big_k, p.big_k);
    set!(cli.k, p.k);
    set!(cli.radius, p.radius);
    set!(cli.rho, p.rho);
    set!(cli.alpha, p.alpha);
    if cli.delta.is_some() {
        p.delta = cli.delta;
    }
    let s = &mut cfg.sampling;
    if cli.seed.is_some() {
        s.seed = cli.seed;
    }
    set!(cli.count, s.count);
    set!(cli.centers, s.centers);
    set!(cli.pairs, s.pairs);
    set!(cli.kind, s.kind);
    if cli.out.is_some() {
        cfg.output.report = cli.out.clone();
    }
    if cli.csv.is_some() {
        cfg.output.csv = cli.csv.clone();
    }
    if cli.tolerance.is_some() {
        cfg.tolerance = cli.tolerance;
    }
    cfg.command = Some(cli.command.name());
    Ok(cfg)
}

fn default_balls(model: &MetricModel, radius: f64) -> (BallSpec, BallSpec) {
    let n = model.dim();
    let r = (0.5 * radius).min(0.25 * model.safe_radius());
    let c1 = ChartPoint::origin(n);
    let mut x = vec![0.0; n];
    x[0] = if model.num_charts() > 1 { (0.5 * r).tan() } else { r };
    let c2 = ChartPoint::new(0, x);
    (BallSpec { center: c1, radius: r }, BallSpec { center: c2, radius: r })
}

fn report_outcome(mut report: ComparisonReport, cfg: &RunConfig) -> Outcome {
    if let Some(t) = cfg.tolerance {
        report.retolerance(t);
    }
    let mut summary = vec![format!(
        "{} [{}]: {} (lhs {:.6e}, rhs {:.6e}, margin {:.3e}{})",
        report.check,
        report.model,
        if report.pass { "PASS" } else { "FAIL" },
        report.lhs,
        report.rhs,
        report.margin,
        if report.asserted { "" } else { ", informational" }
    )];
    for p in &report.parts {
        summary.push(format!(
            "  {}: {} (lhs {:.6e}, rhs {:.6e})",
            p.check,
            if p.pass { "pass" } else { "FAIL" },
            p.lhs,
            p.rhs
        ));
    }
    summary.extend(report.notes.iter().map(|n| format!("  note: {n}")));
    Outcome {
        pass: report.pass,
        results: serde_json::to_value(&report).expect("report serializes"),
        summary,
    }
}

fn run_check(check: Check, cfg: &RunConfig) -> Result<Outcome, RunError> {
    let model = cfg.model()?;
    let seed = cfg.seed()?;
    let p = &cfg.params;
    let s = &cfg.sampling;
    let sampling = SamplingOptions {
        kind: s.kind,
        centers: s.centers,
        count: s.count,
        pairs: s.pairs,
    };
    let report = match check {
        Check::Segment => {
            let (d1, d2) = default_balls(model, p.radius);
            let a1 = cfg.segment.a1.clone().unwrap_or(d1);
            let a2 = cfg.segment.a2.clone().unwrap_or(d2);
            let opts = SegmentOptions {
                kind: s.kind,
                k: p.k,
                ..Default::default()
            };
            segment_check(model, &a1, &a2, &cfg.segment.f, s.pairs, seed, &opts)?
        }
        Check::Myers => myers_verify(model, p.q, p.big_k, p.radius, p.rho, seed, &sampling)?,
        Check::Berwald => {
            let opts = BerwaldOptions {
                q: p.q,
                big_k: p.big_k,
                radius: p.radius.min(model.safe_radius()),
                sampling,
            };
            berwald_density_check(model, seed, &opts)?
        }
        Check::Volcomp => {
            cfg.validate_volume()?;
            let opts = VolumeOptions {
                kind: s.kind,
                count: s.count,
                ..Default::default()
            };
            volume_comparison_check(model, p.q, p.k, p.radius, p.alpha, seed, &opts)?
        }
    };
    Ok(report_outcome(report, cfg))
}

fn run_command(command: Command, cfg: &RunConfig) -> Result<Outcome, RunError> {
    let model = cfg.model()?;
    let seed = cfg.seed()?;
    let p = &cfg.params;
    let s = &cfg.sampling;
    let n = model.dim();
    match command {
        Command::Curvature => {
            let centers = model.spread_points(s.centers);
            let opts = MinRicciOptions::for_dim(n);
            let mut rows = Vec::new();
            let mut summary = Vec::new();
            for c in &centers {
                let m = min_ricci(model, c, &opts)?;
                summary.push(format!("min Ric at chart {} {:?}: {:.9}", c.chart, c.x, m.value));
                rows.push(json!({"point": c, "minRicci": m}));
            }
            let lambda = uniformity_constant(model, &centers, if n <= 2 { 64 } else { 16 })?;
            summary.push(format!("uniformity constant: {:.9}", lambda.value));
            Ok(Outcome {
                results: json!({"kind": "curvature", "points": rows, "uniformity": lambda}),
                summary,
                pass: true,
            })
        }
        Command::Geodesic => {
            let g = &cfg.geodesic;
            let start = g.point.clone().unwrap_or_else(|| ChartPoint::origin(n));
            let v = match &g.velocity {
                Some(v) => v.clone(),
                None => {
                    let mut e = vec![0.0; n];
                    e[0] = 1.0;
                    let f = model.f(&start.x, &e);
                    e.iter().map(|c| c / f).collect()
                }
            };
            let path = integrate_geodesic(model, &TangentSample::at(&start, v), g.duration, &GeodesicOptions::default())?;
            let end = path.end().point(n);
            let mut summary = vec![format!(
                "geodesic: length {:.12}, {} nodes, end chart {} {:?}",
                path.length(model),
                path.nodes().len(),
                end.chart,
                end.x
            )];
            if let Some(csv) = &cfg.output.csv {
                emit_geodesic_csv(csv, model, &path).map_err(RunError::Io)?;
                summary.push(format!("trace written to {}", csv.display()));
            }
            Ok(Outcome {
                results: json!({
                    "kind": "geodesic", "length": path.length(model), "nodes": path.nodes().len(),
                    "end": end, "speedDrift": path.speed_drift(model),
                }),
                summary,
                pass: true,
            })
        }
        Command::Ball => {
            let center = cfg.geodesic.point.clone().unwrap_or_else(|| ChartPoint::origin(n));
            let est = ball_measure(model, &center, p.radius, s.kind, s.count, seed)?;
            Ok(Outcome {
                summary: vec![format!(
                    "{} measure of B+({}): {:.9} ± {:.3e}",
                    s.kind.tag(),
                    p.radius,
                    est.mean,
                    est.standard_error
                )],
                results: json!({"kind": "ball", "estimate": est}),
                pass: true,
            })
        }
        Command::Knorm => {
            let centers = model.spread_points(s.centers);
            let est = knorm(model, p.q, p.big_k, p.radius, s.kind, &centers, s.count, seed)?;
            Ok(Outcome {
                summary: vec![format!(
                    "K̄(q={}, K={}, R={}) = {:.9} ± {:.3e} over {} centers",
                    p.q,
                    p.big_k,
                    p.radius,
                    est.value,
                    est.standard_error,
                    est.centers.len()
                )],
                results: json!({"kind": "knorm", "estimate": est}),
                pass: true,
            })
        }
        Command::Constants => {
            let delta = match p.delta {
                Some(d) => d,
                None => finsler_core::comparison::measured_delta(model, &model.spread_points(s.centers))?,
            };
            let c = myers_constants(n, p.q, p.k, p.big_k, delta, p.radius, p.rho)?;
            Ok(Outcome {
                summary: vec![format!(
                    "constants: C = {:.9e}, C_rho = {:.9e}, C_q = {:.9e}, eps = {:.9e}{}",
                    c.segment,
                    c.c_rho,
                    c.c_q,
                    c.eps,
                    if c.reduced { " (reduced radius)" } else { "" }
                )],
                results: json!({"kind": "constants", "constants": c}),
                pass: true,
            })
        }
        Command::Verify { check } => run_check(check, cfg),
        Command::All => run_all(cfg),
    }
}

fn run_all(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let model = cfg.model()?;
    let mut results = serde_json::Map::new();
    let mut summary = Vec::new();
    let mut pass = true;
    let mut skipped = Vec::new();
    let commands = [
        Command::Curvature,
        Command::Geodesic,
        Command::Ball,
        Command::Knorm,
        Command::Constants,
        Command::Verify { check: Check::Segment },
        Command::Verify { check: Check::Myers },
        Command::Verify { check: Check::Berwald },
        Command::Verify { check: Check::Volcomp },
    ];
    for c in commands {
        let reason = match c {
            Command::Verify { check: Check::Myers } if !model.is_compact() => Some("model is not compact".to_string()),
            Command::Verify { check: Check::Berwald } if !model.is_berwald() => Some("model is not Berwald".to_string()),
            Command::Verify { check: Check::Volcomp } => cfg.validate_volume().err().map(|e| e.to_string()),
            _ => None,
        };
        if let Some(r) = reason {
            summary.push(format!("{}: skipped ({r})", c.name()));
            skipped.push(json!({"command": c.name(), "reason": r}));
            continue;
        }
        let sub = match c {
            Command::Geodesic => {
                let mut quiet = cfg.clone();
                quiet.output.csv = None;
                run_command(c, &quiet)
            }
            _ => run_command(c, cfg),
        };
        match sub {
            Ok(o) => {
                pass &= o.pass;
                summary.extend(o.summary);
                results.insert(c.name(), o.results);
            }
            Err(RunError::Engine(e)) => {
                summary.push(format!("{}: skipped ({e})", c.name()));
                skipped.push(json!({"command": c.name(), "reason": e.to_string()}));
            }
            Err(e) => return Err(e),
        }
    }
    results.insert("skipped".into(), Value::Array(skipped));
    Ok(Outcome {
        results: Value::Object(results),
        summary,
        pass,
    })
}

/// Runs the configured command and writes the report.
pub fn execute(cfg: &RunConfig, command: Command) -> Result<(ReportEnvelope, Outcome), RunError> {
    // The volume hypotheses are reported first: they are the stricter ones.
    if let Command::Verify { check: Check::Volcomp } = command {
        cfg.validate_volume()?;
    }
    cfg.validate_common()?;
    let started = Instant::now();
    let outcome = run_command(command, cfg)?;
    let envelope = ReportEnvelope {
        schema_version: SCHEMA_VERSION,
        tool: "finsler".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        timing: Timing {
            seconds: started.elapsed().as_secs_f64(),
        },
        results: outcome.results.clone(),
    };
    if let Some(path) = &cfg.output.report {
        let text = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
        std::fs::write(path, text).map_err(|e| RunError::Io(format!("cannot write report {}: {e}", path.display())))?;
    }
    Ok((envelope, outcome))
}

/// Entry point: returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(&cfg, cli.command) {
        Ok((_, outcome)) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if outcome.pass {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
