//! `cmv-spectral`: data generation, forward spectral pipelines, inversion and
//! invariant verification for matrix CMV operators.
//!
//! Every command prints one JSON report. Exit codes: 0 when all requested
//! checks pass, 1 when a check fails, 2 when the command could not run.

mod codec;
mod pipeline;
mod suite;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmv_core::verblunsky::{sample_window, VerblunskyData};
use cmv_core::{CmvError, ComplexMatrix};
use serde_json::{json, Value};

use pipeline::{Route, SideArg, Target};

#[derive(Debug)]
pub enum Failure {
    Core(CmvError),
    Input(String),
    Io(String),
}

impl From<CmvError> for Failure {
    fn from(e: CmvError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Core(e) => {
                let debug = format!("{e:?}");
                let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Core").to_string();
                (kind, e.to_string())
            }
            Failure::Input(m) => ("InvalidInput".into(), m.clone()),
            Failure::Io(m) => ("Io".into(), m.clone()),
        };
        json!({ "kind": kind, "message": message })
    }
}

#[derive(Parser, Debug)]
#[command(name = "cmv-spectral", version, about = "Spectral theory toolkit for CMV operators with matrix Verblunsky coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a window of Verblunsky coefficients.
    Gen {
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute measures, moments, Weyl functions and Green's data.
    Forward {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        k0: Option<i64>,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Comma-separated subset of artifacts to emit.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Target::Measures, Target::Moments, Target::Weyl, Target::Greens])]
        targets: Vec<Target>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover coefficients from a forward report.
    Invert {
        /// Forward report.
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        inv: InvertArgs,
        /// Data file to measure errors against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample or load data, run forward and invert, and compare.
    Roundtrip {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        k0: Option<i64>,
        #[command(flatten)]
        inv: InvertArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites.
    Verify {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        k0: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct SampleArgs {
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Number of coefficients.
    #[arg(long, default_value_t = 48)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    k_min: i64,
    #[arg(long, default_value_t = 0.5)]
    norm_cap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use `α_k = c·I` at every site instead of sampling.
    #[arg(long, allow_hyphen_values = true)]
    constant: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Data file; when absent the coefficients are sampled.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    sample: SampleArgs,
}

#[derive(Args, Debug, Clone)]
struct InvertArgs {
    #[arg(long, value_enum, default_value_t = Route::Gh)]
    route: Route,
    #[arg(long, value_enum, default_value_t = SideArg::Full)]
    side: SideArg,
    /// Taylor order (full lattice) or coefficient count per side (half lattice).
    #[arg(long)]
    order: Option<usize>,
    /// Largest acceptable error inside the guaranteed window.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Per-site error table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn threads() -> usize {
    std::env::var("CMV_SPECTRAL_THREADS").ok().and_then(|s| s.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

fn provenance(extra: Value) -> Value {
    let t = threads();
    let mut p = json!({
        "tool": "cmv-spectral",
        "version": env!("CARGO_PKG_VERSION"),
        "threads": t,
        "parallel": t > 1,
    });
    if let (Some(p), Value::Object(e)) = (p.as_object_mut(), extra) {
        p.extend(e);
    }
    p
}

fn sample(a: &SampleArgs) -> Result<VerblunskyData, Failure> {
    if a.m == 0 || a.window < 2 {
        return Err(CmvError::BadConfig("need m ≥ 1 and at least two coefficients".into()).into());
    }
    match a.constant {
        Some(x) if x.abs() < 1.0 => {
            Ok(VerblunskyData::derive(a.k_min, vec![ComplexMatrix::identity(a.m).scale_re(x); a.window])?)
        }
        Some(x) => Err(CmvError::BadConfig(format!("constant {x} must lie in (-1, 1)")).into()),
        None => Ok(sample_window(a.seed, a.m, a.k_min, a.window, a.norm_cap)?),
    }
}

fn sample_meta(a: &SampleArgs) -> Value {
    match a.constant {
        Some(x) => json!({ "constant": x }),
        None => json!({ "seed": a.seed, "norm_cap": a.norm_cap }),
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(source: &SourceArgs) -> Result<(VerblunskyData, Value), Failure> {
    match &source.input {
        Some(p) => {
            let v = read_json(p)?;
            Ok((codec::parse_data(&v)?, json!({ "input": p.display().to_string() })))
        }
        None => Ok((sample(&source.sample)?, sample_meta(&source.sample))),
    }
}

fn center(d: &VerblunskyData, k0: Option<i64>) -> i64 {
    k0.unwrap_or(d.k_min() + d.len() as i64 / 2)
}

fn write_csv(path: &Path, errors: &BTreeMap<i64, f64>, window: (i64, i64)) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["site", "error", "in_window"]).map_err(io)?;
    for (k, e) in errors {
        let inside = window.0 <= *k && *k <= window.1;
        w.write_record([k.to_string(), format!("{e:e}"), inside.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::Io(e.to_string()))
}

/// Report and whether every requested check passed.
type Outcome = (Value, bool);

fn compare(inv: &pipeline::Inversion, reference: &VerblunskyData, args: &InvertArgs) -> Result<Outcome, Failure> {
    let errors = inv.errors(reference);
    if let Some(path) = &args.csv {
        write_csv(path, &errors, inv.window)?;
    }
    let mut report = inv.to_json(Some(&errors));
    let max = report["max_window_error"].as_f64().unwrap_or(f64::INFINITY);
    let pass = max < args.tol;
    report["pass"] = json!(pass);
    Ok((report, pass))
}

fn run(cmd: &Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::Gen { sample: a, .. } => {
            let d = sample(a)?;
            Ok((codec::data_file(&d, sample_meta(a)), true))
        }
        Command::Forward { source, k0, order, targets, .. } => {
            let (d, meta) = load(source)?;
            let k0 = center(&d, *k0);
            let mut report = pipeline::forward(&d, k0, *order, targets)?;
            report["provenance"] = provenance(json!({ "source": meta }));
            Ok((report, true))
        }
        Command::Invert { input, inv, reference, .. } => {
            let forward = read_json(input)?;
            let result = pipeline::invert(&forward, inv.route, inv.side, inv.order)?;
            let (mut report, pass) = match reference {
                Some(p) => compare(&result, &codec::parse_data(&read_json(p)?)?, inv)?,
                None => (result.to_json(None), true),
            };
            report["provenance"] = provenance(json!({ "input": input.display().to_string(), "tol": inv.tol }));
            Ok((report, pass))
        }
        Command::Roundtrip { source, k0, inv, .. } => {
            let (d, meta) = load(source)?;
            let k0 = center(&d, *k0);
            let order = inv.order.unwrap_or(3);
            let forward = pipeline::forward(&d, k0, order, &[Target::Moments, Target::Weyl, Target::Greens])?;
            // Pass through text so the interchange format is exercised.
            let forward: Value = serde_json::from_str(&forward.to_string()).map_err(|e| Failure::Input(e.to_string()))?;
            let result = pipeline::invert(&forward, inv.route, inv.side, Some(order))?;
            let (mut report, pass) = compare(&result, &d, inv)?;
            report["command"] = json!("roundtrip");
            report["provenance"] = provenance(json!({ "source": meta, "order": order, "tol": inv.tol }));
            Ok((report, pass))
        }
        Command::Verify { source, k0, .. } => {
            let (d, meta) = load(source)?;
            let k0 = center(&d, *k0);
            let checks = suite::run_all(&d, k0, threads());
            let pass = checks.iter().all(suite::Check::passed);
            let report = json!({
                "command": "verify",
                "k0": k0,
                "pass": pass,
                "checks": checks.iter().map(suite::Check::to_json).collect::<Vec<_>>(),
                "provenance": provenance(json!({ "source": meta })),
            });
            Ok((report, pass))
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Gen { .. } => "gen",
        Command::Forward { .. } => "forward",
        Command::Invert { .. } => "invert",
        Command::Roundtrip { .. } => "roundtrip",
        Command::Verify { .. } => "verify",
    }
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Gen { out, .. }
        | Command::Forward { out, .. }
        | Command::Invert { out, .. }
        | Command::Roundtrip { out, .. }
        | Command::Verify { out, .. } => out.as_ref(),
    }
}

fn emit(report: &Value, out: Option<&PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, code) = match run(&cli.command) {
        Ok((report, pass)) => (report, if pass { 0 } else { 1 }),
        Err(e) => (json!({ "command": command_name(&cli.command), "error": e.to_json() }), 2),
    };
    if let Err(e) = emit(&report, out_path(&cli.command)) {
        eprintln!("{}", e.to_json());
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
