//! `prioq`: analytic reports, simulation runs and the validation suite for
//! discrete-time multi-class priority queues.

mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use prioq::crosscheck::{identity_checks, simulation_checks, Check, SuiteConfig};
use prioq::sim::{simulate, SimRun};
use prioq::{
    load_model, validate_system, Discipline, Error, Metric, PriorityModel, SimConfig, SystemReport,
    SystemSpec,
};

use table::{num, opt, render};

#[derive(Parser)]
#[command(
    name = "prioq",
    version,
    about = "Priority queue analysis and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic per-class report.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Simulation estimates with 95% confidence intervals.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = DisciplineArg::Np)]
        discipline: DisciplineArg,
        #[arg(long, value_parser = parse_count, default_value = "1000000")]
        slots: u64,
        /// Defaults to a tenth of --slots.
        #[arg(long, value_parser = parse_count)]
        warmup: Option<u64>,
        #[arg(long, value_parser = parse_count, default_value = "20")]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Identity checks and simulation coverage checks.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Identity checks only.
        #[arg(long)]
        quick: bool,
        #[arg(long, value_parser = parse_count, default_value = "1000000")]
        slots: u64,
        #[arg(long, value_parser = parse_count, default_value = "20")]
        reps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record the wall-clock duration in the manifest.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DisciplineArg {
    Fcfs,
    Pr,
    Np,
}

impl From<DisciplineArg> for Discipline {
    fn from(d: DisciplineArg) -> Self {
        match d {
            DisciplineArg::Fcfs => Discipline::Fcfs,
            DisciplineArg::Pr => Discipline::PreemptiveResume,
            DisciplineArg::Np => Discipline::NonPreemptive,
        }
    }
}

/// Accepts plain integers and integral scientific notation such as `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(format!("expected a non-negative integer, got {s:?}")),
    }
}

#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    model: String,
    config: serde_json::Value,
    seed: Option<u64>,
    duration_ms: Option<f64>,
}

enum Failure {
    Input(String),
    Unstable(f64),
    Suite(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Unstable { rho, .. } => Failure::Unstable(rho),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Suite(_) => 1,
            Failure::Input(_) => 2,
            Failure::Unstable(_) => 3,
        }
    }
}

/// Loads and validates a model. Structural problems are input errors;
/// overload is reported separately.
fn load(path: &Path) -> Result<SystemSpec, Failure> {
    let system = load_model(path)?;
    let report = validate_system(&system);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.has_structural_findings() {
        return Err(Failure::Input(format!("model is invalid:\n{report}")));
    }
    if report.is_unstable() {
        return Err(Failure::Unstable(report.rho.unwrap_or(f64::NAN)));
    }
    Ok(system)
}

struct Output {
    manifest: RunManifest,
    body: serde_json::Value,
    table: String,
    /// Set when the command ran but its checks failed.
    failed: Option<String>,
}

fn analyze(system: &SystemSpec) -> Result<(serde_json::Value, String), Failure> {
    let report = PriorityModel::new(system)?.report()?;
    Ok((json!({ "report": &report }), report_table(&report)))
}

fn report_table(r: &SystemReport) -> String {
    let rows: Vec<Vec<String>> = r
        .classes
        .iter()
        .map(|c| {
            let mut row = vec![c.class.to_string()];
            row.extend(
                [
                    c.lambda,
                    c.rho,
                    c.eq_mean_h,
                    c.w_pr,
                    c.w_np,
                    c.d_pr,
                    c.u_pr,
                    c.u_np,
                ]
                .map(num),
            );
            row
        })
        .collect();
    let mut out = render(
        &[
            "class", "lambda", "rho", "E[H~]", "W_pr", "W_np", "D_pr", "U_pr", "U_np",
        ],
        &rows,
        1,
    );
    out.push('\n');
    let agg = [
        ("rho", r.rho),
        ("E[U]", r.eu),
        ("conservation rhs", r.conservation_rhs),
        ("f1", r.f1),
        ("f2", r.f2),
    ];
    let agg: Vec<Vec<String>> = agg
        .iter()
        .map(|(n, v)| vec![n.to_string(), num(*v)])
        .collect();
    out + &render(&["aggregate", "value"], &agg, 1)
}

fn simulate_cmd(
    system: &SystemSpec,
    config: &SimConfig,
) -> Result<(serde_json::Value, String), Failure> {
    let run: SimRun = simulate(system, config)?;
    let metrics = Metric::standard(run.num_classes, config.discipline);
    let mut estimates = Vec::new();
    let mut rows = Vec::new();
    for m in metrics {
        let est = run.estimate(m)?;
        rows.push(vec![
            m.label(),
            num(est.mean),
            opt(est.half_width_95),
            opt(est.std_error),
            est.replications.to_string(),
        ]);
        estimates.push(json!({ "metric": m.label(), "id": m, "estimate": est }));
    }
    let table = format!(
        "discipline {}, {} replications of {} slots ({} warmup), seed {}\n\n{}",
        config.discipline,
        config.replications,
        config.slots_per_replication,
        config.warmup_slots,
        config.seed,
        render(
            &["metric", "mean", "95% half-width", "std error", "reps"],
            &rows,
            1
        )
    );
    Ok((json!({ "estimates": estimates }), table))
}

fn validate_cmd(
    system: &SystemSpec,
    quick: bool,
    suite: &SuiteConfig,
) -> Result<(serde_json::Value, String, Option<String>), Failure> {
    let mut checks = identity_checks(system)?;
    if !quick {
        checks.extend(simulation_checks(system, suite)?);
    }
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                if c.passed { "PASS" } else { "FAIL" }.to_string(),
                c.name.clone(),
                num(c.value),
                num(c.reference),
                num(c.gap),
                num(c.tolerance),
            ]
        })
        .collect();
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let summary = format!(
        "{} of {} checks passed\n",
        checks.len() - failed.len(),
        checks.len()
    );
    let table = render(
        &["", "check", "value", "reference", "gap", "tolerance"],
        &rows,
        2,
    ) + "\n"
        + &summary;
    let failure = (!failed.is_empty()).then(|| {
        failed
            .iter()
            .map(|c| {
                format!(
                    "failed: {} (gap {:e}, tolerance {:e})",
                    c.name, c.gap, c.tolerance
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    });
    let body = json!({
        "checks": checks,
        "passed": checks.len() - failed.len(),
        "failed": failed.len(),
    });
    Ok((body, table, failure))
}

fn run(command: &Command) -> Result<(Output, &Common), Failure> {
    let start = Instant::now();
    let (common, name, config, seed, result) = match command {
        Command::Analyze { common } => {
            let system = load(&common.model)?;
            let (body, table) = analyze(&system)?;
            (common, "analyze", json!({}), None, (body, table, None))
        }
        Command::Simulate {
            common,
            discipline,
            slots,
            warmup,
            reps,
            seed,
        } => {
            let reps =
                usize::try_from(*reps).map_err(|_| Failure::Input("--reps is too large".into()))?;
            let mut config = SimConfig::new((*discipline).into(), *slots, reps, *seed);
            if let Some(w) = warmup {
                config.warmup_slots = *w;
            }
            config.validate()?;
            let system = load(&common.model)?;
            let (body, table) = simulate_cmd(&system, &config)?;
            (
                common,
                "simulate",
                json!(config),
                Some(*seed),
                (body, table, None),
            )
        }
        Command::Validate {
            common,
            quick,
            slots,
            reps,
            seed,
        } => {
            let suite = SuiteConfig {
                slots: *slots,
                replications: usize::try_from(*reps)
                    .map_err(|_| Failure::Input("--reps is too large".into()))?,
                seed: *seed,
            };
            if !quick {
                SimConfig::new(
                    Discipline::Fcfs,
                    suite.slots,
                    suite.replications,
                    suite.seed,
                )
                .validate()?;
            }
            let system = load(&common.model)?;
            let result = validate_cmd(&system, *quick, &suite)?;
            let config = json!({ "quick": quick, "suite": suite });
            (
                common,
                "validate",
                config,
                (!quick).then_some(*seed),
                result,
            )
        }
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    eprintln!("{name} finished in {elapsed:.1} ms");
    let (body, table, failed) = result;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        model: common.model.display().to_string(),
        config,
        seed,
        duration_ms: common.timing.then_some(elapsed),
    };
    Ok((
        Output {
            manifest,
            body,
            table,
            failed,
        },
        common,
    ))
}

fn emit(out: &Output, common: &Common) -> Result<(), Failure> {
    let text = match common.format {
        Format::Json => {
            let mut doc = json!({ "manifest": &out.manifest });
            if let (Some(dst), serde_json::Value::Object(src)) = (doc.as_object_mut(), &out.body) {
                dst.extend(src.clone());
            }
            serde_json::to_string_pretty(&doc).expect("output serializes") + "\n"
        }
        Format::Table => {
            let m = &out.manifest;
            let mut head = format!(
                "# {} {} {}\n# model: {}\n",
                m.tool, m.version, m.command, m.model
            );
            if let Some(seed) = m.seed {
                head += &format!("# seed: {seed}\n");
            }
            if let Some(ms) = m.duration_ms {
                head += &format!("# duration: {ms:.1} ms\n");
            }
            head + "\n" + &out.table
        }
    };
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, Failure> {
    let Ok(value) = std::env::var("PRIOQ_THREADS") else {
        return Ok(None);
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::Input(format!(
                "PRIOQ_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Failure::Input(format!("cannot start {n} threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_pool().and_then(|pool| {
        let go = || {
            let (out, common) = run(&cli.command)?;
            emit(&out, common)?;
            match out.failed {
                Some(msg) => Err(Failure::Suite(msg)),
                None => Ok(()),
            }
        };
        match pool {
            Some(p) => p.install(go),
            None => go(),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(msg) => eprintln!("error: {msg}"),
                Failure::Unstable(rho) => {
                    eprintln!("error: unstable system: rho = {rho} (total load must be below 1)")
                }
                Failure::Suite(msg) => eprintln!("{msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
