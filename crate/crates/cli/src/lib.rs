//! Scenario runner: reads a JSON scenario, dispatches to the matching computation, and
//! writes a JSON report (plus trajectory CSV for `simulate`).

pub mod doc;
pub mod error;
pub mod kinds;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;
pub use report::{without_wall_clock, CheckResult, Report, Tool, Verdict};
pub use scenario::{Kind, Scenario, SCHEMA_VERSION};

/// The only environment variable consulted: a directory for reports and CSV files.
pub const OUT_DIR_ENV: &str = "BORNLAB_OUT_DIR";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Report path; wins over the environment and the scenario.
    pub out: Option<PathBuf>,
    /// Replaces the scenario seed.
    pub seed: Option<u64>,
    pub csv: bool,
    /// When set, the scenario's kind must match.
    pub kind: Option<Kind>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub json: String,
    pub csv: Option<String>,
    pub exit_code: i32,
    pub report_path: PathBuf,
    pub csv_path: Option<PathBuf>,
}

/// Runs a parsed scenario without touching the filesystem.
pub fn evaluate(mut scenario: Scenario, opts: &RunOptions) -> Result<(Report, Option<String>), CliError> {
    if let Some(kind) = opts.kind {
        if kind != scenario.kind {
            return Err(CliError::Usage(format!(
                "subcommand {kind} cannot run a scenario of kind {}",
                scenario.kind
            )));
        }
    }
    if opts.csv && scenario.kind != Kind::Simulate {
        return Err(CliError::Usage(format!("--csv applies to simulate only, not {}", scenario.kind)));
    }
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    let want_csv = opts.csv || scenario.output.csv.is_some();
    let start = Instant::now();
    let outcome = match scenario.kind {
        Kind::Simulate => kinds::simulate::run(&scenario, want_csv),
        Kind::Derive => kinds::derive::run(&scenario),
        Kind::SolveMeasure => kinds::derive::run_measure(&scenario),
        Kind::Games => kinds::games::run(&scenario),
        Kind::Histories => kinds::histories::run(&scenario),
        Kind::Lln => kinds::lln::run(&scenario),
        Kind::Nogo => kinds::nogo::run(&scenario),
    }?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: Tool {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        scenario,
        checks: outcome.checks,
        metrics: outcome.metrics,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, outcome.csv))
}

fn report_path(source: Option<&Path>, scenario: &Scenario, opts: &RunOptions) -> PathBuf {
    if let Some(out) = &opts.out {
        return out.clone();
    }
    let stem = source
        .and_then(|p| p.file_stem())
        .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
    let named = scenario
        .output
        .report
        .as_ref()
        .map_or_else(|| PathBuf::from(format!("{stem}.report.json")), PathBuf::from);
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(named.file_name().unwrap_or(named.as_os_str())),
        None => named,
    }
}

fn csv_path(report: &Path, scenario: &Scenario) -> PathBuf {
    let dir = report.parent().unwrap_or(Path::new(""));
    match &scenario.output.csv {
        Some(name) => dir.join(Path::new(name).file_name().unwrap_or(name.as_ref())),
        None => {
            let base = report.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            let base = base.strip_suffix(".report.json").or_else(|| base.strip_suffix(".json")).unwrap_or(&base);
            dir.join(format!("{base}.trajectories.csv"))
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    let wrap = |source| CliError::Write { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, text).map_err(wrap)
}

/// Parses `text`, runs it, and writes the report. `source` names the scenario file and
/// supplies the default report name.
pub fn run_text(text: &str, source: Option<&Path>, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let scenario = Scenario::parse(text)?;
    let path = report_path(source, &scenario, opts);
    let (report, csv) = evaluate(scenario, opts)?;
    let json = report.to_json();
    write(&path, &json)?;
    let csv_path = match &csv {
        Some(body) => {
            let p = csv_path(&path, &report.scenario);
            write(&p, body)?;
            Some(p)
        }
        None => None,
    };
    Ok(RunOutcome {
        exit_code: report.exit_code(),
        report,
        json,
        csv,
        report_path: path,
        csv_path,
    })
}

pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    run_text(&text, Some(path), opts)
}

#[derive(Debug, Parser)]
#[command(name = "bornlab", version, about = "Run Born-rule scenarios and write JSON reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collapse-model trajectory ensembles.
    Simulate(Common),
    /// Replays of the equiprobable, rational and limit arguments.
    Derive(Common),
    /// Measure uniqueness over a family of grainings.
    SolveMeasure(Common),
    /// Quantum game values from the decision axioms.
    Games(Common),
    /// Consistency of projector histories.
    Histories(Common),
    /// Exact binomial tails.
    Lln(Common),
    /// Frame-function propagation and dispersion-free search.
    Nogo(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-trajectory CSV (simulate only).
    #[arg(long)]
    csv: bool,
}

/// Entry point for the binary; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, common) = match cli.command {
        Command::Simulate(c) => (Kind::Simulate, c),
        Command::Derive(c) => (Kind::Derive, c),
        Command::SolveMeasure(c) => (Kind::SolveMeasure, c),
        Command::Games(c) => (Kind::Games, c),
        Command::Histories(c) => (Kind::Histories, c),
        Command::Lln(c) => (Kind::Lln, c),
        Command::Nogo(c) => (Kind::Nogo, c),
    };
    let opts = RunOptions {
        out: common.out,
        seed: common.seed,
        csv: common.csv,
        kind: Some(kind),
    };
    match run_scenario(&common.scenario, &opts) {
        Ok(run) => {
            for c in &run.report.checks {
                match &c.reason {
                    Some(r) => println!("{} {}: {r}", c.verdict, c.name),
                    None => println!("{} {}", c.verdict, c.name),
                }
            }
            println!("report: {}", run.report_path.display());
            if let Some(p) = &run.csv_path {
                println!("csv: {}", p.display());
            }
            run.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
