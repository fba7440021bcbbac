use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ncmaxerg::report::{
    csv_rows, parse_report, run_scenario_file, to_fixed_json, write_csv, RunFlags, EXIT_INVALID_INPUT,
};
use ncmaxerg::suite::{parse_summary, run_suite, summary_csv_rows, Execution, SuiteConfig};

#[derive(Parser)]
#[command(name = "ncmaxerg", version, about = "Certified projections for maximal ergodic inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the certificate pipeline on a scenario file and write a report.
    Verify {
        scenario: PathBuf,
        /// Treat ambiguous cuts and a missing stable limit as numerical failures.
        #[arg(long)]
        strict: bool,
        /// Residual gate overriding the scenario's.
        #[arg(long)]
        tol: Option<f64>,
        /// Report path; defaults to the scenario path with `.report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded suite of random certified instances and write a summary.
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Comma-separated block sizes.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        dims: Vec<usize>,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        tol: Option<f64>,
        /// Evaluate instances one at a time.
        #[arg(long)]
        sequential: bool,
        #[arg(long, default_value = "suite.json")]
        out: PathBuf,
    },
    /// Export a report or suite summary as CSV, one row per (instance, n).
    ExportCsv {
        report: PathBuf,
        /// Defaults to the input path with `.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn default_report_path(scenario: &Path) -> PathBuf {
    let stem = scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
    scenario.with_file_name(format!("{stem}.report.json"))
}

fn verify(scenario: &Path, strict: bool, tol: Option<f64>, out: Option<PathBuf>) -> anyhow::Result<i32> {
    let report = match run_scenario_file(scenario, &RunFlags { strict, tol }) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("error: {f}");
            return Ok(f.exit_code);
        }
    };
    let out = out.unwrap_or_else(|| default_report_path(scenario));
    write_text(&out, &to_fixed_json(&report)?)?;
    let failed = report.pointwise.iter().filter(|p| !p.pass).count();
    println!(
        "{}: {} pointwise certificates, {} failed; uniform {}; exit {}",
        out.display(),
        report.pointwise.len(),
        failed,
        match (&report.uniform, &report.uniform_error) {
            (Some(u), _) =>
                if u.pass {
                    "pass".to_string()
                } else {
                    "fail".to_string()
                },
            (None, Some(e)) => format!("unavailable ({e})"),
            (None, None) => "not run".to_string(),
        },
        report.exit_code
    );
    Ok(report.exit_code)
}

fn suite(cfg: SuiteConfig, sequential: bool, out: &Path) -> anyhow::Result<i32> {
    let execution = if sequential { Execution::Sequential } else { Execution::default() };
    let summary = match run_suite(&cfg, execution) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_INVALID_INPUT);
        }
    };
    write_text(out, &to_fixed_json(&summary)?)?;
    let a = &summary.aggregate;
    println!(
        "{}: {} instances, pass rate {:.4}, no stable limit {:.4}, worst pointwise slack {:.3e}, median sweeps {}, exit {}",
        out.display(),
        a.count,
        a.pass_rate,
        a.no_stable_limit_rate,
        a.worst_pointwise_slack,
        a.median_sweeps,
        summary.exit_code
    );
    Ok(summary.exit_code)
}

fn export_csv(input: &Path, out: Option<PathBuf>) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(input).with_context(|| format!("cannot read {}", input.display()))?;
    let rows = match parse_report(&text) {
        Ok(report) => csv_rows(0, &report.pointwise, report.uniform.as_ref()),
        Err(_) => match parse_summary(&text) {
            Ok(summary) => summary_csv_rows(&summary),
            Err(e) => {
                eprintln!("error: {} is neither a report nor a suite summary: {e}", input.display());
                return Ok(EXIT_INVALID_INPUT);
            }
        },
    };
    let out = out.unwrap_or_else(|| input.with_extension("csv"));
    let file = std::fs::File::create(&out).with_context(|| format!("cannot write {}", out.display()))?;
    write_csv(file, &rows)?;
    println!("{}: {} rows", out.display(), rows.len());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { scenario, strict, tol, out } => verify(&scenario, strict, tol, out),
        Command::Suite { seed, count, dims, strict, tol, sequential, out } => {
            let cfg = SuiteConfig { seed, count, dims, strict, tol, ..Default::default() };
            suite(cfg, sequential, &out)
        }
        Command::ExportCsv { report, out } => export_csv(&report, out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID_INPUT as u8)
        }
    }
}
