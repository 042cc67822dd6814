use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use implicit_pde::harness::{self, exit_code, fuzz_identity, load_scenario, run_checks, sample_scenario, Report};
use implicit_pde::Error;

/// Verify implicit solution families of nonlinear PDEs.
#[derive(Parser)]
#[command(name = "implicit-pde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's checks and write its reports.
    Verify {
        scenario: PathBuf,
        /// JSON report path; overrides the scenario's [output] json.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Per-point CSV path; overrides the scenario's [output] csv.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the bordered-determinant identity on random jets.
    FuzzIdentity {
        /// Comma-separated dimensions in 2..=6.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a scenario's families and print the field jets as CSV.
    Sample { scenario: PathBuf },
    /// Run a scenario and print its report.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        scenario: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Paths in a scenario's [output] section are relative to the scenario file.
fn beside(scenario: &Path, p: &Path) -> PathBuf {
    match scenario.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn summary(report: &Report) -> String {
    let mut s = String::new();
    for fam in &report.families {
        s += &format!("{} ({}): {}/{} points solved\n", fam.name, fam.kind, fam.solved, fam.points);
        for c in &fam.checks {
            s += &format!(
                "  {:<16} {:<8} max {:.3e}  tol {:.1e}  n={}\n",
                c.check,
                format!("{:?}", c.status).to_lowercase(),
                c.max_normalized,
                c.tolerance,
                c.evaluated
            );
        }
    }
    s += if report.pass { "PASS\n" } else { "FAIL\n" };
    s
}

fn verdict(pass: bool) -> i32 {
    if pass {
        harness::EXIT_PASS
    } else {
        harness::EXIT_FAIL
    }
}

fn sample_csv(scenario: &Path) -> Result<String, Error> {
    let cfg = load_scenario(scenario)?;
    let mut out = String::from("family,index,point,phi,grad,hess,status\n");
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    for (name, points) in sample_scenario(&cfg)? {
        for sp in points {
            let row = match &sp.outcome {
                Ok(j) => {
                    let n = j.n();
                    let upper: Vec<f64> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).map(|(a, b)| j.dd(a, b)).collect();
                    format!("{name},{},{},{},{},{},ok\n", sp.index, join(&sp.x), j.phi(), join(j.grad()), join(&upper))
                }
                Err(e) => format!("{name},{},{},,,,\"error: {}\"\n", sp.index, join(&sp.x), e.to_string().replace('"', "'")),
            };
            out += &row;
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<i32, Error> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Verify { scenario, json, csv } => {
            let cfg = load_scenario(&scenario)?;
            let report = run_checks(&cfg)?;
            let json = json.or_else(|| cfg.json.as_ref().map(|p| beside(&scenario, p)));
            let csv = csv.or_else(|| cfg.csv.as_ref().map(|p| beside(&scenario, p)));
            if let Some(p) = json {
                write_file(&p, &report.to_json())?;
            }
            if let Some(p) = csv {
                write_file(&p, &report.to_csv()?)?;
            }
            stdout.write_all(summary(&report).as_bytes())?;
            Ok(verdict(report.pass))
        }
        Command::FuzzIdentity { n, trials, seed } => {
            let report = fuzz_identity(&n, trials, seed)?;
            stdout.write_all(report.to_json().as_bytes())?;
            Ok(verdict(report.pass))
        }
        Command::Sample { scenario } => {
            stdout.write_all(sample_csv(&scenario)?.as_bytes())?;
            Ok(harness::EXIT_PASS)
        }
        Command::Report { format, scenario } => {
            let report = run_checks(&load_scenario(&scenario)?)?;
            let text = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv()?,
            };
            stdout.write_all(text.as_bytes())?;
            Ok(verdict(report.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    });
    ExitCode::from(code as u8)
}
