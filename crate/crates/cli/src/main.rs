//! `collarlab`: sweeps, equivalence reports and the acceptance suite.
//!
//! Exit codes: 0 success, 1 a verify criterion failed, 2 bad configuration,
//! 3 numerical failure.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collarlab::config::Config;
use collarlab::report::{bundle_json, equivalence_json, equivalence_reports, run_sweep, write_csv};
use collarlab::{verify, Error};

#[derive(Parser)]
#[command(name = "collarlab", version, about = "Collar-model metrics on degenerating hyperbolic surfaces")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every metric along the t-sweep; writes report.csv and bundle.json.
    Sweep(Common),
    /// Run the acceptance criteria and print a table.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion names.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Pairwise equivalence reports; writes equivalence_<A>_<B>.json.
    Equivalence(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one key, e.g. --set grid.n_tau=256.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Numerical(format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<(Config, PathBuf), Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for s in &common.overrides {
        cfg.set_str(s)?;
    }
    cfg.validate()?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    Ok((cfg, out))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::Numerical(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn sweep(common: &Common) -> Result<ExitCode, Failure> {
    let (cfg, out) = load(common)?;
    let sweep = run_sweep(&cfg)?;
    out_dir(&out)?;
    let csv_path = out.join("report.csv");
    let f = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_csv(&sweep, BufWriter::new(f))?;
    write_json(&out.join("bundle.json"), &bundle_json(&sweep))?;
    println!("{} points -> {}", sweep.points.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn equivalence(common: &Common) -> Result<ExitCode, Failure> {
    let (cfg, out) = load(common)?;
    let sweep = run_sweep(&cfg)?;
    out_dir(&out)?;
    for r in equivalence_reports(&sweep)? {
        write_json(&out.join(format!("equivalence_{}_{}.json", r.a, r.b)), &equivalence_json(&r, &cfg))?;
        let exp = r.exponent.map_or("-".to_string(), |p| format!("{p:.3}"));
        println!(
            "{:<10} {:<10} [{:.4e}, {:.4e}] exponent {:>7}  {}",
            r.a,
            r.b,
            r.lower,
            r.upper,
            exp,
            r.verdict.label()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(common: &Common, only: &[String]) -> Result<ExitCode, Failure> {
    let (cfg, out) = load(common)?;
    let results = verify::run(&cfg, only)?;
    println!("{:<3} {:<26} {:<8} {:>8}  measured / target / tolerance", "id", "criterion", "verdict", "seconds");
    for r in &results {
        println!(
            "{:<3} {:<26} {:<8} {:>8.2}  {}\n{:49}target: {}\n{:49}tolerance: {}",
            r.id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.seconds,
            r.measured,
            "",
            r.target,
            "",
            r.tolerance
        );
    }
    out_dir(&out)?;
    let v = serde_json::to_value(&results).map_err(|e| Failure::Numerical(e.to_string()))?;
    write_json(&out.join("verify.json"), &v)?;
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} passed", results.len());
    Ok(if passed == results.len() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match &cli.command {
        Command::Sweep(c) => sweep(c),
        Command::Verify { common, only } => verify_cmd(common, only),
        Command::Equivalence(c) => equivalence(c),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
