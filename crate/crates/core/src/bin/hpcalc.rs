#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpcalc::experiments::{self, ExperimentConfig, Format, Settings, Table};
use hpcalc::{Error, Result};

#[derive(Parser)]
#[command(name = "hpcalc", version, about = "Run functional calculus bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decay-weighted calculus bound.
    Thm35(Common),
    /// Hilbert-space rows: semigroup composition and smoothing.
    Cor310(Common),
    /// First and second derivative bounds.
    Thm44(Common),
    /// Crank-Nicolson powers on smoothed data.
    Stability(Common),
    /// Envelope of the factorization constant.
    Eta(Common),
    /// Every experiment in the configuration.
    All(Common),
    /// Print the bundled demo configuration.
    DemoConfig,
}

#[derive(Args)]
struct Common {
    /// Configuration file; the bundled demo configuration when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the pass tolerance of the configuration.
    #[arg(long)]
    tol: Option<f64>,
    /// Comma separated output formats.
    #[arg(long, default_value = "csv,svg")]
    format: String,
}

fn load(common: &Common) -> Result<(ExperimentConfig, Settings, Vec<Format>)> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?,
        None => experiments::DEMO_CONFIG.to_string(),
    };
    let config = ExperimentConfig::parse(&text)?;
    let mut settings = Settings::from_config(&config)?;
    if let Some(s) = common.seed {
        settings.seed = s;
    }
    if let Some(t) = common.tol {
        if !(t >= 0.0) {
            return Err(Error::Usage(format!("--tol must be nonnegative, got {t}")));
        }
        settings.tol = t;
    }
    let formats = common
        .format
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Format::parse)
        .collect::<Result<Vec<_>>>()?;
    Ok((config, settings, formats))
}

fn report(tables: &[Table], common: &Common, formats: &[Format]) -> Result<bool> {
    let mut ok = true;
    for t in tables {
        let paths = experiments::emit(t, formats, &common.out)?;
        let failed = t.rows.iter().filter(|r| !r.pass).count();
        println!("{}: {} rows, {} failed", t.name, t.rows.len(), failed);
        for p in paths {
            println!("  wrote {}", p.display());
        }
        ok &= failed == 0;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let (name, common) = match &cli.command {
        Command::DemoConfig => {
            print!("{}", experiments::DEMO_CONFIG);
            return Ok(true);
        }
        Command::Thm35(c) => ("thm35", c),
        Command::Cor310(c) => ("cor310", c),
        Command::Thm44(c) => ("thm44", c),
        Command::Stability(c) => ("stability", c),
        Command::Eta(c) => ("eta", c),
        Command::All(c) => ("all", c),
    };
    let (config, settings, formats) = load(common)?;
    let tables = if name == "all" {
        experiments::run_all(&config, settings)?
    } else {
        vec![experiments::run(name, &config, settings)?]
    };
    report(&tables, common, &formats)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
