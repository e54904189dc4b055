use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use hbf_papr::Projection;
use hbf_papr_cli::commands::{self, read_genes};
use hbf_papr_cli::{exit_code, selftest, ExperimentSpec, Overrides, SpecError, EXIT_SELFTEST};

/// PAPR reduction experiments for hybrid-beamforming OFDM transmitters.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reduction pipeline and write CCDF, spectrum and reports.
    Simulate(Common),
    /// Train coef and the thresholds with the genetic algorithm.
    Train {
        #[command(flatten)]
        common: Common,
        /// Description file whose pipeline genes seed the population.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Solve the three minimax bounds per symbol and write their CCDFs.
    Bound(Common),
    /// Run the oracle-equivalence checks at desk scale.
    Selftest {
        /// Perturb one kernel tap; the band-limitation check must fail.
        #[arg(long, hide = true)]
        corrupt_kernel: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment description; defaults to the reference setup.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of OFDM symbols.
    #[arg(long)]
    n_ofdm: Option<usize>,
    /// Reduction iterations; the threshold schedule is truncated or
    /// extended with its last value.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_parser = parse_projection)]
    projection: Option<Projection>,
}

fn parse_projection(s: &str) -> Result<Projection, String> {
    s.parse().map_err(|e: hbf_papr::Error| e.to_string())
}

impl Common {
    fn load(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentSpec::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => ExperimentSpec::default(),
        };
        spec.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            n_ofdm: self.n_ofdm,
            iters: self.iters,
            projection: self.projection,
        });
        spec.validate()?;
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(c) => {
            let out = commands::simulate(&c.load()?)?;
            print!("{}", out.report);
            for f in &out.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Train { common, resume } => {
            let spec = common.load()?;
            let genes = resume.as_deref().map(read_genes).transpose()?;
            if let Some(g) = &genes {
                if g.len() != spec.sim.n_iter + 1 {
                    return Err(SpecError(format!("resume file has {} genes", g.len())).into());
                }
            }
            let out = commands::train(&spec, genes.as_deref())?;
            let genes: Vec<String> = out.result.genes.iter().map(|g| format!("{g:.4}")).collect();
            println!("genes=[{}]", genes.join(", "));
            println!("fitness_db={}", out.result.fitness);
            println!("evm={}", out.result.evm);
            for f in &out.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Bound(c) => {
            let out = commands::bound(&c.load()?)?;
            print!("{}", out.report);
            for f in &out.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Selftest { corrupt_kernel } => {
            let report = selftest::run(corrupt_kernel);
            print!("{}", report.table());
            if !report.passed() {
                return Ok(EXIT_SELFTEST);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
