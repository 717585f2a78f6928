//! `simplexdiff`: command-line driver for the simplex diffusion experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simplexdiff::harness::{self, Command, Overrides, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(
    name = "simplexdiff",
    version,
    about = "Stochastic dynamics on the probability simplex"
)]
struct Cli {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for ensembles.
    #[arg(long, global = true, env = "SIMPLEXDIFF_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Finite-volume cells.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Exact jump-process trajectory (and ensemble mean with --paths).
    Ssa,
    /// Chemical master equation on the count lattice.
    Cme,
    /// Gradient flow or linear forward equation.
    Ode,
    /// Langevin dynamics: one trajectory plus an ensemble histogram.
    Sde,
    /// Finite-volume two-point Fokker-Planck solver.
    Fp,
    /// Closed-form Green function evolution.
    Green,
    /// Wright-Fisher change of variables and diffusion.
    Wf,
    /// Checks the response-matrix identities at random points.
    GeometryCheck {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Histogram CSV against a density CSV.
    Compare {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        density: PathBuf,
        /// L1 threshold, overriding the configuration.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

impl Sub {
    fn into_command(self) -> Command {
        match self {
            Sub::Ssa => Command::Ssa,
            Sub::Cme => Command::Cme,
            Sub::Ode => Command::Ode,
            Sub::Sde => Command::Sde,
            Sub::Fp => Command::Fp,
            Sub::Green => Command::Green,
            Sub::Wf => Command::Wf,
            Sub::GeometryCheck { d, samples } => Command::GeometryCheck { d, samples },
            Sub::Compare {
                samples,
                density,
                threshold,
            } => Command::Compare {
                samples,
                density,
                threshold,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = harness::configure_threads(threads) {
            eprintln!("error [{}]: {e}", e.kind());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        dt: cli.dt,
        t_end: cli.t_end,
        paths: cli.paths,
        grid: cli.grid,
    };
    let result = harness::run(
        &cli.command.into_command(),
        cli.config.as_deref(),
        &overrides,
    );
    match &result {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            for line in &outcome.summary {
                println!("{line}");
            }
        }
        Err(e) => eprintln!("error [{}]: {e}", e.kind()),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}
