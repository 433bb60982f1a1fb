use std::path::PathBuf;
use std::process::ExitCode;

use catbreed::io::load_samples;
use catbreed::io::load_density;
use catbreed_cli::commands::{generation_dir, SAMPLES_FILE};
use catbreed_cli::{cmd_breed, cmd_quasiprob, cmd_reconstruct, cmd_report, cmd_simulate, pipeline, with_threads};
use catbreed_cli::{CliError, CliResult, Overrides, PipelineConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "catbreed", version, about = "Grow optical cat states by two-copy post-processing of simulated QHD data")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare the input state and write QHD samples to --out (a file).
    Simulate {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Apply the growing steps to a sample file; writes gen1/, gen2/, … under --out.
    Breed {
        input: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// MaxLik reconstruction of a sample file into --out.
    Reconstruct {
        input: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Wigner and Q grids of a density-matrix file into --out.
    Quasiprob {
        density: PathBuf,
        /// Sample file for an empirical Q histogram on the same grid.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Recompute report.json from the artifacts of a pipeline run in --out.
    Report {
        #[command(flatten)]
        opts: Overrides,
    },
    /// simulate, breed, reconstruct and report in one go.
    Pipeline {
        #[command(flatten)]
        opts: Overrides,
    },
}

fn config(opts: Overrides) -> CliResult<PipelineConfig> {
    PipelineConfig::from_overrides(&opts.resolve()?)
}

fn out_or(cfg: &PipelineConfig, opts_out: bool, default: &str) -> PathBuf {
    if opts_out {
        cfg.out.clone()
    } else {
        PathBuf::from(default)
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate { opts } => {
            let has_out = opts.out.is_some();
            let cfg = config(opts)?;
            let path = out_or(&cfg, has_out, "samples.bin");
            let (set, stats) = with_threads(cfg.threads, || cmd_simulate(&cfg, &path))??;
            println!(
                "wrote {} samples to {} (state dim {}, acceptance {:.3})",
                set.count(),
                path.display(),
                stats.state_dim,
                stats.acceptance_rate
            );
        }
        Command::Breed { input, opts } => {
            let cfg = config(opts)?;
            let set = load_samples(&input).map_err(|e| CliError::from(e).context(input.display()))?;
            let gens = with_threads(cfg.threads, || cmd_breed(&set, &cfg, &cfg.out))??;
            for (s, st) in &gens {
                println!(
                    "generation {}: {} samples, acceptance {:.5} ({} of {} pairs)",
                    s.meta.generation, s.count(), st.acceptance_fraction, st.accepted_count, st.pair_count
                );
            }
        }
        Command::Reconstruct { input, opts } => {
            let cfg = config(opts)?;
            let set = load_samples(&input).map_err(|e| CliError::from(e).context(input.display()))?;
            let res = with_threads(cfg.threads, || cmd_reconstruct(&set, &cfg.reconstruction, cfg.min_dim, &cfg.out))??;
            println!(
                "dim {}, {} iterations, converged: {}, mean log-likelihood {:.8}",
                res.rho.dim(),
                res.iterations,
                res.converged,
                res.loglik_trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Quasiprob { density, data, opts } => {
            let cfg = config(opts)?;
            let rho = load_density(&density).map_err(|e| CliError::from(e).context(density.display()))?;
            let set = data
                .as_ref()
                .map(|p| load_samples(p).map_err(|e| CliError::from(e).context(p.display())))
                .transpose()?;
            let grids = with_threads(cfg.threads, || cmd_quasiprob(&rho, set.as_ref(), &cfg.grid, &cfg.out))??;
            println!(
                "W(0) = {:.6}, negativity volume {:.6}, grids in {}",
                catbreed::quasiprob::wigner_at_origin(&rho),
                catbreed::quasiprob::negativity_volume(&grids.wigner),
                cfg.out.display()
            );
        }
        Command::Report { opts } => {
            let cfg = config(opts)?;
            if !generation_dir(&cfg.out, 0).join(SAMPLES_FILE).exists() {
                return Err(CliError::io(format!("no pipeline artifacts in {}", cfg.out.display())));
            }
            let report = with_threads(cfg.threads, || cmd_report(&cfg.out))??;
            print!("{}", report.summary());
        }
        Command::Pipeline { opts } => {
            let cfg = config(opts)?;
            let report = with_threads(cfg.threads, || pipeline(&cfg))??;
            print!("{}", report.summary());
            println!("report: {}", cfg.out.join("report.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("catbreed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
