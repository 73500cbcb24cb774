use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use expertnet::expertnet::write_checkpoint;
use expertnet::harness::{emit_report, noise_stats, run_grid, run_unit, ExperimentConfig, Method};
use expertnet::nn::gradcheck;
use expertnet::noise::{NoiseSpec, TransitionMatrix};
use expertnet::Result;

#[derive(Parser)]
#[command(version, about = "Two-network training on noisy labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment grid and write the reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the configured seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train one method on one grid cell.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: String,
        /// Symmetric noise ratio; ignored when the config names a matrix file.
        #[arg(long, default_value_t = 0.0)]
        ratio: f64,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to save the trained expertnet model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Corrupt balanced labels and report the empirical transition matrix.
    NoiseStats {
        #[arg(long)]
        classes: usize,
        #[arg(long, conflicts_with = "matrix")]
        ratio: Option<f64>,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare analytic and finite-difference gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out, threads } => {
            let mut cfg = ExperimentConfig::read(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let threads = threads.unwrap_or(cfg.threads);
            let grid = run_grid(&cfg, threads)?;
            let files = emit_report(&grid.records, &grid.log, &cfg.out)?;
            let failed = grid.failed_cells();
            println!("{} records, {failed} failed", grid.records.len());
            println!("wrote {}", files.results.display());
            for p in &files.pivots {
                println!("wrote {}", p.display());
            }
            Ok(failed == 0)
        }
        Command::Train { config, method, ratio, fraction, seed, checkpoint } => {
            let cfg = ExperimentConfig::read(&config)?;
            let method = Method::parse(&method)?;
            let axis = cfg.noise_axis()?;
            let (ratio, matrix) = match cfg.noise_matrix {
                Some(_) => axis.into_iter().next().expect("matrix axis has one entry"),
                None => (ratio, None),
            };
            let out = run_unit(&cfg, method, ratio, matrix.as_ref(), fraction, seed);
            print!("{}", out.log);
            for r in &out.records {
                match r.accuracy {
                    Some(a) => println!("{} {}: accuracy {a:.4}", r.method.name(), r.mode.name()),
                    None => println!("{} {}: {}", r.method.name(), r.mode.name(), r.status),
                }
            }
            if let (Some(path), Some(model)) = (checkpoint, &out.model) {
                write_checkpoint(model, &path)?;
                println!("wrote {}", path.display());
            }
            Ok(out.records.iter().all(|r| !r.failed()))
        }
        Command::NoiseStats { classes, ratio, matrix, samples, seed } => {
            let spec = match (ratio, matrix) {
                (_, Some(path)) => NoiseSpec::matrix(TransitionMatrix::read_csv(&path)?, seed),
                (r, None) => NoiseSpec::symmetric(r.unwrap_or(0.0), seed),
            };
            let stats = noise_stats(classes, &spec, samples)?;
            println!("nominal flip rate {:.6}", stats.nominal.mean_flip_rate());
            println!("observed flip rate {:.6}", stats.flip_rate);
            println!("max |empirical - nominal| {:.6}", stats.max_deviation);
            print!("{}", stats.empirical.matrix.to_csv());
            Ok(true)
        }
        Command::Gradcheck { cases, seed } => {
            let report = gradcheck::run_suite(cases, seed)?;
            for c in &report.cases {
                println!("{:<48} max rel error {:.3e}", c.label, c.max_rel_error);
            }
            println!("worst {:.3e}, {} failures", report.max_rel_error(), report.failures().count());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
