use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use synthdb::harness::{generate_synthetic, run_experiment, write_points, ExperimentConfig, SubsetChoice, SyntheticSpec};
use synthdb::Error;

#[derive(Parser)]
#[command(name = "synthdb", version, about = "Differentially private synthetic databases for smooth queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Subset {
    Pca,
    Uniform,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Smoothness orders, comma separated.
        #[arg(long = "K", value_delimiter = ',')]
        k: Option<Vec<u32>>,
        /// Gaussian bandwidths, comma separated.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
        #[arg(long = "C")]
        c: Option<u64>,
        #[arg(long = "R")]
        r: Option<u64>,
        #[arg(long, value_enum)]
        subset: Option<Subset>,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        m_max: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic correlated dataset in [-1, 1]^d as CSV.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        latent_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are config errors; exit code 2 is reserved for failed cells
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run {
            config,
            epsilon,
            delta,
            k,
            sigma,
            c,
            r,
            subset,
            seed,
            jobs,
            m_max,
            out,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => return config_error(e),
            };
            if let Some(v) = epsilon {
                cfg.epsilon = v;
            }
            if let Some(v) = delta {
                cfg.delta = v;
            }
            if let Some(v) = k {
                cfg.orders = v;
                cfg.sigmas.clear();
            }
            if let Some(v) = sigma {
                cfg.sigmas = v;
                cfg.orders.clear();
            }
            if let Some(v) = c {
                cfg.c = v;
            }
            if r.is_some() {
                cfg.r = r;
            }
            if let Some(v) = subset {
                cfg.subset = match v {
                    Subset::Pca => SubsetChoice::Pca,
                    Subset::Uniform => SubsetChoice::Uniform,
                    Subset::Full => SubsetChoice::Full,
                };
            }
            if let Some(v) = seed {
                cfg.seeds = v;
            }
            if let Some(v) = jobs {
                cfg.jobs = v;
            }
            if m_max.is_some() {
                cfg.m_max = m_max;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            match run_experiment(&cfg, &out_dir) {
                Ok(report) => {
                    for row in &report.aggregate {
                        println!(
                            "{:?}: {} ok, {} failed, mean worst rel {}",
                            row.smoothness,
                            row.ok_cells,
                            row.failed_cells,
                            row.mean_worst_rel.map_or("n/a".into(), |v| format!("{v:.4e}"))
                        );
                    }
                    if report.all_ok() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => config_error(e),
            }
        }
        Command::Generate {
            n,
            d,
            latent_dim,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                n,
                d,
                latent_dim,
                latent_scale: 0.4,
                noise: 0.05,
                seed,
            };
            let result = generate_synthetic(&spec).and_then(|data| {
                let file = std::fs::File::create(&out)?;
                write_points(&data, file).map_err(Error::from)
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => config_error(e),
            }
        }
    }
}

fn config_error(e: Error) -> ExitCode {
    eprintln!("synthdb: {e}");
    ExitCode::from(1)
}
