use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod artifacts;
mod commands;
mod config;

use config::Method;

#[derive(Debug)]
pub enum CliError {
    /// Bad input, configuration or I/O (exit 2).
    Usage(String),
    /// A numerical procedure did not meet its tolerance (exit 3).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<glefield_core::Error> for CliError {
    fn from(e: glefield_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "glefield", version, about = "Stationary stochastic heat equation with memory")]
struct Cli {
    /// Worker threads (default: GLEFIELD_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the memory kernel K(t).
    Kernel {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the spectral density of mode k.
    Spectrum {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        omega_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the variance identity and resonance properties for a list of modes.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        k_list: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample stationary paths of one mode.
    SampleMode {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the truncated space-time field.
    SampleField {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "N")]
        modes: Option<usize>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        tail_budget: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a Hölder exponent to a sampled field or path file.
    Hoelder {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        axis: String,
        /// `dyadic`, `truncation` or a comma separated list.
        #[arg(long)]
        lags: Option<String>,
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Adds oracle values computed from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mode index, for oracle values of a path file.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in reproduction profile.
    Reproduce {
        #[arg(default_value = "comparison_1d")]
        profile: String,
        #[arg(long, default_value = "reproduce_out")]
        out_dir: PathBuf,
    },
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("GLEFIELD_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("GLEFIELD_THREADS must be a nonnegative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;

    match cli.command {
        Command::Kernel { config, t_max, points, out } => commands::kernel(config.as_deref(), t_max, points, &out),
        Command::Spectrum { config, k, omega_max, points, out } => {
            commands::spectrum(config.as_deref(), k, omega_max, points, &out)
        }
        Command::Verify { config, k_list, out } => commands::verify(config.as_deref(), &k_list, out.as_deref()),
        Command::SampleMode { config, k, dt, n, ensemble, seed, method, out } => {
            let mut cfg = config::RunConfig::load(config.as_deref())?;
            commands::override_sampler(&mut cfg, dt, n, ensemble, seed, method);
            commands::sample_mode(&cfg, k, &out)
        }
        Command::SampleField { config, modes, nx, dt, n, ensemble, seed, method, tail_budget, out } => {
            let mut cfg = config::RunConfig::load(config.as_deref())?;
            commands::override_sampler(&mut cfg, dt, n, ensemble, seed, method);
            if let Some(v) = modes {
                cfg.field.modes = v;
            }
            if let Some(v) = nx {
                cfg.field.nx = v;
            }
            if let Some(v) = tail_budget {
                cfg.field.tail_budget = v;
            }
            commands::sample_field(&cfg, &out)
        }
        Command::Hoelder { input, axis, lags, bootstrap, config, k, out } => {
            let axis = axis.parse().map_err(|e: glefield_core::Error| CliError::Usage(e.to_string()))?;
            let with_oracle = config.is_some();
            let mut cfg = config::RunConfig::load(config.as_deref())?;
            if let Some(l) = lags {
                cfg.regularity.lags = l;
            }
            if let Some(b) = bootstrap {
                cfg.regularity.bootstrap = b;
            }
            commands::hoelder(&cfg, with_oracle, &input, axis, k, &out)
        }
        Command::Reproduce { profile, out_dir } => commands::reproduce(&profile, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Numerical(_) => 3,
            })
        }
    }
}
