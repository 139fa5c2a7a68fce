use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Impulse responses by local projection and VAR, and their MSE-minimizing
/// averages.
#[derive(Debug, Parser)]
#[command(name = "irfavg", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Bootstrap draws; overrides the config file.
    #[arg(long, global = true, value_name = "B")]
    pub bootstrap: Option<usize>,

    /// Largest horizon; overrides the config file.
    #[arg(long, global = true, value_name = "H")]
    pub horizons: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Print stage timings to stderr.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a built-in process and write it as a CSV panel.
    Simulate {
        /// Process name (arma, svar4, svarma41).
        dgp: String,
        /// Process parameters, e.g. `rho alpha` for arma.
        #[arg(allow_negative_numbers = true)]
        params: Vec<f64>,
        /// Sample length.
        #[arg(long = "T", value_name = "T")]
        sample_size: usize,
        /// Structural shock written as the `__shock__` column.
        #[arg(long, default_value_t = 0)]
        shock: usize,
        /// Omit the `__shock__` column.
        #[arg(long, conflicts_with = "shock")]
        no_shock: bool,
    },
    /// Estimate LP, VAR and averaged impulse responses with bands.
    Estimate {
        /// Panel CSV.
        input: PathBuf,
        /// TOML configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment.
    Montecarlo {
        /// Experiment TOML.
        config: PathBuf,
        /// Replications; overrides the config file.
        #[arg(long)]
        replications: Option<usize>,
    },
}
