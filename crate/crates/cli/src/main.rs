//! Command-line front end: estimate treatment-effect distribution bounds,
//! build uniform confidence bands, run KS and two-group equality tests, and
//! reproduce the simulation study. Runs are pure functions of
//! `(input files, configuration, seed)`; on error the process exits with
//! status 1 after printing a machine-readable JSON object and leaves no
//! partial output files.

mod commands;
mod config;

use clap::Parser;
use config::FlagValues;
use std::path::PathBuf;

/// Environment variable controlling the worker-thread count.
const WORKERS_ENV: &str = "TEBOUNDS_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "tebounds",
    version,
    about = "Bounds on conditional distributions of treatment effects, with uniform inference",
    long_about = None
)]
struct Cli {
    /// JSON config file; values in it override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of: estimate, bands, test, compare, simulate.
    #[arg(long)]
    command: Option<String>,
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Outcome column name (default `y`).
    #[arg(long)]
    y_col: Option<String>,
    /// Treatment column name (default `d`).
    #[arg(long)]
    d_col: Option<String>,
    /// Comma-separated covariate column names (default `x`).
    #[arg(long)]
    x_cols: Option<String>,
    /// Identification regime: point_id, manski, fsd1, fsd2, fsd_both, subset.
    #[arg(long)]
    regime: Option<String>,
    /// Conditioning point: comma-separated numbers or quantile shorthands
    /// like `q:0.2`.
    #[arg(long)]
    x0: Option<String>,
    /// Second conditioning point for `compare`.
    #[arg(long)]
    x0_b: Option<String>,
    /// Outcome grid size (default 401).
    #[arg(long)]
    m_y: Option<usize>,
    /// Treatment-effect grid size (default 201).
    #[arg(long)]
    m_delta: Option<usize>,
    /// Grid padding as a fraction of the outcome range (default 0).
    #[arg(long)]
    pad: Option<f64>,
    /// Explicit lower end of the treatment-effect grid.
    #[arg(long)]
    delta_min: Option<f64>,
    /// Explicit upper end of the treatment-effect grid.
    #[arg(long)]
    delta_max: Option<f64>,
    /// Kernel family: epanechnikov, biweight, triweight.
    #[arg(long)]
    kernel: Option<String>,
    /// Bandwidth rule: mc, app, manual.
    #[arg(long)]
    bandwidth_rule: Option<String>,
    /// Bandwidth value for the manual rule.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Tuning rate: loglog, sqrtlog, power16 (default loglog).
    #[arg(long)]
    tuning_rate: Option<String>,
    /// Tuning scale c (default 0.2).
    #[arg(long)]
    tuning_c: Option<f64>,
    /// Propensity trimming threshold for diagnostics (default 0.01).
    #[arg(long)]
    trim: Option<f64>,
    /// Significance level (default 0.05).
    #[arg(long)]
    alpha: Option<f64>,
    /// Bootstrap iterations (default 500).
    #[arg(long)]
    boot_m: Option<usize>,
    /// RNG seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Which bound the test targets: lower or upper (default lower).
    #[arg(long)]
    side: Option<String>,
    /// CSV file with columns delta,value holding the hypothesized curve.
    #[arg(long)]
    null_file: Option<PathBuf>,
    /// Norm order for the equality test (default 1).
    #[arg(long)]
    p_norm: Option<f64>,
    /// Covariate column indices forming the smoothing subset (default `0`).
    #[arg(long)]
    sub_index: Option<String>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replications for `simulate` (default 500).
    #[arg(long)]
    reps: Option<usize>,
    /// Sample size per replication for `simulate` (default 500).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated tuning scales for `simulate`.
    #[arg(long)]
    c_values: Option<String>,
    /// Comma-separated tuning rates for `simulate`.
    #[arg(long)]
    rates: Option<String>,
    /// Comma-separated location shifts for `simulate`.
    #[arg(long)]
    mu_values: Option<String>,
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let workers: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer"))?;
        if workers == 0 {
            anyhow::bail!("{WORKERS_ENV} must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot configure worker pool: {e}"))?;
    }

    let flags = FlagValues {
        command: cli.command,
        data: cli.data,
        y_col: cli.y_col,
        d_col: cli.d_col,
        x_cols: cli.x_cols,
        regime: cli.regime,
        x0: cli.x0,
        x0_b: cli.x0_b,
        m_y: cli.m_y,
        m_delta: cli.m_delta,
        pad: cli.pad,
        delta_min: cli.delta_min,
        delta_max: cli.delta_max,
        kernel: cli.kernel,
        bandwidth_rule: cli.bandwidth_rule,
        bandwidth: cli.bandwidth,
        tuning_rate: cli.tuning_rate,
        tuning_c: cli.tuning_c,
        trim: cli.trim,
        alpha: cli.alpha,
        boot_m: cli.boot_m,
        seed: cli.seed,
        side: cli.side,
        null_file: cli.null_file,
        p_norm: cli.p_norm,
        sub_index: cli.sub_index,
        out: cli.out,
        reps: cli.reps,
        n: cli.n,
        c_values: cli.c_values,
        rates: cli.rates,
        mu_values: cli.mu_values,
    };
    let cfg = config::build_config(&flags, cli.config.as_deref())?;
    commands::dispatch(&cfg)
}

fn main() {
    if let Err(err) = run() {
        // Machine-readable error on stdout; the code is stable for library
        // errors and `cli` otherwise.
        let code = err
            .downcast_ref::<tebounds::Error>()
            .map_or("cli", tebounds::Error::code);
        let payload = serde_json::json!({
            "error": {"code": code, "message": format!("{err:#}")}
        });
        println!("{payload}");
        std::process::exit(1);
    }
}
