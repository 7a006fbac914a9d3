//! Run configuration assembled from command-line flags and an optional JSON
//! config file; values in the file override flags.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use tebounds::{BandwidthRule, ColumnMap, KernelFamily, Regime, TuningRate};

/// Commands understood by the front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Bands,
    Test,
    Compare,
    Simulate,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "estimate" => Command::Estimate,
            "bands" => Command::Bands,
            "test" => Command::Test,
            "compare" => Command::Compare,
            "simulate" => Command::Simulate,
            other => bail!("unknown command `{other}`"),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Bands => "bands",
            Command::Test => "test",
            Command::Compare => "compare",
            Command::Simulate => "simulate",
        }
    }
}

/// A conditioning-point coordinate: either a literal value or a covariate
/// quantile shorthand `q:tau`.
#[derive(Debug, Clone)]
pub enum X0Entry {
    Value(f64),
    Quantile(f64),
}

impl X0Entry {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(q) = s.strip_prefix("q:") {
            let tau: f64 = q.parse().with_context(|| format!("bad quantile `{s}`"))?;
            if !(0.0..=1.0).contains(&tau) {
                bail!("quantile level {tau} outside [0, 1]");
            }
            Ok(X0Entry::Quantile(tau))
        } else {
            Ok(X0Entry::Value(
                s.parse().with_context(|| format!("bad x0 entry `{s}`"))?,
            ))
        }
    }
}

fn parse_x0_list(items: &[serde_json::Value]) -> Result<Vec<X0Entry>> {
    items
        .iter()
        .map(|v| match v {
            serde_json::Value::Number(n) => Ok(X0Entry::Value(n.as_f64().unwrap())),
            serde_json::Value::String(s) => X0Entry::parse(s),
            other => bail!("bad x0 entry {other}"),
        })
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
struct FileBandwidth {
    rule: String,
    #[serde(default)]
    h: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct FileTuning {
    #[serde(default)]
    rate: Option<String>,
    #[serde(default)]
    c: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
struct FileMc {
    reps: Option<usize>,
    n: Option<usize>,
    c_values: Option<Vec<f64>>,
    rates: Option<Vec<String>>,
    mu_scenarios: Option<Vec<f64>>,
}

/// JSON config file schema. Every field is optional; present fields override
/// the corresponding flags.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    data: Option<PathBuf>,
    column_map: Option<ColumnMap>,
    regime: Option<String>,
    x0: Option<Vec<serde_json::Value>>,
    x0_b: Option<Vec<serde_json::Value>>,
    m_y: Option<usize>,
    m_delta: Option<usize>,
    pad: Option<f64>,
    delta_range: Option<(f64, f64)>,
    kernel: Option<String>,
    bandwidth: Option<FileBandwidth>,
    tuning: Option<FileTuning>,
    trim: Option<f64>,
    alpha: Option<f64>,
    boot_m: Option<usize>,
    seed: Option<u64>,
    side: Option<String>,
    null_file: Option<PathBuf>,
    p_norm: Option<f64>,
    sub_index: Option<Vec<usize>>,
    out: Option<PathBuf>,
    #[serde(default)]
    mc: FileMc,
}

/// Raw flag values as collected by clap (strings; parsed during merge).
#[derive(Debug, Default, Clone)]
pub struct FlagValues {
    pub command: Option<String>,
    pub data: Option<PathBuf>,
    pub y_col: Option<String>,
    pub d_col: Option<String>,
    pub x_cols: Option<String>,
    pub regime: Option<String>,
    pub x0: Option<String>,
    pub x0_b: Option<String>,
    pub m_y: Option<usize>,
    pub m_delta: Option<usize>,
    pub pad: Option<f64>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub kernel: Option<String>,
    pub bandwidth_rule: Option<String>,
    pub bandwidth: Option<f64>,
    pub tuning_rate: Option<String>,
    pub tuning_c: Option<f64>,
    pub trim: Option<f64>,
    pub alpha: Option<f64>,
    pub boot_m: Option<usize>,
    pub seed: Option<u64>,
    pub side: Option<String>,
    pub null_file: Option<PathBuf>,
    pub p_norm: Option<f64>,
    pub sub_index: Option<String>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub c_values: Option<String>,
    pub rates: Option<String>,
    pub mu_values: Option<String>,
}

/// Regimes plus the covariate-subset variant, which routes estimation through
/// the semiparametric estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeChoice {
    Plain(Regime),
    Subset,
}

impl RegimeChoice {
    fn parse(s: &str) -> Result<Self> {
        if s == "subset" {
            Ok(RegimeChoice::Subset)
        } else {
            Ok(RegimeChoice::Plain(Regime::parse(s)?))
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeChoice::Plain(r) => r.as_str(),
            RegimeChoice::Subset => "subset",
        }
    }
}

/// Fully merged and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub data: Option<PathBuf>,
    pub column_map: ColumnMap,
    pub regime: RegimeChoice,
    pub x0: Vec<X0Entry>,
    pub x0_b: Vec<X0Entry>,
    pub m_y: usize,
    pub m_delta: usize,
    pub pad: f64,
    pub delta_range: Option<(f64, f64)>,
    pub kernel: KernelFamily,
    pub bandwidth: BandwidthRule,
    pub bandwidth_name: String,
    pub tuning_rate: TuningRate,
    pub tuning_c: f64,
    pub trim: f64,
    pub alpha: f64,
    pub boot_m: usize,
    pub seed: u64,
    pub side: String,
    pub null_file: Option<PathBuf>,
    pub p_norm: f64,
    pub sub_index: Vec<usize>,
    pub out: PathBuf,
    pub mc_reps: usize,
    pub mc_n: usize,
    pub mc_c_values: Vec<f64>,
    pub mc_rates: Vec<TuningRate>,
    pub mc_mu_scenarios: Vec<f64>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

pub fn build_config(flags: &FlagValues, config_path: Option<&Path>) -> Result<RunConfig> {
    let file: FileConfig = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config file {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse config file {}", p.display()))?
        }
        None => FileConfig::default(),
    };

    let command_str = file
        .command
        .clone()
        .or_else(|| flags.command.clone())
        .context("no command given; use --command or the config file")?;
    let command = Command::parse(&command_str)?;

    let column_map = file.column_map.clone().unwrap_or_else(|| ColumnMap {
        y: flags.y_col.clone().unwrap_or_else(|| "y".into()),
        d: flags.d_col.clone().unwrap_or_else(|| "d".into()),
        x: flags
            .x_cols
            .clone()
            .map(|s| split_list(&s))
            .unwrap_or_else(|| vec!["x".into()]),
    });

    let regime_str = file
        .regime
        .clone()
        .or_else(|| flags.regime.clone())
        .unwrap_or_else(|| "point_id".into());
    let regime = RegimeChoice::parse(&regime_str)?;

    let x0 = match (&file.x0, &flags.x0) {
        (Some(items), _) => parse_x0_list(items)?,
        (None, Some(s)) => split_list(s)
            .iter()
            .map(|p| X0Entry::parse(p))
            .collect::<Result<_>>()?,
        (None, None) => vec![],
    };
    let x0_b = match (&file.x0_b, &flags.x0_b) {
        (Some(items), _) => parse_x0_list(items)?,
        (None, Some(s)) => split_list(s)
            .iter()
            .map(|p| X0Entry::parse(p))
            .collect::<Result<_>>()?,
        (None, None) => vec![],
    };

    let kernel_str = file
        .kernel
        .clone()
        .or_else(|| flags.kernel.clone())
        .unwrap_or_else(|| "epanechnikov".into());
    let kernel = KernelFamily::parse(&kernel_str)?;

    let (bw_rule_str, bw_h) = match &file.bandwidth {
        Some(b) => (b.rule.clone(), b.h.or(flags.bandwidth)),
        None => (
            flags
                .bandwidth_rule
                .clone()
                .unwrap_or_else(|| "app".into()),
            flags.bandwidth,
        ),
    };
    let bandwidth = match bw_rule_str.as_str() {
        "mc" => BandwidthRule::McRule,
        "app" => BandwidthRule::AppRule,
        "manual" => BandwidthRule::Manual(
            bw_h.context("bandwidth rule `manual` needs an explicit h")?,
        ),
        other => bail!("unknown bandwidth rule `{other}`"),
    };

    let (tuning_rate_str, tuning_c) = match &file.tuning {
        Some(t) => (
            t.rate
                .clone()
                .or_else(|| flags.tuning_rate.clone())
                .unwrap_or_else(|| "loglog".into()),
            t.c.or(flags.tuning_c).unwrap_or(0.2),
        ),
        None => (
            flags.tuning_rate.clone().unwrap_or_else(|| "loglog".into()),
            flags.tuning_c.unwrap_or(0.2),
        ),
    };
    let tuning_rate = TuningRate::parse(&tuning_rate_str)?;

    let delta_range = file.delta_range.or(match (flags.delta_min, flags.delta_max) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => bail!("--delta-min and --delta-max must be given together"),
    });

    let parse_rates = |names: &[String]| -> Result<Vec<TuningRate>> {
        names
            .iter()
            .map(|s| TuningRate::parse(s).map_err(Into::into))
            .collect()
    };
    let mc_rates = match (&file.mc.rates, &flags.rates) {
        (Some(r), _) => parse_rates(r)?,
        (None, Some(s)) => parse_rates(&split_list(s))?,
        (None, None) => vec![TuningRate::LogLog, TuningRate::SqrtLog, TuningRate::Power16],
    };
    let parse_f64_list = |s: &str| -> Result<Vec<f64>> {
        split_list(s)
            .iter()
            .map(|p| p.parse::<f64>().with_context(|| format!("bad number `{p}`")))
            .collect()
    };
    let mc_c_values = match (&file.mc.c_values, &flags.c_values) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) => parse_f64_list(s)?,
        (None, None) => vec![0.1, 0.2, 0.3, 0.4, 0.5],
    };
    let mc_mu_scenarios = match (&file.mc.mu_scenarios, &flags.mu_values) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) => parse_f64_list(s)?,
        (None, None) => vec![0.0, -1.0, 1.0],
    };

    let sub_index = match (&file.sub_index, &flags.sub_index) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) => split_list(s)
            .iter()
            .map(|p| p.parse::<usize>().with_context(|| format!("bad index `{p}`")))
            .collect::<Result<_>>()?,
        (None, None) => vec![0],
    };

    let cfg = RunConfig {
        command,
        data: file.data.clone().or_else(|| flags.data.clone()),
        column_map,
        regime,
        x0,
        x0_b,
        m_y: file.m_y.or(flags.m_y).unwrap_or(401),
        m_delta: file.m_delta.or(flags.m_delta).unwrap_or(201),
        pad: file.pad.or(flags.pad).unwrap_or(0.0),
        delta_range,
        kernel,
        bandwidth,
        bandwidth_name: bw_rule_str,
        tuning_rate,
        tuning_c,
        trim: file.trim.or(flags.trim).unwrap_or(0.01),
        alpha: file.alpha.or(flags.alpha).unwrap_or(0.05),
        boot_m: file.boot_m.or(flags.boot_m).unwrap_or(500),
        seed: file.seed.or(flags.seed).unwrap_or(0),
        side: file
            .side
            .clone()
            .or_else(|| flags.side.clone())
            .unwrap_or_else(|| "lower".into()),
        null_file: file.null_file.clone().or_else(|| flags.null_file.clone()),
        p_norm: file.p_norm.or(flags.p_norm).unwrap_or(1.0),
        sub_index,
        out: file
            .out
            .clone()
            .or_else(|| flags.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        mc_reps: file.mc.reps.or(flags.reps).unwrap_or(500),
        mc_n: file.mc.n.or(flags.n).unwrap_or(500),
        mc_c_values,
        mc_rates,
        mc_mu_scenarios,
    };

    // Cross-field checks that do not need the data.
    if cfg.command != Command::Simulate {
        if cfg.data.is_none() {
            bail!("command `{}` needs --data", cfg.command.as_str());
        }
        if cfg.x0.is_empty() {
            bail!("command `{}` needs --x0", cfg.command.as_str());
        }
    }
    if cfg.command == Command::Test && cfg.null_file.is_none() {
        bail!("command `test` needs --null-file");
    }
    if cfg.command == Command::Compare && cfg.x0_b.is_empty() {
        bail!("command `compare` needs --x0-b");
    }
    if cfg.side != "lower" && cfg.side != "upper" {
        bail!("--side must be `lower` or `upper`");
    }
    Ok(cfg)
}
