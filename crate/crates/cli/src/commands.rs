//! Command implementations: estimation, confidence bands, tests, group
//! comparison, and the simulation study. All file output is computed first
//! and then written atomically (temp file + rename), so failed runs leave no
//! partial results behind.

use crate::config::{Command, RegimeChoice, RunConfig, X0Entry};
use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use tebounds::inference::QuantilesOut;
use tebounds::stats::quantile_type7;
use tebounds::{
    assemble_marginal_bounds, bandwidth_cols, bounds::argmax_sets_json, bounds::write_bounds_csv,
    confidence_bands, equality_test, estimate_cdf_endogenous, estimate_cdf_subset,
    estimate_cdf_unconfounded, fit_propensity, inference::write_band_csv, ks_test, load_csv,
    make_grids_custom, makarov_bounds, run_table1, simulate_processes, BootstrapConfig, BoundSide,
    EvalGrids, GroupInference, InfluenceTable, IngestReport, KernelSpec, MakarovOutput,
    MarginalBounds, MarginalInputs, McSettings, ObservationTable, ProcessTables, Regime,
    SimulatedProcess, TuningSequence,
};

/// Influence tables retained for the bootstrap, one layout per regime with
/// inference support.
enum OwnedTables {
    Unconfounded {
        psi1: InfluenceTable,
        psi0: InfluenceTable,
    },
    Endogenous {
        psi11: InfluenceTable,
        psi_y: InfluenceTable,
        psi00: InfluenceTable,
    },
    Subset {
        psi11: InfluenceTable,
        psi10: InfluenceTable,
    },
}

impl OwnedTables {
    fn as_process_tables(&self) -> ProcessTables<'_> {
        match self {
            OwnedTables::Unconfounded { psi1, psi0 } => ProcessTables::Unconfounded { psi1, psi0 },
            OwnedTables::Endogenous { psi11, psi_y, psi00 } => ProcessTables::Endogenous {
                psi11,
                psi_y,
                psi00,
            },
            OwnedTables::Subset { psi11, psi10 } => ProcessTables::Subset { psi11, psi10 },
        }
    }
}

/// One estimated pipeline at a conditioning point.
struct Estimated {
    grids: EvalGrids,
    h: f64,
    a_n: f64,
    r_n: f64,
    mb: MarginalBounds,
    mak: MakarovOutput,
    tables: Option<OwnedTables>,
    diagnostics: serde_json::Value,
}

fn resolve_x0(
    entries: &[X0Entry],
    table: &ObservationTable,
    columns: &[usize],
) -> Result<Vec<f64>> {
    if entries.len() != columns.len() {
        bail!(
            "x0 has {} entries but the smoothing covariates number {}",
            entries.len(),
            columns.len()
        );
    }
    entries
        .iter()
        .zip(columns.iter())
        .map(|(e, &c)| match e {
            X0Entry::Value(v) => Ok(*v),
            X0Entry::Quantile(tau) => {
                let mut col = table.x_col(c);
                col.sort_by(f64::total_cmp);
                Ok(quantile_type7(&col, *tau))
            }
        })
        .collect()
}

fn estimate_at(
    cfg: &RunConfig,
    table: &ObservationTable,
    report: &IngestReport,
    entries: &[X0Entry],
    want_inference: bool,
) -> Result<Estimated> {
    let n = table.n();
    let columns: Vec<usize> = match cfg.regime {
        RegimeChoice::Subset => cfg.sub_index.clone(),
        _ => (0..table.d_x()).collect(),
    };
    let d_used = columns.len();
    let x0 = resolve_x0(entries, table, &columns)?;
    let grids = make_grids_custom(
        table,
        x0.clone(),
        cfg.m_y,
        cfg.m_delta,
        cfg.pad,
        cfg.delta_range,
    )?;
    let kernel = KernelSpec::new(cfg.kernel, d_used)?;
    let h = bandwidth_cols(cfg.bandwidth, table, &columns)?;
    let tuning = TuningSequence::new(cfg.tuning_rate, cfg.tuning_c)?;
    let a_n = tuning.a_n(n, h, d_used)?;
    let r_n = (n as f64 * h.powi(d_used as i32)).sqrt();

    let mut diag = json!({
        "command": cfg.command.as_str(),
        "regime": cfg.regime.as_str(),
        "n_used": n,
        "rows_read": report.rows_read,
        "rows_dropped": report.rows_dropped,
        "x0": x0,
        "h": h,
        "a_n": a_n,
        "r_n": r_n,
        "bandwidth_rule": cfg.bandwidth_name,
        "tuning": {"rate": format!("{:?}", cfg.tuning_rate).to_lowercase(), "c": cfg.tuning_c},
        "m_y": cfg.m_y,
        "m_delta": cfg.m_delta,
        "pad": cfg.pad,
        "alpha": cfg.alpha,
        "seed": cfg.seed,
    });

    let (mb, tables) = match cfg.regime {
        RegimeChoice::Plain(Regime::PointId) => {
            let fit = estimate_cdf_unconfounded(table, &grids, &kernel, h, cfg.trim)?;
            diag["local_propensity"] = json!(fit.diag.local_propensity);
            diag["effective_n1"] = json!(fit.diag.effective_n1);
            diag["effective_n0"] = json!(fit.diag.effective_n0);
            diag["trim_warning"] = json!(fit.diag.trim_warning);
            let mb = assemble_marginal_bounds(
                Regime::PointId,
                &MarginalInputs::PointId {
                    f1: &fit.f1,
                    f0: &fit.f0,
                },
            )?;
            (
                mb,
                Some(OwnedTables::Unconfounded {
                    psi1: fit.psi1,
                    psi0: fit.psi0,
                }),
            )
        }
        RegimeChoice::Plain(regime) => {
            let fit = estimate_cdf_endogenous(table, &grids, &kernel, h, cfg.trim)?;
            diag["local_propensity"] = json!(fit.diag.local_propensity);
            diag["effective_n1"] = json!(fit.diag.effective_n1);
            diag["effective_n0"] = json!(fit.diag.effective_n0);
            diag["trim_warning"] = json!(fit.diag.trim_warning);
            let mb = assemble_marginal_bounds(
                regime,
                &MarginalInputs::Endogenous {
                    f11: &fit.f11,
                    f00: &fit.f00,
                    fy: &fit.fy,
                    p_hat: fit.diag.local_propensity,
                },
            )?;
            let tables = if regime == Regime::FsdBoth {
                Some(OwnedTables::Endogenous {
                    psi11: fit.psi11,
                    psi_y: fit.psi_y,
                    psi00: fit.psi00,
                })
            } else {
                None
            };
            (mb, tables)
        }
        RegimeChoice::Subset => {
            let model = fit_propensity(table)?;
            diag["propensity_theta"] = json!(model.theta());
            let fit = estimate_cdf_subset(
                table,
                &grids,
                &cfg.sub_index,
                &model,
                &kernel,
                h,
                cfg.trim,
            )?;
            diag["flagged_rows"] = json!(fit.flagged_rows);
            let mb = assemble_marginal_bounds(
                Regime::PointId,
                &MarginalInputs::PointId {
                    f1: &fit.f1,
                    f0: &fit.f0,
                },
            )?;
            (
                mb,
                Some(OwnedTables::Subset {
                    psi11: fit.psi11,
                    psi10: fit.psi10,
                }),
            )
        }
    };
    diag["crossing_clips"] = json!(mb.crossing_clips);

    if want_inference && tables.is_none() {
        bail!(
            "regime `{}` supports estimation only; bootstrap inference needs \
             point_id, fsd_both, or subset",
            cfg.regime.as_str()
        );
    }

    let mak = makarov_bounds(&mb, &grids, a_n)?;
    Ok(Estimated {
        grids,
        h,
        a_n,
        r_n,
        mb,
        mak,
        tables,
        diagnostics: diag,
    })
}

/// Pending output files: rendered in memory, written atomically at the end.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn add_json_of<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.add_json(name, &serde_json::to_value(value)?)
    }

    /// Writes every file through a temp sibling and rename.
    fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("cannot create output directory {}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let target = self.dir.join(&name);
            let tmp = self.dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, &bytes)
                .with_context(|| format!("cannot write {}", tmp.display()))?;
            fs::rename(&tmp, &target)
                .with_context(|| format!("cannot move output into {}", target.display()))?;
            written.push(target);
        }
        Ok(written)
    }
}

fn load_table(cfg: &RunConfig) -> Result<(ObservationTable, IngestReport)> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| anyhow!("no data file configured"))?;
    Ok(load_csv(path, &cfg.column_map)?)
}

fn print_summary(lines: &[(&str, String)]) {
    for (k, v) in lines {
        println!("{k:<18} {v}");
    }
}

fn summary_common(cfg: &RunConfig, est: &Estimated, report: &IngestReport) -> Vec<(&'static str, String)> {
    let mut lines = vec![
        ("command", cfg.command.as_str().to_string()),
        ("regime", cfg.regime.as_str().to_string()),
        (
            "rows used",
            format!(
                "{} (read {}, dropped {})",
                report.rows_read - report.rows_dropped,
                report.rows_read,
                report.rows_dropped
            ),
        ),
        ("x0", format!("{:?}", est.grids.x0)),
        (
            "bandwidth",
            format!("{:.6} ({})", est.h, cfg.bandwidth_name),
        ),
        (
            "a_n",
            format!(
                "{:.6} ({:?}, c={})",
                est.a_n,
                cfg.tuning_rate,
                cfg.tuning_c
            ),
        ),
        ("r_n", format!("{:.6}", est.r_n)),
        ("crossing clips", est.mb.crossing_clips.to_string()),
    ];
    if let Some(true) = est.diagnostics["trim_warning"].as_bool() {
        lines.push((
            "warning",
            "local propensity outside the trimming range".to_string(),
        ));
    }
    lines
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<()> {
    let (table, report) = load_table(cfg)?;
    let est = estimate_at(cfg, &table, &report, &cfg.x0, false)?;

    let mut out = OutputSet::new(&cfg.out);
    let mut csv = Vec::new();
    write_bounds_csv(&est.mak.curve, &mut csv)?;
    out.add("bounds.csv", csv);
    out.add_json("argmax_sets.json", &argmax_sets_json(&est.mak.curve))?;
    out.add_json("diagnostics.json", &est.diagnostics)?;
    let files = out.commit()?;

    let mut lines = summary_common(cfg, &est, &report);
    lines.push(("outputs", format_paths(&files)));
    print_summary(&lines);
    Ok(())
}

fn simulate_for(
    est: &Estimated,
    cfg: &RunConfig,
    stream_offset: u64,
) -> Result<Vec<SimulatedProcess>> {
    let tables = est
        .tables
        .as_ref()
        .ok_or_else(|| anyhow!("regime without inference support"))?;
    let boot = BootstrapConfig::new(cfg.boot_m, cfg.alpha, cfg.seed)?;
    Ok(simulate_processes(
        &tables.as_process_tables(),
        &boot,
        est.r_n,
        stream_offset,
    )?)
}

pub fn cmd_bands(cfg: &RunConfig) -> Result<()> {
    let (table, report) = load_table(cfg)?;
    let est = estimate_at(cfg, &table, &report, &cfg.x0, true)?;
    let procs = simulate_for(&est, cfg, 0)?;
    let boot = BootstrapConfig::new(cfg.boot_m, cfg.alpha, cfg.seed)?;
    let band = confidence_bands(&est.mak.curve, &est.grids, &procs, &boot, est.r_n)?;

    let mut out = OutputSet::new(&cfg.out);
    let mut csv = Vec::new();
    write_bounds_csv(&est.mak.curve, &mut csv)?;
    out.add("bounds.csv", csv);
    let mut band_csv = Vec::new();
    write_band_csv(&est.mak.curve, &band, &mut band_csv)?;
    out.add("bands.csv", band_csv);
    out.add_json_of(
        "quantiles.json",
        &QuantilesOut {
            c_l: band.c_l,
            c_u: band.c_u,
            r_n: est.r_n,
            a_n: est.a_n,
            alpha: cfg.alpha,
            m: cfg.boot_m,
            seed: cfg.seed,
        },
    )?;
    out.add_json("argmax_sets.json", &argmax_sets_json(&est.mak.curve))?;
    out.add_json("diagnostics.json", &est.diagnostics)?;
    let files = out.commit()?;

    let mut lines = summary_common(cfg, &est, &report);
    lines.push(("c_l", format!("{:.6}", band.c_l)));
    lines.push(("c_u", format!("{:.6}", band.c_u)));
    lines.push(("outputs", format_paths(&files)));
    print_summary(&lines);
    Ok(())
}

/// Reads a null curve file (CSV with header `delta,value`) and interpolates
/// it onto the evaluation grid, clamping outside the file's range.
fn read_null_curve(path: &Path, delta_grid: &[f64]) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read null curve {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let di = headers
        .iter()
        .position(|h| h == "delta")
        .context("null curve file needs a `delta` column")?;
    let vi = headers
        .iter()
        .position(|h| h == "value")
        .context("null curve file needs a `value` column")?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let d: f64 = rec
            .get(di)
            .unwrap_or("")
            .trim()
            .parse()
            .context("bad delta in null curve")?;
        let v: f64 = rec
            .get(vi)
            .unwrap_or("")
            .trim()
            .parse()
            .context("bad value in null curve")?;
        pts.push((d, v));
    }
    if pts.len() < 2 {
        bail!("null curve file needs at least two rows");
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(delta_grid
        .iter()
        .map(|&d| tebounds::curve::interp_ext(&xs, &ys, d, ys[0], *ys.last().unwrap()))
        .collect())
}

pub fn cmd_test(cfg: &RunConfig) -> Result<()> {
    let (table, report) = load_table(cfg)?;
    let est = estimate_at(cfg, &table, &report, &cfg.x0, true)?;
    let null_path = cfg.null_file.as_ref().unwrap();
    let null = read_null_curve(null_path, &est.grids.delta_grid)?;
    let side = if cfg.side == "lower" {
        BoundSide::Lower
    } else {
        BoundSide::Upper
    };
    let procs = simulate_for(&est, cfg, 0)?;
    let boot = BootstrapConfig::new(cfg.boot_m, cfg.alpha, cfg.seed)?;
    let res = ks_test(
        &est.mak.curve,
        &est.grids,
        &null,
        side,
        &procs,
        &boot,
        est.r_n,
    )?;

    let mut out = OutputSet::new(&cfg.out);
    let mut csv = Vec::new();
    write_bounds_csv(&est.mak.curve, &mut csv)?;
    out.add("bounds.csv", csv);
    let mut test_json = serde_json::to_value(&res)?;
    test_json["side"] = json!(cfg.side);
    test_json["null_file"] = json!(null_path.display().to_string());
    out.add_json("test.json", &test_json)?;
    out.add_json("diagnostics.json", &est.diagnostics)?;
    let files = out.commit()?;

    let mut lines = summary_common(cfg, &est, &report);
    lines.push(("statistic", format!("{:.6}", res.statistic)));
    lines.push(("critical value", format!("{:.6}", res.critical_value)));
    lines.push(("p value", format!("{:.6}", res.p_value)));
    lines.push(("reject", res.reject.to_string()));
    lines.push(("outputs", format_paths(&files)));
    print_summary(&lines);
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let (table, report) = load_table(cfg)?;
    let est_a = estimate_at(cfg, &table, &report, &cfg.x0, true)?;
    let est_b = estimate_at(cfg, &table, &report, &cfg.x0_b, true)?;
    let procs_a = simulate_for(&est_a, cfg, 0)?;
    let procs_b = simulate_for(&est_b, cfg, cfg.boot_m as u64)?;
    let boot = BootstrapConfig::new(cfg.boot_m, cfg.alpha, cfg.seed)?;
    let res = equality_test(
        &GroupInference {
            bc: &est_a.mak.curve,
            grids: &est_a.grids,
            processes: &procs_a,
        },
        &GroupInference {
            bc: &est_b.mak.curve,
            grids: &est_b.grids,
            processes: &procs_b,
        },
        cfg.p_norm,
        &boot,
        est_a.r_n,
    )?;

    let mut out = OutputSet::new(&cfg.out);
    let mut compare_json = serde_json::to_value(&res)?;
    compare_json["p_norm"] = json!(cfg.p_norm);
    compare_json["x0_a"] = json!(est_a.grids.x0);
    compare_json["x0_b"] = json!(est_b.grids.x0);
    out.add_json("compare.json", &compare_json)?;
    out.add_json(
        "diagnostics.json",
        &json!({"group_a": est_a.diagnostics, "group_b": est_b.diagnostics}),
    )?;
    let files = out.commit()?;

    let mut lines = summary_common(cfg, &est_a, &report);
    lines.push(("x0_b", format!("{:?}", est_b.grids.x0)));
    lines.push(("statistic", format!("{:.6}", res.statistic)));
    lines.push(("critical value", format!("{:.6}", res.critical_value)));
    lines.push(("p value", format!("{:.6}", res.p_value)));
    lines.push(("reject", res.reject.to_string()));
    lines.push(("outputs", format_paths(&files)));
    print_summary(&lines);
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let settings = McSettings {
        reps: cfg.mc_reps,
        n: cfg.mc_n,
        m_boot: cfg.boot_m,
        c_values: cfg.mc_c_values.clone(),
        rates: cfg.mc_rates.clone(),
        mu_scenarios: cfg.mc_mu_scenarios.clone(),
        base_seed: cfg.seed,
        alpha: cfg.alpha,
        m_y: cfg.m_y,
        m_delta: cfg.m_delta,
    };
    let report = run_table1(&settings)?;

    let mut out = OutputSet::new(&cfg.out);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    out.add("table1.csv", csv);
    out.add_json_of("table1.json", &report)?;
    let files = out.commit()?;

    let mut lines = vec![
        ("command", "simulate".to_string()),
        ("reps", report.reps.to_string()),
        ("n", report.n.to_string()),
        ("m_boot", report.m_boot.to_string()),
        ("alpha", format!("{}", report.alpha)),
        ("seed", report.base_seed.to_string()),
    ];
    for cell in &report.cells {
        let label = format!("{:?}/c={}/mu={}", cell.rate, cell.c, cell.mu).to_lowercase();
        lines.push(("cell", format!("{label}: {:.3}", cell.rejection_rate)));
    }
    lines.push(("outputs", format_paths(&files)));
    print_summary(&lines);
    Ok(())
}

fn format_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn dispatch(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        Command::Estimate => cmd_estimate(cfg),
        Command::Bands => cmd_bands(cfg),
        Command::Test => cmd_test(cfg),
        Command::Compare => cmd_compare(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}
