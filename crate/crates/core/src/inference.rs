//! Multiplier bootstrap of the estimated curves, estimated directional
//! derivatives of the sup/inf functionals, uniform confidence bands,
//! identified-set confidence intervals, KS-type tests, and the two-group
//! L^p equality test.

use crate::bounds::BoundsCurve;
use crate::cdf::InfluenceTable;
use crate::curve::interp_zero;
use crate::data::EvalGrids;
use crate::error::{Error, Result};
use crate::stats::{fmt10, lp_norm_trapezoid, quantile_of};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// Bootstrap configuration. Weights are standard normal (mean zero, unit
/// variance).
#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(m: usize, alpha: f64, seed: u64) -> Result<Self> {
        if m < 100 {
            return Err(Error::InvalidParam(format!(
                "bootstrap iteration count m = {m} must be at least 100"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParam(format!(
                "significance level alpha = {alpha} must lie in (0,1)"
            )));
        }
        Ok(Self { m, alpha, seed })
    }
}

/// Influence tables backing the four simulated curve components, one layout
/// per identification regime with inference support.
pub enum ProcessTables<'a> {
    /// Point identification: components `(psi1, psi1, psi0, psi0)`.
    Unconfounded {
        psi1: &'a InfluenceTable,
        psi0: &'a InfluenceTable,
    },
    /// Combined dominance regime: components `(psi11, psiY, psiY, psi00)`.
    Endogenous {
        psi11: &'a InfluenceTable,
        psi_y: &'a InfluenceTable,
        psi00: &'a InfluenceTable,
    },
    /// Covariate-subset estimator: components `(psi11, psi11, psi10, psi10)`.
    Subset {
        psi11: &'a InfluenceTable,
        psi10: &'a InfluenceTable,
    },
}

impl ProcessTables<'_> {
    fn tables(&self) -> Vec<&InfluenceTable> {
        match self {
            ProcessTables::Unconfounded { psi1, psi0 } => vec![psi1, psi0],
            ProcessTables::Endogenous { psi11, psi_y, psi00 } => vec![psi11, psi_y, psi00],
            ProcessTables::Subset { psi11, psi10 } => vec![psi11, psi10],
        }
    }
}

/// One bootstrap iteration of the scaled simulated processes: four curves
/// `r_n * sum_i B_i psi_i` on the outcome grid.
#[derive(Debug, Clone)]
pub struct SimulatedProcess {
    pub components: [Arc<[f64]>; 4],
}

/// Simulates `m` multiplier-bootstrap processes. Iteration `b` draws its
/// weight vector from a dedicated RNG stream, so results are independent of
/// scheduling and identical between serial and parallel runs. Two groups in
/// a comparison use disjoint `stream_offset` ranges for independent weights.
pub fn simulate_processes(
    tables: &ProcessTables,
    cfg: &BootstrapConfig,
    r_n: f64,
    stream_offset: u64,
) -> Result<Vec<SimulatedProcess>> {
    let ts = tables.tables();
    let n = ts[0].n();
    let g = ts[0].grid_points();
    for t in &ts {
        if t.n() != n || t.grid_points() != g {
            return Err(Error::LengthMismatch(
                "influence tables disagree on n or grid length".into(),
            ));
        }
    }
    if !(r_n.is_finite() && r_n > 0.0) {
        return Err(Error::InvalidParam(format!("r_n = {r_n} must be positive")));
    }
    let seed = cfg.seed;
    let procs: Vec<SimulatedProcess> = (0..cfg.m)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_offset + b as u64);
            let weights: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let combo =
                |t: &InfluenceTable| -> Arc<[f64]> { t.weighted_combination(&weights, r_n).into() };
            let components: [Arc<[f64]>; 4] = match tables {
                ProcessTables::Unconfounded { psi1, psi0 } => {
                    let c1 = combo(psi1);
                    let c0 = combo(psi0);
                    [c1.clone(), c1, c0.clone(), c0]
                }
                ProcessTables::Endogenous { psi11, psi_y, psi00 } => {
                    let c11 = combo(psi11);
                    let cy = combo(psi_y);
                    let c00 = combo(psi00);
                    [c11, cy.clone(), cy, c00]
                }
                ProcessTables::Subset { psi11, psi10 } => {
                    let c11 = combo(psi11);
                    let c10 = combo(psi10);
                    [c11.clone(), c11, c10.clone(), c10]
                }
            };
            SimulatedProcess { components }
        })
        .collect();
    Ok(procs)
}

/// Estimated directional derivative of the lower-bound functional:
/// `max( sup_d sup_{y in argsup(d)} (h1(y) - h4(y - delta)),
///       sup_d inf_{y in argsup(d)} -(h2(y) - h3(y - delta)) )`
/// with `y - delta` linearly interpolated and processes extended by zero.
pub fn hdd_lower(bc: &BoundsCurve, grids: &EvalGrids, proc: &SimulatedProcess) -> Result<f64> {
    hdd_impl(&bc.argsup_sets, grids, proc, false)
}

/// Mirror of [`hdd_lower`] for the upper-bound functional, over the arginf
/// sets with the signs swapped.
pub fn hdd_upper(bc: &BoundsCurve, grids: &EvalGrids, proc: &SimulatedProcess) -> Result<f64> {
    hdd_impl(&bc.arginf_sets, grids, proc, true)
}

fn hdd_impl(
    sets: &[Vec<usize>],
    grids: &EvalGrids,
    proc: &SimulatedProcess,
    upper: bool,
) -> Result<f64> {
    let y = &grids.y_grid;
    let [h1, h2, h3, h4] = &proc.components;
    let mut branch_sup = f64::NEG_INFINITY;
    let mut branch_inf = f64::NEG_INFINITY;
    for (d, set) in sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyArgmaxSet(d));
        }
        let delta = grids.delta_grid[d];
        let mut s = f64::NEG_INFINITY;
        let mut t = f64::INFINITY;
        for &j in set {
            let shift = y[j] - delta;
            let a = h1[j] - interp_zero(y, h4, shift);
            let b = h2[j] - interp_zero(y, h3, shift);
            if upper {
                s = s.max(-a);
                t = t.min(b);
            } else {
                s = s.max(a);
                t = t.min(-b);
            }
        }
        branch_sup = branch_sup.max(s);
        branch_inf = branch_inf.max(t);
    }
    Ok(branch_sup.max(branch_inf))
}

/// A per-delta interval `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct ConfidenceBand {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Uniform confidence bands around the bound curves plus the identified-set
/// confidence interval.
#[derive(Debug, Clone)]
pub struct BandResult {
    /// `(1 - alpha/2)` quantile of the lower-functional derivative draws.
    pub c_l: f64,
    /// `(1 - alpha/2)` quantile of the upper-functional derivative draws.
    pub c_u: f64,
    /// Band around the lower bound curve, clipped into `[0, 1]`.
    pub band_lower: ConfidenceBand,
    /// Band around the upper bound curve, clipped into `[0, 1]`.
    pub band_upper: ConfidenceBand,
    pub raw_band_lower: ConfidenceBand,
    pub raw_band_upper: ConfidenceBand,
    /// `[lower - c_l / r_n, upper + c_u / r_n]` per delta.
    pub idset_ci: ConfidenceBand,
    pub hdd_lower_draws: Vec<f64>,
    pub hdd_upper_draws: Vec<f64>,
}

/// Builds uniform confidence bands from the bootstrap processes. The
/// bootstrap draws approximate the law of the scaled deviation, so the
/// quantiles are divided by `r_n` before being added to the estimates;
/// clipping into `[0, 1]` only enlarges coverage.
pub fn confidence_bands(
    bc: &BoundsCurve,
    grids: &EvalGrids,
    processes: &[SimulatedProcess],
    cfg: &BootstrapConfig,
    r_n: f64,
) -> Result<BandResult> {
    let m = processes.len();
    if (m as f64) * cfg.alpha / 2.0 < 1.0 {
        return Err(Error::BootstrapTooSmall {
            m,
            prob: 1.0 - cfg.alpha / 2.0,
        });
    }
    let lower_draws: Vec<f64> = processes
        .par_iter()
        .map(|p| hdd_lower(bc, grids, p))
        .collect::<Result<_>>()?;
    let upper_draws: Vec<f64> = processes
        .par_iter()
        .map(|p| hdd_upper(bc, grids, p))
        .collect::<Result<_>>()?;
    let prob = 1.0 - cfg.alpha / 2.0;
    let c_l = quantile_of(&lower_draws, prob);
    let c_u = quantile_of(&upper_draws, prob);

    let half_l = c_l / r_n;
    let half_u = c_u / r_n;
    let raw_band_lower = ConfidenceBand {
        lo: bc.lower.iter().map(|v| v - half_l).collect(),
        hi: bc.lower.iter().map(|v| v + half_l).collect(),
    };
    let raw_band_upper = ConfidenceBand {
        lo: bc.upper.iter().map(|v| v - half_u).collect(),
        hi: bc.upper.iter().map(|v| v + half_u).collect(),
    };
    let clip = |b: &ConfidenceBand| ConfidenceBand {
        lo: b.lo.iter().map(|v| v.max(0.0)).collect(),
        hi: b.hi.iter().map(|v| v.min(1.0)).collect(),
    };
    let idset_ci = ConfidenceBand {
        lo: raw_band_lower.lo.clone(),
        hi: raw_band_upper.hi.clone(),
    };
    Ok(BandResult {
        c_l,
        c_u,
        band_lower: clip(&raw_band_lower),
        band_upper: clip(&raw_band_upper),
        raw_band_lower,
        raw_band_upper,
        idset_ci,
        hdd_lower_draws: lower_draws,
        hdd_upper_draws: upper_draws,
    })
}

/// Which bound curve a one-sample test targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

/// Outcome of a bootstrap test.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub bootstrap_draws: Vec<f64>,
}

fn finish_test(statistic: f64, draws: Vec<f64>, alpha: f64) -> TestResult {
    let critical_value = quantile_of(&draws, 1.0 - alpha);
    let m = draws.len();
    let ge = draws.iter().filter(|&&d| d >= statistic).count();
    TestResult {
        statistic,
        critical_value,
        p_value: (1 + ge) as f64 / (m + 1) as f64,
        reject: statistic > critical_value,
        alpha,
        bootstrap_draws: draws,
    }
}

/// KS-type test of a hypothesized bound curve: the statistic is the scaled
/// sup-distance `r_n * max_delta |estimate - null|`, compared against the
/// `(1 - alpha)` quantile of the matching derivative draws.
pub fn ks_test(
    bc: &BoundsCurve,
    grids: &EvalGrids,
    null_curve: &[f64],
    side: BoundSide,
    processes: &[SimulatedProcess],
    cfg: &BootstrapConfig,
    r_n: f64,
) -> Result<TestResult> {
    let estimate = match side {
        BoundSide::Lower => &bc.lower,
        BoundSide::Upper => &bc.upper,
    };
    if null_curve.len() != estimate.len() {
        return Err(Error::GridMismatch(format!(
            "null curve has {} points, delta grid has {}",
            null_curve.len(),
            estimate.len()
        )));
    }
    let statistic = r_n
        * estimate
            .iter()
            .zip(null_curve.iter())
            .map(|(e, c)| (e - c).abs())
            .fold(0.0f64, f64::max);
    let draws: Vec<f64> = processes
        .par_iter()
        .map(|p| match side {
            BoundSide::Lower => hdd_lower(bc, grids, p),
            BoundSide::Upper => hdd_upper(bc, grids, p),
        })
        .collect::<Result<_>>()?;
    Ok(finish_test(statistic, draws, cfg.alpha))
}

/// One group's estimated curve, grids, and simulated processes for the
/// two-group equality test.
pub struct GroupInference<'a> {
    pub bc: &'a BoundsCurve,
    pub grids: &'a EvalGrids,
    pub processes: &'a [SimulatedProcess],
}

/// Derivative of the per-delta sup functional in the direction of a
/// simulated process: `sup_{y in argsup(d)} (h1(y) - h4(y - delta))`.
fn rho_curve(g: &GroupInference, proc: &SimulatedProcess) -> Result<Vec<f64>> {
    let y = &g.grids.y_grid;
    let [h1, _, _, h4] = &proc.components;
    let mut out = Vec::with_capacity(g.bc.argsup_sets.len());
    for (d, set) in g.bc.argsup_sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyArgmaxSet(d));
        }
        let delta = g.grids.delta_grid[d];
        let mut s = f64::NEG_INFINITY;
        for &j in set {
            s = s.max(h1[j] - interp_zero(y, h4, y[j] - delta));
        }
        out.push(s);
    }
    Ok(out)
}

/// Tests equality of the two groups' lower bound curves over the
/// treatment-effect grid with an L^p statistic
/// `r_n * (integral |L_A - L_B|^p)^(1/p)` (trapezoid quadrature). Bootstrap
/// draws replace each curve by the directional derivative of its sup
/// functional; the groups must carry independently drawn processes.
pub fn equality_test(
    a: &GroupInference,
    b: &GroupInference,
    p: f64,
    cfg: &BootstrapConfig,
    r_n: f64,
) -> Result<TestResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParam(format!("norm order p = {p} must be >= 1")));
    }
    let dg = &a.grids.delta_grid;
    if dg.len() != b.grids.delta_grid.len() || dg[..] != b.grids.delta_grid[..] {
        return Err(Error::GridMismatch(
            "the two groups must share the treatment-effect grid".into(),
        ));
    }
    if a.processes.len() != b.processes.len() {
        return Err(Error::LengthMismatch(
            "groups carry different bootstrap iteration counts".into(),
        ));
    }
    let diff: Vec<f64> = a
        .bc
        .raw_sup
        .iter()
        .zip(b.bc.raw_sup.iter())
        .map(|(x, y)| x - y)
        .collect();
    let statistic = r_n * lp_norm_trapezoid(dg, &diff, p);

    let draws: Vec<f64> = a
        .processes
        .par_iter()
        .zip(b.processes.par_iter())
        .map(|(pa, pb)| {
            let ra = rho_curve(a, pa)?;
            let rb = rho_curve(b, pb)?;
            let d: Vec<f64> = ra.iter().zip(rb.iter()).map(|(x, y)| x - y).collect();
            Ok(lp_norm_trapezoid(dg, &d, p))
        })
        .collect::<Result<_>>()?;
    Ok(finish_test(statistic, draws, cfg.alpha))
}

/// Writes the band curves as CSV at 10 significant digits.
pub fn write_band_csv<W: Write>(bc: &BoundsCurve, band: &BandResult, mut w: W) -> Result<()> {
    writeln!(
        w,
        "delta,lower,upper,lower_band_lo,lower_band_hi,upper_band_lo,upper_band_hi,\
         raw_lower_band_lo,raw_lower_band_hi,raw_upper_band_lo,raw_upper_band_hi,\
         idset_lo,idset_hi"
    )?;
    for (d, &delta) in bc.delta_grid.iter().enumerate() {
        let cells = [
            delta,
            bc.lower[d],
            bc.upper[d],
            band.band_lower.lo[d],
            band.band_lower.hi[d],
            band.band_upper.lo[d],
            band.band_upper.hi[d],
            band.raw_band_lower.lo[d],
            band.raw_band_lower.hi[d],
            band.raw_band_upper.lo[d],
            band.raw_band_upper.hi[d],
            band.idset_ci.lo[d],
            band.idset_ci.hi[d],
        ];
        let line: Vec<String> = cells.iter().map(|&v| fmt10(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct QuantilesOut {
    pub c_l: f64,
    pub c_u: f64,
    pub r_n: f64,
    pub a_n: f64,
    pub alpha: f64,
    pub m: usize,
    pub seed: u64,
}
