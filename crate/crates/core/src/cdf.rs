//! Kernel-smoothed conditional CDF estimators at a fixed conditioning point,
//! their per-observation influence tables, and the semiparametric variant on
//! a covariate subset with a parametric propensity first step.

use crate::curve::CdfCurve;
use crate::data::{EvalGrids, ObservationTable};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::propensity::PropensityModel;
use std::sync::Arc;

/// Default trimming threshold for propensity diagnostics.
pub const DEFAULT_TRIM: f64 = 0.01;

/// Per-observation influence values on the outcome grid. Rows for
/// observations with zero kernel weight (or outside the relevant arm) are
/// identically zero and stored implicitly.
#[derive(Debug, Clone)]
pub struct InfluenceTable {
    grid: Arc<[f64]>,
    n: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

impl InfluenceTable {
    pub(crate) fn new(grid: Arc<[f64]>, n: usize, rows: Vec<(usize, Vec<f64>)>) -> Self {
        Self { grid, n, rows }
    }

    /// Number of observations (rows, including implicit zero rows).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points (columns).
    pub fn grid_points(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.grid
    }

    /// Number of rows with nonzero influence.
    pub fn active_rows(&self) -> usize {
        self.rows.len()
    }

    /// Influence value for observation `i` at grid column `j`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match self.rows.binary_search_by_key(&i, |(idx, _)| *idx) {
            Ok(pos) => self.rows[pos].1[j],
            Err(_) => 0.0,
        }
    }

    /// Column sums over all observations; zero (to roundoff) by construction.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.grid.len()];
        for (_, vals) in &self.rows {
            for (s, v) in sums.iter_mut().zip(vals.iter()) {
                *s += v;
            }
        }
        sums
    }

    /// `scale * sum_i weights[i] * row_i`, the multiplier-bootstrap
    /// combination. `weights` must have length `n`.
    pub fn weighted_combination(&self, weights: &[f64], scale: f64) -> Vec<f64> {
        assert_eq!(weights.len(), self.n);
        let mut acc = vec![0.0; self.grid.len()];
        for (i, vals) in &self.rows {
            let b = weights[*i];
            if b == 0.0 {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(vals.iter()) {
                *a += b * v;
            }
        }
        for a in &mut acc {
            *a *= scale;
        }
        acc
    }

    /// Removes the column means (over the stored rows) so each column sums to
    /// zero exactly; used by the inverse-propensity-weighted estimator whose
    /// raw influence values do not satisfy the zero-sum identity in finite
    /// samples.
    fn center_columns(&mut self) {
        if self.rows.is_empty() {
            return;
        }
        let k = self.rows.len() as f64;
        let sums = self.column_sums();
        for (_, vals) in &mut self.rows {
            for (v, s) in vals.iter_mut().zip(sums.iter()) {
                *v -= s / k;
            }
        }
    }
}

/// Kernel-local diagnostics at the conditioning point.
#[derive(Debug, Clone)]
pub struct LocalDiagnostics {
    /// Kernel-weighted treated share at `x0`.
    pub local_propensity: f64,
    /// Kernel mass carried by the treated arm.
    pub effective_n1: f64,
    /// Kernel mass carried by the control arm.
    pub effective_n0: f64,
    /// Set when `local_propensity` leaves `[trim, 1 - trim]`.
    pub trim_warning: bool,
}

/// Output of the point-identified (unconfounded) estimator.
#[derive(Debug, Clone)]
pub struct UnconfoundedFit {
    pub f1: CdfCurve,
    pub f0: CdfCurve,
    pub psi1: InfluenceTable,
    pub psi0: InfluenceTable,
    pub diag: LocalDiagnostics,
}

/// Output of the endogenous-treatment estimator: observed-arm CDFs plus the
/// pooled outcome CDF.
#[derive(Debug, Clone)]
pub struct EndogenousFit {
    pub f11: CdfCurve,
    pub f00: CdfCurve,
    pub fy: CdfCurve,
    pub psi11: InfluenceTable,
    pub psi00: InfluenceTable,
    pub psi_y: InfluenceTable,
    pub diag: LocalDiagnostics,
}

/// Output of the covariate-subset estimator. Raw (unclipped) curves are kept
/// for diagnostics; `f1`/`f0` are clipped into `[0, 1]` and monotone.
#[derive(Debug, Clone)]
pub struct SubsetFit {
    pub f1: CdfCurve,
    pub f0: CdfCurve,
    pub raw_f1: Vec<f64>,
    pub raw_f0: Vec<f64>,
    pub psi11: InfluenceTable,
    pub psi10: InfluenceTable,
    /// Rows with positive kernel weight whose fitted propensity left
    /// `[trim, 1 - trim]`.
    pub flagged_rows: usize,
}

/// Kernel weights `K((X_i - x0) / h)` for every observation.
fn kernel_weights(
    table: &ObservationTable,
    x0: &[f64],
    kernel: &KernelSpec,
    h: f64,
    columns: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let dim = columns.map_or(table.d_x(), <[usize]>::len);
    if kernel.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: kernel.dim(),
        });
    }
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::BandwidthRule(format!("bandwidth {h} must be positive")));
    }
    let mut u = vec![0.0; dim];
    let mut weights = Vec::with_capacity(table.n());
    for i in 0..table.n() {
        let row = table.x_row(i);
        match columns {
            None => {
                for (j, &x) in row.iter().enumerate() {
                    u[j] = (x - x0[j]) / h;
                }
            }
            Some(cols) => {
                for (j, &c) in cols.iter().enumerate() {
                    u[j] = (row[c] - x0[j]) / h;
                }
            }
        }
        weights.push(kernel.weight(&u)?);
    }
    Ok(weights)
}

/// Weighted CDF of `(y_i, v_i)` pairs on `grid`, normalized by `total`:
/// `F(y_j) = sum_i v_i 1(y_i <= y_j) / total`.
fn weighted_cdf(mut pairs: Vec<(f64, f64)>, total: f64, grid: &[f64]) -> Vec<f64> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values = Vec::with_capacity(grid.len());
    let mut cum = 0.0;
    let mut k = 0;
    for &g in grid {
        while k < pairs.len() && pairs[k].0 <= g {
            cum += pairs[k].1;
            k += 1;
        }
        values.push(cum / total);
    }
    values
}

/// Centered influence rows `(1(Y_i <= y) - F(y)) * v_i / total` for the
/// listed observations.
fn influence_rows(
    table: &ObservationTable,
    grid: &Arc<[f64]>,
    members: &[(usize, f64)], // (row index, numerator weight v_i)
    total: f64,
    curve: &[f64],
) -> Vec<(usize, Vec<f64>)> {
    let mut rows = Vec::with_capacity(members.len());
    for &(i, v) in members {
        let c = v / total;
        let yi = table.y()[i];
        let pos = grid.partition_point(|&g| g < yi);
        let mut vals = Vec::with_capacity(grid.len());
        for (j, f) in curve.iter().enumerate() {
            let ind = if j >= pos { 1.0 } else { 0.0 };
            vals.push((ind - f) * c);
        }
        rows.push((i, vals));
    }
    rows
}

fn diag_from_masses(w1: f64, w0: f64, trim: f64) -> LocalDiagnostics {
    let p = w1 / (w1 + w0);
    LocalDiagnostics {
        local_propensity: p,
        effective_n1: w1,
        effective_n0: w0,
        trim_warning: p < trim || p > 1.0 - trim,
    }
}

/// Arm-specific kernel CDF estimators under unconfoundedness, with their
/// influence tables and local diagnostics.
pub fn estimate_cdf_unconfounded(
    table: &ObservationTable,
    grids: &EvalGrids,
    kernel: &KernelSpec,
    h: f64,
    trim: f64,
) -> Result<UnconfoundedFit> {
    let weights = kernel_weights(table, &grids.x0, kernel, h, None)?;
    let grid = grids.y_grid.clone();

    let mut treated = Vec::new();
    let mut control = Vec::new();
    let (mut w1, mut w0) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if table.d()[i] == 1 {
            treated.push((i, w));
            w1 += w;
        } else {
            control.push((i, w));
            w0 += w;
        }
    }
    if w1 <= 0.0 {
        return Err(Error::EmptyLocalArm(1));
    }
    if w0 <= 0.0 {
        return Err(Error::EmptyLocalArm(0));
    }

    let f1_vals = weighted_cdf(
        treated.iter().map(|&(i, w)| (table.y()[i], w)).collect(),
        w1,
        &grid,
    );
    let f0_vals = weighted_cdf(
        control.iter().map(|&(i, w)| (table.y()[i], w)).collect(),
        w0,
        &grid,
    );
    let psi1 = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &treated, w1, &f1_vals),
    );
    let psi0 = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &control, w0, &f0_vals),
    );
    Ok(UnconfoundedFit {
        f1: CdfCurve::new(grid.clone(), f1_vals)?,
        f0: CdfCurve::new(grid, f0_vals)?,
        psi1,
        psi0,
        diag: diag_from_masses(w1, w0, trim),
    })
}

/// Observed-arm and pooled kernel CDF estimators for the endogenous
/// treatment case, with influence tables.
pub fn estimate_cdf_endogenous(
    table: &ObservationTable,
    grids: &EvalGrids,
    kernel: &KernelSpec,
    h: f64,
    trim: f64,
) -> Result<EndogenousFit> {
    let weights = kernel_weights(table, &grids.x0, kernel, h, None)?;
    let grid = grids.y_grid.clone();

    let mut treated = Vec::new();
    let mut control = Vec::new();
    let mut pooled = Vec::new();
    let (mut w1, mut w0) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        pooled.push((i, w));
        if table.d()[i] == 1 {
            treated.push((i, w));
            w1 += w;
        } else {
            control.push((i, w));
            w0 += w;
        }
    }
    if w1 <= 0.0 {
        return Err(Error::EmptyLocalArm(1));
    }
    if w0 <= 0.0 {
        return Err(Error::EmptyLocalArm(0));
    }
    let w_all = w1 + w0;

    let f11_vals = weighted_cdf(
        treated.iter().map(|&(i, w)| (table.y()[i], w)).collect(),
        w1,
        &grid,
    );
    let f00_vals = weighted_cdf(
        control.iter().map(|&(i, w)| (table.y()[i], w)).collect(),
        w0,
        &grid,
    );
    let fy_vals = weighted_cdf(
        pooled.iter().map(|&(i, w)| (table.y()[i], w)).collect(),
        w_all,
        &grid,
    );

    let psi11 = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &treated, w1, &f11_vals),
    );
    let psi00 = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &control, w0, &f00_vals),
    );
    let psi_y = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &pooled, w_all, &fy_vals),
    );

    Ok(EndogenousFit {
        f11: CdfCurve::new(grid.clone(), f11_vals)?,
        f00: CdfCurve::new(grid.clone(), f00_vals)?,
        fy: CdfCurve::new(grid, fy_vals)?,
        psi11,
        psi00,
        psi_y,
        diag: diag_from_masses(w1, w0, trim),
    })
}

/// Semiparametric estimator of the potential-outcome CDFs conditional on a
/// covariate subset `X1`, using inverse weighting by a fitted parametric
/// propensity. Output curves are clipped into `[0, 1]` and rearranged to
/// monotone; the raw curves are returned alongside. Influence tables are
/// centered so their columns sum to zero exactly.
pub fn estimate_cdf_subset(
    table: &ObservationTable,
    sub_grids: &EvalGrids,
    sub_index: &[usize],
    model: &PropensityModel,
    kernel: &KernelSpec,
    h1: f64,
    trim: f64,
) -> Result<SubsetFit> {
    if !model.is_fitted() {
        return Err(Error::UnfittedModel);
    }
    if sub_index.is_empty() {
        return Err(Error::InvalidParam("sub_index must be nonempty".into()));
    }
    for &c in sub_index {
        if c >= table.d_x() {
            return Err(Error::InvalidParam(format!(
                "sub_index column {c} out of range (d_x = {})",
                table.d_x()
            )));
        }
    }
    let mut dedup = sub_index.to_vec();
    dedup.sort_unstable();
    dedup.dedup();
    if dedup.len() != sub_index.len() {
        return Err(Error::InvalidParam("sub_index has duplicates".into()));
    }

    let weights = kernel_weights(table, &sub_grids.x0, kernel, h1, Some(sub_index))?;
    let grid = sub_grids.y_grid.clone();

    let mut total = 0.0;
    let mut treated = Vec::new(); // (i, D_i w_i / p_i)
    let mut control = Vec::new(); // (i, (1-D_i) w_i / (1 - p_i))
    let mut flagged = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        total += w;
        let p = model.predict(table.x_row(i));
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::PropensityOutOfRange(i));
        }
        if p < trim || p > 1.0 - trim {
            flagged += 1;
        }
        if table.d()[i] == 1 {
            treated.push((i, w / p));
        } else {
            control.push((i, w / (1.0 - p)));
        }
    }
    if total <= 0.0 {
        return Err(Error::ZeroKernelMass);
    }

    let raw_f1 = weighted_cdf(
        treated.iter().map(|&(i, v)| (table.y()[i], v)).collect(),
        total,
        &grid,
    );
    let raw_f0 = weighted_cdf(
        control.iter().map(|&(i, v)| (table.y()[i], v)).collect(),
        total,
        &grid,
    );

    let mut psi11 = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &treated, total, &raw_f1),
    );
    let mut psi10 = InfluenceTable::new(
        grid.clone(),
        table.n(),
        influence_rows(table, &grid, &control, total, &raw_f0),
    );
    psi11.center_columns();
    psi10.center_columns();

    Ok(SubsetFit {
        f1: CdfCurve::rearranged(grid.clone(), raw_f1.clone()),
        f0: CdfCurve::rearranged(grid, raw_f0.clone()),
        raw_f1,
        raw_f0,
        psi11,
        psi10,
        flagged_rows: flagged,
    })
}
