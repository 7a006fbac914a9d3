//! Monotone CDF curves on a shared outcome grid, with the extension rule
//! used throughout: a curve evaluated left of its grid is 0, right of its
//! grid is 1, and linear interpolation applies between grid nodes.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Tolerance for floating-point monotonicity/range noise accepted (and then
/// normalized away) at construction.
const CURVE_SLACK: f64 = 1e-9;

/// A conditional CDF (or an affine bound on one) evaluated on a fixed
/// outcome grid. Outside the grid the curve takes its tail limits: 0 and 1
/// for an estimated CDF, and the correspondingly transformed values for
/// curves derived by affine maps, so that worst-case bound curves keep their
/// true limits (for example `(1-p) F + p` tends to `p` on the left, not 0).
#[derive(Debug, Clone)]
pub struct CdfCurve {
    grid: Arc<[f64]>,
    values: Vec<f64>,
    left_limit: f64,
    right_limit: f64,
}

impl CdfCurve {
    /// Builds a curve with tail limits 0 and 1, verifying that `values` is
    /// nondecreasing and within `[0, 1]` up to floating-point slack; tiny
    /// violations are normalized (clamped and made exactly nondecreasing),
    /// larger ones are rejected.
    pub fn new(grid: Arc<[f64]>, values: Vec<f64>) -> Result<Self> {
        Self::with_limits(grid, values, 0.0, 1.0)
    }

    /// Builds a curve with explicit tail limits.
    pub fn with_limits(
        grid: Arc<[f64]>,
        values: Vec<f64>,
        left_limit: f64,
        right_limit: f64,
    ) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch(format!(
                "curve has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if grid.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &v in &values {
            if !v.is_finite() || !(-CURVE_SLACK..=1.0 + CURVE_SLACK).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "CDF value {v} outside [0,1]"
                )));
            }
            if v < prev - CURVE_SLACK {
                return Err(Error::InvalidParam(format!(
                    "CDF values decrease: {prev} -> {v}"
                )));
            }
            prev = v;
        }
        if !(left_limit.is_finite() && right_limit.is_finite()) {
            return Err(Error::InvalidParam("non-finite tail limit".into()));
        }
        let mut curve = Self::rearranged(grid, values);
        // Tail limits must preserve monotonicity of the extended function.
        let lo = left_limit.clamp(0.0, curve.values[0]);
        let hi = right_limit.clamp(*curve.values.last().unwrap(), 1.0);
        curve.left_limit = lo;
        curve.right_limit = hi;
        Ok(curve)
    }

    /// Builds a curve from raw values by clamping into `[0, 1]` and applying
    /// a running-maximum rearrangement, with tail limits 0 and 1. No
    /// validation error is possible; used for estimators whose raw output can
    /// leave the CDF set.
    pub fn rearranged(grid: Arc<[f64]>, mut values: Vec<f64>) -> Self {
        let mut run = 0.0f64;
        for v in &mut values {
            let clamped = v.clamp(0.0, 1.0);
            run = run.max(clamped);
            *v = run;
        }
        Self {
            grid,
            values,
            left_limit: 0.0,
            right_limit: 1.0,
        }
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn left_limit(&self) -> f64 {
        self.left_limit
    }

    pub fn right_limit(&self) -> f64 {
        self.right_limit
    }

    /// Evaluates at an arbitrary point: tail limits outside the grid, linear
    /// interpolation between nodes.
    pub fn eval(&self, t: f64) -> f64 {
        interp_ext(&self.grid, &self.values, t, self.left_limit, self.right_limit)
    }

    /// Returns a new curve with values `a * v + b` on the same grid and the
    /// correspondingly transformed tail limits. The caller is responsible for
    /// `a >= 0` and `a + b <= 1` so the result is a valid bound curve;
    /// roundoff is normalized.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| a * v + b).collect();
        Self::with_limits(
            self.grid.clone(),
            values,
            a * self.left_limit + b,
            a * self.right_limit + b,
        )
    }

    /// Pointwise minimum with another curve on the same grid.
    pub fn pointwise_min(&self, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.min(*b))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            left_limit: self.left_limit.min(other.left_limit),
            right_limit: self.right_limit.min(other.right_limit),
        }
    }
}

/// Linear interpolation of `values` over `grid` at `t`, returning `left` left
/// of the grid and `right` right of it. `grid` must be strictly increasing.
pub fn interp_ext(grid: &[f64], values: &[f64], t: f64, left: f64, right: f64) -> f64 {
    let m = grid.len();
    if t < grid[0] {
        return left;
    }
    if t > grid[m - 1] {
        return right;
    }
    // First index with grid[idx] >= t; t is within [grid[0], grid[m-1]].
    let idx = grid.partition_point(|&g| g < t);
    if grid[idx] == t {
        return values[idx];
    }
    let (g0, g1) = (grid[idx - 1], grid[idx]);
    let w = (t - g0) / (g1 - g0);
    values[idx - 1] + w * (values[idx] - values[idx - 1])
}

/// Interpolation with zero extension on both sides; used for simulated
/// processes, which vanish outside the outcome grid.
pub fn interp_zero(grid: &[f64], values: &[f64], t: f64) -> f64 {
    interp_ext(grid, values, t, 0.0, 0.0)
}
