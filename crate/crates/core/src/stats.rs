//! Small numeric utilities shared across the crate: summary statistics,
//! the empirical quantile rule, trapezoid quadrature, the standard normal
//! CDF, and deterministic seed mixing.

use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::LazyLock;

static STD_NORMAL: LazyLock<Normal> = LazyLock::new(|| Normal::new(0.0, 1.0).unwrap());

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    STD_NORMAL.cdf(x)
}

/// Arithmetic mean. Empty input returns 0.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the n-1 denominator.
pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics:
/// at probability `p` the quantile sits at position `g = (m - 1) * p + 1`
/// (1-based) and is interpolated as
/// `x_(floor(g)) + frac(g) * (x_(ceil(g)) - x_(floor(g)))`.
///
/// `sorted` must be ascending and nonempty; `p` in `[0, 1]`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "probability out of range");
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let g = (m - 1) as f64 * p;
    let lo = g.floor() as usize;
    let fr = g - g.floor();
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] + fr * (sorted[lo + 1] - sorted[lo])
    }
}

/// Sorts a copy ascending (total order) and takes the type-7 quantile.
pub fn quantile_of(draws: &[f64], p: f64) -> f64 {
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_type7(&v, p)
}

/// Trapezoid-rule integral of `values` over `grid` (both same length,
/// grid strictly increasing).
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    assert_eq!(grid.len(), values.len());
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

/// `(integral of |values|^p)^(1/p)` by the trapezoid rule.
pub fn lp_norm_trapezoid(grid: &[f64], values: &[f64], p: f64) -> f64 {
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    trapezoid(grid, &powered).powf(1.0 / p)
}

/// One step of the splitmix64 generator; used to derive independent
/// sub-seeds from a base seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for item `index` under `base`.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Formats a value with 10 significant digits for result CSVs.
pub fn fmt10(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.9e}")
}
