//! Kernel functions, product kernels, bandwidth rules, and the tuning
//! sequence used by the directional-derivative estimators.

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::stats::sample_sd;
use serde::{Deserialize, Serialize};

/// Univariate kernel families. All are nonnegative, bounded, symmetric,
/// integrate to one, and have compact support `[-1, 1]`, which is what keeps
/// the smoothed CDF estimates monotone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Epanechnikov,
    Biweight,
    Triweight,
}

impl KernelFamily {
    /// Univariate kernel value at `u`.
    pub fn k(self, u: f64) -> f64 {
        let a = u.abs();
        if a >= 1.0 {
            return 0.0;
        }
        let t = 1.0 - u * u;
        match self {
            KernelFamily::Epanechnikov => 0.75 * t,
            KernelFamily::Biweight => 15.0 / 16.0 * t * t,
            KernelFamily::Triweight => 35.0 / 32.0 * t * t * t,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "biweight" => Ok(KernelFamily::Biweight),
            "triweight" => Ok(KernelFamily::Triweight),
            other => Err(Error::InvalidKernel(format!("unknown family `{other}`"))),
        }
    }
}

/// A `d_x`-dimensional product kernel. Construction verifies the moment
/// conditions of the univariate member numerically.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    second_moment: f64,
}

/// Simpson-rule nodes used for the construction-time quadrature check.
const QUAD_NODES: usize = 2000;

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidKernel("kernel dimension must be positive".into()));
        }
        // Quadrature check on [-1, 1]: mass one, zero first moment, finite
        // positive second moment, nonnegativity.
        let h = 2.0 / QUAD_NODES as f64;
        let mut mass = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..=QUAD_NODES {
            let u = -1.0 + i as f64 * h;
            let w = if i == 0 || i == QUAD_NODES {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let k = family.k(u);
            if k < 0.0 {
                return Err(Error::InvalidKernel("kernel takes negative values".into()));
            }
            mass += w * k;
            m1 += w * u * k;
            m2 += w * u * u * k;
        }
        mass *= h / 3.0;
        m1 *= h / 3.0;
        m2 *= h / 3.0;
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidKernel(format!(
                "kernel mass {mass} differs from 1 beyond tolerance"
            )));
        }
        if m1.abs() > 1e-6 {
            return Err(Error::InvalidKernel(format!(
                "kernel first moment {m1} is not zero"
            )));
        }
        if !(m2.is_finite() && m2 > 0.0) {
            return Err(Error::InvalidKernel("kernel second moment invalid".into()));
        }
        Ok(Self {
            family,
            dim,
            second_moment: m2,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Second moment of the univariate member, from the construction-time
    /// quadrature.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Product-kernel weight at a `d_x`-dimensional point.
    pub fn weight(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        let mut w = 1.0;
        for &v in u {
            w *= self.family.k(v);
            if w == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(w)
    }
}

/// Bandwidth selection rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// `1.06 * sd(X) * n^(-1/6)`; requires a single covariate.
    McRule,
    /// `1.06 * n^(-1/(5 + d_x))`.
    AppRule,
    /// A fixed bandwidth supplied by the caller.
    Manual(f64),
}

/// Computes the bandwidth for a sample under the chosen rule.
pub fn bandwidth(rule: BandwidthRule, table: &ObservationTable) -> Result<f64> {
    let cols: Vec<usize> = (0..table.d_x()).collect();
    bandwidth_cols(rule, table, &cols)
}

/// Bandwidth over a subset of the covariate columns; used when smoothing is
/// over a covariate subset with its own bandwidth.
pub fn bandwidth_cols(rule: BandwidthRule, table: &ObservationTable, cols: &[usize]) -> Result<f64> {
    if cols.is_empty() || cols.iter().any(|&c| c >= table.d_x()) {
        return Err(Error::BandwidthRule("invalid column subset".into()));
    }
    let n = table.n() as f64;
    let h = match rule {
        BandwidthRule::McRule => {
            if cols.len() != 1 {
                return Err(Error::BandwidthRule(
                    "mc_rule requires a single covariate".into(),
                ));
            }
            let sd = sample_sd(&table.x_col(cols[0]));
            1.06 * sd * n.powf(-1.0 / 6.0)
        }
        BandwidthRule::AppRule => 1.06 * n.powf(-1.0 / (5.0 + cols.len() as f64)),
        BandwidthRule::Manual(h) => h,
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::BandwidthRule(format!("produced bandwidth {h} <= 0")));
    }
    Ok(h)
}

/// Rate families for the tuning sequence `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningRate {
    /// `c * log(log(n h^dx)) / sqrt(n h^dx)`
    LogLog,
    /// `c * sqrt(log(n h^dx)) / sqrt(n h^dx)`
    SqrtLog,
    /// `c * (n h^dx)^(1/6) / sqrt(n h^dx)`
    Power16,
}

impl TuningRate {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "loglog" => Ok(TuningRate::LogLog),
            "sqrtlog" => Ok(TuningRate::SqrtLog),
            "power16" => Ok(TuningRate::Power16),
            other => Err(Error::Tuning(format!("unknown rate `{other}`"))),
        }
    }
}

/// A tuning sequence `a_n` with positive scale `c`. Every rate family
/// satisfies `a_n -> 0` with `a_n * sqrt(n h^dx) -> infinity`.
#[derive(Debug, Clone, Copy)]
pub struct TuningSequence {
    pub rate: TuningRate,
    pub c: f64,
}

impl TuningSequence {
    pub fn new(rate: TuningRate, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Tuning(format!("scale c = {c} must be positive")));
        }
        Ok(Self { rate, c })
    }

    /// Evaluates `a_n` at sample size `n` and bandwidth `h` in dimension `d_x`.
    pub fn a_n(&self, n: usize, h: f64, d_x: usize) -> Result<f64> {
        let nh = n as f64 * h.powi(d_x as i32);
        let a = match self.rate {
            TuningRate::LogLog => {
                if nh <= std::f64::consts::E {
                    return Err(Error::Tuning(format!(
                        "n * h^dx = {nh} must exceed e for the loglog rate"
                    )));
                }
                self.c * nh.ln().ln() / nh.sqrt()
            }
            TuningRate::SqrtLog => {
                if nh <= 1.0 {
                    return Err(Error::Tuning(format!(
                        "n * h^dx = {nh} must exceed 1 for the sqrtlog rate"
                    )));
                }
                self.c * nh.ln().sqrt() / nh.sqrt()
            }
            TuningRate::Power16 => {
                if nh <= 0.0 {
                    return Err(Error::Tuning("n * h^dx must be positive".into()));
                }
                self.c * nh.powf(1.0 / 6.0) / nh.sqrt()
            }
        };
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Tuning(format!("produced a_n = {a} <= 0")));
        }
        Ok(a)
    }
}
