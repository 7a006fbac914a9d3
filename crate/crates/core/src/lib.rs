//! Estimation of bounds on the conditional distribution of treatment effects,
//! with uniformly valid inference via a multiplier bootstrap.
//!
//! Given an observational sample `(Y_i, D_i, X_i)` with a binary treatment, the
//! library estimates, at a fixed conditioning point `x0`, lower and upper bound
//! curves for `Pr(Y1 - Y0 <= delta | X = x0)`. The marginal conditional
//! distributions of the potential outcomes are estimated by kernel smoothing and
//! combined into distribution-of-differences bounds. Depending on the assumed
//! identification regime the marginals are point identified (`point_id`),
//! worst-case (`manski`), or tightened by stochastic dominance restrictions
//! (`fsd1`, `fsd2`, `fsd_both`). A semiparametric variant conditions on a subset
//! of the covariates with a parametric (logit) propensity first step.
//!
//! Inference is by a multiplier bootstrap of the estimated influence functions
//! combined with estimated directional derivatives of the sup/inf functionals,
//! yielding uniform confidence bands, KS-type tests against a hypothesized bound
//! curve, and an L^p test for equality of bounds between two subgroups.
//!
//! The whole pipeline is deterministic given `(data, configuration, seed)`,
//! including under parallel execution.
//!
//! ```
//! use tebounds::*;
//!
//! // A toy sample: treated outcomes sit above control outcomes.
//! let n = 200;
//! let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64 * 1.5 + (i as f64 * 0.37).sin()).collect();
//! let d: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
//! let x: Vec<Vec<f64>> = (0..n).map(|i| vec![-1.0 + 2.0 * i as f64 / n as f64]).collect();
//! let table = ObservationTable::new(y, d, x)?;
//!
//! let grids = make_grids(&table, vec![0.0], 101, 51, 0.0)?;
//! let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 1)?;
//! let h = bandwidth(BandwidthRule::AppRule, &table)?;
//! let fit = estimate_cdf_unconfounded(&table, &grids, &kernel, h, DEFAULT_TRIM)?;
//!
//! let mb = assemble_marginal_bounds(
//!     Regime::PointId,
//!     &MarginalInputs::PointId { f1: &fit.f1, f0: &fit.f0 },
//! )?;
//! let a_n = TuningSequence::new(TuningRate::LogLog, 0.2)?.a_n(table.n(), h, 1)?;
//! let out = makarov_bounds(&mb, &grids, a_n)?;
//! assert!(out.curve.lower.iter().zip(&out.curve.upper).all(|(l, u)| l <= u));
//!
//! // Uniform confidence bands via the multiplier bootstrap.
//! let r_n = (table.n() as f64 * h).sqrt();
//! let cfg = BootstrapConfig::new(200, 0.05, 7)?;
//! let procs = simulate_processes(
//!     &ProcessTables::Unconfounded { psi1: &fit.psi1, psi0: &fit.psi0 },
//!     &cfg,
//!     r_n,
//!     0,
//! )?;
//! let band = confidence_bands(&out.curve, &grids, &procs, &cfg, r_n)?;
//! assert!(band.c_l >= 0.0 && band.c_u >= 0.0);
//! # Ok::<(), tebounds::Error>(())
//! ```

pub mod bounds;
pub mod cdf;
pub mod curve;
pub mod data;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod mc;
pub mod propensity;
pub mod stats;

pub use bounds::{
    assemble_marginal_bounds, makarov_bounds, makarov_distribution_at, BoundsCurve, MakarovOutput,
    MarginalBounds, MarginalInputs, ObjectiveSurface, Regime,
};
pub use cdf::{
    estimate_cdf_endogenous, estimate_cdf_subset, estimate_cdf_unconfounded, EndogenousFit,
    InfluenceTable, LocalDiagnostics, SubsetFit, UnconfoundedFit, DEFAULT_TRIM,
};
pub use curve::CdfCurve;
pub use data::{load_csv, make_grids, make_grids_custom, write_csv, ColumnMap, EvalGrids,
    IngestReport, ObservationTable};
pub use error::{Error, Result};
pub use inference::{
    confidence_bands, equality_test, hdd_lower, hdd_upper, ks_test, simulate_processes,
    BandResult, BootstrapConfig, BoundSide, ConfidenceBand, GroupInference, ProcessTables,
    SimulatedProcess, TestResult,
};
pub use kernel::{
    bandwidth, bandwidth_cols, BandwidthRule, KernelFamily, KernelSpec, TuningRate, TuningSequence,
};
pub use mc::{draw_sample, null_lower_curve, run_table1, DgpSpec, McReport, McSettings};
pub use propensity::{fit_propensity, PropensityModel};
