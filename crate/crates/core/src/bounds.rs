//! Marginal-CDF bounds under the identification regimes and the
//! distribution-of-differences bound curves built from them, including the
//! objective surfaces and epsilon-argmax sets needed for inference.

use crate::curve::CdfCurve;
use crate::data::EvalGrids;
use crate::error::{Error, Result};
use crate::stats::fmt10;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// Identification regimes for the marginal conditional distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Unconfoundedness: both marginals point identified.
    PointId,
    /// Worst-case bounds from the observed arms.
    Manski,
    /// Dominance across treatment-selection groups.
    Fsd1,
    /// Dominance between potential outcomes within a group.
    Fsd2,
    /// Both dominance assumptions combined.
    FsdBoth,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "point_id" => Ok(Regime::PointId),
            "manski" => Ok(Regime::Manski),
            "fsd1" => Ok(Regime::Fsd1),
            "fsd2" => Ok(Regime::Fsd2),
            "fsd_both" => Ok(Regime::FsdBoth),
            other => Err(Error::UnsupportedRegime(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PointId => "point_id",
            Regime::Manski => "manski",
            Regime::Fsd1 => "fsd1",
            Regime::Fsd2 => "fsd2",
            Regime::FsdBoth => "fsd_both",
        }
    }
}

/// Estimated curves feeding a regime's marginal bounds.
pub enum MarginalInputs<'a> {
    /// Point identification: the two arm CDFs.
    PointId { f1: &'a CdfCurve, f0: &'a CdfCurve },
    /// Endogenous treatment: observed-arm CDFs, the pooled CDF, and the
    /// local propensity at the conditioning point.
    Endogenous {
        f11: &'a CdfCurve,
        f00: &'a CdfCurve,
        fy: &'a CdfCurve,
        p_hat: f64,
    },
}

/// The four marginal bound curves `(lb1, ub1, lb0, ub0)` for a regime.
#[derive(Debug, Clone)]
pub struct MarginalBounds {
    pub lb1: CdfCurve,
    pub ub1: CdfCurve,
    pub lb0: CdfCurve,
    pub ub0: CdfCurve,
    pub regime: Regime,
    /// Grid points where estimation noise produced `lb > ub` and the lower
    /// curve was pulled down to the upper one.
    pub crossing_clips: usize,
}

impl MarginalBounds {
    /// Enforces `lb <= ub` pointwise by `lb <- min(lb, ub)`. The diagnostic
    /// counter records crossings beyond roundoff (1e-12); sub-ulp artifacts
    /// of the affine curve arithmetic are clipped silently.
    fn clip_crossings(mut self) -> Self {
        let mut clips = 0usize;
        let mut any = false;
        for (lb, ub) in [(&self.lb1, &self.ub1), (&self.lb0, &self.ub0)] {
            for (l, u) in lb.values().iter().zip(ub.values().iter()) {
                if l > u {
                    any = true;
                    if l - u > 1e-12 {
                        clips += 1;
                    }
                }
            }
        }
        if any {
            self.lb1 = self.lb1.pointwise_min(&self.ub1);
            self.lb0 = self.lb0.pointwise_min(&self.ub0);
        }
        self.crossing_clips = clips;
        self
    }
}

/// Assembles the marginal bound curves for a regime from estimated inputs.
pub fn assemble_marginal_bounds(regime: Regime, inputs: &MarginalInputs) -> Result<MarginalBounds> {
    let mb = match (regime, inputs) {
        (Regime::PointId, MarginalInputs::PointId { f1, f0 }) => MarginalBounds {
            lb1: (*f1).clone(),
            ub1: (*f1).clone(),
            lb0: (*f0).clone(),
            ub0: (*f0).clone(),
            regime,
            crossing_clips: 0,
        },
        (Regime::PointId, _) => {
            return Err(Error::MissingInputCurve {
                regime: regime.as_str().into(),
                what: "needs the point-identified pair (F1, F0)".into(),
            })
        }
        (_, MarginalInputs::PointId { .. }) => {
            return Err(Error::MissingInputCurve {
                regime: regime.as_str().into(),
                what: "needs observed-arm curves, the pooled curve, and the local propensity"
                    .into(),
            })
        }
        (_, MarginalInputs::Endogenous { f11, f00, fy, p_hat }) => {
            let p = *p_hat;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParam(format!(
                    "local propensity {p} outside (0,1)"
                )));
            }
            let q = 1.0 - p;
            match regime {
                Regime::Manski => MarginalBounds {
                    lb1: f11.affine(p, 0.0)?,
                    ub1: f11.affine(p, q)?,
                    lb0: f00.affine(q, 0.0)?,
                    ub0: f00.affine(q, p)?,
                    regime,
                    crossing_clips: 0,
                },
                Regime::Fsd1 => MarginalBounds {
                    lb1: (*f11).clone(),
                    ub1: f11.affine(p, q)?,
                    lb0: f00.affine(q, 0.0)?,
                    ub0: (*f00).clone(),
                    regime,
                    crossing_clips: 0,
                },
                Regime::Fsd2 => MarginalBounds {
                    lb1: f11.affine(p, 0.0)?,
                    ub1: (*fy).clone(),
                    lb0: (*fy).clone(),
                    ub0: f00.affine(q, p)?,
                    regime,
                    crossing_clips: 0,
                },
                Regime::FsdBoth => MarginalBounds {
                    lb1: (*f11).clone(),
                    ub1: (*fy).clone(),
                    lb0: (*fy).clone(),
                    ub0: (*f00).clone(),
                    regime,
                    crossing_clips: 0,
                },
                Regime::PointId => unreachable!(),
            }
        }
    };
    Ok(mb.clip_crossings())
}

/// A `(delta, y)` objective surface: the lower surface is
/// `lb1(y) - ub0(y - delta)`, the upper surface `ub1(y) - lb0(y - delta)`,
/// with the curve at `y - delta` linearly interpolated under the extension
/// rule. Row `d` holds the values for `delta_grid[d]` across the outcome
/// grid.
#[derive(Debug, Clone)]
pub struct ObjectiveSurface {
    values: Vec<f64>,
    m_delta: usize,
    m_y: usize,
}

impl ObjectiveSurface {
    fn build(first: &CdfCurve, second: &CdfCurve, grids: &EvalGrids) -> Self {
        let m_delta = grids.delta_grid.len();
        let m_y = grids.y_grid.len();
        let mut values = Vec::with_capacity(m_delta * m_y);
        for &delta in grids.delta_grid.iter() {
            for (j, &y) in grids.y_grid.iter().enumerate() {
                values.push(first.values()[j] - second.eval(y - delta));
            }
        }
        Self {
            values,
            m_delta,
            m_y,
        }
    }

    pub fn m_delta(&self) -> usize {
        self.m_delta
    }

    pub fn m_y(&self) -> usize {
        self.m_y
    }

    /// Row of the surface at delta index `d`.
    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.m_y..(d + 1) * self.m_y]
    }

    pub fn value(&self, d: usize, j: usize) -> f64 {
        self.values[d * self.m_y + j]
    }
}

/// Bound curves over the treatment-effect grid together with the
/// epsilon-argmax index sets used by the directional-derivative estimators.
#[derive(Debug, Clone)]
pub struct BoundsCurve {
    pub delta_grid: Arc<[f64]>,
    /// `max(sup_y lower surface, 0)` per delta.
    pub lower: Vec<f64>,
    /// `min(inf_y upper surface, 0) + 1` per delta.
    pub upper: Vec<f64>,
    /// Unclipped `sup_y` of the lower surface.
    pub raw_sup: Vec<f64>,
    /// Unclipped `inf_y` of the upper surface.
    pub raw_inf: Vec<f64>,
    /// Indices `j` with `lower_surface(d, j) >= rowmax - a_n`.
    pub argsup_sets: Vec<Vec<usize>>,
    /// Indices `j` with `upper_surface(d, j) <= rowmin + a_n`.
    pub arginf_sets: Vec<Vec<usize>>,
    pub a_n: f64,
}

/// Bound curves plus the retained objective surfaces.
#[derive(Debug, Clone)]
pub struct MakarovOutput {
    pub curve: BoundsCurve,
    pub lower_surface: ObjectiveSurface,
    pub upper_surface: ObjectiveSurface,
}

impl MakarovOutput {
    /// Rebuilds the bound curve for a different tuning value without
    /// recomputing the surfaces.
    pub fn with_a_n(&self, grids: &EvalGrids, a_n: f64) -> Result<BoundsCurve> {
        curve_from_surfaces(&self.lower_surface, &self.upper_surface, grids, a_n)
    }
}

fn check_grids(mb: &MarginalBounds, grids: &EvalGrids) -> Result<()> {
    let g = &grids.y_grid;
    for c in [&mb.lb1, &mb.ub1, &mb.lb0, &mb.ub0] {
        let same = Arc::ptr_eq(c.grid(), g) || c.grid()[..] == g[..];
        if !same {
            return Err(Error::GridMismatch(
                "marginal bound curves are not on the evaluation grid".into(),
            ));
        }
    }
    Ok(())
}

fn curve_from_surfaces(
    lower_surface: &ObjectiveSurface,
    upper_surface: &ObjectiveSurface,
    grids: &EvalGrids,
    a_n: f64,
) -> Result<BoundsCurve> {
    if !(a_n.is_finite() && a_n > 0.0) {
        return Err(Error::Tuning(format!("a_n = {a_n} must be positive")));
    }
    let m_delta = grids.delta_grid.len();
    let mut lower = Vec::with_capacity(m_delta);
    let mut upper = Vec::with_capacity(m_delta);
    let mut raw_sup = Vec::with_capacity(m_delta);
    let mut raw_inf = Vec::with_capacity(m_delta);
    let mut argsup_sets = Vec::with_capacity(m_delta);
    let mut arginf_sets = Vec::with_capacity(m_delta);

    for d in 0..m_delta {
        let lo_row = lower_surface.row(d);
        let hi_row = upper_surface.row(d);
        let rowmax = lo_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rowmin = hi_row.iter().cloned().fold(f64::INFINITY, f64::min);
        raw_sup.push(rowmax);
        raw_inf.push(rowmin);
        lower.push(rowmax.max(0.0));
        upper.push(rowmin.min(0.0) + 1.0);
        argsup_sets.push(
            lo_row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= rowmax - a_n)
                .map(|(j, _)| j)
                .collect(),
        );
        arginf_sets.push(
            hi_row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v <= rowmin + a_n)
                .map(|(j, _)| j)
                .collect(),
        );
    }

    Ok(BoundsCurve {
        delta_grid: grids.delta_grid.clone(),
        lower,
        upper,
        raw_sup,
        raw_inf,
        argsup_sets,
        arginf_sets,
        a_n,
    })
}

/// Computes the lower and upper bound curves on the treatment-effect grid
/// from marginal bounds, retaining objective surfaces and epsilon-argmax
/// sets with tolerance `a_n`.
pub fn makarov_bounds(
    mb: &MarginalBounds,
    grids: &EvalGrids,
    a_n: f64,
) -> Result<MakarovOutput> {
    check_grids(mb, grids)?;
    let lower_surface = ObjectiveSurface::build(&mb.lb1, &mb.ub0, grids);
    let upper_surface = ObjectiveSurface::build(&mb.ub1, &mb.lb0, grids);
    let curve = curve_from_surfaces(&lower_surface, &upper_surface, grids, a_n)?;
    Ok(MakarovOutput {
        curve,
        lower_surface,
        upper_surface,
    })
}

/// Single-point evaluation of the bound pair at an arbitrary `delta`,
/// identical to the corresponding grid entry when `delta` lies on the grid.
pub fn makarov_distribution_at(mb: &MarginalBounds, grids: &EvalGrids, delta: f64) -> (f64, f64) {
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for (j, &y) in grids.y_grid.iter().enumerate() {
        let lo = mb.lb1.values()[j] - mb.ub0.eval(y - delta);
        let hi = mb.ub1.values()[j] - mb.lb0.eval(y - delta);
        sup = sup.max(lo);
        inf = inf.min(hi);
    }
    (sup.max(0.0), inf.min(0.0) + 1.0)
}

/// Writes a bound curve as CSV with columns `delta,lower,upper` at 10
/// significant digits.
pub fn write_bounds_csv<W: Write>(bc: &BoundsCurve, mut w: W) -> Result<()> {
    writeln!(w, "delta,lower,upper")?;
    for (d, &delta) in bc.delta_grid.iter().enumerate() {
        writeln!(
            w,
            "{},{},{}",
            fmt10(delta),
            fmt10(bc.lower[d]),
            fmt10(bc.upper[d])
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ArgmaxSetsOut<'a> {
    a_n: f64,
    argsup_sets: &'a [Vec<usize>],
    arginf_sets: &'a [Vec<usize>],
}

/// Sidecar JSON with the epsilon-argmax index sets per delta.
pub fn argmax_sets_json(bc: &BoundsCurve) -> serde_json::Value {
    serde_json::to_value(ArgmaxSetsOut {
        a_n: bc.a_n,
        argsup_sets: &bc.argsup_sets,
        arginf_sets: &bc.arginf_sets,
    })
    .expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;

    fn const_curve(grid: &Arc<[f64]>, v: f64) -> CdfCurve {
        CdfCurve::new(grid.clone(), vec![v; grid.len()]).unwrap()
    }

    fn grids_unit() -> (Arc<[f64]>, EvalGrids) {
        let y: Arc<[f64]> = Arc::from(vec![-1.0, 0.0, 1.0].into_boxed_slice());
        let g = EvalGrids {
            y_grid: y.clone(),
            delta_grid: Arc::from(vec![-1.0, 0.0, 1.0].into_boxed_slice()),
            x0: vec![0.0],
        };
        (y, g)
    }

    #[test]
    fn regime_arithmetic_at_a_point() {
        let (y, _) = grids_unit();
        let f11 = const_curve(&y, 0.4);
        let f00 = const_curve(&y, 0.6);
        let fy = const_curve(&y, 0.5); // = 0.4 * 0.5 + 0.6 * 0.5
        let inputs = MarginalInputs::Endogenous {
            f11: &f11,
            f00: &f00,
            fy: &fy,
            p_hat: 0.5,
        };

        let manski = assemble_marginal_bounds(Regime::Manski, &inputs).unwrap();
        assert!((manski.lb1.values()[0] - 0.2).abs() < 1e-15);
        assert!((manski.ub1.values()[0] - 0.7).abs() < 1e-15);
        assert!((manski.lb0.values()[0] - 0.3).abs() < 1e-15);
        assert!((manski.ub0.values()[0] - 0.8).abs() < 1e-15);

        let fsd1 = assemble_marginal_bounds(Regime::Fsd1, &inputs).unwrap();
        assert!((fsd1.lb1.values()[0] - 0.4).abs() < 1e-15);
        assert!((fsd1.ub1.values()[0] - 0.7).abs() < 1e-15);
        assert!((fsd1.lb0.values()[0] - 0.3).abs() < 1e-15);
        assert!((fsd1.ub0.values()[0] - 0.6).abs() < 1e-15);

        let both = assemble_marginal_bounds(Regime::FsdBoth, &inputs).unwrap();
        assert!((both.lb1.values()[0] - 0.4).abs() < 1e-15);
        assert!((both.ub1.values()[0] - 0.5).abs() < 1e-15);
        assert!((both.lb0.values()[0] - 0.5).abs() < 1e-15);
        assert!((both.ub0.values()[0] - 0.6).abs() < 1e-15);
        assert_eq!(both.ub1.values(), both.lb0.values());

        let fsd2 = assemble_marginal_bounds(Regime::Fsd2, &inputs).unwrap();
        assert!((fsd2.lb1.values()[0] - 0.2).abs() < 1e-15);
        assert!((fsd2.ub1.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regime_input_mismatch_is_error() {
        let (y, _) = grids_unit();
        let f = const_curve(&y, 0.4);
        let err = assemble_marginal_bounds(
            Regime::Manski,
            &MarginalInputs::PointId { f1: &f, f0: &f },
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingInputCurve { .. }));
    }

    fn normal_grids(m_y: usize, m_delta: usize, y_span: f64, d_span: f64) -> EvalGrids {
        let lin = |lo: f64, hi: f64, m: usize| -> Arc<[f64]> {
            Arc::from(
                (0..m)
                    .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
                    .collect::<Vec<_>>()
                    .into_boxed_slice(),
            )
        };
        EvalGrids {
            y_grid: lin(-y_span, y_span, m_y),
            delta_grid: lin(-d_span, d_span, m_delta),
            x0: vec![0.0],
        }
    }

    fn std_normal_marginals(grids: &EvalGrids) -> MarginalBounds {
        let vals: Vec<f64> = grids.y_grid.iter().map(|&y| normal_cdf(y)).collect();
        let f = CdfCurve::new(grids.y_grid.clone(), vals).unwrap();
        assemble_marginal_bounds(
            Regime::PointId,
            &MarginalInputs::PointId { f1: &f, f0: &f },
        )
        .unwrap()
    }

    #[test]
    fn normal_lower_bound_closed_form() {
        let grids = normal_grids(801, 5, 6.0, 4.0);
        let mb = std_normal_marginals(&grids);
        let out = makarov_bounds(&mb, &grids, 0.05).unwrap();
        // delta = 2 sits at index 3 of (-4, -2, 0, 2, 4).
        let expect = 2.0 * normal_cdf(1.0) - 1.0;
        assert!(
            (out.curve.lower[3] - expect).abs() < 1e-3,
            "{} vs {expect}",
            out.curve.lower[3]
        );
        // Identical marginals at delta = 0: lower exactly 0, upper exactly 1.
        assert_eq!(out.curve.lower[2], 0.0);
        assert_eq!(out.curve.upper[2], 1.0);
    }

    #[test]
    fn single_point_evaluation_matches_grid_and_tails() {
        let grids = normal_grids(801, 9, 6.0, 4.0);
        let mb = std_normal_marginals(&grids);
        let out = makarov_bounds(&mb, &grids, 0.05).unwrap();
        for (d, &delta) in grids.delta_grid.iter().enumerate() {
            let (lo, hi) = makarov_distribution_at(&mb, &grids, delta);
            assert!((lo - out.curve.lower[d]).abs() < 1e-14);
            assert!((hi - out.curve.upper[d]).abs() < 1e-14);
        }
        // Upper bound at delta = -2 for standard normal marginals: 2 Phi(-1).
        let (_, hi) = makarov_distribution_at(&mb, &grids, -2.0);
        assert!((hi - 2.0 * normal_cdf(-1.0)).abs() < 1e-3, "hi = {hi}");
        // Far outside the joint support the pair degenerates, up to the mass
        // the grid leaves in the tails.
        let (lo_far, hi_far) = makarov_distribution_at(&mb, &grids, -50.0);
        let edge = normal_cdf(-6.0);
        assert!(lo_far <= edge && hi_far <= 2.0 * edge + 1e-12);
        let (lo_hi, hi_hi) = makarov_distribution_at(&mb, &grids, 50.0);
        assert!(lo_hi >= 1.0 - 2.0 * edge - 1e-12 && hi_hi == 1.0);
    }

    #[test]
    fn matches_exhaustive_scan_oracle() {
        // Random valid marginal bounds and random deltas against a direct
        // re-evaluation of the defining max/min.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let m_y = 17;
            let y: Arc<[f64]> = Arc::from(
                (0..m_y)
                    .map(|i| -2.0 + 4.0 * i as f64 / (m_y - 1) as f64)
                    .collect::<Vec<_>>()
                    .into_boxed_slice(),
            );
            let mut mk_curve = |cap: f64| {
                let mut v: Vec<f64> = (0..m_y).map(|_| rng.random::<f64>() * cap).collect();
                v.sort_by(f64::total_cmp);
                CdfCurve::new(y.clone(), v).unwrap()
            };
            let lb1 = mk_curve(0.8);
            let ub1 = CdfCurve::new(
                y.clone(),
                lb1.values().iter().map(|v| v + 0.2).collect(),
            )
            .unwrap();
            let lb0 = mk_curve(0.7);
            let ub0 = CdfCurve::new(
                y.clone(),
                lb0.values().iter().map(|v| v + 0.3).collect(),
            )
            .unwrap();
            let mb = MarginalBounds {
                lb1,
                ub1,
                lb0,
                ub0,
                regime: Regime::Manski,
                crossing_clips: 0,
            };
            let delta = rng.random::<f64>() * 6.0 - 3.0;
            let grids = EvalGrids {
                y_grid: y.clone(),
                delta_grid: Arc::from(vec![delta, delta + 0.5, delta + 1.0].into_boxed_slice()),
                x0: vec![0.0],
            };
            let out = makarov_bounds(&mb, &grids, 0.01).unwrap();

            // Oracle: direct scan with its own interpolation.
            let interp = |c: &CdfCurve, t: f64| -> f64 {
                let g = &y;
                if t < g[0] {
                    return 0.0;
                }
                if t > g[m_y - 1] {
                    return 1.0;
                }
                let mut j = 0;
                while g[j + 1] < t {
                    j += 1;
                }
                let w = (t - g[j]) / (g[j + 1] - g[j]);
                c.values()[j] * (1.0 - w) + c.values()[j + 1] * w
            };
            let mut sup = f64::NEG_INFINITY;
            let mut inf = f64::INFINITY;
            for (j, &gy) in y.iter().enumerate() {
                sup = sup.max(mb.lb1.values()[j] - interp(&mb.ub0, gy - delta));
                inf = inf.min(mb.ub1.values()[j] - interp(&mb.lb0, gy - delta));
            }
            assert!((out.curve.lower[0] - sup.max(0.0)).abs() < 1e-12);
            assert!((out.curve.upper[0] - (inf.min(0.0) + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_sets_nonempty_and_within_tolerance() {
        let grids = normal_grids(101, 21, 4.0, 3.0);
        let mb = std_normal_marginals(&grids);
        let out = makarov_bounds(&mb, &grids, 0.02).unwrap();
        for d in 0..grids.delta_grid.len() {
            assert!(!out.curve.argsup_sets[d].is_empty());
            assert!(!out.curve.arginf_sets[d].is_empty());
            let rowmax = out.curve.raw_sup[d];
            for &j in &out.curve.argsup_sets[d] {
                assert!(out.lower_surface.value(d, j) >= rowmax - 0.02 - 1e-15);
            }
        }
    }

    #[test]
    fn surface_entries_bounded() {
        let grids = normal_grids(101, 21, 4.0, 3.0);
        let mb = std_normal_marginals(&grids);
        let out = makarov_bounds(&mb, &grids, 0.02).unwrap();
        for d in 0..grids.delta_grid.len() {
            for j in 0..grids.y_grid.len() {
                let v = out.lower_surface.value(d, j);
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn csv_layout() {
        let grids = normal_grids(51, 5, 4.0, 2.0);
        let mb = std_normal_marginals(&grids);
        let out = makarov_bounds(&mb, &grids, 0.05).unwrap();
        let mut buf = Vec::new();
        write_bounds_csv(&out.curve, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "delta,lower,upper");
        assert_eq!(lines.count(), 5);
    }
}
