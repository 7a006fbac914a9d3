//! End-to-end integration tests over the public API: estimation through
//! bands and tests on synthetic data, identifying power of the dominance
//! regimes, grid refinement stability, and full-pipeline determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;
use tebounds::bounds::write_bounds_csv;
use tebounds::inference::write_band_csv;
use tebounds::stats::normal_cdf;
use tebounds::{
    assemble_marginal_bounds, confidence_bands, equality_test, estimate_cdf_endogenous,
    estimate_cdf_subset, estimate_cdf_unconfounded, fit_propensity, make_grids, makarov_bounds,
    simulate_processes, BootstrapConfig, CdfCurve, EvalGrids, GroupInference, KernelFamily,
    KernelSpec, MarginalInputs, ObservationTable, ProcessTables, Regime,
};

/// Endogenous selection with strong positive dependence between treatment
/// take-up and both potential outcomes.
fn endogenous_sample(n: usize, seed: u64) -> ObservationTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut x = Vec::new();
    for _ in 0..n {
        let xv = 2.0 * rng.random::<f64>() - 1.0;
        let taste: f64 = rng.sample(StandardNormal);
        let treat = taste + 0.5 * xv > 0.0;
        let noise: f64 = rng.sample(StandardNormal);
        // Savers (high taste) hold more assets either way; treatment adds a
        // further positive shift.
        let y0 = xv + 0.8 * taste + 0.5 * noise;
        let y1 = y0 + 1.5;
        y.push(if treat { y1 } else { y0 });
        d.push(u8::from(treat));
        x.push(vec![xv]);
    }
    ObservationTable::new(y, d, x).unwrap()
}

#[test]
fn dominance_assumptions_are_informative_where_manski_is_logical() {
    let table = endogenous_sample(2_000, 41);
    let grids = make_grids(&table, vec![0.0], 201, 101, 0.0).unwrap();
    let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
    let fit = estimate_cdf_endogenous(&table, &grids, &kernel, 0.4, 0.01).unwrap();
    let inputs = MarginalInputs::Endogenous {
        f11: &fit.f11,
        f00: &fit.f00,
        fy: &fit.fy,
        p_hat: fit.diag.local_propensity,
    };

    let manski = makarov_bounds(
        &assemble_marginal_bounds(Regime::Manski, &inputs).unwrap(),
        &grids,
        0.05,
    )
    .unwrap();
    // Worst-case marginals always produce the logical band.
    assert!(manski.curve.lower.iter().all(|&v| v == 0.0));
    assert!(manski.curve.upper.iter().all(|&v| v == 1.0));

    let both = makarov_bounds(
        &assemble_marginal_bounds(Regime::FsdBoth, &inputs).unwrap(),
        &grids,
        0.05,
    )
    .unwrap();
    // The dominance pair is informative somewhere on the grid.
    assert!(both.curve.lower.iter().any(|&v| v > 0.05));
    assert!(both.curve.upper.iter().any(|&v| v < 0.95));
}

#[test]
fn grid_refinement_moves_bounds_by_at_most_one_increment() {
    let coarse = 101usize;
    let fine = 201usize; // doubles the resolution over the same span
    let lin = |m: usize| -> Arc<[f64]> {
        Arc::from(
            (0..m)
                .map(|i| -5.0 + 10.0 * i as f64 / (m - 1) as f64)
                .collect::<Vec<_>>()
                .into_boxed_slice(),
        )
    };
    let deltas: Arc<[f64]> = Arc::from(
        (0..41)
            .map(|i| -3.0 + 6.0 * i as f64 / 40.0)
            .collect::<Vec<_>>()
            .into_boxed_slice(),
    );
    let mut results = Vec::new();
    let mut max_step = 0.0f64;
    for m in [coarse, fine] {
        let y = lin(m);
        let grids = EvalGrids {
            y_grid: y.clone(),
            delta_grid: deltas.clone(),
            x0: vec![0.0],
        };
        let f1 = CdfCurve::new(y.clone(), y.iter().map(|&v| normal_cdf(v - 0.3)).collect())
            .unwrap();
        let f0 = CdfCurve::new(y.clone(), y.iter().map(|&v| normal_cdf(v)).collect()).unwrap();
        if m == coarse {
            max_step = f1
                .values()
                .windows(2)
                .chain(f0.values().windows(2))
                .map(|w| w[1] - w[0])
                .fold(0.0, f64::max);
        }
        let mb = assemble_marginal_bounds(
            Regime::PointId,
            &MarginalInputs::PointId { f1: &f1, f0: &f0 },
        )
        .unwrap();
        results.push(makarov_bounds(&mb, &grids, 0.05).unwrap().curve);
    }
    for d in 0..deltas.len() {
        assert!((results[0].lower[d] - results[1].lower[d]).abs() <= max_step + 1e-12);
        assert!((results[0].upper[d] - results[1].upper[d]).abs() <= max_step + 1e-12);
    }
}

#[test]
fn full_pipeline_outputs_are_reproducible() {
    let run = || -> (Vec<u8>, Vec<u8>) {
        let table = endogenous_sample(600, 7);
        let grids = make_grids(&table, vec![0.1], 101, 51, 0.0).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        let h = 0.45;
        let fit = estimate_cdf_endogenous(&table, &grids, &kernel, h, 0.01).unwrap();
        let mb = assemble_marginal_bounds(
            Regime::FsdBoth,
            &MarginalInputs::Endogenous {
                f11: &fit.f11,
                f00: &fit.f00,
                fy: &fit.fy,
                p_hat: fit.diag.local_propensity,
            },
        )
        .unwrap();
        let out = makarov_bounds(&mb, &grids, 0.03).unwrap();
        let r_n = (table.n() as f64 * h).sqrt();
        let cfg = BootstrapConfig::new(300, 0.05, 2024).unwrap();
        let procs = simulate_processes(
            &ProcessTables::Endogenous {
                psi11: &fit.psi11,
                psi_y: &fit.psi_y,
                psi00: &fit.psi00,
            },
            &cfg,
            r_n,
            0,
        )
        .unwrap();
        let band = confidence_bands(&out.curve, &grids, &procs, &cfg, r_n).unwrap();
        let mut bounds_csv = Vec::new();
        write_bounds_csv(&out.curve, &mut bounds_csv).unwrap();
        let mut band_csv = Vec::new();
        write_band_csv(&out.curve, &band, &mut band_csv).unwrap();
        (bounds_csv, band_csv)
    };
    let (b1, c1) = run();
    let (b2, c2) = run();
    assert_eq!(b1, b2);
    assert_eq!(c1, c2);
}

#[test]
fn subset_pipeline_supports_bands() {
    // Two covariates; smoothing over the first only, with a fitted logit
    // propensity over both.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 800;
    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut x = Vec::new();
    for _ in 0..n {
        let x1 = 2.0 * rng.random::<f64>() - 1.0;
        let x2 = 2.0 * rng.random::<f64>() - 1.0;
        let v: f64 = rng.sample(StandardNormal);
        let treat = 0.3 * x1 - 0.4 * x2 + v > 0.0;
        let e1: f64 = rng.sample(StandardNormal);
        let e0: f64 = rng.sample(StandardNormal);
        let y1 = 1.0 + 0.5 * x1 + 0.2 * x2 + e1;
        let y0 = 0.3 * x1 - 0.1 * x2 + e0;
        y.push(if treat { y1 } else { y0 });
        d.push(u8::from(treat));
        x.push(vec![x1, x2]);
    }
    let table = ObservationTable::new(y, d, x).unwrap();
    let grids = make_grids(&table, vec![0.0], 101, 51, 0.0).unwrap();
    let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
    let model = fit_propensity(&table).unwrap();
    let fit = estimate_cdf_subset(&table, &grids, &[0], &model, &kernel, 0.4, 0.01).unwrap();

    for s in fit.psi11.column_sums() {
        assert!(s.abs() < 1e-10);
    }
    let mb = assemble_marginal_bounds(
        Regime::PointId,
        &MarginalInputs::PointId {
            f1: &fit.f1,
            f0: &fit.f0,
        },
    )
    .unwrap();
    let out = makarov_bounds(&mb, &grids, 0.05).unwrap();
    let r_n = (n as f64 * 0.4).sqrt();
    let cfg = BootstrapConfig::new(200, 0.1, 3).unwrap();
    let procs = simulate_processes(
        &ProcessTables::Subset {
            psi11: &fit.psi11,
            psi10: &fit.psi10,
        },
        &cfg,
        r_n,
        0,
    )
    .unwrap();
    let band = confidence_bands(&out.curve, &grids, &procs, &cfg, r_n).unwrap();
    assert!(band.c_l >= 0.0 && band.c_u >= 0.0);
    for d in 0..grids.delta_grid.len() {
        assert!(band.band_lower.lo[d] >= 0.0 && band.band_upper.hi[d] <= 1.0);
    }
}

#[test]
fn equality_test_detects_heterogeneous_groups_often_enough() {
    // Location-scale design with different slopes across arms: the lower
    // bound curves at the two covariate quantiles differ, so the test should
    // reject at least at its nominal rate.
    let reps = 30;
    let mut rejections = 0;
    for rep in 0..reps {
        let spec = tebounds::DgpSpec {
            mu1: 0.0,
            mu0: 0.0,
            beta1: 3.0,
            beta0: 0.5,
            phi1: 1.0,
            phi0: 1.0,
            gamma1: 0.5,
            gamma0: 0.4,
            alpha_sel: 1.0,
            n: 500,
        };
        let table = tebounds::draw_sample(&spec, 5_000 + rep).unwrap();
        let mut col = table.x_col(0);
        col.sort_by(f64::total_cmp);
        let x_a = tebounds::stats::quantile_type7(&col, 0.25);
        let x_b = tebounds::stats::quantile_type7(&col, 0.75);
        let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 1).unwrap();
        let h = tebounds::bandwidth(tebounds::BandwidthRule::McRule, &table).unwrap();
        let r_n = (table.n() as f64 * h).sqrt();
        let cfg = BootstrapConfig::new(200, 0.05, 10_000 + rep).unwrap();

        let run_group = |x0: f64, offset: u64| {
            let grids = make_grids(&table, vec![x0], 101, 51, 0.0).unwrap();
            let fit = estimate_cdf_unconfounded(&table, &grids, &kernel, h, 0.01).unwrap();
            let mb = assemble_marginal_bounds(
                Regime::PointId,
                &MarginalInputs::PointId {
                    f1: &fit.f1,
                    f0: &fit.f0,
                },
            )
            .unwrap();
            let out = makarov_bounds(&mb, &grids, 0.05).unwrap();
            let procs = simulate_processes(
                &ProcessTables::Unconfounded {
                    psi1: &fit.psi1,
                    psi0: &fit.psi0,
                },
                &cfg,
                r_n,
                offset,
            )
            .unwrap();
            (out.curve, grids, procs)
        };
        let (bc_a, g_a, p_a) = run_group(x_a, 0);
        let (bc_b, g_b, p_b) = run_group(x_b, 200);
        let res = equality_test(
            &GroupInference {
                bc: &bc_a,
                grids: &g_a,
                processes: &p_a,
            },
            &GroupInference {
                bc: &bc_b,
                grids: &g_b,
                processes: &p_b,
            },
            1.0,
            &cfg,
            r_n,
        )
        .unwrap();
        if res.reject {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!(rate >= 0.05, "rejection rate {rate} below nominal level");
}
