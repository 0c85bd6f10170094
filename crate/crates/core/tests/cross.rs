//! Cross-module checks: simulated quantities against their solved
//! deterministic limits, and the diagnostics that tie the pipeline together.

use num_complex::Complex64;
use tendefl_core::asymptotics::{
    simulated_first_init, simulated_init, solve_first, solve_second_gamma1, SolverConfig,
};
use tendefl_core::estimation::{estimate, EstimateInit, Observables};
use tendefl_core::pipeline::{
    deflate, improved_deflation, measure_alignments, ImprovedConfig,
};
use tendefl_core::rank_one::{power_iteration, PowerIterConfig};
use tendefl_core::spectral::{build_n, empirical_stieltjes, sym_eigenvalues, SpectrumSource};
use tendefl_core::stieltjes::r_semicircle;
use tendefl_core::tensor::{gen_spiked, SpikedModel};

#[test]
fn simulated_singular_value_tracks_asymptotic_limit() {
    let (b1, b2, al) = (20.0, 15.0, 0.8);
    let model = SpikedModel {
        p: 100,
        beta1: b1,
        beta2: b2,
        alpha: al,
        seed: 42,
    };
    let (t, _) = gen_spiked(&model).unwrap();
    let factor = power_iteration(&t, &PowerIterConfig::default()).unwrap();
    let init = simulated_first_init(b1, b2, al, 100, 43).unwrap();
    let sol = solve_first(b1, b2, al, &init, &SolverConfig::default()).unwrap();
    assert!(
        (factor.lambda - sol.lambda1).abs() < 0.1,
        "simulated {} vs asymptotic {}",
        factor.lambda,
        sol.lambda1
    );
}

#[test]
fn empirical_stieltjes_matches_semicircle_transform() {
    let model = SpikedModel {
        p: 200,
        beta1: 20.0,
        beta2: 15.0,
        alpha: 0.8,
        seed: 7,
    };
    let (t, truth) = gen_spiked(&model).unwrap();
    let factor = power_iteration(&t, &PowerIterConfig::default()).unwrap();
    let n_mat = build_n(&truth.noise, &factor.u, &factor.v, &factor.w).unwrap();
    let spec = sym_eigenvalues(&n_mat, SpectrumSource::N).unwrap();
    let z = Complex64::new(3.0, 0.0);
    let g = empirical_stieltjes(&spec, z).unwrap();
    let r = r_semicircle(z).unwrap();
    assert!(
        (g - r).norm() < 0.02,
        "empirical {} vs limit {}",
        g.re,
        r.re
    );
}

#[test]
fn mode_spread_small_for_converged_runs() {
    for seed in 0..3u64 {
        let model = SpikedModel {
            p: 150,
            beta1: 9.0,
            beta2: 6.0,
            alpha: 0.4,
            seed: 60 + seed,
        };
        let (t, truth) = gen_spiked(&model).unwrap();
        let run = deflate(&t, 1.0, Some(&truth), &PowerIterConfig::default()).unwrap();
        let al = run.truth_alignments.unwrap();
        assert!(al.mode_spread() <= 0.1, "spread {}", al.mode_spread());
    }
}

#[test]
fn alignment_estimates_track_simulation_across_correlation() {
    // estimates from the three observables vs directly measured alignments
    let (b1, b2, p) = (15.0, 5.0, 100);
    // near the recovery threshold (strong correlation) the power iteration
    // contracts slowly; give it room
    let power_cfg = PowerIterConfig {
        max_iter: 8000,
        ..Default::default()
    };
    for &alpha in &[0.0, 0.4, 0.7, 0.8] {
        let mut sim = [0.0f64; 4]; // rho11, rho12, rho21, rho22
        let mut est_acc = [0.0f64; 4];
        let seeds = 6u64;
        let mut valid = 0usize;
        for s in 0..seeds {
            let model = SpikedModel {
                p,
                beta1: b1,
                beta2: b2,
                alpha,
                seed: 300 + s,
            };
            let (t, truth) = gen_spiked(&model).unwrap();
            let run = deflate(&t, 1.0, Some(&truth), &power_cfg).unwrap();
            let al = run.truth_alignments.unwrap();
            let obs = Observables {
                lambda1_hat: run.factor1.lambda,
                lambda2_hat: run.factor2.lambda,
                eta_hat: run.eta.clamp(0.0, 1.0),
            };
            // at strong correlation single realizations can dip below the
            // recovery edge; estimation rightly refuses those
            let est = match estimate(&obs, &EstimateInit::plug_in(&obs)) {
                Ok(e) => e,
                Err(tendefl_core::Error::ImpossibleRegime { .. }) => continue,
                Err(e) => panic!("estimation failed at alpha {alpha}: {e}"),
            };
            valid += 1;
            sim[0] += al.rho1(0);
            sim[1] += al.rho1(1);
            sim[2] += al.rho2(0);
            sim[3] += al.rho2(1);
            est_acc[0] += est.rho11.abs();
            est_acc[1] += est.rho12.abs();
            est_acc[2] += est.rho21.abs();
            est_acc[3] += est.rho22.abs();
        }
        if valid < 2 {
            // the strongest correlation sits at the algorithmic threshold for
            // this SNR pair: single realizations often land on spurious bulk
            // factors, which estimation refuses; nothing to track there
            assert!(alpha >= 0.75, "alpha {alpha}: only {valid} recoverable seeds");
            continue;
        }
        for k in 0..4 {
            let (s, e) = (sim[k] / valid as f64, est_acc[k] / valid as f64);
            assert!(
                (s - e).abs() < 0.07,
                "alpha {alpha}, component {k}: simulated {s} vs estimated {e}"
            );
        }
    }
}

#[test]
fn improved_deflation_orthogonal_case_keeps_full_strength() {
    let model = SpikedModel {
        p: 120,
        beta1: 9.0,
        beta2: 6.0,
        alpha: 0.0,
        seed: 77,
    };
    let (t, truth) = gen_spiked(&model).unwrap();
    let improved = improved_deflation(&t, 0.02, &ImprovedConfig::default()).unwrap();
    assert!(
        improved.gamma_star > 0.9,
        "orthogonal case should keep gamma near one, got {}",
        improved.gamma_star
    );
    // final factors match the plain full-strength deflation
    let baseline_al = measure_alignments(
        &improved.baseline.factor1,
        &improved.baseline.factor2,
        &truth,
    );
    let star_al = measure_alignments(&improved.factor1_star, &improved.factor2_star, &truth);
    let base_second = baseline_al.rho2(0).max(baseline_al.rho2(1));
    let star_second = star_al.rho2(0).max(star_al.rho2(1));
    assert!(
        star_second >= base_second - 0.02,
        "improved {} vs baseline {}",
        star_second,
        base_second
    );
}

#[test]
fn improved_deflation_correlated_case_moves_gamma_inward() {
    let model = SpikedModel {
        p: 120,
        beta1: 6.0,
        beta2: 5.7,
        alpha: 0.5,
        seed: 81,
    };
    let (t, _) = gen_spiked(&model).unwrap();
    let improved = improved_deflation(&t, 0.02, &ImprovedConfig::default()).unwrap();
    assert!(improved.gamma_star > 0.0 && improved.gamma_star <= 1.0);
    assert!(improved.gamma_star < 1.0, "correlated case should tune gamma");
    // the sweep trace attains its maximum at gamma_star
    let best = improved
        .sweep_trace
        .iter()
        .cloned()
        .fold(f64::MIN, |m, (_, v)| m.max(v));
    let at_star = improved
        .sweep_trace
        .iter()
        .find(|(g, _)| *g == improved.gamma_star)
        .map(|(_, v)| *v)
        .unwrap();
    assert_eq!(best, at_star);
}

#[test]
fn second_deflation_simulation_agrees_with_solved_system_gamma1() {
    let (b1, b2, al) = (10.0, 8.0, 0.5);
    let p = 100;
    let seeds = 5u64;
    let mut mean = [0.0f64; 5]; // theta21, theta22, rho21, rho22, lambda2
    for s in 0..seeds {
        let model = SpikedModel {
            p,
            beta1: b1,
            beta2: b2,
            alpha: al,
            seed: 120 + s,
        };
        let (t, truth) = gen_spiked(&model).unwrap();
        let run = deflate(&t, 1.0, Some(&truth), &PowerIterConfig::default()).unwrap();
        let a = run.truth_alignments.unwrap();
        mean[0] += a.theta2(0);
        mean[1] += a.theta2(1);
        mean[2] += a.rho2(0);
        mean[3] += a.rho2(1);
        mean[4] += run.factor2.lambda;
    }
    for v in &mut mean {
        *v /= seeds as f64;
    }
    let (fi, si) = simulated_init(b1, b2, al, 1.0, p, 125).unwrap();
    let first = solve_first(b1, b2, al, &fi, &SolverConfig::default()).unwrap();
    let sol = solve_second_gamma1(b1, b2, al, &first, &si, &SolverConfig::default()).unwrap();
    let solved = [
        sol.theta21.abs(),
        sol.theta22.abs(),
        sol.rho21.abs(),
        sol.rho22.abs(),
        sol.lambda2,
    ];
    for (k, (m, s)) in mean.iter().zip(&solved).enumerate() {
        let tol = if k == 4 { 0.15 } else { 0.05 };
        assert!((m - s).abs() < tol, "component {k}: simulated {m} vs solved {s}");
    }
}
