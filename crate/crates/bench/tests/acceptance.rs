//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantities (run with `-- --nocapture`).

use std::path::PathBuf;
use std::time::Instant;

use ndarray::{array, Array1, Array2};
use rand::Rng;

use ctxopt_bench::config::{ExperimentConfig, ExperimentKind};
use ctxopt_bench::experiments::{run_bounds, run_newsvendor, run_portfolio, run_wind};
use ctxopt_bench::gen::newsvendor_psi;
use ctxopt_bench::oracle::worst_case_bracket;
use ctxopt_bench::rng::{sample_uniform, stream_rng};
use ctxopt_core::dro::{
    dual_objective, sandwich_check, worst_case_active_set, worst_case_expectation, AmbiguitySpec,
};
use ctxopt_core::kernel::{
    kernel_l2_integral, nw_weights, KernelFamily, KernelSpec, WeightVector,
};
use ctxopt_core::solvers::solve_newsvendor_dro;
use ctxopt_core::subspace::fit_subspace;

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ctxopt_acceptance_{name}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_1_portfolio_optimality() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default_for(ExperimentKind::Portfolio, out_dir("portfolio"));
    cfg.ensure_writable().unwrap();
    let outcome = run_portfolio(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let target = 1.0 / (3.0 * 2f64.sqrt());
    let err = (outcome.rnw_mean_return - target).abs();
    assert!(
        err <= 0.03,
        "mean return {} vs target {target}",
        outcome.rnw_mean_return
    );

    let trials = outcome.gamma0_allocations.len() as f64;
    let mean1: f64 = outcome.gamma0_allocations.iter().map(|a| a.0).sum::<f64>() / trials;
    let mean2: f64 = outcome.gamma0_allocations.iter().map(|a| a.1).sum::<f64>() / trials;
    assert!(
        (mean1 - 0.5).abs() <= 0.05 && (mean2 - 0.5).abs() <= 0.05,
        "gamma=0 allocations ({mean1}, {mean2})"
    );
    assert!(elapsed < 120.0, "runtime {elapsed}s exceeds 2 minutes");
    println!(
        "criterion 1 (portfolio optimality): mean return {:.4} (target {:.4} +- 0.03), \
         gamma0 allocation ({:.3}, {:.3}), runtime {:.1}s -> PASS",
        outcome.rnw_mean_return, target, mean1, mean2, elapsed
    );
}

#[test]
fn criterion_2_ldr_ceiling() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Portfolio, out_dir("ldr"));
    cfg.ensure_writable().unwrap();
    let outcome = run_portfolio(&cfg).unwrap();
    let ceiling = 1.0 / 6.0 + 3.0 * outcome.ldr_standard_error;
    assert!(
        outcome.ldr_mean_return <= ceiling,
        "ldr mean {} exceeds ceiling {ceiling}",
        outcome.ldr_mean_return
    );
    println!(
        "criterion 2 (ldr ceiling): ldr mean return {:.4} <= 1/6 + 3 se = {:.4} -> PASS",
        outcome.ldr_mean_return, ceiling
    );
}

#[test]
fn criterion_3_dro_oracle_equivalence() {
    let mut rng = stream_rng(33, 0);
    let lambdas = [0.0, 0.1, 0.5, 2.0];
    let mut tight_checked = 0usize;
    let mut worst_gap = 0.0f64;
    for instance in 0..500 {
        let n = 2 + instance % 3;
        let lambda = lambdas[(instance / 3) % lambdas.len()];
        let z: Vec<f64> = (0..n).map(|_| sample_uniform(&mut rng, 0.0, 1.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| sample_uniform(&mut rng, 0.05, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        let center: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let weights = WeightVector::new(center.clone()).unwrap();
        let spec = AmbiguitySpec::new(lambda, weights.clone()).unwrap();

        let result = worst_case_expectation(&z, &spec).unwrap();
        let bracket = worst_case_bracket(&z, &center, lambda, &mut rng);
        assert!(
            bracket.dual - bracket.primal <= 2e-6,
            "instance {instance}: oracle bracket too wide ({:e})",
            bracket.dual - bracket.primal
        );
        assert!(
            result.value >= bracket.primal - 1e-6 && result.value <= bracket.dual + 1e-6,
            "instance {instance} (n={n}, lambda={lambda}): solver {} outside oracle bracket \
             [{}, {}]",
            result.value,
            bracket.primal,
            bracket.dual
        );
        worst_gap = worst_gap
            .max(bracket.primal - result.value)
            .max(result.value - bracket.dual);

        let sandwich = sandwich_check(&z, &weights, lambda).unwrap();
        assert!(sandwich.lower <= sandwich.value + 1e-9);
        assert!(sandwich.value <= sandwich.upper + 1e-9);

        // Fast path and exact path agree whenever the empirical variance
        // dominates lambda^2.
        let mean: f64 = center.iter().zip(z.iter()).map(|(w, v)| w * v).sum();
        let variance: f64 = center
            .iter()
            .zip(z.iter())
            .map(|(w, v)| w * (v - mean) * (v - mean))
            .sum();
        if variance >= lambda * lambda && lambda > 0.0 {
            let exact = worst_case_active_set(&z, &spec).unwrap();
            assert!(
                (result.value - exact.value).abs() <= 1e-9,
                "fast path {} vs exact {}",
                result.value,
                exact.value
            );
            tight_checked += 1;
        }
    }
    assert!(tight_checked >= 50, "only {tight_checked} tight instances");
    println!(
        "criterion 3 (dro oracle equivalence): 500 instances within 1e-6 of oracle bracket \
         (worst overshoot {worst_gap:.2e}), sandwich within 1e-9, {tight_checked} \
         fast-path/exact agreements within 1e-9 -> PASS"
    );
}

#[test]
fn criterion_4_duality() {
    let mut rng = stream_rng(44, 0);
    let mut worst = 0.0f64;
    for instance in 0..100 {
        let n = 2 + instance % 6;
        let lambda = sample_uniform(&mut rng, 0.0, 2.5);
        let z: Vec<f64> = (0..n).map(|_| sample_uniform(&mut rng, 0.0, 1.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| sample_uniform(&mut rng, 0.05, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = WeightVector::new(raw.iter().map(|r| r / total).collect()).unwrap();
        let spec = AmbiguitySpec::new(lambda, weights.clone()).unwrap();
        let result = worst_case_expectation(&z, &spec).unwrap();
        // dual_objective validates feasibility of the certificate.
        let dual_value = dual_objective(
            &z,
            &weights,
            lambda,
            result.dual.alpha,
            &result.dual.beta,
            result.dual.nu,
        )
        .unwrap();
        let gap = (dual_value - result.value).abs();
        assert!(
            gap <= 1e-7,
            "instance {instance} (n={n}, lambda={lambda}): duality gap {gap:e}"
        );
        worst = worst.max(gap);
    }
    println!(
        "criterion 4 (duality): 100 KKT dual certificates feasible, worst gap {worst:.2e} \
         <= 1e-7 -> PASS"
    );
}

#[test]
fn criterion_5_newsvendor_fractile_and_regularization() {
    // Fractile oracle: order up to the 0.625 quantile of the conditional
    // demand law at the probe, estimated from n = 2000 draws of that law.
    let probe = [4.5, 5.0];
    let psi = newsvendor_psi(probe[0], probe[1]);
    let target = psi + 2.5;
    let mut rng = stream_rng(55, 0);
    let demands: Vec<f64> = (0..2000)
        .map(|_| sample_uniform(&mut rng, psi - 10.0, psi + 10.0))
        .collect();
    let weights = WeightVector::uniform(demands.len());
    let report = solve_newsvendor_dro(&demands, &weights, 10.0, 6.0, 0.0, None).unwrap();
    let q = report.decision[0];
    assert!(
        (q - target).abs() <= 0.5,
        "fractile solve q = {q} vs target {target}"
    );

    // Regularization trend at the sparse low-density probe: the best radius
    // in the grid does not lose to radius zero.
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Newsvendor, out_dir("news"));
    cfg.n = 10;
    cfg.trials = 10;
    cfg.probes = Some(vec![vec![1.5, 2.5]]);
    cfg.ensure_writable().unwrap();
    let outcome = run_newsvendor(&cfg).unwrap();
    let loss_at_zero = outcome.mean_loss_at(0, 0.0);
    let best = cfg
        .lambda_grid
        .iter()
        .map(|&l| (l, outcome.mean_loss_at(0, l)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    assert!(
        best.1 <= loss_at_zero,
        "best-lambda loss {} vs lambda=0 loss {loss_at_zero}",
        best.1
    );
    println!(
        "criterion 5 (newsvendor): fractile q {q:.3} within 0.5 of {target:.3}; \
         probe (1.5,2.5) mean loss {:.3} at lambda {:.2} <= {:.3} at lambda 0 -> PASS",
        best.1, best.0, loss_at_zero
    );
}

#[test]
fn criterion_6_pca_bound_and_recovery() {
    // Perturbation bound: moving every projected point by at most tau moves
    // the kernel-weighted estimate by at most exp(4 tau / h) - 1.
    let mut rng = stream_rng(66, 0);
    let mut worst_ratio = 0.0f64;
    for case in 0..100 {
        let n = 10 + case % 30;
        let h = sample_uniform(&mut rng, 0.3, 1.5);
        let tau = sample_uniform(&mut rng, 0.01, 0.2) * h;
        let spec = KernelSpec::new(KernelFamily::Exponential, h, 2).unwrap();

        let mut points = Array2::zeros((n, 2));
        for i in 0..n {
            points[[i, 0]] = sample_uniform(&mut rng, -2.0, 2.0);
            points[[i, 1]] = sample_uniform(&mut rng, -2.0, 2.0);
        }
        let losses: Vec<f64> = (0..n).map(|_| sample_uniform(&mut rng, 0.0, 1.0)).collect();
        let query = array![
            sample_uniform(&mut rng, -1.0, 1.0),
            sample_uniform(&mut rng, -1.0, 1.0)
        ];

        // Perturb every point and the query by vectors of norm <= tau, so
        // every pairwise distance moves by at most 2 tau.
        let mut perturbed = points.clone();
        for i in 0..n {
            let angle = sample_uniform(&mut rng, 0.0, std::f64::consts::TAU);
            let radius = sample_uniform(&mut rng, 0.0, tau);
            perturbed[[i, 0]] += radius * angle.cos();
            perturbed[[i, 1]] += radius * angle.sin();
        }
        let angle = sample_uniform(&mut rng, 0.0, std::f64::consts::TAU);
        let radius = sample_uniform(&mut rng, 0.0, tau);
        let query_perturbed = array![
            query[0] + radius * angle.cos(),
            query[1] + radius * angle.sin()
        ];

        let w = nw_weights(&spec, points.view(), query.view()).unwrap();
        let w_pert = nw_weights(&spec, perturbed.view(), query_perturbed.view()).unwrap();
        let estimate: f64 = w.iter().zip(losses.iter()).map(|(wi, l)| wi * l).sum();
        let estimate_pert: f64 = w_pert
            .iter()
            .zip(losses.iter())
            .map(|(wi, l)| wi * l)
            .sum();
        let bound = (4.0 * tau / h).exp() - 1.0;
        let diff = (estimate - estimate_pert).abs();
        assert!(
            diff <= bound + 1e-12,
            "case {case}: difference {diff} exceeds bound {bound}"
        );
        worst_ratio = worst_ratio.max(diff / bound);
    }

    // Subspace recovery improves with the estimation sample size in at
    // least 4 of 5 seeds.
    let (p, p_prime) = (8usize, 2usize);
    let mut monotone = 0;
    for seed in 0..5u64 {
        let mut rng = stream_rng(100 + seed, 0);
        // Random orthonormal basis rows via Gram-Schmidt.
        let mut basis = Array2::zeros((p_prime, p));
        for r in 0..p_prime {
            let mut v: Array1<f64> =
                (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for prev in 0..r {
                let proj = basis.row(prev).dot(&v);
                v = &v - &(&basis.row(prev) * proj);
            }
            let norm = v.dot(&v).sqrt();
            basis.row_mut(r).assign(&(&v / norm));
        }
        let mut errors = Vec::new();
        for &n2 in &[50usize, 200, 800] {
            let mut rows = Array2::zeros((n2, p));
            for i in 0..n2 {
                let latent = [
                    2f64.sqrt() * ctxopt_bench::rng::sample_normal(&mut rng),
                    ctxopt_bench::rng::sample_normal(&mut rng),
                ];
                for j in 0..p {
                    rows[[i, j]] = latent[0] * basis[[0, j]]
                        + latent[1] * basis[[1, j]]
                        + 0.01 * ctxopt_bench::rng::sample_normal(&mut rng);
                }
            }
            let model = fit_subspace(rows.view(), p_prime).unwrap();
            // Procrustes distance via the nuclear norm of the 2x2 overlap.
            let overlap = basis.dot(&model.basis().t());
            let frob_sq: f64 = overlap.iter().map(|v| v * v).sum();
            let det = overlap[[0, 0]] * overlap[[1, 1]] - overlap[[0, 1]] * overlap[[1, 0]];
            let nuclear = (frob_sq + 2.0 * det.abs()).sqrt();
            errors.push((2.0 * p_prime as f64 - 2.0 * nuclear).max(0.0).sqrt());
        }
        if errors[0] > errors[1] && errors[1] > errors[2] {
            monotone += 1;
        }
    }
    assert!(monotone >= 4, "recovery monotone in only {monotone}/5 seeds");
    println!(
        "criterion 6 (pca bound): 100 perturbations within exp(4 tau/h)-1 (worst ratio \
         {worst_ratio:.3}); recovery error monotone in {monotone}/5 seeds -> PASS"
    );
}

#[test]
fn criterion_7_generalization_coverage() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default_for(ExperimentKind::Bounds, out_dir("bounds"));
    cfg.ensure_writable().unwrap();
    let outcome = run_bounds(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let threshold = 1.0 - outcome.delta - 0.07;
    assert!(
        outcome.coverage >= threshold,
        "coverage {} below {threshold}",
        outcome.coverage
    );
    assert!(elapsed < 300.0, "runtime {elapsed}s exceeds 5 minutes");
    println!(
        "criterion 7 (generalization coverage): coverage {:.3} >= {threshold:.3} over {} \
         trials, runtime {elapsed:.1}s -> PASS",
        outcome.coverage,
        outcome.rows.len()
    );
}

#[test]
fn criterion_8_wind_qualitative_ordering() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::Wind, out_dir("wind"));
    cfg.ensure_writable().unwrap();
    let outcome = run_wind(&cfg).unwrap();
    let (rnw_mean, _, _) = outcome.improvement_stats("rnw");
    let (nw_mean, nw_p20, _) = outcome.improvement_stats("nw");
    assert!(rnw_mean >= 0.0, "rnw mean improvement {rnw_mean} < 0");
    assert!(
        rnw_mean >= nw_p20,
        "rnw mean {rnw_mean} below nw 20th percentile {nw_p20}"
    );
    println!(
        "criterion 8 (wind ordering): rnw mean improvement {rnw_mean:.3} >= 0 and >= nw p20 \
         {nw_p20:.3} (nw mean {nw_mean:.3}) over {} season-trials -> PASS",
        cfg.trials
    );
}

#[test]
fn criterion_9_kernel_invariants() {
    let mut rng = stream_rng(99, 0);
    // Simplex, permutation, locality, and uniform-limit checks on random
    // one-dimensional data.
    for _ in 0..50 {
        let n = 2 + (sample_uniform(&mut rng, 0.0, 1.0) * 20.0) as usize;
        let data: Vec<f64> = (0..n).map(|_| sample_uniform(&mut rng, -5.0, 5.0)).collect();
        let query = sample_uniform(&mut rng, -5.0, 5.0);
        let h = sample_uniform(&mut rng, 0.05, 10.0);
        let spec = KernelSpec::new(KernelFamily::Exponential, h, 1).unwrap();
        let cov = Array2::from_shape_vec((n, 1), data.clone()).unwrap();
        let w = nw_weights(&spec, cov.view(), array![query].view()).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|wi| *wi >= 0.0));

        let mut reversed = data.clone();
        reversed.reverse();
        let cov_rev = Array2::from_shape_vec((n, 1), reversed).unwrap();
        let w_rev = nw_weights(&spec, cov_rev.view(), array![query].view()).unwrap();
        for i in 0..n {
            assert!((w[i] - w_rev[n - 1 - i]).abs() < 1e-12);
        }
    }

    // Locality at h = 1e-3 on integer-spaced samples.
    let spec = KernelSpec::new(KernelFamily::Exponential, 1e-3, 1).unwrap();
    let cov = Array2::from_shape_vec((5, 1), vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
    let w = nw_weights(&spec, cov.view(), array![1.2].view()).unwrap();
    assert!(w[1] > 1.0 - 1e-9, "nearest weight {}", w[1]);

    // Uniform limit at h = 1e6 on unit-scale data.
    let spec = KernelSpec::new(KernelFamily::Exponential, 1e6, 1).unwrap();
    let cov = Array2::from_shape_vec((8, 1), (0..8).map(|i| i as f64 / 8.0).collect()).unwrap();
    let w = nw_weights(&spec, cov.view(), array![0.5].view()).unwrap();
    for wi in w.iter() {
        assert!((wi - 0.125).abs() < 1e-6);
    }

    // Quadrature check of the squared-kernel integral in one dimension:
    // 2 * int_0^inf (exp(-t)/2)^2 dt = 1/4.
    let spec = KernelSpec::new(KernelFamily::Exponential, 1.0, 1).unwrap();
    let l2 = kernel_l2_integral(&spec).unwrap();
    let m = 400_000;
    let upper = 60.0;
    let step = upper / m as f64;
    let mut quad = 0.0;
    for i in 0..m {
        let t = (i as f64 + 0.5) * step;
        let k = (-t).exp() / 2.0;
        quad += 2.0 * k * k * step;
    }
    assert!((l2 - quad).abs() < 1e-6, "l2 {l2} vs quadrature {quad}");
    assert!((l2 - 0.25).abs() < 1e-12);

    println!(
        "criterion 9 (kernel invariants): simplex/permutation/locality/uniform checks pass; \
         squared-kernel integral {l2:.8} matches quadrature {quad:.8} -> PASS"
    );
}
