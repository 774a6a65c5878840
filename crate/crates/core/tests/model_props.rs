mod common;

use common::{eig_extremes, rng};
use ndarray::{Array1, Array2};
use rand::Rng;
use tsvqr::{
    build_augmented_gram, coverage_stats, fit, fit_warm, fit_with, generate, reference_setting,
    Dataset, Family, FitOptions, GeneratorSpec, Hyperparams, KernelSpec, SolverConfig,
};

fn random_data(seed: u64, l: usize, n: usize) -> Dataset {
    let mut r = rng(seed);
    let x = Array2::from_shape_fn((l, n), |_| r.random_range(-2.0..2.0));
    let y = Array1::from_shape_fn(l, |i| x.row(i).sum() * 0.5 + r.random_range(-1.0..1.0));
    Dataset::new(x, y).unwrap()
}

fn tight_solver() -> SolverConfig {
    SolverConfig {
        tol: 1e-10,
        max_epochs: 20_000,
        ..SolverConfig::default()
    }
}

#[test]
fn linear_gram_equals_explicit_product() {
    let data = random_data(3, 20, 5);
    let g = build_augmented_gram(&data, &KernelSpec::Linear).unwrap();
    let a = data.inputs();
    for i in 0..20 {
        for j in 0..20 {
            let want = a.row(i).dot(&a.row(j)) + 1.0;
            assert!((g.matrix()[[i, j]] - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn gram_matrices_are_symmetric_psd() {
    let data = random_data(4, 40, 3);
    for spec in [
        KernelSpec::Linear,
        KernelSpec::Gaussian { p: 0.7 },
        KernelSpec::Wavelet { a: 1.3 },
    ] {
        let g = build_augmented_gram(&data, &spec).unwrap();
        let m = g.matrix();
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(m[[i, j]], m[[j, i]]);
            }
        }
        let (lo, hi) = eig_extremes(m);
        assert!(lo >= -1e-8 * hi, "{spec:?}: eigenvalues [{lo}, {hi}]");
    }
}

#[test]
fn linear_cache_agrees_with_dual_prediction() {
    let data = random_data(5, 60, 4);
    let h = Hyperparams::symmetric(2.0, 0.05, 0.3, KernelSpec::Linear);
    for standardize in [false, true] {
        let model = fit_with(
            &data,
            &h,
            &FitOptions {
                standardize,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(model.linear_cache().is_some());
        let probe = random_data(6, 50, 4);
        for i in 0..probe.len() {
            let (a1, a2) = model.predict_bounds(probe.row(i)).unwrap();
            let (b1, b2) = model.predict_bounds_dual(probe.row(i)).unwrap();
            assert!((a1 - b1).abs() <= 1e-10 * b1.abs().max(1.0));
            assert!((a2 - b2).abs() <= 1e-10 * b2.abs().max(1.0));
        }
    }
}

#[test]
fn decomposition_matches_average_of_bounds() {
    let data = random_data(7, 50, 2);
    for (k, tau) in [
        (KernelSpec::Gaussian { p: 1.0 }, 0.2),
        (KernelSpec::Wavelet { a: 2.0 }, 0.8),
    ] {
        let h = Hyperparams {
            c1: 3.0,
            c2: 0.5,
            eps1: 0.02,
            eps2: 0.07,
            tau,
            kernel: k,
            solver: SolverConfig::default(),
        };
        let model = fit(&data, &h).unwrap();
        let probe = random_data(8, 200, 2);
        for i in 0..probe.len() {
            let (s, t) = model.predict_decomposed(probe.row(i)).unwrap();
            let f = model.predict(probe.row(i)).unwrap();
            assert!((s + t - f).abs() <= 1e-10 * f.abs().max(1.0));
        }
    }
}

#[test]
fn training_residuals_satisfy_bound_conditions() {
    // the stationarity gradient of each dual is a residual of the fitted bound
    let (train, _) = generate(&GeneratorSpec::new(Family::B1, 11)).unwrap();
    let (c, p) = reference_setting(Family::B1, 0.5).unwrap();
    let eps = 0.05;
    let h = Hyperparams {
        solver: tight_solver(),
        ..Hyperparams::symmetric(c, eps, 0.5, KernelSpec::Gaussian { p })
    };
    let model = fit(&train, &h).unwrap();
    assert!(model.diagnostics().converged());
    let (cap1, cap2) = (h.c1, h.c2);
    let slack = 1e-6;
    for i in 0..train.len() {
        let y = train.targets()[i];
        let (f1, f2) = model.predict_bounds(train.row(i)).unwrap();
        let (a, b) = (model.alpha_lower()[i], model.alpha_upper()[i]);
        let r1 = y - f1 - eps;
        let r2 = f2 - y - eps;
        for (alpha, cap, r) in [(a, cap1, r1), (b, cap2, r2)] {
            if alpha <= 0.0 {
                assert!(r >= -slack);
            } else if alpha >= cap {
                assert!(r <= slack);
            } else {
                assert!(r.abs() <= 1e-4, "free multiplier with residual {r}");
            }
        }
    }
}

#[test]
fn mirrored_problem_swaps_bounds() {
    for seed in 0..5u64 {
        let data = random_data(100 + seed, 30, 2);
        let mut r = rng(seed);
        let tau = r.random_range(0.05..0.95);
        let h = Hyperparams {
            c1: r.random_range(0.1..5.0),
            c2: r.random_range(0.1..5.0),
            eps1: r.random_range(0.0..0.2),
            eps2: r.random_range(0.0..0.2),
            tau,
            kernel: KernelSpec::Gaussian { p: 0.8 },
            solver: tight_solver(),
        };
        let mirrored = Hyperparams {
            c1: h.c2,
            c2: h.c1,
            eps1: h.eps2,
            eps2: h.eps1,
            tau: 1.0 - tau,
            ..h
        };
        let flipped = Dataset::new(data.inputs().clone(), data.targets().mapv(|v| -v)).unwrap();
        let m = fit(&data, &h).unwrap();
        let mm = fit(&flipped, &mirrored).unwrap();
        for i in 0..data.len() {
            let (f1, f2) = m.predict_bounds(data.row(i)).unwrap();
            let (g1, g2) = mm.predict_bounds(data.row(i)).unwrap();
            assert!((g1 + f2).abs() <= 1e-7, "seed {seed}: {g1} vs {}", -f2);
            assert!((g2 + f1).abs() <= 1e-7, "seed {seed}: {g2} vs {}", -f1);
        }
    }
}

#[test]
fn coverage_tracks_tau_on_b1() {
    let (train, _) = generate(&GeneratorSpec::new(Family::B1, 5)).unwrap();
    for tau in [0.1, 0.5, 0.9] {
        let (c, p) = reference_setting(Family::B1, tau).unwrap();
        let model = fit(
            &train,
            &Hyperparams::symmetric(c, 0.01, tau, KernelSpec::Gaussian { p }),
        )
        .unwrap();
        let cov = coverage_stats(&model, &train).unwrap();
        assert_eq!(cov.total(), train.len());
        assert!(
            (cov.below_fraction() - tau).abs() <= 0.15,
            "tau {tau}: {}",
            cov.below_fraction()
        );
    }
}

#[test]
fn warm_refit_reproduces_cold_fit() {
    let data = random_data(21, 80, 1);
    let h = Hyperparams::symmetric(4.0, 0.01, 0.25, KernelSpec::Gaussian { p: 0.5 });
    let opts = FitOptions::default();
    let cold = fit_with(&data, &h, &opts).unwrap();
    let warm = fit_warm(&data, &h, &opts, Some(&cold)).unwrap();
    assert!(warm.diagnostics().lower.epochs_run <= 1);
    assert!(warm.diagnostics().upper.epochs_run <= 1);
    let again = fit_with(&data, &h, &opts).unwrap();
    assert_eq!(cold.alpha_lower(), again.alpha_lower());
    assert_eq!(cold.alpha_upper(), again.alpha_upper());
}

#[test]
fn higher_tau_raises_the_fit() {
    let (train, test) = generate(&GeneratorSpec::new(Family::A1, 2)).unwrap();
    let fits: Vec<Vec<f64>> = [0.1, 0.5, 0.9]
        .iter()
        .map(|&tau| {
            let (c, p) = reference_setting(Family::A1, tau).unwrap();
            let m = fit(
                &train,
                &Hyperparams::symmetric(c, 0.01, tau, KernelSpec::Gaussian { p }),
            )
            .unwrap();
            m.predict_batch(test.inputs()).unwrap()
        })
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&fits[0]) < mean(&fits[1]));
    assert!(mean(&fits[1]) < mean(&fits[2]));
}
