use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use ustat_cs::boundaries::{g_inv, BoundaryKind, BoundaryParams};
use ustat_cs::kernels::{DistParams, KernelId, Point};
use ustat_cs::simharness::{replication_rng, sample_for_kernel, sample_paired_mmd};
use ustat_cs::spectral::{
    allocate_weights, centered_gram, dense_eigenvalues, estimate_spectrum, sage_lower, sage_upper,
    top_eigenvalues, trace_estimate, EigenMethod, SpectrumConfig, SpectrumEstimate, WeightScheme,
};
use ustat_cs::UStatState;

fn mmd_state(n: usize, delta: f64, seed: u64, cache: bool) -> UStatState {
    let d = DistParams::standard_gaussian();
    let mut rng = replication_rng(seed, 0);
    let mut s = if cache {
        UStatState::with_gram_cache(KernelId::MmdGauss)
    } else {
        UStatState::new(KernelId::MmdGauss)
    };
    for _ in 0..n {
        s.push(sample_paired_mmd(&d, delta, &mut rng).unwrap()).unwrap();
    }
    s
}

#[test]
fn trace_identity_over_full_spectrum() {
    for (kernel, n) in [(KernelId::MmdGauss, 150usize), (KernelId::Variance, 100), (KernelId::Gmd, 120)] {
        let d = DistParams::new(ustat_cs::Family::Laplace).with_shift(0.2);
        let mut rng = replication_rng(11, 0);
        let mut s = UStatState::new(kernel);
        for _ in 0..n {
            s.push(sample_for_kernel(kernel, &d, &mut rng).unwrap()).unwrap();
        }
        let k = centered_gram(&s).unwrap() / n as f64;
        let sum: f64 = dense_eigenvalues(&k).unwrap().iter().sum();
        let want = s.diag_sum() / n as f64 - s.ustat().unwrap();
        assert!((sum - want).abs() <= 1e-8 * want.abs().max(1e-12), "{kernel}: {sum} vs {want}");
        assert!((trace_estimate(&s).unwrap() - k.trace()).abs() <= 1e-10 * want.abs().max(1e-12));
    }
}

/// `h(x, y) = x y` under a standard normal has the single eigenvalue 1.
#[test]
fn rank_one_kernel_spectrum() {
    let mut rng = replication_rng(12, 0);
    let n = 2000;
    let xs: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let mut pair = 0.0;
    for i in 0..n {
        for j in 0..i {
            pair += xs[i] * xs[j];
        }
    }
    let u = 2.0 * pair / (n * (n - 1)) as f64;
    let k = DMatrix::from_fn(n, n, |i, j| (xs[i] * xs[j] - u) / n as f64);
    for method in [EigenMethod::Auto, EigenMethod::Lanczos] {
        let top = top_eigenvalues(&k, 6, method).unwrap();
        assert!((top[0] - 1.0).abs() < 0.1, "{top:?}");
        assert!(top[1..].iter().all(|l| l.abs() < 0.01), "{top:?}");
    }
}

#[test]
fn constant_zero_kernel_has_null_spectrum() {
    let mut s = UStatState::new(KernelId::Gmd);
    s.extend([Point::Scalar(0.7); 40]).unwrap();
    let est = estimate_spectrum(&s, &SpectrumConfig::new(WeightScheme::Polynomial { b: 2.0 }, 0.05)).unwrap();
    assert!(est.eigenvalues.iter().all(|&l| l == 0.0));
    assert_eq!(est.lambda_total, 0.0);
    assert_eq!((est.plus.total, est.plus.log_weighted, est.plus.g_weighted), (0.0, 0.0, 0.0));
    assert_eq!((est.minus.total, est.minus.log_weighted, est.minus.g_weighted), (0.0, 0.0, 0.0));
    let dd = estimate_spectrum(&s, &SpectrumConfig::new(WeightScheme::DataDriven, 0.05)).unwrap();
    assert!(dd.fallback_weights);
}

#[test]
fn mmd_null_trace_matches_diagonal_mean() {
    let s = mmd_state(500, 0.0, 13, false);
    let est = estimate_spectrum(&s, &SpectrumConfig::new(WeightScheme::DataDriven, 0.05)).unwrap();
    assert!(est.plus.total > 0.0);
    // Monte Carlo oracle for E h(Z, Z).
    let mut rng = replication_rng(14, 0);
    let d = DistParams::standard_gaussian();
    let draws = 200_000;
    let diag_mean = (0..draws)
        .map(|_| {
            let z = sample_paired_mmd(&d, 0.0, &mut rng).unwrap();
            KernelId::MmdGauss.eval(&z, &z).unwrap()
        })
        .sum::<f64>()
        / draws as f64;
    assert!((est.lambda_total - diag_mean).abs() < 0.03, "{} vs {diag_mean}", est.lambda_total);
}

#[test]
fn lanczos_agrees_with_dense_on_mmd_gram() {
    for delta in [0.0, 0.4] {
        let s = mmd_state(700, delta, 15, true);
        let k = centered_gram(&s).unwrap() / 700.0;
        let dense = top_eigenvalues(&k, 8, EigenMethod::Dense).unwrap();
        let lanczos = top_eigenvalues(&k, 8, EigenMethod::Lanczos).unwrap();
        for (a, b) in dense.iter().zip(&lanczos) {
            assert!((a - b).abs() <= 1e-10 * dense[0].abs(), "{dense:?} vs {lanczos:?}");
        }
    }
}

#[test]
fn subsampled_estimate_close_to_full() {
    let s = mmd_state(2000, 0.0, 16, true);
    let full = estimate_spectrum(&s, &SpectrumConfig::new(WeightScheme::DataDriven, 0.05)).unwrap();
    let mut cfg = SpectrumConfig::new(WeightScheme::DataDriven, 0.05);
    cfg.subsample_exponent = Some(2.0 / 3.0);
    let sub = estimate_spectrum(&s, &cfg).unwrap();
    assert_eq!(sub.n_used, 159);
    let r = (sub.plus.total - full.plus.total).abs() / full.plus.total;
    assert!(r <= 0.10, "full {} vs subsampled {}", full.plus.total, sub.plus.total);
    assert_eq!(sub.lambda_total, full.lambda_total);
}

#[test]
fn single_eigenvalue_gm_formula() {
    let p = BoundaryParams::new(BoundaryKind::Gm, 0.05, 100).unwrap();
    let est = SpectrumEstimate::from_eigenvalues(vec![1.0], 1.0, WeightScheme::DataDriven, 0.05).unwrap();
    let a = g_inv(0.05).unwrap();
    for n in [100u64, 250, 10_000] {
        let want = ((n as f64 / 100.0).ln() + a * a - 1.0) / n as f64;
        assert!((sage_upper(n, &est, &p).unwrap() - want).abs() < 1e-14);
    }
    let neg = SpectrumEstimate::from_eigenvalues(vec![-1.0], -1.0, WeightScheme::Polynomial { b: 2.0 }, 0.05).unwrap();
    let beta1 = allocate_weights(WeightScheme::Polynomial { b: 2.0 }, &[-1.0]).unwrap()[0];
    let ab = g_inv(0.05 * beta1).unwrap();
    let n = 400u64;
    let want = (-(4.0f64).ln() - ab * ab + 1.0) / n as f64;
    assert!((sage_lower(n, &neg, &p).unwrap() - want).abs() < 1e-14);
}

#[test]
fn two_equal_eigenvalues_at_cold_start() {
    let p = BoundaryParams::new(BoundaryKind::Gm, 0.05, 50).unwrap();
    let est = SpectrumEstimate::from_eigenvalues(vec![0.5, 0.5], 1.0, WeightScheme::DataDriven, 0.05).unwrap();
    assert_eq!(est.weights, vec![0.5, 0.5]);
    let a = g_inv(0.025).unwrap();
    let want = (a * a - 1.0) / 50.0;
    assert!((sage_upper(50, &est, &p).unwrap() - want).abs() < 1e-14);
}

#[test]
fn psd_lower_boundary_is_deterministic_term() {
    let est = SpectrumEstimate::from_eigenvalues(vec![0.6, 0.3, 0.1], 1.3, WeightScheme::DataDriven, 0.05).unwrap();
    for kind in [BoundaryKind::Lil, BoundaryKind::Gm] {
        let p = BoundaryParams::new(kind, 0.05, 10).unwrap();
        assert!((sage_lower(40, &est, &p).unwrap() + 1.3 / 40.0).abs() < 1e-15);
    }
}

fn scheme_strategy() -> impl Strategy<Value = WeightScheme> {
    prop_oneof![
        (1.2f64..10.0).prop_map(|b| WeightScheme::Polynomial { b }),
        (0.3f64..6.0).prop_map(|c| WeightScheme::Exponential { c }),
        Just(WeightScheme::DataDriven),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The lower boundary of a spectrum is minus the upper boundary of the
    /// mirrored spectrum.
    #[test]
    fn lower_boundary_mirrors_upper(
        eig in prop::collection::vec(-2.0f64..2.0, 1..10),
        scheme in scheme_strategy(),
        n in 20u64..100_000,
        alpha in 0.01f64..0.3,
    ) {
        prop_assume!(eig.iter().any(|&l| l > 0.0) && eig.iter().any(|&l| l < 0.0));
        let total: f64 = eig.iter().sum::<f64>() + 0.1;
        let mirrored: Vec<f64> = eig.iter().map(|l| -l).collect();
        let est = SpectrumEstimate::from_eigenvalues(eig, total, scheme, alpha).unwrap();
        let mir = SpectrumEstimate::from_eigenvalues(mirrored, -total, scheme, alpha).unwrap();
        for kind in [BoundaryKind::Lil, BoundaryKind::Gm] {
            let p = BoundaryParams::new(kind, alpha, 20).unwrap();
            let lower = sage_lower(n, &est, &p).unwrap();
            let upper = sage_upper(n, &mir, &p).unwrap();
            prop_assert!((lower + upper).abs() <= 1e-12 * lower.abs().max(1e-12));
        }
    }

    /// Data-driven weights minimize `sum lambda+ log(1 / beta)` over the simplex.
    #[test]
    fn data_driven_weights_minimize_log_term(
        eig in prop::collection::vec(-1.0f64..2.0, 2..12),
        seed in any::<u64>(),
    ) {
        prop_assume!(eig.iter().any(|&l| l > 0.0));
        let est = SpectrumEstimate::from_eigenvalues(eig.clone(), 1.0, WeightScheme::DataDriven, 0.05).unwrap();
        let mut rng = replication_rng(seed, 0);
        for _ in 0..50 {
            let raw: Vec<f64> = est.eigenvalues.iter().map(|_| rng.random_range(1e-6..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let other: f64 = est.eigenvalues.iter().zip(&raw)
                .filter(|(l, _)| **l > 0.0)
                .map(|(l, w)| l * (s / w).ln())
                .sum();
            prop_assert!(est.plus.log_weighted <= other + 1e-12 * other.abs().max(1.0));
        }
    }

    #[test]
    fn upper_boundary_nonincreasing_in_alpha(
        eig in prop::collection::vec(-1.0f64..2.0, 1..8),
        scheme in scheme_strategy(),
        n in 50u64..10_000,
    ) {
        let total: f64 = eig.iter().sum();
        for kind in [BoundaryKind::Lil, BoundaryKind::Gm] {
            let mut prev = f64::INFINITY;
            for alpha in [0.01, 0.05, 0.1, 0.2] {
                let est = SpectrumEstimate::from_eigenvalues(eig.clone(), total, scheme, alpha).unwrap();
                let v = sage_upper(n, &est, &BoundaryParams::new(kind, alpha, 50).unwrap()).unwrap();
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }
}

#[test]
fn boundary_rates() {
    let eig = vec![1.0, 0.5, 0.25, -0.25];
    let est = SpectrumEstimate::from_eigenvalues(eig, 1.5, WeightScheme::Polynomial { b: 2.0 }, 0.05).unwrap();
    let at = |kind, n: u64| sage_upper(n, &est, &BoundaryParams::new(kind, 0.05, 100).unwrap()).unwrap();
    // n * Upsilon grows like log n for GM and like loglog n for LIL.
    let slope = |kind, f: fn(f64) -> f64, n1: u64, n2: u64| {
        let (a, b) = (n1 as f64 * at(kind, n1), n2 as f64 * at(kind, n2));
        (b - a) / (f(n2 as f64) - f(n1 as f64))
    };
    let gm_log = slope(BoundaryKind::Gm, f64::ln, 1_000_000, 1_000_000_000_000);
    assert!((gm_log - est.plus.total).abs() < 1e-9, "{gm_log}");
    // m = 100 and eta = 2 inside the iterated logarithm.
    let lil = |x: f64| (2.0 * x / 100.0).ln().ln();
    let c2 = (2f64.powf(0.25) + 2f64.powf(-0.25)).powi(2);
    for (n1, n2) in [(10_000, 10_000_000), (10_000_000, 10_000_000_000_000)] {
        let s = slope(BoundaryKind::Lil, lil, n1, n2);
        assert!((s - c2 / 2.0 * 1.4 * est.plus.total).abs() < 1e-9, "{s}");
    }
}
