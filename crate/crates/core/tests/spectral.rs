mod common;

use common::{hky, hky_cpg, two_state};
use ctmc_bridge::models::{build_gy, random_reversible, GyParams};
use ctmc_bridge::spectral::{matrix_exponential_fallback, RECONSTRUCTION_TOL};
use ctmc_bridge::{RandomStream, RateMatrix, SpectralDecomposition};
use proptest::prelude::*;

fn random_matrix(n: usize, seed: u64) -> RateMatrix {
    random_reversible(n, &mut RandomStream::new(seed)).unwrap().q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chapman_kolmogorov(n in 2usize..=6, seed in any::<u64>(), s in 0.01f64..3.0, t in 0.01f64..3.0) {
        let q = random_matrix(n, seed);
        let d = SpectralDecomposition::of(&q).unwrap();
        let lhs = d.transition_probability(s + t).unwrap();
        let rhs = d.transition_probability(s).unwrap() * d.transition_probability(t).unwrap();
        prop_assert!((lhs - rhs).amax() < 1e-8);
    }

    #[test]
    fn transition_rows_are_stochastic_and_preserve_stationarity(n in 2usize..=6, seed in any::<u64>(), t in 0.0f64..20.0) {
        let q = random_matrix(n, seed);
        let pi = q.stationary_distribution().unwrap();
        let p = SpectralDecomposition::of(&q).unwrap().transition_probability(t).unwrap();
        for i in 0..n {
            prop_assert!((p.row(i).sum() - 1.0).abs() < 1e-9);
            prop_assert!(p.row(i).iter().all(|&x| x >= 0.0));
        }
        for j in 0..n {
            let pj: f64 = (0..n).map(|i| pi.get(i) * p[(i, j)]).sum();
            prop_assert!((pj - pi.get(j)).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruction_and_reversibility(n in 2usize..=6, seed in any::<u64>()) {
        let built = random_reversible(n, &mut RandomStream::new(seed)).unwrap();
        let (q, pi) = (built.q, built.pi);
        prop_assert!(q.detailed_balance_residual(&pi).0 < 1e-12);
        let solved = q.stationary_distribution().unwrap();
        prop_assert!(solved.probs().iter().zip(pi.probs()).all(|(x, y)| (x - y).abs() < 1e-10));
        let d = SpectralDecomposition::of(&q).unwrap();
        prop_assert!(d.is_reversible());
        prop_assert!(d.reconstruction_error(&q) < RECONSTRUCTION_TOL);
        prop_assert!((q.mean_exit_rate(&pi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_is_idempotent(n in 2usize..=6, seed in any::<u64>(), factor in 0.01f64..100.0) {
        let q = random_matrix(n, seed).scaled(factor);
        let (c1, s1) = q.calibrate().unwrap();
        let (c2, s2) = c1.calibrate().unwrap();
        prop_assert!((s1 / factor - 1.0).abs() < 1e-10);
        prop_assert!((s2 - 1.0).abs() < 1e-12);
        prop_assert!((c1.matrix() - c2.matrix()).amax() < 1e-12);
    }

    #[test]
    fn spectral_matches_matrix_exponential(n in 2usize..=6, seed in any::<u64>(), t in 0.0f64..10.0) {
        let q = random_matrix(n, seed);
        let spectral = SpectralDecomposition::of(&q).unwrap().transition_probability(t).unwrap();
        let pade = matrix_exponential_fallback(&q, t).unwrap();
        prop_assert!((spectral - pade).amax() < 1e-8);
    }
}

#[test]
fn builtin_models_agree_with_matrix_exponential() {
    let gy = build_gy(&GyParams::default()).unwrap().q;
    let models: Vec<RateMatrix> = vec![(*two_state()).clone(), (*hky(true)).clone(), (*hky_cpg(true)).clone(), gy];
    for q in &models {
        let d = SpectralDecomposition::of(q).unwrap();
        assert!(d.reconstruction_error(q) < RECONSTRUCTION_TOL);
        for t in [0.01, 0.5, 2.0, 10.0] {
            let err = (d.transition_probability(t).unwrap() - matrix_exponential_fallback(q, t).unwrap()).amax();
            assert!(err < 1e-8, "n = {}, t = {t}: {err:e}", q.n());
        }
    }
}

#[test]
fn long_horizon_rows_converge_to_stationarity() {
    let q = hky_cpg(true);
    let pi = q.stationary_distribution().unwrap();
    let p = SpectralDecomposition::of(&q).unwrap().transition_probability(200.0).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((p[(i, j)] - pi.get(j)).abs() < 1e-10);
        }
    }
}
