mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::{hky, hky_cpg, two_state, z};
use ctmc_bridge::complexity::expected_recursions_direct;
use ctmc_bridge::samplers::*;
use ctmc_bridge::spectral::decomposition_count;
use ctmc_bridge::validation::{chi_square_goodness_of_fit, chi_square_two_sample, mean_and_se};
use ctmc_bridge::{EndpointProblem, RandomStream, SpectralDecomposition, TransitionSource};
use proptest::prelude::*;

const SEED: u64 = 20090301;

#[test]
fn forward_endpoint_marginal_matches_transition_matrix() {
    let q = two_state();
    let d = SpectralDecomposition::of(&q).unwrap();
    let p = d.transition_probability(1.0).unwrap();
    let master = RandomStream::new(SEED);
    let n = 10_000;
    let hits = (0..n).filter(|&i| forward_sample(&q, 0, 1.0, &mut master.substream(i)).end_state() == 1).count();
    let p01 = p[(0, 1)];
    assert!(z(hits as f64 / n as f64, p01, (p01 * (1.0 - p01) / n as f64).sqrt()) < 3.0);
}

#[test]
fn forward_from_stationarity_makes_one_jump_per_unit_time() {
    let q = hky(true);
    let pi = q.stationary_distribution().unwrap();
    let master = RandomStream::new(SEED);
    let jumps: Vec<f64> = (0..10_000u64)
        .map(|i| {
            let mut rng = master.substream(i);
            let start = rng.categorical(pi.probs());
            forward_sample(&q, start, 5.0, &mut rng).jump_count() as f64
        })
        .collect();
    let (m, se) = mean_and_se(&jumps);
    assert!(z(m, 5.0, se) < 3.0, "mean {m}, se {se}");
}

#[test]
fn rejection_forces_a_jump_when_endpoints_differ() {
    let q = hky(true);
    let problem = EndpointProblem::new(q, 0, 1, 0.2).unwrap();
    let batch =
        sample_batch(SamplerKind::Rejection, &problem, 500, &RandomStream::new(SEED), RejectionConfig::default())
            .unwrap();
    assert!(batch.paths().all(|r| r.path.jump_count() >= 1 && r.path.end_state() == 1));
}

#[test]
fn rejection_attempts_match_acceptance_probability() {
    let problem = EndpointProblem::new(hky(true), 0, 0, 2.0).unwrap();
    let batch =
        sample_batch(SamplerKind::Rejection, &problem, 10_000, &RandomStream::new(SEED), RejectionConfig::default())
            .unwrap();
    let attempts: Vec<f64> = batch.paths().map(|r| r.attempts as f64).collect();
    let (m, se) = mean_and_se(&attempts);
    assert!(z(m, 1.0 / 0.25408, se) < 3.0, "mean attempts {m}");
}

#[test]
fn rejection_budget_is_enforced() {
    // forced first jump lands on the wrong state with probability ~ 1/2 at tiny T
    let problem = EndpointProblem::new(hky(true), 0, 1, 1e-6).unwrap();
    let cfg = RejectionConfig::new(1).unwrap();
    let mut failures = 0;
    for i in 0..20u64 {
        if let Err(e) = rejection_sample(&problem, &cfg, &mut RandomStream::new(i)) {
            assert_eq!(e, ctmc_bridge::Error::RejectionBudgetExceeded { attempts: 1 });
            failures += 1;
        }
    }
    assert!(failures > 0);
}

#[test]
fn first_jump_time_examples() {
    assert_abs_diff_eq!(conditional_first_jump_time(1.0, 1.0, 0.5), 0.379_885_493_041_722, epsilon = 1e-12);
    let near_zero = conditional_first_jump_time(1.0, 1.0, 1e-15);
    assert!(near_zero > 0.0 && near_zero < 1e-14);
    let near_t = conditional_first_jump_time(1.0, 1.0, 1.0 - 1e-15);
    assert!(near_t < 1.0 && near_t > 1.0 - 1e-13);
}

#[test]
fn direct_first_transition_two_state() {
    let q = two_state();
    let kernel = DirectKernel::build(q).unwrap();
    let ft = kernel.first_transition(0, 0, 1.0).unwrap();
    let expected = (-1.0f64).exp() / ((1.0 + (-2.0f64).exp()) / 2.0);
    assert_abs_diff_eq!(ft.stay.unwrap(), expected, epsilon = 1e-12);
    assert_abs_diff_eq!(ft.stay.unwrap(), 0.64805, epsilon = 1e-5);
    assert_abs_diff_eq!(ft.stay.unwrap() + ft.jump.iter().sum::<f64>(), 1.0, epsilon = 1e-8);

    let ft = kernel.first_transition(0, 1, 1.0).unwrap();
    assert!(ft.stay.is_none());
    assert_abs_diff_eq!(ft.jump[1], 1.0, epsilon = 1e-12);

    let tiny = kernel.first_transition(0, 0, 1e-9).unwrap();
    assert!(tiny.stay.unwrap() > 1.0 - 1e-8);
}

#[test]
fn direct_masses_sum_to_one_and_cdfs_are_proper() {
    let q = hky(true);
    let kernel = DirectKernel::build(q.clone()).unwrap();
    for a in 0..4 {
        for b in 0..4 {
            for t in [0.05, 0.5, 2.0, 10.0] {
                let ft = kernel.first_transition(a, b, t).unwrap();
                let total = ft.stay.unwrap_or(0.0) + ft.jump.iter().sum::<f64>();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
                for i in (0..4).filter(|&i| i != a) {
                    let cdf = ft.waiting_time(i).unwrap();
                    assert_eq!(cdf.eval(0.0), 0.0);
                    assert_abs_diff_eq!(cdf.eval(t), 1.0, epsilon = 1e-9);
                    let mut prev = 0.0;
                    for k in 1..=200 {
                        let v = cdf.eval(t * k as f64 / 200.0);
                        assert!(v >= prev - 1e-12);
                        prev = v;
                    }
                }
            }
        }
    }
}

#[test]
fn waiting_time_inversion_is_accurate() {
    let q = hky_cpg(true);
    let kernel = DirectKernel::build(q).unwrap();
    let mut rng = RandomStream::new(SEED);
    for _ in 0..1000 {
        let (a, b) = (rng.categorical(&[1.0; 4]), rng.categorical(&[1.0; 4]));
        let t = 0.05 + 3.0 * rng.uniform();
        let ft = kernel.first_transition(a, b, t).unwrap();
        let i = rng.categorical(&ft.jump);
        let cdf = ft.waiting_time(i).unwrap();
        let u = rng.uniform_open();
        let tau = cdf.invert(u, DEFAULT_ROOT_TOL).unwrap();
        assert!(tau > 0.0 && tau < t);
        assert!((cdf.eval(tau) - u).abs() < 1e-8, "u {u}, cdf {}", cdf.eval(tau));
    }
}

#[test]
fn direct_constant_path_probability() {
    let problem = EndpointProblem::new(two_state(), 0, 0, 1.0).unwrap();
    let batch =
        sample_batch(SamplerKind::Direct, &problem, 10_000, &RandomStream::new(SEED), RejectionConfig::default())
            .unwrap();
    let constant = batch.paths().filter(|r| r.path.jump_count() == 0).count() as f64 / 10_000.0;
    let p = 0.6480542736638855;
    assert!(z(constant, p, (p * (1.0 - p) / 10_000.0).sqrt()) < 3.0);
    assert!(batch.paths().filter(|r| r.path.jump_count() == 0).all(|r| r.recursion_steps == 0));
}

#[test]
fn direct_mean_jumps_match_analytic() {
    let q = hky(true);
    let d = SpectralDecomposition::of(&q).unwrap();
    let problem = EndpointProblem::new(q.clone(), 0, 1, 0.5).unwrap();
    let batch =
        sample_batch(SamplerKind::Direct, &problem, 10_000, &RandomStream::new(SEED), RejectionConfig::default())
            .unwrap();
    let jumps: Vec<f64> = batch.paths().map(|r| r.path.jump_count() as f64).collect();
    let (m, se) = mean_and_se(&jumps);
    let e = expected_recursions_direct(&d, &q, 0, 1, 0.5).unwrap();
    assert!(z(m, e, se) < 3.0, "mean {m} vs {e}");
}

#[test]
fn direct_kernel_is_built_once() {
    let q = hky(true);
    let before = decomposition_count();
    let kernel = DirectKernel::build(q.clone()).unwrap();
    let mut rng = RandomStream::new(SEED);
    for k in 0..100 {
        let problem = EndpointProblem::new(q.clone(), k % 4, (k / 4) % 4, 0.1 + (k as f64) * 0.01).unwrap();
        kernel.sample(&problem, &mut rng).unwrap();
    }
    assert_eq!(decomposition_count() - before, 1);
}

#[test]
fn direct_kernel_rejects_complex_spectrum() {
    let rows = vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0]];
    let q = Arc::new(ctmc_bridge::RateMatrix::from_rows(&rows, ctmc_bridge::StateSpace::numbered(3).unwrap()).unwrap());
    assert!(matches!(DirectKernel::build(q.clone()), Err(ctmc_bridge::Error::ComplexSpectrum(_))));
    // uniformization still works through the matrix-exponential route
    let kernel = UniformizationKernel::build(q.clone()).unwrap();
    assert!(matches!(kernel.source(), TransitionSource::MatrixExponential(_)));
    let problem = EndpointProblem::new(q, 0, 2, 1.0).unwrap();
    let r = kernel.sample(&problem, &mut RandomStream::new(1)).unwrap();
    assert_eq!(r.path.end_state(), 2);
}

#[test]
fn uniformization_kernel_construction() {
    let k = UniformizationKernel::build(two_state()).unwrap();
    assert_eq!(k.mu(), 1.0);
    assert_eq!(k.r()[(0, 0)], 0.0);
    assert_eq!(k.r()[(0, 1)], 1.0);
    let cpg = UniformizationKernel::build(hky_cpg(false)).unwrap();
    assert_abs_diff_eq!(cpg.mu(), 20.0, epsilon = 1e-12);
    for q in [hky(true), hky_cpg(true), hky_cpg(false)] {
        let k = UniformizationKernel::build(q).unwrap();
        for row in k.r().row_iter() {
            assert!(row.iter().all(|&x| x >= 0.0));
            assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn cached_powers_match_iterated_products() {
    let k = UniformizationKernel::build(hky(true)).unwrap();
    let powers = k.powers_through(37);
    let mut acc = nalgebra::DMatrix::<f64>::identity(4, 4);
    for (m, p) in powers.iter().enumerate().take(38) {
        assert!((p.as_ref() - &acc).amax() < 1e-10, "power {m}");
        acc = &acc * k.r();
    }
}

#[test]
fn jump_count_two_state_zero_mass_equals_stay_probability() {
    let q = two_state();
    let k = UniformizationKernel::build(q.clone()).unwrap();
    let masses = k.jump_count_masses(0, 0, 1.0, 3).unwrap();
    let stay = DirectKernel::build(q).unwrap().first_transition(0, 0, 1.0).unwrap().stay.unwrap();
    assert_abs_diff_eq!(masses[0], stay, epsilon = 1e-12);
    assert_eq!(masses[1], 0.0);
}

#[test]
fn jump_count_is_positive_for_distinct_endpoints() {
    let q = hky(true);
    let k = UniformizationKernel::build(q.clone()).unwrap();
    let problem = EndpointProblem::new(q, 0, 1, 0.3).unwrap();
    for u in [0.0, 1e-12, 0.5, 0.999999] {
        assert!(k.conditional_jump_count(&problem, u).unwrap() >= 1);
    }
}

#[test]
fn jump_count_law_chi_square() {
    let q = hky(true);
    let k = UniformizationKernel::build(q.clone()).unwrap();
    let problem = EndpointProblem::new(q, 0, 1, 1.0).unwrap();
    let master = RandomStream::new(SEED);
    let mut counts = vec![0u64; 40];
    for i in 0..10_000u64 {
        let n = k.conditional_jump_count(&problem, master.substream(i).uniform()).unwrap();
        counts[n] += 1;
    }
    let masses = k.jump_count_masses(0, 1, 1.0, 39).unwrap();
    let test = chi_square_goodness_of_fit(&counts, &masses);
    assert!(test.p_value > 0.001, "{test:?}");
}

#[test]
fn uniformization_single_jump_and_no_self_transitions() {
    let q = two_state();
    let k = UniformizationKernel::build(q.clone()).unwrap();
    let problem = EndpointProblem::new(q, 0, 1, 1.0).unwrap();
    let master = RandomStream::new(SEED);
    for i in 0..2000u64 {
        let r = k.sample(&problem, &mut master.substream(i)).unwrap();
        if r.recursion_steps == 1 {
            assert_eq!(r.path.jump_count(), 1);
        }
        assert!(r.recursion_steps as usize >= r.path.jump_count());
        assert!(r.path.segments().windows(2).all(|w| w[0].state != w[1].state));
    }
}

#[test]
fn cross_sampler_two_state_distinct_endpoints() {
    let problem = EndpointProblem::new(two_state(), 0, 1, 1.0).unwrap();
    let master = RandomStream::new(SEED);
    let run = |kind: SamplerKind, s: u64| {
        sample_batch(kind, &problem, 10_000, &master.substream(s), RejectionConfig::default()).unwrap()
    };
    let (rej, dir, uni) =
        (run(SamplerKind::Rejection, 0), run(SamplerKind::Direct, 1), run(SamplerKind::Uniformization, 2));
    let hist = |b: &BatchOutcome| {
        let mut h = vec![0u64; 32];
        b.paths().for_each(|r| h[r.path.jump_count()] += 1);
        h
    };
    assert!(chi_square_two_sample(&hist(&rej), &hist(&dir)).p_value > 0.001);
    let dwell = |b: &BatchOutcome| mean_and_se(&b.paths().map(|r| r.path.time_in(0)).collect::<Vec<_>>());
    let ((m1, s1), (m2, s2)) = (dwell(&uni), dwell(&dir));
    assert!(z(m1, m2, (s1 * s1 + s2 * s2).sqrt()) < 3.0);
}

#[test]
fn batch_determinism_and_single_path_identity() {
    let q = hky(true);
    let problem = EndpointProblem::new(q, 0, 1, 1.0).unwrap();
    let rng = RandomStream::new(SEED);
    for kind in SamplerKind::ALL {
        let one = sample_batch(kind, &problem, 1, &rng, RejectionConfig::default()).unwrap();
        let sampler = PreparedSampler::prepare(kind, &problem.q, RejectionConfig::default()).unwrap();
        let single = sampler.sample(&problem, &mut rng.substream(0)).unwrap();
        assert_eq!(one.reports[0].1, single);
        let x = sample_batch(kind, &problem, 100, &rng, RejectionConfig::default()).unwrap();
        let y = sample_batch(kind, &problem, 100, &rng, RejectionConfig::default()).unwrap();
        assert_eq!(x.reports, y.reports);
    }
}

#[test]
fn batch_reuses_one_decomposition() {
    let problem = EndpointProblem::new(hky(true), 0, 1, 1.0).unwrap();
    let before = decomposition_count();
    sample_batch(SamplerKind::Direct, &problem, 10_000, &RandomStream::new(SEED), RejectionConfig::default()).unwrap();
    assert_eq!(decomposition_count() - before, 1);
}

#[test]
fn batch_collects_per_path_failures() {
    let problem = EndpointProblem::new(hky(true), 0, 1, 1e-4).unwrap();
    let cfg = RejectionConfig::new(1).unwrap();
    match sample_batch(SamplerKind::Rejection, &problem, 50, &RandomStream::new(SEED), cfg) {
        Ok(outcome) => {
            assert_eq!(outcome.reports.len() + outcome.failures.len(), 50);
            assert!(outcome.failures.iter().all(|(i, _)| *i < 50));
        }
        Err(e) => assert!(matches!(e, ctmc_bridge::Error::RejectionBudgetExceeded { .. })),
    }
}

#[test]
fn zero_horizon_gives_constant_path() {
    let problem = EndpointProblem::new(hky(true), 2, 2, 0.0).unwrap();
    for kind in SamplerKind::ALL {
        let s = PreparedSampler::prepare(kind, &problem.q, RejectionConfig::default()).unwrap();
        let r = s.sample(&problem, &mut RandomStream::new(1)).unwrap();
        assert_eq!(r.path.jump_count(), 0);
        assert_eq!(r.path.horizon(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_paths_are_valid_bridges(a in 0usize..4, b in 0usize..4, t in 0.01f64..4.0, seed in any::<u64>(), kind in 0usize..3) {
        let q = hky_cpg(true);
        let problem = EndpointProblem::new(q.clone(), a, b, t).unwrap();
        let kind = SamplerKind::ALL[kind];
        let sampler = PreparedSampler::prepare(kind, &q, RejectionConfig::default()).unwrap();
        let r = sampler.sample(&problem, &mut RandomStream::new(seed)).unwrap();
        prop_assert_eq!(r.path.start_state(), a);
        prop_assert_eq!(r.path.end_state(), b);
        prop_assert!(r.attempts >= 1);
        prop_assert!(r.recursion_steps as usize >= r.path.jump_count());
        let stats = r.path.sufficient_stats(4);
        prop_assert!((stats.total_time() - t).abs() < 1e-10);
        prop_assert_eq!(stats.total_jumps() as usize, r.path.jump_count());
        for w in r.path.segments().windows(2) {
            prop_assert!(w[0].entry < w[1].entry && w[0].state != w[1].state);
        }
    }
}
