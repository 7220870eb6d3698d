//! End-to-end runs through the public API: certificate, Datko–Pazy shift,
//! invariant measures and perturbations on the same systems.

use approx::assert_relative_eq;
use gammastab_core::frames::{exponential_family_constants, frame_constants_gram, gram_embedding, gram_matrix, ExponentialFamily};
use gammastab_core::gaussian::{gamma_norm, riesz_sandwich, OperatorMatrix};
use gammastab_core::linalg::{c64, gaussian_matrix, spectral_norm, CMat};
use gammastab_core::mc::{McConfig, Sampling};
use gammastab_core::scp::{
    datko_pazy_certify, invariant_covariance, invariant_measure_exists, perturbation_margin, perturbed_invariant_measure_check, resolvent_transform_norm,
    solution_exists, ScpProblem,
};
use gammastab_core::semigroup::{resolvent_rbound_datko, spectral_abscissa, uniform_orbit_bound, DatkoConfig, Generator, C_UNIV};
use gammastab_core::space::SpaceSpec;
use gammastab_core::verify::random_hurwitz_matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system(seed: u64, m: usize, d: usize) -> ScpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_hurwitz_matrix(&mut rng, m, false).unwrap();
    let b = gaussian_matrix(&mut rng, m, d, false);
    ScpProblem::new(Generator::l2(a).unwrap(), b).unwrap()
}

#[test]
fn certificate_feeds_the_stochastic_pipeline() {
    for seed in 0..4 {
        let prob = system(seed, 5, 2);
        let gen = prob.generator();
        let cert = resolvent_rbound_datko(gen, &DatkoConfig::default(), Sampling::Exact).unwrap();
        assert!(cert.valid);
        assert_relative_eq!(cert.c, C_UNIV * cert.orbit_bound_m, max_relative = 1e-15);
        let dp = datko_pazy_certify(gen, Sampling::Exact).unwrap();
        assert!(dp.epsilon <= cert.epsilon0);
        // the shifted generator still carries an invariant measure
        let shifted = prob.with_generator(gen.shifted(dp.epsilon)).unwrap();
        assert!(invariant_measure_exists(&shifted, Sampling::Exact).unwrap().unique);
        // finite-horizon norms increase to the invariant one
        let q = invariant_covariance(&prob).unwrap();
        let limit = q.trace().re.sqrt();
        let short = solution_exists(&prob, 1.0, Sampling::Exact).unwrap().norm.value;
        let long = solution_exists(&prob, 400.0, Sampling::Exact).unwrap().norm.value;
        assert!(short < long && long <= limit * (1.0 + 1e-9));
        assert_relative_eq!(long, limit, max_relative = 1e-8);
    }
}

#[test]
fn transform_norm_matches_invariant_covariance() {
    let prob = system(11, 4, 3);
    let t = resolvent_transform_norm(&prob, Sampling::Exact).unwrap();
    let q = invariant_covariance(&prob).unwrap();
    assert_relative_eq!(t.value * t.value, 2.0 * std::f64::consts::PI * q.trace().re, max_relative = 1e-10);
}

#[test]
fn margin_perturbation_and_failure_beyond() {
    let prob = system(5, 4, 1);
    let margin = perturbation_margin(prob.generator()).unwrap();
    let p = CMat::identity(4, 4) * c64(0.9 * margin.delta, 0.0);
    let r = perturbed_invariant_measure_check(&prob, &p, Sampling::Exact).unwrap();
    assert!(r.holds);
    let too_big = CMat::identity(4, 4) * c64(1.1 * margin.delta, 0.0);
    assert!(perturbed_invariant_measure_check(&prob, &too_big, Sampling::Exact).is_err());
}

#[test]
fn lp_certificate_is_consistent_with_l2() {
    let prob = system(9, 3, 1);
    let a = prob.generator().matrix().clone();
    let l2 = Generator::l2(a.clone()).unwrap();
    let l4 = Generator::new(a, SpaceSpec::lp(3, 4.0).unwrap()).unwrap();
    let sampling = Sampling::Auto(McConfig::new(20_000, 4));
    let m2 = uniform_orbit_bound(&l2, sampling).unwrap();
    let m4 = uniform_orbit_bound(&l4, sampling).unwrap();
    let k = SpaceSpec::lp(3, 4.0).unwrap().l2_equivalence();
    assert!(m4.value <= k * m2.value * (1.0 + 1e-12));
    let cert = resolvent_rbound_datko(&l4, &DatkoConfig::default(), sampling).unwrap();
    assert!(cert.valid);
    assert!(cert.epsilon0 <= spectral_abscissa(&l4).unwrap().abs());
}

#[test]
fn frame_family_through_gaussian_sums() {
    let family = ExponentialFamily::with_len(0.75, 0.3, 6).unwrap();
    let g = gram_matrix(&family, &family.indices()).unwrap();
    let gram = frame_constants_gram(&g).unwrap();
    let closed = exponential_family_constants(0.75).unwrap();
    // a finite subfamily sits inside the constants of the full family
    assert!(gram.c_hilbert <= closed.c_hilbert * (1.0 + 1e-12));
    assert!(gram.c_bessel >= closed.c_bessel * (1.0 - 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = OperatorMatrix::new(gaussian_matrix(&mut rng, 4, 6, true)).unwrap();
    let rep = riesz_sandwich(&r, &gram_embedding(&g), &closed, &SpaceSpec::l2(4), Sampling::Exact).unwrap();
    assert!(rep.holds);
    let hs = gamma_norm(&r, &SpaceSpec::l2(4), Sampling::Exact).unwrap().value;
    assert_relative_eq!(hs, r.matrix().norm(), max_relative = 1e-14);
    assert!(spectral_norm(r.matrix()) <= hs);
}
