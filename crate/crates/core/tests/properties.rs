use std::sync::Arc;

use proptest::prelude::*;
use varspde::cli::{Expr, Scope};
use varspde::diagnostics::{moment_estimates, tightness_from_norms, MomentSpec};
use varspde::dissipation::{verify_psi_properties, PsiM};
use varspde::linear::{solve_linear, LinearProblem, SolverOptions};
use varspde::noise::NoiseModel;
use varspde::operator::{DenseOperatorPair, RandomSymmetricSpec};
use varspde::quasilinear::project_ball;
use varspde::spectral::{SpaceTag, SpectralTriple, TimeNorm};
use varspde::stats::{jackknife, mean};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn small_problem(seed: u64, steps: usize) -> LinearProblem {
    let triple = SpectralTriple::interval(4).unwrap();
    let spec = RandomSymmetricSpec {
        seed,
        modes: 2,
        ..Default::default()
    };
    let pair = Arc::new(DenseOperatorPair::random_symmetric(&triple, &spec).unwrap());
    LinearProblem::new(
        triple,
        pair,
        NoiseModel::uniform(2, steps, 1.0, seed).unwrap(),
    )
    .with_u0(vec![1.0, -0.5, 0.25, 0.0])
}

proptest! {
    #[test]
    fn projection_is_a_contraction(
        y in prop::collection::vec(-10.0..10.0f64, 3),
        z in prop::collection::vec(-10.0..10.0f64, 3),
        r in 0.1..5.0f64,
    ) {
        let (py, pz) = (project_ball(&y, r), project_ball(&z, r));
        prop_assert!(dist(&py, &pz) <= dist(&y, &z) + 1e-12);
        prop_assert!(dist(&project_ball(&py, r), &py) <= 1e-12 * r);
        prop_assert!(py.iter().map(|v| v * v).sum::<f64>().sqrt() <= r * (1.0 + 1e-15));
        if y.iter().map(|v| v * v).sum::<f64>().sqrt() <= r {
            prop_assert_eq!(py, y);
        }
    }

    #[test]
    fn psi_properties_hold_off_grid(
        q in 2.05..6.0f64,
        m in 1.0..10.0f64,
        xs in prop::collection::vec(-50.0..50.0f64, 1..64),
    ) {
        let p = PsiM::new(q, m).unwrap();
        let r = verify_psi_properties(&p, &xs, 1e-10).unwrap();
        prop_assert!(r.passes(1e-10, 1e-12), "{:?}", r);
        for &x in &xs {
            prop_assert_eq!(p.psi(x), p.psi(-x));
            prop_assert_eq!(p.d1(x), -p.d1(-x));
            prop_assert!(p.d2(x) <= p.d2_bound() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn interpolation_norms_are_ordered(v in prop::collection::vec(-3.0..3.0f64, 6), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let triple = SpectralTriple::interval(6).unwrap();
        let n = |tag| triple.norm_slice(&v, tag).unwrap();
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        prop_assert!(n(SpaceTag::Vdual) <= n(SpaceTag::H) * (1.0 + 1e-12));
        prop_assert!(n(SpaceTag::ComplexInterp(lo)) <= n(SpaceTag::ComplexInterp(hi)) * (1.0 + 1e-12));
        prop_assert!(n(SpaceTag::ComplexInterp(hi)) <= n(SpaceTag::V) * (1.0 + 1e-12));
        prop_assert!((n(SpaceTag::ComplexInterp(0.0)) - n(SpaceTag::H)).abs() <= 1e-12 * (1.0 + n(SpaceTag::H)));
    }

    #[test]
    fn markov_bound_holds_samplewise(
        norms in prop::collection::vec(0.0..20.0f64, 10..200),
        p in 2.5..6.0f64,
    ) {
        let radii = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0];
        let r = tightness_from_norms(&norms, 0.45, p, &radii, 0.05).unwrap();
        for (t, b) in r.tails.iter().zip(&r.bounds) {
            prop_assert!(t.value <= b.value + 1e-12 * b.value.abs().max(1.0));
        }
        prop_assert!(r.tails.windows(2).all(|w| w[1].value <= w[0].value));
    }

    #[test]
    fn jackknife_of_the_mean_matches_the_batch_formula(xs in prop::collection::vec(-5.0..5.0f64, 10..100)) {
        let e = jackknife(&xs, 10, mean);
        prop_assert!((e.value - mean(&xs)).abs() < 1e-12);
        prop_assert!(e.se >= 0.0);
        let constant = vec![xs[0]; xs.len()];
        prop_assert!(jackknife(&constant, 10, mean).se < 1e-12);
    }

    #[test]
    fn expressions_evaluate_like_rust(a in -3.0..3.0f64, b in -3.0..3.0f64, x in 0.0..1.0f64, y in -2.0..2.0f64) {
        let scope = Scope { spatial_dim: 1, components: 1 };
        let e = Expr::parse(&format!("{a} * x[0]^2 - ({b}) * tanh(y) + exp(-y^2) / 2"), scope).unwrap();
        let want = a * x * x - b * y.tanh() + (-y * y).exp() / 2.0;
        prop_assert!((e.eval(0.0, &[x], &[y]) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn power_means_increase_with_p(seed in 0..1000u64) {
        let problem = small_problem(seed, 20);
        let e = solve_linear(&problem, &SolverOptions { paths: 30, ..Default::default() }).unwrap();
        let ps = [1.0, 2.0, 3.0, 4.0];
        for norm in [TimeNorm::sup_h(), TimeNorm::lp_v(2.0)] {
            let specs: Vec<MomentSpec> = ps.iter().map(|&p| MomentSpec { norm, p }).collect();
            let r = moment_estimates(&e, &problem.triple, &specs, None).unwrap();
            for w in r.entries.windows(2) {
                prop_assert!(w[1].norm.value >= w[0].norm.value * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn path_batches_are_consistent(seed in 0..1000u64, split in 1..7usize, workers in 1..4usize) {
        let problem = small_problem(seed, 15);
        let whole = solve_linear(&problem, &SolverOptions { paths: 8, first_path: 0, workers: Some(workers) }).unwrap();
        let head = solve_linear(&problem, &SolverOptions { paths: split, first_path: 0, workers: None }).unwrap();
        let tail = solve_linear(&problem, &SolverOptions { paths: 8 - split, first_path: split as u64, workers: Some(1) }).unwrap();
        let joined: Vec<Vec<f64>> = head.paths.into_iter().chain(tail.paths).collect();
        prop_assert_eq!(whole.paths, joined);
    }
}
