use std::f64::consts::PI;

use convexlab::fem::ScalarField;
use convexlab::mesh::{generate_domain, DomainSpec};
use convexlab::nonlinear::{
    beckner_slack, boundary_quotient, disc_extremal, escobar_quotient_minimize, extremal_shape, minimize_quotient,
    minimize_quotient_with, solve_exp_disc, solve_exp_disc_with, solve_semilinear, solve_semilinear_with,
    sobolev_check, BoundaryContext, Classification, Start,
};
use convexlab::poly::{HarmonicIndex, Poly};
use convexlab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn quotient_of_constants() {
    let disc = generate_domain(&DomainSpec::ball(2, 5)).unwrap();
    let one = ScalarField::interpolate_boundary(&disc, |_| 1.0);
    let q = boundary_quotient(&disc, &one, 2.0).unwrap();
    assert!(rel(q, (2.0 * PI).powf(1.0 / 3.0)) < 0.01, "{q}");
    let two = ScalarField::interpolate_boundary(&disc, |_| 2.0);
    assert!(rel(boundary_quotient(&disc, &two, 2.0).unwrap(), q) < 1e-10);

    let ball = generate_domain(&DomainSpec::ball(3, 3)).unwrap();
    let one = ScalarField::interpolate_boundary(&ball, |_| 1.0);
    let q = boundary_quotient(&ball, &one, 3.0).unwrap();
    assert!(rel(q, (4.0 * PI).sqrt()) < 0.01, "{q}");
    assert!(matches!(boundary_quotient(&ball, &one, 3.5), Err(Error::DomainViolation(_))));
    let zero = ScalarField::interpolate_boundary(&ball, |_| 0.0);
    assert!(boundary_quotient(&ball, &zero, 2.0).is_err());
}

#[test]
fn dense_and_sparse_quotients_agree() {
    let ball = generate_domain(&DomainSpec::ball(3, 2)).unwrap();
    let ctx = BoundaryContext::new(&ball, 1).unwrap();
    let f = ScalarField::interpolate_boundary(&ball, |x| 1.0 + 0.3 * x[0] + 0.2 * x[1] * x[2]);
    let a = boundary_quotient(&ball, &f, 2.5).unwrap();
    let b = ctx.trace_quotient(&f.values, 2.5).unwrap();
    assert!(rel(a, b) < 1e-9);
}

#[test]
fn disc_minimizer_is_constant() {
    let disc = generate_domain(&DomainSpec::ball(2, 5)).unwrap();
    let run = minimize_quotient(&disc, 2.0, 8, 7).unwrap();
    assert_eq!(run.classification, Classification::Constant);
    assert!(rel(run.quotient_value.unwrap(), (2.0 * PI).powf(1.0 / 3.0)) < 0.01);
    assert!(run.residual <= 1e-8);
    assert_eq!(run.starts.len(), 9);
    assert!(run.starts.iter().all(|s| s.classification == Classification::Constant));
}

#[test]
fn random_perturbations_never_beat_the_constant() {
    let disc = generate_domain(&DomainSpec::ball(2, 4)).unwrap();
    let ctx = BoundaryContext::new(&disc, 1).unwrap();
    let base = ctx.trace_quotient(&vec![1.0; ctx.len()], 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let eps: f64 = rng.random_range(0.01..0.5);
        let f: Vec<f64> = (0..ctx.len()).map(|_| 1.0 + eps * rng.random_range(-1.0..1.0)).collect();
        assert!(ctx.trace_quotient(&f, 2.0).unwrap() >= base);
    }
}

#[test]
fn ball_minimizers_are_constant() {
    let ball = generate_domain(&DomainSpec::ball(3, 3)).unwrap();
    let ctx = BoundaryContext::new(&ball, 1).unwrap();
    for q in [1.5, 2.0, 2.5] {
        let run = minimize_quotient_with(&ctx, q, 8, 7, 1).unwrap();
        assert_eq!(run.classification, Classification::Constant, "q = {q}");
        let expect = (4.0 * PI).powf((q - 1.0) / (q + 1.0));
        assert!(rel(run.quotient_value.unwrap(), expect) < 0.01);
        for w in run.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        // the minimizer solves the boundary problem with λ = 1/(q−1)
        assert!(ctx.semilinear_residual(&run.final_boundary_values, q, 1.0 / (q - 1.0)) <= 1e-6);
        let lambda: f64 = 1.0 / (q - 1.0);
        let c = lambda.powf(1.0 / (q - 1.0));
        assert!(run.final_boundary_values.iter().all(|v| rel(*v, c) < 1e-6));
        // the trace inequality at the minimizer
        let f = &run.final_boundary_values;
        let p = q + 1.0;
        let lhs = ctx.area().powf((q - 1.0) / p) * ctx.integral(f, |x| x.abs().powf(p)).powf(2.0 / p);
        let rhs = ctx.trace_quotient(f, q).unwrap() * ctx.integral(f, |x| x.abs().powf(p)).powf(2.0 / p);
        assert!(lhs <= rhs * 1.01);
    }
}

#[test]
fn threads_do_not_change_the_result() {
    let ball = generate_domain(&DomainSpec::ball(3, 2)).unwrap();
    let ctx = BoundaryContext::new(&ball, 1).unwrap();
    let one = minimize_quotient_with(&ctx, 2.0, 4, 11, 1).unwrap();
    let three = minimize_quotient_with(&ctx, 2.0, 4, 11, 3).unwrap();
    assert_eq!(one.to_json().unwrap(), three.to_json().unwrap());
}

#[test]
fn ellipsoid_minimizer_is_constant() {
    let m = generate_domain(&DomainSpec::ellipsoid(&[0.9, 0.85, 0.82], 2)).unwrap();
    let run = minimize_quotient(&m, 2.0, 4, 7).unwrap();
    assert_eq!(run.classification, Classification::Constant);
}

#[test]
fn critical_family_quotient() {
    let ball = generate_domain(&DomainSpec::ball(3, 4)).unwrap();
    let target = (4.0 * PI).sqrt();
    for s in [0.0, 0.25, 0.5] {
        let a = [s, 0.0, 0.0];
        let f = ScalarField::interpolate_boundary(&ball, |x| extremal_shape(3, &a, x).unwrap());
        let q = boundary_quotient(&ball, &f, 3.0).unwrap();
        assert!(rel(q, target) < 0.01, "|a| = {s}: {q}");
    }
}

#[test]
fn exp_disc_flat_direction_and_constants() {
    let disc = generate_domain(&DomainSpec::ball(2, 5)).unwrap();
    let ctx = BoundaryContext::new(&disc, 1).unwrap();
    let zero = solve_exp_disc_with(&ctx, 1.0, &Start::Constant).unwrap();
    assert_eq!(zero.iterations, 0);
    assert!(zero.residual <= 1e-9);
    assert!(zero.flat_direction.unwrap() <= 1e-3);

    for k in 0..8u64 {
        let r = solve_exp_disc_with(&ctx, 0.5, &Start::Random(100 + k)).unwrap();
        assert_eq!(r.classification, Classification::Constant);
        assert!(r.final_boundary_values.iter().all(|v| (v - 0.5f64.ln()).abs() < 1e-8));
    }
    let square = generate_domain(&DomainSpec::ball(3, 1)).unwrap();
    assert!(matches!(solve_exp_disc(&square, 1.0, &Start::Constant), Err(Error::UnsupportedDimension { .. })));
}

#[test]
fn exp_disc_closed_form() {
    let a = [0.4, 0.0];
    let mut errs = Vec::new();
    for level in 3..=5 {
        let disc = generate_domain(&DomainSpec::ball(2, level)).unwrap();
        let ctx = BoundaryContext::new(&disc, 1).unwrap();
        let f: Vec<f64> = ctx.points().iter().map(|z| disc_extremal(&a, z).unwrap()).collect();
        errs.push(ctx.exp_residual(&f, 1.0));
    }
    assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");

    let disc = generate_domain(&DomainSpec::ball(2, 5)).unwrap();
    let run = solve_exp_disc(&disc, 1.0, &Start::UaTrace(a.to_vec())).unwrap();
    assert!(run.residual <= 1e-6);
    assert_ne!(run.classification, Classification::NoConverge);
}

#[test]
fn semilinear_solves() {
    let ball = generate_domain(&DomainSpec::ball(3, 3)).unwrap();
    let ctx = BoundaryContext::new(&ball, 1).unwrap();
    let c = solve_semilinear_with(&ctx, 3.0, 0.5, &Start::Constant).unwrap();
    assert_eq!(c.iterations, 0);
    assert!(c.residual <= 1e-9);
    assert!(c.final_boundary_values.iter().all(|v| (v - 0.5f64.sqrt()).abs() < 1e-15));

    // the discrete critical family is not flat: from a u_a trace Newton
    // travels back to the constant solution
    let run = solve_semilinear_with(&ctx, 3.0, 0.5, &Start::UaTrace(vec![0.3, 0.0, 0.0])).unwrap();
    assert!(run.residual <= 1e-6);
    assert!(run.final_boundary_values.iter().all(|v| *v > 0.0));
    assert!(run.flat_direction.unwrap() < 0.01);

    let sub = solve_semilinear_with(&ctx, 2.0, 1.0, &Start::Random(4)).unwrap();
    assert_eq!(sub.classification, Classification::Constant);

    let mut bad = vec![1.0; ctx.len()];
    bad[0] = -1.0;
    assert!(matches!(
        solve_semilinear_with(&ctx, 2.0, 1.0, &Start::Custom(ScalarField::boundary(bad))),
        Err(Error::NonPositiveIterate)
    ));
    let disc = generate_domain(&DomainSpec::ball(2, 2)).unwrap();
    assert!(matches!(solve_semilinear(&disc, 2.0, 1.0, &Start::Constant), Err(Error::UnsupportedExponentForm(2))));
}

#[test]
fn escobar_on_ball() {
    let ball = generate_domain(&DomainSpec::ball(3, 3)).unwrap();
    let run = escobar_quotient_minimize(&ball, 4, 3).unwrap();
    let q = run.quotient_value.unwrap();
    assert!(rel(q, 4.0 * (4.0 * PI).sqrt()) < 0.02);
    // no worse than the constant start, and above the area bound
    assert!(q <= run.starts[0].quotient_value * (1.0 + 1e-12));
    let area = ball.measure().boundary_area;
    assert!(q >= 4.0 * area.sqrt() * 0.98);
    let cap = generate_domain(&DomainSpec::cap(3, 1.0, 1)).unwrap();
    assert!(matches!(escobar_quotient_minimize(&cap, 1, 1), Err(Error::HypothesisNotMet(_))));
}

#[test]
fn beckner_first_harmonic() {
    let c1 = (4.0 * PI / 3.0).sqrt();
    let s = beckner_slack(3, &[(HarmonicIndex::new(1, 1), c1)], 3.0).unwrap();
    assert!(rel(s.lhs, 4.0 * PI / 5f64.sqrt()) < 1e-8, "{s:?}");
    assert!(rel(s.rhs, 4.0 * PI) < 1e-12);
    assert!((s.slack - (4.0 * PI - 4.0 * PI / 5f64.sqrt())).abs() < 1e-7);
}

#[test]
fn sobolev_on_caps() {
    let hemi = generate_domain(&DomainSpec::cap(3, PI / 2.0, 2)).unwrap();
    let s = sobolev_check(&hemi, &Poly::constant(1.7), 3.0).unwrap();
    assert!(s.slack.abs() <= 1e-12 * s.rhs);
    let s = sobolev_check(&hemi, &Poly::coord(0), 3.0).unwrap();
    assert!(s.slack >= -0.02 * s.rhs, "{s:?}");
    let ball = generate_domain(&DomainSpec::ball(3, 1)).unwrap();
    assert!(matches!(sobolev_check(&ball, &Poly::coord(0), 3.0), Err(Error::HypothesisNotMet(_))));
    let wide = generate_domain(&DomainSpec::cap(3, 2.0, 1)).unwrap();
    assert!(matches!(sobolev_check(&wide, &Poly::coord(0), 3.0), Err(Error::HypothesisNotMet(_))));
}

#[test]
fn sobolev_random_quadratics() {
    let cap = generate_domain(&DomainSpec::cap(3, 1.0, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let mut u = Poly::constant(rng.random_range(-1.0..1.0));
        for i in 0..4 {
            u = u.add(&Poly::coord(i).scale(rng.random_range(-1.0..1.0)));
            for j in i..4 {
                u = u.add(&Poly::coord(i).mul(&Poly::coord(j)).scale(rng.random_range(-1.0..1.0)));
            }
        }
        let q = rng.random_range(2.01..5.0);
        let s = sobolev_check(&cap, &u, q).unwrap();
        assert!(s.slack >= -0.02 * s.rhs, "{s:?}");
    }
}

fn coefficient_vector() -> impl Strategy<Value = Vec<(HarmonicIndex, f64)>> {
    let indices: Vec<HarmonicIndex> = (0..=4).flat_map(|l| HarmonicIndex::of_degree(3, l)).collect();
    prop::collection::vec(-1.0f64..1.0, indices.len())
        .prop_map(move |c| indices.iter().copied().zip(c).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn beckner_holds(coeffs in coefficient_vector(), q in prop::sample::select(vec![2.0, 3.0])) {
        let s = beckner_slack(3, &coeffs, q).unwrap();
        prop_assert!(s.slack >= -1e-8, "{:?}", s);
    }

    #[test]
    fn quotient_is_scale_invariant(c in prop::sample::select(vec![-3.0, -0.2, 0.01, 5.0, 1e3]), w in -1.0f64..1.0) {
        let ball = generate_domain(&DomainSpec::ball(3, 1)).unwrap();
        let f = ScalarField::interpolate_boundary(&ball, |x| 1.0 + w * x[0] * x[1] + 0.5 * x[2]);
        let g = ScalarField::boundary(f.values.iter().map(|v| c * v).collect());
        let a = boundary_quotient(&ball, &f, 2.0).unwrap();
        let b = boundary_quotient(&ball, &g, 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }
}
