//! Acceptance criteria, one line per criterion.
//!
//! Run with `cargo test --release -p convexlab --test acceptance -- --nocapture`
//! to see the table.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use convexlab::fem::ScalarField;
use convexlab::mesh::{boundary_geometry, generate_domain, refine, DomainSpec, SimplicialMesh};
use convexlab::nonlinear::{
    beckner_slack, boundary_quotient, escobar_quotient_minimize, extremal_shape, minimize_quotient_with,
    solve_exp_disc_with, BoundaryContext, Classification, Start,
};
use convexlab::poly::{HarmonicIndex, Poly};
use convexlab::spectral::{boundary_laplacian_spectrum, steklov_spectrum_with};
use convexlab::topology::{classify_boundary, cohomology_ranks, consistency_audit, Verdict};
use convexlab::verify::{check_mean_curvature_insufficiency, check_ros, reilly_residual, support_body_sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn mesh(spec: DomainSpec) -> SimplicialMesh {
    generate_domain(&spec).expect("family generates")
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= budget, format!("{:.2}s of {:.0}s", t.as_secs_f64(), budget.as_secs_f64()))
}

fn c01_disc_steklov() -> Outcome {
    let t = Instant::now();
    let disc = mesh(DomainSpec::ball(2, 5));
    let s = steklov_spectrum_with(&disc, 4, 1).unwrap();
    let e = &s.eigenvalues;
    let ok = e[0].abs() < 1e-8
        && (1..=2).all(|i| (e[i] - 1.0).abs() <= 0.01)
        && (3..=4).all(|i| (e[i] - 2.0).abs() <= 0.02);
    let (fast, time) = within_budget(t, Duration::from_secs(5));
    Outcome::new(ok && fast, format!("σ₁..σ₄ = {:.5} {:.5} {:.5} {:.5}; {time}", e[1], e[2], e[3], e[4]))
}

fn c02_sphere_laplacian() -> Outcome {
    let t = Instant::now();
    let ball = mesh(DomainSpec::ball(3, 3));
    let s = boundary_laplacian_spectrum(&ball, 4).unwrap();
    let e = &s.eigenvalues;
    let triple = (1..=3).all(|i| (e[i] - 2.0).abs() <= 0.02);
    let separated = e[4] > 2.0 * 1.5;
    let (fast, time) = within_budget(t, Duration::from_secs(30));
    Outcome::new(
        triple && separated && fast,
        format!("λ₁..λ₃ = {:.5} {:.5} {:.5}, λ₄ = {:.4}; {time}", e[1], e[2], e[3], e[4]),
    )
}

fn c03_ellipsoid_eigenvalue() -> Outcome {
    let m = mesh(DomainSpec::ellipsoid(&[0.9, 0.85, 0.82], 3));
    let geo = boundary_geometry(&m).unwrap();
    let pi_min = geo.pi_min.iter().copied().fold(f64::INFINITY, f64::min);
    let e = boundary_laplacian_spectrum(&m, 3).unwrap().eigenvalues;
    Outcome::new(
        geo.analytic && pi_min >= 1.0 && rel(pi_min, 1.0123) < 1e-3 && e[1] >= 2.0 - 0.05,
        format!("Π_min = {pi_min:.5}, λ₁ = {:.5} ≥ 1.95", e[1]),
    )
}

fn c04_reilly() -> Outcome {
    let target = 8.0 * PI;
    let ball = mesh(DomainSpec::ball(3, 4));
    let quad = reilly_residual(&ball, &Poly::radius_squared(3).scale(0.5)).unwrap();
    let lin = reilly_residual(&ball, &Poly::coord(0)).unwrap();
    let quad_ok = rel(quad.lhs, target) <= 0.01 && rel(quad.rhs, target) <= 0.01;
    let lin_ok = quad.lhs.is_finite() && lin.lhs.abs() <= 0.01 * target && lin.rhs.abs() <= 0.01 * target;
    let residuals: Vec<f64> = (2..=4)
        .map(|l| reilly_residual(&mesh(DomainSpec::ball(3, l)), &Poly::radius_squared(3).scale(0.5)).unwrap().slack.abs())
        .collect();
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| (1.7..=2.3).contains(o));
    Outcome::new(
        quad_ok && lin_ok && order_ok,
        format!(
            "|x|²/2: {:.4} vs {:.4} (8π = {target:.4}); x₁: {:.1e} vs {:.1e}; orders {:.2} {:.2}",
            quad.lhs, quad.rhs, lin.lhs, lin.rhs, orders[0], orders[1]
        ),
    )
}

fn c05_ros() -> Outcome {
    let ball = check_ros(&mesh(DomainSpec::ball(3, 4))).unwrap();
    let ball_ok = rel(ball.lhs, 2.0 * PI) <= 0.01 && rel(ball.rhs, 2.0 * PI) <= 0.01;
    let ell = check_ros(&mesh(DomainSpec::ellipsoid(&[1.0, 0.8, 0.6], 3))).unwrap();
    let torus = check_ros(&mesh(DomainSpec::solid_torus(5.0, 3))).unwrap();
    let torus_ok = torus.slack > 0.0 && rel(torus.lhs, 7.5 * PI) <= 0.02 && rel(torus.rhs, 10.0 * PI) <= 0.02;
    Outcome::new(
        ball_ok && ell.slack > 0.0 && torus_ok,
        format!(
            "ball {:.4}/{:.4} (2π); ellipsoid slack {:.4}; torus L=5 {:.3} < {:.3}",
            ball.lhs, ball.rhs, ell.slack, torus.lhs, torus.rhs
        ),
    )
}

fn c06_area_volume() -> Outcome {
    let ball = mesh(DomainSpec::ball(3, 4)).measure();
    let ball_ok = rel(ball.boundary_area, 4.0 * PI) <= 0.01 && rel(ball.volume, 4.0 * PI / 3.0) <= 0.01;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..50 {
        let m = support_body_sample(SEED * 1000 + k, 3).unwrap();
        worst = worst.max(m.measure().boundary_area - 4.0 * PI);
    }
    Outcome::new(
        ball_ok && worst <= 1e-6,
        format!("ball A = {:.4}, V = {:.4}; 50 support bodies: max A − 4π = {worst:.4}", ball.boundary_area, ball.volume),
    )
}

/// Criterion 7 runs; returns the outcome and the serialized runs.
fn c07_subcritical_constancy() -> (Outcome, Vec<String>) {
    let t = Instant::now();
    let mut reports = Vec::new();
    let mut ok = true;
    let mut detail = Vec::new();
    let cases: [(usize, usize, f64); 4] = [(2, 5, 2.0), (3, 3, 1.5), (3, 3, 2.0), (3, 3, 2.5)];
    for (dim, level, q) in cases {
        let m = mesh(DomainSpec::ball(dim, level));
        let ctx = BoundaryContext::new(&m, 1).unwrap();
        let run = minimize_quotient_with(&ctx, q, 8, SEED, 1).unwrap();
        let area = if dim == 2 { 2.0 * PI } else { 4.0 * PI };
        let expected = area.powf((q - 1.0) / (q + 1.0));
        let value = run.quotient_value.unwrap();
        ok &= run.classification == Classification::Constant && rel(value, expected) <= 0.01;
        detail.push(format!("n={dim} q={q}: {value:.4}/{expected:.4} {:?}", run.classification));
        reports.push(run.to_json().unwrap());
    }
    let (fast, time) = within_budget(t, Duration::from_secs(120));
    detail.push(time);
    (Outcome::new(ok && fast, detail.join("; ")), reports)
}

fn c08_critical_family() -> Outcome {
    let ball = mesh(DomainSpec::ball(3, 4));
    let target = (4.0 * PI).sqrt();
    let values: Vec<f64> = [0.0, 0.25, 0.5]
        .iter()
        .map(|&s| {
            let a = [s, 0.0, 0.0];
            let f = ScalarField::interpolate_boundary(&ball, |x| extremal_shape(3, &a, x).unwrap());
            boundary_quotient(&ball, &f, 3.0).unwrap()
        })
        .collect();
    Outcome::new(
        values.iter().all(|v| rel(*v, target) <= 0.01),
        format!("|a| = 0, 0.25, 0.5: {:.4} {:.4} {:.4} vs {target:.4}", values[0], values[1], values[2]),
    )
}

fn c09_exp_disc() -> (Outcome, Vec<String>) {
    let t = Instant::now();
    let disc = mesh(DomainSpec::ball(2, 5));
    let ctx = BoundaryContext::new(&disc, 1).unwrap();
    let closed = solve_exp_disc_with(&ctx, 1.0, &Start::UaTrace(vec![0.4, 0.0])).unwrap();
    let mut reports = vec![closed.to_json().unwrap()];
    let mut ok = closed.residual <= 1e-6 && closed.classification != Classification::NoConverge;
    let mut worst_ratio = 0.0f64;
    let mut worst_dev = 0.0f64;
    for k in 0..8 {
        let run = solve_exp_disc_with(&ctx, 0.5, &Start::Random(SEED + k)).unwrap();
        ok &= run.classification == Classification::Constant && run.constancy_ratio < 1e-4;
        worst_ratio = worst_ratio.max(run.constancy_ratio);
        worst_dev = run.final_boundary_values.iter().fold(worst_dev, |m, v| m.max((v - 0.5f64.ln()).abs()));
        reports.push(run.to_json().unwrap());
    }
    ok &= worst_dev < 1e-6;
    let (fast, time) = within_budget(t, Duration::from_secs(120));
    (
        Outcome::new(
            ok && fast,
            format!(
                "λ=1, a=0.4 residual {:.1e}; λ=0.5: max |u − log 0.5| = {worst_dev:.1e}, max ratio {worst_ratio:.1e}; {time}",
                closed.residual
            ),
        ),
        reports,
    )
}

fn c10_beckner() -> Outcome {
    let t = Instant::now();
    let indices: Vec<HarmonicIndex> = (0..=4).flat_map(|l| HarmonicIndex::of_degree(3, l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let coeffs: Vec<(HarmonicIndex, f64)> = indices.iter().map(|&i| (i, rng.random_range(-1.0..1.0))).collect();
        for q in [2.0, 3.0] {
            worst = worst.min(beckner_slack(3, &coeffs, q).unwrap().slack);
        }
    }
    let mut constant_gap = 0.0f64;
    for c in [0.3, 1.0, 4.0] {
        for q in [2.0, 3.0] {
            constant_gap = constant_gap.max(beckner_slack(3, &[(HarmonicIndex::new(0, 0), c)], q).unwrap().slack.abs());
        }
    }
    let (fast, time) = within_budget(t, Duration::from_secs(10));
    Outcome::new(
        worst >= -1e-8 && constant_gap <= 1e-9 && fast,
        format!("min slack {worst:.3e}; constants |slack| ≤ {constant_gap:.1e}; {time}"),
    )
}

fn c11_escobar() -> Outcome {
    let ball = mesh(DomainSpec::ball(3, 3));
    let run = escobar_quotient_minimize(&ball, 4, SEED).unwrap();
    let q = run.quotient_value.unwrap();
    let target = 4.0 * (4.0 * PI).sqrt();
    Outcome::new(rel(q, target) <= 0.02, format!("Q = {q:.4} vs {target:.4}"))
}

fn c12_topology() -> Outcome {
    let cases = [
        ("ball", DomainSpec::ball(3, 1), (0, 0, 0)),
        ("ellipsoid", DomainSpec::ellipsoid(&[1.0, 0.8, 0.6], 1), (0, 0, 0)),
        ("solid torus", DomainSpec::solid_torus(3.0, 0), (1, 0, 1)),
        ("cap 0.8", DomainSpec::cap(3, 0.8, 1), (0, 0, 0)),
        ("cap π/2", DomainSpec::cap(3, PI / 2.0, 1), (0, 0, 0)),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, spec, (b1, b1_rel, genus)) in cases {
        let m = mesh(spec);
        let r = cohomology_ranks(&m).unwrap();
        let g = classify_boundary(&m).unwrap();
        let audit = consistency_audit(&m).unwrap();
        let clean = audit.iter().all(|e| e.verdict != Verdict::Violated);
        let fine = cohomology_ranks(&refine(&m).unwrap()).unwrap();
        let stable = fine.betti_absolute == r.betti_absolute && fine.betti_relative == r.betti_relative;
        let matches = r.b1_absolute == b1 && r.b1_relative == b1_rel && g.len() == 1 && g[0].genus == genus;
        ok &= matches && clean && stable;
        detail.push(format!("{name} ({},{},g{})", r.b1_absolute, r.b1_relative, g[0].genus));
    }
    Outcome::new(ok, detail.join(", "))
}

fn c13_torus_counterexample() -> Outcome {
    let (check, rows) = check_mean_curvature_insufficiency(&[1.0, 3.0, 10.0], 2).unwrap();
    let mut ok = check.pass;
    for r in &rows {
        ok &= rel(r.boundary_area, 2.0 * PI * r.length) <= 0.02;
        ok &= (r.mean_curvature_min - 1.0).abs() < 1e-12 && (r.mean_curvature_max - 1.0).abs() < 1e-12;
        if r.length >= 3.0 {
            ok &= r.boundary_area > 4.0 * PI;
        }
    }
    let areas: Vec<String> = rows.iter().map(|r| format!("L={} A={:.3}", r.length, r.boundary_area)).collect();
    Outcome::new(ok, format!("H ≡ 1; {} (4π = {:.3})", areas.join(", "), 4.0 * PI))
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let time = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };
    let simple: [(usize, &str, fn() -> Outcome); 6] = [
        (1, "Steklov spectrum of the disc", c01_disc_steklov),
        (2, "boundary Laplacian of the unit ball", c02_sphere_laplacian),
        (3, "eigenvalue bound on an ellipsoid", c03_ellipsoid_eigenvalue),
        (4, "Reilly identity on the ball", c04_reilly),
        (5, "Ros inequality", c05_ros),
        (6, "area and volume bounds", c06_area_volume),
    ];
    for (id, name, f) in simple {
        let (o, d) = time(&f);
        results.push((id, name, o, d));
    }

    let t = Instant::now();
    let (o7, first7) = c07_subcritical_constancy();
    results.push((7, "subcritical minimizers are constant", o7, t.elapsed()));
    let (o, d) = time(&c08_critical_family);
    results.push((8, "critical family quotient", o, d));
    let t = Instant::now();
    let (o9, first9) = c09_exp_disc();
    results.push((9, "exponential problem on the disc", o9, t.elapsed()));

    let rest: [(usize, &str, fn() -> Outcome); 4] = [
        (10, "Beckner inequality", c10_beckner),
        (11, "Escobar quotient of the ball", c11_escobar),
        (12, "topology audits", c12_topology),
        (13, "mean curvature alone does not bound the area", c13_torus_counterexample),
    ];
    for (id, name, f) in rest {
        let (o, d) = time(&f);
        results.push((id, name, o, d));
    }

    let t = Instant::now();
    let (_, second7) = c07_subcritical_constancy();
    let (_, second9) = c09_exp_disc();
    let same = first7 == second7 && first9 == second9;
    let detail = format!("{} reports compared byte for byte", first7.len() + first9.len());
    results.push((14, "repeated runs are byte-identical", Outcome::new(same, detail), t.elapsed()));

    for (id, name, o, d) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {id:>2} {name}: {} ({:.2}s)", o.detail, d.as_secs_f64());
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
