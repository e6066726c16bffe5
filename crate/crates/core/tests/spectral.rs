use std::f64::consts::PI;
use std::time::Instant;

use convexlab::fem::{assemble_boundary_mass, DtnOperator};
use convexlab::mesh::{generate_domain, DomainSpec};
use convexlab::poly::HarmonicIndex;
use convexlab::spectral::{ball_harmonic_oracle, boundary_laplacian_spectrum, rayleigh, steklov_spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn disc_steklov() {
    let t = Instant::now();
    let m = generate_domain(&DomainSpec::ball(2, 5)).unwrap();
    let s = steklov_spectrum(&m, 6).unwrap();
    eprintln!("disc steklov {:?} in {:?}", s.eigenvalues, t.elapsed());
    let expect = [0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
    for (l, e) in s.eigenvalues.iter().zip(expect) {
        assert!((l - e).abs() < 1e-2 * e.max(1.0), "{l} vs {e}");
    }
    let c = &s.eigenvectors[0].values;
    assert!(c.iter().all(|v| (v - c[0]).abs() < 1e-8));
    for (l, r) in s.eigenvalues.iter().zip(&s.residuals) {
        assert!(*r <= 1e-6 * (1.0 + l.abs()));
    }
}

#[test]
fn ball_steklov_dense_and_lanczos() {
    for level in [3, 4] {
        let t = Instant::now();
        let m = generate_domain(&DomainSpec::ball(3, level)).unwrap();
        let s = steklov_spectrum(&m, 4).unwrap();
        eprintln!("ball L{level} steklov {:?} in {:?}", s.eigenvalues, t.elapsed());
        let expect = [0.0, 1.0, 1.0, 1.0, 2.0];
        for (l, e) in s.eigenvalues.iter().zip(expect) {
            assert!((l - e).abs() < 2e-2 * e.max(1.0), "{l} vs {e}");
        }
    }
}

#[test]
fn boundary_laplacians() {
    let disc = generate_domain(&DomainSpec::ball(2, 5)).unwrap();
    let s = boundary_laplacian_spectrum(&disc, 4).unwrap();
    assert!(s.eigenvalues[0].abs() < 1e-10);
    assert!((s.eigenvalues[1] - 1.0).abs() < 1e-2 && (s.eigenvalues[2] - 1.0).abs() < 1e-2);

    let t = Instant::now();
    let ball = generate_domain(&DomainSpec::ball(3, 3)).unwrap();
    let s = boundary_laplacian_spectrum(&ball, 4).unwrap();
    eprintln!("S2 {:?} in {:?} clusters {:?}", s.eigenvalues, t.elapsed(), s.clusters);
    for l in &s.eigenvalues[1..4] {
        assert!((l - 2.0).abs() < 0.02, "{l}");
    }

    let fine = generate_domain(&DomainSpec::ball(3, 4)).unwrap();
    let t = Instant::now();
    let s = boundary_laplacian_spectrum(&fine, 4).unwrap();
    eprintln!("S2 fine {:?} in {:?}", s.eigenvalues, t.elapsed());
    for l in &s.eigenvalues[1..4] {
        assert!((l - 2.0).abs() < 0.01, "{l}");
    }

    let ell = generate_domain(&DomainSpec::ellipsoid(&[0.9, 0.85, 0.82], 3)).unwrap();
    let s = boundary_laplacian_spectrum(&ell, 1).unwrap();
    eprintln!("ellipsoid {:?}", s.eigenvalues);
    assert!(s.eigenvalues[1] >= 2.0 - 0.05);
}

#[test]
fn min_max_consistency() {
    let m = generate_domain(&DomainSpec::ball(2, 4)).unwrap();
    let s = steklov_spectrum(&m, 1).unwrap();
    let sigma1 = s.eigenvalues[1];
    let dtn = DtnOperator::new(&m).unwrap();
    let a = dtn.densify(1).unwrap();
    let b = assemble_boundary_mass(&m).to_dense();
    let ones = nalgebra::DVector::from_element(dtn.len(), 1.0);
    let mean_w = (&b * &ones).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let mut f: Vec<f64> = (0..dtn.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        // remove the M-weighted mean so f ⟂_M 1
        let fv = nalgebra::DVector::from_column_slice(&f);
        let c = (ones.transpose() * &b * &fv)[(0, 0)] / mean_w;
        f.iter_mut().for_each(|x| *x -= c);
        assert!(rayleigh(&a, &b, &f) >= sigma1 - 1e-8);
    }
}

#[test]
fn steklov_converges_to_oracle() {
    let mut errs = Vec::new();
    for level in 1..=3 {
        let m = generate_domain(&DomainSpec::ball(3, level)).unwrap();
        let s = steklov_spectrum(&m, 4).unwrap();
        errs.push((s.eigenvalues[4] - 2.0).abs());
    }
    eprintln!("{errs:?}");
    assert!(errs[0] / errs[1] >= 2.0 && errs[1] / errs[2] >= 2.0, "{errs:?}");
}

#[test]
fn oracle_steklov_image() {
    let o = ball_harmonic_oracle(3, &[(HarmonicIndex::new(2, 1), 0.7), (HarmonicIndex::new(0, 0), 1.0)]).unwrap();
    let img = o.steklov_image();
    assert_eq!(img, vec![(HarmonicIndex::new(0, 0), 0.0), (HarmonicIndex::new(2, 1), 1.4)]);
    // F ≡ 1 on the circle: c₀ = √(2π)
    let o = ball_harmonic_oracle(2, &[(HarmonicIndex::new(0, 0), (2.0 * PI).sqrt())]).unwrap();
    assert!((o.boundary_l2() - 2.0 * PI).abs() < 1e-13);
    assert!((o.boundary_lp(3.0, 1e-10).unwrap() - 2.0 * PI).abs() < 1e-12);
}
