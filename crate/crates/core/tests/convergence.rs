use convexlab::convergence::{convergence_table, Quantity};
use convexlab::mesh::DomainSpec;

#[test]
fn ball_volume_is_second_order() {
    let t = convergence_table(&DomainSpec::ball(3, 0), &[1, 2, 3, 4], Quantity::Volume, 1).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.rows[0].observed_order.is_none());
    let last = t.rows[3].observed_order.unwrap();
    assert!(last >= 1.8, "{:?}", t.rows);
    assert!(t.rows.windows(2).all(|w| w[1].h < w[0].h));
}

#[test]
fn disc_steklov_error_decreases() {
    let t = convergence_table(&DomainSpec::ball(2, 0), &[2, 3, 4, 5], Quantity::SteklovSigma1, 1).unwrap();
    let errs: Vec<f64> = t.rows.iter().map(|r| r.error.unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 0.01);
}

#[test]
fn constant_energy_vanishes() {
    let t = convergence_table(&DomainSpec::ellipsoid(&[1.0, 0.8, 0.6], 0), &[0, 1, 2], Quantity::ConstantEnergy, 1).unwrap();
    for r in &t.rows {
        assert!(r.value.abs() < 1e-12 && r.error.unwrap() < 1e-12);
    }
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn needs_two_levels() {
    assert!(convergence_table(&DomainSpec::ball(2, 0), &[3], Quantity::Volume, 1).is_err());
}
