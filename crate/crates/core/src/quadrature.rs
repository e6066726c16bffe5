//! Quadrature rules: adaptive Gauss–Kronrod on intervals, nested adaptive
//! integration over spheres, and low-order rules on simplices.

use std::f64::consts::PI;

use crate::error::{Error, Result};

// Kronrod 15-point nodes/weights with embedded Gauss 7-point weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|s| s.2).sum();
        let err: f64 = intervals.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if intervals.len() >= max_intervals {
            return Err(Error::QuadratureFailure { achieved: err / total.abs().max(f64::MIN_POSITIVE) });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Integral of `f` over the unit sphere S^{dim-1} ⊂ R^dim, dim ∈ {2, 3}.
///
/// For dim = 3 the integral is nested: z = cos θ outer, azimuth inner.
pub fn integrate_sphere<F: Fn(&[f64]) -> f64>(dim: usize, f: F, rel_tol: f64) -> Result<f64> {
    match dim {
        2 => integrate_adaptive(|t| f(&[t.cos(), t.sin()]), 0.0, 2.0 * PI, rel_tol, 1e-300, 4000),
        3 => {
            // Coarse midpoint grid of |f| sets the absolute floor for near-cancelling integrands.
            let (nz, nphi) = (48, 96);
            let mut scale = 0.0;
            for i in 0..nz {
                let z = -1.0 + (i as f64 + 0.5) * 2.0 / nz as f64;
                let s = (1.0 - z * z).sqrt();
                for j in 0..nphi {
                    let phi = (j as f64 + 0.5) * 2.0 * PI / nphi as f64;
                    scale += f(&[s * phi.cos(), s * phi.sin(), z]).abs();
                }
            }
            scale *= 4.0 * PI / (nz * nphi) as f64;
            let abs_tol = rel_tol * scale * 1e-3;
            let mut inner_fail: Option<f64> = None;
            let outer = integrate_adaptive(
                |z| {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    match integrate_adaptive(
                        |phi| f(&[s * phi.cos(), s * phi.sin(), z]),
                        0.0,
                        2.0 * PI,
                        rel_tol * 0.1,
                        abs_tol,
                        2000,
                    ) {
                        Ok(v) => v,
                        Err(Error::QuadratureFailure { achieved }) => {
                            inner_fail = Some(inner_fail.unwrap_or(0.0).max(achieved));
                            0.0
                        }
                        Err(_) => 0.0,
                    }
                },
                -1.0,
                1.0,
                rel_tol,
                abs_tol,
                2000,
            )?;
            if let Some(achieved) = inner_fail {
                return Err(Error::QuadratureFailure { achieved });
            }
            Ok(outer)
        }
        d => Err(Error::UnsupportedDimension { dim: d, what: "sphere quadrature".into() }),
    }
}

/// Degree-2 quadrature on the reference `dim`-simplex in barycentric form:
/// `dim + 1` points of equal weight `1/(dim+1)` (weights sum to one).
pub fn simplex_degree2(dim: usize) -> Vec<(Vec<f64>, f64)> {
    let n = dim as f64;
    let small = (n + 2.0 - (n + 2.0).sqrt()) / ((n + 1.0) * (n + 2.0));
    let large = 1.0 - n * small;
    (0..=dim)
        .map(|k| {
            let bary = (0..=dim).map(|j| if j == k { large } else { small }).collect();
            (bary, 1.0 / (n + 1.0))
        })
        .collect()
}

/// Closed-form `∫_{S^2} x^a y^b z^c` for non-negative integer exponents.
pub fn sphere_monomial_integral(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    // 2 Γ(α)Γ(β)Γ(γ)/Γ(α+β+γ) with α = (a+1)/2 etc.
    let g = |twice: u32| gamma_half(twice);
    2.0 * g(a + 1) * g(b + 1) * g(c + 1) / g(a + b + c + 3)
}

/// Γ(k/2) for positive integer k.
fn gamma_half(k: u32) -> f64 {
    if k % 2 == 0 {
        (1..k / 2).map(|v| v as f64).product()
    } else {
        let mut v = PI.sqrt();
        let mut x = 0.5;
        while x < k as f64 / 2.0 - 0.25 {
            v *= x;
            x += 1.0;
        }
        v
    }
}

/// Surface measure of the unit sphere S^{n-1} ⊂ R^n.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n as u32)
}
