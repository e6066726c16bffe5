//! Convex bodies given by a support function `h = h₀ + Σ ε Y_ℓm` on the unit
//! sphere.
//!
//! The degree-one homogeneous extension is
//! `H(x) = h₀|x| + Σ ε P_ℓm(x) |x|^{1−ℓ}` with `P_ℓm` the solid harmonic. The
//! boundary point with outer normal `ξ` is `∇H(ξ)`, and the principal radii
//! of curvature there are the tangential eigenvalues of `D²H(ξ)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::poly::{solid_harmonic, HarmonicIndex, PolyJet};

use super::family::{small_symmetric_eigenvalues, tangent_basis};

#[derive(Clone, Debug)]
pub struct SupportFunction {
    dim: usize,
    h0: f64,
    coeffs: Vec<(HarmonicIndex, f64)>,
    terms: Vec<(PolyJet, f64, f64)>,
}

impl SupportFunction {
    pub fn new(dim: usize, h0: f64, coeffs: &[(HarmonicIndex, f64)]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension { dim, what: "support body".into() });
        }
        if !(h0 > 0.0) {
            return Err(Error::InadmissibleSpec(format!("h0 = {h0} must be positive")));
        }
        let mut terms = Vec::new();
        for &(idx, c) in coeffs {
            if !idx.is_valid(dim) {
                return Err(Error::InadmissibleSpec(format!("invalid harmonic index {idx:?}")));
            }
            if c != 0.0 {
                terms.push((PolyJet::new(&solid_harmonic(dim, idx), dim), 1.0 - idx.l as f64, c));
            }
        }
        Ok(Self { dim, h0, coeffs: coeffs.to_vec(), terms })
    }

    /// Reads `h0` and coefficients named `Y_l_m` (e.g. `Y_2_0`, `Y_3_-1`).
    pub fn from_params(dim: usize, params: &BTreeMap<String, f64>) -> Result<Self> {
        let h0 = params.get("h0").copied().unwrap_or(1.0);
        let mut coeffs = Vec::new();
        for (k, &v) in params {
            if k == "h0" {
                continue;
            }
            coeffs.push((parse_index(k)?, v));
        }
        Self::new(dim, h0, &coeffs)
    }

    pub fn to_params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("h0".to_string(), self.h0);
        for (idx, c) in &self.coeffs {
            p.insert(format!("Y_{}_{}", idx.l, idx.m), *c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Support value `h(ξ)` for a unit vector `ξ`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        let r = norm(xi);
        self.h0 * r + self.terms.iter().map(|(p, a, c)| c * p.value(xi) * r.powf(*a)).sum::<f64>()
    }

    /// `∇H(x)`, homogeneous of degree zero.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let r = norm(x);
        let mut g: Vec<f64> = x.iter().map(|v| self.h0 * v / r).collect();
        for (p, a, c) in &self.terms {
            let pv = p.value(x);
            let pg = p.gradient(x);
            let ra = r.powf(*a);
            let ra2 = r.powf(a - 2.0);
            for i in 0..d {
                g[i] += c * (ra * pg[i] + a * pv * ra2 * x[i]);
            }
        }
        g
    }

    /// `D²H(x)` row-major.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let r = norm(x);
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[i * d + j] = self.h0 * (delta - x[i] * x[j] / (r * r)) / r;
            }
        }
        for (p, a, c) in &self.terms {
            let pv = p.value(x);
            let pg = p.gradient(x);
            let ph = p.hessian(x);
            let ra = r.powf(*a);
            let ra2 = r.powf(a - 2.0);
            let ra4 = r.powf(a - 4.0);
            for i in 0..d {
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    h[i * d + j] += c
                        * (ra * ph[i * d + j]
                            + a * ra2 * (pg[i] * x[j] + x[i] * pg[j])
                            + a * pv * ra2 * delta
                            + a * (a - 2.0) * pv * ra4 * x[i] * x[j]);
                }
            }
        }
        h
    }

    /// Boundary point with outer unit normal `ξ`.
    pub fn boundary_point(&self, xi: &[f64]) -> Vec<f64> {
        self.gradient(xi)
    }

    fn restricted(&self, xi: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
        let d = self.dim;
        let h = self.hessian(xi);
        let k = basis.len();
        let mut r = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += basis[a][i] * h[i * d + j] * basis[b][j];
                    }
                }
                r[a * k + b] = s;
            }
        }
        r
    }

    /// Principal radii of curvature at outer normal `ξ`, ascending.
    pub fn radii(&self, xi: &[f64]) -> Vec<f64> {
        let basis = tangent_basis(xi, &[]);
        small_symmetric_eigenvalues(&self.restricted(xi, &basis), basis.len())
    }

    /// Shape operator at outer normal `ξ` as a `dim × dim` matrix acting on
    /// tangent vectors: `T R⁻¹ Tᵀ` with `R` the restricted Hessian.
    pub fn shape_operator(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let basis = tangent_basis(xi, &[]);
        let k = basis.len();
        let r = self.restricted(xi, &basis);
        let inv = invert_small(&r, k);
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        v += basis[a][i] * inv[a * k + b] * basis[b][j];
                    }
                }
                s[i * d + j] = v;
            }
        }
        s
    }

    /// Outer normal at a boundary point `y`, by Newton iteration on `∇H(ξ) = y`.
    pub fn normal_at(&self, y: &[f64]) -> Vec<f64> {
        let mut xi = unit(y);
        for _ in 0..60 {
            let g = self.gradient(&xi);
            let res: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - b).collect();
            let basis = tangent_basis(&xi, &[]);
            let k = basis.len();
            let r = self.restricted(&xi, &basis);
            let rhs: Vec<f64> = basis.iter().map(|u| dot(u, &res)).collect();
            let delta = solve_small(&r, &rhs, k);
            let mut next = xi.clone();
            for (u, dlt) in basis.iter().zip(&delta) {
                for i in 0..self.dim {
                    next[i] += dlt * u[i];
                }
            }
            let step = norm(&delta);
            xi = unit(&next);
            if step < 1e-15 {
                break;
            }
        }
        xi
    }

    /// Boundary point on the ray through `dir`.
    pub fn radial_point(&self, dir: &[f64]) -> Vec<f64> {
        let d = unit(dir);
        let ortho = tangent_basis(&d, &[]);
        let mut xi = d.clone();
        for _ in 0..60 {
            let g = self.gradient(&xi);
            let f: Vec<f64> = ortho.iter().map(|e| dot(e, &g)).collect();
            if norm(&f) < 1e-15 * norm(&g) {
                break;
            }
            let basis = tangent_basis(&xi, &[]);
            let k = basis.len();
            let h = self.hessian(&xi);
            let dim = self.dim;
            let mut jac = vec![0.0; k * k];
            for (a, e) in ortho.iter().enumerate() {
                for (b, u) in basis.iter().enumerate() {
                    let mut s = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            s += e[i] * h[i * dim + j] * u[j];
                        }
                    }
                    jac[a * k + b] = s;
                }
            }
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = solve_small(&jac, &neg, k);
            let mut next = xi.clone();
            for (u, dlt) in basis.iter().zip(&delta) {
                for i in 0..dim {
                    next[i] += dlt * u[i];
                }
            }
            xi = unit(&next);
            if norm(&delta) < 1e-15 {
                break;
            }
        }
        self.gradient(&xi)
    }

    /// Image of a point of the closed unit ball under the radial map onto the body.
    pub fn map_ball_point(&self, p: &[f64]) -> Vec<f64> {
        let r = norm(p);
        if r == 0.0 {
            return vec![0.0; self.dim];
        }
        self.gradient(p).into_iter().map(|v| v * r).collect()
    }

    /// Extreme principal radii over a dense latitude–longitude grid.
    pub fn radius_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |xi: &[f64]| {
            for r in self.radii(xi) {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        };
        if self.dim == 2 {
            let m = 4096;
            for k in 0..m {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                visit(&[t.cos(), t.sin()]);
            }
        } else {
            let (nt, np) = (120, 240);
            visit(&[0.0, 0.0, 1.0]);
            visit(&[0.0, 0.0, -1.0]);
            for i in 0..nt {
                let th = std::f64::consts::PI * (i as f64 + 0.5) / nt as f64;
                for j in 0..np {
                    let ph = 2.0 * std::f64::consts::PI * j as f64 / np as f64;
                    visit(&[th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                }
            }
        }
        (lo, hi)
    }

    /// Radii must lie in (0, 1] so that the body is convex with Π ≥ 1.
    pub fn check_admissible(&self) -> Result<()> {
        let (lo, hi) = self.radius_range();
        if hi > 1.0 + 1e-12 {
            return Err(Error::RollingBallViolation { max_radius: hi });
        }
        if lo <= 0.0 {
            return Err(Error::InadmissibleSpec(format!("radius of curvature {lo} is not positive")));
        }
        Ok(())
    }
}

fn parse_index(key: &str) -> Result<HarmonicIndex> {
    let bad = || Error::InadmissibleSpec(format!("unknown support parameter {key:?}"));
    let rest = key.strip_prefix("Y_").ok_or_else(bad)?;
    let (l, m) = rest.split_once('_').ok_or_else(bad)?;
    Ok(HarmonicIndex::new(l.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?))
}

pub(crate) fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn invert_small(a: &[f64], k: usize) -> Vec<f64> {
    match k {
        1 => vec![1.0 / a[0]],
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det]
        }
        _ => {
            let m = nalgebra::DMatrix::from_row_slice(k, k, a);
            let inv = m.try_inverse().unwrap_or_else(|| nalgebra::DMatrix::zeros(k, k));
            (0..k * k).map(|i| inv[(i / k, i % k)]).collect()
        }
    }
}

fn solve_small(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let inv = invert_small(a, k);
    (0..k).map(|i| (0..k).map(|j| inv[i * k + j] * b[j]).sum()).collect()
}
