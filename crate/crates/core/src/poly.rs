//! Sparse multivariate polynomials in up to four ambient coordinates, and
//! real orthonormal spherical harmonics built from them.
//!
//! Harmonics are stored as homogeneous harmonic polynomials (solid
//! harmonics), so their restriction to the unit sphere is the usual real
//! spherical harmonic and their gradients/Hessians are exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const MAX_VARS: usize = 4;

pub type Exponent = [u8; MAX_VARS];

/// Polynomial with real coefficients, keyed by exponent vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    terms: BTreeMap<Exponent, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term([0; MAX_VARS], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn coord(i: usize) -> Self {
        let mut e = [0u8; MAX_VARS];
        e[i] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn monomial(e: Exponent, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// `|x|^2` over the first `dim` coordinates.
    pub fn radius_squared(dim: usize) -> Self {
        let mut p = Self::zero();
        for i in 0..dim {
            let mut e = [0u8; MAX_VARS];
            e[i] = 2;
            p.add_term(e, 1.0);
        }
        p
    }

    pub fn add_term(&mut self, e: Exponent, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&k| k as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            p.add_term(*e, c * s);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(*e, *c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut e = [0u8; MAX_VARS];
                for k in 0..MAX_VARS {
                    e[k] = ea[k] + eb[k];
                }
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut p = Self::constant(1.0);
        for _ in 0..k {
            p = p.mul(self);
        }
        p
    }

    /// Partial derivative with respect to coordinate `i`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = *e;
                d[i] -= 1;
                p.add_term(d, c * e[i] as f64);
            }
        }
        p
    }

    /// Laplacian over the first `dim` coordinates.
    pub fn laplacian(&self, dim: usize) -> Self {
        let mut p = Self::zero();
        for i in 0..dim {
            p = p.add(&self.derivative(i).derivative(i));
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut v = *c;
                for (k, &p) in e.iter().enumerate() {
                    if p > 0 {
                        v *= x.get(k).copied().unwrap_or(0.0).powi(p as i32);
                    }
                }
                v
            })
            .sum()
    }

    /// Gradient over the first `dim` coordinates.
    pub fn gradient(&self, x: &[f64], dim: usize) -> Vec<f64> {
        (0..dim).map(|i| self.derivative(i).eval(x)).collect()
    }

    /// Hessian over the first `dim` coordinates, row-major.
    pub fn hessian(&self, x: &[f64], dim: usize) -> Vec<f64> {
        let mut h = vec![0.0; dim * dim];
        for i in 0..dim {
            let di = self.derivative(i);
            for j in i..dim {
                let v = di.derivative(j).eval(x);
                h[i * dim + j] = v;
                h[j * dim + i] = v;
            }
        }
        h
    }
}

/// Precomputed first and second derivatives for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PolyJet {
    dim: usize,
    value: Poly,
    grad: Vec<Poly>,
    hess: Vec<Poly>,
}

impl PolyJet {
    pub fn new(p: &Poly, dim: usize) -> Self {
        let grad: Vec<Poly> = (0..dim).map(|i| p.derivative(i)).collect();
        let mut hess = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                hess.push(grad[i].derivative(j));
            }
        }
        Self { dim, value: p.clone(), grad, hess }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        self.hess.iter().map(|g| g.eval(x)).collect()
    }
}

/// Index of a real spherical harmonic: degree `l` and order `m`
/// (`-l <= m <= l` on S², `m ∈ {-1, 0, 1}` sign-only on S¹ with `|m| = l`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub l: u32,
    pub m: i32,
}

impl HarmonicIndex {
    pub fn new(l: u32, m: i32) -> Self {
        Self { l, m }
    }

    /// All valid indices of degree `l` on the sphere S^{dim-1}.
    pub fn of_degree(dim: usize, l: u32) -> Vec<Self> {
        match dim {
            2 if l == 0 => vec![Self::new(0, 0)],
            2 => vec![Self::new(l, -(l as i32)), Self::new(l, l as i32)],
            _ => (-(l as i32)..=l as i32).map(|m| Self::new(l, m)).collect(),
        }
    }

    pub fn is_valid(&self, dim: usize) -> bool {
        match dim {
            2 => (self.l == 0 && self.m == 0) || (self.l > 0 && self.m.unsigned_abs() == self.l),
            3 => self.m.unsigned_abs() <= self.l,
            _ => false,
        }
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Real and imaginary parts of `(x + i y)^m` as polynomials.
fn complex_power(m: u32) -> (Poly, Poly) {
    let mut re = Poly::zero();
    let mut im = Poly::zero();
    for k in 0..=m {
        // term: binom(m,k) x^{m-k} (i y)^k
        let c = binomial(m, k);
        let mut e = [0u8; MAX_VARS];
        e[0] = (m - k) as u8;
        e[1] = k as u8;
        match k % 4 {
            0 => re.add_term(e, c),
            1 => im.add_term(e, c),
            2 => re.add_term(e, -c),
            _ => im.add_term(e, -c),
        }
    }
    (re, im)
}

/// Solid harmonic `r^l Y_{lm}(x/r)` in `dim` ∈ {2, 3} variables, normalized
/// so that its restriction to the unit sphere has unit L² norm.
pub fn solid_harmonic(dim: usize, idx: HarmonicIndex) -> Poly {
    assert!(idx.is_valid(dim), "invalid harmonic index {idx:?} for dim {dim}");
    let l = idx.l;
    if dim == 2 {
        if l == 0 {
            return Poly::constant(1.0 / (2.0 * std::f64::consts::PI).sqrt());
        }
        let (re, im) = complex_power(l);
        let norm = 1.0 / std::f64::consts::PI.sqrt();
        return if idx.m > 0 { re.scale(norm) } else { im.scale(norm) };
    }
    let m = idx.m.unsigned_abs();
    // Legendre part: sqrt((l-m)!/(l+m)!) Σ_k (-1)^k 2^{-l} C(l,k) C(2l-2k,l) (l-2k)!/(l-2k-m)! r^{2k} z^{l-2k-m}
    let r2 = Poly::radius_squared(3);
    let mut legendre = Poly::zero();
    let mut k = 0;
    while 2 * k + m <= l {
        let coef = (-1f64).powi(k as i32) * 2f64.powi(-(l as i32)) * binomial(l, k)
            * binomial(2 * l - 2 * k, l)
            * factorial(l - 2 * k)
            / factorial(l - 2 * k - m);
        let mut ez = [0u8; MAX_VARS];
        ez[2] = (l - 2 * k - m) as u8;
        legendre = legendre.add(&r2.pow(k).mul(&Poly::monomial(ez, coef)));
        k += 1;
    }
    legendre = legendre.scale((factorial(l - m) / factorial(l + m)).sqrt());
    let four_pi = 4.0 * std::f64::consts::PI;
    if m == 0 {
        return legendre.scale(((2 * l + 1) as f64 / four_pi).sqrt());
    }
    let (re, im) = complex_power(m);
    let norm = (2.0 * (2 * l + 1) as f64 / four_pi).sqrt();
    let angular = if idx.m > 0 { re } else { im };
    legendre.mul(&angular).scale(norm)
}

/// Sum `Σ c_k r^{l_k} Y_k` as a single polynomial.
pub fn harmonic_sum(dim: usize, coeffs: &[(HarmonicIndex, f64)]) -> Poly {
    coeffs
        .iter()
        .fold(Poly::zero(), |acc, (idx, c)| acc.add(&solid_harmonic(dim, *idx).scale(*c)))
}
