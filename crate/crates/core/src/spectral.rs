//! Steklov and boundary Laplace–Beltrami spectra, and the exact
//! spherical-harmonic oracle on the ball.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_boundary_mass, assemble_interior_mass, assemble_stiffness, DtnOperator, ScalarField};
use crate::linalg::dense::generalized_eigen;
use crate::linalg::lanczos::{smallest_eigenpairs, LanczosOptions};
use crate::linalg::{conjugate_gradient, norm, CgOptions, SparseOperator};
use crate::mesh::{CurvatureFlags, SimplicialMesh};
use crate::poly::{harmonic_sum, HarmonicIndex, Poly, PolyJet};
use crate::quadrature::{integrate_sphere, sphere_monomial_integral};

/// Problems up to this size use the dense generalized solver.
pub const DENSE_LIMIT: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    Steklov,
    BoundaryLaplacian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
    /// Index of the first eigenvalue of the cluster.
    pub first: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub which: SpectrumKind,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<ScalarField>,
    pub residuals: Vec<f64>,
    pub clusters: Vec<Cluster>,
}

impl SpectrumResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Groups ascending values that agree within `rel_tol · max(1, |λ|)`.
pub fn clusters(values: &[f64], rel_tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (v - values[i - 1]).abs() <= rel_tol * v.abs().max(1.0) => {
                c.multiplicity += 1;
                c.value += (v - c.value) / c.multiplicity as f64;
            }
            _ => out.push(Cluster { value: v, multiplicity: 1, first: i }),
        }
    }
    out
}

fn residual_norm(a: &dyn Fn(&[f64]) -> Result<Vec<f64>>, b: &SparseOperator, lambda: f64, v: &[f64]) -> Result<f64> {
    let av = a(v)?;
    let bv = b.apply(v);
    let r: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x - lambda * y).collect();
    Ok(norm(&r) / norm(v))
}

fn finish(
    which: SpectrumKind,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
) -> Result<SpectrumResult> {
    for (l, r) in values.iter().zip(&residuals) {
        if !(*r <= 1e-6 * (1.0 + l.abs())) {
            return Err(Error::EigenNoConvergence(format!("residual {r:e} at eigenvalue {l}")));
        }
    }
    Ok(SpectrumResult {
        which,
        clusters: clusters(&values, 1e-6),
        eigenvalues: values,
        eigenvectors: vectors.into_iter().map(ScalarField::boundary).collect(),
        residuals,
    })
}

fn dense_pairs(a: &DMatrix<f64>, b: &DMatrix<f64>, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let eig = generalized_eigen(a, b)?;
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    for k in 0..count {
        let v = eig.vectors.column(k).into_owned();
        let r = a * &v - eig.values[k] * (b * &v);
        values.push(eig.values[k]);
        residuals.push(r.norm() / v.norm());
        vectors.push(v.iter().copied().collect());
    }
    Ok((values, vectors, residuals))
}

fn check_count(k: usize, b: usize) -> Result<()> {
    if k == 0 || k + 1 > b {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs beyond the constant with {b} boundary vertices")));
    }
    Ok(())
}

/// The first `k + 1` Steklov pairs `S f = σ M_∂ f` (the constant mode first).
pub fn steklov_spectrum(mesh: &SimplicialMesh, k: usize) -> Result<SpectrumResult> {
    steklov_spectrum_with(mesh, k, 1)
}

pub fn steklov_spectrum_with(mesh: &SimplicialMesh, k: usize, threads: usize) -> Result<SpectrumResult> {
    let dtn = DtnOperator::new(mesh)?;
    let mass = assemble_boundary_mass(mesh);
    let b = dtn.len();
    check_count(k, b)?;
    let count = k + 1;
    if b <= DENSE_LIMIT {
        let s = dtn.densify(threads)?;
        let (values, vectors, residuals) = dense_pairs(&s, &mass.to_dense(), count)?;
        return finish(SpectrumKind::Steklov, values, vectors, residuals);
    }
    let opts = LanczosOptions::default();
    // (S + sM)⁻¹ g is the boundary part of the solution of (K + s M̃) x = (0, g),
    // with M̃ the boundary mass placed on the boundary block.
    let nv = mesh.vertex_count();
    let bverts = dtn.boundary_vertices().to_vec();
    let mut shifted_t = Vec::new();
    for r in 0..nv {
        shifted_t.extend(dtn.stiffness().row(r).map(|(c, v)| (r, c, v)));
    }
    for i in 0..b {
        shifted_t.extend(mass.row(i).map(|(j, v)| (bverts[i], bverts[j], opts.shift * v)));
    }
    let shifted = SparseOperator::from_triplets(nv, nv, shifted_t, true);
    let diag = shifted.diagonal();
    let solve = |g: &[f64]| -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; nv];
        for (i, &v) in bverts.iter().enumerate() {
            rhs[v] = g[i];
        }
        let mut x = vec![0.0; nv];
        conjugate_gradient(|v, out| shifted.apply_into(v, out), &diag, &rhs, &mut x, CgOptions { rel_tol: 1e-12, ..Default::default() })?;
        Ok(bverts.iter().map(|&v| x[v]).collect())
    };
    let apply_s = |f: &[f64]| dtn.apply(f);
    let res = smallest_eigenpairs(b, count, apply_s, |x| mass.apply(x), solve, opts)?;
    let residuals = res
        .vectors
        .iter()
        .zip(&res.values)
        .map(|(v, l)| residual_norm(&apply_s, &mass, *l, v))
        .collect::<Result<Vec<_>>>()?;
    finish(SpectrumKind::Steklov, res.values, res.vectors, residuals)
}

/// The boundary as a closed (n−1)-complex, vertices renumbered in the order
/// of `boundary_vertices`.
pub fn boundary_complex(mesh: &SimplicialMesh) -> Result<SimplicialMesh> {
    let bverts = mesh.boundary_vertices();
    let mut map = vec![usize::MAX; mesh.vertex_count()];
    for (i, &v) in bverts.iter().enumerate() {
        map[v] = i;
    }
    let vertices = bverts.iter().map(|&v| mesh.vertices[v].clone()).collect();
    let cells = mesh.boundary_facets.iter().map(|f| f.iter().map(|&v| map[v]).collect()).collect();
    SimplicialMesh::from_cells(mesh.intrinsic_dim - 1, vertices, cells, CurvatureFlags::default())
}

/// The first `k + 1` eigenpairs of the Laplace–Beltrami operator of the
/// boundary: cotangent (P1) stiffness on the boundary complex against the
/// lumped barycentric area.
pub fn boundary_laplacian_spectrum(mesh: &SimplicialMesh, k: usize) -> Result<SpectrumResult> {
    let surf = boundary_complex(mesh)?;
    let a = assemble_stiffness(&surf)?;
    let consistent = assemble_interior_mass(&surf);
    let lumped: Vec<(usize, usize, f64)> =
        (0..consistent.row_count).map(|i| (i, i, consistent.row(i).map(|(_, v)| v).sum())).collect();
    let m = SparseOperator::from_triplets(consistent.row_count, consistent.row_count, lumped, true);
    let b = surf.vertex_count();
    check_count(k, b)?;
    let count = k + 1;
    if b <= DENSE_LIMIT {
        let (values, vectors, residuals) = dense_pairs(&a.to_dense(), &m.to_dense(), count)?;
        return finish(SpectrumKind::BoundaryLaplacian, values, vectors, residuals);
    }
    let opts = LanczosOptions::default();
    let shifted = a.add_scaled(opts.shift, &m);
    let diag = shifted.diagonal();
    let solve = |g: &[f64]| -> Result<Vec<f64>> {
        let mut x = vec![0.0; g.len()];
        conjugate_gradient(|v, out| shifted.apply_into(v, out), &diag, g, &mut x, CgOptions { rel_tol: 1e-12, ..Default::default() })?;
        Ok(x)
    };
    let apply_a = |f: &[f64]| Ok(a.apply(f));
    let res = smallest_eigenpairs(b, count, apply_a, |x| m.apply(x), solve, opts)?;
    let residuals = res
        .vectors
        .iter()
        .zip(&res.values)
        .map(|(v, l)| residual_norm(&apply_a, &m, *l, v))
        .collect::<Result<Vec<_>>>()?;
    finish(SpectrumKind::BoundaryLaplacian, res.values, res.vectors, residuals)
}

/// Exact data of `F = Σ c_ℓm Y_ℓm` on the unit sphere S^{n−1} and of its
/// harmonic extension `Σ c_ℓm r^ℓ Y_ℓm` to the ball.
#[derive(Clone, Debug)]
pub struct HarmonicOracle {
    dim: usize,
    coeffs: Vec<(HarmonicIndex, f64)>,
    poly: Poly,
    jet: PolyJet,
}

pub fn ball_harmonic_oracle(dim: usize, coeffs: &[(HarmonicIndex, f64)]) -> Result<HarmonicOracle> {
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension { dim, what: "harmonic oracle".into() });
    }
    if let Some((idx, _)) = coeffs.iter().find(|(i, _)| !i.is_valid(dim)) {
        return Err(Error::InvalidInput(format!("invalid harmonic index {idx:?}")));
    }
    if coeffs.iter().any(|(_, c)| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient".into()));
    }
    let mut merged: std::collections::BTreeMap<HarmonicIndex, f64> = Default::default();
    for (i, c) in coeffs {
        *merged.entry(*i).or_default() += c;
    }
    let coeffs: Vec<_> = merged.into_iter().collect();
    let poly = harmonic_sum(dim, &coeffs);
    let jet = PolyJet::new(&poly, dim);
    Ok(HarmonicOracle { dim, coeffs, poly, jet })
}

impl HarmonicOracle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficients(&self) -> &[(HarmonicIndex, f64)] {
        &self.coeffs
    }

    /// `∫_B |∇u|² = Σ ℓ c²`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.coeffs.iter().map(|(i, c)| i.l as f64 * c * c).sum()
    }

    /// `∫_S F² = Σ c²`.
    pub fn boundary_l2(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c * c).sum()
    }

    /// Value of the harmonic extension at `x` (the boundary value when |x| = 1).
    pub fn value(&self, x: &[f64]) -> f64 {
        self.jet.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.jet.gradient(x)
    }

    /// `∫_S |F|^p`: exact for even integer `p`, otherwise adaptive
    /// quadrature to `rel_tol`.
    pub fn boundary_lp(&self, p: f64, rel_tol: f64) -> Result<f64> {
        if self.coeffs.iter().all(|(i, _)| i.l == 0) {
            let c = self.value(&vec![0.0; self.dim]).abs();
            return Ok(c.powf(p) * crate::quadrature::sphere_area(self.dim));
        }
        let degree = self.coeffs.iter().map(|(i, _)| i.l as usize).max().unwrap_or(0);
        if p.fract() == 0.0 && p > 0.0 && (p as usize) % 2 == 0 && degree * p as usize <= 60 {
            return Ok(self.even_power_integral(p as u32));
        }
        integrate_sphere(self.dim, |x| self.jet.value(x).abs().powf(p), rel_tol)
    }

    fn even_power_integral(&self, p: u32) -> f64 {
        if self.dim == 2 {
            // the trapezoid rule with more nodes than the degree is exact
            // for trigonometric polynomials
            let degree = self.coeffs.iter().map(|(i, _)| i.l).max().unwrap_or(0);
            let n = (degree * p + 1) as usize;
            let h = 2.0 * std::f64::consts::PI / n as f64;
            return (0..n).map(|k| self.jet.value(&[(k as f64 * h).cos(), (k as f64 * h).sin()]).powi(p as i32)).sum::<f64>() * h;
        }
        self.poly
            .pow(p)
            .terms()
            .map(|(e, c)| c * sphere_monomial_integral(e[0] as u32, e[1] as u32, e[2] as u32))
            .sum()
    }

    /// Coefficients of the normal derivative of the extension: `ℓ·c`.
    pub fn steklov_image(&self) -> Vec<(HarmonicIndex, f64)> {
        self.coeffs.iter().map(|(i, c)| (*i, i.l as f64 * c)).collect()
    }
}

/// Rayleigh quotient `fᵀ A f / fᵀ B f` with dense matrices.
pub fn rayleigh(a: &DMatrix<f64>, b: &DMatrix<f64>, f: &[f64]) -> f64 {
    let v = DVector::from_column_slice(f);
    (v.transpose() * a * &v)[(0, 0)] / (v.transpose() * b * &v)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_group_close_values() {
        let c = clusters(&[0.0, 1.0, 1.0 + 1e-9, 2.0, 2.0 + 1e-3], 1e-6);
        assert_eq!(c.len(), 4);
        assert_eq!(c[1].multiplicity, 2);
        assert_eq!(c[2].first, 3);
    }

    #[test]
    fn oracle_sphere_moments() {
        let c = (4.0 * std::f64::consts::PI / 3.0).sqrt();
        let o = ball_harmonic_oracle(3, &[(HarmonicIndex::new(1, 1), c)]).unwrap();
        let pi = std::f64::consts::PI;
        assert!((o.value(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-14);
        assert!((o.dirichlet_energy() - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((o.boundary_l2() - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((o.boundary_lp(2.0, 1e-10).unwrap() - 4.0 * pi / 3.0).abs() < 1e-9);
        assert!((o.boundary_lp(4.0, 1e-10).unwrap() - 4.0 * pi / 5.0).abs() < 1e-9);
        let one = ball_harmonic_oracle(3, &[(HarmonicIndex::new(0, 0), (4.0 * pi).sqrt())]).unwrap();
        assert_eq!(one.dirichlet_energy(), 0.0);
        assert!((one.boundary_l2() - 4.0 * pi).abs() < 1e-13);
    }

    #[test]
    fn even_powers_match_quadrature() {
        for dim in [2, 3] {
            let coeffs: Vec<(HarmonicIndex, f64)> = (0..=3)
                .flat_map(|l| HarmonicIndex::of_degree(dim, l))
                .enumerate()
                .map(|(k, i)| (i, 0.3 * ((k as f64) * 1.7).sin()))
                .collect();
            let o = ball_harmonic_oracle(dim, &coeffs).unwrap();
            for p in [2u32, 4] {
                let exact = o.even_power_integral(p);
                let adaptive = integrate_sphere(dim, |x| o.jet.value(x).powi(p as i32), 1e-12).unwrap();
                assert!((exact - adaptive).abs() <= 1e-10 * adaptive, "dim {dim} p {p}: {exact} vs {adaptive}");
            }
            assert!((o.even_power_integral(2) - o.boundary_l2()).abs() <= 1e-12 * o.boundary_l2());
        }
    }
}
