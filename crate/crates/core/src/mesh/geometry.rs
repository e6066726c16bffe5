use serde::{Deserialize, Serialize};

use super::family::{tangent_basis, Family};
use super::{FamilyTag, SimplicialMesh};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Per-boundary-vertex geometry, indexed like `vertices`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGeometry {
    /// Mesh indices of the boundary vertices, ascending.
    pub vertices: Vec<usize>,
    pub vertex_normals: Vec<Vec<f64>>,
    pub pi_min: Vec<f64>,
    pub pi_max: Vec<f64>,
    /// H = trace Π.
    pub mean_curvature: Vec<f64>,
    /// Lumped (n−1)-measure: each facet gives 1/n of its measure to each vertex.
    pub area_weights: Vec<f64>,
    /// Shape operators in ambient coordinates, row-major `m × m`.
    pub shape_operators: Vec<Vec<f64>>,
    pub analytic: bool,
}

impl BoundaryGeometry {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn min_pi(&self) -> f64 {
        self.pi_min.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn min_mean_curvature(&self) -> f64 {
        self.mean_curvature.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Lumped boundary weights, indexed by boundary vertex position.
pub(crate) fn lumped_weights(mesh: &SimplicialMesh, bverts: &[usize]) -> Vec<f64> {
    let mut pos = vec![usize::MAX; mesh.vertices.len()];
    for (k, &v) in bverts.iter().enumerate() {
        pos[v] = k;
    }
    let mut w = vec![0.0; bverts.len()];
    let n = mesh.intrinsic_dim as f64;
    for (f, facet) in mesh.boundary_facets.iter().enumerate() {
        let share = mesh.facet_measure(f) / n;
        for &v in facet {
            w[pos[v]] += share;
        }
    }
    w
}

pub fn boundary_geometry(mesh: &SimplicialMesh) -> Result<BoundaryGeometry> {
    let bverts = mesh.boundary_vertices();
    let area_weights = lumped_weights(mesh, &bverts);
    let fam = if mesh.family_tag() == FamilyTag::Custom { Family::Custom } else { Family::from_spec(&mesh.family)? };
    let mut geo = BoundaryGeometry {
        vertices: bverts.clone(),
        vertex_normals: Vec::with_capacity(bverts.len()),
        pi_min: Vec::with_capacity(bverts.len()),
        pi_max: Vec::with_capacity(bverts.len()),
        mean_curvature: Vec::with_capacity(bverts.len()),
        area_weights,
        shape_operators: Vec::with_capacity(bverts.len()),
        analytic: !matches!(fam, Family::Custom),
    };
    if matches!(fam, Family::Custom) {
        quadric_fit(mesh, &mut geo)?;
        return Ok(geo);
    }
    for &v in &bverts {
        let sp = fam.surface_point(&mesh.vertices[v]).expect("analytic family");
        geo.pi_min.push(sp.principal[0]);
        geo.pi_max.push(*sp.principal.last().expect("n ≥ 2"));
        geo.mean_curvature.push(sp.principal.iter().sum());
        geo.vertex_normals.push(sp.normal);
        geo.shape_operators.push(sp.shape);
    }
    Ok(geo)
}

/// Least-squares quadric over the 2-ring of each boundary vertex, in the
/// frame of the area-weighted facet normal. Flat ambient space only.
fn quadric_fit(mesh: &SimplicialMesh, geo: &mut BoundaryGeometry) -> Result<()> {
    let n = mesh.intrinsic_dim;
    if mesh.ambient_dim != n {
        return Err(Error::UnsupportedDimension { dim: mesh.ambient_dim, what: "quadric fit in curved ambient".into() });
    }
    let nv = mesh.vertices.len();
    let normals = mesh.facet_normals();
    let mut vnorm = vec![vec![0.0; n]; nv];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (f, facet) in mesh.boundary_facets.iter().enumerate() {
        let a = mesh.facet_measure(f);
        for &v in facet {
            for i in 0..n {
                vnorm[v][i] += a * normals[f][i];
            }
            for &w in facet {
                if w != v && !adj[v].contains(&w) {
                    adj[v].push(w);
                }
            }
        }
    }
    for &v in &geo.vertices {
        let mut nu: Vec<f64> = {
            let l = norm(&vnorm[v]);
            vnorm[v].iter().map(|x| x / l).collect()
        };
        let mut ring: Vec<usize> = adj[v].clone();
        for &w in &adj[v] {
            for &u in &adj[w] {
                if u != v && !ring.contains(&u) {
                    ring.push(u);
                }
            }
        }
        // refit in the frame tilted by the fitted slope
        let mut fit = None;
        for _ in 0..3 {
            let basis = tangent_basis(&nu, &[]);
            let coef = fit_quadric(mesh, v, &ring, &nu, &basis)?;
            let k = basis.len();
            let nq = k * (k + 1) / 2;
            let mut tilted = nu.clone();
            for a in 0..k {
                for i in 0..n {
                    tilted[i] -= coef[nq + a] * basis[a][i];
                }
            }
            let l = norm(&tilted);
            nu = tilted.iter().map(|x| x / l).collect();
            fit = Some((basis, coef));
        }
        let (basis, coef) = fit.expect("at least one fit");
        let k = basis.len();
        // height w = Σ q_ab s_a s_b; Π = −Hess w
        let mut hess = vec![0.0; k * k];
        let mut idx = 0;
        for a in 0..k {
            for b in a..k {
                if a == b {
                    hess[a * k + a] = -2.0 * coef[idx];
                } else {
                    hess[a * k + b] = -coef[idx];
                    hess[b * k + a] = -coef[idx];
                }
                idx += 1;
            }
        }
        let eig = super::family::small_symmetric_eigenvalues(&hess, k);
        let mut shape = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        s += basis[a][i] * hess[a * k + b] * basis[b][j];
                    }
                }
                shape[i * n + j] = s;
            }
        }
        geo.pi_min.push(eig[0]);
        geo.pi_max.push(eig[k - 1]);
        geo.mean_curvature.push(eig.iter().sum());
        geo.vertex_normals.push(nu);
        geo.shape_operators.push(shape);
    }
    Ok(())
}

/// Coefficients of `w = Σ q_ab s_a s_b + Σ g_a s_a` (upper-triangle quadratic
/// part first) fitted to the ring in the frame (`basis`, `nu`).
fn fit_quadric(
    mesh: &SimplicialMesh,
    v: usize,
    ring: &[usize],
    nu: &[f64],
    basis: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let k = basis.len();
    let cols = k * (k + 1) / 2 + k;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for &u in ring {
        let d: Vec<f64> = mesh.vertices[u].iter().zip(&mesh.vertices[v]).map(|(a, b)| a - b).collect();
        let s: Vec<f64> = basis.iter().map(|e| dot(e, &d)).collect();
        let mut row = Vec::with_capacity(cols);
        for a in 0..k {
            for b in a..k {
                row.push(s[a] * s[b]);
            }
        }
        row.extend_from_slice(&s);
        rows.push(row);
        rhs.push(dot(nu, &d));
    }
    if rows.len() < cols {
        return Err(Error::QuadricFitFailure { vertex: v });
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_column_slice(&rhs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::QuadricFitFailure { vertex: v });
    }
    let coef = svd.solve(&b, 1e-14 * smax).map_err(|_| Error::QuadricFitFailure { vertex: v })?;
    Ok(coef.iter().copied().collect())
}
