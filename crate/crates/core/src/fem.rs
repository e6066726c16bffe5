//! Piecewise-linear finite elements on simplicial meshes.
//!
//! Element matrices use the Gram matrix `G = EᵀE` of the edge vectors from
//! the first vertex, so the same code serves flat and embedded meshes:
//! with `D = [−1ᵀ; I]`, the local stiffness is `vol · D G⁻¹ Dᵀ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, dot, CgOptions, CgReport, SparseOperator};
use crate::mesh::SimplicialMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldRole {
    Full,
    BoundaryOnly,
}

/// Nodal values, either one per mesh vertex or one per boundary vertex (in
/// the order of `SimplicialMesh::boundary_vertices`).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub role: FieldRole,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn full(values: Vec<f64>) -> Self {
        Self { role: FieldRole::Full, values }
    }

    pub fn boundary(values: Vec<f64>) -> Self {
        Self { role: FieldRole::BoundaryOnly, values }
    }

    /// Interpolates `f` at every vertex.
    pub fn interpolate(mesh: &SimplicialMesh, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::full(mesh.vertices.iter().map(|p| f(p)).collect())
    }

    /// Interpolates `f` at the boundary vertices.
    pub fn interpolate_boundary(mesh: &SimplicialMesh, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::boundary(mesh.boundary_vertices().iter().map(|&v| f(&mesh.vertices[v])).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.values)?)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Gram matrix, its inverse and the simplex measure, for n ≤ 3.
struct Element {
    dim: usize,
    ginv: [[f64; 3]; 3],
    measure: f64,
}

fn element(mesh: &SimplicialMesh, cell: &[usize], index: usize) -> Result<Element> {
    let n = cell.len() - 1;
    let p0 = &mesh.vertices[cell[0]];
    let mut e = [[0.0; 4]; 3];
    for i in 0..n {
        for (k, (a, b)) in mesh.vertices[cell[i + 1]].iter().zip(p0).enumerate() {
            e[i][k] = a - b;
        }
    }
    let m = mesh.ambient_dim;
    let mut g = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = (0..m).map(|k| e[i][k] * e[j][k]).sum();
        }
    }
    let (det, ginv) = match n {
        1 => (g[0][0], [[1.0 / g[0][0], 0.0, 0.0], [0.0; 3], [0.0; 3]]),
        2 => {
            let d = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            (d, [[g[1][1] / d, -g[0][1] / d, 0.0], [-g[1][0] / d, g[0][0] / d, 0.0], [0.0; 3]])
        }
        3 => {
            let c00 = g[1][1] * g[2][2] - g[1][2] * g[2][1];
            let c01 = g[1][2] * g[2][0] - g[1][0] * g[2][2];
            let c02 = g[1][0] * g[2][1] - g[1][1] * g[2][0];
            let d = g[0][0] * c00 + g[0][1] * c01 + g[0][2] * c02;
            let inv = [
                [c00 / d, (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / d, (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / d],
                [c01 / d, (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / d, (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / d],
                [c02 / d, (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / d, (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / d],
            ];
            (d, inv)
        }
        _ => return Err(Error::UnsupportedDimension { dim: n, what: "P1 element".into() }),
    };
    let scale: f64 = (0..n).map(|i| g[i][i]).fold(0.0, f64::max);
    if !(det > 1e-24 * scale.powi(n as i32)) {
        return Err(Error::DegenerateCell { cell: index, measure: det.max(0.0).sqrt() });
    }
    let fact: f64 = (1..=n).map(|v| v as f64).product();
    Ok(Element { dim: n, ginv, measure: det.sqrt() / fact })
}

impl Element {
    /// Local stiffness entry between local vertices `a` and `b`.
    fn stiffness(&self, a: usize, b: usize) -> f64 {
        let n = self.dim;
        // D row a: a = 0 → all −1; a > 0 → e_{a−1}
        let row = |a: usize, j: usize| -> f64 {
            if a == 0 {
                -1.0
            } else if a - 1 == j {
                1.0
            } else {
                0.0
            }
        };
        let mut s = 0.0;
        for i in 0..n {
            let ra = row(a, i);
            if ra == 0.0 {
                continue;
            }
            for j in 0..n {
                let rb = row(b, j);
                if rb != 0.0 {
                    s += ra * self.ginv[i][j] * rb;
                }
            }
        }
        self.measure * s
    }
}

/// Ambient-space gradients of the barycentric coordinates of a cell.
pub fn barycentric_gradients(mesh: &SimplicialMesh, cell: usize) -> Result<Vec<Vec<f64>>> {
    let c = &mesh.cells[cell];
    let el = element(mesh, c, cell)?;
    let n = el.dim;
    let m = mesh.ambient_dim;
    let p0 = &mesh.vertices[c[0]];
    let edges: Vec<Vec<f64>> =
        (1..=n).map(|i| mesh.vertices[c[i]].iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
    // ∇λ_i = Σ_j (G⁻¹)_{ij} e_j for i ≥ 1
    let mut grads = vec![vec![0.0; m]; n + 1];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                grads[i + 1][k] += el.ginv[i][j] * edges[j][k];
            }
        }
    }
    for k in 0..m {
        grads[0][k] = -(1..=n).map(|i| grads[i][k]).sum::<f64>();
    }
    Ok(grads)
}

pub fn assemble_stiffness(mesh: &SimplicialMesh) -> Result<SparseOperator> {
    let nv = mesh.vertices.len();
    let k = mesh.intrinsic_dim + 1;
    let mut triplets = Vec::with_capacity(mesh.cells.len() * k * k);
    for (ci, c) in mesh.cells.iter().enumerate() {
        let el = element(mesh, c, ci)?;
        for a in 0..k {
            for b in 0..k {
                triplets.push((c[a], c[b], el.stiffness(a, b)));
            }
        }
    }
    Ok(SparseOperator::from_triplets(nv, nv, triplets, true))
}

fn mass_triplets(simplices: &[Vec<usize>], measures: impl Iterator<Item = f64>, map: &[usize]) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for (s, vol) in simplices.iter().zip(measures) {
        let k = s.len() as f64;
        for &a in s {
            for &b in s {
                let w = if a == b { 2.0 } else { 1.0 };
                t.push((map[a], map[b], vol * w / (k * (k + 1.0))));
            }
        }
    }
    t
}

/// Consistent P1 mass on the boundary, indexed by boundary vertex position.
pub fn assemble_boundary_mass(mesh: &SimplicialMesh) -> SparseOperator {
    let bverts = mesh.boundary_vertices();
    let mut map = vec![usize::MAX; mesh.vertices.len()];
    for (i, &v) in bverts.iter().enumerate() {
        map[v] = i;
    }
    let measures = (0..mesh.boundary_facets.len()).map(|f| mesh.facet_measure(f));
    let t = mass_triplets(&mesh.boundary_facets, measures, &map);
    SparseOperator::from_triplets(bverts.len(), bverts.len(), t, true)
}

/// Consistent P1 mass over the cells, indexed by vertex.
pub fn assemble_interior_mass(mesh: &SimplicialMesh) -> SparseOperator {
    let nv = mesh.vertices.len();
    let map: Vec<usize> = (0..nv).collect();
    let measures = (0..mesh.cells.len()).map(|c| mesh.cell_measure(c));
    let t = mass_triplets(&mesh.cells, measures, &map);
    SparseOperator::from_triplets(nv, nv, t, true)
}

/// Lumped boundary mass (row sums of the consistent boundary mass).
pub fn lumped_boundary_mass(mesh: &SimplicialMesh) -> Vec<f64> {
    crate::mesh::lumped_weights(mesh, &mesh.boundary_vertices())
}

/// Dirichlet energy `uᵀKu`.
pub fn dirichlet_energy(stiffness: &SparseOperator, u: &[f64]) -> f64 {
    stiffness.quadratic_form(u)
}

/// Matrix-free Dirichlet-to-Neumann map `S = K_bb − K_bi K_ii⁻¹ K_ib` on the
/// boundary vertices.
pub struct DtnOperator<'a> {
    mesh: &'a SimplicialMesh,
    stiffness: SparseOperator,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    k_ii: SparseOperator,
    k_ib: SparseOperator,
    k_bb: SparseOperator,
    diag_ii: Vec<f64>,
    pub cg: CgOptions,
}

impl<'a> DtnOperator<'a> {
    pub fn new(mesh: &'a SimplicialMesh) -> Result<Self> {
        let stiffness = assemble_stiffness(mesh)?;
        Ok(Self::with_stiffness(mesh, stiffness))
    }

    pub fn with_stiffness(mesh: &'a SimplicialMesh, stiffness: SparseOperator) -> Self {
        let boundary = mesh.boundary_vertices();
        let interior = mesh.interior_vertices();
        let k_ii = stiffness.submatrix(&interior, &interior);
        let k_ib = stiffness.submatrix(&interior, &boundary);
        let k_bb = stiffness.submatrix(&boundary, &boundary);
        let diag_ii = k_ii.diagonal();
        Self { mesh, stiffness, boundary, interior, k_ii, k_ib, k_bb, diag_ii, cg: CgOptions::default() }
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        self.mesh
    }

    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    /// Solves `K_ii x = rhs`.
    pub fn solve_interior(&self, rhs: &[f64]) -> Result<(Vec<f64>, CgReport)> {
        let mut x = vec![0.0; rhs.len()];
        let rep = conjugate_gradient(|v, out| self.k_ii.apply_into(v, out), &self.diag_ii, rhs, &mut x, self.cg)?;
        Ok((x, rep))
    }

    /// Interior values of the discrete harmonic extension of `f`.
    pub fn extend_interior(&self, f: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.k_ib.apply(f).into_iter().map(|v| -v).collect();
        Ok(self.solve_interior(&rhs)?.0)
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(f.len(), self.boundary.len());
        if self.interior.is_empty() {
            return Ok(self.k_bb.apply(f));
        }
        let ui = self.extend_interior(f)?;
        let mut g = self.k_bb.apply(f);
        // K_bi = K_ibᵀ
        for (r, &uv) in ui.iter().enumerate() {
            for (c, v) in self.k_ib.row(r) {
                g[c] += v * uv;
            }
        }
        Ok(g)
    }

    pub fn apply_field(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.role != FieldRole::BoundaryOnly || f.values.len() != self.boundary.len() {
            return Err(Error::InvalidInput("DtN expects a boundary field on its own mesh".into()));
        }
        Ok(ScalarField::boundary(self.apply(&f.values)?))
    }

    /// Dense symmetrized Schur complement, one interior solve per boundary
    /// vertex, split across `threads` workers.
    pub fn densify(&self, threads: usize) -> Result<DMatrix<f64>> {
        let b = self.boundary.len();
        if b > 2000 {
            return Err(Error::InvalidInput(format!("densification limited to 2000 boundary vertices, got {b}")));
        }
        let column = |j: usize| -> Result<Vec<f64>> {
            let mut e = vec![0.0; b];
            e[j] = 1.0;
            self.apply(&e)
        };
        let threads = threads.max(1).min(b.max(1));
        let cols: Vec<Vec<f64>> = if threads == 1 {
            (0..b).map(column).collect::<Result<_>>()?
        } else {
            let chunk = b.div_ceil(threads);
            let parts: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
                let handles: Vec<_> = (0..threads)
                    .map(|t| {
                        let column = &column;
                        s.spawn(move || ((t * chunk)..((t + 1) * chunk).min(b)).map(column).collect())
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("densify worker")).collect()
            });
            let mut all = Vec::with_capacity(b);
            for p in parts {
                all.extend(p?);
            }
            all
        };
        let mut s = DMatrix::zeros(b, b);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..b {
                s[(i, j)] = c[i];
            }
        }
        let st = s.transpose();
        let mut s = (s + st) * 0.5;
        // constants lie in the kernel exactly; remove the CG tolerance from the row sums
        for i in 0..b {
            let row: f64 = s.row(i).sum();
            s[(i, i)] -= row;
        }
        Ok(s)
    }
}

/// Harmonic extension of boundary data to all vertices.
pub fn harmonic_extend(mesh: &SimplicialMesh, boundary_values: &ScalarField) -> Result<ScalarField> {
    let dtn = DtnOperator::new(mesh)?;
    harmonic_extend_with(&dtn, boundary_values)
}

pub fn harmonic_extend_with(dtn: &DtnOperator, boundary_values: &ScalarField) -> Result<ScalarField> {
    let f = &boundary_values.values;
    if boundary_values.role != FieldRole::BoundaryOnly || f.len() != dtn.len() {
        return Err(Error::InvalidInput("boundary field length does not match the mesh".into()));
    }
    if !boundary_values.is_finite() {
        return Err(Error::InvalidInput("non-finite boundary value".into()));
    }
    let ui = dtn.extend_interior(f)?;
    let mut u = vec![0.0; dtn.mesh.vertices.len()];
    for (k, &v) in dtn.boundary.iter().enumerate() {
        u[v] = f[k];
    }
    for (k, &v) in dtn.interior.iter().enumerate() {
        u[v] = ui[k];
    }
    Ok(ScalarField::full(u))
}

/// Weak Neumann data `(K u)` on boundary rows, i.e. the flux pairing with
/// each boundary hat function, in boundary-vertex order.
pub fn weak_neumann(stiffness: &SparseOperator, boundary: &[usize], u: &[f64]) -> Vec<f64> {
    boundary.iter().map(|&v| stiffness.row(v).map(|(c, a)| a * u[c]).sum()).collect()
}

/// Pointwise normal derivative: weak flux divided by the lumped mass.
pub fn normal_derivative(mesh: &SimplicialMesh, stiffness: &SparseOperator, u: &[f64]) -> Vec<f64> {
    let b = mesh.boundary_vertices();
    let lumped = lumped_boundary_mass(mesh);
    weak_neumann(stiffness, &b, u).iter().zip(&lumped).map(|(q, w)| q / w).collect()
}

/// Weighted L² norm `sqrt(fᵀ M f)`.
pub fn mass_norm(mass: &SparseOperator, f: &[f64]) -> f64 {
    dot(f, &mass.apply(f)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CurvatureFlags, SimplicialMesh};

    fn right_triangle() -> SimplicialMesh {
        SimplicialMesh::from_cells(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1, 2]],
            CurvatureFlags::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_energy() {
        let m = right_triangle();
        let k = assemble_stiffness(&m).unwrap();
        assert!((k.quadratic_form(&[0.0, 1.0, 0.0]) - 0.5).abs() < 1e-15);
        assert!(k.quadratic_form(&[3.0, 3.0, 3.0]).abs() < 1e-14);
        // textbook element matrix of the reference triangle
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_totals_and_degenerate_cell() {
        let m = right_triangle();
        let mi = assemble_interior_mass(&m);
        assert!((mi.quadratic_form(&[1.0; 3]) - 0.5).abs() < 1e-15);
        let mb = assemble_boundary_mass(&m);
        let per = 2.0 + 2f64.sqrt();
        assert!((mb.quadratic_form(&[1.0; 3]) - per).abs() < 1e-14);

        let mut flat = m.clone();
        flat.vertices[2] = vec![2.0, 0.0];
        assert!(matches!(assemble_stiffness(&flat), Err(Error::DegenerateCell { cell: 0, .. })));
    }

    #[test]
    fn embedded_triangle_matches_flat() {
        // the same triangle rotated into R³ has the same element matrix
        let flat = right_triangle();
        let mut emb = flat.clone();
        let (c, s) = (0.6f64, 0.8f64);
        emb.vertices = flat.vertices.iter().map(|p| vec![p[0], c * p[1], s * p[1]]).collect();
        emb.ambient_dim = 3;
        let a = assemble_stiffness(&flat).unwrap();
        let b = assemble_stiffness(&emb).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-14);
            }
        }
    }
}
