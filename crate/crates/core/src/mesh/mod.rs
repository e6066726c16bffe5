//! Simplicial meshes of the test domains, with exact boundary metadata.
//!
//! Every mesh lives in an ambient Euclidean space; the Riemannian metric is
//! the one induced by that embedding. Flat domains sit in Rⁿ, spherical caps
//! in R^{n+1}, and the flat solid torus B² × S¹ in R⁴.

mod family;
mod generate;
mod geometry;
mod io;
pub mod support;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use family::SurfacePoint;
pub(crate) use family::Family;
pub use generate::{generate_domain, refine, support_body};
pub use geometry::{boundary_geometry, BoundaryGeometry};
pub(crate) use geometry::lumped_weights;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    Ball,
    Ellipsoid,
    SupportBody,
    SphericalCap,
    ProductSolidTorus,
    Custom,
}

/// Family tag, intrinsic dimension, named parameters and refinement level.
///
/// Parameters by family: `Ball` → optional `radius`; `Ellipsoid` → `a`, `b`
/// (and `c` for n = 3); `SupportBody` → `h0` plus coefficients `Y_l_m`;
/// `SphericalCap` → `radius` (geodesic, in (0, π)); `ProductSolidTorus` →
/// `length` (circumference L) and optional `segments`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub family_tag: FamilyTag,
    pub dim: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub refinement_level: usize,
}

impl DomainSpec {
    pub fn new(family_tag: FamilyTag, dim: usize, refinement_level: usize) -> Self {
        Self { family_tag, dim, parameters: BTreeMap::new(), refinement_level }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    pub fn ball(dim: usize, refinement: usize) -> Self {
        Self::new(FamilyTag::Ball, dim, refinement)
    }

    pub fn ellipsoid(axes: &[f64], refinement: usize) -> Self {
        let mut s = Self::new(FamilyTag::Ellipsoid, axes.len(), refinement);
        for (name, v) in ["a", "b", "c"].iter().zip(axes) {
            s = s.with(name, *v);
        }
        s
    }

    pub fn cap(dim: usize, radius: f64, refinement: usize) -> Self {
        Self::new(FamilyTag::SphericalCap, dim, refinement).with("radius", radius)
    }

    pub fn solid_torus(length: f64, refinement: usize) -> Self {
        Self::new(FamilyTag::ProductSolidTorus, 3, refinement).with("length", length)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }
}

/// Analytic curvature bounds of a family; `None` when unknown.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvatureFlags {
    pub ric_lower: Option<f64>,
    pub pi_lower: Option<f64>,
    pub sec_lower: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplicialMesh {
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    #[serde(with = "io::precise_vertices")]
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub boundary_facets: Vec<Vec<usize>>,
    pub family: DomainSpec,
    pub curvature_flags: CurvatureFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub volume: f64,
    pub boundary_area: f64,
}

/// Gram determinant measure of the simplex spanned by `pts`.
pub fn simplex_measure(pts: &[&[f64]]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let edges: Vec<Vec<f64>> =
        (1..=k).map(|i| pts[i].iter().zip(pts[0]).map(|(a, b)| a - b).collect()).collect();
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| crate::linalg::dot(&edges[i], &edges[j]));
    let det = gram.determinant().max(0.0);
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    det.sqrt() / fact
}

pub(crate) fn sorted_key(v: &[usize]) -> Vec<usize> {
    let mut k = v.to_vec();
    k.sort_unstable();
    k
}

impl SimplicialMesh {
    pub fn family_tag(&self) -> FamilyTag {
        self.family.family_tag
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn points<'a>(&'a self, simplex: &[usize]) -> Vec<&'a [f64]> {
        simplex.iter().map(|&v| self.vertices[v].as_slice()).collect()
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        simplex_measure(&self.points(&self.cells[c]))
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        simplex_measure(&self.points(&self.boundary_facets[f]))
    }

    pub fn measure(&self) -> Measures {
        let volume = (0..self.cells.len()).map(|c| self.cell_measure(c)).sum();
        let boundary_area = (0..self.boundary_facets.len()).map(|f| self.facet_measure(f)).sum();
        Measures { volume, boundary_area }
    }

    /// Sorted indices of vertices on the boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut on = vec![false; self.vertices.len()];
        for f in &self.boundary_facets {
            for &v in f {
                on[v] = true;
            }
        }
        (0..self.vertices.len()).filter(|&v| on[v]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        let b = self.boundary_vertices();
        let mut on = vec![false; self.vertices.len()];
        for &v in &b {
            on[v] = true;
        }
        (0..self.vertices.len()).filter(|&v| !on[v]).collect()
    }

    /// All distinct `k`-simplices (sorted vertex tuples) of the cell complex,
    /// in lexicographic order.
    pub fn simplices(&self, k: usize) -> Vec<Vec<usize>> {
        let mut set = std::collections::BTreeSet::new();
        for c in &self.cells {
            for s in subsets(&sorted_key(c), k + 1) {
                set.insert(s);
            }
        }
        set.into_iter().collect()
    }

    /// All distinct `k`-simplices of the boundary complex.
    pub fn boundary_simplices(&self, k: usize) -> Vec<Vec<usize>> {
        let mut set = std::collections::BTreeSet::new();
        for f in &self.boundary_facets {
            for s in subsets(&sorted_key(f), k + 1) {
                set.insert(s);
            }
        }
        set.into_iter().collect()
    }

    /// Cell index adjacent to each boundary facet, with the opposite vertex.
    pub fn facet_cells(&self) -> Vec<(usize, usize)> {
        let mut owner: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for (ci, c) in self.cells.iter().enumerate() {
            for (skip, &opp) in c.iter().enumerate() {
                let face: Vec<usize> =
                    c.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                owner.insert(sorted_key(&face), (ci, opp));
            }
        }
        self.boundary_facets
            .iter()
            .map(|f| *owner.get(&sorted_key(f)).expect("boundary facet belongs to a cell"))
            .collect()
    }

    /// Outward unit normal of each boundary facet within the tangent space
    /// of the adjacent cell.
    pub fn facet_normals(&self) -> Vec<Vec<f64>> {
        let owners = self.facet_cells();
        self.boundary_facets
            .iter()
            .zip(owners)
            .map(|(f, (_, opp))| outward_facet_normal(&self.points(f), &self.vertices[opp]))
            .collect()
    }

    /// Checks the structural invariants: cell arity, positive cell measure,
    /// facet incidences and a closed boundary.
    pub fn validate(&self) -> Result<()> {
        let n = self.intrinsic_dim;
        if self.ambient_dim < n {
            return Err(Error::InvalidMesh("ambient dimension below intrinsic".into()));
        }
        if self.vertices.iter().any(|v| v.len() != self.ambient_dim || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidMesh("vertex with wrong arity or non-finite coordinate".into()));
        }
        let nv = self.vertices.len();
        for (ci, c) in self.cells.iter().enumerate() {
            if c.len() != n + 1 || c.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("cell {ci} malformed")));
            }
            let m = self.cell_measure(ci);
            let scale = self.points(c).iter().skip(1).map(|p| dist(p, &self.vertices[c[0]])).fold(0.0, f64::max);
            if !(m > 1e-12 * scale.powi(n as i32)) {
                return Err(Error::DegenerateCell { cell: ci, measure: m });
            }
        }
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in &self.cells {
            for skip in 0..=n {
                let face: Vec<usize> =
                    c.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                *counts.entry(sorted_key(&face)).or_default() += 1;
            }
        }
        if let Some((f, k)) = counts.iter().find(|(_, &k)| k > 2) {
            return Err(Error::InvalidMesh(format!("facet {f:?} shared by {k} cells")));
        }
        let expected: std::collections::BTreeSet<Vec<usize>> =
            counts.iter().filter(|(_, &k)| k == 1).map(|(f, _)| f.clone()).collect();
        let listed: std::collections::BTreeSet<Vec<usize>> =
            self.boundary_facets.iter().map(|f| sorted_key(f)).collect();
        if expected != listed || listed.len() != self.boundary_facets.len() {
            return Err(Error::InvalidMesh("boundary facet list does not match the cell complex".into()));
        }
        if n >= 2 {
            let mut ridge: HashMap<Vec<usize>, usize> = HashMap::new();
            for f in &self.boundary_facets {
                for s in subsets(&sorted_key(f), n - 1) {
                    *ridge.entry(s).or_default() += 1;
                }
            }
            if let Some((r, k)) = ridge.iter().find(|(_, &k)| k != 2) {
                return Err(Error::NonManifoldBoundary(format!("ridge {r:?} in {k} boundary facets")));
            }
        }
        Ok(())
    }

    /// Largest deviation of vertices from the family's defining equations.
    pub fn surface_residual(&self) -> f64 {
        let fam = match Family::from_spec(&self.family) {
            Ok(f) => f,
            Err(_) => return 0.0,
        };
        let bv = self.boundary_vertices();
        let mut on = vec![false; self.vertices.len()];
        bv.iter().for_each(|&v| on[v] = true);
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, p)| fam.equation_residual(p, on[i]))
            .fold(0.0, f64::max)
    }

    /// Longest boundary edge, used as the mesh size `h` for boundary quantities.
    pub fn boundary_mesh_size(&self) -> f64 {
        self.boundary_simplices(1)
            .iter()
            .map(|e| dist(&self.vertices[e[0]], &self.vertices[e[1]]))
            .fold(0.0, f64::max)
    }

    /// Longest edge of the complex.
    pub fn mesh_size(&self) -> f64 {
        self.simplices(1)
            .iter()
            .map(|e| dist(&self.vertices[e[0]], &self.vertices[e[1]]))
            .fold(0.0, f64::max)
    }

    /// Disjoint union of two meshes of equal dimensions; tagged `Custom`.
    pub fn disjoint_union(a: &SimplicialMesh, b: &SimplicialMesh) -> Result<SimplicialMesh> {
        if a.intrinsic_dim != b.intrinsic_dim || a.ambient_dim != b.ambient_dim {
            return Err(Error::InvalidInput("dimension mismatch in disjoint union".into()));
        }
        let off = a.vertices.len();
        let shift = |s: &Vec<usize>| s.iter().map(|&v| v + off).collect::<Vec<_>>();
        let mut vertices = a.vertices.clone();
        vertices.extend(b.vertices.iter().cloned());
        let mut cells = a.cells.clone();
        cells.extend(b.cells.iter().map(shift));
        let mut boundary_facets = a.boundary_facets.clone();
        boundary_facets.extend(b.boundary_facets.iter().map(shift));
        let flags = CurvatureFlags {
            ric_lower: min_opt(a.curvature_flags.ric_lower, b.curvature_flags.ric_lower),
            pi_lower: min_opt(a.curvature_flags.pi_lower, b.curvature_flags.pi_lower),
            sec_lower: min_opt(a.curvature_flags.sec_lower, b.curvature_flags.sec_lower),
        };
        Ok(SimplicialMesh {
            intrinsic_dim: a.intrinsic_dim,
            ambient_dim: a.ambient_dim,
            vertices,
            cells,
            boundary_facets,
            family: DomainSpec::new(FamilyTag::Custom, a.intrinsic_dim, 0),
            curvature_flags: flags,
        })
    }

    /// Builds a `Custom` mesh from raw cells, deriving the boundary facets.
    pub fn from_cells(
        intrinsic_dim: usize,
        vertices: Vec<Vec<f64>>,
        cells: Vec<Vec<usize>>,
        curvature_flags: CurvatureFlags,
    ) -> Result<SimplicialMesh> {
        let ambient_dim = vertices.first().map_or(intrinsic_dim, |v| v.len());
        let boundary_facets = generate::derive_boundary(&vertices, &cells, intrinsic_dim, ambient_dim);
        let mesh = SimplicialMesh {
            intrinsic_dim,
            ambient_dim,
            vertices,
            cells,
            boundary_facets,
            family: DomainSpec::new(FamilyTag::Custom, intrinsic_dim, 0),
            curvature_flags,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SimplicialMesh> {
        let mesh: SimplicialMesh = serde_json::from_str(text)?;
        mesh.validate()?;
        Ok(mesh)
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        _ => None,
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// k-element subsets of a sorted slice, in lexicographic order.
pub(crate) fn subsets(v: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(v: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..v.len() {
            cur.push(v[i]);
            rec(v, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(v, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Unit vector orthogonal to the facet span, inside the span of facet and
/// `opposite`, pointing away from `opposite`.
pub(crate) fn outward_facet_normal(facet: &[&[f64]], opposite: &[f64]) -> Vec<f64> {
    let m = opposite.len();
    let base = facet[0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in facet.iter().skip(1) {
        let mut e: Vec<f64> = p.iter().zip(base).map(|(a, b)| a - b).collect();
        for b in &basis {
            let c = crate::linalg::dot(&e, b);
            crate::linalg::axpy(-c, b, &mut e);
        }
        let nrm = crate::linalg::norm(&e);
        e.iter_mut().for_each(|x| *x /= nrm);
        basis.push(e);
    }
    let mut v: Vec<f64> = (0..m).map(|i| base[i] - opposite[i]).collect();
    for _ in 0..2 {
        for b in &basis {
            let c = crate::linalg::dot(&v, b);
            crate::linalg::axpy(-c, b, &mut v);
        }
    }
    let nrm = crate::linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    v
}
