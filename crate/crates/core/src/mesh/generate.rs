//! Seed meshes, red refinement with exact re-projection, and the family
//! generators.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;

use super::family::Family;
use super::support::SupportFunction;
use super::{sorted_key, DomainSpec, FamilyTag, SimplicialMesh};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::poly::HarmonicIndex;

type Complex = (Vec<Vec<f64>>, Vec<Vec<usize>>);

/// Cross-polytope coned to the origin.
fn seed_ball(dim: usize) -> Complex {
    let mut verts = vec![vec![0.0; dim]];
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[i] = s;
            verts.push(v);
        }
    }
    // vertex 1 + 2i is +e_i, 2 + 2i is −e_i
    let mut cells = Vec::new();
    for mask in 0..(1usize << dim) {
        let mut c = vec![0];
        for i in 0..dim {
            c.push(1 + 2 * i + ((mask >> i) & 1));
        }
        cells.push(c);
    }
    (verts, cells)
}

fn boundary_edges(facets: &[Vec<usize>]) -> HashSet<(usize, usize)> {
    let mut set = HashSet::new();
    for f in facets {
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                set.insert((f[i].min(f[j]), f[i].max(f[j])));
            }
        }
    }
    set
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform red refinement: every edge is halved, triangles split in four and
/// tetrahedra in eight (shortest interior diagonal).
fn red_refine(
    verts: &[Vec<f64>],
    cells: &[Vec<usize>],
    dim: usize,
    boundary: &HashSet<(usize, usize)>,
    project: &dyn Fn(&[f64], bool) -> Vec<f64>,
) -> Complex {
    let mut out_verts = verts.to_vec();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, out_verts: &mut Vec<Vec<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *mids.entry(key).or_insert_with(|| {
            let p: Vec<f64> = verts[a].iter().zip(&verts[b]).map(|(x, y)| 0.5 * (x + y)).collect();
            out_verts.push(project(&p, boundary.contains(&key)));
            out_verts.len() - 1
        })
    };
    let mut out_cells = Vec::with_capacity(cells.len() << dim);
    for c in cells {
        if dim == 2 {
            let (a, b, cc) = (c[0], c[1], c[2]);
            let ab = mid(a, b, &mut out_verts);
            let bc = mid(b, cc, &mut out_verts);
            let ca = mid(cc, a, &mut out_verts);
            out_cells.push(vec![a, ab, ca]);
            out_cells.push(vec![ab, b, bc]);
            out_cells.push(vec![ca, bc, cc]);
            out_cells.push(vec![ab, bc, ca]);
        } else {
            let x = [c[0], c[1], c[2], c[3]];
            let mut m = [[0usize; 4]; 4];
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let v = mid(x[i], x[j], &mut out_verts);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            out_cells.push(vec![x[0], m[0][1], m[0][2], m[0][3]]);
            out_cells.push(vec![m[0][1], x[1], m[1][2], m[1][3]]);
            out_cells.push(vec![m[0][2], m[1][2], x[2], m[2][3]]);
            out_cells.push(vec![m[0][3], m[1][3], m[2][3], x[3]]);
            // octahedron: opposite pairs (01,23), (02,13), (03,12)
            let pairs = [(m[0][1], m[2][3]), (m[0][2], m[1][3]), (m[0][3], m[1][2])];
            let mut best = 0;
            let mut best_len = f64::INFINITY;
            for (k, &(p, q)) in pairs.iter().enumerate() {
                let l = dist2(&out_verts[p], &out_verts[q]);
                if l < best_len {
                    best_len = l;
                    best = k;
                }
            }
            let (p, q) = pairs[best];
            let (a, a2) = pairs[(best + 1) % 3];
            let (b, b2) = pairs[(best + 2) % 3];
            out_cells.push(vec![p, q, a, b]);
            out_cells.push(vec![p, q, b, a2]);
            out_cells.push(vec![p, q, a2, b2]);
            out_cells.push(vec![p, q, b2, a]);
        }
    }
    (out_verts, out_cells)
}

fn det(rows: &[Vec<f64>]) -> f64 {
    let k = rows.len();
    nalgebra::DMatrix::from_fn(k, k, |i, j| rows[i][j]).determinant()
}

/// Faces incident to exactly one cell, in discovery order, oriented so that
/// the cell (opposite, f₀, …, f_{n−1}) is positive: in flat space the
/// facet's right-hand normal is outward. For embedded manifolds with a
/// single normal the manifold normal is prepended to the determinant.
pub(crate) fn derive_boundary(
    verts: &[Vec<f64>],
    cells: &[Vec<usize>],
    n: usize,
    m: usize,
) -> Vec<Vec<usize>> {
    let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
    for c in cells {
        for skip in 0..=n {
            let face: Vec<usize> = c.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            *count.entry(sorted_key(&face)).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for c in cells {
        for skip in 0..=n {
            let mut face: Vec<usize> =
                c.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            if count[&sorted_key(&face)] != 1 {
                continue;
            }
            let opp = &verts[c[skip]];
            let mut rows: Vec<Vec<f64>> = Vec::new();
            if m == n + 1 {
                let centroid: Vec<f64> = (0..m)
                    .map(|i| c.iter().map(|&v| verts[v][i]).sum::<f64>() / (n + 1) as f64)
                    .collect();
                let cn = norm(&centroid);
                rows.push(centroid.iter().map(|x| x / cn).collect());
            }
            if rows.len() + n == m {
                rows.push(verts[face[0]].iter().zip(opp).map(|(a, b)| a - b).collect());
                for &v in &face[1..] {
                    rows.push(verts[v].iter().zip(&verts[face[0]]).map(|(a, b)| a - b).collect());
                }
                if det(&rows) < 0.0 {
                    face.swap(0, 1);
                }
            }
            out.push(face);
        }
    }
    out
}

fn reference_ball(dim: usize, level: usize) -> Complex {
    let (mut v, mut c) = seed_ball(dim);
    let proj = |p: &[f64], b: bool| -> Vec<f64> {
        if b {
            let r = norm(p);
            p.iter().map(|x| x / r).collect()
        } else {
            p.to_vec()
        }
    };
    for _ in 0..level {
        let facets = derive_boundary(&v, &c, dim, dim);
        let (nv, nc) = red_refine(&v, &c, dim, &boundary_edges(&facets), &proj);
        v = nv;
        c = nc;
    }
    (v, c)
}

fn on_boundary(verts: usize, facets: &[Vec<usize>]) -> Vec<bool> {
    let mut on = vec![false; verts];
    facets.iter().flatten().for_each(|&v| on[v] = true);
    on
}

fn solid_torus(length: f64, segments: Option<usize>, level: usize) -> Complex {
    let (disc_v, disc_c) = reference_ball(2, level);
    let boundary_chord = 2.0 * (PI / (4usize << level) as f64).sin();
    // at least as many layers as boundary edges on the disc, so the circle
    // factor is resolved as finely as the disc boundary for any length
    let layers = segments.unwrap_or_else(|| ((length / boundary_chord).ceil() as usize).max(4 << level));
    let big_r = length / (2.0 * PI);
    let nv = disc_v.len();
    let mut verts = Vec::with_capacity(nv * layers);
    for j in 0..layers {
        let th = 2.0 * PI * j as f64 / layers as f64;
        for p in &disc_v {
            verts.push(vec![p[0], p[1], big_r * th.cos(), big_r * th.sin()]);
        }
    }
    let mut cells = Vec::with_capacity(3 * disc_c.len() * layers);
    for j in 0..layers {
        let lo = j * nv;
        let hi = ((j + 1) % layers) * nv;
        for t in &disc_c {
            let mut s = t.clone();
            s.sort_unstable();
            let (a, b, c) = (s[0], s[1], s[2]);
            cells.push(vec![lo + a, lo + b, lo + c, hi + c]);
            cells.push(vec![lo + a, lo + b, hi + b, hi + c]);
            cells.push(vec![lo + a, hi + a, hi + b, hi + c]);
        }
    }
    (verts, cells)
}

fn assemble(spec: &DomainSpec, fam: &Family, verts: Vec<Vec<f64>>, cells: Vec<Vec<usize>>) -> Result<SimplicialMesh> {
    let m = fam.ambient_dim(spec.dim);
    let boundary_facets = derive_boundary(&verts, &cells, spec.dim, m);
    let mesh = SimplicialMesh {
        intrinsic_dim: spec.dim,
        ambient_dim: m,
        vertices: verts,
        cells,
        boundary_facets,
        family: spec.clone(),
        curvature_flags: fam.flags(),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Builds the mesh of a family at the requested refinement level.
pub fn generate_domain(spec: &DomainSpec) -> Result<SimplicialMesh> {
    let fam = Family::from_spec(spec)?;
    let level = spec.refinement_level;
    let (verts, cells) = match &fam {
        Family::Custom => {
            return Err(Error::InadmissibleSpec("Custom meshes are read from file, not generated".into()))
        }
        Family::Torus { length, segments } => solid_torus(*length, *segments, level),
        _ => {
            let (v, c) = reference_ball(spec.dim, level);
            let facets = derive_boundary(&v, &c, spec.dim, spec.dim);
            let on = on_boundary(v.len(), &facets);
            let mapped: Vec<Vec<f64>> = match &fam {
                Family::Ball { radius, .. } => v.iter().map(|p| p.iter().map(|x| x * radius).collect()).collect(),
                Family::Ellipsoid { axes } => {
                    v.iter().map(|p| p.iter().zip(axes).map(|(x, a)| x * a).collect()).collect()
                }
                Family::Support(sf) => {
                    sf.check_admissible()?;
                    v.iter()
                        .zip(&on)
                        .map(|(p, &b)| if b { sf.boundary_point(p) } else { sf.map_ball_point(p) })
                        .collect()
                }
                Family::Cap { dim, radius } => v
                    .iter()
                    .map(|p| {
                        let r = norm(p);
                        let mut x: Vec<f64> = if r == 0.0 {
                            vec![0.0; *dim]
                        } else {
                            p.iter().map(|c| c * (radius * r).sin() / r).collect()
                        };
                        x.push((radius * r).cos());
                        x
                    })
                    .collect(),
                _ => unreachable!(),
            };
            (mapped, c)
        }
    };
    assemble(spec, &fam, verts, cells)
}

/// One level of red refinement with exact re-projection of new vertices.
pub fn refine(mesh: &SimplicialMesh) -> Result<SimplicialMesh> {
    mesh.validate()?;
    let fam = Family::from_spec(&mesh.family)?;
    let project = |p: &[f64], b: bool| fam.project(p, b);
    let (verts, cells) = red_refine(
        &mesh.vertices,
        &mesh.cells,
        mesh.intrinsic_dim,
        &boundary_edges(&mesh.boundary_facets),
        &project,
    );
    let mut spec = mesh.family.clone();
    spec.refinement_level += 1;
    let boundary_facets = derive_boundary(&verts, &cells, mesh.intrinsic_dim, mesh.ambient_dim);
    let out = SimplicialMesh {
        intrinsic_dim: mesh.intrinsic_dim,
        ambient_dim: mesh.ambient_dim,
        vertices: verts,
        cells,
        boundary_facets,
        family: spec,
        curvature_flags: mesh.curvature_flags,
    };
    out.validate()?;
    Ok(out)
}

/// Convex body with support function `h0 + Σ c Y_ℓm` in R³.
pub fn support_body(h0: f64, coeffs: &BTreeMap<HarmonicIndex, f64>, refinement: usize) -> Result<SimplicialMesh> {
    let list: Vec<(HarmonicIndex, f64)> = coeffs.iter().map(|(k, v)| (*k, *v)).collect();
    let sf = SupportFunction::new(3, h0, &list)?;
    let mut spec = DomainSpec::new(FamilyTag::SupportBody, 3, refinement);
    spec.parameters = sf.to_params();
    generate_domain(&spec)
}
