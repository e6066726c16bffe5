//! Analytic geometry of the mesh families: exact surfaces for re-projection,
//! outward normals and shape operators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::support::{unit, SupportFunction};
use super::{CurvatureFlags, DomainSpec, FamilyTag};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Analytic boundary data at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub normal: Vec<f64>,
    /// Principal curvatures, ascending.
    pub principal: Vec<f64>,
    /// Shape operator in ambient coordinates, row-major `m × m`; it vanishes
    /// on the normal directions.
    pub shape: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) enum Family {
    Ball { dim: usize, radius: f64 },
    Ellipsoid { axes: Vec<f64> },
    Support(SupportFunction),
    Cap { dim: usize, radius: f64 },
    Torus { length: f64, segments: Option<usize> },
    Custom,
}

fn require(spec: &DomainSpec, name: &str) -> Result<f64> {
    spec.param(name)
        .ok_or_else(|| Error::InadmissibleSpec(format!("missing parameter {name:?}")))
}

fn check_dim(spec: &DomainSpec, allowed: &[usize], what: &str) -> Result<()> {
    if allowed.contains(&spec.dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension { dim: spec.dim, what: what.into() })
    }
}

impl Family {
    /// Parses the family parameters; admissibility of support bodies is
    /// checked separately since it needs a dense grid scan.
    pub fn from_spec(spec: &DomainSpec) -> Result<Family> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InadmissibleSpec(format!("{name} = {v} must be positive")))
            }
        };
        match spec.family_tag {
            FamilyTag::Ball => {
                check_dim(spec, &[2, 3], "ball")?;
                let radius = positive("radius", spec.param("radius").unwrap_or(1.0))?;
                Ok(Family::Ball { dim: spec.dim, radius })
            }
            FamilyTag::Ellipsoid => {
                check_dim(spec, &[2, 3], "ellipsoid")?;
                let names = ["a", "b", "c"];
                let axes = names[..spec.dim]
                    .iter()
                    .map(|n| require(spec, n).and_then(|v| positive(n, v)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Family::Ellipsoid { axes })
            }
            FamilyTag::SupportBody => {
                check_dim(spec, &[2, 3], "support body")?;
                Ok(Family::Support(SupportFunction::from_params(spec.dim, &spec.parameters)?))
            }
            FamilyTag::SphericalCap => {
                check_dim(spec, &[2, 3], "spherical cap")?;
                let radius = require(spec, "radius")?;
                if !(radius > 0.0 && radius < PI) {
                    return Err(Error::InadmissibleSpec(format!("cap radius {radius} outside (0, π)")));
                }
                Ok(Family::Cap { dim: spec.dim, radius })
            }
            FamilyTag::ProductSolidTorus => {
                check_dim(spec, &[3], "product solid torus")?;
                let length = positive("length", require(spec, "length")?)?;
                let segments = match spec.param("segments") {
                    None => None,
                    Some(s) if s >= 3.0 && s.fract() == 0.0 => Some(s as usize),
                    Some(s) => return Err(Error::InadmissibleSpec(format!("segments = {s} must be an integer ≥ 3"))),
                };
                Ok(Family::Torus { length, segments })
            }
            FamilyTag::Custom => Ok(Family::Custom),
        }
    }

    pub fn flags(&self) -> CurvatureFlags {
        match self {
            Family::Ball { radius, .. } => flags(0.0, 1.0 / radius, 0.0),
            Family::Ellipsoid { axes } => {
                let lo = axes.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = axes.iter().cloned().fold(0.0, f64::max);
                flags(0.0, lo / (hi * hi), 0.0)
            }
            Family::Support(_) => flags(0.0, 1.0, 0.0),
            Family::Cap { dim, radius } => flags((*dim - 1) as f64, snap(1.0 / radius.tan()), 1.0),
            Family::Torus { .. } => flags(0.0, 0.0, 0.0),
            Family::Custom => CurvatureFlags::default(),
        }
    }

    pub fn ambient_dim(&self, dim: usize) -> usize {
        match self {
            Family::Cap { dim, .. } => dim + 1,
            Family::Torus { .. } => 4,
            _ => dim,
        }
    }

    /// Moves a new vertex onto the exact manifold, and onto the exact
    /// boundary when `boundary` is set.
    pub fn project(&self, p: &[f64], boundary: bool) -> Vec<f64> {
        match self {
            Family::Ball { radius, .. } if boundary => unit(p).into_iter().map(|v| v * radius).collect(),
            Family::Ellipsoid { axes } if boundary => {
                let s = p.iter().zip(axes).map(|(x, a)| (x / a) * (x / a)).sum::<f64>().sqrt();
                p.iter().map(|x| x / s).collect()
            }
            Family::Support(sf) if boundary => sf.radial_point(p),
            Family::Cap { dim, radius } => {
                let x = unit(p);
                if !boundary {
                    return x;
                }
                let horiz = unit(&x[..*dim]);
                let mut out: Vec<f64> = horiz.iter().map(|h| h * radius.sin()).collect();
                out.push(radius.cos());
                out
            }
            Family::Torus { length, .. } => {
                let big_r = length / (2.0 * PI);
                let c = unit(&p[2..4]);
                let xy = if boundary { unit(&p[..2]) } else { p[..2].to_vec() };
                vec![xy[0], xy[1], big_r * c[0], big_r * c[1]]
            }
            _ => p.to_vec(),
        }
    }

    /// Deviation of `p` from the defining equations of its stratum.
    pub fn equation_residual(&self, p: &[f64], boundary: bool) -> f64 {
        match self {
            Family::Ball { radius, .. } => {
                let r = norm(p);
                if boundary {
                    (r - radius).abs()
                } else {
                    (r - radius).max(0.0)
                }
            }
            Family::Ellipsoid { axes } => {
                let s = p.iter().zip(axes).map(|(x, a)| (x / a) * (x / a)).sum::<f64>().sqrt();
                if boundary {
                    (s - 1.0).abs()
                } else {
                    (s - 1.0).max(0.0)
                }
            }
            Family::Support(sf) => {
                if boundary {
                    let xi = sf.normal_at(p);
                    let y = sf.boundary_point(&xi);
                    y.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                } else {
                    0.0
                }
            }
            Family::Cap { dim, radius } => {
                let sphere = (norm(p) - 1.0).abs();
                let lid = if boundary {
                    (p[*dim] - radius.cos()).abs()
                } else {
                    (radius.cos() - p[*dim]).max(0.0)
                };
                sphere.max(lid)
            }
            Family::Torus { length, .. } => {
                let big_r = length / (2.0 * PI);
                let circle = (norm(&p[2..4]) - big_r).abs();
                let disc = norm(&p[..2]) - 1.0;
                circle.max(if boundary { disc.abs() } else { disc.max(0.0) })
            }
            Family::Custom => 0.0,
        }
    }

    /// Analytic normal and shape operator at a boundary point.
    pub fn surface_point(&self, p: &[f64]) -> Option<SurfacePoint> {
        match self {
            Family::Ball { dim, radius } => {
                let nu = unit(p);
                let shape = projector(&nu, &[], *dim).into_iter().map(|v| v / radius).collect();
                Some(SurfacePoint { normal: nu, principal: vec![1.0 / radius; dim - 1], shape })
            }
            Family::Ellipsoid { axes } => {
                let d = axes.len();
                let g: Vec<f64> = p.iter().zip(axes).map(|(x, a)| x / (a * a)).collect();
                let gn = norm(&g);
                let nu: Vec<f64> = g.iter().map(|v| v / gn).collect();
                let proj = projector(&nu, &[], d);
                let mut shape = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        shape[i * d + j] =
                            (0..d).map(|k| proj[i * d + k] * proj[k * d + j] / (axes[k] * axes[k])).sum::<f64>() / gn;
                    }
                }
                let principal = restricted_eigenvalues(&shape, &tangent_basis(&nu, &[]), d);
                Some(SurfacePoint { normal: nu, principal, shape })
            }
            Family::Support(sf) => {
                let xi = sf.normal_at(p);
                let mut principal: Vec<f64> = sf.radii(&xi).into_iter().map(|r| 1.0 / r).collect();
                principal.sort_by(f64::total_cmp);
                let shape = sf.shape_operator(&xi);
                Some(SurfacePoint { normal: xi, principal, shape })
            }
            Family::Cap { dim, radius } => {
                let m = dim + 1;
                let x = unit(p);
                let d = unit(&x[..*dim]);
                let mut nu: Vec<f64> = d.iter().map(|v| v * radius.cos()).collect();
                nu.push(-radius.sin());
                let k = snap(1.0 / radius.tan());
                let shape = projector(&nu, &[x], m).into_iter().map(|v| v * k).collect();
                Some(SurfacePoint { normal: nu, principal: vec![k; dim - 1], shape })
            }
            Family::Torus { .. } => {
                let xy = unit(&p[..2]);
                let nu = vec![xy[0], xy[1], 0.0, 0.0];
                let t = [-xy[1], xy[0], 0.0, 0.0];
                let mut shape = vec![0.0; 16];
                for i in 0..4 {
                    for j in 0..4 {
                        shape[i * 4 + j] = t[i] * t[j];
                    }
                }
                Some(SurfacePoint { normal: nu, principal: vec![0.0, 1.0], shape })
            }
            Family::Custom => None,
        }
    }
}

fn flags(ric: f64, pi: f64, sec: f64) -> CurvatureFlags {
    CurvatureFlags { ric_lower: Some(ric), pi_lower: Some(pi), sec_lower: Some(sec) }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-14 {
        0.0
    } else {
        v
    }
}

/// `I − ννᵀ − Σ wwᵀ` over `extra` unit normals, row-major `m × m`.
pub(crate) fn projector(nu: &[f64], extra: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut p = vec![0.0; m * m];
    for i in 0..m {
        p[i * m + i] = 1.0;
        for j in 0..m {
            p[i * m + j] -= nu[i] * nu[j];
            for w in extra {
                p[i * m + j] -= w[i] * w[j];
            }
        }
    }
    p
}

/// Orthonormal basis of the complement of `v` and `extra` (all unit and
/// mutually orthogonal), built by Gram–Schmidt on coordinate axes.
pub(crate) fn tangent_basis(v: &[f64], extra: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = v.len();
    let mut fixed: Vec<Vec<f64>> = vec![v.to_vec()];
    fixed.extend(extra.iter().cloned());
    let want = m - fixed.len();
    let mut axes: Vec<usize> = (0..m).collect();
    axes.sort_by(|&a, &b| {
        let sa: f64 = fixed.iter().map(|f| f[a] * f[a]).sum();
        let sb: f64 = fixed.iter().map(|f| f[b] * f[b]).sum();
        sa.total_cmp(&sb)
    });
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &ax in &axes {
        if out.len() == want {
            break;
        }
        let mut e = vec![0.0; m];
        e[ax] = 1.0;
        for _ in 0..2 {
            for f in fixed.iter().chain(out.iter()) {
                let c = dot(&e, f);
                for i in 0..m {
                    e[i] -= c * f[i];
                }
            }
        }
        let n = norm(&e);
        if n > 1e-8 {
            out.push(e.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Eigenvalues (ascending) of a symmetric `k × k` row-major matrix.
pub(crate) fn small_symmetric_eigenvalues(a: &[f64], k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![a[0]],
        2 => {
            let mean = 0.5 * (a[0] + a[3]);
            let off = 0.5 * (a[1] + a[2]);
            let rad = (0.25 * (a[0] - a[3]).powi(2) + off * off).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let m = nalgebra::DMatrix::from_row_slice(k, k, a);
            let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        }
    }
}

/// Eigenvalues of `Bᵀ S B` for an orthonormal family `B`.
pub(crate) fn restricted_eigenvalues(shape: &[f64], basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let k = basis.len();
    let mut r = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += basis[a][i] * shape[i * m + j] * basis[b][j];
                }
            }
            r[a * k + b] = s;
        }
    }
    small_symmetric_eigenvalues(&r, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_curvature_at_axis_point() {
        // at (a,0,0) the principal curvatures are a/b² and a/c²
        let fam = Family::Ellipsoid { axes: vec![0.9, 0.85, 0.82] };
        let sp = fam.surface_point(&[0.9, 0.0, 0.0]).unwrap();
        let mut expect = [0.9 / (0.85 * 0.85), 0.9 / (0.82 * 0.82)];
        expect.sort_by(f64::total_cmp);
        for (a, b) in sp.principal.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_normal_is_tangent_to_sphere() {
        let fam = Family::Cap { dim: 2, radius: 1.0 };
        let p = fam.project(&[0.3, 0.4, 0.5], true);
        let sp = fam.surface_point(&p).unwrap();
        assert!(dot(&sp.normal, &p).abs() < 1e-14);
        assert!((norm(&sp.normal) - 1.0).abs() < 1e-14);
        // moving along the normal lowers the last coordinate (leaves the cap)
        assert!(sp.normal[2] < 0.0);
        assert!((sp.principal[0] - 1.0 / 1f64.tan()).abs() < 1e-14);
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let v = unit(&[0.1, -0.7, 0.2, 0.4]);
        let w = unit(&[0.7, 0.1, 0.0, 0.0]);
        let w: Vec<f64> = {
            let c = dot(&w, &v);
            unit(&w.iter().zip(&v).map(|(a, b)| a - c * b).collect::<Vec<_>>())
        };
        let b = tangent_basis(&v, &[w.clone()]);
        assert_eq!(b.len(), 2);
        for e in &b {
            assert!(dot(e, &v).abs() < 1e-14 && dot(e, &w).abs() < 1e-14);
            assert!((norm(e) - 1.0).abs() < 1e-14);
        }
        assert!(dot(&b[0], &b[1]).abs() < 1e-14);
    }
}
