//! Refinement studies: a quantity over several levels of one family, its
//! error against the closed form and the observed order.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, dirichlet_energy};
use crate::mesh::{generate_domain, DomainSpec, FamilyTag, SimplicialMesh};
use crate::spectral::{boundary_laplacian_spectrum, steklov_spectrum_with};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Volume,
    BoundaryArea,
    SteklovSigma1,
    LaplacianLambda1,
    ConstantEnergy,
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "volume" => Quantity::Volume,
            "boundary_area" => Quantity::BoundaryArea,
            "steklov_sigma1" => Quantity::SteklovSigma1,
            "laplacian_lambda1" => Quantity::LaplacianLambda1,
            "constant_energy" => Quantity::ConstantEnergy,
            _ => return Err(Error::InvalidInput(format!("unknown quantity {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub value: f64,
    /// `|value − exact|`, when a closed form is known.
    pub error: Option<f64>,
    /// `log₂(e_{k−1}/e_k)` against the previous row.
    pub observed_order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub domain: DomainSpec,
    pub quantity: Quantity,
    pub exact: Option<f64>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from("level,h,value,error,observed_order\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e},{},{}\n", r.level, r.h, r.value, opt(r.error), opt(r.observed_order)));
        }
        out
    }
}

fn sphere_like(spec: &DomainSpec) -> Option<(f64, f64)> {
    // (radius of the boundary sphere, radius of the ball or cap)
    match spec.family_tag {
        FamilyTag::Ball => {
            let r = spec.param("radius").unwrap_or(1.0);
            Some((r, r))
        }
        FamilyTag::SphericalCap => spec.param("radius").map(|r| (r.sin(), r)),
        _ => None,
    }
}

/// Closed-form value of a quantity, where one is known.
pub fn exact_value(spec: &DomainSpec, q: Quantity) -> Option<f64> {
    let n = spec.dim;
    let nf = n as f64;
    match (q, spec.family_tag) {
        (Quantity::ConstantEnergy, _) => Some(0.0),
        (Quantity::Volume, FamilyTag::Ball) => {
            let r = spec.param("radius").unwrap_or(1.0);
            Some(if n == 2 { PI * r * r } else { 4.0 / 3.0 * PI * r.powi(3) })
        }
        (Quantity::Volume, FamilyTag::Ellipsoid) => {
            let (a, b) = (spec.param("a")?, spec.param("b")?);
            Some(if n == 2 { PI * a * b } else { 4.0 / 3.0 * PI * a * b * spec.param("c")? })
        }
        (Quantity::Volume, FamilyTag::SphericalCap) => {
            let r = spec.param("radius")?;
            Some(if n == 2 { 2.0 * PI * (1.0 - r.cos()) } else { PI * (2.0 * r - (2.0 * r).sin()) })
        }
        (Quantity::Volume, FamilyTag::ProductSolidTorus) => Some(PI * spec.param("length")?),
        (Quantity::BoundaryArea, FamilyTag::Ball | FamilyTag::SphericalCap) => {
            let (rho, _) = sphere_like(spec)?;
            Some(if n == 2 { 2.0 * PI * rho } else { 4.0 * PI * rho * rho })
        }
        (Quantity::BoundaryArea, FamilyTag::ProductSolidTorus) => Some(2.0 * PI * spec.param("length")?),
        (Quantity::SteklovSigma1, FamilyTag::Ball) => Some(1.0 / spec.param("radius").unwrap_or(1.0)),
        (Quantity::LaplacianLambda1, FamilyTag::Ball | FamilyTag::SphericalCap) => {
            let (rho, _) = sphere_like(spec)?;
            Some((nf - 1.0) / (rho * rho))
        }
        (Quantity::LaplacianLambda1, FamilyTag::ProductSolidTorus) => {
            let l = spec.param("length")?;
            Some(1.0f64.min((2.0 * PI / l).powi(2)))
        }
        _ => None,
    }
}

fn first_positive(values: &[f64]) -> Result<f64> {
    values
        .iter()
        .copied()
        .find(|&v| v > 1e-8)
        .ok_or_else(|| Error::EigenNoConvergence("no positive eigenvalue among those computed".into()))
}

/// Value of a quantity on one mesh.
pub fn measure_quantity(mesh: &SimplicialMesh, q: Quantity, threads: usize) -> Result<f64> {
    Ok(match q {
        Quantity::Volume => mesh.measure().volume,
        Quantity::BoundaryArea => mesh.measure().boundary_area,
        Quantity::SteklovSigma1 => first_positive(&steklov_spectrum_with(mesh, 2, threads)?.eigenvalues)?,
        Quantity::LaplacianLambda1 => first_positive(&boundary_laplacian_spectrum(mesh, 2)?.eigenvalues)?,
        Quantity::ConstantEnergy => {
            let k = assemble_stiffness(mesh)?;
            dirichlet_energy(&k, &vec![1.0; mesh.vertex_count()])
        }
    })
}

/// One row per level, in the given order.
pub fn convergence_table(spec: &DomainSpec, levels: &[usize], q: Quantity, threads: usize) -> Result<ConvergenceTable> {
    if levels.len() < 2 {
        return Err(Error::InvalidInput("a convergence table needs at least two levels".into()));
    }
    let exact = exact_value(spec, q);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut s = spec.clone();
        s.refinement_level = level;
        let mesh = generate_domain(&s)?;
        let value = measure_quantity(&mesh, q, threads)?;
        let error = exact.map(|e| (value - e).abs());
        let observed_order = match (rows.last().and_then(|r| r.error), error) {
            (Some(prev), Some(e)) if prev > 0.0 && e > 0.0 => Some((prev / e).log2()),
            _ => None,
        };
        rows.push(ConvergenceRow { level, h: mesh.mesh_size(), value, error, observed_order });
    }
    Ok(ConvergenceTable { domain: spec.clone(), quantity: q, exact, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let cap = DomainSpec::cap(3, PI / 2.0, 0);
        assert!((exact_value(&cap, Quantity::Volume).unwrap() - PI * PI).abs() < 1e-12);
        assert!((exact_value(&cap, Quantity::BoundaryArea).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert_eq!(exact_value(&cap, Quantity::LaplacianLambda1), Some(2.0));
        let torus = DomainSpec::solid_torus(10.0, 0);
        assert!((exact_value(&torus, Quantity::LaplacianLambda1).unwrap() - (PI / 5.0).powi(2)).abs() < 1e-12);
        assert_eq!(exact_value(&DomainSpec::ellipsoid(&[1.0, 2.0, 3.0], 0), Quantity::BoundaryArea), None);
        assert!("energy".parse::<Quantity>().is_err());
    }
}
