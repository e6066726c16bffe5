//! Integral inequalities and identities evaluated on a mesh, aggregated into
//! a machine-readable report.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mesh::{boundary_geometry, generate_domain, support_body, BoundaryGeometry, DomainSpec, FamilyTag, SimplicialMesh};
use crate::nonlinear::{beckner_slack, minimize_quotient_with, BoundaryContext, Classification};
use crate::poly::{HarmonicIndex, Poly, PolyJet, MAX_VARS};
use crate::quadrature::{simplex_degree2, sphere_area};
use crate::spectral::boundary_laplacian_spectrum;
use crate::topology::{cohomology_ranks, consistency_audit, AuditEntry, CohomologyResult, Verdict};

/// How a check bears on the exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// An identity; both sides must agree.
    Identity,
    /// A theorem whose hypotheses the mesh satisfies; a failure is a bug.
    Theorem,
    /// Numerical evidence for a conjecture; never gates.
    Evidence,
    /// Records a counterexample; gates on the documented behaviour.
    Documentation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub lhs_formula: String,
    pub rhs: f64,
    pub rhs_formula: String,
    /// `rhs − lhs`; non-negative when the inequality holds.
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub equality_expected: bool,
    pub notes: String,
}

impl CheckResult {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        check_id: &str,
        kind: CheckKind,
        (lhs, lhs_formula): (f64, &str),
        (rhs, rhs_formula): (f64, &str),
        tolerance: f64,
        equality_expected: bool,
        notes: String,
    ) -> Self {
        let slack = rhs - lhs;
        let pass = slack.is_finite() && slack >= -tolerance && (!equality_expected || slack.abs() <= tolerance);
        let mut notes = notes;
        if equality_expected && pass {
            if !notes.is_empty() {
                notes.push_str("; ");
            }
            let _ = write!(notes, "equality within tolerance — rigidity case of {check_id}");
        }
        Self {
            check_id: check_id.into(),
            kind,
            lhs,
            lhs_formula: lhs_formula.into(),
            rhs,
            rhs_formula: rhs_formula.into(),
            slack,
            tolerance,
            pass,
            equality_expected,
            notes,
        }
    }

    /// Whether a failure of this check is a hard failure.
    pub fn gates(&self) -> bool {
        self.kind != CheckKind::Evidence
    }
}

/// Per-check tolerance law: `max(c·h², floor)` relative to the larger side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRule {
    pub c: f64,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rules: BTreeMap<String, ToleranceRule>,
}

/// `(check id, c, floor)`; `h` is the longest edge of the mesh.
pub const TOLERANCE_TABLE: &[(&str, f64, f64)] = &[
    ("reilly", 0.1, 1e-10),
    ("divergence_volume", 0.0, 1e-10),
    ("eigen_lower_bound", 0.02, 1e-6),
    ("ros", 0.2, 1e-10),
    ("hersch", 0.25, 1e-10),
    ("area_bound", 0.25, 1e-6),
    ("volume_bound", 0.5, 1e-6),
    ("shi_tam", 0.1, 1e-10),
    ("mean_curvature_vector", 0.1, 1e-10),
    ("quotient_constancy", 0.1, 1e-6),
    ("beckner", 0.0, 1e-8),
    ("topology", 0.0, 0.0),
    ("mean_curvature_insufficiency", 0.0, 0.0),
];

impl Default for Tolerances {
    fn default() -> Self {
        let rules = TOLERANCE_TABLE.iter().map(|&(id, c, floor)| (id.to_string(), ToleranceRule { c, floor })).collect();
        Self { rules }
    }
}

impl Tolerances {
    /// Replaces the constant `c` of one rule.
    pub fn set(&mut self, id: &str, c: f64) -> Result<()> {
        let rule = self.rules.get_mut(id).ok_or_else(|| Error::InvalidInput(format!("unknown tolerance key {id:?}")))?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("tolerance {id} = {c} must be non-negative")));
        }
        rule.c = c;
        Ok(())
    }

    /// Relative tolerance at mesh size `h`.
    pub fn relative(&self, id: &str, h: f64) -> f64 {
        let rule = self.rules.get(id).copied().unwrap_or(ToleranceRule { c: 1.0, floor: 1e-10 });
        (rule.c * h * h).max(rule.floor)
    }
}

const EPS: f64 = 1e-12;

fn at_least(v: Option<f64>, t: f64) -> bool {
    v.is_some_and(|x| x >= t - EPS)
}

fn is_unit_ball(mesh: &SimplicialMesh) -> bool {
    mesh.family.family_tag == FamilyTag::Ball && (mesh.family.param("radius").unwrap_or(1.0) - 1.0).abs() < EPS
}

fn is_hemisphere(mesh: &SimplicialMesh) -> bool {
    mesh.family.family_tag == FamilyTag::SphericalCap && mesh.family.param("radius").is_some_and(|r| (r - PI / 2.0).abs() < 1e-9)
}

fn is_flat(mesh: &SimplicialMesh) -> bool {
    mesh.ambient_dim == mesh.intrinsic_dim
}

fn sectional(mesh: &SimplicialMesh) -> Option<f64> {
    mesh.curvature_flags.sec_lower
}

/// Check evaluator with lazily computed shared data.
pub struct Verifier<'a> {
    mesh: &'a SimplicialMesh,
    tolerances: Tolerances,
    h: f64,
    geometry: OnceCell<BoundaryGeometry>,
    lambda1: OnceCell<f64>,
}

impl<'a> Verifier<'a> {
    pub fn new(mesh: &'a SimplicialMesh, tolerances: Tolerances) -> Self {
        Self { mesh, tolerances, h: mesh.mesh_size(), geometry: OnceCell::new(), lambda1: OnceCell::new() }
    }

    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    fn tol(&self, id: &str, scale: f64) -> f64 {
        self.tolerances.relative(id, self.h) * scale
    }

    fn geometry(&self) -> Result<&BoundaryGeometry> {
        if let Some(g) = self.geometry.get() {
            return Ok(g);
        }
        let g = boundary_geometry(self.mesh)?;
        Ok(self.geometry.get_or_init(|| g))
    }

    /// First nonzero eigenvalue of the boundary Laplacian.
    pub fn lambda1(&self) -> Result<f64> {
        if let Some(&l) = self.lambda1.get() {
            return Ok(l);
        }
        let spec = boundary_laplacian_spectrum(self.mesh, 3)?;
        let l = spec
            .eigenvalues
            .iter()
            .copied()
            .find(|&v| v > 1e-8)
            .ok_or_else(|| Error::EigenNoConvergence("no positive boundary eigenvalue among the first four".into()))?;
        Ok(*self.lambda1.get_or_init(|| l))
    }

    /// Both sides of Reilly's formula for a polynomial `u` on a flat mesh:
    /// `∫_M (Δu)² − |D²u|²` against `∫_Σ 2χΔ_Σ f + Hχ² + Π(∇f, ∇f)`.
    pub fn reilly_residual(&self, u: &Poly, label: &str) -> Result<CheckResult> {
        let mesh = self.mesh;
        if !is_flat(mesh) {
            return Err(Error::HypothesisNotMet("Reilly check needs a Euclidean domain".into()));
        }
        let n = mesh.intrinsic_dim;
        if n > MAX_VARS {
            return Err(Error::UnsupportedDimension { dim: n, what: "polynomial test function".into() });
        }
        let jet = PolyJet::new(u, n);
        let rule = simplex_degree2(n);
        let (mut lhs, mut scale) = (0.0, 0.0);
        for (c, cell) in mesh.cells.iter().enumerate() {
            let vol = mesh.cell_measure(c);
            for (bary, w) in &rule {
                let x: Vec<f64> = (0..n).map(|k| cell.iter().zip(bary).map(|(&v, b)| b * mesh.vertices[v][k]).sum()).collect();
                let hess = jet.hessian(&x);
                let lap: f64 = (0..n).map(|i| hess[i * n + i]).sum();
                let hs: f64 = hess.iter().map(|v| v * v).sum();
                lhs += w * vol * (lap * lap - hs);
                scale += w * vol * (lap * lap + hs);
            }
        }
        let geo = self.geometry()?;
        let mut rhs = 0.0;
        for (i, &v) in geo.vertices.iter().enumerate() {
            let x = &mesh.vertices[v];
            let nu = &geo.vertex_normals[i];
            let shape = &geo.shape_operators[i];
            let h = geo.mean_curvature[i];
            let grad = jet.gradient(x);
            let hess = jet.hessian(x);
            let chi = dot(&grad, nu);
            let tangential: Vec<f64> = (0..n).map(|k| grad[k] - chi * nu[k]).collect();
            let lap: f64 = (0..n).map(|k| hess[k * n + k]).sum();
            let hnn: f64 = (0..n).map(|a| (0..n).map(|b| nu[a] * hess[a * n + b] * nu[b]).sum::<f64>()).sum();
            let lap_sigma = lap - hnn - h * chi;
            let pi: f64 = (0..n).map(|a| (0..n).map(|b| tangential[a] * shape[a * n + b] * tangential[b]).sum::<f64>()).sum();
            let w = geo.area_weights[i];
            rhs += w * (2.0 * chi * lap_sigma + h * chi * chi + pi);
            scale += w * ((2.0 * chi * lap_sigma).abs() + (h * chi * chi).abs() + pi.abs());
        }
        let id = format!("reilly[{label}]");
        // fitted curvature is not an analytic input, so the identity only counts as evidence
        let (kind, notes) = if geo.analytic {
            (CheckKind::Identity, String::new())
        } else {
            (CheckKind::Evidence, "boundary curvature from quadric fit".to_string())
        };
        Ok(CheckResult::new(
            &id,
            kind,
            (lhs, "∫_M (Δu)² − |D²u|² (Ric = 0)"),
            (rhs, "∫_Σ 2χΔ_Σf + Hχ² + Π(∇f,∇f)"),
            self.tol("reilly", scale),
            true,
            notes,
        ))
    }

    /// Volume from the cells against `(1/n)∫_Σ x·ν` over the flat facets.
    pub fn divergence_volume(&self) -> Result<CheckResult> {
        let mesh = self.mesh;
        if !is_flat(mesh) {
            return Err(Error::HypothesisNotMet("divergence check needs a Euclidean domain".into()));
        }
        let n = mesh.intrinsic_dim;
        let normals = mesh.facet_normals();
        let flux: f64 = mesh
            .boundary_facets
            .iter()
            .enumerate()
            .map(|(f, facet)| {
                let centroid: Vec<f64> =
                    (0..n).map(|k| facet.iter().map(|&v| mesh.vertices[v][k]).sum::<f64>() / facet.len() as f64).collect();
                mesh.facet_measure(f) * dot(&centroid, &normals[f])
            })
            .sum::<f64>()
            / n as f64;
        let vol = mesh.measure().volume;
        Ok(CheckResult::new(
            "divergence_volume",
            CheckKind::Identity,
            (vol, "Σ cell volumes"),
            (flux, "(1/n) Σ_facets |F| x_F·ν_F"),
            self.tol("divergence_volume", vol.abs().max(flux.abs())),
            true,
            String::new(),
        ))
    }

    /// `λ₁(Σ) ≥ n − 1` when Ric ≥ 0 and Π ≥ 1; `λ₁(Σ) ≥ (n − 1)/2` when
    /// Ric ≥ n − 1 and Π ≥ 0.
    pub fn check_eigen_lower_bound(&self) -> Result<CheckResult> {
        let mesh = self.mesh;
        let flags = mesh.curvature_flags;
        let n = mesh.intrinsic_dim as f64;
        let (id, bound, formula, equality) = if at_least(flags.ric_lower, 0.0) && at_least(flags.pi_lower, 1.0) {
            ("eigen_lower_bound[xia]", n - 1.0, "n − 1", is_unit_ball(mesh))
        } else if at_least(flags.ric_lower, n - 1.0) && at_least(flags.pi_lower, 0.0) {
            ("eigen_lower_bound[ricci_n_minus_1]", (n - 1.0) / 2.0, "(n − 1)/2", false)
        } else {
            return Err(Error::HypothesisNotMet("neither Ric ≥ 0 with Π ≥ 1 nor Ric ≥ n−1 with Π ≥ 0".into()));
        };
        let l1 = self.lambda1()?;
        let tol = 5.0 * self.tol("eigen_lower_bound", bound);
        let notes = if formula == "(n − 1)/2" { format!("λ₁/(n−1) = {:.6}", l1 / (n - 1.0)) } else { String::new() };
        Ok(CheckResult::new(id, CheckKind::Theorem, (bound, formula), (l1, "λ₁(Σ), P1 boundary Laplacian"), tol, equality, notes))
    }

    /// `∫_Σ 1/H ≥ n/(n−1)·V` for Ric ≥ 0 and H > 0.
    pub fn check_ros(&self) -> Result<CheckResult> {
        let mesh = self.mesh;
        if !at_least(mesh.curvature_flags.ric_lower, 0.0) {
            return Err(Error::HypothesisNotMet("Ric ≥ 0 not flagged".into()));
        }
        let geo = self.geometry()?;
        if let Some((i, &h)) = geo.mean_curvature.iter().enumerate().find(|(_, &h)| !(h > 0.0)) {
            return Err(Error::NonpositiveMeanCurvature { vertex: geo.vertices[i], value: h });
        }
        let n = mesh.intrinsic_dim as f64;
        let lhs = n / (n - 1.0) * mesh.measure().volume;
        let rhs: f64 = geo.area_weights.iter().zip(&geo.mean_curvature).map(|(w, h)| w / h).sum();
        let equality = mesh.family.family_tag == FamilyTag::Ball;
        Ok(CheckResult::new("ros", CheckKind::Theorem, (lhs, "n/(n−1)·V"), (rhs, "∫_Σ 1/H"), self.tol("ros", lhs.max(rhs)), equality, String::new()))
    }

    /// `A(Σ) ≤ 8π/λ₁(Σ)` for a genus-zero boundary surface.
    pub fn check_hersch(&self) -> Result<CheckResult> {
        let mesh = self.mesh;
        if mesh.intrinsic_dim != 3 {
            return Err(Error::UnsupportedDimension { dim: mesh.intrinsic_dim, what: "Hersch check".into() });
        }
        let comps = crate::topology::classify_boundary(mesh)?;
        if let Some(c) = comps.iter().find(|c| c.genus != 0) {
            return Err(Error::WrongGenus(c.genus));
        }
        if comps.len() != 1 {
            return Err(Error::HypothesisNotMet(format!("{} boundary components", comps.len())));
        }
        let area = mesh.measure().boundary_area;
        let rhs = 8.0 * PI / self.lambda1()?;
        let equality = matches!(mesh.family.family_tag, FamilyTag::Ball | FamilyTag::SphericalCap);
        Ok(CheckResult::new("hersch", CheckKind::Theorem, (area, "A(Σ)"), (rhs, "8π/λ₁(Σ)"), self.tol("hersch", area.max(rhs)), equality, String::new()))
    }

    /// Every area and volume bound whose hypotheses the flags satisfy.
    pub fn check_area_volume_bounds(&self) -> Result<Vec<CheckResult>> {
        let mesh = self.mesh;
        let flags = mesh.curvature_flags;
        let n = mesh.intrinsic_dim;
        let nf = n as f64;
        let meas = mesh.measure();
        let sphere = sphere_area(n);
        let mut out = Vec::new();
        let ric0 = at_least(flags.ric_lower, 0.0);
        let pi1 = at_least(flags.pi_lower, 1.0);
        let pi0 = at_least(flags.pi_lower, 0.0);
        let area_check = |id: &str, kind: CheckKind, bound: f64, formula: &str, equality: bool| {
            CheckResult::new(
                id,
                kind,
                (meas.boundary_area, "|Σ|"),
                (bound, formula),
                self.tol("area_bound", bound),
                equality,
                String::new(),
            )
        };
        if n == 3 && ric0 && pi1 {
            out.push(area_check("area_bound[dim3]", CheckKind::Theorem, 4.0 * PI, "4π", is_unit_ball(mesh)));
            let bound = 4.0 * PI / 3.0;
            out.push(CheckResult::new(
                "volume_bound[dim3]",
                CheckKind::Theorem,
                (meas.volume, "V(M)"),
                (bound, "4π/3"),
                self.tol("volume_bound", bound),
                is_unit_ball(mesh),
                String::new(),
            ));
        }
        if pi1 && at_least(sectional(mesh), 0.0) {
            out.push(area_check("area_bound[sec_nonnegative]", CheckKind::Theorem, sphere, "|S^{n−1}|", is_unit_ball(mesh)));
        } else if ric0 && pi1 {
            out.push(area_check("area_bound[ric_nonnegative_conjecture]", CheckKind::Evidence, sphere, "|S^{n−1}|", is_unit_ball(mesh)));
        }
        if pi0 && at_least(sectional(mesh), 1.0) {
            out.push(area_check("area_bound[sec_one]", CheckKind::Theorem, sphere, "|S^{n−1}|", is_hemisphere(mesh)));
        } else if pi0 && at_least(flags.ric_lower, nf - 1.0) {
            out.push(area_check("area_bound[ricci_n_minus_1_conjecture]", CheckKind::Evidence, sphere, "|S^{n−1}|", is_hemisphere(mesh)));
        }
        if n == 3 && pi0 && at_least(flags.ric_lower, 2.0) {
            out.push(area_check("area_bound[ricci_two]", CheckKind::Theorem, 8.0 * PI, "8π", false));
        }
        if out.is_empty() {
            return Err(Error::HypothesisNotMet("no area or volume statement applies".into()));
        }
        Ok(out)
    }

    /// `∫_Σ H ≤ ∫_Σ H₀` and `∫_Σ H ≤ ∫_Σ |H⃗₀|²/H` for the identity embedding
    /// of a Euclidean domain, where `H₀ = H`.
    pub fn check_shi_tam_equality(&self) -> Result<Vec<CheckResult>> {
        let mesh = self.mesh;
        if !is_flat(mesh) || !at_least(mesh.curvature_flags.ric_lower, 0.0) {
            return Err(Error::HypothesisNotMet("needs a Euclidean domain".into()));
        }
        let geo = self.geometry()?;
        if !geo.analytic {
            return Err(Error::HypothesisNotMet("no analytic mean curvature".into()));
        }
        if let Some((i, &h)) = geo.mean_curvature.iter().enumerate().find(|(_, &h)| !(h > 0.0)) {
            return Err(Error::NonpositiveMeanCurvature { vertex: geo.vertices[i], value: h });
        }
        let n = mesh.intrinsic_dim;
        let (mut int_h, mut int_h0, mut int_vec) = (0.0, 0.0, 0.0);
        for i in 0..geo.len() {
            let w = geo.area_weights[i];
            let h = geo.mean_curvature[i];
            // H₀ of Σ ⊂ Rⁿ under the identity: trace of the ambient shape operator
            let s = &geo.shape_operators[i];
            let h0: f64 = (0..n).map(|k| s[k * n + k]).sum();
            int_h += w * h;
            int_h0 += w * h0;
            int_vec += w * h0 * h0 / h;
        }
        Ok(vec![
            CheckResult::new("shi_tam", CheckKind::Theorem, (int_h, "∫_Σ H"), (int_h0, "∫_Σ H₀"), self.tol("shi_tam", int_h), true, String::new()),
            CheckResult::new(
                "mean_curvature_vector",
                CheckKind::Theorem,
                (int_h, "∫_Σ H"),
                (int_vec, "∫_Σ |H⃗₀|²/H"),
                self.tol("mean_curvature_vector", int_h),
                true,
                String::new(),
            ),
        ])
    }

    /// Multi-start minimization of the trace quotient; the minimum should be
    /// the constant's value when Ric ≥ 0 and Π ≥ 1.
    pub fn quotient_constancy(&self, q: f64, starts: usize, seed: u64, threads: usize) -> Result<CheckResult> {
        let mesh = self.mesh;
        let flags = mesh.curvature_flags;
        if !(at_least(flags.ric_lower, 0.0) && at_least(flags.pi_lower, 1.0)) {
            return Err(Error::HypothesisNotMet("Ric ≥ 0 and Π ≥ 1 not flagged".into()));
        }
        let ctx = BoundaryContext::new(mesh, threads)?;
        let run = minimize_quotient_with(&ctx, q, starts, seed, threads)?;
        let constant = ctx.area().powf((q - 1.0) / (q + 1.0));
        let found = run.quotient_value.unwrap_or(f64::NAN);
        let notes = format!("classification {:?}, constancy ratio {:.3e}", run.classification, run.constancy_ratio);
        let mut c = CheckResult::new(
            &format!("quotient_constancy[q={q}]"),
            CheckKind::Evidence,
            (found, "min_f Q_q(f)"),
            (constant, "|Σ_h|^{(q−1)/(q+1)}"),
            self.tol("quotient_constancy", constant),
            true,
            notes,
        );
        c.pass &= run.classification == Classification::Constant;
        Ok(c)
    }

    /// Beckner's trace inequality on the unit ball for seeded random
    /// harmonic coefficients of degree at most 4.
    pub fn beckner(&self, q: f64, samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
        let mesh = self.mesh;
        if !is_unit_ball(mesh) {
            return Err(Error::HypothesisNotMet("Beckner check runs on the unit ball".into()));
        }
        let n = mesh.intrinsic_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(samples);
        for s in 0..samples {
            let coeffs: Vec<(HarmonicIndex, f64)> = (0..=4)
                .flat_map(|l| HarmonicIndex::of_degree(n, l))
                .map(|idx| {
                    let c: f64 = StandardNormal.sample(&mut rng);
                    (idx, c)
                })
                .collect();
            let slack = beckner_slack(n, &coeffs, q)?;
            out.push(CheckResult::new(
                &format!("beckner[q={q},sample={s}]"),
                CheckKind::Theorem,
                (slack.lhs, "|S^{n−1}|^{(q−1)/(q+1)} (∫|F|^{q+1})^{2/(q+1)}"),
                (slack.rhs, "(q−1)∫|∇U|² + ∫F²"),
                self.tol("beckner", slack.lhs.abs().max(slack.rhs.abs())),
                false,
                String::new(),
            ));
        }
        Ok(out)
    }

    /// Cohomology ranks and the curvature–topology audit as checks.
    pub fn topology(&self) -> Result<(CohomologyResult, Vec<AuditEntry>, Vec<CheckResult>)> {
        let ranks = cohomology_ranks(self.mesh)?;
        let audit = consistency_audit(self.mesh)?;
        let checks = audit
            .iter()
            .filter(|e| e.verdict != Verdict::NotApplicable)
            .map(|e| {
                CheckResult::new(
                    &format!("topology[{}]", e.statement),
                    CheckKind::Theorem,
                    (e.measured as f64, "computed rank or genus"),
                    (e.bound as f64, "bound in the statement"),
                    0.0,
                    false,
                    e.notes.clone(),
                )
            })
            .collect();
        Ok((ranks, audit, checks))
    }
}

pub fn reilly_residual(mesh: &SimplicialMesh, u: &Poly) -> Result<CheckResult> {
    Verifier::new(mesh, Tolerances::default()).reilly_residual(u, "u")
}

pub fn check_eigen_lower_bound(mesh: &SimplicialMesh) -> Result<CheckResult> {
    Verifier::new(mesh, Tolerances::default()).check_eigen_lower_bound()
}

pub fn check_ros(mesh: &SimplicialMesh) -> Result<CheckResult> {
    Verifier::new(mesh, Tolerances::default()).check_ros()
}

pub fn check_hersch(mesh: &SimplicialMesh) -> Result<CheckResult> {
    Verifier::new(mesh, Tolerances::default()).check_hersch()
}

pub fn check_area_volume_bounds(mesh: &SimplicialMesh) -> Result<Vec<CheckResult>> {
    Verifier::new(mesh, Tolerances::default()).check_area_volume_bounds()
}

pub fn check_shi_tam_equality(mesh: &SimplicialMesh) -> Result<Vec<CheckResult>> {
    Verifier::new(mesh, Tolerances::default()).check_shi_tam_equality()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusRow {
    pub length: f64,
    pub boundary_area: f64,
    pub analytic_area: f64,
    pub mean_curvature_min: f64,
    pub mean_curvature_max: f64,
    pub pi_min: f64,
}

/// Boundary data of `B² × S¹_L` at one refinement level.
pub fn torus_row(length: f64, level: usize) -> Result<TorusRow> {
    let m = generate_domain(&DomainSpec::solid_torus(length, level))?;
    let g = boundary_geometry(&m)?;
    Ok(TorusRow {
        length,
        boundary_area: m.measure().boundary_area,
        analytic_area: 2.0 * PI * length,
        mean_curvature_min: g.mean_curvature.iter().copied().fold(f64::INFINITY, f64::min),
        mean_curvature_max: g.mean_curvature.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        pi_min: g.min_pi(),
    })
}

/// Documents that H ≡ 1 does not bound the boundary area: along
/// `B² × S¹_L` the area `2πL` grows without bound.
pub fn check_mean_curvature_insufficiency(lengths: &[f64], level: usize) -> Result<(CheckResult, Vec<TorusRow>)> {
    if lengths.is_empty() || lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("lengths must be positive".into()));
    }
    let rows = lengths.iter().map(|&l| torus_row(l, level)).collect::<Result<Vec<_>>>()?;
    let sphere = 4.0 * PI;
    let unit_h = rows.iter().all(|r| r.mean_curvature_min == 1.0 && r.mean_curvature_max == 1.0 && r.pi_min == 0.0);
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.length.total_cmp(&b.length));
    let monotone = sorted.windows(2).all(|w| w[1].boundary_area > w[0].boundary_area);
    let exceeds = rows.iter().filter(|r| r.length > 2.0).all(|r| r.boundary_area > sphere);
    let largest = sorted.last().expect("non-empty");
    let notes = rows.iter().map(|r| format!("L = {}: |Σ| = {:.4} (2πL = {:.4})", r.length, r.boundary_area, r.analytic_area)).collect::<Vec<_>>().join("; ");
    let mut c = CheckResult::new(
        "mean_curvature_insufficiency",
        CheckKind::Documentation,
        (sphere, "|S²|"),
        (largest.boundary_area, "|Σ| at the largest L"),
        0.0,
        false,
        notes,
    );
    // the check documents the growth, not an inequality
    c.pass = unit_h && monotone && exceeds && (largest.length <= 2.0 || c.slack > 0.0);
    Ok((c, rows))
}

/// A seeded random admissible support body: `h0 ∈ [0.5, 0.9]` plus small
/// degree 2 and 3 harmonics, redrawn until the rolling-ball constraint holds.
pub fn support_body_sample(seed: u64, level: usize) -> Result<SimplicialMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..100 {
        let h0 = rng.random_range(0.5..0.9);
        let coeffs: BTreeMap<HarmonicIndex, f64> = (2..=3)
            .flat_map(|l| HarmonicIndex::of_degree(3, l))
            .map(|idx| (idx, rng.random_range(-0.03..0.03)))
            .collect();
        match support_body(h0, &coeffs, level) {
            Err(e @ Error::RollingBallViolation { .. }) | Err(e @ Error::InadmissibleSpec(_)) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one draw"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Spectral,
    Inequalities,
    Topology,
    Nonlinear,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "spectral" => Suite::Spectral,
            "inequalities" => Suite::Inequalities,
            "topology" => Suite::Topology,
            "nonlinear" => Suite::Nonlinear,
            _ => return Err(Error::InvalidInput(format!("unknown suite {s:?}"))),
        })
    }
}

impl Suite {
    fn has(self, part: Suite) -> bool {
        self == Suite::All || self == part
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub threads: usize,
    pub starts: usize,
    pub tolerances: Tolerances,
    /// Extra Reilly test functions, labelled.
    pub test_functions: Vec<(String, Poly)>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 0, threads: 1, starts: 4, tolerances: Tolerances::default(), test_functions: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDescriptor {
    pub family: DomainSpec,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub vertices: usize,
    pub cells: usize,
    pub boundary_facets: usize,
    pub mesh_size: f64,
    pub volume: f64,
    pub boundary_area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub check_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mesh: MeshDescriptor,
    pub level: usize,
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub skipped: Vec<Skipped>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub topology: Option<CohomologyResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audit: Option<Vec<AuditEntry>>,
    pub wall_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
}

impl VerificationReport {
    /// All gating checks pass.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.gates()).all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| c.gates() && !c.pass).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,kind,lhs,rhs,slack,tolerance,pass,equality_expected,notes\n");
        let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        for c in &self.checks {
            let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{},{},{}",
                quote(&c.check_id),
                kind,
                c.lhs,
                c.rhs,
                c.slack,
                c.tolerance,
                c.pass,
                c.equality_expected,
                quote(&c.notes)
            );
        }
        out
    }
}

fn descriptor(mesh: &SimplicialMesh) -> MeshDescriptor {
    let m = mesh.measure();
    MeshDescriptor {
        family: mesh.family.clone(),
        intrinsic_dim: mesh.intrinsic_dim,
        ambient_dim: mesh.ambient_dim,
        vertices: mesh.vertex_count(),
        cells: mesh.cells.len(),
        boundary_facets: mesh.boundary_facets.len(),
        mesh_size: mesh.mesh_size(),
        volume: m.volume,
        boundary_area: m.boundary_area,
    }
}

/// Errors meaning "this check does not apply here".
fn not_applicable(e: &Error) -> bool {
    matches!(
        e,
        Error::HypothesisNotMet(_) | Error::NonpositiveMeanCurvature { .. } | Error::WrongGenus(_) | Error::UnsupportedDimension { .. }
    )
}

/// The default Reilly test functions: a constant, `|x|²/2`, `x₁` and a cubic.
pub fn default_test_functions(dim: usize) -> Vec<(String, Poly)> {
    let mut cubic = Poly::zero();
    let mut e = [0u8; MAX_VARS];
    e[0] = 2;
    e[1] = 1;
    cubic.add_term(e, 1.0);
    cubic.add_term([3, 0, 0, 0], 1.0 / 3.0);
    vec![
        ("constant".into(), Poly::constant(1.0)),
        ("half_radius_squared".into(), Poly::radius_squared(dim).scale(0.5)),
        ("x1".into(), Poly::coord(0)),
        ("cubic".into(), cubic),
    ]
}

pub fn run_suite(mesh: &SimplicialMesh, suite: Suite) -> Result<VerificationReport> {
    run_suite_with(mesh, suite, &SuiteOptions::default())
}

pub fn run_suite_with(mesh: &SimplicialMesh, suite: Suite, opts: &SuiteOptions) -> Result<VerificationReport> {
    mesh.validate()?;
    let v = Verifier::new(mesh, opts.tolerances.clone());
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut record = |checks: &mut Vec<CheckResult>, id: &str, r: Result<Vec<CheckResult>>| -> Result<()> {
        match r {
            Ok(c) => checks.extend(c),
            Err(e) if not_applicable(&e) => skipped.push(Skipped { check_id: id.into(), reason: e.to_string() }),
            Err(e) => return Err(e),
        }
        Ok(())
    };
    if suite.has(Suite::Inequalities) {
        if is_flat(mesh) {
            let mut funcs = default_test_functions(mesh.intrinsic_dim);
            funcs.extend(opts.test_functions.iter().cloned());
            for (label, u) in &funcs {
                record(&mut checks, "reilly", v.reilly_residual(u, label).map(|c| vec![c]))?;
            }
        } else {
            record(&mut checks, "reilly", Err(Error::HypothesisNotMet("curved ambient space".into())))?;
        }
        record(&mut checks, "divergence_volume", v.divergence_volume().map(|c| vec![c]))?;
        record(&mut checks, "ros", v.check_ros().map(|c| vec![c]))?;
        record(&mut checks, "area_volume_bounds", v.check_area_volume_bounds())?;
        record(&mut checks, "shi_tam", v.check_shi_tam_equality())?;
        if mesh.family.family_tag == FamilyTag::ProductSolidTorus {
            let level = mesh.family.refinement_level;
            record(&mut checks, "mean_curvature_insufficiency", check_mean_curvature_insufficiency(&[1.0, 3.0, 10.0], level).map(|(c, _)| vec![c]))?;
        }
    }
    if suite.has(Suite::Spectral) {
        record(&mut checks, "eigen_lower_bound", v.check_eigen_lower_bound().map(|c| vec![c]))?;
        record(&mut checks, "hersch", v.check_hersch().map(|c| vec![c]))?;
    }
    let mut topology = None;
    let mut audit = None;
    if suite.has(Suite::Topology) {
        let (ranks, entries, c) = v.topology()?;
        checks.extend(c);
        topology = Some(ranks);
        audit = Some(entries);
    }
    if suite.has(Suite::Nonlinear) {
        record(&mut checks, "quotient_constancy", v.quotient_constancy(2.0, opts.starts, opts.seed, opts.threads).map(|c| vec![c]))?;
        record(&mut checks, "beckner", v.beckner(2.0, 4, opts.seed))?;
    }
    Ok(VerificationReport {
        mesh: descriptor(mesh),
        level: mesh.family.refinement_level,
        suite,
        seed: opts.seed,
        checks,
        skipped,
        topology,
        audit,
        wall_time: None,
        config: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_and_equality_rules() {
        let c = CheckResult::new("x", CheckKind::Theorem, (1.0, ""), (1.05, ""), 0.01, false, String::new());
        assert!(c.pass);
        let c = CheckResult::new("x", CheckKind::Theorem, (1.0, ""), (1.05, ""), 0.01, true, String::new());
        assert!(!c.pass);
        let c = CheckResult::new("x", CheckKind::Theorem, (1.0, ""), (0.995, ""), 0.01, true, String::new());
        assert!(c.pass && c.notes.contains("rigidity case"));
        let c = CheckResult::new("x", CheckKind::Evidence, (1.0, ""), (0.5, ""), 0.01, false, String::new());
        assert!(!c.pass && !c.gates());
    }

    #[test]
    fn tolerance_scaling() {
        let t = Tolerances::default();
        assert!((t.relative("reilly", 0.1) - 1e-3).abs() < 1e-15);
        assert!((t.relative("reilly", 0.05) - 2.5e-4).abs() < 1e-15);
        assert_eq!(t.relative("divergence_volume", 0.3), 1e-10);
        let mut t = t;
        assert!(t.set("ros", 2.0).is_ok());
        assert!(t.set("nope", 1.0).is_err());
    }

    #[test]
    fn suite_names() {
        assert_eq!("topology".parse::<Suite>().unwrap(), Suite::Topology);
        assert!("everything".parse::<Suite>().is_err());
    }
}
