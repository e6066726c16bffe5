//! Simplicial cohomology ranks over prime fields, boundary surface
//! classification, and the audit of the curvature–topology statements
//! against each mesh's curvature flags.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{boundary_geometry, SimplicialMesh};

/// Primes below 2³¹ used for the rank computations, in the order tried.
pub const PRIMES: [u64; 3] = [2_147_483_647, 2_147_483_629, 2_147_483_587];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyResult {
    pub b0: usize,
    pub b1_absolute: usize,
    pub b1_relative: usize,
    /// `rank H^k(M)` for `k = 0..=n`.
    pub betti_absolute: Vec<usize>,
    /// `rank H^k(M, Σ)` for `k = 0..=n`.
    pub betti_relative: Vec<usize>,
    /// `rank H¹(Σ)`.
    pub boundary_b1: usize,
    pub boundary_components: usize,
    pub boundary_euler_characteristics: Vec<i64>,
    /// Per component, for closed orientable boundary surfaces (n = 3).
    pub boundary_genus: Vec<usize>,
}

/// Sparse rows with ±1 entries, each row a coboundary of one simplex.
type Rows = Vec<Vec<(usize, i64)>>;

fn inverse(a: u64, p: u64) -> u64 {
    // a^(p−2) mod p
    let (mut base, mut exp, mut acc) = (a % p, p - 2, 1u64);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Rank of a sparse matrix over GF(p), by elimination on the largest column
/// index of each row.
pub fn rank_mod_p(rows: &[Vec<(usize, i64)>], p: u64) -> usize {
    let lift = |v: i64| -> u64 { v.rem_euclid(p as i64) as u64 };
    let mut pivots: HashMap<usize, Vec<(usize, u64)>> = HashMap::new();
    for row in rows {
        let mut r: Vec<(usize, u64)> = row.iter().map(|&(c, v)| (c, lift(v))).filter(|e| e.1 != 0).collect();
        r.sort_unstable_by_key(|e| e.0);
        while let Some(&(low, lv)) = r.last() {
            let Some(piv) = pivots.get(&low) else {
                // normalize the leading entry to 1
                let inv = inverse(lv, p);
                r.iter_mut().for_each(|e| e.1 = e.1 * inv % p);
                pivots.insert(low, r);
                break;
            };
            // r ← r − lv · piv (piv has leading entry 1)
            let mut out = Vec::with_capacity(r.len() + piv.len());
            let (mut i, mut j) = (0, 0);
            while i < r.len() || j < piv.len() {
                let take_r = j >= piv.len() || (i < r.len() && r[i].0 < piv[j].0);
                let take_p = i >= r.len() || (j < piv.len() && piv[j].0 < r[i].0);
                if take_r {
                    out.push(r[i]);
                    i += 1;
                } else if take_p {
                    out.push((piv[j].0, (p - lv * piv[j].1 % p) % p));
                    j += 1;
                } else {
                    let v = (r[i].1 + p - lv * piv[j].1 % p) % p;
                    if v != 0 {
                        out.push((r[i].0, v));
                    }
                    i += 1;
                    j += 1;
                }
            }
            out.retain(|e| e.1 != 0);
            r = out;
        }
    }
    pivots.len()
}

/// Rank over the rationals (for these ±1 matrices), cross-checked between
/// primes.
pub fn rank(rows: &[Vec<(usize, i64)>]) -> Result<usize> {
    let a = rank_mod_p(rows, PRIMES[0]);
    let b = rank_mod_p(rows, PRIMES[1]);
    if a == b {
        return Ok(a);
    }
    let c = rank_mod_p(rows, PRIMES[2]);
    if c == a || c == b {
        return Ok(c);
    }
    Err(Error::PrimeCollision(vec![(PRIMES[0], a), (PRIMES[1], b), (PRIMES[2], c)]))
}

/// Coboundary `δ: C^k → C^{k+1}` restricted to the given simplex lists.
fn coboundary(lower: &[Vec<usize>], upper: &[Vec<usize>]) -> Rows {
    let index: HashMap<&[usize], usize> = lower.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    upper
        .iter()
        .map(|s| {
            (0..s.len())
                .filter_map(|i| {
                    let face: Vec<usize> = s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
                    index.get(face.as_slice()).map(|&c| (c, if i % 2 == 0 { 1 } else { -1 }))
                })
                .collect()
        })
        .collect()
}

/// Betti numbers of the cochain complex on `simplices[0..=n]`.
fn betti(simplices: &[Vec<Vec<usize>>]) -> Result<Vec<usize>> {
    let n = simplices.len() - 1;
    // ranks[k] = rank of δ_k: C^k → C^{k+1}
    let mut ranks = vec![0; n + 1];
    for k in 0..n {
        ranks[k] = rank(&coboundary(&simplices[k], &simplices[k + 1]))?;
    }
    Ok((0..=n).map(|k| simplices[k].len() - ranks[k] - if k > 0 { ranks[k - 1] } else { 0 }).collect())
}

/// Connected components of a pure complex given by its top simplices,
/// as lists of top-simplex indices.
fn components(top: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, s) in top.iter().enumerate() {
        for &v in s {
            by_vertex.entry(v).or_default().push(i);
        }
    }
    let mut seen = vec![false; top.len()];
    let mut out = Vec::new();
    for start in 0..top.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for v in &top[i] {
                for &j in &by_vertex[v] {
                    if !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn all_faces(top: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    let mut set = std::collections::BTreeSet::new();
    for s in top {
        let mut s = s.clone();
        s.sort_unstable();
        for face in combinations(&s, k + 1) {
            set.insert(face);
        }
    }
    set.into_iter().collect()
}

fn combinations(s: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if s.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &v) in s.iter().enumerate() {
        for mut rest in combinations(&s[i + 1..], k - 1) {
            rest.insert(0, v);
            out.push(rest);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub euler_characteristic: i64,
    pub genus: usize,
}

/// Euler characteristic and genus of each boundary component of a
/// three-dimensional mesh.
pub fn classify_boundary(mesh: &SimplicialMesh) -> Result<Vec<BoundaryComponent>> {
    if mesh.intrinsic_dim != 3 {
        return Err(Error::UnsupportedDimension { dim: mesh.intrinsic_dim, what: "boundary surface classification".into() });
    }
    let mut out = Vec::new();
    for comp in components(&mesh.boundary_facets) {
        let facets: Vec<Vec<usize>> = comp.iter().map(|&i| mesh.boundary_facets[i].clone()).collect();
        check_closed_orientable(&facets)?;
        let v = all_faces(&facets, 0).len() as i64;
        let e = all_faces(&facets, 1).len() as i64;
        let chi = v - e + facets.len() as i64;
        if chi > 2 || chi % 2 != 0 {
            return Err(Error::NonManifoldBoundary(format!("Euler characteristic {chi} of a closed orientable surface")));
        }
        out.push(BoundaryComponent { euler_characteristic: chi, genus: ((2 - chi) / 2) as usize });
    }
    Ok(out)
}

/// Every edge in exactly two triangles, and a consistent orientation exists.
fn check_closed_orientable(facets: &[Vec<usize>]) -> Result<()> {
    let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, f) in facets.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    if let Some((e, owners)) = edges.iter().find(|(_, o)| o.len() != 2) {
        return Err(Error::NonManifoldBoundary(format!("edge {e:?} lies in {} boundary triangles", owners.len())));
    }
    // +1 keeps the stored order, −1 reverses it
    let directed = |f: &[usize], a: usize, b: usize| -> i32 {
        (0..3).find_map(|k| (f[k] == a && f[(k + 1) % 3] == b).then_some(1)).unwrap_or(-1)
    };
    let mut sign = vec![0i32; facets.len()];
    for start in 0..facets.len() {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let f = &facets[i];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let j = *edges[&(a.min(b), a.max(b))].iter().find(|&&j| j != i).expect("two owners");
                // orientations are compatible when the shared edge runs opposite ways
                let want = -sign[i] * directed(&facets[j], a, b);
                if sign[j] == 0 {
                    sign[j] = want;
                    queue.push_back(j);
                } else if sign[j] != want {
                    return Err(Error::NonManifoldBoundary("boundary surface is not orientable".into()));
                }
            }
        }
    }
    Ok(())
}

/// Absolute and relative cohomology ranks and boundary data.
pub fn cohomology_ranks(mesh: &SimplicialMesh) -> Result<CohomologyResult> {
    let n = mesh.intrinsic_dim;
    let simplices: Vec<Vec<Vec<usize>>> = (0..=n).map(|k| mesh.simplices(k)).collect();
    let betti_absolute = betti(&simplices)?;
    let relative: Vec<Vec<Vec<usize>>> = (0..=n)
        .map(|k| {
            let on_boundary: std::collections::HashSet<Vec<usize>> =
                if k < n { mesh.boundary_simplices(k).into_iter().collect() } else { Default::default() };
            simplices[k].iter().filter(|s| !on_boundary.contains(*s)).cloned().collect()
        })
        .collect();
    let betti_relative = betti(&relative)?;
    let bsimp: Vec<Vec<Vec<usize>>> = (0..n).map(|k| mesh.boundary_simplices(k)).collect();
    let boundary_b1 = if n >= 2 && !mesh.boundary_facets.is_empty() { betti(&bsimp)?.get(1).copied().unwrap_or(0) } else { 0 };
    let comps = components(&mesh.boundary_facets);
    let boundary_euler_characteristics: Vec<i64> = comps
        .iter()
        .map(|c| {
            let facets: Vec<Vec<usize>> = c.iter().map(|&i| mesh.boundary_facets[i].clone()).collect();
            (0..n).map(|k| if k % 2 == 0 { 1 } else { -1 } * all_faces(&facets, k).len() as i64).sum()
        })
        .collect();
    let boundary_genus = if n == 3 { classify_boundary(mesh)?.into_iter().map(|c| c.genus).collect() } else { Vec::new() };
    Ok(CohomologyResult {
        b0: betti_absolute[0],
        b1_absolute: betti_absolute.get(1).copied().unwrap_or(0),
        b1_relative: betti_relative.get(1).copied().unwrap_or(0),
        betti_absolute,
        betti_relative,
        boundary_b1,
        boundary_components: comps.len(),
        boundary_euler_characteristics,
        boundary_genus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Confirmed,
    Violated,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub statement: String,
    pub hypothesis_satisfied: bool,
    /// `None` when the hypothesis does not hold.
    pub conclusion_satisfied: Option<bool>,
    pub verdict: Verdict,
    /// The rank or genus the conclusion bounds, and its bound.
    pub measured: usize,
    pub bound: usize,
    pub notes: String,
}

/// Checks each curvature–topology statement whose hypotheses the mesh's
/// analytic curvature data satisfy.
pub fn consistency_audit(mesh: &SimplicialMesh) -> Result<Vec<AuditEntry>> {
    let flags = mesh.curvature_flags;
    let n = mesh.intrinsic_dim as f64;
    let ranks = cohomology_ranks(mesh)?;
    let h_min = match boundary_geometry(mesh) {
        Ok(g) if g.analytic => Some(g.min_mean_curvature()),
        _ => None,
    };
    let ric = flags.ric_lower;
    let pi = flags.pi_lower;
    let ge = |v: Option<f64>, t: f64| v.is_some_and(|x| x >= t);
    let gt = |v: Option<f64>, t: f64| v.is_some_and(|x| x > t);
    let dim3 = mesh.intrinsic_dim == 3;
    let max_genus = ranks.boundary_genus.iter().copied().max().unwrap_or(0);
    let genus = &ranks.boundary_genus;
    let mut out = Vec::new();
    let mut push = |statement: &str, hyp: bool, measured: usize, bound: usize, notes: String| {
        let concl = measured <= bound;
        out.push(AuditEntry {
            statement: statement.into(),
            hypothesis_satisfied: hyp,
            conclusion_satisfied: hyp.then_some(concl),
            verdict: if !hyp {
                Verdict::NotApplicable
            } else if concl {
                Verdict::Confirmed
            } else {
                Verdict::Violated
            },
            measured,
            bound,
            notes,
        });
    };
    push(
        "ric_nonnegative_mean_convex_relative_h1_vanishes",
        ge(ric, 0.0) && gt(h_min, 0.0),
        ranks.b1_relative,
        0,
        format!("Ric ≥ {ric:?}, min H = {h_min:?}; b1(M,Σ) = {}", ranks.b1_relative),
    );
    push(
        "ric_nonnegative_strictly_convex_h1_vanishes",
        ge(ric, 0.0) && gt(pi, 0.0),
        ranks.b1_absolute,
        0,
        format!("Ric ≥ {ric:?}, Π ≥ {pi:?}; b1(M) = {}", ranks.b1_absolute),
    );
    push(
        "dim3_ric_nonnegative_strictly_convex_boundary_sphere",
        dim3 && ge(ric, 0.0) && gt(pi, 0.0),
        max_genus + ranks.boundary_b1,
        0,
        format!("boundary genus {genus:?}"),
    );
    push(
        "dim3_ric_nonnegative_convex_boundary_sphere_or_torus",
        dim3 && ge(ric, 0.0) && ge(pi, 0.0),
        max_genus,
        1,
        format!("boundary genus {genus:?}"),
    );
    push(
        "ric_positive_convex_both_h1_vanish",
        gt(ric, 0.0) && ge(pi, 0.0),
        ranks.b1_absolute + ranks.b1_relative,
        0,
        format!("b1(M) = {}, b1(M,Σ) = {}", ranks.b1_absolute, ranks.b1_relative),
    );
    push(
        "ric_above_minus_n_minus_1_large_mean_curvature_relative_h1_vanishes",
        ge(ric, -(n - 1.0)) && ge(h_min, n - 1.0),
        ranks.b1_relative,
        0,
        format!("min H = {h_min:?}; b1(M,Σ) = {}", ranks.b1_relative),
    );
    push(
        "long_exact_sequence_bound",
        true,
        ranks.b1_absolute,
        ranks.b1_relative + ranks.boundary_b1,
        format!("{} ≤ {} + {}", ranks.b1_absolute, ranks.b1_relative, ranks.boundary_b1),
    );
    Ok(out)
}
