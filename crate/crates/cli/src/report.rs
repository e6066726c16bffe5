//! Plain-text summaries for stdout and the csv forms of results.

use convexlab::convergence::ConvergenceTable;
use convexlab::mesh::SimplicialMesh;
use convexlab::nonlinear::NonlinearRun;
use convexlab::spectral::SpectrumResult;
use convexlab::verify::VerificationReport;

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out += &line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect());
    for r in rows {
        out += &line(r.iter().map(|s| s.as_str()).collect());
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:.6e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "-".into())
}

pub fn mesh_summary(m: &SimplicialMesh) -> String {
    let meas = m.measure();
    let rows = vec![vec![
        format!("{:?}", m.family.family_tag),
        m.intrinsic_dim.to_string(),
        m.family.refinement_level.to_string(),
        m.vertex_count().to_string(),
        m.cells.len().to_string(),
        m.boundary_facets.len().to_string(),
        num(m.mesh_size()),
        num(meas.volume),
        num(meas.boundary_area),
    ]];
    table(&["family", "dim", "level", "vertices", "cells", "facets", "h", "volume", "boundary_area"], &rows)
}

pub fn spectrum_summary(s: &SpectrumResult) -> String {
    let rows: Vec<Vec<String>> =
        s.eigenvalues.iter().zip(&s.residuals).enumerate().map(|(i, (v, r))| vec![i.to_string(), num(*v), num(*r)]).collect();
    format!("{:?}\n", s.which) + &table(&["index", "eigenvalue", "residual"], &rows)
}

pub fn spectrum_csv(s: &SpectrumResult) -> String {
    let mut out = String::from("index,eigenvalue,residual\n");
    for (i, (v, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
        out += &format!("{i},{v:e},{r:e}\n");
    }
    out
}

pub fn run_summary(r: &NonlinearRun) -> String {
    let head = table(
        &["problem", "q", "lambda", "classification", "quotient", "residual", "constancy_ratio", "iterations"],
        &[vec![
            format!("{:?}", r.problem),
            opt(r.q),
            num(r.lambda),
            format!("{:?}", r.classification),
            opt(r.quotient_value),
            num(r.residual),
            num(r.constancy_ratio),
            r.iterations.to_string(),
        ]],
    );
    if r.starts.is_empty() {
        return head;
    }
    let rows: Vec<Vec<String>> = r
        .starts
        .iter()
        .map(|s| {
            vec![
                format!("{:?}", s.start),
                num(s.quotient_value),
                format!("{:?}", s.classification),
                num(s.constancy_ratio),
                s.iterations.to_string(),
            ]
        })
        .collect();
    head + "\n" + &table(&["start", "quotient", "classification", "constancy_ratio", "iterations"], &rows)
}

pub fn starts_csv(r: &NonlinearRun) -> String {
    let mut out = String::from("start,quotient_value,classification,constancy_ratio,iterations\n");
    for s in &r.starts {
        let start = format!("{:?}", s.start).replace('"', "\"\"");
        out += &format!("\"{start}\",{:e},{:?},{:e},{}\n", s.quotient_value, s.classification, s.constancy_ratio, s.iterations);
    }
    out
}

pub fn boundary_csv(r: &NonlinearRun) -> String {
    let mut out = String::from("boundary_index,value\n");
    for (i, v) in r.final_boundary_values.iter().enumerate() {
        out += &format!("{i},{v:e}\n");
    }
    out
}

pub fn verify_summary(rep: &VerificationReport) -> String {
    let rows: Vec<Vec<String>> = rep
        .checks
        .iter()
        .map(|c| {
            let status = match (c.pass, c.gates()) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "miss",
            };
            vec![c.check_id.clone(), format!("{:?}", c.kind), num(c.lhs), num(c.rhs), num(c.slack), num(c.tolerance), status.into()]
        })
        .collect();
    let mut out = table(&["check", "kind", "lhs", "rhs", "slack", "tolerance", "status"], &rows);
    for s in &rep.skipped {
        out += &format!("skipped {}: {}\n", s.check_id, s.reason);
    }
    let gating = rep.checks.iter().filter(|c| c.gates()).count();
    out += &format!("{} of {} gating checks pass\n", gating - rep.failures().len(), gating);
    out
}

pub fn convergence_summary(t: &ConvergenceTable) -> String {
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| vec![r.level.to_string(), num(r.h), num(r.value), opt(r.error), r.observed_order.map(|o| format!("{o:.3}")).unwrap_or("-".into())])
        .collect();
    format!("{:?}, exact {}\n", t.quantity, opt(t.exact)) + &table(&["level", "h", "value", "error", "order"], &rows)
}
