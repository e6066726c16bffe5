mod args;
mod report;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};

use convexlab::convergence::{convergence_table, Quantity};
use convexlab::mesh::{generate_domain, DomainSpec, FamilyTag, SimplicialMesh};
use convexlab::nonlinear::{
    escobar_quotient_minimize, minimize_quotient_with, solve_exp_disc_with, solve_semilinear_with, BoundaryContext,
    Classification, NonlinearRun, Start,
};
use convexlab::spectral::{boundary_laplacian_spectrum, steklov_spectrum_with};
use convexlab::verify::{run_suite_with, Suite, SuiteOptions, Tolerances};
use convexlab::Error;

use args::{Cli, Command, DomainArgs, DomainChoice, Format, InputArgs, OutArgs, SpectrumChoice, StartChoice};

enum Failure {
    Usage(String),
    Solver(String),
    Checks(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Checks(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverDivergence { .. }
            | Error::EigenNoConvergence(_)
            | Error::QuadratureFailure { .. }
            | Error::NonPositiveIterate
            | Error::PrimeCollision(_)
            | Error::QuadricFitFailure { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

/// Everything needed to replay a run; embedded in every result.
#[derive(Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<DomainSpec>,
    threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    options: BTreeMap<String, serde_json::Value>,
}

impl RunConfig {
    fn opt(mut self, key: &str, value: impl Serialize) -> Self {
        self.options.insert(key.to_string(), serde_json::to_value(value).expect("option serializes"));
        self
    }
}

fn parse_pair(s: &str) -> Result<(String, f64), Failure> {
    let (k, v) = s.split_once('=').ok_or_else(|| Failure::Usage(format!("expected name=value, got {s:?}")))?;
    let v = v.trim().parse().map_err(|_| Failure::Usage(format!("not a number in {s:?}")))?;
    Ok((k.trim().to_string(), v))
}

fn domain_spec(d: &DomainArgs) -> Result<DomainSpec, Failure> {
    let choice = d.domain.ok_or_else(|| Failure::Usage("give a mesh file or --domain".into()))?;
    let mut spec = match choice {
        DomainChoice::Ball => DomainSpec::ball(d.dim, d.refine),
        DomainChoice::Ellipsoid => {
            if d.axes.is_empty() {
                return Err(Failure::Usage("--domain ellipsoid needs --axes".into()));
            }
            DomainSpec::ellipsoid(&d.axes, d.refine)
        }
        DomainChoice::SupportBody => DomainSpec::new(FamilyTag::SupportBody, d.dim, d.refine),
        DomainChoice::Cap => {
            let r = d.radius.ok_or_else(|| Failure::Usage("--domain cap needs --radius".into()))?;
            DomainSpec::cap(d.dim, r, d.refine)
        }
        DomainChoice::Torus => {
            let l = d.length.ok_or_else(|| Failure::Usage("--domain torus needs --length".into()))?;
            DomainSpec::solid_torus(l, d.refine)
        }
    };
    if choice == DomainChoice::Ball {
        if let Some(r) = d.radius {
            spec = spec.with("radius", r);
        }
    }
    for p in &d.params {
        let (k, v) = parse_pair(p)?;
        spec = spec.with(&k, v);
    }
    Ok(spec)
}

fn load_mesh(input: &InputArgs, cfg: &mut RunConfig) -> Result<SimplicialMesh, Failure> {
    match &input.mesh {
        Some(path) => {
            if input.domain.domain.is_some() {
                return Err(Failure::Usage("give either a mesh file or --domain, not both".into()));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            cfg.mesh_file = Some(path.display().to_string());
            Ok(SimplicialMesh::from_json(&text)?)
        }
        None => {
            let spec = domain_spec(&input.domain)?;
            cfg.domain = Some(spec.clone());
            Ok(generate_domain(&spec)?)
        }
    }
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("note: --seed not given, using 0");
        0
    })
}

/// Adds `config` (and `wall_time` when timing) to a JSON object.
fn embed(value: serde_json::Value, cfg: &RunConfig, wall_time: Option<f64>) -> serde_json::Value {
    let mut value = value;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
        if let Some(t) = wall_time {
            map.insert("wall_time".into(), t.into());
        }
    }
    value
}

fn emit(out: &OutArgs, json: &serde_json::Value, csv: Option<String>, cfg: &RunConfig, summary: String) -> Result<(), Failure> {
    let body = match out.format() {
        Format::Json => serde_json::to_string_pretty(json).map_err(|e| Failure::Usage(e.to_string()))? + "\n",
        Format::Csv => {
            let csv = csv.ok_or_else(|| Failure::Usage(format!("{} output has no csv form", cfg.command)))?;
            format!("# config {}\n{csv}", serde_json::to_string(cfg).expect("config serializes"))
        }
    };
    write_or_print(out, &body, summary)
}

fn write_or_print(out: &OutArgs, body: &str, summary: String) -> Result<(), Failure> {
    match &out.out {
        Some(path) => {
            write_file(path, body)?;
            print!("{summary}");
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run_status(run: &NonlinearRun) -> Result<(), Failure> {
    if run.classification == Classification::NoConverge {
        return Err(Failure::Solver(format!("no convergence after {} iterations (residual {:.3e})", run.iterations, run.residual)));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let threads = cli.threads.max(1);
    let clock = Instant::now();
    let elapsed = |timing: bool| timing.then(|| clock.elapsed().as_secs_f64());
    match cli.command {
        Command::Mesh { domain, out } => {
            let spec = domain_spec(&domain)?;
            let mesh = generate_domain(&spec)?;
            if out.format() == Format::Csv {
                return Err(Failure::Usage("meshes are written as json".into()));
            }
            // mesh files stay free of run metadata so they load back unchanged
            let body = mesh.to_json()? + "\n";
            write_or_print(&out, &body, report::mesh_summary(&mesh))
        }
        Command::Spectrum { input, kind, k, out } => {
            let mut cfg = RunConfig { command: "spectrum".into(), threads, ..Default::default() };
            let mesh = load_mesh(&input, &mut cfg)?;
            let cfg = cfg.opt("kind", kind).opt("k", k);
            let spec = match kind {
                SpectrumChoice::Steklov => steklov_spectrum_with(&mesh, k, threads)?,
                SpectrumChoice::Laplacian => boundary_laplacian_spectrum(&mesh, k)?,
            };
            let json = embed(serde_json::to_value(&spec).map_err(Error::from)?, &cfg, elapsed(cli.timing));
            emit(&out, &json, Some(report::spectrum_csv(&spec)), &cfg, report::spectrum_summary(&spec))
        }
        Command::Solve { input, q, lambda, start, seed, out } => {
            let mut cfg = RunConfig { command: "solve".into(), threads, ..Default::default() };
            let mesh = load_mesh(&input, &mut cfg)?;
            let start = match start {
                StartChoice::Constant => Start::Constant,
                StartChoice::Random => {
                    let s = seed_or_default(seed);
                    cfg.seed = Some(s);
                    Start::Random(s)
                }
            };
            let cfg = cfg.opt("q", q).opt("lambda", lambda).opt("start", start.descriptor());
            let ctx = BoundaryContext::new(&mesh, threads)?;
            let run = match q {
                Some(q) => solve_semilinear_with(&ctx, q, lambda, &start)?,
                None => solve_exp_disc_with(&ctx, lambda, &start)?,
            };
            let json = embed(serde_json::to_value(&run).map_err(Error::from)?, &cfg, elapsed(cli.timing));
            emit(&out, &json, Some(report::boundary_csv(&run)), &cfg, report::run_summary(&run))?;
            run_status(&run)
        }
        Command::Nonlinear { input, q, escobar, starts, seed, out } => {
            let mut cfg = RunConfig { command: "nonlinear".into(), threads, ..Default::default() };
            let mesh = load_mesh(&input, &mut cfg)?;
            let s = seed_or_default(seed);
            cfg.seed = Some(s);
            let cfg = cfg.opt("starts", starts);
            let (run, cfg) = if escobar {
                (escobar_quotient_minimize(&mesh, starts, s)?, cfg.opt("escobar", true))
            } else {
                let q = q.expect("clap requires --q without --escobar");
                let ctx = BoundaryContext::new(&mesh, threads)?;
                (minimize_quotient_with(&ctx, q, starts, s, threads)?, cfg.opt("q", q))
            };
            let json = embed(serde_json::to_value(&run).map_err(Error::from)?, &cfg, elapsed(cli.timing));
            emit(&out, &json, Some(report::starts_csv(&run)), &cfg, report::run_summary(&run))?;
            run_status(&run)
        }
        Command::Verify { input, suite, starts, seed, tolerances, out } => {
            let mut cfg = RunConfig { command: "verify".into(), threads, ..Default::default() };
            let mesh = load_mesh(&input, &mut cfg)?;
            let suite: Suite = suite.parse()?;
            let s = seed_or_default(seed);
            cfg.seed = Some(s);
            let mut tol = Tolerances::default();
            let mut overrides = BTreeMap::new();
            for t in &tolerances {
                let (k, c) = parse_pair(t)?;
                tol.set(&k, c)?;
                overrides.insert(k, c);
            }
            let cfg = cfg.opt("suite", suite).opt("starts", starts).opt("tolerances", overrides);
            let opts = SuiteOptions { seed: s, threads, starts, tolerances: tol, ..Default::default() };
            let mut rep = run_suite_with(&mesh, suite, &opts)?;
            rep.config = Some(serde_json::to_value(&cfg).map_err(Error::from)?);
            rep.wall_time = elapsed(cli.timing);
            let json = serde_json::to_value(&rep).map_err(Error::from)?;
            emit(&out, &json, Some(rep.to_csv()), &cfg, report::verify_summary(&rep))?;
            if rep.all_pass() {
                Ok(())
            } else {
                let ids: Vec<&str> = rep.failures().iter().map(|c| c.check_id.as_str()).collect();
                Err(Failure::Checks(format!("failed checks: {}", ids.join(", "))))
            }
        }
        Command::Convergence { domain, levels, quantity, out } => {
            let spec = domain_spec(&domain)?;
            let q: Quantity = quantity.parse()?;
            let cfg = RunConfig { command: "convergence".into(), domain: Some(spec.clone()), threads, ..Default::default() }
                .opt("levels", &levels)
                .opt("quantity", q);
            let table = convergence_table(&spec, &levels, q, threads)?;
            let json = embed(serde_json::to_value(&table).map_err(Error::from)?, &cfg, elapsed(cli.timing));
            emit(&out, &json, Some(table.to_csv()), &cfg, report::convergence_summary(&table))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Solver(m) | Failure::Checks(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
