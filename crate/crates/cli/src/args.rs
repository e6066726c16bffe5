use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "convexlab", version, about = "Finite element experiments on convex domains")]
pub struct Cli {
    /// Worker threads for dense operator builds and multi-start solves.
    #[arg(long, global = true, env = "CONVEXLAB_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Record wall-clock time in the output (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a mesh of one of the built-in families.
    Mesh {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Steklov or boundary Laplace spectrum.
    Spectrum {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = SpectrumChoice::Steklov)]
        kind: SpectrumChoice,
        /// Number of eigenvalues past the trivial one.
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Newton solve of the semilinear boundary problem, or of the
    /// exponential problem on a disc when `--q` is absent.
    Solve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = StartChoice::Constant)]
        start: StartChoice,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Multi-start minimization of the boundary trace quotient.
    Nonlinear {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, required_unless_present = "escobar")]
        q: Option<f64>,
        /// Minimize the Escobar quotient instead (flat 3-D domains).
        #[arg(long, conflicts_with = "q")]
        escobar: bool,
        #[arg(long, default_value_t = 4)]
        starts: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a verification suite and report every check.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 4)]
        starts: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a tolerance constant, `key=c`.
        #[arg(long = "tol", value_name = "KEY=C")]
        tolerances: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Refinement study of one quantity against its closed form.
    Convergence {
        #[command(flatten)]
        domain: DomainArgs,
        /// Comma-separated refinement levels.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long)]
        quantity: String,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainArgs {
    #[arg(long, value_enum)]
    pub domain: Option<DomainChoice>,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    /// Ball radius, or geodesic radius of a spherical cap.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Ellipsoid semi-axes, comma-separated; sets the dimension.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<f64>,
    /// Circumference of the solid torus.
    #[arg(long)]
    pub length: Option<f64>,
    /// Extra family parameter, `name=value` (e.g. `h0=0.8`, `Y_2_0=0.02`).
    #[arg(long = "param", value_name = "NAME=VALUE")]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Mesh JSON file; when absent the mesh is generated from the domain flags.
    pub mesh: Option<PathBuf>,
    #[command(flatten)]
    pub domain: DomainArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Write the result here and print a summary table instead.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to csv for a `.csv` output path, json otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainChoice {
    Ball,
    Ellipsoid,
    #[value(name = "support_body")]
    SupportBody,
    Cap,
    Torus,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumChoice {
    Steklov,
    Laplacian,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartChoice {
    Constant,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl OutArgs {
    pub fn format(&self) -> Format {
        match (self.format, &self.out) {
            (Some(f), _) => f,
            (None, Some(p)) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Format::Csv,
            _ => Format::Json,
        }
    }
}
