//! Numerical experiments on compact manifolds with convex boundary: meshes
//! of test domains, P1 finite elements, Steklov and boundary spectra, the
//! semilinear Neumann problem, cohomology ranks and inequality checks.

pub mod convergence;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod poly;
pub mod quadrature;
pub mod spectral;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
