//! Linear-algebra kernels: compressed sparse rows, preconditioned conjugate
//! gradients, dense symmetric eigen-decomposition and a Lanczos solver.

pub mod cg;
pub mod dense;
pub mod lanczos;
pub mod sparse;

pub use cg::{conjugate_gradient, CgOptions, CgReport};
pub use sparse::SparseOperator;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
