use super::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Stop when ‖r‖ ≤ rel_tol · ‖b‖.
    pub rel_tol: f64,
    /// Iteration cap; `None` uses 50·√n.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: None }
    }
}

impl CgOptions {
    pub fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| ((50.0 * (n as f64).sqrt()).ceil() as usize).max(50))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `A x = b`.
///
/// `apply` computes `A v` into the output slice. `x` holds the initial guess
/// on entry and the solution on exit.
pub fn conjugate_gradient<F>(
    apply: F,
    diagonal: &[f64],
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
) -> Result<CgReport>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if n == 0 || bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> =
        diagonal.iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = opts.cap(n);
    let target = opts.rel_tol * bnorm;
    let mut rnorm = norm(&r);
    for it in 0..cap {
        if rnorm <= target {
            return Ok(CgReport { iterations: it, relative_residual: rnorm / bnorm });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverDivergence { cap, residual: rnorm / bnorm });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm(&r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rnorm <= target {
        Ok(CgReport { iterations: cap, relative_residual: rnorm / bnorm })
    } else {
        Err(Error::SolverDivergence { cap, residual: rnorm / bnorm })
    }
}
