//! Shift-invert Lanczos for the smallest eigenpairs of `A x = λ B x`.
//!
//! The Krylov space is built for `T = (A + sB)⁻¹ B`, which is self-adjoint in
//! the B-inner product; its largest eigenvalues `θ` map to `λ = 1/θ − s`.
//! Full reorthogonalization is applied at every step. Converged pairs are
//! locked and the iteration is restarted in their B-orthogonal complement,
//! so degenerate eigenvalues are recovered with their full multiplicity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub shift: f64,
    /// Relative residual target: ‖Ax − λBx‖/‖x‖ ≤ tol·(1 + |λ|).
    pub tol: f64,
    pub max_subspace: usize,
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { shift: 1e-2, tol: 1e-7, max_subspace: 400, max_passes: 12, seed: 0x5eed }
    }
}

pub struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

struct Locked {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    bvectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

impl Locked {
    fn project_out(&self, w: &mut [f64]) {
        for (v, bv) in self.vectors.iter().zip(&self.bvectors) {
            let c = dot(bv, w);
            axpy(-c, v, w);
        }
    }
}

/// Returns the `count` smallest eigenpairs, ascending.
pub fn smallest_eigenpairs<A, B, S>(
    n: usize,
    count: usize,
    apply_a: A,
    apply_b: B,
    solve_shifted: S,
    opts: LanczosOptions,
) -> Result<LanczosResult>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    B: Fn(&[f64]) -> Vec<f64>,
    S: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let count = count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked = Locked { values: vec![], vectors: vec![], bvectors: vec![], residuals: vec![] };

    for _pass in 0..opts.max_passes {
        let free = n - locked.vectors.len();
        if free == 0 {
            break;
        }
        let m_max = opts.max_subspace.min(free);
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut bq: Vec<Vec<f64>> = Vec::new();
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();

        let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        locked.project_out(&mut start);
        locked.project_out(&mut start);
        let bs = apply_b(&start);
        let nrm = dot(&start, &bs).sqrt();
        if nrm <= 0.0 {
            return Err(Error::EigenNoConvergence("degenerate start vector".into()));
        }
        start.iter_mut().for_each(|x| *x /= nrm);
        q.push(start);
        bq.push(bs.into_iter().map(|x| x / nrm).collect());

        let wanted = (count.saturating_sub(locked.values.len())).max(1).min(free);
        let mut converged_pairs: Vec<(f64, Vec<f64>, Vec<f64>, f64)> = Vec::new();
        loop {
            let j = q.len() - 1;
            let mut w = solve_shifted(&bq[j])?;
            alpha.push(dot(&bq[j], &w));
            for _ in 0..2 {
                locked.project_out(&mut w);
                for (qi, bqi) in q.iter().zip(&bq) {
                    let c = dot(bqi, &w);
                    axpy(-c, qi, &mut w);
                }
            }
            let bw = apply_b(&w);
            let b_norm = dot(&w, &bw).max(0.0).sqrt();
            let m = q.len();
            let check = m >= wanted && (m % 5 == 0 || m == m_max || b_norm < 1e-12);
            if check {
                let t = tridiagonal(&alpha, &beta);
                let eig = nalgebra::SymmetricEigen::new(t);
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
                let mut pairs = Vec::new();
                let mut all_ok = true;
                for &idx in order.iter().take(wanted) {
                    let theta = eig.eigenvalues[idx];
                    let est = (b_norm * eig.eigenvectors[(m - 1, idx)]).abs();
                    if theta <= 0.0 || est > 1e-3 * theta.abs() {
                        all_ok = false;
                        break;
                    }
                    let mut x = vec![0.0; n];
                    for (k, qk) in q.iter().enumerate() {
                        axpy(eig.eigenvectors[(k, idx)], qk, &mut x);
                    }
                    let lambda = 1.0 / theta - opts.shift;
                    let ax = apply_a(&x)?;
                    let bx = apply_b(&x);
                    let r: Vec<f64> = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
                    let res = norm(&r) / norm(&x);
                    if res > opts.tol * (1.0 + lambda.abs()) {
                        all_ok = false;
                        break;
                    }
                    pairs.push((lambda, x, bx, res));
                }
                if all_ok {
                    converged_pairs = pairs;
                    break;
                }
                if m == m_max || b_norm < 1e-12 {
                    break;
                }
            }
            if m == m_max || b_norm < 1e-12 {
                break;
            }
            beta.push(b_norm);
            q.push(w.iter().map(|x| x / b_norm).collect());
            bq.push(bw.iter().map(|x| x / b_norm).collect());
        }
        if converged_pairs.is_empty() {
            continue;
        }
        // Stop once nothing new below the current count-th value turns up.
        let new_min = converged_pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let done = if locked.values.len() >= count {
            let mut sorted = locked.values.clone();
            sorted.sort_by(f64::total_cmp);
            let threshold = sorted[count - 1];
            new_min > threshold + 1e-8 * (1.0 + threshold.abs())
        } else {
            false
        };
        if done {
            break;
        }
        for (lambda, mut x, mut bx, res) in converged_pairs {
            // B-normalize before locking
            let s = dot(&x, &bx).sqrt();
            x.iter_mut().for_each(|v| *v /= s);
            bx.iter_mut().for_each(|v| *v /= s);
            locked.values.push(lambda);
            locked.vectors.push(x);
            locked.bvectors.push(bx);
            locked.residuals.push(res);
        }
        if locked.values.len() >= n {
            break;
        }
    }
    if locked.values.len() < count {
        return Err(Error::EigenNoConvergence(format!(
            "{} of {} eigenpairs converged",
            locked.values.len(),
            count
        )));
    }
    let mut order: Vec<usize> = (0..locked.values.len()).collect();
    order.sort_by(|&a, &b| locked.values[a].total_cmp(&locked.values[b]));
    order.truncate(count);
    Ok(LanczosResult {
        values: order.iter().map(|&i| locked.values[i]).collect(),
        vectors: order.iter().map(|&i| locked.vectors[i].clone()).collect(),
        residuals: order.iter().map(|&i| locked.residuals[i]).collect(),
    })
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}
