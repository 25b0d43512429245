//! Matrix-free Krylov solvers on plain `f64` vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::grid::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresOptions {
    /// Relative residual target `‖b - A x‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Krylov dimension before a restart.
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, restart: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual estimates, one per inner iteration.
    pub history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Right-preconditioned restarted GMRES: solves `A x = b` with `x = M z`.
///
/// `apply` evaluates `A v`, `precond` evaluates `M v`. Starts from `x = 0`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    opts: GmresOptions,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return GmresOutcome { x, iterations: 0, converged: true, history };
    }
    let restart = opts.restart.max(1);
    let mut total = 0;
    let mut r = b.to_vec();

    loop {
        let beta = norm(&r);
        if beta / bnorm <= opts.tol {
            return GmresOutcome { x, iterations: total, converged: true, history };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after Givens rotation (upper triangular part)
        let mut h_cols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut converged = false;

        for j in 0..restart {
            if total >= opts.max_iter {
                break;
            }
            total += 1;
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            zs.push(z);
            let mut h = vec![0.0; j + 2];
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    h[i] += hij;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let hnext = norm(&w);
            h[j + 1] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
            cs.push(c);
            sn.push(s);
            h[j] = denom;
            h[j + 1] = 0.0;
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            h.truncate(j + 1);
            h_cols.push(h);
            let rel = g[j + 1].abs() / bnorm;
            history.push(rel);
            if rel <= opts.tol || hnext <= 1e-300 {
                converged = rel <= opts.tol || hnext <= 1e-300;
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        // back substitution on the k x k triangle
        let k = h_cols.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for (j, yj) in y.iter().enumerate().take(k).skip(i + 1) {
                acc -= h_cols[j][i] * yj;
            }
            y[i] = acc / h_cols[i][i];
        }
        for (yj, z) in y.iter().zip(&zs) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += yj * zi;
            }
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let true_rel = norm(&r) / bnorm;
        if let Some(last) = history.last_mut() {
            *last = true_rel;
        }
        if true_rel <= opts.tol {
            return GmresOutcome { x, iterations: total, converged: true, history };
        }
        if total >= opts.max_iter || k == 0 {
            return GmresOutcome { x, iterations: total, converged: false, history };
        }
        // a "converged" inner estimate that fails the true residual check restarts
        let _ = converged;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Maximum Krylov dimension per locked eigenpair.
    pub max_dim: usize,
    /// Ritz residual `‖A v - μ v‖` target.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_dim: 400, tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct LanczosOutcome {
    /// Ascending algebraic order.
    pub pairs: Vec<EigenPair>,
    /// False when some requested pair did not reach the residual target.
    pub converged: bool,
    pub dimension_used: usize,
}

/// Lowest `count` eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalization and explicit locking: each pass extracts the lowest Ritz
/// pair of the operator deflated against the pairs already locked, which also
/// recovers repeated eigenvalues.
pub fn lowest_eigenpairs(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    start: impl Fn(usize) -> Vec<f64>,
    count: usize,
    opts: LanczosOptions,
) -> LanczosOutcome {
    let mut locked: Vec<EigenPair> = Vec::new();
    let mut all_converged = true;
    let mut dim_used = 0;

    let deflate = |v: &mut Vec<f64>, locked: &[EigenPair]| {
        for _ in 0..2 {
            for p in locked {
                let c = dot(v, &p.vector);
                for (a, b) in v.iter_mut().zip(&p.vector) {
                    *a -= c * b;
                }
            }
        }
    };

    for pass in 0..count {
        let mut q = start(pass);
        deflate(&mut q, &locked);
        let qn = norm(&q);
        if qn == 0.0 {
            all_converged = false;
            break;
        }
        q.iter_mut().for_each(|v| *v /= qn);
        let mut basis: Vec<Vec<f64>> = vec![q];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut best: Option<EigenPair> = None;
        let check_every = 10;

        for j in 0..opts.max_dim {
            let mut w = apply(&basis[j]);
            deflate(&mut w, &locked);
            let a = dot(&w, &basis[j]);
            alphas.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            deflate(&mut w, &locked);
            let b = norm(&w);
            let scale = alphas.iter().fold(1e-300f64, |m, a| m.max(a.abs()));
            let last = j + 1 == opts.max_dim || b < 1e-12 * scale;
            if (j + 1) % check_every == 0 || last {
                let (mu, y) = lowest_ritz(&alphas, &betas);
                // Ritz residual = |β_j y_last|
                let res = (b * y[y.len() - 1]).abs();
                let converged = res <= opts.tol;
                if converged || last {
                    let n = basis[0].len();
                    let mut v = vec![0.0; n];
                    for (yi, bi) in y.iter().zip(&basis) {
                        for (vk, bk) in v.iter_mut().zip(bi) {
                            *vk += yi * bk;
                        }
                    }
                    deflate(&mut v, &locked);
                    let vn = norm(&v);
                    v.iter_mut().for_each(|x| *x /= vn);
                    let av = apply(&v);
                    let true_res = norm(
                        &av.iter().zip(&v).map(|(a, x)| a - mu * x).collect::<Vec<_>>(),
                    );
                    best = Some(EigenPair { value: mu, vector: v, residual: true_res });
                    dim_used = dim_used.max(j + 1);
                    if !converged {
                        all_converged = false;
                    }
                    break;
                }
            }
            betas.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        match best {
            Some(p) => locked.push(p),
            None => {
                all_converged = false;
                break;
            }
        }
    }
    locked.sort_by(|a, b| a.value.total_cmp(&b.value));
    LanczosOutcome { pairs: locked, converged: all_converged, dimension_used: dim_used }
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let y = eig.eigenvectors.column(imin).iter().copied().collect();
    (eig.eigenvalues[imin], y)
}
