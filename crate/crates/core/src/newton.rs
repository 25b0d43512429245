//! Damped matrix-free Newton for `F(u) = (-Δ)^s u + c(x) u - u_+^p`.
//!
//! Inner solves use GMRES preconditioned by the resolvent `T_m`. Optional
//! kernel directions are projected out of every operator evaluation, which is
//! how translation-invariant problems (the ground state) stay well posed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, Field};
use crate::krylov::{gmres, GmresOptions};
use crate::spectral::SpectralOps;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target for `‖F(u)‖_∞ / ‖u‖_∞`.
    pub tol: f64,
    pub max_steps: usize,
    /// Relative tolerance of each inner Krylov solve.
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
    /// Backtracking halvings before declaring a line-search failure.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: 30, krylov_tol: 1e-12, krylov_max_iter: 500, max_halvings: 12 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonRun {
    pub u: Field,
    pub residual: f64,
    pub steps: usize,
    pub converged: bool,
    pub line_search_failed: bool,
    pub krylov_failed: bool,
    /// Relative residual before each step and after the last one.
    pub history: Vec<f64>,
}

/// Pointwise data of one semilinear problem.
pub(crate) struct Semilinear<'a> {
    pub ops: &'a SpectralOps,
    pub p: f64,
    /// Linear coefficient `c(x)`, one value per sample.
    pub coef: &'a [f64],
    /// Resolvent shift for the preconditioner, usually `min c`.
    pub shift: f64,
}

impl Semilinear<'_> {
    pub fn residual_raw(&self, u: &[f64]) -> Vec<f64> {
        let lap = self.ops.frac_lap_raw(u);
        let p = self.p;
        lap.iter()
            .zip(u)
            .zip(self.coef)
            .map(|((l, &v), c)| l + c * v - v.max(0.0).powf(p))
            .collect()
    }

    pub fn residual(&self, u: &Field) -> Field {
        Field::from_raw(*u.grid(), self.residual_raw(u.values()))
    }

    /// `‖F(u)‖_∞ / ‖u‖_∞`.
    pub fn relative_residual(&self, u: &Field) -> f64 {
        let scale = u.norm_inf().max(f64::MIN_POSITIVE);
        self.residual(u).norm_inf() / scale
    }

    /// Jacobian `(-Δ)^s + c - p u_+^{p-1}` as a closure on raw vectors.
    pub fn jacobian(&self, u: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        let p = self.p;
        let pot: Vec<f64> =
            u.iter().zip(self.coef).map(|(&v, c)| c - p * v.max(0.0).powf(p - 1.0)).collect();
        move |d: &[f64]| {
            let lap = self.ops.frac_lap_raw(d);
            lap.iter().zip(d).zip(&pot).map(|((l, x), q)| l + q * x).collect()
        }
    }
}

/// Orthonormal (plain dot) basis spanning `dirs`; near-dependent directions are dropped.
pub(crate) fn orthonormal_basis(dirs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for d in dirs {
        let mut v = d.clone();
        let n0 = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-10 * n0 && n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

pub(crate) fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Damped Newton from `u0`. `kernel` recomputes the directions to project out at
/// each iterate (return an empty list for none); `symmetrize` is applied after each update.
pub(crate) fn newton(
    problem: &Semilinear<'_>,
    u0: Field,
    kernel: impl Fn(&Field) -> Vec<Vec<f64>>,
    symmetrize: impl Fn(Field) -> Field,
    opts: NewtonOptions,
) -> Result<NewtonRun> {
    if !(problem.shift > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "preconditioner shift {} must be positive",
            problem.shift
        )));
    }
    u0.check_finite()?;
    let grid = *u0.grid();
    let mut u = u0;
    let mut res = problem.relative_residual(&u);
    let mut history = vec![res];
    let mut steps = 0;
    let mut line_search_failed = false;
    let mut krylov_failed = false;
    let gopts = GmresOptions {
        tol: opts.krylov_tol,
        max_iter: opts.krylov_max_iter,
        restart: opts.krylov_max_iter,
    };

    while res > opts.tol && steps < opts.max_steps {
        let basis = orthonormal_basis(&kernel(&u));
        let mut f = problem.residual_raw(u.values());
        let f_norm = dot(&f, &f).sqrt();
        project_out(&mut f, &basis);
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let jac = problem.jacobian(u.values());
        let apply = |v: &[f64]| {
            let mut x = v.to_vec();
            project_out(&mut x, &basis);
            let mut y = jac(&x);
            project_out(&mut y, &basis);
            y
        };
        let precond = |v: &[f64]| {
            let mut x = v.to_vec();
            project_out(&mut x, &basis);
            let mut y = problem.ops.resolvent_raw(&x, problem.shift);
            project_out(&mut y, &basis);
            y
        };
        let out = gmres(apply, precond, &rhs, gopts);
        if !out.converged {
            // an inexact direction may still reduce F; the line search decides
            krylov_failed = true;
        }
        let mut delta = out.x;
        project_out(&mut delta, &basis);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.values().iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let trial = symmetrize(Field::from_raw(grid, trial));
            let ft = problem.residual_raw(trial.values());
            if (dot(&ft, &ft).sqrt() < (1.0 - 1e-4 * t) * f_norm) || f_norm == 0.0 {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        match accepted {
            Some(next) => {
                next.check_finite()?;
                u = next;
                res = problem.relative_residual(&u);
                history.push(res);
                log::debug!("newton step {steps}: damping {t}, residual {res:e}");
            }
            None => {
                line_search_failed = true;
                break;
            }
        }
    }
    Ok(NewtonRun {
        converged: res <= opts.tol,
        u,
        residual: res,
        steps,
        line_search_failed,
        krylov_failed,
        history,
    })
}
