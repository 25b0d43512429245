//! Lyapunov–Schmidt reduction: the projected linear solve, the multipliers
//! `c_ij`, the nonlinear correction `Φ(q)` and an unprojected Newton solver
//! used to cross-validate the reduced solutions.
//!
//! Convention of [`projected_solve`]: `L φ = g + Σ c_ij Z_ij`, `⟨φ, Z_ij⟩ = 0`,
//! with `L = (-Δ)^s + V(εx) - p W^{p-1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzBundle;
use crate::error::{Error, Result};
use crate::grid::{dot, Field, Grid};
use crate::krylov::{gmres, GmresOptions};
use crate::newton::{newton, orthonormal_basis, project_out, NewtonOptions, Semilinear};
use crate::potential::Potential;
use crate::spectral::SpectralOps;

/// Largest accepted condition number of the `Z` Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e8;

/// Multipliers as a `k × N` table.
pub type Multipliers = Vec<Vec<f64>>;

fn max_abs(c: &Multipliers) -> f64 {
    c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Precomputed pieces of the linearized operator at one ansatz.
pub struct ProjectedOperator<'a> {
    bundle: &'a AnsatzBundle,
    ops: SpectralOps,
    // V(εx) - p W^{p-1}
    pot: Vec<f64>,
    shift: f64,
    basis: Vec<Vec<f64>>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    pub gmres: GmresOptions,
}

impl<'a> ProjectedOperator<'a> {
    pub fn new(bundle: &'a AnsatzBundle) -> Result<Self> {
        let grid = *bundle.grid();
        let ops = SpectralOps::new(grid, bundle.s)?;
        let p = bundle.p;
        let pot: Vec<f64> = bundle
            .potential
            .values()
            .iter()
            .zip(bundle.w.values())
            .map(|(v, w)| v - p * w.max(0.0).powf(p - 1.0))
            .collect();
        let shift = bundle.potential.min();
        let zs = bundle.z_flat();
        let n = zs.len();
        let gram = DMatrix::from_fn(n, n, |a, b| zs[a].dot(zs[b]));
        let cond = condition_number(&gram);
        if !(cond <= MAX_GRAM_CONDITION) {
            return Err(Error::IllConditioned { cond });
        }
        let gram_inv = gram.clone().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
        let basis = orthonormal_basis(&zs.iter().map(|z| z.values().to_vec()).collect::<Vec<_>>());
        Ok(Self { bundle, ops, pot, shift, basis, gram, gram_inv, gmres: GmresOptions::default() })
    }

    pub fn grid(&self) -> &Grid {
        self.bundle.grid()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `L φ` on raw samples.
    pub fn apply_raw(&self, v: &[f64]) -> Vec<f64> {
        let lap = self.ops.frac_lap_raw(v);
        lap.iter().zip(v).zip(&self.pot).map(|((l, x), q)| l + q * x).collect()
    }

    pub fn apply(&self, f: &Field) -> Field {
        Field::from_raw(*f.grid(), self.apply_raw(f.values()))
    }

    /// `c = G^{-1} ⟨Z, r⟩` for a residual `r = L φ - g` lying in `span{Z}`.
    fn coefficients(&self, r: &Field) -> Multipliers {
        let zs = self.bundle.z_flat();
        let rhs = DVector::from_iterator(zs.len(), zs.iter().map(|z| z.dot(r)));
        let c = &self.gram_inv * rhs;
        let n = self.grid().dim();
        c.as_slice().chunks(n).map(|ch| ch.to_vec()).collect()
    }

    /// Solves `L φ = g + Σ c Z`, `φ ⊥ Z`.
    pub fn solve(&self, g: &Field) -> Result<(Field, Multipliers)> {
        self.solve_to(g, g.norm_l2())
    }

    /// [`Self::solve`] with the residual tolerance taken relative to `scale` in the discrete `L²` norm.
    pub fn solve_to(&self, g: &Field, scale: f64) -> Result<(Field, Multipliers)> {
        if g.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        g.check_finite()?;
        let basis = &self.basis;
        let mut rhs = g.values().to_vec();
        project_out(&mut rhs, basis);
        let apply = |v: &[f64]| {
            let mut x = v.to_vec();
            project_out(&mut x, basis);
            let mut y = self.apply_raw(&x);
            project_out(&mut y, basis);
            y
        };
        let precond = |v: &[f64]| {
            let mut x = v.to_vec();
            project_out(&mut x, basis);
            let mut y = self.ops.resolvent_raw(&x, self.shift);
            project_out(&mut y, basis);
            y
        };
        // the tolerance is relative to `scale`, not to the projection of g
        let unit = self.grid().cell_volume().sqrt();
        let (g_norm, r_norm) = (scale / unit, dot(&rhs, &rhs).sqrt());
        if r_norm <= self.gmres.tol * g_norm {
            let phi = Field::zeros(*self.grid());
            let r = g.scale(-1.0);
            return Ok((phi, self.coefficients(&r)));
        }
        let mut gopts = self.gmres;
        gopts.tol = (self.gmres.tol * g_norm / r_norm).min(0.5);
        let out = gmres(apply, precond, &rhs, gopts);
        if !out.converged {
            let tail: Vec<String> =
                out.history.iter().rev().take(5).rev().map(|r| format!("{r:.3e}")).collect();
            return Err(Error::NotConverged {
                iterations: out.iterations,
                detail: format!("projected Krylov solve, last residuals [{}]", tail.join(", ")),
            });
        }
        let mut x = out.x;
        project_out(&mut x, basis);
        let phi = Field::from_raw(*self.grid(), x);
        let r = self.apply(&phi).axpy(-1.0, g);
        Ok((phi, self.coefficients(&r)))
    }
}

fn condition_number(g: &DMatrix<f64>) -> f64 {
    let sv = g.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `(φ, c)` with `(-Δ)^s φ + V(εx)φ - pW^{p-1}φ = g + Σ c_ij Z_ij` and `φ ⊥ Z_ij`.
pub fn projected_solve(g: &Field, bundle: &AnsatzBundle) -> Result<(Field, Multipliers)> {
    ProjectedOperator::new(bundle)?.solve(g)
}

/// Multipliers from the Gram system, split into the leading term and a remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierEstimate {
    pub c: Multipliers,
    /// `α_ij^{-1} ⟨g, Z_ij⟩` with `α_ij = ‖Z_ij‖²`.
    pub leading: Multipliers,
    /// `c - leading`.
    pub remainder: Multipliers,
    pub gram_condition: f64,
}

/// Solves `Σ c_ij ⟨Z_ij, Z_lk⟩ = ⟨g, Z_lk⟩ + ⟨φ, L Z_lk⟩` for the convention
/// `L φ + g = Σ c Z` (so `multiplier_estimate(φ, -g)` reproduces [`projected_solve`]).
///
/// `L Z_lk` is not applied as an operator: since `∂_k w_l` solves the
/// differentiated spike equation, only the potential and interaction
/// corrections `(V(εx) - λ_l) Z_lk - p (W^{p-1} - w_l^{p-1}) Z_lk` remain.
pub fn multiplier_estimate(phi: &Field, g: &Field, bundle: &AnsatzBundle) -> Result<MultiplierEstimate> {
    if phi.grid() != bundle.grid() || g.grid() != bundle.grid() {
        return Err(Error::GridMismatch);
    }
    let zs = bundle.z_flat();
    let n = zs.len();
    let dim = bundle.grid().dim();
    let gram = DMatrix::from_fn(n, n, |a, b| zs[a].dot(zs[b]));
    let cond = condition_number(&gram);
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned { cond });
    }
    let p = bundle.p;
    let mut rhs = DVector::zeros(n);
    for (a, z) in zs.iter().enumerate() {
        let l = a / dim;
        let lam = bundle.lambdas[l];
        let wl = &bundle.spikes[l];
        let lz: Vec<f64> = (0..z.values().len())
            .map(|i| {
                let zv = z.values()[i];
                let coef = bundle.potential.values()[i] - lam
                    - p * (bundle.w.values()[i].max(0.0).powf(p - 1.0) - wl.values()[i].max(0.0).powf(p - 1.0));
                coef * zv
            })
            .collect();
        rhs[a] = g.dot(z) + bundle.grid().cell_volume() * dot(phi.values(), &lz);
    }
    let c = gram.clone().lu().solve(&rhs).ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let to_table = |v: &[f64]| -> Multipliers { v.chunks(dim).map(|ch| ch.to_vec()).collect() };
    let leading: Vec<f64> = (0..n).map(|a| g.dot(zs[a]) / gram[(a, a)]).collect();
    let remainder: Vec<f64> = (0..n).map(|a| c[a] - leading[a]).collect();
    Ok(MultiplierEstimate {
        c: to_table(c.as_slice()),
        leading: to_table(&leading),
        remainder: to_table(&remainder),
        gram_condition: cond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOptions {
    /// Largest `‖E‖_Y` for which the fixed point is attempted.
    pub eta: f64,
    /// Stop once the `Y`-norm increment is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub gmres: GmresOptions,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { eta: 0.1, tol: 1e-10, max_iter: 100, gmres: GmresOptions::default() }
    }
}

/// One row of a fixed-point history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: usize,
    pub increment: f64,
    /// `increment_n / increment_{n-1}`, NaN on the first step.
    pub ratio: f64,
    pub max_abs_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub phi: Field,
    pub c: Multipliers,
    pub norm_y: f64,
    pub e_norm_y: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub contraction_history: Vec<f64>,
    pub history: Vec<HistoryRow>,
}

impl CorrectionResult {
    pub fn max_abs_c(&self) -> f64 {
        max_abs(&self.c)
    }

    /// Largest `|⟨φ, Z_ij⟩| / (‖φ‖ ‖Z_ij‖)`.
    pub fn orthogonality_defect(&self, bundle: &AnsatzBundle) -> f64 {
        let pn = self.phi.norm_l2();
        if pn == 0.0 {
            return 0.0;
        }
        bundle.z_flat().iter().fold(0.0f64, |m, z| m.max(self.phi.dot(z).abs() / (pn * z.norm_l2())))
    }
}

/// `N(φ) = (W + φ)_+^p - p W^{p-1} φ - W^p`.
pub fn nonlinear_term(w: &Field, phi: &Field, p: f64) -> Field {
    w.zip_map(phi, |a, f| {
        let a0 = a.max(0.0);
        (a + f).max(0.0).powf(p) - p * a0.powf(p - 1.0) * f - a0.powf(p)
    })
}

/// Fixed point `φ ← T_q(E + N(φ))` for the correction `Φ(q)`.
pub fn nonlinear_correction(bundle: &AnsatzBundle, opts: CorrectionOptions) -> Result<CorrectionResult> {
    nonlinear_correction_from(bundle, opts, None)
}

/// [`nonlinear_correction`] started from `start` (e.g. the correction at a nearby configuration).
///
/// Iterates are updated by `φ_{n+1} = φ_n + T(g_n - g_{n-1})`, which is the
/// same map by linearity of `T` but lets later Krylov solves start small.
pub fn nonlinear_correction_from(
    bundle: &AnsatzBundle,
    opts: CorrectionOptions,
    start: Option<&Field>,
) -> Result<CorrectionResult> {
    if !(bundle.e_norm_y <= opts.eta) {
        return Err(Error::InvalidConfig(format!(
            "‖E‖_Y = {:e} exceeds the smallness threshold η = {}",
            bundle.e_norm_y, opts.eta
        )));
    }
    let mut op = ProjectedOperator::new(bundle)?;
    op.gmres = opts.gmres;
    let grid = *bundle.grid();
    let mut phi = match start {
        Some(f) if f.grid() != &grid => return Err(Error::GridMismatch),
        Some(f) => f.clone(),
        None => Field::zeros(grid),
    };
    let mut c: Multipliers = vec![vec![0.0; grid.dim()]; bundle.spikes.len()];
    let mut prev: Option<(Field, Field, Multipliers)> = None;
    let mut history = Vec::new();
    let mut ratios = Vec::new();
    let mut prev_incr = f64::NAN;
    let mut streak = 0;
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let g = bundle.e.axpy(1.0, &nonlinear_term(&bundle.w, &phi, bundle.p));
        let (next, cn) = match &prev {
            Some((g_prev, t_prev, c_prev)) => {
                let (d, dc) = op.solve_to(&g.axpy(-1.0, g_prev), g.norm_l2())?;
                let cn = c_prev.iter().zip(&dc).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
                (t_prev.axpy(1.0, &d), cn)
            }
            None => op.solve(&g)?,
        };
        prev = Some((g, next.clone(), cn.clone()));
        let incr = bundle.norm.norm(&next.axpy(-1.0, &phi));
        let ratio = if prev_incr.is_nan() { f64::NAN } else { incr / prev_incr };
        phi = next;
        c = cn;
        history.push(HistoryRow { step: iterations, increment: incr, ratio, max_abs_c: max_abs(&c) });
        if !ratio.is_nan() {
            ratios.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
        }
        if incr <= opts.tol {
            converged = true;
            break;
        }
        if streak >= 3 {
            diverged = true;
            break;
        }
        prev_incr = incr;
    }
    Ok(CorrectionResult {
        norm_y: bundle.norm.norm(&phi),
        e_norm_y: bundle.e_norm_y,
        phi,
        c,
        iterations,
        converged,
        diverged,
        contraction_history: ratios,
        history,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonResult {
    pub u: Field,
    pub residual_norm: f64,
    pub iterations: usize,
    pub spike_centers_detected: Vec<Vec<f64>>,
    pub converged: bool,
    pub diverged: bool,
    /// Set when some inner Krylov solve missed its tolerance.
    pub jacobian_warning: bool,
    pub history: Vec<f64>,
}

/// Damped Newton on `(-Δ)^s u + V(εx) u - u_+^p = 0` from `u0`, without projections.
pub fn full_newton_solve(
    v: &Potential,
    epsilon: f64,
    u0: &Field,
    opts: NewtonOptions,
    s: f64,
    p: f64,
) -> Result<NewtonResult> {
    let grid = *u0.grid();
    let ops = SpectralOps::new(grid, s)?;
    let pot = v.sample(&grid, epsilon)?;
    let problem = Semilinear { ops: &ops, p, coef: pot.values(), shift: pot.min() };
    let run = newton(&problem, u0.clone(), |_| Vec::new(), |f| f, opts)?;
    let spike_centers_detected = detect_spikes(&run.u);
    Ok(NewtonResult {
        residual_norm: run.residual,
        iterations: run.steps,
        converged: run.converged,
        diverged: run.line_search_failed,
        jacobian_warning: run.krylov_failed,
        spike_centers_detected,
        history: run.history,
        u: run.u,
    })
}

/// Strict local maxima above half the supremum, refined by a per-axis parabola.
pub fn detect_spikes(u: &Field) -> Vec<Vec<f64>> {
    let grid = *u.grid();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let v = u.values();
    let half = 0.5 * u.max();
    let at = |i: usize, j: usize| v[grid.flat_index([i % m, j % m])];
    let refine = |fm: f64, f0: f64, fp: f64| {
        let d = fm - 2.0 * f0 + fp;
        if d < 0.0 {
            0.5 * (fm - fp) / d
        } else {
            0.0
        }
    };
    let mut out = Vec::new();
    match grid.dim() {
        1 => {
            for i in 0..m {
                let (fm, f0, fp) = (v[(i + m - 1) % m], v[i], v[(i + 1) % m]);
                if f0 > half && f0 > fm && f0 > fp {
                    out.push(vec![grid.wrap(grid.coordinate(i) + h * refine(fm, f0, fp))]);
                }
            }
        }
        _ => {
            for i in 0..m {
                for j in 0..m {
                    let f0 = at(i, j);
                    if f0 <= half {
                        continue;
                    }
                    let strict = (0..3).all(|a| {
                        (0..3).all(|b| (a == 1 && b == 1) || at(i + m - 1 + a, j + m - 1 + b) < f0)
                    });
                    if strict {
                        let dx = refine(at(i + m - 1, j), f0, at(i + 1, j));
                        let dy = refine(at(i, j + m - 1), f0, at(i, j + 1));
                        out.push(vec![
                            grid.wrap(grid.coordinate(i) + h * dx),
                            grid.wrap(grid.coordinate(j) + h * dy),
                        ]);
                    }
                }
            }
        }
    }
    out
}
