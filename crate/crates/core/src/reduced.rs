//! The reduced energy `I(q) = J_ε(W_q + Φ(q))`, its asymptotic model and the
//! searches for critical points of `I`.
//!
//! The spikes are critical exactly when every multiplier `c_ij` vanishes, so
//! `max |c_ij|` is the stopping rule; finite differences of `I` and the model
//! Hessian only steer the iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_ansatz, config_valid, AnsatzOptions, SpikeConfig};
use crate::error::{Error, Result};
use crate::ground_state::{energy_with_potential, GroundState};
use crate::grid::Field;
use crate::potential::Potential;
use crate::reduction::{nonlinear_correction_from, CorrectionOptions, Multipliers};

/// Axis-aligned box in the outer variable `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    /// `[-r, r]^dim`.
    pub fn cube(dim: usize, r: f64) -> Self {
        Self { lo: vec![-r; dim], hi: vec![r; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(Error::InvalidConfig(format!("box {self:?} is not {dim}-dimensional")));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b && a.is_finite() && b.is_finite())) {
            return Err(Error::InvalidConfig(format!("box {self:?} is empty or unbounded")));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| v >= a && v <= b)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (a, b)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*a, *b);
        }
    }

    /// `n` points per axis, cell centred, in row-major order.
    fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let axis = |d: usize| -> Vec<f64> {
            (0..n).map(|i| self.lo[d] + (i as f64 + 0.5) / n as f64 * (self.hi[d] - self.lo[d])).collect()
        };
        match self.dim() {
            1 => axis(0).into_iter().map(|x| vec![x]).collect(),
            _ => {
                let (xs, ys) = (axis(0), axis(1));
                xs.iter().flat_map(|&x| ys.iter().map(move |&y| vec![x, y])).collect()
            }
        }
    }
}

/// Where the spikes may live: all in one box, or one box per spike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Shared { domain: BoxRegion },
    PerSpike { boxes: Vec<BoxRegion> },
}

impl Region {
    pub fn box_for(&self, j: usize) -> &BoxRegion {
        match self {
            Region::Shared { domain } => domain,
            Region::PerSpike { boxes } => &boxes[j],
        }
    }

    fn validate(&self, k: usize, dim: usize) -> Result<()> {
        match self {
            Region::Shared { domain } => domain.validate(dim),
            Region::PerSpike { boxes } => {
                if boxes.len() != k {
                    return Err(Error::InvalidConfig(format!(
                        "{} boxes given for {k} spikes",
                        boxes.len()
                    )));
                }
                boxes.iter().try_for_each(|b| b.validate(dim))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedOptions {
    pub ansatz: AnsatzOptions,
    pub correction: CorrectionOptions,
    /// Central-difference step in `q` for `∇_q I`.
    pub fd_step: f64,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self { ansatz: AnsatzOptions::default(), correction: CorrectionOptions::default(), fd_step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConstant {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedReport {
    pub q: SpikeConfig,
    /// Absent when the correction diverged.
    pub i_value: Option<f64>,
    pub c_matrix: Multipliers,
    pub grad_fd: Vec<Vec<f64>>,
    pub asymptotic_value: Option<f64>,
    pub asymptotic_gap: Option<f64>,
    pub theta: f64,
    pub c_star: f64,
    pub interaction_constants: Vec<PairConstant>,
    pub e_norm_y: f64,
    pub phi_norm_y: f64,
    /// `α_ij = ‖Z_ij‖²`.
    pub alpha: Vec<Vec<f64>>,
    pub diverged: bool,
}

impl ReducedReport {
    pub fn max_abs_c(&self) -> f64 {
        self.c_matrix.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// The model `c_* Σ V^θ(ξ_i) - ½ Σ_{i≠j} c_ij / |q_i - q_j|^{N+2s}`,
/// `c_ij = c₀ λ_i^α λ_j^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticModel {
    pub c_star: f64,
    pub theta: f64,
    /// `None` when the ground state's decay fit is unusable.
    pub c0: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub decay: f64,
}

impl AsymptoticModel {
    pub fn new(gs: &GroundState) -> Self {
        let params = gs.params;
        let n = gs.grid().dim();
        let theta = params.theta(n);
        let (alpha, beta) = params.interaction_exponents(n);
        let lam = gs.lambda;
        let c_star = gs.energy_j / lam.powf(theta);
        let c0 = gs.decay.valid.then(|| {
            let mass = gs.profile.map(|w| w.max(0.0).powf(params.p)).integral();
            gs.decay.c0 * mass / lam.powf(alpha + beta)
        });
        Self { c_star, theta, c0, alpha, beta, decay: params.decay_exponent(n) }
    }

    pub fn pair_constant(&self, lambda_i: f64, lambda_j: f64) -> Option<f64> {
        self.c0.map(|c| c * lambda_i.powf(self.alpha) * lambda_j.powf(self.beta))
    }

    fn value_parts(&self, v: &Potential, q: &[Vec<f64>], epsilon: f64) -> (f64, f64) {
        let lam: Vec<f64> = q.iter().map(|x| v.eval(&scaled(x, epsilon))).collect();
        let single: f64 = lam.iter().map(|l| self.c_star * l.powf(self.theta)).sum();
        let mut inter = 0.0;
        for i in 0..q.len() {
            for j in 0..q.len() {
                if i != j {
                    let d = euclid(&q[i], &q[j]);
                    inter += 0.5 * self.pair_constant(lam[i], lam[j]).unwrap_or(0.0) / d.powf(self.decay);
                }
            }
        }
        (single, inter)
    }

    /// Model value at spike centers `q` (inner variable).
    pub fn value(&self, v: &Potential, q: &[Vec<f64>], epsilon: f64) -> Result<f64> {
        if q.len() > 1 && self.c0.is_none() {
            return Err(Error::InvalidConfig(
                "interaction constant needs a valid far-field decay fit".into(),
            ));
        }
        let (a, b) = self.value_parts(v, q, epsilon);
        Ok(a - b)
    }

    /// As [`AsymptoticModel::value`], dropping the interaction when it is unavailable.
    fn steering_value(&self, v: &Potential, q: &[Vec<f64>], epsilon: f64) -> f64 {
        let (a, b) = self.value_parts(v, q, epsilon);
        a - b
    }
}

fn scaled(x: &[f64], epsilon: f64) -> Vec<f64> {
    x.iter().map(|v| v * epsilon).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Model energy at outer-variable centers `ξ_i = ε q_i`.
pub fn asymptotic_energy(v: &Potential, xi_list: &[Vec<f64>], epsilon: f64, gs: &GroundState) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    let q: Vec<Vec<f64>> = xi_list.iter().map(|x| scaled(x, 1.0 / epsilon)).collect();
    AsymptoticModel::new(gs).value(v, &q, epsilon)
}

/// `I`, `c` and the correction size at one configuration.
#[derive(Debug, Clone)]
struct Evaluation {
    value: Option<f64>,
    c: Multipliers,
    e_norm_y: f64,
    phi_norm_y: f64,
    alpha: Vec<Vec<f64>>,
    lambdas: Vec<f64>,
    phi: Field,
}

fn evaluate(
    v: &Potential,
    cfg: &SpikeConfig,
    gs: &GroundState,
    opts: &ReducedOptions,
    warm: Option<&Field>,
) -> Result<Evaluation> {
    let bundle = build_ansatz(v, cfg, gs, opts.ansatz)?;
    let corr = nonlinear_correction_from(&bundle, opts.correction, warm)?;
    let alpha = bundle.z.iter().map(|zi| zi.iter().map(|z| z.dot(z)).collect()).collect();
    let value = if corr.converged && !corr.diverged {
        let u = bundle.w.axpy(1.0, &corr.phi);
        Some(energy_with_potential(&u, &bundle.potential, gs.params)?)
    } else {
        None
    };
    Ok(Evaluation {
        value,
        c: corr.c,
        e_norm_y: bundle.e_norm_y,
        phi_norm_y: corr.norm_y,
        alpha,
        lambdas: bundle.lambdas,
        phi: corr.phi,
    })
}

fn shifted(cfg: &SpikeConfig, i: usize, j: usize, h: f64) -> SpikeConfig {
    let mut centers = cfg.centers.clone();
    centers[i][j] += h;
    cfg.with_centers(centers)
}

fn grad_fd(
    v: &Potential,
    cfg: &SpikeConfig,
    gs: &GroundState,
    opts: &ReducedOptions,
    center: &Field,
) -> Result<Option<Vec<Vec<f64>>>> {
    let h = opts.fd_step;
    let dim = gs.grid().dim();
    let mut g = vec![vec![0.0; dim]; cfg.k()];
    for i in 0..cfg.k() {
        for j in 0..dim {
            let plus = evaluate(v, &shifted(cfg, i, j, h), gs, opts, Some(center))?.value;
            let minus = evaluate(v, &shifted(cfg, i, j, -h), gs, opts, Some(center))?.value;
            match (plus, minus) {
                (Some(a), Some(b)) => g[i][j] = (a - b) / (2.0 * h),
                _ => return Ok(None),
            }
        }
    }
    Ok(Some(g))
}

/// Evaluates `I(q)`, the multipliers, `∇_q I` and the asymptotic model at `cfg`.
pub fn reduced_energy(v: &Potential, cfg: &SpikeConfig, gs: &GroundState, opts: ReducedOptions) -> Result<ReducedReport> {
    let ev = evaluate(v, cfg, gs, &opts, None)?;
    let model = AsymptoticModel::new(gs);
    let grad = if ev.value.is_some() { grad_fd(v, cfg, gs, &opts, &ev.phi)? } else { None };
    let asymptotic_value = model.value(v, &cfg.centers, cfg.epsilon).ok();
    let mut interaction_constants = Vec::new();
    for i in 0..cfg.k() {
        for j in 0..cfg.k() {
            if i != j {
                if let Some(value) = model.pair_constant(ev.lambdas[i], ev.lambdas[j]) {
                    interaction_constants.push(PairConstant { i, j, value });
                }
            }
        }
    }
    let asymptotic_gap = match (ev.value, asymptotic_value) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    Ok(ReducedReport {
        q: cfg.clone(),
        i_value: ev.value,
        diverged: ev.value.is_none(),
        c_matrix: ev.c,
        grad_fd: grad.unwrap_or_default(),
        asymptotic_value,
        asymptotic_gap,
        theta: model.theta,
        c_star: model.c_star,
        interaction_constants,
        e_norm_y: ev.e_norm_y,
        phi_norm_y: ev.phi_norm_y,
        alpha: ev.alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    MinimizeV,
    MaximizeV,
    DegreeZeroOfGradV,
    ClusterMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Stopping threshold on `max |c_ij|`; `None` derives it from the region.
    pub c_tol: Option<f64>,
    pub max_iter: usize,
    /// Explicit starts in `ξ`; when empty the model's critical points are used.
    pub seeds: Vec<Vec<Vec<f64>>>,
    /// Lattice points per axis and box for seeding the model.
    pub lattice: usize,
    pub max_starts: usize,
    pub delta: f64,
    /// Minimum separation in `q`; the cluster search overrides it with its floor.
    pub r_min: f64,
    pub reduced: ReducedOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            c_tol: None,
            max_iter: 30,
            seeds: Vec::new(),
            lattice: 5,
            max_starts: 3,
            delta: 0.1,
            r_min: 2.0,
            reduced: ReducedOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub start: usize,
    pub iteration: usize,
    /// Centers in `ξ`.
    pub xi: Vec<Vec<f64>>,
    pub i_value: f64,
    pub max_abs_c: f64,
    pub grad_norm: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub q_star: SpikeConfig,
    pub mode: SearchMode,
    pub max_abs_c: f64,
    pub c_tol: f64,
    pub v_at_spikes: Vec<f64>,
    pub i_value: Option<f64>,
    pub converged: bool,
    pub history: Vec<SearchStep>,
    pub starts_tried: usize,
    /// Separation floor in `ξ` (cluster search only).
    pub separation_floor: Option<f64>,
    /// Smallest pairwise `|ξ_i - ξ_j|` at the result.
    pub min_separation_xi: f64,
    /// The maximizer sits on the separation floor (cluster search only).
    pub boundary_stuck: bool,
}

#[derive(Debug, Clone)]
struct Point {
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    crit: f64,
}

fn merit(mode: SearchMode, point: &Point) -> f64 {
    match mode {
        SearchMode::MinimizeV => point.value,
        SearchMode::MaximizeV | SearchMode::ClusterMax => -point.value,
        SearchMode::DegreeZeroOfGradV => point.grad.iter().map(|g| g * g).sum(),
    }
}

fn grad_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Modified Newton direction: `|H|` for descent, `-|H|` for ascent, plain `H` for zeros of the gradient.
fn direction(mode: SearchMode, h: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let eig = SymmetricEigen::new(h.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let floor = 1e-8 * scale;
    let gv = DVector::from_column_slice(g);
    let mut d = DVector::zeros(n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        let gk = u.dot(&gv);
        let mag = lam.abs().max(floor);
        let coef = match mode {
            SearchMode::MinimizeV => -gk / mag,
            SearchMode::MaximizeV | SearchMode::ClusterMax => gk / mag,
            SearchMode::DegreeZeroOfGradV => -gk / if lam.abs() < floor { floor.copysign(lam) } else { lam },
        };
        d += u * coef;
    }
    d.as_slice().to_vec()
}

struct Steered {
    best: Point,
    reached: bool,
    steps: Vec<(Point, f64)>,
}

/// Damped modified-Newton iteration. `eval` returns `None` where the objective is unavailable.
fn steer(
    x0: Vec<f64>,
    mode: SearchMode,
    mut eval: impl FnMut(&[f64]) -> Option<Point>,
    hess: impl Fn(&[f64]) -> DMatrix<f64>,
    project: impl Fn(&mut Vec<f64>),
    tol: f64,
    max_iter: usize,
) -> Option<Steered> {
    let mut x0 = x0;
    project(&mut x0);
    let mut cur = eval(&x0)?;
    let mut steps = Vec::new();
    // symmetric rank-one secant correction on top of the model Hessian
    let mut correction = DMatrix::zeros(cur.x.len(), cur.x.len());
    for _ in 0..max_iter {
        if cur.crit <= tol {
            return Some(Steered { best: cur, reached: true, steps });
        }
        let d = direction(mode, &(hess(&cur.x) + &correction), &cur.grad);
        let m0 = merit(mode, &cur);
        let g0 = grad_norm(&cur.grad);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..10 {
            let mut trial: Vec<f64> = cur.x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut trial);
            if trial == cur.x {
                break;
            }
            if let Some(p) = eval(&trial) {
                let m = merit(mode, &p);
                // near the optimum value changes drown in noise; fall back to the gradient
                let noise = 1e-12 * cur.value.abs().max(1.0);
                let better = m < m0 || (m <= m0 + noise && grad_norm(&p.grad) < g0) || p.crit < cur.crit * 1e-2;
                if better {
                    accepted = Some(p);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(p) => {
                let step = DVector::from_iterator(p.x.len(), p.x.iter().zip(&cur.x).map(|(a, b)| a - b));
                let dg = DVector::from_iterator(p.grad.len(), p.grad.iter().zip(&cur.grad).map(|(a, b)| a - b));
                let r = dg - (hess(&p.x) + &correction) * &step;
                let rs = r.dot(&step);
                if rs.abs() > 1e-8 * r.norm() * step.norm() {
                    correction += &r * r.transpose() / rs;
                }
                cur = p;
                steps.push((cur.clone(), t));
            }
            None => break,
        }
    }
    let reached = cur.crit <= tol;
    Some(Steered { best: cur, reached, steps })
}

/// Everything fixed during one search.
struct Problem<'a> {
    v: &'a Potential,
    gs: &'a GroundState,
    epsilon: f64,
    k: usize,
    dim: usize,
    region: &'a Region,
    mode: SearchMode,
    model: AsymptoticModel,
    /// Separation floor in `ξ`.
    floor: Option<f64>,
    opts: &'a SearchOptions,
    r_min: f64,
}

impl Problem<'_> {
    fn unflatten(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    fn flatten(q: &[Vec<f64>]) -> Vec<f64> {
        q.iter().flatten().copied().collect()
    }

    fn config(&self, q: Vec<Vec<f64>>) -> SpikeConfig {
        SpikeConfig::new(q, self.epsilon, self.opts.delta, self.r_min)
    }

    /// Clamp each spike into its box (in `q`) and push pairs apart to the floor.
    fn project(&self, x: &mut Vec<f64>) {
        let inv = 1.0 / self.epsilon;
        for j in 0..self.k {
            let b = self.region.box_for(j);
            let qb = BoxRegion::new(scaled(&b.lo, inv), scaled(&b.hi, inv));
            qb.clamp(&mut x[j * self.dim..(j + 1) * self.dim]);
        }
        if let Some(floor) = self.floor {
            let fq = floor * inv;
            for _ in 0..4 {
                for i in 0..self.k {
                    for j in i + 1..self.k {
                        let (a, b) = (i * self.dim, j * self.dim);
                        let mut diff: Vec<f64> = (0..self.dim).map(|d| x[b + d] - x[a + d]).collect();
                        let mut dist = grad_norm(&diff);
                        if dist >= fq {
                            continue;
                        }
                        if dist == 0.0 {
                            diff = vec![0.0; self.dim];
                            diff[0] = 1.0;
                            dist = 1.0;
                            x[b] = x[a];
                            (1..self.dim).for_each(|d| x[b + d] = x[a + d]);
                            let push = 0.5 * fq;
                            x[a] -= push;
                            x[b] += push;
                            continue;
                        }
                        let push = 0.5 * (fq - dist) * (1.0 + 1e-12);
                        for d in 0..self.dim {
                            x[a + d] -= push * diff[d] / dist;
                            x[b + d] += push * diff[d] / dist;
                        }
                    }
                }
            }
            for j in 0..self.k {
                let b = self.region.box_for(j);
                let qb = BoxRegion::new(scaled(&b.lo, inv), scaled(&b.hi, inv));
                qb.clamp(&mut x[j * self.dim..(j + 1) * self.dim]);
            }
        }
    }

    fn model_value(&self, x: &[f64]) -> f64 {
        self.model.steering_value(self.v, &self.unflatten(x), self.epsilon)
    }

    fn model_grad(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-4;
        (0..x.len())
            .map(|a| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[a] += h;
                m[a] -= h;
                (self.model_value(&p) - self.model_value(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn model_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let h = 1e-2;
        let f = |da: usize, sa: f64, db: usize, sb: f64| {
            let mut y = x.to_vec();
            y[da] += sa * h;
            y[db] += sb * h;
            self.model_value(&y)
        };
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = (f(a, 1.0, b, 1.0) - f(a, 1.0, b, -1.0) - f(a, -1.0, b, 1.0) + f(a, -1.0, b, -1.0))
                    / (4.0 * h * h);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }

    fn v_at(&self, q: &[Vec<f64>]) -> Vec<f64> {
        q.iter().map(|x| self.v.eval(&scaled(x, self.epsilon))).collect()
    }

    /// `c_* ε max |∇V^θ| / min α` over a lattice of the region.
    fn c_scale(&self, alpha_min: f64) -> f64 {
        let theta = self.model.theta;
        let mut gmax = 0.0f64;
        for j in 0..self.k {
            for xi in self.region.box_for(j).lattice(9) {
                let g = self.v.grad(&xi);
                let val = self.v.eval(&xi);
                let n = (0..self.dim).map(|d| g[d] * g[d]).sum::<f64>().sqrt();
                gmax = gmax.max(theta * val.powf(theta - 1.0) * n);
            }
        }
        self.model.c_star * self.epsilon * gmax / alpha_min
    }

    fn seeds(&self) -> Vec<Vec<f64>> {
        let inv = 1.0 / self.epsilon;
        if !self.opts.seeds.is_empty() {
            return self.opts.seeds.iter().map(|s| Self::flatten(&s.iter().map(|x| scaled(x, inv)).collect::<Vec<_>>())).collect();
        }
        // lattice starts, one lattice per spike; start tuples are taken diagonally
        // (plus a shift for shared boxes) to keep the count linear in the lattice size
        let lat: Vec<Vec<Vec<f64>>> = (0..self.k).map(|j| self.region.box_for(j).lattice(self.opts.lattice)).collect();
        let n = lat[0].len();
        let mut starts = Vec::new();
        for a in 0..n {
            for off in 0..if self.k > 1 { n } else { 1 } {
                let q: Vec<Vec<f64>> = (0..self.k).map(|j| scaled(&lat[j][(a + j * off) % n], inv)).collect();
                starts.push(Self::flatten(&q));
            }
        }
        let mode = self.mode;
        let tol = 1e-9 * self.model.c_star.abs().max(1e-300) * self.epsilon;
        let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
        for s in starts {
            let eval = |x: &[f64]| {
                let grad = self.model_grad(x);
                Some(Point { x: x.to_vec(), value: self.model_value(x), crit: grad_norm(&grad), grad })
            };
            let Some(run) = steer(s, mode, eval, |x| self.model_hessian(x), |x| self.project(x), tol, 200) else {
                continue;
            };
            let p = run.best;
            let m = merit(mode, &p);
            let dup = found.iter().any(|(_, y)| {
                y.iter().zip(&p.x).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) < 1e-3 * inv
            });
            if !dup {
                found.push((m, p.x));
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        found.into_iter().take(self.opts.max_starts.max(1)).map(|(_, x)| x).collect()
    }
}

fn check_region_in_torus(region: &Region, k: usize, epsilon: f64, gs: &GroundState) -> Result<()> {
    let dim = gs.grid().dim();
    region.validate(k, dim)?;
    let l = gs.grid().half_width();
    for j in 0..k {
        let b = region.box_for(j);
        // keep one spike core (|q| ≤ L - 2) away from the wrap-around
        let worst = b.lo.iter().chain(&b.hi).fold(0.0f64, |m, v| m.max(v.abs())) / epsilon;
        if worst > l - 2.0 {
            return Err(Error::InvalidConfig(format!(
                "box {b:?} reaches |q| = {worst:.3}, beyond the torus margin L - 2 = {}",
                l - 2.0
            )));
        }
    }
    Ok(())
}

fn run_search(problem: &Problem<'_>) -> Result<SearchOutcome> {
    let opts = problem.opts;
    let seeds = problem.seeds();
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no admissible seed in the region".into()));
    }
    let mut history = Vec::new();
    let c_tol = std::cell::Cell::new(opts.c_tol);
    let mut best: Option<(Point, Evaluation)> = None;
    let mut reached = false;
    let mut starts_tried = 0;
    let grid = *problem.gs.grid();
    let ropts = opts.reduced;

    for (start, seed) in seeds.into_iter().enumerate() {
        starts_tried += 1;
        let last_eval: std::cell::RefCell<Option<Evaluation>> = std::cell::RefCell::new(None);
        let eval = |x: &[f64]| -> Option<Point> {
            let cfg = problem.config(problem.unflatten(x));
            if !config_valid(&cfg, &grid).valid {
                return None;
            }
            let ev = evaluate(problem.v, &cfg, problem.gs, &ropts, None).ok()?;
            let value = ev.value?;
            let g = grad_fd(problem.v, &cfg, problem.gs, &ropts, &ev.phi).ok()??;
            let crit = ev.c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            if c_tol.get().is_none() {
                let amin = ev.alpha.iter().flatten().fold(f64::INFINITY, |m, v| m.min(*v));
                c_tol.set(Some((1e-6 * problem.c_scale(amin)).max(1e-11)));
            }
            *last_eval.borrow_mut() = Some(ev);
            Some(Point { x: x.to_vec(), value, grad: g.into_iter().flatten().collect(), crit })
        };
        // the tolerance is fixed by the first evaluation at the seed
        let Some(first) = eval(&seed) else { continue };
        let tol = c_tol.get().unwrap_or(1e-11);
        let run = steer(
            first.x.clone(),
            problem.mode,
            eval,
            |x| problem.model_hessian(x),
            |x| problem.project(x),
            tol,
            opts.max_iter,
        );
        let Some(run) = run else { continue };
        for (iteration, (p, t)) in std::iter::once((first.clone(), 0.0)).chain(run.steps.iter().cloned()).enumerate() {
            history.push(SearchStep {
                start,
                iteration,
                xi: problem.unflatten(&scaled(&p.x, problem.epsilon)),
                i_value: p.value,
                max_abs_c: p.crit,
                grad_norm: grad_norm(&p.grad),
                step_length: t,
            });
        }
        let Some(ev) = last_eval.borrow_mut().take() else { continue };
        // the evaluation cache holds the last trial, recompute the accepted point
        let ev = if run.best.x == first.x && run.steps.is_empty() {
            ev
        } else {
            evaluate(problem.v, &problem.config(problem.unflatten(&run.best.x)), problem.gs, &ropts, None)?
        };
        let better = best.as_ref().is_none_or(|(p, _)| run.best.crit < p.crit);
        if better {
            best = Some((run.best.clone(), ev));
        }
        if run.reached {
            reached = true;
            break;
        }
    }
    let Some((point, _)) = best else {
        return Err(Error::NotConverged {
            iterations: starts_tried,
            detail: "the reduced energy could not be evaluated at any start".into(),
        });
    };
    let q = problem.unflatten(&point.x);
    let cfg = problem.config(q.clone());
    let xi = cfg.xi();
    let mut min_sep = f64::INFINITY;
    for i in 0..xi.len() {
        for j in i + 1..xi.len() {
            min_sep = min_sep.min(euclid(&xi[i], &xi[j]));
        }
    }
    let boundary_stuck = problem.floor.is_some_and(|f| min_sep <= f * (1.0 + 1e-6));
    Ok(SearchOutcome {
        v_at_spikes: problem.v_at(&q),
        q_star: cfg,
        mode: problem.mode,
        max_abs_c: point.crit,
        c_tol: c_tol.get().unwrap_or(f64::NAN),
        i_value: Some(point.value),
        converged: reached,
        history,
        starts_tried,
        separation_floor: problem.floor,
        min_separation_xi: min_sep,
        boundary_stuck,
    })
}

/// Multistart search for `q` with all `c_ij = 0`, steered by `mode`.
pub fn critical_point_search(
    v: &Potential,
    epsilon: f64,
    k: usize,
    region: &Region,
    mode: SearchMode,
    gs: &GroundState,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    if mode == SearchMode::ClusterMax {
        return cluster_search(v, epsilon, k, region, gs, opts);
    }
    validate_search(v, epsilon, k, gs)?;
    check_region_in_torus(region, k, epsilon, gs)?;
    let problem = Problem {
        v,
        gs,
        epsilon,
        k,
        dim: gs.grid().dim(),
        region,
        mode,
        model: AsymptoticModel::new(gs),
        floor: None,
        opts,
        r_min: opts.r_min,
    };
    run_search(&problem)
}

fn validate_search(v: &Potential, epsilon: f64, k: usize, gs: &GroundState) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("at least one spike is required".into()));
    }
    if v.dim() != gs.grid().dim() {
        return Err(Error::InvalidConfig(format!(
            "potential is {}-dimensional but the grid is {}-dimensional",
            v.dim(),
            gs.grid().dim()
        )));
    }
    Ok(())
}

/// Projected ascent of `I` with the spikes at least `ε^{1-s/4}` apart in `ξ`.
pub fn cluster_search(
    v: &Potential,
    epsilon: f64,
    k: usize,
    region: &Region,
    gs: &GroundState,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    validate_search(v, epsilon, k, gs)?;
    check_region_in_torus(region, k, epsilon, gs)?;
    let floor = epsilon.powf(1.0 - gs.params.s / 4.0);
    let problem = Problem {
        v,
        gs,
        epsilon,
        k,
        dim: gs.grid().dim(),
        region,
        mode: SearchMode::ClusterMax,
        model: AsymptoticModel::new(gs),
        floor: (k > 1).then_some(floor),
        opts,
        r_min: if k > 1 { floor / epsilon * (1.0 - 1e-9) } else { opts.r_min },
    };
    run_search(&problem)
}
