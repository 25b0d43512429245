//! Scenario execution: one function per mode, CSV tables plus a JSON report.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fracspike::{
    brouwer_degree, build_ansatz, cluster_search, critical_point_search, fit_rate, full_newton_solve,
    nonlinear_correction, reduced_energy, Field, GroundState, NewtonOptions, RateFit, Region, SearchMode,
    SearchOutcome, SpikeConfig,
};
use log::info;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cache::Cache;
use crate::failure::Failure;
use crate::scenario::{Mode, Resolved};
use crate::table::{Cell, Table};

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Parent of the per-scenario output directory.
    pub out: PathBuf,
    pub workers: usize,
    pub cache: Cache,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub cache_hit: Option<bool>,
}

/// What a mode produced before it finished or failed.
struct Outputs {
    tables: Vec<(&'static str, Table)>,
    extra: Vec<(String, Table)>,
    results: Value,
    failure: Option<String>,
}

impl Outputs {
    fn new() -> Self {
        Self { tables: Vec::new(), extra: Vec::new(), results: json!({}), failure: None }
    }
}

/// Runs `resolved`, writing into `<out>/<name>/`; solver failures still write what was computed.
pub fn run_scenario(resolved: &Resolved, opts: &RunOptions) -> Result<RunSummary> {
    let sc = &resolved.scenario;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .context("building the worker pool")?;
    let (gs, cache_hit) = if sc.mode == Mode::DegreeCheck {
        (None, None)
    } else {
        let (gs, hit) = opts
            .cache
            .ground_state(resolved.params, resolved.grid, resolved.solver_options())
            .map_err(|e| Failure::Solver(format!("ground state: {e}")))?;
        (Some(gs), Some(hit))
    };
    let out = pool.install(|| match sc.mode {
        Mode::GroundState => ground_state_mode(resolved, gs.as_ref().unwrap()),
        Mode::SolveKSpike => solve_mode(resolved, gs.as_ref().unwrap()),
        Mode::EpsilonSweep => sweep_mode(resolved, gs.as_ref().unwrap()),
        Mode::AsymptoticsCheck => asymptotics_mode(resolved, gs.as_ref().unwrap()),
        Mode::DegreeCheck => degree_mode(resolved),
        Mode::Cluster => cluster_mode(resolved, gs.as_ref().unwrap()),
    });

    let dir = opts.out.join(&sc.name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let mut write_table = |name: &str, t: &Table| -> Result<()> {
        let path = dir.join(name);
        t.write(&path).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
        Ok(())
    };
    for (name, t) in &out.tables {
        write_table(name, t)?;
    }
    for (name, t) in &out.extra {
        write_table(name, t)?;
    }
    let report = json!({
        "fracspike_version": env!("CARGO_PKG_VERSION"),
        "status": if out.failure.is_some() { "failed" } else { "ok" },
        "error": out.failure,
        "scenario": resolved.to_json(),
        "ground_state": gs.as_ref().map(ground_state_summary),
        "results": out.results,
    });
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    files.push(path);
    info!("wrote {} files to {}", files.len(), dir.display());
    if let Some(msg) = out.failure {
        return Err(Failure::Solver(msg).into());
    }
    Ok(RunSummary { dir, files, cache_hit })
}

fn ground_state_summary(gs: &GroundState) -> Value {
    json!({
        "lambda": gs.lambda,
        "energy_j": gs.energy_j,
        "residual_norm": gs.residual_norm,
        "petviashvili_iterations": gs.petviashvili_iterations,
        "newton_steps": gs.newton_steps,
        "max": gs.profile.max(),
        "decay_fit": gs.decay,
    })
}

fn coord_names(dim: usize, prefix: &str) -> Vec<String> {
    let axes = ["x", "y"];
    (0..dim).map(|j| if prefix.is_empty() { axes[j].to_string() } else { format!("{prefix}_{}", j + 1) }).collect()
}

fn profile_table(u: &Field, closed_form: Option<&dyn Fn(&[f64]) -> f64>) -> Table {
    let grid = *u.grid();
    let mut header = coord_names(grid.dim(), "");
    header.push("u".into());
    if closed_form.is_some() {
        header.push("closed_form".into());
    }
    let mut t = Table::new(&header);
    for (i, &val) in u.values().iter().enumerate() {
        let x = grid.point(i);
        let mut row: Vec<Cell> = x[..grid.dim()].iter().map(|v| (*v).into()).collect();
        row.push(val.into());
        if let Some(f) = closed_form {
            row.push(f(&x[..grid.dim()]).into());
        }
        t.push(row);
    }
    t
}

fn ground_state_mode(r: &Resolved, gs: &GroundState) -> Outputs {
    let mut out = Outputs::new();
    let is_half_laplacian = r.params.s == 0.5 && r.params.p == 2.0 && r.grid.dim() == 1;
    let exact = |x: &[f64]| 2.0 / (1.0 + x[0] * x[0]);
    let cf: Option<&dyn Fn(&[f64]) -> f64> = if is_half_laplacian { Some(&exact) } else { None };
    let profile = gs.reported_profile();
    let mut results = json!({ "decay_fit": gs.decay });
    if is_half_laplacian {
        let err = profile.values().iter().enumerate().fold(0.0f64, |m, (i, w)| {
            m.max((w - exact(&r.grid.point(i)[..1])).abs())
        });
        results["closed_form_relative_error"] = json!(err / 2.0);
    }
    out.tables.push(("profile.csv", profile_table(&profile, cf)));
    out.results = results;
    out
}

fn par_epsilons<T: Send>(eps: &[f64], f: impl Fn(f64) -> fracspike::Result<T> + Sync) -> Vec<fracspike::Result<T>> {
    eps.par_iter().map(|&e| f(e)).collect()
}

fn q_from_xi(xi: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    xi.iter().map(|x| x.iter().map(|v| v / eps).collect()).collect()
}

fn rate(pairs: &[(f64, f64)]) -> Option<RateFit> {
    let mut p = pairs.to_vec();
    p.sort_by(|a, b| b.0.total_cmp(&a.0));
    fit_rate(&p).ok()
}

fn history_table(dim: usize, k: usize) -> Table {
    let mut h: Vec<String> = vec!["epsilon".into(), "start".into(), "iteration".into()];
    for j in 0..k {
        h.extend(coord_names(dim, &format!("xi{}", j + 1)));
    }
    h.extend(["i_value", "max_abs_c", "grad_norm", "step_length"].map(String::from));
    Table::new(&h)
}

fn push_history(t: &mut Table, eps: f64, o: &SearchOutcome) {
    for s in &o.history {
        let mut row: Vec<Cell> = vec![eps.into(), s.start.into(), s.iteration.into()];
        row.extend(s.xi.iter().flatten().map(|v| Cell::from(*v)));
        row.extend([s.i_value, s.max_abs_c, s.grad_norm, s.step_length].map(Cell::from));
        t.push(row);
    }
}

fn spikes_table(dim: usize) -> Table {
    let mut h: Vec<String> = vec!["epsilon".into(), "spike".into()];
    h.extend(coord_names(dim, "xi"));
    h.extend(coord_names(dim, "q"));
    h.extend(["v_at_spike", "max_abs_c", "c_tol", "i_value", "converged"].map(String::from));
    Table::new(&h)
}

fn push_spikes(t: &mut Table, eps: f64, o: &SearchOutcome) {
    let xi = o.q_star.xi();
    for (j, (x, q)) in xi.iter().zip(&o.q_star.centers).enumerate() {
        let mut row: Vec<Cell> = vec![eps.into(), j.into()];
        row.extend(x.iter().map(|v| Cell::from(*v)));
        row.extend(q.iter().map(|v| Cell::from(*v)));
        row.extend([o.v_at_spikes[j], o.max_abs_c, o.c_tol, o.i_value.unwrap_or(f64::NAN)].map(Cell::from));
        row.push(o.converged.into());
        t.push(row);
    }
}

fn search_json(o: &SearchOutcome) -> Value {
    json!({
        "xi": o.q_star.xi(),
        "q": o.q_star.centers,
        "max_abs_c": o.max_abs_c,
        "c_tol": o.c_tol,
        "v_at_spikes": o.v_at_spikes,
        "i_value": o.i_value,
        "converged": o.converged,
        "starts_tried": o.starts_tried,
        "separation_floor": o.separation_floor,
        "min_separation_xi": o.min_separation_xi,
        "boundary_stuck": o.boundary_stuck,
    })
}

fn solve_mode(r: &Resolved, gs: &GroundState) -> Outputs {
    let sc = &r.scenario;
    let v = r.potential.as_ref().unwrap();
    let region = sc.region.as_ref().unwrap();
    let mode = sc.search.unwrap_or(SearchMode::DegreeZeroOfGradV);
    let sopts = r.search_options();
    let t = &sc.tolerances;
    let nopts = NewtonOptions { tol: t.newton, max_steps: t.newton_max_steps, ..NewtonOptions::default() };
    let results = par_epsilons(&sc.epsilons, |eps| {
        let o = critical_point_search(v, eps, sc.k, region, mode, gs, &sopts)?;
        let b = build_ansatz(v, &o.q_star, gs, sopts.reduced.ansatz)?;
        let corr = nonlinear_correction(&b, sopts.reduced.correction)?;
        let seed = b.w.axpy(1.0, &corr.phi);
        let nr = full_newton_solve(v, eps, &seed, nopts, r.params.s, r.params.p)?;
        let dist = nr.u.axpy(-1.0, &seed).norm_inf() / seed.norm_inf();
        Ok((o, nr, dist))
    });
    let mut out = Outputs::new();
    let (mut spikes, mut history) = (spikes_table(r.grid.dim()), history_table(r.grid.dim(), sc.k));
    let mut rows = Vec::new();
    for (i, (&eps, res)) in sc.epsilons.iter().zip(results).enumerate() {
        match res {
            Ok((o, nr, dist)) => {
                push_spikes(&mut spikes, eps, &o);
                push_history(&mut history, eps, &o);
                out.extra.push((format!("solution_{i}.csv"), profile_table(&nr.u, None)));
                let mut j = search_json(&o);
                j["epsilon"] = json!(eps);
                j["newton"] = json!({
                    "converged": nr.converged,
                    "iterations": nr.iterations,
                    "residual_norm": nr.residual_norm,
                    "spike_centers_detected": nr.spike_centers_detected,
                    "relative_distance_to_seed": dist,
                });
                rows.push(j);
                if !o.converged || !nr.converged {
                    out.failure = Some(format!(
                        "ε = {eps}: search converged {}, Newton converged {}",
                        o.converged, nr.converged
                    ));
                    break;
                }
            }
            Err(e) => {
                out.failure = Some(format!("ε = {eps}: {e}"));
                break;
            }
        }
    }
    out.tables.push(("spikes.csv", spikes));
    out.tables.push(("search_history.csv", history));
    out.results = json!({ "search_mode": mode, "epsilons": rows });
    out
}

fn sweep_mode(r: &Resolved, gs: &GroundState) -> Outputs {
    let sc = &r.scenario;
    let v = r.potential.as_ref().unwrap();
    let xi = r.centers_xi().remove(0);
    let ropts = r.reduced_options();
    let t = &sc.tolerances;
    let results = par_epsilons(&sc.epsilons, |eps| {
        let cfg = SpikeConfig::new(q_from_xi(&xi, eps), eps, t.delta, t.r_min);
        let b = build_ansatz(v, &cfg, gs, ropts.ansatz)?;
        let corr = nonlinear_correction(&b, ropts.correction)?;
        Ok(corr)
    });
    let mut out = Outputs::new();
    let mut rates = Table::new(&[
        "epsilon",
        "e_norm_y",
        "phi_norm_y",
        "phi_over_e",
        "max_contraction_ratio",
        "iterations",
        "max_abs_c",
        "converged",
    ]);
    let mut contraction = Table::new(&["epsilon", "step", "increment", "ratio", "max_abs_c"]);
    let (mut e_pairs, mut phi_pairs) = (Vec::new(), Vec::new());
    for (&eps, res) in sc.epsilons.iter().zip(results) {
        match res {
            Ok(c) => {
                let worst = c.contraction_history.iter().fold(0.0f64, |m, v| m.max(*v));
                rates.push(vec![
                    eps.into(),
                    c.e_norm_y.into(),
                    c.norm_y.into(),
                    (c.norm_y / c.e_norm_y).into(),
                    worst.into(),
                    c.iterations.into(),
                    c.max_abs_c().into(),
                    c.converged.into(),
                ]);
                for h in &c.history {
                    contraction.push(vec![eps.into(), h.step.into(), h.increment.into(), h.ratio.into(), h.max_abs_c.into()]);
                }
                e_pairs.push((eps, c.e_norm_y));
                phi_pairs.push((eps, c.norm_y));
                if !c.converged || c.diverged {
                    out.failure = Some(format!("ε = {eps}: correction did not converge"));
                    break;
                }
            }
            Err(e) => {
                out.failure = Some(format!("ε = {eps}: {e}"));
                break;
            }
        }
    }
    out.tables.push(("rates.csv", rates));
    out.tables.push(("contraction.csv", contraction));
    out.results = json!({
        "xi": xi,
        "e_norm_y_rate": rate(&e_pairs),
        "phi_norm_y_rate": rate(&phi_pairs),
    });
    out
}

fn asymptotics_mode(r: &Resolved, gs: &GroundState) -> Outputs {
    let sc = &r.scenario;
    let v = r.potential.as_ref().unwrap();
    let xi = r.centers_xi().remove(0);
    let ropts = r.reduced_options();
    let t = &sc.tolerances;
    let results = par_epsilons(&sc.epsilons, |eps| {
        let cfg = SpikeConfig::new(q_from_xi(&xi, eps), eps, t.delta, t.r_min);
        reduced_energy(v, &cfg, gs, ropts)
    });
    let mut out = Outputs::new();
    let mut table = Table::new(&[
        "epsilon",
        "i_value",
        "asymptotic_value",
        "asymptotic_gap",
        "max_abs_c",
        "grad_norm",
        "multiplier_gradient_mismatch",
        "e_norm_y",
        "phi_norm_y",
    ]);
    let mut gap_pairs = Vec::new();
    let mut reports = Vec::new();
    for (&eps, res) in sc.epsilons.iter().zip(results) {
        match res {
            Ok(rep) => {
                let g: Vec<f64> = rep.grad_fd.iter().flatten().copied().collect();
                let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                // ∇_q I ≈ -α c
                let ac: Vec<f64> =
                    rep.alpha.iter().flatten().zip(rep.c_matrix.iter().flatten()).map(|(a, c)| -a * c).collect();
                let diff = g.iter().zip(&ac).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let gap = rep.asymptotic_gap.unwrap_or(f64::NAN);
                table.push(vec![
                    eps.into(),
                    rep.i_value.unwrap_or(f64::NAN).into(),
                    rep.asymptotic_value.unwrap_or(f64::NAN).into(),
                    gap.into(),
                    rep.max_abs_c().into(),
                    gn.into(),
                    (diff / gn.max(f64::MIN_POSITIVE)).into(),
                    rep.e_norm_y.into(),
                    rep.phi_norm_y.into(),
                ]);
                if gap.is_finite() {
                    gap_pairs.push((eps, gap));
                }
                reports.push(json!({
                    "epsilon": eps,
                    "theta": rep.theta,
                    "c_star": rep.c_star,
                    "interaction_constants": rep.interaction_constants,
                }));
                if rep.diverged {
                    out.failure = Some(format!("ε = {eps}: the correction diverged"));
                    break;
                }
            }
            Err(e) => {
                out.failure = Some(format!("ε = {eps}: {e}"));
                break;
            }
        }
    }
    out.tables.push(("asymptotics.csv", table));
    out.results = json!({ "xi": xi, "gap_rate": rate(&gap_pairs), "constants": reports });
    out
}

fn degree_mode(r: &Resolved) -> Outputs {
    let v = r.potential.as_ref().unwrap();
    let boxes = match r.scenario.region.as_ref().unwrap() {
        Region::Shared { domain } => vec![domain.clone()],
        Region::PerSpike { boxes } => boxes.clone(),
    };
    let dim = r.grid.dim();
    let mut h: Vec<String> = vec!["box".into()];
    h.extend(coord_names(dim, "lo"));
    h.extend(coord_names(dim, "hi"));
    h.push("degree".into());
    let mut t = Table::new(&h);
    let mut out = Outputs::new();
    let mut degrees = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        match brouwer_degree(v, b) {
            Ok(d) => {
                let mut row: Vec<Cell> = vec![i.into()];
                row.extend(b.lo.iter().chain(&b.hi).map(|x| Cell::from(*x)));
                row.push(d.into());
                t.push(row);
                degrees.push(d);
            }
            Err(e) => {
                out.failure = Some(format!("box {i}: {e}"));
                break;
            }
        }
    }
    out.tables.push(("degree.csv", t));
    out.results = json!({ "degrees": degrees, "total": degrees.iter().sum::<i32>() });
    out
}

fn cluster_mode(r: &Resolved, gs: &GroundState) -> Outputs {
    let sc = &r.scenario;
    let v = r.potential.as_ref().unwrap();
    let region = sc.region.as_ref().unwrap();
    let sopts = r.search_options();
    let results = par_epsilons(&sc.epsilons, |eps| cluster_search(v, eps, sc.k, region, gs, &sopts));
    let mut out = Outputs::new();
    let (mut spikes, mut history) = (spikes_table(r.grid.dim()), history_table(r.grid.dim(), sc.k));
    let mut rows = Vec::new();
    for (&eps, res) in sc.epsilons.iter().zip(results) {
        match res {
            Ok(o) => {
                push_spikes(&mut spikes, eps, &o);
                push_history(&mut history, eps, &o);
                let mut j = search_json(&o);
                j["epsilon"] = json!(eps);
                j["interior"] = json!(o.converged && !o.boundary_stuck);
                rows.push(j);
            }
            Err(e) => {
                out.failure = Some(format!("ε = {eps}: {e}"));
                break;
            }
        }
    }
    out.tables.push(("spikes.csv", spikes));
    out.tables.push(("search_history.csv", history));
    out.results = json!({ "epsilons": rows });
    out
}

/// Default cache directory when neither `--cache` nor `FRACSPIKE_CACHE` is given.
pub fn default_cache_dir(out: &Path) -> PathBuf {
    out.join("cache")
}
