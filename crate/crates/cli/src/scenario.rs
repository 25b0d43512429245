//! JSON scenario files (schema version 1) and their validation.

use fracspike::{
    BoxRegion, CorrectionOptions, FracParams, Grid, Potential, PotentialSpec, ReducedOptions, Region, SearchMode,
    SearchOptions, SolverOptions,
};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GroundState,
    SolveKSpike,
    EpsilonSweep,
    AsymptoticsCheck,
    DegreeCheck,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub s: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Half-width `L` of the torus `[-L, L)^N`.
    pub half_width: f64,
    /// Points per axis `M`.
    pub points: usize,
}

/// Numerical knobs; every field has a default so scenarios list only what they change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Ground-state residual target.
    pub ground_state: f64,
    /// Largest `‖E‖_Y` for which the correction is attempted.
    pub eta: f64,
    /// `Y`-norm increment at which the correction stops.
    pub correction: f64,
    pub correction_max_iter: usize,
    /// Stopping threshold on `max |c_ij|`; derived from the region when absent.
    pub c_tol: Option<f64>,
    pub search_max_iter: usize,
    pub fd_step: f64,
    pub lattice: usize,
    pub max_starts: usize,
    pub delta: f64,
    pub r_min: f64,
    /// Weight exponent of the `Y` norm; the admissible midpoint when absent.
    pub mu: Option<f64>,
    pub newton: f64,
    pub newton_max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SearchOptions::default();
        let c = CorrectionOptions::default();
        let g = SolverOptions::default();
        Self {
            ground_state: g.tol,
            eta: c.eta,
            correction: c.tol,
            correction_max_iter: c.max_iter,
            c_tol: None,
            search_max_iter: s.max_iter,
            fd_step: s.reduced.fd_step,
            lattice: s.lattice,
            max_starts: s.max_starts,
            delta: s.delta,
            r_min: s.r_min,
            mu: None,
            newton: g.newton.tol,
            newton_max_steps: g.newton.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub params: ParamsSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    pub mode: Mode,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub region: Option<Region>,
    /// Spike centers in `ξ`, one configuration per start.
    #[serde(default)]
    pub seeds: Option<Vec<Vec<Vec<f64>>>>,
    /// Objective of `solve_k_spike`.
    #[serde(default)]
    pub search: Option<SearchMode>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn one() -> usize {
    1
}

/// A scenario whose parts have been checked against the library constraints.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub params: FracParams,
    pub grid: Grid,
    pub potential: Option<Potential>,
}

/// 1-based line and column of the first occurrence of `"key"` in `text`.
fn locate(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    text.lines().enumerate().find_map(|(i, l)| l.find(&needle).map(|c| (i + 1, c + 1)))
}

fn at(text: &str, key: &str, msg: impl std::fmt::Display) -> Failure {
    match locate(text, key) {
        Some((l, c)) => Failure::Config(format!("line {l}, column {c}: `{key}`: {msg}")),
        None => Failure::Config(format!("`{key}`: {msg}")),
    }
}

impl Scenario {
    /// Parses and validates a scenario; every error names a line when one applies.
    pub fn parse(text: &str) -> Result<Resolved, Failure> {
        let sc: Scenario = serde_json::from_str(text)
            .map_err(|e| {
                let msg = e.to_string();
                let msg = msg.rfind(" at line ").map_or(msg.as_str(), |i| &msg[..i]);
                Failure::Config(format!("line {}, column {}: {msg}", e.line(), e.column()))
            })?;
        sc.resolve(text)
    }

    pub fn load(path: &std::path::Path) -> Result<Resolved, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|f| match f {
            Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve(self, text: &str) -> Result<Resolved, Failure> {
        if self.schema != SCHEMA_VERSION {
            return Err(at(text, "schema", format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(at(text, "name", "must be non-empty and use only [A-Za-z0-9._-]"));
        }
        let grid = Grid::new(self.grid.dim, self.grid.half_width, self.grid.points).map_err(|e| at(text, "grid", e))?;
        let params = FracParams::new(self.params.s, self.params.p, grid.dim()).map_err(|e| at(text, "params", e))?;
        let potential = match &self.potential {
            Some(spec) => Some(Potential::new(spec.clone(), grid.dim()).map_err(|e| at(text, "potential", e))?),
            None => None,
        };
        let needs_potential = self.mode != Mode::GroundState;
        if needs_potential && potential.is_none() {
            return Err(at(text, "mode", format!("mode {:?} needs a `potential`", self.mode)));
        }
        let needs_eps = matches!(self.mode, Mode::SolveKSpike | Mode::EpsilonSweep | Mode::AsymptoticsCheck | Mode::Cluster);
        if needs_eps && self.epsilons.is_empty() {
            return Err(at(text, "mode", format!("mode {:?} needs a non-empty `epsilons` list", self.mode)));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(at(text, "epsilons", format!("{e} is not a positive number")));
        }
        if self.k == 0 {
            return Err(at(text, "k", "needs at least one spike"));
        }
        if self.mode == Mode::Cluster && self.k < 2 {
            return Err(at(text, "k", "the cluster mode needs k ≥ 2"));
        }
        let needs_region = matches!(self.mode, Mode::SolveKSpike | Mode::DegreeCheck | Mode::Cluster);
        match &self.region {
            None if needs_region => {
                return Err(at(text, "mode", format!("mode {:?} needs a `region`", self.mode)));
            }
            Some(r) => {
                let boxes: Vec<&BoxRegion> = match r {
                    Region::Shared { domain } => vec![domain],
                    Region::PerSpike { boxes } => {
                        if self.mode != Mode::DegreeCheck && boxes.len() != self.k {
                            return Err(at(text, "region", format!("{} boxes for k = {}", boxes.len(), self.k)));
                        }
                        boxes.iter().collect()
                    }
                };
                for b in boxes {
                    if b.dim() != grid.dim() || b.lo.iter().zip(&b.hi).any(|(a, c)| !(a < c)) {
                        return Err(at(text, "region", format!("box {b:?} is not a non-empty {}-box", grid.dim())));
                    }
                }
            }
            None => {}
        }
        if let Some(seeds) = &self.seeds {
            for cfg in seeds {
                if cfg.len() != self.k || cfg.iter().any(|x| x.len() != grid.dim()) {
                    return Err(at(text, "seeds", format!("each seed needs {} centers of dimension {}", self.k, grid.dim())));
                }
            }
        }
        if matches!(self.mode, Mode::EpsilonSweep | Mode::AsymptoticsCheck)
            && self.seeds.as_ref().is_none_or(|s| s.is_empty())
            && !(self.k == 1 && self.region.is_some())
        {
            return Err(at(text, "seeds", "needed unless k = 1 and a region gives the center"));
        }
        if self.mode == Mode::SolveKSpike && self.search == Some(SearchMode::ClusterMax) {
            return Err(at(text, "search", "use the cluster mode for cluster_max"));
        }
        let t = &self.tolerances;
        let positive = [
            ("ground_state", t.ground_state),
            ("eta", t.eta),
            ("correction", t.correction),
            ("fd_step", t.fd_step),
            ("delta", t.delta),
            ("newton", t.newton),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(at(text, k, format!("{v} must be positive")));
        }
        Ok(Resolved { scenario: self, params, grid, potential })
    }
}

impl Resolved {
    pub fn solver_options(&self) -> SolverOptions {
        let t = &self.scenario.tolerances;
        let mut o = SolverOptions { tol: t.ground_state, ..SolverOptions::default() };
        o.newton.tol = t.ground_state.min(o.newton.tol);
        o
    }

    pub fn reduced_options(&self) -> ReducedOptions {
        let t = &self.scenario.tolerances;
        let mut r = ReducedOptions::default();
        r.ansatz.mu = t.mu;
        r.correction.eta = t.eta;
        r.correction.tol = t.correction;
        r.correction.max_iter = t.correction_max_iter;
        r.fd_step = t.fd_step;
        r
    }

    pub fn search_options(&self) -> SearchOptions {
        let t = &self.scenario.tolerances;
        SearchOptions {
            c_tol: t.c_tol,
            max_iter: t.search_max_iter,
            seeds: self.scenario.seeds.clone().unwrap_or_default(),
            lattice: t.lattice,
            max_starts: t.max_starts,
            delta: t.delta,
            r_min: t.r_min,
            reduced: self.reduced_options(),
        }
    }

    /// The seed configurations in `ξ`, or the center of the region for one spike.
    pub fn centers_xi(&self) -> Vec<Vec<Vec<f64>>> {
        if let Some(s) = self.scenario.seeds.as_ref().filter(|s| !s.is_empty()) {
            return s.clone();
        }
        let b = self.scenario.region.as_ref().map(|r| r.box_for(0).clone());
        let b = b.unwrap_or_else(|| BoxRegion::cube(self.grid.dim(), 1.0));
        vec![vec![b.lo.iter().zip(&b.hi).map(|(a, c)| 0.5 * (a + c)).collect()]]
    }

    /// The whole scenario with defaults filled in, embedded in every report.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.scenario).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "schema": 1,
  "name": "gs",
  "params": {"s": 0.5, "p": 2.0},
  "grid": {"dim": 1, "half_width": 40.0, "points": 256},
  "mode": "ground_state"
}"#;

    #[test]
    fn minimal_scenario_fills_defaults() {
        let r = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(r.scenario.k, 1);
        assert_eq!(r.scenario.tolerances, Tolerances::default());
        assert_eq!(r.grid.points_per_axis(), 256);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = MINIMAL.replace("\"points\": 256", "\"points\": 255");
        let err = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        let typo = MINIMAL.replace("\"mode\"", "\"mdoe\"");
        let err = Scenario::parse(&typo).unwrap_err().to_string();
        assert!(err.contains("line 6"), "{err}");
        let old = MINIMAL.replace("\"schema\": 1", "\"schema\": 7");
        assert!(Scenario::parse(&old).unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn modes_check_their_inputs() {
        let sweep = MINIMAL.replace("\"ground_state\"", "\"epsilon_sweep\"");
        let err = Scenario::parse(&sweep).unwrap_err().to_string();
        assert!(err.contains("potential"), "{err}");
    }
}
