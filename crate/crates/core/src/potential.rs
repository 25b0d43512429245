//! Bounded potentials `V` with analytic gradients and Hessians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    /// Signed amplitude; negative values make wells.
    pub height: f64,
    pub width: f64,
}

/// Serializable description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Constant { value: f64 },
    /// `a - b / (1 + |x - c|^2)`, `0 < b < a`.
    Well {
        a: f64,
        b: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `a + Σ h_i exp(-|x - c_i|^2 / σ_i^2)`.
    GaussianBumps { a: f64, bumps: Vec<Bump> },
    /// 1D: `a + b (1 - x^2)^2 / (1 + x^4)`. 2D: the same profile in `x_1` plus
    /// `b x_2^2 / (1 + x_2^2)`, giving minima at `(±1, 0)` and a saddle at the origin.
    DoubleWell { a: f64, b: f64 },
    /// Multilinear interpolation of samples on a tensor grid, clamped outside it.
    UserTable { axes: Vec<Vec<f64>>, values: Vec<f64> },
}

/// A validated potential on `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    spec: PotentialSpec,
    dim: usize,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl Potential {
    pub fn new(spec: PotentialSpec, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{1, 2}}")));
        }
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match &spec {
            PotentialSpec::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return bad(format!("constant potential {value} must be positive"));
                }
            }
            PotentialSpec::Well { a, b, center } => {
                if !(0.0 < *b && b < a && a.is_finite()) {
                    return bad(format!("well needs 0 < b < a, got a = {a}, b = {b}"));
                }
                if center.as_ref().is_some_and(|c| c.len() != dim) {
                    return bad("well center has the wrong dimension".into());
                }
            }
            PotentialSpec::GaussianBumps { a, bumps } => {
                if !a.is_finite() {
                    return bad(format!("base level {a} must be finite"));
                }
                for b in bumps {
                    if b.center.len() != dim || !(b.width > 0.0) || !b.height.is_finite() {
                        return bad(format!("invalid bump {b:?}"));
                    }
                }
                let floor = a + bumps.iter().map(|b| b.height.min(0.0)).sum::<f64>();
                if !(floor > 0.0) {
                    return bad(format!("bumps can drive V down to {floor}; inf V must be positive"));
                }
            }
            PotentialSpec::DoubleWell { a, b } => {
                // (1 - t)^2 / (1 + t^2) ranges over [0, 2]
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return bad(format!("double well needs a, b > 0, got a = {a}, b = {b}"));
                }
            }
            PotentialSpec::UserTable { axes, values } => {
                if axes.len() != dim {
                    return bad(format!("table has {} axes for dimension {dim}", axes.len()));
                }
                for ax in axes {
                    if ax.len() < 2 || ax.windows(2).any(|w| !(w[1] > w[0])) {
                        return bad("table axes need at least two increasing nodes".into());
                    }
                }
                let n: usize = axes.iter().map(Vec::len).product();
                if values.len() != n {
                    return bad(format!("table has {} values, axes need {n}", values.len()));
                }
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return bad("table values must be positive and finite".into());
                }
            }
        }
        Ok(Self { spec, dim })
    }

    /// Named families with positional parameters:
    /// `constant [v]`, `well [a, b]`, `double_well [a, b]`,
    /// `gaussian_bumps [a, (height, width, c_1..c_N)*]`.
    pub fn builtin(name: &str, params: &[f64], dim: usize) -> Result<Self> {
        let need = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} takes {n} parameters, got {}", params.len())))
            }
        };
        let spec = match name {
            "constant" => {
                need(1)?;
                PotentialSpec::Constant { value: params[0] }
            }
            "well" => {
                need(2)?;
                PotentialSpec::Well { a: params[0], b: params[1], center: None }
            }
            "double_well" => {
                need(2)?;
                PotentialSpec::DoubleWell { a: params[0], b: params[1] }
            }
            "gaussian_bumps" => {
                let stride = 2 + dim;
                if params.is_empty() || (params.len() - 1) % stride != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian_bumps takes 1 + k·{stride} parameters, got {}",
                        params.len()
                    )));
                }
                let bumps = params[1..]
                    .chunks(stride)
                    .map(|c| Bump { height: c[0], width: c[1], center: c[2..].to_vec() })
                    .collect();
                PotentialSpec::GaussianBumps { a: params[0], bumps }
            }
            _ => return Err(Error::InvalidParameter(format!("unknown potential {name:?}"))),
        };
        Self::new(spec, dim)
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.spec {
            PotentialSpec::Constant { value } => *value,
            PotentialSpec::Well { a, b, center } => {
                let r2 = self.shifted_norm2(x, center.as_deref());
                a - b / (1.0 + r2)
            }
            PotentialSpec::GaussianBumps { a, bumps } => {
                a + bumps.iter().map(|bp| bp.height * bump_exp(bp, x)).sum::<f64>()
            }
            PotentialSpec::DoubleWell { a, b } => {
                let t = x[0] * x[0];
                let mut v = a + b * (1.0 - t).powi(2) / (1.0 + t * t);
                if self.dim == 2 {
                    let y2 = x[1] * x[1];
                    v += b * y2 / (1.0 + y2);
                }
                v
            }
            PotentialSpec::UserTable { axes, values } => table_eval(axes, values, x).0,
        }
    }

    pub fn grad(&self, x: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        match &self.spec {
            PotentialSpec::Constant { .. } => {}
            PotentialSpec::Well { b, center, .. } => {
                let r2 = self.shifted_norm2(x, center.as_deref());
                for i in 0..self.dim {
                    let d = x[i] - center.as_ref().map_or(0.0, |c| c[i]);
                    g[i] = 2.0 * b * d / (1.0 + r2).powi(2);
                }
            }
            PotentialSpec::GaussianBumps { bumps, .. } => {
                for bp in bumps {
                    let e = bp.height * bump_exp(bp, x);
                    for i in 0..self.dim {
                        g[i] += -2.0 * e * (x[i] - bp.center[i]) / (bp.width * bp.width);
                    }
                }
            }
            PotentialSpec::DoubleWell { b, .. } => {
                let t = x[0] * x[0];
                g[0] = b * dw_g1(t) * 2.0 * x[0];
                if self.dim == 2 {
                    g[1] = 2.0 * b * x[1] / (1.0 + x[1] * x[1]).powi(2);
                }
            }
            PotentialSpec::UserTable { axes, values } => {
                let (_, tg) = table_eval(axes, values, x);
                g[..self.dim].copy_from_slice(&tg[..self.dim]);
            }
        }
        g
    }

    /// Analytic Hessian; `None` for piecewise-linear tables.
    pub fn hess(&self, x: &[f64]) -> Option<[[f64; 2]; 2]> {
        let n = self.dim;
        let mut h = [[0.0; 2]; 2];
        match &self.spec {
            PotentialSpec::Constant { .. } => {}
            PotentialSpec::Well { b, center, .. } => {
                let r2 = self.shifted_norm2(x, center.as_deref());
                let d: Vec<f64> = (0..n).map(|i| x[i] - center.as_ref().map_or(0.0, |c| c[i])).collect();
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i][j] = 2.0 * b * delta / (1.0 + r2).powi(2)
                            - 8.0 * b * d[i] * d[j] / (1.0 + r2).powi(3);
                    }
                }
            }
            PotentialSpec::GaussianBumps { bumps, .. } => {
                for bp in bumps {
                    let e = bp.height * bump_exp(bp, x);
                    let s2 = bp.width * bp.width;
                    for i in 0..n {
                        for j in 0..n {
                            let di = x[i] - bp.center[i];
                            let dj = x[j] - bp.center[j];
                            let delta = if i == j { 1.0 } else { 0.0 };
                            h[i][j] += e * (4.0 * di * dj / (s2 * s2) - 2.0 * delta / s2);
                        }
                    }
                }
            }
            PotentialSpec::DoubleWell { b, .. } => {
                let t = x[0] * x[0];
                h[0][0] = b * (4.0 * t * dw_g2(t) + 2.0 * dw_g1(t));
                if n == 2 {
                    let y2 = x[1] * x[1];
                    h[1][1] = 2.0 * b * (1.0 - 3.0 * y2) / (1.0 + y2).powi(3);
                }
            }
            PotentialSpec::UserTable { .. } => return None,
        }
        Some(h)
    }

    fn shifted_norm2(&self, x: &[f64], center: Option<&[f64]>) -> f64 {
        match center {
            Some(c) => (0..self.dim).map(|i| (x[i] - c[i]).powi(2)).sum(),
            None => norm2(&x[..self.dim]),
        }
    }

    /// Samples `V(ε x)` on the grid and checks `inf V > 0` there.
    pub fn sample(&self, grid: &Grid, epsilon: f64) -> Result<Field> {
        if grid.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "potential is {}-dimensional, grid is {}-dimensional",
                self.dim,
                grid.dim()
            )));
        }
        let f = Field::from_fn(*grid, |x| {
            let y: Vec<f64> = x.iter().map(|v| epsilon * v).collect();
            self.eval(&y)
        });
        f.check_finite()?;
        let inf = f.min();
        if !(inf > 0.0) {
            return Err(Error::InvalidParameter(format!("inf V = {inf} on the grid must be positive")));
        }
        Ok(f)
    }
}

fn bump_exp(bp: &Bump, x: &[f64]) -> f64 {
    let r2: f64 = bp.center.iter().zip(x).map(|(c, v)| (v - c).powi(2)).sum();
    (-r2 / (bp.width * bp.width)).exp()
}

// g(t) = (1 - t)^2 / (1 + t^2), with g' and g''
fn dw_g1(t: f64) -> f64 {
    -2.0 * (1.0 - t * t) / (1.0 + t * t).powi(2)
}

fn dw_g2(t: f64) -> f64 {
    4.0 * t * (3.0 - t * t) / (1.0 + t * t).powi(3)
}

/// Multilinear interpolation and its (piecewise) gradient.
fn table_eval(axes: &[Vec<f64>], values: &[f64], x: &[f64]) -> (f64, [f64; 2]) {
    // cell index and local coordinate per axis, clamped to the table
    let locate = |ax: &[f64], v: f64| -> (usize, f64, f64, bool) {
        let n = ax.len();
        let inside = v >= ax[0] && v <= ax[n - 1];
        let v = v.clamp(ax[0], ax[n - 1]);
        let i = match ax.iter().position(|&a| a > v) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => n - 2,
        };
        let w = ax[i + 1] - ax[i];
        (i, (v - ax[i]) / w, w, inside)
    };
    match axes.len() {
        1 => {
            let (i, t, w, inside) = locate(&axes[0], x[0]);
            let (a, b) = (values[i], values[i + 1]);
            let g = if inside { (b - a) / w } else { 0.0 };
            (a + t * (b - a), [g, 0.0])
        }
        _ => {
            let ny = axes[1].len();
            let (i, t, wx, in_x) = locate(&axes[0], x[0]);
            let (j, u, wy, in_y) = locate(&axes[1], x[1]);
            let f = |a: usize, b: usize| values[a * ny + b];
            let (f00, f10, f01, f11) = (f(i, j), f(i + 1, j), f(i, j + 1), f(i + 1, j + 1));
            let v = (1.0 - t) * (1.0 - u) * f00 + t * (1.0 - u) * f10 + (1.0 - t) * u * f01 + t * u * f11;
            let gx = if in_x { ((1.0 - u) * (f10 - f00) + u * (f11 - f01)) / wx } else { 0.0 };
            let gy = if in_y { ((1.0 - t) * (f01 - f00) + t * (f11 - f10)) / wy } else { 0.0 };
            (v, [gx, gy])
        }
    }
}
