//! Brouwer degree of `∇V` on a box, for `N ≤ 2`.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::reduced::BoxRegion;

const MAX_BISECTIONS: usize = 40;

fn hessian_norm(v: &Potential, x: &[f64]) -> f64 {
    let h = v.hess(x).unwrap_or_else(|| {
        // tabulated potentials: one-sided differences of the gradient
        let step = 1e-6;
        let g0 = v.grad(x);
        let mut h = [[0.0; 2]; 2];
        for j in 0..x.len() {
            let mut y = x.to_vec();
            y[j] += step;
            let g = v.grad(&y);
            for i in 0..x.len() {
                h[i][j] = (g[i] - g0[i]) / step;
            }
        }
        h
    });
    h.iter().flatten().map(|a| a * a).sum::<f64>().sqrt()
}

fn grad_norm(v: &Potential, x: &[f64]) -> f64 {
    let g = v.grad(x);
    g[..x.len()].iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `deg(∇V, box, 0)`; fails with [`Error::DegreeUndefined`] when `∇V` may vanish on the boundary.
pub fn brouwer_degree(v: &Potential, region: &BoxRegion) -> Result<i32> {
    let dim = v.dim();
    if region.dim() != dim {
        return Err(Error::InvalidConfig(format!(
            "box is {}-dimensional, potential is {dim}-dimensional",
            region.dim()
        )));
    }
    if region.lo.iter().zip(&region.hi).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidConfig(format!("empty box {region:?}")));
    }
    match dim {
        1 => degree_1d(v, region.lo[0], region.hi[0]),
        2 => degree_2d(v, region),
        _ => Err(Error::InvalidParameter(format!("degree is only implemented for N ≤ 2, got {dim}"))),
    }
}

fn degree_1d(v: &Potential, a: f64, b: f64) -> Result<i32> {
    let (ga, gb) = (v.grad(&[a])[0], v.grad(&[b])[0]);
    let scale = ga.abs().max(gb.abs()).max(1.0);
    if ga.abs() <= 1e-12 * scale || gb.abs() <= 1e-12 * scale {
        return Err(Error::DegreeUndefined(format!("V' vanishes at an endpoint of [{a}, {b}]")));
    }
    Ok(((gb.signum() - ga.signum()) / 2.0) as i32)
}

/// Counter-clockwise boundary sampled with `n` points per edge.
fn boundary(region: &BoxRegion, n: usize) -> Vec<[f64; 2]> {
    let (x0, y0, x1, y1) = (region.lo[0], region.lo[1], region.hi[0], region.hi[1]);
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    let mut pts = Vec::with_capacity(4 * n);
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        for i in 0..n {
            let t = i as f64 / n as f64;
            pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    pts
}

fn angle_at(v: &Potential, x: &[f64; 2]) -> f64 {
    let g = v.grad(x);
    g[1].atan2(g[0])
}

fn wrap_angle(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d < -PI {
        d += 2.0 * PI;
    }
    d
}

/// Winding increment from `a` to `b`, bisected until every piece turns by less than π/4.
fn increment(v: &Potential, a: [f64; 2], b: [f64; 2], depth: usize) -> Result<f64> {
    let d = wrap_angle(angle_at(v, &b) - angle_at(v, &a));
    if d.abs() < FRAC_PI_4 {
        return Ok(d);
    }
    if depth >= MAX_BISECTIONS {
        return Err(Error::DegreeUndefined(format!(
            "∇V turns too fast between {a:?} and {b:?} (likely a boundary zero)"
        )));
    }
    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    if grad_norm(v, &m) == 0.0 {
        return Err(Error::DegreeUndefined(format!("∇V vanishes at {m:?} on the boundary")));
    }
    Ok(increment(v, a, m, depth + 1)? + increment(v, m, b, depth + 1)?)
}

fn degree_2d(v: &Potential, region: &BoxRegion) -> Result<i32> {
    let perimeter = 2.0 * ((region.hi[0] - region.lo[0]) + (region.hi[1] - region.lo[1]));
    // refine the boundary sampling until |∇V| provably stays away from zero between samples
    let mut n = 64;
    let pts = loop {
        let pts = boundary(region, n);
        let spacing = perimeter / (4 * n) as f64;
        let gmin = pts.iter().map(|x| grad_norm(v, x)).fold(f64::INFINITY, f64::min);
        let hmax = pts.iter().map(|x| hessian_norm(v, x)).fold(0.0, f64::max);
        if gmin >= 10.0 * hmax * spacing {
            break pts;
        }
        if n >= 1 << 16 {
            return Err(Error::DegreeUndefined(format!(
                "min |∇V| = {gmin:e} on the boundary is below the sampling bound {:e}",
                10.0 * hmax * spacing
            )));
        }
        n *= 2;
    };
    let mut total = 0.0;
    for i in 0..pts.len() {
        total += increment(v, pts[i], pts[(i + 1) % pts.len()], 0)?;
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_and_empty_boxes() {
        for dim in [1, 2] {
            let v = Potential::builtin("well", &[2.0, 1.0], dim).unwrap();
            assert_eq!(brouwer_degree(&v, &BoxRegion::cube(dim, 1.0)).unwrap(), 1);
            let mut lo = vec![0.5; dim];
            lo[0] = 1.5;
            let hi: Vec<f64> = lo.iter().map(|x| x + 0.7).collect();
            assert_eq!(brouwer_degree(&v, &BoxRegion::new(lo, hi)).unwrap(), 0);
        }
        let bump = Potential::builtin("gaussian_bumps", &[1.0, 1.0, 0.5, 0.0, 0.0], 2).unwrap();
        assert_eq!(brouwer_degree(&bump, &BoxRegion::cube(2, 1.0)).unwrap(), 1);
    }

    #[test]
    fn boundary_zero_is_rejected() {
        let v = Potential::builtin("well", &[2.0, 1.0], 2).unwrap();
        let b = BoxRegion::new(vec![0.0, -1.0], vec![1.0, 1.0]);
        assert!(matches!(brouwer_degree(&v, &b), Err(Error::DegreeUndefined(_))));
        let v1 = Potential::builtin("well", &[2.0, 1.0], 1).unwrap();
        assert!(brouwer_degree(&v1, &BoxRegion::new(vec![0.0], vec![1.0])).is_err());
    }
}
