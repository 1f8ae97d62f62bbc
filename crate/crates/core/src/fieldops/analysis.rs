//! Norms, Hölder seminorms, maximal and sharp functions, oscillations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridFunction, GridSpec};
use crate::error::{Error, Result};
use crate::kernel::RadialJumpKernel;

/// `(Σ |u|^p h^d)^{1/p}`; `p = ∞` gives `max |u|`.
pub fn lp_norm(u: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(u.max_abs());
    }
    let s: f64 = u.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * u.grid.cell_volume()).powf(1.0 / p))
}

/// Weight `w_R(x) = 1 / (1/j(R) + 1/J(x/2))`, equal to `j(R)` at `x = 0`.
pub fn weight_r(kernel: &RadialJumpKernel, r_big: f64, x: &[f64]) -> f64 {
    let jr = kernel.j(r_big);
    let half = 0.5 * x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if half == 0.0 {
        return jr;
    }
    let jx = kernel.j(half);
    if jx == 0.0 {
        return 0.0;
    }
    1.0 / (1.0 / jr + 1.0 / jx)
}

/// `Σ |u(x)| w_R(x) h^d`.
pub fn weighted_l1_norm(u: &GridFunction, r_big: f64, kernel: &RadialJumpKernel) -> Result<f64> {
    if !(r_big > 0.0) {
        return Err(Error::InvalidInput(format!("R must be positive, got {r_big}")));
    }
    let g = u.grid;
    let s: f64 = u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs() * weight_r(kernel, r_big, &g.point(i)))
        .sum();
    Ok(s * g.cell_volume())
}

/// A closed ball in the fundamental domain (not wrapped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn centered(d: usize, radius: f64) -> Self {
        Self::new(vec![0.0; d], radius)
    }

    fn dist(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Lattice points inside the ball.
    pub fn points(&self, grid: &GridSpec) -> Vec<usize> {
        (0..grid.len())
            .filter(|&i| self.dist(&grid.point(i)) <= self.radius * (1.0 + 1e-12))
            .collect()
    }

    fn check(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        if self.center.len() != grid.d {
            return Err(Error::InvalidInput("ball center has wrong dimension".into()));
        }
        let pts = self.points(grid);
        if pts.is_empty() {
            return Err(Error::InvalidInput(format!("no lattice points in {self:?}")));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub value: f64,
    /// `false` when pairs were sampled; the value is then a lower bound.
    pub exhaustive: bool,
    pub pairs: usize,
}

const EXHAUSTIVE_PAIRS: usize = 2_000_000;
const SAMPLED_PAIRS: usize = 100_000;

/// `max |u(x) − u(y)| / |x − y|^α` over lattice pairs in the ball.
pub fn holder_seminorm(u: &GridFunction, alpha: f64, ball: &Ball, seed: u64) -> Result<HolderEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let g = u.grid;
    let idx = ball.check(&g)?;
    let pts: Vec<Vec<f64>> = idx.iter().map(|&i| g.point(i)).collect();
    let m = idx.len();
    let ratio = |a: usize, b: usize| {
        let dist = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        (u.values[idx[a]] - u.values[idx[b]]).abs() / dist.powf(alpha)
    };
    if m * (m - 1) / 2 <= EXHAUSTIVE_PAIRS {
        let mut best: f64 = 0.0;
        for a in 0..m {
            for b in a + 1..m {
                best = best.max(ratio(a, b));
            }
        }
        return Ok(HolderEstimate {
            value: best,
            exhaustive: true,
            pairs: m * (m.saturating_sub(1)) / 2,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..SAMPLED_PAIRS {
        let a = rng.gen_range(0..m);
        let b = rng.gen_range(0..m);
        if a != b {
            best = best.max(ratio(a, b));
        }
    }
    // nearest neighbours along each axis
    let mut pairs = SAMPLED_PAIRS;
    let pos: std::collections::HashMap<usize, usize> = idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    for (a, &i) in idx.iter().enumerate() {
        let mi = g.multi_index(i);
        for ax in 0..g.d {
            if mi[ax] + 1 < g.n {
                let mut mj = mi;
                mj[ax] += 1;
                if let Some(&b) = pos.get(&g.flat_index(&mj)) {
                    best = best.max(ratio(a, b));
                    pairs += 1;
                }
            }
        }
    }
    Ok(HolderEstimate {
        value: best,
        exhaustive: false,
        pairs,
    })
}

/// Radii swept by the maximal and sharp functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusSweep {
    /// `h, 2h, 4h, …, B/2`.
    Dyadic,
    /// `h, 2h, 3h, …, B/2`.
    Lattice,
}

impl RadiusSweep {
    pub fn radii(self, grid: &GridSpec) -> Vec<f64> {
        let h = grid.h();
        let top = 0.5 * grid.box_len;
        match self {
            RadiusSweep::Dyadic => std::iter::successors(Some(h), |r| Some(2.0 * r))
                .take_while(|&r| r <= top * (1.0 + 1e-12))
                .collect(),
            RadiusSweep::Lattice => (1..=grid.n / 2).map(|m| m as f64 * h).collect(),
        }
    }
}

/// Lattice points sorted by distance from `x`.
fn by_distance(grid: &GridSpec, x: &[f64]) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i)
        })
        .collect();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v
}

/// `sup_r` of the average of `|g|` over `B_r(x)`, over the swept radii.
pub fn maximal_function(g: &GridFunction, x: &[f64], sweep: RadiusSweep) -> f64 {
    let sorted = by_distance(&g.grid, x);
    let mut best: f64 = 0.0;
    let mut sum = 0.0;
    let mut k = 0;
    for r in sweep.radii(&g.grid) {
        while k < sorted.len() && sorted[k].0 <= r * (1.0 + 1e-12) {
            sum += g.values[sorted[k].1].abs();
            k += 1;
        }
        if k > 0 {
            best = best.max(sum / k as f64);
        }
    }
    best
}

/// `sup_r` of the average of `|g − (g)_{B_r(x)}|` over `B_r(x)`.
pub fn sharp_function(g: &GridFunction, x: &[f64], sweep: RadiusSweep) -> f64 {
    let sorted = by_distance(&g.grid, x);
    let mut best: f64 = 0.0;
    let mut k = 0;
    let mut sum = 0.0;
    for r in sweep.radii(&g.grid) {
        while k < sorted.len() && sorted[k].0 <= r * (1.0 + 1e-12) {
            sum += g.values[sorted[k].1];
            k += 1;
        }
        if k == 0 {
            continue;
        }
        let mean = sum / k as f64;
        let dev: f64 = sorted[..k].iter().map(|&(_, i)| (g.values[i] - mean).abs()).sum::<f64>() / k as f64;
        best = best.max(dev);
    }
    best
}

/// Average of `|g − (g)_B|` over the ball.
pub fn mean_oscillation(g: &GridFunction, ball: &Ball) -> Result<f64> {
    let pts = ball.check(&g.grid)?;
    let n = pts.len() as f64;
    let mean = pts.iter().map(|&i| g.values[i]).sum::<f64>() / n;
    Ok(pts.iter().map(|&i| (g.values[i] - mean).abs()).sum::<f64>() / n)
}

/// `max − min` over the ball.
pub fn osc(g: &GridFunction, ball: &Ball) -> Result<f64> {
    let pts = ball.check(&g.grid)?;
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        (lo.min(g.values[i]), hi.max(g.values[i]))
    });
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::stable_kernel;
    use crate::quad::{radial_integral, QuadConfig};
    use std::f64::consts::PI;

    #[test]
    fn lp_norm_basics() {
        let g = GridSpec::new(1, 64, 2.0 * PI).unwrap();
        let s = GridFunction::from_fn(g, |x| x[0].sin());
        assert!((lp_norm(&s, 2.0).unwrap() - PI.sqrt()).abs() < 1e-10);
        let c = GridFunction::from_fn(g, |_| -3.0);
        let vol = 2.0 * PI;
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert!((lp_norm(&c, p).unwrap() - 3.0 * vol.powf(1.0 / p)).abs() < 1e-10);
            let twice = s.map(|v| 2.0 * v);
            assert!((lp_norm(&twice, p).unwrap() - 2.0 * lp_norm(&s, p).unwrap()).abs() < 1e-12);
        }
        assert_eq!(lp_norm(&c, f64::INFINITY).unwrap(), 3.0);
        assert!(lp_norm(&c, 0.5).is_err());
    }

    #[test]
    fn weighted_norm_against_quadrature() {
        let k = stable_kernel(1, 0.5).unwrap();
        let g = GridSpec::new(1, 1 << 14, 8.0).unwrap();
        let u = GridFunction::from_fn(g, |x| if x[0].abs() <= 2.0 { 1.0 } else { 0.0 });
        let got = weighted_l1_norm(&u, 1.0, &k).unwrap();
        let cfg = QuadConfig::default();
        let want = 2.0 * radial_integral(|x| weight_r(&k, 1.0, &[x]), 0.0, 2.0, &cfg).unwrap().value;
        assert!((got / want - 1.0).abs() < 2e-3, "{got} vs {want}");
        assert!(got <= k.j(1.0) * lp_norm(&u, 1.0).unwrap());
        assert_eq!(weighted_l1_norm(&GridFunction::zeros(g), 1.0, &k).unwrap(), 0.0);
    }

    #[test]
    fn holder_of_linear_function() {
        let g = GridSpec::new(1, 256, 8.0).unwrap();
        let u = GridFunction::from_fn(g, |x| x[0]);
        let ball = Ball::centered(1, 1.0);
        let alpha = 0.4;
        let v = holder_seminorm(&u, alpha, &ball, 0).unwrap();
        assert!(v.exhaustive);
        assert!((v.value - 2f64.powf(1.0 - alpha)).abs() < 1e-12);
        let c = GridFunction::from_fn(g, |_| 2.0);
        assert_eq!(holder_seminorm(&c, alpha, &ball, 0).unwrap().value, 0.0);
        let small = holder_seminorm(&u, alpha, &Ball::centered(1, 0.5), 0).unwrap();
        assert!(small.value <= v.value);
    }

    #[test]
    fn maximal_function_of_indicator() {
        let g = GridSpec::new(1, 512, 16.0).unwrap();
        let ind = GridFunction::from_fn(g, |x| if x[0].abs() <= 1.0 { 1.0 } else { 0.0 });
        assert!((maximal_function(&ind, &[0.0], RadiusSweep::Dyadic) - 1.0).abs() < 1e-12);
        let m2 = maximal_function(&ind, &[2.0], RadiusSweep::Lattice);
        assert!((m2 - 1.0 / 3.0).abs() < 1e-2, "{m2}");
        let c = GridFunction::from_fn(g, |_| 5.0);
        assert!(sharp_function(&c, &[0.3], RadiusSweep::Lattice) < 1e-12);
    }

    #[test]
    fn oscillations() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let ball = Ball::new(vec![0.0625], 1.0);
        let pm = GridFunction::from_fn(g, |x| if x[0] < 0.0625 { -1.0 } else { 1.0 });
        // the ball holds 33 points: 16 below the center, 17 at or above
        let mo = mean_oscillation(&pm, &ball).unwrap();
        assert!((mo - 1.0).abs() < 2e-3, "{mo}");
        assert_eq!(osc(&pm, &ball).unwrap(), 2.0);
        let c = GridFunction::from_fn(g, |_| 1.0);
        assert_eq!(mean_oscillation(&c, &ball).unwrap(), 0.0);
        assert_eq!(osc(&c, &ball).unwrap(), 0.0);
        assert!(osc(&c, &Ball::new(vec![0.01], 0.001)).is_err());
    }
}
