//! Second-difference convexity of `|b + 2z|^α` over a narrow double cone
//! around `b`.
//!
//! For `z` in `C = {|z| < η₁|b|, |z·b| ≥ (1 − η₂)|b||z|}` the inequality
//! `∫_C (|b+2z|^α + |b−2z|^α − 2|b|^α) K ≤ −2^{α−3} α(1−α) |b|^{α−2} ∫_C |z|² K`
//! holds for every `K ≥ 0` once `η₁, η₂` obey the selection rule below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// `K ≥ 0` sampled on the cone. `Piecewise` is constant on cells of the
/// cone's own polar coordinates: `radial_cells` equal shells in `|z|`,
/// `angular_cells` equal slices of the opening angle, and the two nappes
/// (`z·b > 0` first). Its values are indexed `[nappe][radial][angular]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConeKernel {
    Zero,
    Constant(f64),
    Piecewise {
        radial_cells: usize,
        angular_cells: usize,
        values: Vec<f64>,
    },
}

impl ConeKernel {
    fn value(&self, nappe: usize, rho_frac: f64, ang_frac: f64) -> f64 {
        match self {
            ConeKernel::Zero => 0.0,
            ConeKernel::Constant(c) => *c,
            ConeKernel::Piecewise {
                radial_cells,
                angular_cells,
                values,
            } => {
                let r = ((rho_frac * *radial_cells as f64) as usize).min(radial_cells - 1);
                let a = ((ang_frac * *angular_cells as f64) as usize).min(angular_cells - 1);
                values[(nappe * radial_cells + r) * angular_cells + a]
            }
        }
    }

    /// The kernel `z ↦ K(−z)`.
    pub fn reflected(&self) -> Self {
        match self {
            ConeKernel::Piecewise {
                radial_cells,
                angular_cells,
                values,
            } => {
                let half = radial_cells * angular_cells;
                let mut v = values[half..].to_vec();
                v.extend_from_slice(&values[..half]);
                ConeKernel::Piecewise {
                    radial_cells: *radial_cells,
                    angular_cells: *angular_cells,
                    values: v,
                }
            }
            other => other.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ConeKernel::Zero => true,
            ConeKernel::Constant(c) => *c >= 0.0 && c.is_finite(),
            ConeKernel::Piecewise {
                radial_cells,
                angular_cells,
                values,
            } => {
                *radial_cells > 0
                    && *angular_cells > 0
                    && values.len() == 2 * radial_cells * angular_cells
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("cone kernel must be finite, nonnegative and well shaped".into()))
        }
    }

    fn cells(&self) -> (usize, usize) {
        match self {
            ConeKernel::Piecewise {
                radial_cells,
                angular_cells,
                ..
            } => (*radial_cells, *angular_cells),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub lhs: f64,
    pub rhs: f64,
    /// Difference between the rule and a half-order rule, both sides.
    pub quadrature_error: f64,
    pub holds: bool,
}

/// `(α−2)(1−2η₁−η₂)² + (1+2η₁)² ≤ (α−1)/2`.
pub fn selection_rule(alpha: f64, eta1: f64, eta2: f64) -> bool {
    (alpha - 2.0) * (1.0 - 2.0 * eta1 - eta2).powi(2) + (1.0 + 2.0 * eta1).powi(2) <= 0.5 * (alpha - 1.0)
}

/// Largest `t < 1/4` with `η₁ = η₂ = t` admissible.
pub fn max_admissible_eta(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.25);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if selection_rule(alpha, mid, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn frame(b: &[f64]) -> Vec<Vec<f64>> {
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e0: Vec<f64> = b.iter().map(|v| v / nb).collect();
    let mut basis = vec![e0];
    for k in 0..b.len() {
        if basis.len() == b.len() {
            break;
        }
        let mut v = vec![0.0; b.len()];
        v[k] = 1.0;
        for e in &basis {
            let dot: f64 = v.iter().zip(e).map(|(a, c)| a * c).sum();
            for (x, y) in v.iter_mut().zip(e) {
                *x -= dot * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    basis
}

pub fn cone_convexity_check(alpha: f64, b: &[f64], kernel: &ConeKernel, eta1: f64, eta2: f64) -> Result<ConeReport> {
    let d = b.len();
    if !(1..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(nb > 0.0 && nb.is_finite()) {
        return Err(Error::InvalidInput("b must be a nonzero finite vector".into()));
    }
    if !(eta1 > 0.0 && eta1 < 0.25 && eta2 > 0.0 && eta2 < 0.25) || !selection_rule(alpha, eta1, eta2) {
        return Err(Error::InvalidInput(format!(
            "eta1 = {eta1}, eta2 = {eta2} violate the selection rule for alpha = {alpha}"
        )));
    }
    kernel.validate()?;
    let fine = integrate(alpha, b, nb, kernel, eta1, eta2, 8);
    let coarse = integrate(alpha, b, nb, kernel, eta1, eta2, 4);
    let quadrature_error = (fine.0 - coarse.0).abs() + (fine.1 - coarse.1).abs();
    let (lhs, rhs) = fine;
    let tol = 1e-6 * (lhs.abs() + rhs.abs());
    Ok(ConeReport {
        lhs,
        rhs,
        quadrature_error,
        holds: lhs <= rhs + tol,
    })
}

fn integrate(alpha: f64, b: &[f64], nb: f64, kernel: &ConeKernel, eta1: f64, eta2: f64, order: usize) -> (f64, f64) {
    let d = b.len();
    let rule = gauss_legendre(order);
    let basis = frame(b);
    let rho_max = eta1 * nb;
    let opening = (1.0 - eta2).acos();
    let (rc, ac) = kernel.cells();
    let r_panels = rc * (32 / rc).max(1);
    let a_panels = ac * (32 / ac).max(1);
    let coef = -(2f64).powf(alpha - 3.0) * alpha * (1.0 - alpha) * nb.powf(alpha - 2.0);
    let bb = nb.powf(alpha);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut z = vec![0.0; d];
    for nappe in 0..2 {
        let side = if nappe == 0 { 1.0 } else { -1.0 };
        for rp in 0..r_panels {
            let (r0, r1) = (rp as f64 / r_panels as f64, (rp + 1) as f64 / r_panels as f64);
            for &(xr, wr) in rule.iter() {
                let frac = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * xr;
                let rho = frac * rho_max;
                let w_rho = 0.5 * (r1 - r0) * rho_max * wr * rho.powi(d as i32 - 1);
                // angular part: list of (direction, weight, angular fraction)
                let mut dirs: Vec<(Vec<f64>, f64, f64)> = Vec::new();
                match d {
                    1 => dirs.push((vec![side * basis[0][0]], 1.0, 0.5)),
                    _ => {
                        let (lo, hi) = if d == 2 { (-opening, opening) } else { (0.0, opening) };
                        for ap in 0..a_panels {
                            let a0 = lo + (hi - lo) * ap as f64 / a_panels as f64;
                            let a1 = lo + (hi - lo) * (ap + 1) as f64 / a_panels as f64;
                            for &(xa, wa) in rule.iter() {
                                let psi = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * xa;
                                let wpsi = 0.5 * (a1 - a0) * wa;
                                let af = (psi - lo) / (hi - lo);
                                if d == 2 {
                                    let v: Vec<f64> = (0..2)
                                        .map(|i| side * (psi.cos() * basis[0][i] + psi.sin() * basis[1][i]))
                                        .collect();
                                    dirs.push((v, wpsi, af));
                                } else {
                                    let m = 32;
                                    for k in 0..m {
                                        let phi = (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / m as f64;
                                        let v: Vec<f64> = (0..3)
                                            .map(|i| {
                                                side * (psi.cos() * basis[0][i]
                                                    + psi.sin() * (phi.cos() * basis[1][i] + phi.sin() * basis[2][i]))
                                            })
                                            .collect();
                                        dirs.push((v, wpsi * psi.sin() * 2.0 * std::f64::consts::PI / m as f64, af));
                                    }
                                }
                            }
                        }
                    }
                }
                for (dir, wa, af) in dirs {
                    let k = kernel.value(nappe, frac, af);
                    if k == 0.0 {
                        continue;
                    }
                    for i in 0..d {
                        z[i] = rho * dir[i];
                    }
                    let plus = b.iter().zip(&z).map(|(x, y)| (x + 2.0 * y).powi(2)).sum::<f64>().sqrt();
                    let minus = b.iter().zip(&z).map(|(x, y)| (x - 2.0 * y).powi(2)).sum::<f64>().sqrt();
                    let second = plus.powf(alpha) + minus.powf(alpha) - 2.0 * bb;
                    lhs += w_rho * wa * second * k;
                    rhs += w_rho * wa * coef * rho * rho * k;
                }
            }
        }
    }
    (lhs, rhs)
}
