//! Bernstein functions of the subordinate-Brownian-motion catalog and the
//! jump densities they generate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};

/// Catalog of Bernstein functions `φ` with `φ(0+) = 0`.
///
/// `Power` is `λ^α`; the six remaining families are the comparability
/// catalog: sums of powers, `(λ + λ^α)^β`, `λ^α log(1+λ)^{±β}`,
/// `log(cosh √λ)^α` and `(log sinh √λ − log √λ)^α`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BernsteinFunction {
    Power { alpha: f64 },
    SumOfPowers { alphas: Vec<f64> },
    MixedPower { alpha: f64, beta: f64 },
    LogPositive { alpha: f64, beta: f64 },
    LogNegative { alpha: f64, beta: f64 },
    LogCosh { alpha: f64 },
    LogSinhRatio { alpha: f64 },
    /// A user-supplied φ with no known subordinator density. It can be
    /// evaluated but cannot generate a jump kernel.
    #[serde(skip)]
    Custom(CustomBernstein),
}

#[derive(Clone)]
pub struct CustomBernstein {
    pub name: String,
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for BernsteinFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Custom(c) => write!(f, "Custom({})", c.name),
            other => write!(f, "{}", serde_json::to_string(other).unwrap_or_default()),
        }
    }
}

impl PartialEq for BernsteinFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Custom(a), Self::Custom(b)) => a.name == b.name,
            (Self::Custom(_), _) | (_, Self::Custom(_)) => false,
            (a, b) => serde_json::to_value(a).ok() == serde_json::to_value(b).ok(),
        }
    }
}

/// How the subordinator's Lévy measure `μ(dt)` is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityRoute {
    /// `μ(dt) = ρ(t) dt` in closed form.
    Closed,
    /// `φ` is complete Bernstein: `ρ(t) = π⁻¹ ∫ e^{−ts} Im φ(−s + i0) ds`.
    Stieltjes,
    None,
}

fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

impl BernsteinFunction {
    pub fn custom(name: &str, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(CustomBernstein {
            name: name.to_string(),
            eval: Arc::new(eval),
        })
    }

    /// Catalog identifier.
    pub fn id(&self) -> &str {
        match self {
            Self::Power { .. } => "power",
            Self::SumOfPowers { .. } => "sum_of_powers",
            Self::MixedPower { .. } => "mixed_power",
            Self::LogPositive { .. } => "log_positive",
            Self::LogNegative { .. } => "log_negative",
            Self::LogCosh { .. } => "log_cosh",
            Self::LogSinhRatio { .. } => "log_sinh_ratio",
            Self::Custom(c) => &c.name,
        }
    }

    /// Checks the parameter ranges for which each family is a Bernstein
    /// function satisfying the two-sided scaling conditions.
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Power { alpha } => in_open(*alpha, 0.0, 1.0),
            Self::SumOfPowers { alphas } => {
                !alphas.is_empty() && alphas.iter().all(|&a| in_open(a, 0.0, 1.0))
            }
            Self::MixedPower { alpha, beta } => in_open(*alpha, 0.0, 1.0) && in_open(*beta, 0.0, 1.0),
            Self::LogPositive { alpha, beta } => {
                in_open(*alpha, 0.0, 1.0) && in_open(*beta, 0.0, 1.0 - alpha)
            }
            Self::LogNegative { alpha, beta } => in_open(*alpha, 0.0, 1.0) && in_open(*beta, 0.0, *alpha),
            Self::LogCosh { alpha } | Self::LogSinhRatio { alpha } => in_open(*alpha, 0.0, 1.0),
            Self::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("parameters out of range for {self:?}")))
        }
    }

    /// `φ(λ)` for `λ > 0`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let l = lambda;
        match self {
            Self::Power { alpha } => l.powf(*alpha),
            Self::SumOfPowers { alphas } => alphas.iter().map(|a| l.powf(*a)).sum(),
            Self::MixedPower { alpha, beta } => (l + l.powf(*alpha)).powf(*beta),
            Self::LogPositive { alpha, beta } => l.powf(*alpha) * l.ln_1p().powf(*beta),
            Self::LogNegative { alpha, beta } => l.powf(*alpha) * l.ln_1p().powf(-*beta),
            Self::LogCosh { alpha } => log_cosh(l.sqrt()).powf(*alpha),
            Self::LogSinhRatio { alpha } => log_sinh_ratio(l.sqrt()).powf(*alpha),
            Self::Custom(c) => (c.eval)(l),
        }
    }

    /// Order of the generated jump kernel: `σ = 2 × (growth index of φ at ∞)`.
    pub fn kernel_sigma(&self) -> Option<f64> {
        match self {
            Self::Power { alpha } => Some(2.0 * alpha),
            Self::SumOfPowers { alphas } => alphas.iter().cloned().reduce(f64::max).map(|a| 2.0 * a),
            Self::MixedPower { beta, .. } => Some(2.0 * beta),
            Self::LogPositive { alpha, .. } | Self::LogNegative { alpha, .. } => Some(2.0 * alpha),
            Self::LogCosh { alpha } | Self::LogSinhRatio { alpha } => Some(*alpha),
            Self::Custom(_) => None,
        }
    }

    /// Scaling exponents `(δ₁, δ₂)` at infinity and `(δ₃, δ₄)` at zero, when
    /// they are exact.
    pub fn scaling_exponents(&self) -> Option<[f64; 4]> {
        match self {
            Self::Power { alpha } => Some([*alpha; 4]),
            Self::SumOfPowers { alphas } => {
                let lo = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = alphas.iter().cloned().fold(0.0, f64::max);
                Some([hi, hi, lo, lo])
            }
            Self::MixedPower { alpha, beta } => Some([*beta, *beta, alpha * beta, alpha * beta]),
            Self::LogCosh { alpha } | Self::LogSinhRatio { alpha } => {
                Some([alpha / 2.0, alpha / 2.0, *alpha, *alpha])
            }
            _ => None,
        }
    }

    pub fn density_route(&self) -> DensityRoute {
        match self {
            Self::Power { .. } | Self::SumOfPowers { .. } => DensityRoute::Closed,
            Self::Custom(_) => DensityRoute::None,
            _ => DensityRoute::Stieltjes,
        }
    }

    /// Closed-form subordinator density `ρ(t)`.
    pub fn closed_density(&self, t: f64) -> Option<f64> {
        let stable = |a: f64| a * t.powf(-1.0 - a) / gamma(1.0 - a);
        match self {
            Self::Power { alpha } => Some(stable(*alpha)),
            Self::SumOfPowers { alphas } => Some(alphas.iter().map(|&a| stable(a)).sum()),
            _ => None,
        }
    }

    /// `Im φ(−q² + i0)`, the boundary value on the negative axis.
    pub fn boundary_imag(&self, q: f64) -> f64 {
        let s = q * q;
        if s == 0.0 {
            return 0.0;
        }
        let zpow = |a: f64| Complex64::from_polar(s.powf(a), PI * a);
        // log(1 + z) at z = −s + i0. Nodes within an ulp of the integrable
        // singularity at s = 1 would otherwise hit log 0.
        let log1p_neg = || {
            if s < 1.0 {
                Complex64::from_polar(-(-s).ln_1p().max(f64::EPSILON.ln()), PI)
            } else {
                Complex64::new((s - 1.0).max(f64::EPSILON).ln(), PI)
            }
        };
        let powc = |z: Complex64, p: f64| {
            let (r, th) = z.to_polar();
            Complex64::from_polar(r.powf(p), th * p)
        };
        match self {
            Self::Power { alpha } => s.powf(*alpha) * (PI * alpha).sin(),
            Self::SumOfPowers { alphas } => alphas.iter().map(|&a| s.powf(a) * (PI * a).sin()).sum(),
            Self::MixedPower { alpha, beta } => powc(Complex64::new(-s, 0.0) + zpow(*alpha), *beta).im,
            Self::LogPositive { alpha, beta } => (zpow(*alpha) * powc(log1p_neg(), *beta)).im,
            Self::LogNegative { alpha, beta } => (zpow(*alpha) * powc(log1p_neg(), -*beta)).im,
            Self::LogCosh { alpha } => {
                // log cosh √z = Σ_n log(1 + z / ((n − ½)π)²)
                let crossings = (q / PI + 0.5).floor();
                let re = q.cos().abs().ln();
                powc(log_boundary(re, crossings), *alpha).im
            }
            Self::LogSinhRatio { alpha } => {
                // log(sinh √z / √z) = Σ_n log(1 + z / (nπ)²)
                let crossings = (q / PI).floor();
                let re = if q < 1e-4 { -s / 6.0 } else { (q.sin() / q).abs().ln() };
                powc(log_boundary(re, crossings), *alpha).im
            }
            Self::Custom(_) => f64::NAN,
        }
    }

    /// Points in `q` where `Im φ(−q²)` has integrable singularities.
    fn boundary_singularities(&self, q_max: f64) -> Vec<f64> {
        match self {
            Self::LogPositive { .. } | Self::LogNegative { .. } => vec![1.0],
            Self::LogCosh { .. } => (1..)
                .map(|n| (n as f64 - 0.5) * PI)
                .take_while(|&q| q < q_max)
                .collect(),
            Self::LogSinhRatio { .. } => (1..).map(|n| n as f64 * PI).take_while(|&q| q < q_max).collect(),
            _ => Vec::new(),
        }
    }

    /// Jump density `j(r)` of the subordinate Brownian motion in dimension
    /// `d`, evaluated directly (no tabulation).
    pub fn jump_density(&self, d: usize, r: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        match self.density_route() {
            DensityRoute::Closed => {
                // j(r) = ∫ (4πt)^{-d/2} e^{-r²/(4t)} ρ(t) dt
                let dh = d as f64 / 2.0;
                let g = |t: f64| {
                    let heat = (4.0 * PI * t).powf(-dh) * (-r * r / (4.0 * t)).exp();
                    heat * self.closed_density(t).unwrap_or(0.0)
                };
                let e = quad::radial_integral_anchored(g, 0.0, f64::INFINITY, r * r / 4.0, cfg)?;
                Ok(e.value)
            }
            DensityRoute::Stieltjes => self.stieltjes_density(d, r, cfg),
            DensityRoute::None => Err(Error::Unsupported(format!(
                "no subordinator density available for Bernstein function `{}`",
                self.id()
            ))),
        }
    }

    /// `j(r) = π⁻¹ ∫₀^∞ Im φ(−q²) · 2q · G_d(r, q²) dq` with `G_d(r, s)` the
    /// Green function of `s − Δ`: the t-integral of the heat kernel against
    /// the Stieltjes form of `ρ`, done in closed form.
    fn stieltjes_density(&self, d: usize, r: f64, cfg: &QuadConfig) -> Result<f64> {
        let weight = |q: f64| -> f64 {
            match d {
                1 => (-r * q).exp(),
                2 => 2.0 * q * bessel_k0(r * q) / (2.0 * PI),
                _ => 2.0 * q * (-r * q).exp() / (4.0 * PI * r),
            }
        };
        let g = |q: f64| self.boundary_imag(q) * weight(q);
        let q_max = 60.0 / r;
        let sing = self.boundary_singularities(q_max);
        let mut total = 0.0;
        if sing.is_empty() {
            total += quad::radial_integral_anchored(g, 0.0, f64::INFINITY, 1.0 / r, cfg)?.value;
        } else {
            let first = sing[0];
            total += singular_ends(&g, 0.0, first, false, true, cfg)?;
            for w in sing.windows(2) {
                total += singular_ends(&g, w[0], w[1], true, true, cfg)?;
            }
            let last = *sing.last().unwrap();
            let next = if sing.len() > 1 { last + (last - sing[sing.len() - 2]) } else { 2.0 * last };
            if next < q_max || sing.len() == 1 {
                total += singular_ends(&g, last, next, true, false, cfg)?;
                total += quad::radial_integral_anchored(g, next, f64::INFINITY, next, cfg)?.value;
            } else {
                total += singular_ends(&g, last, q_max, true, false, cfg)?;
            }
        }
        Ok(total / PI)
    }
}

/// Principal `log`-branch value `re + iπ·crossings`, taking a negative real
/// part with no crossings to sit on the upper side of the cut.
fn log_boundary(re: f64, crossings: f64) -> Complex64 {
    if crossings == 0.0 {
        Complex64::from_polar(-re, PI)
    } else {
        Complex64::new(re, PI * crossings)
    }
}

/// `∫_a^b g` with integrable (log-type) singularities at the flagged ends,
/// handled by walking decades of distance from the end.
fn singular_ends(
    g: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    sing_a: bool,
    sing_b: bool,
    cfg: &QuadConfig,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let coarse = QuadConfig {
        gl_order: 8,
        panels_per_decade: 2,
        ..*cfg
    };
    let left = if sing_a || a == 0.0 {
        quad::radial_integral(|u| g(a + u), 0.0, half, &coarse)?.value
    } else {
        quad::gl_integrate(&quad::gauss_legendre(cfg.gl_order), a, mid, g)
    };
    let right = if sing_b {
        quad::radial_integral(|u| g(b - u), 0.0, half, &coarse)?.value
    } else {
        quad::gl_integrate(&quad::gauss_legendre(cfg.gl_order), mid, b, g)
    };
    Ok(left + right)
}

fn log_cosh(x: f64) -> f64 {
    if x > 20.0 {
        x + (-2.0 * x).exp().ln_1p() - 2f64.ln()
    } else {
        x.cosh().ln()
    }
}

fn log_sinh_ratio(x: f64) -> f64 {
    if x < 1e-3 {
        let x2 = x * x;
        (x2 / 6.0 + x2 * x2 / 120.0).ln_1p()
    } else if x > 20.0 {
        x + (-(-2.0 * x).exp()).ln_1p() - 2f64.ln() - x.ln()
    } else {
        (x.sinh() / x).ln()
    }
}

/// Modified Bessel function `K₀(x)`, `x > 0` (polynomial approximations,
/// absolute error below 1e-7).
pub fn bessel_k0(x: f64) -> f64 {
    if x <= 2.0 {
        let t = x / 3.75;
        let t2 = t * t;
        let i0 = 1.0
            + t2 * (3.5156229
                + t2 * (3.0899424 + t2 * (1.2067492 + t2 * (0.2659732 + t2 * (0.0360768 + t2 * 0.0045813)))));
        let y = x * x / 4.0;
        -(x / 2.0).ln() * i0
            + (-0.57721566
                + y * (0.42278420
                    + y * (0.23069756 + y * (0.03488590 + y * (0.00262698 + y * (0.00010750 + y * 0.0000074))))))
    } else if x > 700.0 {
        0.0
    } else {
        let y = 2.0 / x;
        (-x).exp() / x.sqrt()
            * (1.25331414
                + y * (-0.07832358
                    + y * (0.02189568 + y * (-0.01062446 + y * (0.00587872 + y * (-0.00251540 + y * 0.00053208))))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<BernsteinFunction> {
        vec![
            BernsteinFunction::Power { alpha: 0.5 },
            BernsteinFunction::SumOfPowers { alphas: vec![0.3, 0.7] },
            BernsteinFunction::MixedPower { alpha: 0.5, beta: 0.6 },
            BernsteinFunction::LogPositive { alpha: 0.5, beta: 0.3 },
            BernsteinFunction::LogNegative { alpha: 0.6, beta: 0.3 },
            BernsteinFunction::LogCosh { alpha: 0.7 },
            BernsteinFunction::LogSinhRatio { alpha: 0.7 },
        ]
    }

    #[test]
    fn catalog_is_positive_increasing_concave() {
        for phi in catalog() {
            phi.validate().unwrap();
            let xs: Vec<f64> = (-40..=40).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
            for w in xs.windows(2) {
                let (a, b) = (phi.eval(w[0]), phi.eval(w[1]));
                assert!(a > 0.0 && b >= a, "{phi:?} not increasing at {}", w[0]);
            }
            // midpoint concavity on linear triples
            for k in 1..200 {
                let x = k as f64 * 0.37;
                let h = 0.2 * x;
                let mid = phi.eval(x);
                let avg = 0.5 * (phi.eval(x - h) + phi.eval(x + h));
                assert!(avg <= mid * (1.0 + 1e-12), "{phi:?} not concave at {x}");
            }
        }
    }

    #[test]
    fn out_of_range_parameters_rejected() {
        assert!(BernsteinFunction::Power { alpha: 1.2 }.validate().is_err());
        assert!(BernsteinFunction::LogPositive { alpha: 0.6, beta: 0.5 }.validate().is_err());
        assert!(BernsteinFunction::LogNegative { alpha: 0.3, beta: 0.4 }.validate().is_err());
    }

    #[test]
    fn boundary_values_match_limits_from_above() {
        // Im φ(−s + iε) for a small ε against the boundary formula.
        let eps = 1e-9;
        let direct = |phi: &BernsteinFunction, q: f64| -> f64 {
            let z = Complex64::new(-q * q, eps);
            let p = |w: Complex64, e: f64| w.powf(e);
            match phi {
                BernsteinFunction::MixedPower { alpha, beta } => p(z + p(z, *alpha), *beta).im,
                BernsteinFunction::LogPositive { alpha, beta } => (p(z, *alpha) * p((z + 1.0).ln(), *beta)).im,
                BernsteinFunction::LogNegative { alpha, beta } => (p(z, *alpha) * p((z + 1.0).ln(), -*beta)).im,
                _ => unreachable!(),
            }
        };
        for phi in &catalog()[2..5] {
            for &q in &[0.3, 0.9, 1.4, 3.0, 20.0] {
                let a = phi.boundary_imag(q);
                let b = direct(phi, q);
                assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{phi:?} q={q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn stieltjes_route_reproduces_closed_density() {
        // φ = λ^α is complete Bernstein, so both routes apply.
        let cfg = QuadConfig::default();
        for &alpha in &[0.3, 0.5, 0.8] {
            let phi = BernsteinFunction::Power { alpha };
            for d in 1..=3 {
                for &r in &[0.01, 0.3, 1.0, 7.0] {
                    let closed = phi.jump_density(d, r, &cfg).unwrap();
                    let st = phi.stieltjes_density(d, r, &cfg).unwrap();
                    let tol = if d == 2 { 1e-5 } else { 1e-8 };
                    assert!((closed / st - 1.0).abs() < tol, "α={alpha} d={d} r={r}: {closed} vs {st}");
                }
            }
        }
    }

    #[test]
    fn closed_density_matches_gamma_formula() {
        // ∫ (4πt)^{-d/2} e^{-r²/4t} α t^{-1-α}/Γ(1-α) dt
        //   = α Γ(d/2+α) / (Γ(1-α) (4π)^{d/2}) (r²/4)^{-d/2-α}
        let cfg = QuadConfig::default();
        for &alpha in &[0.25, 0.5, 0.9] {
            for d in 1..=3 {
                let dh = d as f64 / 2.0;
                for &r in &[1e-6f64, 1e-2, 1.0, 1e3] {
                    let want = alpha * gamma(dh + alpha) / (gamma(1.0 - alpha) * (4.0 * PI).powf(dh))
                        * (r * r / 4.0).powf(-dh - alpha);
                    let got = BernsteinFunction::Power { alpha }.jump_density(d, r, &cfg).unwrap();
                    assert!((got / want - 1.0).abs() < 1e-9, "α={alpha} d={d} r={r}");
                }
            }
        }
    }

    #[test]
    fn k0_spot_values() {
        // K0(0.5) = 0.9244190712, K0(1) = 0.4210244382, K0(3) = 0.0347395044
        for (x, v) in [(0.5, 0.924_419_071_2), (1.0, 0.421_024_438_2), (3.0, 0.034_739_504_4)] {
            assert!((bessel_k0(x) - v).abs() < 2e-7);
        }
    }
}
