//! Quadrature building blocks shared by the kernel, symbol, hypothesis and
//! operator modules.
//!
//! Everything here integrates functions of a single radius `r > 0`. Integrands
//! in this crate are power-law-like at `0` and `∞` (jump kernels), so the
//! workhorse is a composite Gauss-Legendre rule on logarithmic panels with an
//! analytic power-law remainder at the truncation points. Oscillatory tails
//! `∫ w(r) e^{ipr} dr` are summed over half periods and accelerated with the
//! Wynn epsilon algorithm.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution knobs for every radial quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss-Legendre order used on each panel.
    pub gl_order: usize,
    /// Logarithmic panels per decade of radius.
    pub panels_per_decade: usize,
    /// Points of the angular rule on the circle (d = 2).
    pub circle_points: usize,
    /// Relative tolerance a quadrature's own error estimate must meet.
    pub rel_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            gl_order: 16,
            panels_per_decade: 8,
            circle_points: 256,
            rel_tol: 1e-8,
        }
    }
}

impl QuadConfig {
    /// Same rule with doubled radial and angular resolution.
    pub fn refined(&self) -> Self {
        Self {
            gl_order: self.gl_order * 2,
            panels_per_decade: self.panels_per_decade * 2,
            circle_points: self.circle_points * 2,
            rel_tol: self.rel_tol,
        }
    }
}

/// A quadrature value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        *self = *self + rhs;
    }
}

type Rule = Arc<Vec<(f64, f64)>>;

/// Gauss-Legendre nodes/weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(order: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| {
            let n = NonZeroUsize::new(order.max(1)).unwrap();
            Arc::new(GaussLegendre::new(n).as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Plain Gauss-Legendre on `[a, b]`.
pub fn gl_integrate(rule: &[(f64, f64)], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Gauss-Legendre on `[a, b]` with an embedded half-order error estimate.
pub fn gl_estimate(
    rule: &[(f64, f64)],
    coarse: &[(f64, f64)],
    a: f64,
    b: f64,
    f: &mut dyn FnMut(f64) -> f64,
) -> Estimate {
    let fine = gl_integrate(rule, a, b, &mut *f);
    let rough = gl_integrate(coarse, a, b, &mut *f);
    Estimate {
        value: fine,
        error: (fine - rough).abs(),
    }
}

/// Local log-log slope `d ln|g| / d ln r` by a symmetric difference.
pub fn log_slope(g: &impl Fn(f64) -> f64, r: f64) -> Option<f64> {
    let q = 1.05_f64;
    let lo = g(r / q).abs();
    let hi = g(r * q).abs();
    if lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite() {
        Some((hi / lo).ln() / (2.0 * q.ln()))
    } else {
        None
    }
}

/// Maximum number of decades walked toward `0` or `∞` before the analytic
/// power-law remainder takes over.
const MAX_DECADES: usize = 60;
const STOP_RATIO: f64 = 1e-15;

/// `∫_lo^hi g(r) dr` for `0 ≤ lo < hi ≤ ∞` with `g` power-law-like near the
/// open ends. Finite interior pieces use logarithmic panels; an end at `0` or
/// `∞` is walked decade by decade and closed by the exact integral of the
/// local power law, which must be integrable there.
pub fn radial_integral(
    g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    radial_integral_anchored(g, lo, hi, 1.0, cfg)
}

/// As [`radial_integral`], with the walk over `(0, ∞)` starting at `anchor`
/// (place it near the bulk of the integrand).
pub fn radial_integral_anchored(
    g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    anchor: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    if !(lo >= 0.0 && hi > lo) {
        return if hi == lo {
            Ok(Estimate::default())
        } else {
            Err(Error::InvalidInput(format!("bad radial interval [{lo}, {hi}]")))
        };
    }
    let rule = gauss_legendre(cfg.gl_order);
    let coarse = gauss_legendre((cfg.gl_order / 2).max(2));
    let mut h = |s: f64| {
        let r = s.exp();
        g(r) * r
    };
    let step = std::f64::consts::LN_10 / cfg.panels_per_decade as f64;
    let decade = |a: f64, b: f64, h: &mut dyn FnMut(f64) -> f64| -> Estimate {
        // a, b are log-radii
        let panels = (((b - a) / step).ceil() as usize).max(1);
        let width = (b - a) / panels as f64;
        let mut acc = Estimate::default();
        for k in 0..panels {
            let s0 = a + k as f64 * width;
            acc += gl_estimate(&rule, &coarse, s0, s0 + width, &mut *h);
        }
        acc
    };

    // Anchor for the walk: the finite end(s), or r = 1.
    let (a0, b0) = match (lo > 0.0, hi.is_finite()) {
        (true, true) => (lo.ln(), hi.ln()),
        (true, false) => (lo.ln(), lo.ln()),
        (false, true) => (hi.ln(), hi.ln()),
        (false, false) => (anchor.ln(), anchor.ln()),
    };
    let mut total = if b0 > a0 { decade(a0, b0, &mut h) } else { Estimate::default() };

    let ln10 = std::f64::consts::LN_10;
    if lo == 0.0 {
        let mut s = a0;
        for _ in 0..MAX_DECADES {
            let piece = decade(s - ln10, s, &mut h);
            total += piece;
            s -= ln10;
            if total.value != 0.0 && piece.value.abs() <= STOP_RATIO * total.value.abs() {
                break;
            }
            if s < -690.0 {
                break;
            }
        }
        total += power_remainder(&g, s.exp(), true)?;
    }
    if hi.is_infinite() {
        let mut s = b0;
        for _ in 0..MAX_DECADES {
            let piece = decade(s, s + ln10, &mut h);
            total += piece;
            s += ln10;
            if total.value != 0.0 && piece.value.abs() <= STOP_RATIO * total.value.abs() {
                break;
            }
            if s > 690.0 {
                break;
            }
        }
        total += power_remainder(&g, s.exp(), false)?;
    }
    Ok(total)
}

/// Exact integral of the local power law of `g` over `(0, r]` (toward zero)
/// or `[r, ∞)`.
fn power_remainder(g: &impl Fn(f64) -> f64, r: f64, toward_zero: bool) -> Result<Estimate> {
    let g0 = g(r);
    if g0 == 0.0 || !g0.is_finite() {
        return if g0 == 0.0 {
            Ok(Estimate::default())
        } else {
            Err(Error::Divergent(format!("integrand not finite at r = {r:e}")))
        };
    }
    let slope = match log_slope(g, r) {
        Some(s) => s,
        None => return Ok(Estimate::default()),
    };
    let value = if toward_zero {
        if slope <= -1.0 {
            return Err(Error::Divergent(format!(
                "integrand ~ r^{slope:.3} is not integrable at 0"
            )));
        }
        g0 * r / (slope + 1.0)
    } else {
        if slope >= -1.0 {
            return Err(Error::Divergent(format!(
                "integrand ~ r^{slope:.3} is not integrable at infinity"
            )));
        }
        -g0 * r / (slope + 1.0)
    };
    Ok(Estimate {
        value,
        error: 1e-3 * value.abs(),
    })
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
pub fn wynn_epsilon(sums: &[f64]) -> f64 {
    let n = sums.len();
    if n < 3 {
        return *sums.last().unwrap_or(&0.0);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sums.to_vec();
    let mut best = sums[n - 1];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            let base = prev.get(i + 1).copied().unwrap_or(0.0);
            if diff == 0.0 {
                next.push(f64::INFINITY);
            } else {
                next.push(base + 1.0 / diff);
            }
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

/// `∫_lo^hi w(r) e^{ipr} dr` for `lo > 0`, `hi ≤ ∞`, with `w` smooth on the
/// interval and eventually monotone toward infinity.
pub fn oscillatory_integral(
    w: impl Fn(f64) -> f64,
    p: f64,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<(Complex64, f64)> {
    if p == 0.0 {
        let e = radial_integral(&w, lo, hi, cfg)?;
        return Ok((Complex64::new(e.value, 0.0), e.error));
    }
    let q = p.abs();
    let half = std::f64::consts::PI / q;
    let rule = gauss_legendre(cfg.gl_order);
    let coarse = gauss_legendre((cfg.gl_order / 2).max(2));
    let mut re_sum = 0.0;
    let mut im_sum = 0.0;
    let mut err = 0.0;
    let mut a = lo;
    // Finite interval: panel by half periods and stop at hi.
    if hi.is_finite() {
        while a < hi {
            let b = (a + half).min(hi);
            let re = gl_estimate(&rule, &coarse, a, b, &mut |r| w(r) * (q * r).cos());
            let im = gl_estimate(&rule, &coarse, a, b, &mut |r| w(r) * (q * r).sin());
            re_sum += re.value;
            im_sum += im.value;
            err += re.error + im.error;
            a = b;
        }
    } else {
        // Align panel ends with zeros of sin(q r) and cos(q r) alternately is
        // not needed: any half-period panelling gives alternating terms.
        let mut re_parts = Vec::new();
        let mut im_parts = Vec::new();
        let mut re_acc = 0.0;
        let mut im_acc = 0.0;
        let max_panels = 2000;
        let mut last = (f64::NAN, f64::NAN);
        for k in 0..max_panels {
            let b = a + half;
            let re = gl_estimate(&rule, &coarse, a, b, &mut |r| w(r) * (q * r).cos());
            let im = gl_estimate(&rule, &coarse, a, b, &mut |r| w(r) * (q * r).sin());
            re_acc += re.value;
            im_acc += im.value;
            err += re.error + im.error;
            re_parts.push(re_acc);
            im_parts.push(im_acc);
            a = b;
            let tiny = w(a).abs() * half;
            let scale = re_acc.abs().max(im_acc.abs()).max(f64::MIN_POSITIVE);
            if tiny <= 1e-16 * scale {
                last = (re_acc, im_acc);
                break;
            }
            if k >= 24 && k % 8 == 0 {
                let n = re_parts.len();
                let tail = n.min(24);
                let er = wynn_epsilon(&re_parts[n - tail..]);
                let ei = wynn_epsilon(&im_parts[n - tail..]);
                if (er - last.0).abs() <= 1e-13 * scale && (ei - last.1).abs() <= 1e-13 * scale {
                    last = (er, ei);
                    break;
                }
                last = (er, ei);
            }
        }
        if !last.0.is_finite() {
            return Err(Error::Quadrature {
                what: "oscillatory tail".into(),
                achieved: f64::NAN,
            });
        }
        re_sum = last.0;
        im_sum = last.1;
    }
    let im_sign = if p < 0.0 { -1.0 } else { 1.0 };
    Ok((Complex64::new(re_sum, im_sign * im_sum), err))
}

/// Angular quadrature on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Two points for d = 1, a periodic trapezoid for d = 2 and a product
    /// Gauss(cos θ) × trapezoid(φ) grid for d = 3. Every rule is symmetric
    /// under `θ → −θ`, which makes odd integrands vanish to rounding.
    pub fn new(dim: usize, cfg: &QuadConfig) -> Result<Self> {
        match dim {
            1 => Ok(Self {
                dim,
                nodes: vec![vec![1.0], vec![-1.0]],
                weights: vec![1.0, 1.0],
            }),
            2 => {
                let m = cfg.circle_points.max(4) & !1;
                let dt = 2.0 * std::f64::consts::PI / m as f64;
                let nodes = (0..m)
                    .map(|k| {
                        let t = (k as f64 + 0.5) * dt;
                        vec![t.cos(), t.sin()]
                    })
                    .collect();
                Ok(Self {
                    dim,
                    nodes,
                    weights: vec![dt; m],
                })
            }
            3 => {
                let polar = gauss_legendre(16);
                let m = 32;
                let dphi = 2.0 * std::f64::consts::PI / m as f64;
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for &(c, wc) in polar.iter() {
                    let s = (1.0 - c * c).sqrt();
                    for k in 0..m {
                        let phi = (k as f64 + 0.5) * dphi;
                        nodes.push(vec![s * phi.cos(), s * phi.sin(), c]);
                        weights.push(wc * dphi);
                    }
                }
                Ok(Self { dim, nodes, weights })
            }
            _ => Err(Error::UnsupportedDimension(dim)),
        }
    }

    /// Total measure of the sphere as integrated by the rule.
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Surface area of `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            let h = d as f64 / 2.0;
            2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_integrals_close_with_remainders() {
        let cfg = QuadConfig::default();
        // ∫_0^1 r^{-0.5} dr = 2
        let e = radial_integral(|r| r.powf(-0.5), 0.0, 1.0, &cfg).unwrap();
        assert!((e.value - 2.0).abs() < 1e-10, "{e:?}");
        // ∫_1^∞ r^{-1.5} dr = 2
        let e = radial_integral(|r| r.powf(-1.5), 1.0, f64::INFINITY, &cfg).unwrap();
        assert!((e.value - 2.0).abs() < 1e-10, "{e:?}");
        // ∫_0^∞ r e^{-r} dr = 1
        let e = radial_integral(|r| r * (-r).exp(), 0.0, f64::INFINITY, &cfg).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = QuadConfig::default();
        assert!(radial_integral(|r| 1.0 / r, 0.0, 1.0, &cfg).is_err());
        assert!(radial_integral(|r| r.powf(-0.5), 1.0, f64::INFINITY, &cfg).is_err());
    }

    #[test]
    fn oscillatory_tail_matches_closed_form() {
        let cfg = QuadConfig::default();
        // ∫_1^∞ e^{i r}/r^2 dr, reference from the cosine/sine integrals
        let (v, _) = oscillatory_integral(|r| r.powi(-2), 1.0, 1.0, f64::INFINITY, &cfg).unwrap();
        // cos(1) - (π/2 - Si(1)) = 0.5403023 - 0.6247132 ... computed by
        // integration by parts: ∫ cos r / r^2 = cos 1 - ∫_1^∞ sin r / r
        let si1 = 0.946_083_070_367_183_1;
        let ci1 = 0.337_403_922_900_968_1;
        let re = 1f64.cos() - (std::f64::consts::FRAC_PI_2 - si1);
        let im = 1f64.sin() + ci1 * -1.0 + 0.0;
        // ∫ sin r / r^2 = sin 1 + ∫_1^∞ cos r / r = sin 1 - Ci(1)
        assert!((v.re - re).abs() < 1e-9, "{} vs {}", v.re, re);
        assert!((v.im - im).abs() < 1e-9, "{} vs {}", v.im, im);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // partial sums of ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert!((wynn_epsilon(&sums) - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn sphere_rules_integrate_constants_and_odd_moments() {
        let cfg = QuadConfig::default();
        for d in 1..=3 {
            let rule = SphereRule::new(d, &cfg).unwrap();
            assert!((rule.area() - sphere_area(d)).abs() < 1e-12);
            for i in 0..d {
                let m: f64 = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| t[i] * w).sum();
                assert!(m.abs() < 1e-12);
            }
        }
    }
}
