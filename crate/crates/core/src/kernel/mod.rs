//! Radial jump kernels `J(y) = j(|y|)`, measurable coefficients `a(y)` and
//! the operator specification built from them.

pub mod bernstein;
pub mod coefficient;
pub mod spec;

use std::collections::HashMap;
use std::f64::consts::LN_10;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::QuadConfig;

pub use bernstein::BernsteinFunction;
pub use coefficient::{CoefficientConfig, CoefficientField};
pub use spec::{ChiRegime, OperatorSpec, Variant};

/// How a kernel is described in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelConfig {
    /// `c(d, α) r^{-d-α}`, normalized so that `Ψ(ξ) = |ξ|^α`.
    Stable { alpha: f64 },
    /// Jump density of Brownian motion subordinated by `φ`.
    Subordinate { phi: BernsteinFunction },
    /// `r^{-d-α}` without normalization.
    PowerLaw { alpha: f64 },
    /// `r^{-d-α}`, multiplied by `e^{-rate·r}` for `r > onset`.
    ExpTail { alpha: f64, rate: f64, onset: f64 },
    /// `r^{-d-inner}` on `(0, 1]`, `r^{-d-outer}` beyond.
    BrokenPower { inner_alpha: f64, outer_alpha: f64 },
    /// `r^{-d-α} (1 + |ln r|)^{-2}`.
    LogCorrected { alpha: f64 },
    /// `r^{-d-α}` on `(0, radius]`, zero beyond.
    CompactPower { alpha: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Stable,
    Subordinate,
    Custom,
}

/// `ln j` tabulated on a uniform grid in `ln r`, cubic Hermite inside and
/// power-law outside.
#[derive(Debug)]
struct LogTable {
    ln_r0: f64,
    step: f64,
    ln_j: Vec<f64>,
    slope: Vec<f64>,
}

impl LogTable {
    fn new(ln_r0: f64, step: f64, ln_j: Vec<f64>) -> Self {
        let n = ln_j.len();
        let slope = (0..n)
            .map(|i| {
                if i == 0 {
                    (ln_j[1] - ln_j[0]) / step
                } else if i == n - 1 {
                    (ln_j[n - 1] - ln_j[n - 2]) / step
                } else {
                    (ln_j[i + 1] - ln_j[i - 1]) / (2.0 * step)
                }
            })
            .collect();
        Self { ln_r0, step, ln_j, slope }
    }

    fn eval(&self, ln_r: f64) -> f64 {
        let n = self.ln_j.len();
        let x = (ln_r - self.ln_r0) / self.step;
        if x <= 0.0 {
            return self.ln_j[0] + x * (self.ln_j[1] - self.ln_j[0]);
        }
        if x >= (n - 1) as f64 {
            let over = x - (n - 1) as f64;
            return self.ln_j[n - 1] + over * (self.ln_j[n - 1] - self.ln_j[n - 2]);
        }
        let i = x.floor() as usize;
        let t = x - i as f64;
        let (y0, y1) = (self.ln_j[i], self.ln_j[i + 1]);
        let (m0, m1) = (self.slope[i] * self.step, self.slope[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }
}

struct Inner {
    d: usize,
    config: KernelConfig,
    scale: f64,
    sigma: Option<f64>,
    table: Option<LogTable>,
    psi_cache: Mutex<HashMap<u64, f64>>,
}

/// A rotationally invariant jump kernel in dimension `d`. Cheap to clone.
#[derive(Clone)]
pub struct RadialJumpKernel(Arc<Inner>);

impl fmt::Debug for RadialJumpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialJumpKernel")
            .field("d", &self.0.d)
            .field("config", &self.0.config)
            .field("sigma", &self.0.sigma)
            .finish()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Kernel with `j(r) = c(d, α) r^{-d-α}` and `Ψ(ξ) = |ξ|^α`.
pub fn stable_kernel(d: usize, alpha: f64) -> Result<RadialJumpKernel> {
    RadialJumpKernel::new(KernelConfig::Stable { alpha }, d)
}

/// Jump kernel of the subordinate Brownian motion with exponent `φ`,
/// tabulated from the subordinator density.
pub fn subordinate_kernel(phi: BernsteinFunction, d: usize, cfg: &QuadConfig) -> Result<RadialJumpKernel> {
    RadialJumpKernel::with_quadrature(KernelConfig::Subordinate { phi }, d, cfg)
}

/// The constant `c` with `∫ (1 − cos y¹) c |y|^{-d-α} dy = 1`.
pub fn stable_normalization(d: usize, alpha: f64) -> Result<f64> {
    check_dim(d)?;
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidInput(format!("stable exponent must lie in (0, 2), got {alpha}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&(d, alpha.to_bits())) {
        return Ok(c);
    }
    let raw = RadialJumpKernel::new(KernelConfig::PowerLaw { alpha }, d)?;
    let psi = crate::symbol::psi_radial(&raw, 1.0, &QuadConfig::default())?;
    let c = 1.0 / psi;
    cache.lock().unwrap().insert((d, alpha.to_bits()), c);
    Ok(c)
}

impl RadialJumpKernel {
    pub fn new(config: KernelConfig, d: usize) -> Result<Self> {
        Self::with_quadrature(config, d, &QuadConfig::default())
    }

    pub fn with_quadrature(config: KernelConfig, d: usize, cfg: &QuadConfig) -> Result<Self> {
        check_dim(d)?;
        let mut scale = 1.0;
        let mut table = None;
        let sigma = match &config {
            KernelConfig::Stable { alpha } => {
                scale = stable_normalization(d, *alpha)?;
                Some(*alpha)
            }
            KernelConfig::Subordinate { phi } => {
                phi.validate()?;
                table = Some(build_table(phi, d, cfg)?);
                phi.kernel_sigma()
            }
            KernelConfig::PowerLaw { alpha } => {
                check_positive("alpha", *alpha)?;
                (*alpha < 2.0).then_some(*alpha)
            }
            KernelConfig::ExpTail { alpha, rate, onset } => {
                check_positive("alpha", *alpha)?;
                check_positive("rate", *rate)?;
                if !(*onset >= 0.0) {
                    return Err(Error::InvalidInput("onset must be nonnegative".into()));
                }
                (*alpha < 2.0).then_some(*alpha)
            }
            KernelConfig::BrokenPower { inner_alpha, outer_alpha } => {
                check_positive("inner_alpha", *inner_alpha)?;
                check_positive("outer_alpha", *outer_alpha)?;
                (*inner_alpha < 2.0).then_some(*inner_alpha)
            }
            KernelConfig::LogCorrected { alpha } => {
                check_positive("alpha", *alpha)?;
                (*alpha <= 2.0).then_some(*alpha)
            }
            KernelConfig::CompactPower { alpha, radius } => {
                check_positive("alpha", *alpha)?;
                check_positive("radius", *radius)?;
                (*alpha < 2.0).then_some(*alpha)
            }
        };
        Ok(Self(Arc::new(Inner {
            d,
            config,
            scale,
            sigma,
            table,
            psi_cache: Mutex::new(HashMap::new()),
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.d
    }

    pub fn config(&self) -> &KernelConfig {
        &self.0.config
    }

    /// Analytically known order `σ`.
    pub fn sigma(&self) -> Option<f64> {
        self.0.sigma
    }

    pub fn family(&self) -> KernelFamily {
        match self.0.config {
            KernelConfig::Stable { .. } => KernelFamily::Stable,
            KernelConfig::Subordinate { .. } => KernelFamily::Subordinate,
            _ => KernelFamily::Custom,
        }
    }

    /// Stable exponent, for the stable family.
    pub fn stable_alpha(&self) -> Option<f64> {
        match self.0.config {
            KernelConfig::Stable { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Stable normalization constant (1 for other families).
    pub fn scale(&self) -> f64 {
        self.0.scale
    }

    /// Identifier for caches keyed by kernel.
    pub fn key(&self) -> String {
        format!("{}:{}", self.0.d, serde_json::to_string(&self.0.config).unwrap_or_default())
    }

    /// Radii where `j` is not smooth; quadratures split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.0.config {
            KernelConfig::ExpTail { onset, .. } if onset > 0.0 => vec![onset],
            KernelConfig::BrokenPower { .. } | KernelConfig::LogCorrected { .. } => vec![1.0],
            KernelConfig::CompactPower { radius, .. } => vec![radius],
            _ => Vec::new(),
        }
    }

    /// Radius beyond which `j` vanishes identically.
    pub fn support_radius(&self) -> f64 {
        match self.0.config {
            KernelConfig::CompactPower { radius, .. } => radius,
            _ => f64::INFINITY,
        }
    }

    /// `ln j(r)`; `-∞` where `j` vanishes.
    pub fn ln_j(&self, r: f64) -> f64 {
        let d = self.0.d as f64;
        let lr = r.ln();
        match &self.0.config {
            KernelConfig::Stable { alpha } => self.0.scale.ln() - (d + alpha) * lr,
            KernelConfig::Subordinate { .. } => self.0.table.as_ref().unwrap().eval(lr),
            KernelConfig::PowerLaw { alpha } => -(d + alpha) * lr,
            KernelConfig::ExpTail { alpha, rate, onset } => {
                let base = -(d + alpha) * lr;
                if r > *onset {
                    base - rate * r
                } else {
                    base
                }
            }
            KernelConfig::BrokenPower { inner_alpha, outer_alpha } => {
                if r <= 1.0 {
                    -(d + inner_alpha) * lr
                } else {
                    -(d + outer_alpha) * lr
                }
            }
            KernelConfig::LogCorrected { alpha } => -(d + alpha) * lr - 2.0 * lr.abs().ln_1p(),
            KernelConfig::CompactPower { alpha, radius } => {
                if r <= *radius {
                    -(d + alpha) * lr
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Density value `j(r)`, `r > 0`.
    pub fn j(&self, r: f64) -> f64 {
        self.ln_j(r).exp()
    }

    /// `J(y) = j(|y|)`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.j(y.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Range `(min, max)` of `j(r) r^d / φ(r^{−2})` over `r ∈ [lo, hi]`
    /// (32 points per decade) for a subordinate kernel; `None` otherwise.
    pub fn comparability_band(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let KernelConfig::Subordinate { phi } = &self.0.config else {
            return None;
        };
        let d = self.0.d as f64;
        let steps = ((hi / lo).log10() * 32.0).ceil().max(1.0) as usize;
        let band = (0..=steps)
            .map(|i| {
                let r = lo * (hi / lo).powf(i as f64 / steps as f64);
                (self.ln_j(r) + d * r.ln() - phi.eval(r.powi(-2)).ln()).exp()
            })
            .fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(v), b.max(v)));
        Some(band)
    }

    pub(crate) fn psi_cached(&self, p: f64) -> Option<f64> {
        self.0.psi_cache.lock().unwrap().get(&p.to_bits()).copied()
    }

    pub(crate) fn psi_store(&self, p: f64, v: f64) {
        self.0.psi_cache.lock().unwrap().insert(p.to_bits(), v);
    }
}

/// Tabulation range and density (nodes per decade) per catalog entry.
fn table_layout(phi: &BernsteinFunction) -> (f64, f64, usize) {
    match phi {
        BernsteinFunction::Power { .. } | BernsteinFunction::SumOfPowers { .. } => (1e-6, 1e6, 16),
        BernsteinFunction::LogCosh { .. } | BernsteinFunction::LogSinhRatio { .. } => (1e-2, 1e8, 8),
        _ => (1e-4, 1e6, 12),
    }
}

fn build_table(phi: &BernsteinFunction, d: usize, cfg: &QuadConfig) -> Result<LogTable> {
    let (lo, hi, per_decade) = table_layout(phi);
    let step = LN_10 / per_decade as f64;
    let n = ((hi / lo).ln() / step).round() as usize + 1;
    let ln_r0 = lo.ln();
    let ln_j = (0..n)
        .into_par_iter()
        .map(|i| {
            let r = (ln_r0 + i as f64 * step).exp();
            let v = phi.jump_density(d, r, cfg)?;
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(Error::Quadrature {
                    what: format!("jump density of {} at r = {r:e}", phi.id()),
                    achieved: v,
                })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LogTable::new(ln_r0, step, ln_j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn catalog_kernels_are_comparable_to_phi() {
        let catalog = [
            BernsteinFunction::Power { alpha: 0.5 },
            BernsteinFunction::SumOfPowers { alphas: vec![0.3, 0.7] },
            BernsteinFunction::MixedPower { alpha: 0.4, beta: 0.6 },
            BernsteinFunction::LogPositive { alpha: 0.5, beta: 0.3 },
            BernsteinFunction::LogNegative { alpha: 0.6, beta: 0.3 },
            BernsteinFunction::LogCosh { alpha: 0.5 },
            BernsteinFunction::LogSinhRatio { alpha: 0.5 },
        ];
        for d in [1, 2] {
            for phi in &catalog {
                let k = RadialJumpKernel::new(KernelConfig::Subordinate { phi: phi.clone() }, d)
                    .unwrap_or_else(|e| panic!("{phi:?} d={d}: {e}"));
                let (lo, hi) = k.comparability_band(1e-2, 1e2).unwrap();
                let (wlo, whi) = k.comparability_band(1e-3, 1e3).unwrap();
                assert!(lo > 0.0 && hi / lo < 20.0, "{phi:?} d={d}: [{lo}, {hi}]");
                // A band independent of r does not widen when the range grows.
                assert!(whi / wlo < 1.5 * hi / lo, "{phi:?} d={d}: [{wlo}, {whi}] vs [{lo}, {hi}]");
            }
        }
        assert!(stable_kernel(1, 0.5).unwrap().comparability_band(1e-2, 1e2).is_none());
    }

    #[test]
    fn cauchy_normalization() {
        let c = stable_normalization(1, 1.0).unwrap();
        assert!((c - 1.0 / PI).abs() < 1e-9, "{c}");
    }

    #[test]
    fn stable_normalization_matches_gamma_formula() {
        use statrs::function::gamma::gamma;
        for d in 1..=3 {
            for &a in &[0.3, 0.5, 1.0, 1.5, 1.7] {
                let dh = d as f64 / 2.0;
                let want = a * 2f64.powf(a - 1.0) * gamma(dh + a / 2.0) / (PI.powf(dh) * gamma(1.0 - a / 2.0));
                let got = stable_normalization(d, a).unwrap();
                assert!((got / want - 1.0).abs() < 1e-6, "d={d} α={a}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn stable_rejects_bad_input() {
        assert!(stable_kernel(1, 2.0).is_err());
        assert!(stable_kernel(1, 0.0).is_err());
        assert!(stable_kernel(4, 0.5).is_err());
    }

    #[test]
    fn stable_scaling_is_exact() {
        let k = stable_kernel(2, 1.2).unwrap();
        assert_eq!(k.sigma(), Some(1.2));
        for &r in &[1e-3, 0.2, 5.0] {
            for &l in &[0.5, 3.0] {
                let lhs = k.j(l * r);
                let rhs = l.powf(-3.2) * k.j(r);
                assert!((lhs / rhs - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn half_power_subordination_gives_cauchy() {
        let k = subordinate_kernel(BernsteinFunction::Power { alpha: 0.5 }, 1, &QuadConfig::default()).unwrap();
        for &r in &[1e-3, 0.05, 0.7, 1.0, 13.0, 1e4] {
            let want = 1.0 / (PI * r * r);
            assert!((k.j(r) / want - 1.0).abs() < 1e-6, "r={r}");
        }
        // decreasing toward infinity
        let rs: Vec<f64> = (0..100).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect();
        assert!(rs.windows(2).all(|w| k.j(w[1]) < k.j(w[0])));
    }

    #[test]
    fn custom_phi_without_density_is_rejected() {
        let phi = BernsteinFunction::custom("sqrt", |x| x.sqrt());
        let err = subordinate_kernel(phi, 1, &QuadConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)), "{err}");
    }

    #[test]
    fn log_table_reproduces_smooth_function() {
        let step = LN_10 / 16.0;
        let ln_j: Vec<f64> = (0..100).map(|i| (-3.0 + i as f64 * step).sin()).collect();
        let t = LogTable::new(-3.0, step, ln_j);
        for k in 0..50 {
            let x = -3.0 + 0.137 * k as f64;
            assert!((t.eval(x) - x.sin()).abs() < 1e-4);
        }
    }
}
