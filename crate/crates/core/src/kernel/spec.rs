//! Operator specification: kernel, coefficient, compensator and variant.

use serde::{Deserialize, Serialize};

use super::coefficient::{CoefficientConfig, CoefficientField};
use super::RadialJumpKernel;
use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig, SphereRule};

/// Which operator of the family is meant.
///
/// `L` and `LStar` compensate with `χ` chosen from `σ`; the tilde variants
/// and `Phi` always compensate on the unit ball. Star variants and `Phi`
/// integrate against the reflected kernel `a(−y)J(−y)`. `Phi` stores the
/// multiplier of the Lévy generator whose exponent is `Φ`, i.e. `−Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    A,
    L,
    LTilde,
    LStar,
    LTildeStar,
    Phi,
}

impl Variant {
    pub fn reflected(self) -> bool {
        matches!(self, Variant::LStar | Variant::LTildeStar | Variant::Phi)
    }

    pub fn unit_ball_compensator(self) -> bool {
        matches!(self, Variant::LTilde | Variant::LTildeStar | Variant::Phi)
    }

    /// The operator with reflected kernel and the same compensator.
    pub fn adjoint(self) -> Variant {
        match self {
            Variant::A => Variant::A,
            Variant::L => Variant::LStar,
            Variant::LStar => Variant::L,
            Variant::LTilde => Variant::LTildeStar,
            Variant::LTildeStar | Variant::Phi => Variant::LTilde,
        }
    }
}

/// Compensator `χ(y)` in `u(x+y) − u(x) − y·∇u(x) χ(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiRegime {
    None,
    UnitBall,
    Full,
}

impl ChiRegime {
    pub fn from_sigma(sigma: f64) -> Self {
        if (sigma - 1.0).abs() <= 1e-12 {
            ChiRegime::UnitBall
        } else if sigma < 1.0 {
            ChiRegime::None
        } else {
            ChiRegime::Full
        }
    }

    /// `χ` at radius `r` (constant on either side of `r = 1`).
    pub fn at(self, r: f64) -> f64 {
        match self {
            ChiRegime::None => 0.0,
            ChiRegime::UnitBall => f64::from(u8::from(r < 1.0)),
            ChiRegime::Full => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kernel: RadialJumpKernel,
    pub coefficient: CoefficientField,
    pub sigma: f64,
    pub variant: Variant,
}

impl OperatorSpec {
    /// Uses the kernel's analytic `σ`.
    pub fn new(kernel: RadialJumpKernel, coefficient: CoefficientField, variant: Variant) -> Result<Self> {
        let sigma = kernel.sigma().ok_or_else(|| {
            Error::InvalidInput("kernel has no analytic sigma; estimate it and use OperatorSpec::with_sigma".into())
        })?;
        Self::with_sigma(kernel, coefficient, variant, sigma)
    }

    pub fn with_sigma(
        kernel: RadialJumpKernel,
        coefficient: CoefficientField,
        variant: Variant,
        sigma: f64,
    ) -> Result<Self> {
        if kernel.dim() != coefficient.dim() {
            return Err(Error::InvalidInput(format!(
                "kernel dimension {} differs from coefficient dimension {}",
                kernel.dim(),
                coefficient.dim()
            )));
        }
        if !(sigma > 0.0 && sigma <= 2.0) {
            return Err(Error::InvalidInput(format!("sigma must lie in (0, 2], got {sigma}")));
        }
        let coefficient = if variant == Variant::A {
            CoefficientField::new(CoefficientConfig::Constant { value: 1.0 }, kernel.dim())?
        } else {
            coefficient
        };
        Ok(Self {
            kernel,
            coefficient,
            sigma,
            variant,
        })
    }

    /// `A` for the same kernel.
    pub fn fractional(kernel: RadialJumpKernel) -> Result<Self> {
        let d = kernel.dim();
        Self::new(kernel, CoefficientField::new(CoefficientConfig::Constant { value: 1.0 }, d)?, Variant::A)
    }

    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        Self::with_sigma(self.kernel.clone(), self.coefficient.clone(), variant, self.sigma)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `χ` regime fixed by `σ`.
    pub fn sigma_regime(&self) -> ChiRegime {
        ChiRegime::from_sigma(self.sigma)
    }

    /// Compensator actually used by this variant.
    pub fn chi(&self) -> ChiRegime {
        if self.variant.unit_ball_compensator() {
            ChiRegime::UnitBall
        } else {
            self.sigma_regime()
        }
    }

    /// Coefficient multiplying `J` in the integrand (reflected for adjoints).
    pub fn effective_coefficient(&self) -> CoefficientField {
        if self.variant.reflected() {
            self.coefficient.reflected()
        } else {
            self.coefficient.clone()
        }
    }

    /// `K(y) = a(y) J(y)` of the underlying (unreflected) operator.
    pub fn k(&self, y: &[f64]) -> f64 {
        self.coefficient.eval(y) * self.kernel.eval(y)
    }

    /// `K₁(z) = K(z) ∧ K(−z)`.
    pub fn k1(&self, z: &[f64]) -> f64 {
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        self.coefficient.eval(z).min(self.coefficient.eval(&neg)) * self.kernel.eval(z)
    }

    /// `K₂ = K − K₁ ≥ 0`.
    pub fn k2(&self, z: &[f64]) -> f64 {
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let (a, b) = (self.coefficient.eval(z), self.coefficient.eval(&neg));
        (a - a.min(b)) * self.kernel.eval(z)
    }

    /// Radii where the radial integrand of this spec may be non-smooth:
    /// coefficient edges, kernel breakpoints and the unit sphere.
    pub fn radial_breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.coefficient.radial_edges().to_vec();
        b.extend(self.kernel.breakpoints());
        b.push(1.0);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        b
    }
}

/// Symmetric/remainder split of `K` as used in the Hölder estimates.
pub fn kernel_split(spec: &OperatorSpec) -> Result<(impl Fn(&[f64]) -> f64 + '_, impl Fn(&[f64]) -> f64 + '_)> {
    if !matches!(spec.variant, Variant::L | Variant::LTilde) {
        return Err(Error::InvalidInput(format!(
            "kernel split is defined for L and L-tilde, not {:?}",
            spec.variant
        )));
    }
    Ok((move |z: &[f64]| spec.k1(z), move |z: &[f64]| spec.k2(z)))
}

/// `∫_lo^hi r^k j(r) dr`, split at the kernel's breakpoints.
pub fn radial_moment(kernel: &RadialJumpKernel, k: f64, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
    let hi = hi.min(kernel.support_radius());
    if hi <= lo {
        return Ok(0.0);
    }
    let mut cuts = vec![lo];
    cuts.extend(kernel.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quad::radial_integral(|r| r.powf(k) * kernel.j(r), w[0], w[1], cfg)?.value;
    }
    Ok(total)
}

/// Drift `b` with `L̃u = Lu + b·∇u`:
/// `b = −∫_{B₁} y a J` for `σ < 1` and `b = ∫_{|y|≥1} y a J` for `σ > 1`.
pub fn drift_vector(spec: &OperatorSpec, cfg: &QuadConfig) -> Result<Vec<f64>> {
    let d = spec.dim();
    let (lo, hi, sign) = match spec.sigma_regime() {
        ChiRegime::None => (0.0, 1.0, -1.0),
        ChiRegime::Full => (1.0, f64::INFINITY, 1.0),
        ChiRegime::UnitBall => {
            return Err(Error::Unsupported(
                "drift is undefined for sigma = 1 (the compensator is already the unit ball)".into(),
            ))
        }
    };
    let a = &spec.coefficient;
    let mut b = vec![0.0; d];
    if a.is_even() || (lo == 0.0 && a.even_inside()) || (lo == 1.0 && a.even_outside()) {
        return Ok(b);
    }
    let rule = SphereRule::new(d, cfg)?;
    let mut edges = vec![lo];
    edges.extend(a.radial_edges().iter().copied().filter(|&e| e > lo && e < hi));
    edges.push(hi);
    for w in edges.windows(2) {
        let m = radial_moment(&spec.kernel, d as f64, w[0], w[1], cfg)?;
        let cell = a.radial_cell(w[0]);
        for (th, wt) in rule.nodes.iter().zip(&rule.weights) {
            let v = a.cell_value(cell, th);
            for i in 0..d {
                b[i] += sign * wt * th[i] * v * m;
            }
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{stable_kernel, stable_normalization};

    fn sign_coeff(base: f64, amp: f64) -> CoefficientField {
        CoefficientField::new(CoefficientConfig::Sign { base, amp }, 1).unwrap()
    }

    #[test]
    fn chi_regime_from_sigma() {
        assert_eq!(ChiRegime::from_sigma(0.5), ChiRegime::None);
        assert_eq!(ChiRegime::from_sigma(1.0), ChiRegime::UnitBall);
        assert_eq!(ChiRegime::from_sigma(1.5), ChiRegime::Full);
    }

    #[test]
    fn variant_a_forces_unit_coefficient() {
        let spec = OperatorSpec::new(stable_kernel(1, 0.5).unwrap(), sign_coeff(1.5, 0.5), Variant::A).unwrap();
        assert!(spec.coefficient.is_constant());
        assert_eq!(spec.coefficient.eval(&[0.7]), 1.0);
    }

    #[test]
    fn split_of_sign_coefficient() {
        let k = stable_kernel(1, 0.5).unwrap();
        let spec = OperatorSpec::new(k.clone(), sign_coeff(1.5, 0.5), Variant::L).unwrap();
        let (k1, k2) = kernel_split(&spec).unwrap();
        for &z in &[-3.0, -0.2, 0.01, 0.5, 4.0] {
            let j = k.j(f64::abs(z));
            assert!((k1(&[z]) - j).abs() <= 1e-15 * j);
            assert_eq!(k1(&[z]), k1(&[-z]));
            let want = if z > 0.0 { j } else { 0.0 };
            assert!((k2(&[z]) - want).abs() <= 1e-15 * j);
            assert!((k1(&[z]) + k2(&[z]) - spec.k(&[z])).abs() <= 1e-15 * j);
        }
    }

    #[test]
    fn even_coefficient_has_zero_remainder() {
        let spec = OperatorSpec::new(
            stable_kernel(2, 1.2).unwrap(),
            CoefficientField::new(CoefficientConfig::random_even(0.5, 2.0, 1), 2).unwrap(),
            Variant::LTilde,
        )
        .unwrap();
        let (_, k2) = kernel_split(&spec).unwrap();
        for &(x, y) in &[(0.1, 0.3), (-2.0, 0.4), (5.0, -7.0)] {
            assert_eq!(k2(&[x, y]), 0.0);
        }
    }

    #[test]
    fn drift_of_sign_coefficient() {
        // a(y) − a(−y) = 1 on y > 0, so b = −∫₀¹ y · c y^{-1.5} dy = −2c.
        let cfg = QuadConfig::default();
        let spec = OperatorSpec::new(stable_kernel(1, 0.5).unwrap(), sign_coeff(1.0, 0.5), Variant::L).unwrap();
        let b = drift_vector(&spec, &cfg).unwrap();
        let c = stable_normalization(1, 0.5).unwrap();
        assert!((b[0] + 2.0 * c).abs() < 1e-9 * c, "{b:?}");
    }

    #[test]
    fn drift_vanishes_for_even_or_unit_coefficient() {
        let cfg = QuadConfig::default();
        for alpha in [0.5, 1.5] {
            let k = stable_kernel(1, alpha).unwrap();
            let one = CoefficientField::new(CoefficientConfig::Constant { value: 1.0 }, 1).unwrap();
            let spec = OperatorSpec::new(k.clone(), one, Variant::L).unwrap();
            assert_eq!(drift_vector(&spec, &cfg).unwrap(), vec![0.0]);
            let even = CoefficientField::new(CoefficientConfig::random_even(0.5, 2.0, 9), 1).unwrap();
            let spec = OperatorSpec::new(k, even, Variant::L).unwrap();
            assert!(drift_vector(&spec, &cfg).unwrap()[0].abs() < 1e-14);
        }
        let spec = OperatorSpec::new(stable_kernel(1, 1.0).unwrap(), sign_coeff(1.0, 0.5), Variant::L).unwrap();
        assert!(matches!(drift_vector(&spec, &cfg), Err(Error::Unsupported(_))));
    }
}
