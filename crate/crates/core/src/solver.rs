//! Three independent ways to solve `(L − λ)u = f`.
//!
//! * [`resolvent_solve`] divides by `m − λ` mode by mode.
//! * [`semigroup_solve`] integrates `−∫ e^{−λt} e^{−tΦ(−ξ)} f̂ dt` in time.
//! * [`feynman_kac_mc`] estimates `−(1/λ) E f(x + X_T)` with `T ~ Exp(λ)`
//!   for stable processes.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldops::{dft, idft, GridFunction};
use crate::kernel::{OperatorSpec, Variant};
use crate::operator::apply_spectral;
use crate::symbol::SymbolTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Resolvent,
    Semigroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u: GridFunction,
    pub method: SolveMethod,
    /// `‖(L − λ)u − f‖₂ / ‖f‖₂` through the spectral operator.
    pub residual: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("lambda must be positive and finite, got {lambda}")))
    }
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(table: &SymbolTable, u: &GridFunction, f: &GridFunction, lambda: f64) -> Result<f64> {
    let lu = apply_spectral(table, u)?;
    let r = lu.axpby(1.0, u, -lambda)?.axpby(1.0, f, -1.0)?;
    let norm = l2(&f.values);
    Ok(if norm == 0.0 { l2(&r.values) } else { l2(&r.values) / norm })
}

/// `û = f̂ / (m − λ)`.
pub fn resolvent_solve(table: &SymbolTable, f: &GridFunction, lambda: f64) -> Result<SolveResult> {
    check_lambda(lambda)?;
    if table.grid != f.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", table.grid, f.grid)));
    }
    let grid = table.grid;
    let inv: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let m = 0.5 * (table.values[i] + table.values[grid.partner(i)].conj());
            1.0 / (m - lambda)
        })
        .collect();
    let u = idft(&dft(f).multiply(&inv)?);
    let residual = residual(table, &u, f, lambda)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("lambda".into(), lambda);
    Ok(SolveResult {
        u,
        method: SolveMethod::Resolvent,
        residual,
        diagnostics,
    })
}

/// Time quadrature for [`semigroup_solve`].
///
/// With `t = e^s` every mode integrand `e^s e^{−z e^s}` is analytic in a
/// strip around the real `s` axis and decays doubly exponentially as
/// `s → ∞`, so the trapezoid rule in `s` converges geometrically in the
/// step for all modes at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    /// Step in `ln t`; chosen from the strip width when absent.
    pub step: Option<f64>,
    pub max_nodes: usize,
    /// The integral is cut at `t = horizon / λ`.
    pub horizon: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            step: None,
            max_nodes: 20_000,
            horizon: 40.0,
        }
    }
}

/// `u = −∫₀^∞ e^{−λt} F⁻¹(e^{−tΦ(−ξ)} f̂) dt` from a table of a
/// reflected-kernel variant, which stores `−Φ`. Solves the equation of the
/// adjoint variant.
pub fn semigroup_solve(table: &SymbolTable, f: &GridFunction, lambda: f64, time: &TimeConfig) -> Result<SolveResult> {
    check_lambda(lambda)?;
    if !(table.variant.reflected() || table.variant == Variant::A) {
        return Err(Error::InvalidInput(format!(
            "semigroup solve needs a reflected-kernel table, got {:?}",
            table.variant
        )));
    }
    if table.grid != f.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", table.grid, f.grid)));
    }
    let grid = table.grid;
    // z = λ + Φ(−ξ)
    let z: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let p = grid.partner(i);
            let m = 0.5 * (table.values[p] + table.values[i].conj());
            lambda - m
        })
        .collect();
    let z_max = z.iter().map(|v| v.norm()).fold(lambda, f64::max);
    let arg_max = z.iter().map(|v| v.arg().abs()).fold(0.0, f64::max);
    let strip = FRAC_PI_2 - arg_max;
    if strip <= 1e-3 {
        return Err(Error::Unsupported(format!(
            "symbol too close to the imaginary axis for time integration (max |arg z| = {arg_max:.6})"
        )));
    }
    let s_lo = (1e-14 / z_max).ln();
    let s_hi = (time.horizon / lambda).ln();
    let mut step = time.step.unwrap_or((strip / 3.0).min(0.25));
    let mut nodes = ((s_hi - s_lo) / step).ceil() as usize + 1;
    if nodes > time.max_nodes {
        nodes = time.max_nodes;
        step = (s_hi - s_lo) / (nodes - 1) as f64;
    }
    let times: Vec<f64> = (0..nodes).map(|k| (s_lo + k as f64 * step).exp()).collect();
    let kernel: Vec<Complex64> = z
        .par_iter()
        .map(|&zi| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &times {
                acc += (-zi * t).exp() * t;
            }
            // ∫₀^{t₀} e^{−zt} dt ≈ t₀ below the first node.
            -(acc * step + times[0])
        })
        .collect();
    let u = idft(&dft(f).multiply(&kernel)?);
    let forward = SymbolTable {
        grid,
        values: (0..grid.len()).map(|i| table.values[grid.partner(i)]).collect(),
        variant: table.variant.adjoint(),
    };
    let residual = residual(&forward, &u, f, lambda)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("lambda".into(), lambda);
    diagnostics.insert("time_nodes".into(), nodes as f64);
    diagnostics.insert("log_time_step".into(), step);
    diagnostics.insert("t_min".into(), times[0]);
    diagnostics.insert("t_max".into(), times[nodes - 1]);
    Ok(SolveResult {
        u,
        method: SolveMethod::Semigroup,
        residual,
        diagnostics,
    })
}

/// Point estimates from [`feynman_kac_mc`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub points: Vec<Vec<f64>>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub blocks: usize,
    pub alpha: f64,
    pub lambda: f64,
}

pub const MIN_PATHS: usize = 1000;
const BLOCK: usize = 10_000;

/// The stable exponent of `spec` when Monte Carlo applies to it.
pub fn mc_exponent(spec: &OperatorSpec) -> Result<f64> {
    let alpha = spec
        .kernel
        .stable_alpha()
        .ok_or_else(|| Error::Unsupported("Monte Carlo needs a normalized stable kernel".into()))?;
    let a = spec.effective_coefficient();
    let mut e = vec![0.0; spec.dim()];
    e[0] = 1.0;
    if !a.is_constant() || (a.cell_value(0, &e) - 1.0).abs() > 1e-15 {
        return Err(Error::Unsupported("Monte Carlo needs the coefficient a = 1".into()));
    }
    Ok(alpha)
}

/// Symmetric stable variable with `E e^{iξX} = e^{−|ξ|^α}` (α ∈ (0, 2)).
fn stable_1d(alpha: f64, rng: &mut impl Rng) -> f64 {
    let v = PI * (rng.gen::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if (alpha - 1.0).abs() < 1e-15 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variable with `E e^{−sA} = e^{−s^β}` (β ∈ (0, 1)).
fn positive_stable(beta: f64, rng: &mut impl Rng) -> f64 {
    let u = PI * rng.gen::<f64>();
    let w: f64 = Exp1.sample(rng);
    let a = (beta * u).sin().powf(beta / (1.0 - beta)) * ((1.0 - beta) * u).sin() / u.sin().powf(1.0 / (1.0 - beta));
    (a / w).powf((1.0 - beta) / beta)
}

/// Isotropic stable vector with `E e^{iξ·X} = e^{−|ξ|^α}`, α ∈ (0, 2].
fn stable_vector(alpha: f64, d: usize, rng: &mut impl Rng, out: &mut [f64]) {
    let gauss = |rng: &mut _| -> f64 { std::f64::consts::SQRT_2 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) };
    if alpha >= 2.0 {
        for x in out.iter_mut().take(d) {
            *x = gauss(rng);
        }
    } else if d == 1 {
        out[0] = stable_1d(alpha, rng);
    } else {
        let s = positive_stable(alpha / 2.0, rng).sqrt();
        for x in out.iter_mut().take(d) {
            *x = s * gauss(rng);
        }
    }
}

/// `u(x) = −(1/λ) E f(x + T^{1/α} X)` with `T ~ Exp(λ)` and `X` standard
/// isotropic `α`-stable. With `period = Some(B)`, `f` is evaluated on the
/// torus `[−B/2, B/2)^d`. Blocks of 10⁴ paths use independent streams of
/// one seed, so the result depends only on `(seed, paths)`.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac_mc(
    alpha: f64,
    d: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    lambda: f64,
    points: &[Vec<f64>],
    paths: usize,
    seed: u64,
    period: Option<f64>,
) -> Result<McResult> {
    check_lambda(lambda)?;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidInput(format!("stable exponent must lie in (0, 2], got {alpha}")));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if paths < MIN_PATHS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_PATHS} paths are needed for meaningful error bars, got {paths}"
        )));
    }
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::InvalidInput(format!("point {p:?} is not in dimension {d}")));
    }
    let wrap = |x: f64| match period {
        Some(b) => x - b * ((x + 0.5 * b) / b).floor(),
        None => x,
    };
    let blocks = paths.div_ceil(BLOCK);
    let time = Exp::new(lambda).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let sums: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(paths - b * BLOCK);
            let mut s1 = vec![0.0; points.len()];
            let mut s2 = vec![0.0; points.len()];
            let mut x = [0.0; 3];
            let mut y = [0.0; 3];
            for _ in 0..count {
                let t: f64 = time.sample(&mut rng);
                stable_vector(alpha, d, &mut rng, &mut x);
                let scale = t.powf(1.0 / alpha);
                for (k, p) in points.iter().enumerate() {
                    for a in 0..d {
                        y[a] = wrap(p[a] + scale * x[a]);
                    }
                    let v = -f(&y[..d]) / lambda;
                    s1[k] += v;
                    s2[k] += v * v;
                }
            }
            (s1, s2)
        })
        .collect();
    let n = paths as f64;
    let mut estimates = vec![0.0; points.len()];
    let mut std_errors = vec![0.0; points.len()];
    for k in 0..points.len() {
        let s1: f64 = sums.iter().map(|s| s.0[k]).sum();
        let s2: f64 = sums.iter().map(|s| s.1[k]).sum();
        let mean = s1 / n;
        let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        estimates[k] = mean;
        std_errors[k] = (var / n).sqrt();
    }
    Ok(McResult {
        points: points.to_vec(),
        estimates,
        std_errors,
        paths,
        seed,
        blocks,
        alpha,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldops::GridSpec;
    use crate::kernel::{stable_kernel, CoefficientConfig, CoefficientField};
    use crate::symbol::full_symbol;
    use rand::SeedableRng;

    fn table(alpha: f64, grid: GridSpec, variant: Variant, coefficient: Option<CoefficientConfig>) -> SymbolTable {
        let k = stable_kernel(grid.d, alpha).unwrap();
        let a = CoefficientField::new(coefficient.unwrap_or(CoefficientConfig::Constant { value: 1.0 }), grid.d).unwrap();
        full_symbol(&OperatorSpec::new(k, a, variant).unwrap(), &grid).unwrap()
    }

    #[test]
    fn single_mode_resolvent() {
        let grid = GridSpec::new(1, 64, 8.0 * PI).unwrap();
        let t = table(1.3, grid, Variant::L, None);
        let f = GridFunction::from_fn(grid, |x| x[0].cos());
        let r = resolvent_solve(&t, &f, 1.0).unwrap();
        let want = f.map(|v| -v / 2.0);
        assert!(r.u.axpby(1.0, &want, -1.0).unwrap().max_abs() < 1e-6);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn zero_data_and_bad_lambda() {
        let grid = GridSpec::new(1, 32, 8.0).unwrap();
        let t = table(0.7, grid, Variant::L, None);
        let f = GridFunction::zeros(grid);
        assert_eq!(resolvent_solve(&t, &f, 2.0).unwrap().u.max_abs(), 0.0);
        assert!(resolvent_solve(&t, &f, 0.0).is_err());
        assert!(semigroup_solve(&t, &f, -1.0, &TimeConfig::default()).is_err());
    }

    #[test]
    fn resolvent_identity() {
        let grid = GridSpec::new(1, 128, 16.0).unwrap();
        let coeff = CoefficientConfig::random(0.5, 2.0, 5);
        let t = table(1.4, grid, Variant::L, Some(coeff));
        let f = GridFunction::from_fn(grid, |x| (-(x[0] - 1.0).powi(2)).exp());
        let (l, m) = (0.5, 3.0);
        let ul = resolvent_solve(&t, &f, l).unwrap().u;
        let um = resolvent_solve(&t, &f, m).unwrap().u;
        let rhs = resolvent_solve(&t, &um, l).unwrap().u.map(|v| (l - m) * v);
        let diff = ul.axpby(1.0, &um, -1.0).unwrap();
        let err = diff.axpby(1.0, &rhs, -1.0).unwrap().max_abs() / diff.max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn semigroup_matches_resolvent() {
        let grid = GridSpec::new(1, 128, 16.0).unwrap();
        let coeff = CoefficientConfig::random(0.5, 2.0, 8);
        for alpha in [0.6, 1.5] {
            let forward = table(alpha, grid, Variant::LTilde, Some(coeff.clone()));
            let reflected = table(alpha, grid, Variant::Phi, Some(coeff.clone()));
            let f = GridFunction::from_fn(grid, |x| (-(x[0] * x[0])).exp() * x[0].sin());
            for lambda in [0.5, 4.0] {
                let r = resolvent_solve(&forward, &f, lambda).unwrap();
                let s = semigroup_solve(&reflected, &f, lambda, &TimeConfig::default()).unwrap();
                let err = l2(&s.u.axpby(1.0, &r.u, -1.0).unwrap().values) / l2(&r.u.values);
                assert!(err < 1e-8, "alpha {alpha} lambda {lambda}: {err}");
                assert!(s.residual < 1e-8);
            }
        }
    }

    #[test]
    fn semigroup_preserves_mass() {
        let grid = GridSpec::new(2, 16, 8.0).unwrap();
        let t = table(1.0, grid, Variant::Phi, None);
        let f = GridFunction::from_fn(grid, |_| 1.0);
        let s = semigroup_solve(&t, &f, 2.0, &TimeConfig::default()).unwrap();
        assert!(s.u.values.iter().all(|v| (v + 0.5).abs() < 1e-9));
    }

    #[test]
    fn mc_constant_data_is_exact() {
        let r = feynman_kac_mc(1.2, 2, &|_| 3.0, 2.0, &[vec![0.0, 0.0]], 2000, 1, None).unwrap();
        assert_eq!(r.estimates[0], -1.5);
        assert_eq!(r.std_errors[0], 0.0);
    }

    #[test]
    fn mc_refuses_few_paths_and_is_reproducible() {
        assert!(feynman_kac_mc(1.0, 1, &|_| 1.0, 1.0, &[vec![0.0]], 999, 1, None).is_err());
        let f = |x: &[f64]| (-(x[0] * x[0])).exp();
        let a = feynman_kac_mc(1.0, 1, &f, 1.0, &[vec![0.0]], 12_000, 7, None).unwrap();
        let b = feynman_kac_mc(1.0, 1, &f, 1.0, &[vec![0.0]], 12_000, 7, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.blocks, 2);
    }

    #[test]
    fn stable_samplers_have_the_right_characteristic_function() {
        // Empirical E cos(ξ X) against e^{−|ξ|^α}.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        for (alpha, d) in [(0.7, 1), (1.0, 1), (1.6, 1), (1.3, 2), (0.8, 3), (2.0, 2)] {
            let mut x = [0.0; 3];
            let xi = 0.8;
            let mut acc = 0.0;
            for _ in 0..n {
                stable_vector(alpha, d, &mut rng, &mut x);
                acc += (xi * x[0]).cos();
            }
            let got = acc / n as f64;
            let want = (-(xi as f64).powf(alpha)).exp();
            assert!((got - want).abs() < 5.0 / (n as f64).sqrt(), "alpha {alpha} d {d}: {got} vs {want}");
        }
    }

    #[test]
    fn mc_exponent_checks_the_operator() {
        let k = stable_kernel(1, 1.0).unwrap();
        assert_eq!(mc_exponent(&OperatorSpec::fractional(k.clone()).unwrap()).unwrap(), 1.0);
        let a = CoefficientField::new(CoefficientConfig::Constant { value: 2.0 }, 1).unwrap();
        assert!(mc_exponent(&OperatorSpec::new(k, a, Variant::L).unwrap()).is_err());
    }
}
