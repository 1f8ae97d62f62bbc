//! Applying the operators to grid functions.
//!
//! `apply_spectral` multiplies by a precomputed symbol table. `apply_direct`
//! evaluates the defining integral `∫ (u(x+y) − u(x) − y·∇u(x) χ(y)) K(y) dy`
//! in three radial zones:
//!
//! * `|y| < 2h`: Taylor expansion of `u(x+y)` with spectral derivatives;
//! * `2h ≤ |y| < B/4`: Gauss-Legendre panels of width at most `2h` times the
//!   angular rule, with `u(x+y)` by trigonometric interpolation;
//! * `|y| ≥ B/4`: `u` is periodic, so the far field acts mode by mode through
//!   radial transforms of the kernel tail.
//!
//! Translating a trigonometric interpolant by `y` multiplies its mode `ξ` by
//! `e^{iξ·y}`, so every zone is accumulated in Fourier space and transformed
//! back once. The near and middle zones share no code with the symbol
//! quadrature; the far field does.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fieldops::{dft, idft, GridFunction, GridSpec, Spectrum};
use crate::hypothesis::{check_cancellation, check_levy};
use crate::kernel::spec::radial_moment;
use crate::kernel::{ChiRegime, OperatorSpec, Variant};
use crate::quad::{gauss_legendre, QuadConfig, SphereRule};
use crate::symbol::{far_field_multiplier, SymbolTable};

/// Output of [`apply_direct`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectApplication {
    pub output: GridFunction,
    /// Estimated relative L² error of the quadrature.
    pub error_budget: f64,
    pub warnings: Vec<String>,
}

/// Fraction of the spectral energy in the top octave (`max |k_a| > n/4`).
pub fn top_octave_energy(u: &GridFunction) -> f64 {
    let s = dft(u);
    let grid = u.grid;
    let (mut top, mut total) = (0.0, 0.0);
    for (idx, v) in s.values.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        if grid.mode(idx)[..grid.d].iter().any(|k| k.unsigned_abs() as usize > grid.n / 4) {
            top += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

fn symmetrized(table: &SymbolTable) -> Vec<Complex64> {
    let grid = table.grid;
    (0..table.values.len())
        .map(|i| 0.5 * (table.values[i] + table.values[grid.partner(i)].conj()))
        .collect()
}

/// `F⁻¹(m F u)`.
pub fn apply_spectral(table: &SymbolTable, u: &GridFunction) -> Result<GridFunction> {
    if table.grid != u.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", table.grid, u.grid)));
    }
    let m = symmetrized(table);
    Ok(idft(&dft(u).multiply(&m)?))
}

pub fn apply_direct(spec: &OperatorSpec, u: &GridFunction) -> Result<DirectApplication> {
    apply_direct_with(spec, u, &QuadConfig::default())
}

pub fn apply_direct_with(spec: &OperatorSpec, u: &GridFunction, cfg: &QuadConfig) -> Result<DirectApplication> {
    let grid = u.grid;
    if grid.d != spec.dim() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} differs from operator dimension {}",
            grid.d,
            spec.dim()
        )));
    }
    let levy = check_levy(&spec.kernel);
    if !levy.passed() {
        return Err(Error::MissingCertificate(format!("LEVY: {}", levy.notes.join("; "))));
    }
    if spec.variant != Variant::A && spec.sigma_regime() == ChiRegime::UnitBall {
        let cert = check_cancellation(spec, cfg)?;
        if !cert.passed() {
            return Err(Error::MissingCertificate("CANCEL: sigma = 1 requires the cancellation condition".into()));
        }
    }
    let mut warnings = Vec::new();
    let top = top_octave_energy(u);
    if top > 1e-6 {
        warnings.push(format!(
            "input is not band-limited: top-octave energy fraction {top:.3e} exceeds 1e-6"
        ));
    }
    let near_radius = 2.0 * grid.h();
    let far_radius = grid.box_len / 4.0;
    let (near, near_err) = near_zone(spec, &grid, near_radius.min(far_radius), cfg)?;
    let middle = middle_zone(spec, &grid, near_radius, far_radius, cfg.gl_order, cfg)?;
    let middle_coarse = middle_zone(spec, &grid, near_radius, far_radius, (cfg.gl_order / 2).max(2), cfg)?;
    let far = far_field_multiplier(spec, &grid, far_radius.max(near_radius), cfg)?;
    let mut m: Vec<Complex64> = (0..grid.len()).map(|i| near[i] + middle[i] + far[i]).collect();
    for i in 0..grid.len() {
        if grid.partner(i) == i {
            m[i].im = 0.0;
        }
    }
    let spectrum = dft(u);
    let out = spectrum.multiply(&m)?;
    let norm = |s: &Spectrum| s.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let diff: Vec<Complex64> = (0..grid.len()).map(|i| middle[i] - middle_coarse[i]).collect();
    let out_norm = norm(&out);
    let error_budget = if out_norm == 0.0 {
        0.0
    } else {
        (norm(&spectrum.multiply(&diff)?) + near_err * norm(&spectrum)) / out_norm + cfg.rel_tol
    };
    Ok(DirectApplication {
        output: idft(&out),
        error_budget,
        warnings,
    })
}

/// Radii where the integrand may be non-smooth, inside `(lo, hi)`.
fn cuts(spec: &OperatorSpec, lo: f64, hi: f64) -> Vec<f64> {
    let support = spec.kernel.support_radius();
    let hi = hi.min(support);
    let mut c = vec![lo];
    c.extend(spec.radial_breaks().into_iter().filter(|&b| b > lo && b < hi));
    c.push(hi);
    c.retain(|&x| x <= hi);
    c.dedup();
    c
}

/// `Σ_θ w_θ Σ_k (iξ·θ)^k / k! ∫ r^{k+d−1} a j dr` over `|y| < radius`.
fn near_zone(spec: &OperatorSpec, grid: &GridSpec, radius: f64, cfg: &QuadConfig) -> Result<(Vec<Complex64>, f64)> {
    const TERMS: usize = 60;
    let d = grid.d;
    let a = spec.effective_coefficient();
    let chi = spec.chi();
    let rule = SphereRule::new(d, cfg)?;
    let edges = cuts(spec, 0.0, radius);
    struct Zone {
        cell: usize,
        first: usize,
        moments: Vec<f64>,
    }
    let mut zones = Vec::new();
    for w in edges.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let c = chi.at(0.5 * (w[0] + w[1]));
        // The first-order term is compensated exactly where χ = 1.
        let first = if c == 0.0 { 1 } else { 2 };
        let mut moments = vec![0.0; TERMS + 1];
        for (k, m) in moments.iter_mut().enumerate().skip(first) {
            *m = radial_moment(&spec.kernel, (k + d - 1) as f64, w[0], w[1], cfg)?;
        }
        zones.push(Zone {
            cell: a.radial_cell(w[0]),
            first,
            moments,
        });
    }
    let weights: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(th, w)| zones.iter().map(|z| w * a.cell_value(z.cell, th)).collect())
        .collect();
    let mut tail: f64 = 0.0;
    let values = per_mode(grid, |xi| {
        let mut total = Complex64::new(0.0, 0.0);
        for (th, zw) in rule.nodes.iter().zip(&weights) {
            let p: f64 = xi.iter().zip(th).map(|(x, t)| x * t).sum();
            for (z, &w) in zones.iter().zip(zw) {
                // Horner in (ip) on Σ_k μ_k (ip)^k / k!.
                let ip = Complex64::new(0.0, p);
                let mut acc = Complex64::new(0.0, 0.0);
                for k in (z.first..=TERMS).rev() {
                    acc = acc * ip / (k as f64 + 1.0) + z.moments[k];
                }
                // acc = Σ μ_k (ip)^{k−first} first!/k!; restore the scaling.
                let mut scale = Complex64::new(1.0, 0.0);
                for k in 1..=z.first {
                    scale = scale * ip / k as f64;
                }
                total += w * acc * scale;
            }
        }
        total
    });
    for z in &zones {
        let p_max = std::f64::consts::PI * grid.n as f64 * (d as f64).sqrt() / grid.box_len;
        let mut last = z.moments[TERMS];
        for k in 1..=TERMS {
            last *= p_max / k as f64;
        }
        tail = tail.max(last.abs());
    }
    Ok((values, tail))
}

/// Panels of width at most `2h` on `[lo, hi]` times the angular rule.
fn middle_zone(
    spec: &OperatorSpec,
    grid: &GridSpec,
    lo: f64,
    hi: f64,
    order: usize,
    cfg: &QuadConfig,
) -> Result<Vec<Complex64>> {
    let d = grid.d;
    if hi <= lo {
        return Ok(vec![Complex64::new(0.0, 0.0); grid.len()]);
    }
    let a = spec.effective_coefficient();
    let chi = spec.chi();
    let rule = SphereRule::new(d, cfg)?;
    let gl = gauss_legendre(order);
    let width = 2.0 * grid.h();
    // (y, weight · a · J, χ)
    let mut nodes: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for w in cuts(spec, lo, hi).windows(2) {
        let panels = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        let step = (w[1] - w[0]) / panels as f64;
        let cell = a.radial_cell(0.5 * (w[0] + w[1]));
        let c = chi.at(0.5 * (w[0] + w[1]));
        for k in 0..panels {
            let (p0, p1) = (w[0] + k as f64 * step, w[0] + (k + 1) as f64 * step);
            for &(x, wx) in gl.iter() {
                let r = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * x;
                let radial = 0.5 * (p1 - p0) * wx * r.powi(d as i32 - 1) * spec.kernel.j(r);
                for (th, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let y: Vec<f64> = th.iter().map(|t| r * t).collect();
                    nodes.push((y, radial * wt * a.cell_value(cell, th), c));
                }
            }
        }
    }
    Ok(per_mode(grid, |xi| {
        let mut total = Complex64::new(0.0, 0.0);
        for (y, k, c) in &nodes {
            let p: f64 = xi.iter().zip(y).map(|(a, b)| a * b).sum();
            let (s, co) = p.sin_cos();
            total += Complex64::new(co - 1.0, s - c * p) * *k;
        }
        total
    }))
}

/// Evaluates `f(ξ)` on half of the lattice and fills the rest by
/// conjugation (every multiplier here is Hermitian).
fn per_mode(grid: &GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for idx in 0..grid.len() {
        let q = grid.partner(idx);
        if q < idx {
            out[idx] = out[q].conj();
        } else {
            out[idx] = f(&grid.wavevector(idx));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{stable_kernel, CoefficientConfig, CoefficientField};
    use crate::symbol::full_symbol;
    use std::f64::consts::PI;

    fn rel_l2(a: &GridFunction, b: &GridFunction) -> f64 {
        let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.values.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = GridSpec::new(1, 64, 16.0).unwrap();
        let spec = OperatorSpec::fractional(stable_kernel(1, 0.7).unwrap()).unwrap();
        let u = GridFunction::from_fn(grid, |_| 3.0);
        let direct = apply_direct(&spec, &u).unwrap();
        assert!(direct.output.max_abs() < 1e-9, "{}", direct.output.max_abs());
        let table = full_symbol(&spec, &grid).unwrap();
        assert!(apply_spectral(&table, &u).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let grid = GridSpec::new(1, 128, 8.0 * PI).unwrap();
        for alpha in [0.5, 1.0, 1.5] {
            let spec = OperatorSpec::fractional(stable_kernel(1, alpha).unwrap()).unwrap();
            let u = GridFunction::from_fn(grid, |x| x[0].cos());
            let want = u.map(|v| -v);
            let got = apply_direct(&spec, &u).unwrap();
            assert!(rel_l2(&got.output, &want) < 1e-3, "alpha {alpha}: {}", rel_l2(&got.output, &want));
            assert!(got.warnings.is_empty());
        }
    }

    #[test]
    fn direct_and_spectral_agree_for_random_coefficients() {
        let grid = GridSpec::new(1, 128, 16.0).unwrap();
        let a = CoefficientField::new(CoefficientConfig::random(0.5, 2.0, 11), 1).unwrap();
        for (alpha, variant) in [(0.5, Variant::L), (1.5, Variant::LTilde), (0.7, Variant::LStar)] {
            let spec = OperatorSpec::new(stable_kernel(1, alpha).unwrap(), a.clone(), variant).unwrap();
            let u = GridFunction::from_fn(grid, |x| (-(x[0] * x[0]) / 2.0).exp() * (1.0 + 0.3 * x[0]));
            let direct = apply_direct(&spec, &u).unwrap();
            let spectral = apply_spectral(&full_symbol(&spec, &grid).unwrap(), &u).unwrap();
            let e = rel_l2(&direct.output, &spectral);
            assert!(e < 1e-3, "alpha {alpha} {variant:?}: {e}");
            assert!(direct.error_budget < 1e-3);
        }
    }

    #[test]
    fn band_limit_warning() {
        let grid = GridSpec::new(1, 64, 16.0).unwrap();
        let spec = OperatorSpec::fractional(stable_kernel(1, 0.7).unwrap()).unwrap();
        let u = GridFunction::from_fn(grid, |x| (x[0] * 2.0 * PI * 28.0 / 16.0).cos());
        assert!(!apply_direct(&spec, &u).unwrap().warnings.is_empty());
    }

    #[test]
    fn spectral_is_linear() {
        let grid = GridSpec::new(1, 64, 16.0).unwrap();
        let a = CoefficientField::new(CoefficientConfig::Sign { base: 1.0, amp: 0.4 }, 1).unwrap();
        let spec = OperatorSpec::new(stable_kernel(1, 0.6).unwrap(), a, Variant::L).unwrap();
        let table = full_symbol(&spec, &grid).unwrap();
        let u = GridFunction::from_fn(grid, |x| x[0].sin());
        let v = GridFunction::from_fn(grid, |x| (-(x[0] * x[0])).exp());
        let lhs = apply_spectral(&table, &u.axpby(2.0, &v, -3.0).unwrap()).unwrap();
        let rhs = apply_spectral(&table, &u)
            .unwrap()
            .axpby(2.0, &apply_spectral(&table, &v).unwrap(), -3.0)
            .unwrap();
        assert!(lhs.axpby(1.0, &rhs, -1.0).unwrap().max_abs() < 1e-12);
    }
}
