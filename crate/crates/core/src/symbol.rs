//! Fourier multipliers of the operators.
//!
//! Everything reduces to radial transforms of the weight `w(r) = r^{d−1} j(r)`
//! over radial pieces on which the coefficient, the compensator and the
//! kernel are smooth:
//!
//! `F(p) = ∫_lo^hi w(r) (e^{irp} − 1 − irpχ) dr`,
//!
//! and `m(ξ) = Σ_θ w_θ a(r, θ) F(ξ·θ)` over an angular rule. In d = 1 the
//! transforms are evaluated at the exact lattice frequencies; in higher
//! dimensions they are tabulated once per kernel and grid and interpolated.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldops::GridSpec;
use crate::kernel::{
    coefficient::{angular_cell, angular_cells},
    ChiRegime, CoefficientConfig, CoefficientField, KernelConfig, OperatorSpec, RadialJumpKernel, Variant,
};
use crate::quad::{gauss_legendre, oscillatory_integral, radial_integral, QuadConfig, SphereRule};

/// Multiplier values `m(ξ_k)` in FFT order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolTable {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub variant: Variant,
}

impl SymbolTable {
    /// `max Re m`, which must not be positive.
    pub fn max_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |m(−ξ) − conj m(ξ)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[self.grid.partner(i)] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn weight(kernel: &RadialJumpKernel) -> impl Fn(f64) -> f64 + '_ {
    let dm1 = kernel.dim() as f64 - 1.0;
    move |r: f64| (dm1 * r.ln() + kernel.ln_j(r)).exp()
}

/// `sin t − t` without cancellation for small `t`.
fn sin_minus_t(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        -t * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))
    } else {
        t.sin() - t
    }
}

/// `∫_lo^hi w (e^{irp} − 1 − irpχ)` for `hi ≲ 1/p`, where nothing oscillates.
fn near_part(kernel: &RadialJumpKernel, lo: f64, hi: f64, chi: f64, p: f64, cfg: &QuadConfig) -> Result<Complex64> {
    let w = weight(kernel);
    let re = radial_integral(
        |r| {
            let s = (0.5 * r * p).sin();
            -2.0 * w(r) * s * s
        },
        lo,
        hi,
        cfg,
    )?;
    let im = radial_integral(
        |r| {
            let t = r * p;
            w(r) * if chi == 0.0 { t.sin() } else { sin_minus_t(t) + (1.0 - chi) * t }
        },
        lo,
        hi,
        cfg,
    )?;
    Ok(Complex64::new(re.value, im.value))
}

/// `∫_lo^hi w e^{irp} dr` for `lo > 0`, `p > 0`.
fn oscillating_part(kernel: &RadialJumpKernel, lo: f64, hi: f64, p: f64, cfg: &QuadConfig) -> Result<Complex64> {
    let w = weight(kernel);
    let mid = (2.0 * PI / p).clamp(lo, hi);
    let mut total = Complex64::new(0.0, 0.0);
    if mid > lo {
        let re = radial_integral(|r| w(r) * (r * p).cos(), lo, mid, cfg)?;
        let im = radial_integral(|r| w(r) * (r * p).sin(), lo, mid, cfg)?;
        total += Complex64::new(re.value, im.value);
    }
    if hi > mid {
        total += oscillatory_integral(&w, p, mid, hi, cfg)?.0;
    }
    Ok(total)
}

fn moment(kernel: &RadialJumpKernel, k: f64, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
    let w = weight(kernel);
    Ok(radial_integral(|r| r.powf(k) * w(r), lo, hi, cfg)?.value)
}

/// A radial interval on which the integrand is smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    chi: f64,
    cell: usize,
}

fn pieces(kernel: &RadialJumpKernel, edges: &[f64], chi: ChiRegime, cell_of: impl Fn(f64) -> usize) -> Vec<Piece> {
    let support = kernel.support_radius();
    let mut cuts = vec![0.0, 1.0];
    cuts.extend_from_slice(edges);
    cuts.extend(kernel.breakpoints());
    if support.is_finite() {
        cuts.push(support);
    }
    cuts.retain(|&c| c <= support);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    if support.is_infinite() {
        cuts.push(f64::INFINITY);
    }
    cuts.windows(2)
        .map(|w| {
            let mid = if w[1].is_finite() { 0.5 * (w[0] + w[1]) } else { 2.0 * w[0] + 1.0 };
            Piece {
                lo: w[0],
                hi: w[1],
                chi: chi.at(mid),
                cell: cell_of(w[0]),
            }
        })
        .collect()
}

/// `F(p)` for one piece and `p > 0`.
fn piece_transform(kernel: &RadialJumpKernel, piece: &Piece, p: f64, cfg: &QuadConfig) -> Result<Complex64> {
    if p == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let split = 1.0 / p;
    let mut total = Complex64::new(0.0, 0.0);
    if piece.lo < split {
        total += near_part(kernel, piece.lo, piece.hi.min(split), piece.chi, p, cfg)?;
    }
    if piece.hi > split {
        let a = piece.lo.max(split);
        let mass = moment(kernel, 0.0, a, piece.hi, cfg)?;
        let first = if piece.chi != 0.0 {
            piece.chi * moment(kernel, 1.0, a, piece.hi, cfg)?
        } else {
            0.0
        };
        total += oscillating_part(kernel, a, piece.hi, p, cfg)? - Complex64::new(mass, p * first);
    }
    Ok(total)
}

/// `G(q) = ∫_0^∞ w (1 − cos rq) dr`.
fn g_direct(kernel: &RadialJumpKernel, q: f64, cfg: &QuadConfig) -> Result<f64> {
    // χ only changes the imaginary part, and compensating inside the unit
    // ball keeps that part convergent for every admissible kernel.
    let ps = pieces(kernel, &[], ChiRegime::UnitBall, |_| 0);
    let mut total = 0.0;
    for piece in &ps {
        total -= piece_transform(kernel, piece, q, cfg)?.re;
    }
    Ok(total)
}

/// `ln G` on a uniform grid in `ln q`, cubic Hermite inside, linear outside.
#[derive(Debug)]
struct LogLogTable {
    x0: f64,
    dx: f64,
    y: Vec<f64>,
}

impl LogLogTable {
    fn eval(&self, q: f64) -> f64 {
        let n = self.y.len();
        let x = (q.ln() - self.x0) / self.dx;
        if x <= 0.0 {
            return (self.y[0] + x * (self.y[1] - self.y[0])).exp();
        }
        if x >= (n - 1) as f64 {
            return (self.y[n - 1] + (x - (n - 1) as f64) * (self.y[n - 1] - self.y[n - 2])).exp();
        }
        let i = x.floor() as usize;
        hermite(&self.y, i, x - i as f64).exp()
    }
}

/// Catmull-Rom step on samples `y` between `i` and `i + 1`.
fn hermite<T>(y: &[T], i: usize, t: f64) -> T
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = y.len();
    let m0 = if i == 0 { y[1] - y[0] } else { (y[i + 1] - y[i - 1]) * 0.5 };
    let m1 = if i + 2 >= n { y[i + 1] - y[i] } else { (y[i + 2] - y[i]) * 0.5 };
    let t2 = t * t;
    let t3 = t2 * t;
    y[i] * (2.0 * t3 - 3.0 * t2 + 1.0) + m0 * (t3 - 2.0 * t2 + t) + y[i + 1] * (-2.0 * t3 + 3.0 * t2) + m1 * (t3 - t2)
}

const G_LO: f64 = 1e-6;
const G_HI: f64 = 1e6;
const G_PER_DECADE: usize = 32;

fn g_table(kernel: &RadialJumpKernel, cfg: &QuadConfig) -> Result<Arc<LogLogTable>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<LogLogTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = format!("{}|{:?}", kernel.key(), cfg);
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let dx = std::f64::consts::LN_10 / G_PER_DECADE as f64;
    let x0 = G_LO.ln();
    let n = ((G_HI.ln() - x0) / dx).round() as usize + 1;
    let y = (0..n)
        .map(|i| g_direct(kernel, (x0 + i as f64 * dx).exp(), cfg).map(f64::ln))
        .collect::<Result<Vec<f64>>>()?;
    let table = Arc::new(LogLogTable { x0, dx, y });
    cache.lock().unwrap().insert(key, table.clone());
    Ok(table)
}

/// `∫_0^top f(u) du` on panels refined geometrically toward `u = 0`.
fn graded(top: f64, cfg: &QuadConfig, f: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre(cfg.gl_order);
    let mut total = 0.0;
    let mut hi = top;
    for _ in 0..52 {
        let lo = 0.5 * hi;
        total += crate::quad::gl_integrate(&rule, lo, hi, &f);
        hi = lo;
    }
    total
}

/// `Ψ` at `|ξ| = p` for a radial kernel.
pub fn psi_radial(kernel: &RadialJumpKernel, p: f64, cfg: &QuadConfig) -> Result<f64> {
    let p = p.abs();
    if p == 0.0 {
        return Ok(0.0);
    }
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!("frequency must be finite, got {p}")));
    }
    let cacheable = *cfg == QuadConfig::default();
    if cacheable {
        if let Some(v) = kernel.psi_cached(p) {
            return Ok(v);
        }
    }
    let v = match kernel.dim() {
        1 => 2.0 * g_direct(kernel, p, cfg)?,
        2 => {
            let g = g_table(kernel, cfg)?;
            4.0 * graded(FRAC_PI_2, cfg, |u| g.eval(p * u.sin()))
        }
        _ => {
            let g = g_table(kernel, cfg)?;
            4.0 * PI * graded(1.0, cfg, |t| g.eval(p * t))
        }
    };
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Quadrature {
            what: format!("psi at |xi| = {p:e}"),
            achieved: v,
        });
    }
    if cacheable {
        kernel.psi_store(p, v);
    }
    Ok(v)
}

/// `Ψ(ξ) = ∫ (1 − cos ξ·y) J(y) dy`.
pub fn psi(kernel: &RadialJumpKernel, xi: &[f64]) -> Result<f64> {
    if xi.len() != kernel.dim() {
        return Err(Error::InvalidInput(format!(
            "frequency has dimension {}, kernel has {}",
            xi.len(),
            kernel.dim()
        )));
    }
    psi_radial(kernel, xi.iter().map(|v| v * v).sum::<f64>().sqrt(), &QuadConfig::default())
}

/// Known closed forms: `|ξ|^α` for stable kernels, `φ(|ξ|²)` for
/// subordinate Brownian motion.
pub fn closed_form_psi(kernel: &RadialJumpKernel, p: f64) -> Option<f64> {
    match kernel.config() {
        KernelConfig::Stable { alpha } => Some(p.abs().powf(*alpha)),
        KernelConfig::Subordinate { phi } => Some(phi.eval(p * p)),
        _ => None,
    }
}

/// How the coefficient depends on the direction inside one radial cell.
#[derive(Debug, Clone, Copy, PartialEq)]
enum AngularBasis {
    Constant,
    /// `a = A₀ + A₁ g(θ₁)` with `g` odd.
    Odd { sign: bool },
    /// Constant on each angular cell.
    Cells { sectors: usize },
}

impl AngularBasis {
    fn of(a: &CoefficientField) -> Self {
        match a.config() {
            CoefficientConfig::Constant { .. } => AngularBasis::Constant,
            CoefficientConfig::Sign { .. } => AngularBasis::Odd { sign: true },
            CoefficientConfig::AngleCosine { .. } => AngularBasis::Odd { sign: false },
            CoefficientConfig::RandomCells { sectors, .. } => AngularBasis::Cells { sectors: *sectors },
        }
    }

    fn len(&self, d: usize) -> usize {
        match self {
            AngularBasis::Constant => 1,
            AngularBasis::Odd { .. } => 2,
            AngularBasis::Cells { sectors } => angular_cells(d, *sectors),
        }
    }

    /// Nonzero basis values at direction `theta`.
    fn values(&self, theta: &[f64]) -> Vec<(usize, f64)> {
        match self {
            AngularBasis::Constant => vec![(0, 1.0)],
            AngularBasis::Odd { sign } => {
                let g = if *sign { theta[0].signum() } else { theta[0] };
                vec![(0, 1.0), (1, g)]
            }
            AngularBasis::Cells { sectors } => vec![(angular_cell(theta.len(), *sectors, theta), 1.0)],
        }
    }

    /// Coefficients of `a` on radial cell `cell` in this basis.
    fn coefficients(&self, a: &CoefficientField, cell: usize) -> Vec<f64> {
        let d = a.dim();
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        match self {
            AngularBasis::Constant => vec![a.cell_value(cell, &e)],
            AngularBasis::Odd { .. } => {
                let plus = a.cell_value(cell, &e);
                e[0] = -1.0;
                let minus = a.cell_value(cell, &e);
                vec![0.5 * (plus + minus), 0.5 * (plus - minus)]
            }
            AngularBasis::Cells { sectors } => (0..self.len(d))
                .map(|s| a.cell_value(cell, &cell_representative(d, *sectors, s)))
                .collect(),
        }
    }
}

fn cell_representative(d: usize, sectors: usize, s: usize) -> Vec<f64> {
    match d {
        1 => vec![if s == 0 { 1.0 } else { -1.0 }],
        2 => {
            let t = (s as f64 + 0.5) * 2.0 * PI / sectors as f64;
            vec![t.cos(), t.sin()]
        }
        _ => {
            let t = ((s % sectors) as f64 + 0.5) * 2.0 * PI / sectors as f64;
            let z = if s < sectors { 0.6 } else { -0.6 };
            vec![0.8 * t.cos(), 0.8 * t.sin(), z]
        }
    }
}

/// Cubic interpolant of a complex function on a uniform or logarithmic grid.
#[derive(Debug)]
struct Curve {
    log: bool,
    x0: f64,
    dx: f64,
    y: Vec<Complex64>,
    /// Value at `p = 0` (log grids only).
    at_zero: Complex64,
}

impl Curve {
    fn eval(&self, p: f64) -> Complex64 {
        let x = if self.log {
            if p <= self.x0.exp() {
                let t = p / self.x0.exp();
                return self.at_zero + (self.y[0] - self.at_zero) * t;
            }
            (p.ln() - self.x0) / self.dx
        } else {
            (p - self.x0) / self.dx
        };
        let n = self.y.len();
        let x = x.clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        hermite(&self.y, i, x - i as f64)
    }
}

/// Interpolated `F` for one piece:
/// origin pieces store `F`; outer pieces store the demodulated
/// `Q(p) = e^{−icp} ∫ w e^{irp}` and add back `−W − ipχM₁`.
#[derive(Debug)]
struct PieceCurve {
    piece: Piece,
    mass: f64,
    first: f64,
    centre: f64,
    curve: Curve,
}

impl PieceCurve {
    fn build(kernel: &RadialJumpKernel, piece: Piece, p_min: f64, p_top: f64, cfg: &QuadConfig) -> Result<Self> {
        let base = p_top / 256.0;
        if piece.lo == 0.0 {
            let dx = base.min(0.15 / piece.hi);
            let n = (p_top / dx).ceil() as usize + 1;
            let y = (0..n)
                .map(|i| piece_transform(kernel, &piece, i as f64 * dx, cfg))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Self {
                piece,
                mass: 0.0,
                first: 0.0,
                centre: 0.0,
                curve: Curve {
                    log: false,
                    x0: 0.0,
                    dx,
                    y,
                    at_zero: Complex64::new(0.0, 0.0),
                },
            });
        }
        let mass = moment(kernel, 0.0, piece.lo, piece.hi, cfg)?;
        let first = if piece.chi != 0.0 {
            moment(kernel, 1.0, piece.lo, piece.hi, cfg)?
        } else {
            0.0
        };
        let demod = |c: f64, p: f64| -> Result<Complex64> {
            Ok(oscillating_part(kernel, piece.lo, piece.hi, p, cfg)? * Complex64::from_polar(1.0, -c * p))
        };
        if piece.hi.is_finite() {
            let centre = 0.5 * (piece.lo + piece.hi);
            let dx = base.min(0.3 / (piece.hi - piece.lo));
            let n = (p_top / dx).ceil() as usize + 1;
            let y = (0..n)
                .map(|i| {
                    if i == 0 {
                        Ok(Complex64::new(mass, 0.0))
                    } else {
                        demod(centre, i as f64 * dx)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Self {
                piece,
                mass,
                first,
                centre,
                curve: Curve {
                    log: false,
                    x0: 0.0,
                    dx,
                    y,
                    at_zero: Complex64::new(mass, 0.0),
                },
            })
        } else {
            let lo = 1e-3 * p_min;
            let dx = std::f64::consts::LN_10 / 32.0;
            let n = ((p_top / lo).ln() / dx).ceil() as usize + 1;
            let y = (0..n)
                .map(|i| demod(piece.lo, (lo.ln() + i as f64 * dx).exp()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Self {
                piece,
                mass,
                first,
                centre: piece.lo,
                curve: Curve {
                    log: true,
                    x0: lo.ln(),
                    dx,
                    y,
                    at_zero: Complex64::new(mass, 0.0),
                },
            })
        }
    }

    fn eval(&self, p: f64) -> Complex64 {
        let q = p.abs();
        let mut v = if self.piece.lo == 0.0 {
            self.curve.eval(q)
        } else {
            self.curve.eval(q) * Complex64::from_polar(1.0, self.centre * q)
                - Complex64::new(self.mass, q * self.piece.chi * self.first)
        };
        // Re F = −∫ w (1 − cos rp) ≤ 0 exactly.
        v.re = v.re.min(0.0);
        if p < 0.0 {
            v.conj()
        } else {
            v
        }
    }
}

/// Angular sums `S[ξ][cell][b] = Σ_θ w_θ β_b(θ) F_cell(ξ·θ)`, shared by all
/// coefficients with the same radial edges and angular structure.
#[derive(Debug)]
struct AngularSums {
    cells: usize,
    basis: usize,
    data: Vec<Complex64>,
}

fn angular_sums(
    kernel: &RadialJumpKernel,
    a: &CoefficientField,
    chi: ChiRegime,
    grid: &GridSpec,
    min_radius: f64,
    cfg: &QuadConfig,
) -> Result<Arc<AngularSums>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<AngularSums>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let basis = AngularBasis::of(a);
    let key = format!(
        "{}|{:?}|{:?}|{:?}|{:?}|{:e}|{:?}",
        kernel.key(),
        a.radial_edges(),
        basis,
        chi,
        grid,
        min_radius,
        cfg
    );
    if let Some(s) = cache.lock().unwrap().get(&key) {
        return Ok(s.clone());
    }
    let d = grid.d;
    let cells = a.radial_edges().len() + 1;
    let nb = basis.len(d);
    let mut cuts = a.radial_edges().to_vec();
    if min_radius > 0.0 {
        cuts.push(min_radius);
    }
    let mut ps = pieces(kernel, &cuts, chi, |r| a.radial_cell(r));
    ps.retain(|p| p.lo >= min_radius);
    let len = grid.len();
    let mut data = vec![Complex64::new(0.0, 0.0); len * cells * nb];
    let slot = |idx: usize, cell: usize, b: usize| (idx * cells + cell) * nb + b;
    if d == 1 {
        // Exact transforms at the lattice frequencies.
        let plus = basis.values(&[1.0]);
        let minus = basis.values(&[-1.0]);
        let mut done: HashMap<u64, Vec<Complex64>> = HashMap::new();
        for idx in 0..len {
            let p = grid.wavevector(idx)[0];
            if p == 0.0 {
                continue;
            }
            let q = p.abs();
            if !done.contains_key(&q.to_bits()) {
                let fs = ps
                    .iter()
                    .map(|piece| piece_transform(kernel, piece, q, cfg))
                    .collect::<Result<Vec<_>>>()?;
                done.insert(q.to_bits(), fs);
            }
            for (piece, &f) in ps.iter().zip(&done[&q.to_bits()]) {
                let (fp, fm) = if p > 0.0 { (f, f.conj()) } else { (f.conj(), f) };
                for &(b, v) in &plus {
                    data[slot(idx, piece.cell, b)] += fp * v;
                }
                for &(b, v) in &minus {
                    data[slot(idx, piece.cell, b)] += fm * v;
                }
            }
        }
    } else {
        let rule = SphereRule::new(d, cfg)?;
        let p_top = PI * grid.n as f64 * (d as f64).sqrt() / grid.box_len * 1.01;
        let p_min = 2.0 * PI / grid.box_len;
        let curves = ps
            .iter()
            .map(|&piece| PieceCurve::build(kernel, piece, p_min, p_top, cfg))
            .collect::<Result<Vec<_>>>()?;
        let nodes: Vec<(Vec<f64>, Vec<(usize, f64)>)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(th, &w)| (th.clone(), basis.values(th).into_iter().map(|(b, v)| (b, v * w)).collect()))
            .collect();
        for idx in 0..len {
            if grid.partner(idx) < idx {
                continue;
            }
            let xi = grid.wavevector(idx);
            if xi.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (th, bv) in &nodes {
                let p: f64 = xi.iter().zip(th).map(|(x, t)| x * t).sum();
                for c in &curves {
                    let f = c.eval(p);
                    for &(b, v) in bv {
                        data[slot(idx, c.piece.cell, b)] += f * v;
                    }
                }
            }
        }
    }
    // Negative frequencies by conjugation.
    for idx in 0..len {
        let q = grid.partner(idx);
        if d > 1 && q < idx {
            for k in 0..cells * nb {
                data[idx * cells * nb + k] = data[q * cells * nb + k].conj();
            }
        }
    }
    let sums = Arc::new(AngularSums { cells, basis: nb, data });
    cache.lock().unwrap().insert(key, sums.clone());
    Ok(sums)
}

/// Multiplier of the operator described by `spec` on the lattice of `grid`.
pub fn full_symbol(spec: &OperatorSpec, grid: &GridSpec) -> Result<SymbolTable> {
    full_symbol_with(spec, grid, &QuadConfig::default())
}

pub fn full_symbol_with(spec: &OperatorSpec, grid: &GridSpec, cfg: &QuadConfig) -> Result<SymbolTable> {
    if grid.d != spec.dim() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} differs from operator dimension {}",
            grid.d,
            spec.dim()
        )));
    }
    if spec.variant != Variant::A && spec.sigma_regime() == ChiRegime::UnitBall {
        let cert = crate::hypothesis::check_cancellation(spec, cfg)?;
        if !cert.passed() {
            return Err(Error::MissingCertificate(format!(
                "CANCEL: sigma = 1 requires the cancellation condition ({})",
                cert.notes.join("; ")
            )));
        }
    }
    let a = spec.effective_coefficient();
    let values = if a.is_constant() {
        let mut e = vec![0.0; grid.d];
        e[0] = 1.0;
        let value = a.cell_value(0, &e);
        constant_symbol(&spec.kernel, value, grid, cfg)?
    } else {
        general_symbol(spec, &a, grid, 0.0, cfg)?
    };
    Ok(SymbolTable {
        grid: *grid,
        values,
        variant: spec.variant,
    })
}

/// `−a Ψ(|ξ|)` for a constant coefficient.
fn constant_symbol(kernel: &RadialJumpKernel, a: f64, grid: &GridSpec, cfg: &QuadConfig) -> Result<Vec<Complex64>> {
    (0..grid.len())
        .map(|idx| Ok(Complex64::new(-a * psi_radial(kernel, grid.wavenumber(idx), cfg)?, 0.0)))
        .collect()
}

/// Contribution of jumps with `|y| ≥ min_radius` to the multiplier of `spec`.
pub(crate) fn far_field_multiplier(spec: &OperatorSpec, grid: &GridSpec, min_radius: f64, cfg: &QuadConfig) -> Result<Vec<Complex64>> {
    general_symbol(spec, &spec.effective_coefficient(), grid, min_radius, cfg)
}

fn general_symbol(
    spec: &OperatorSpec,
    a: &CoefficientField,
    grid: &GridSpec,
    min_radius: f64,
    cfg: &QuadConfig,
) -> Result<Vec<Complex64>> {
    let basis = AngularBasis::of(a);
    let sums = angular_sums(&spec.kernel, a, spec.chi(), grid, min_radius, cfg)?;
    let coef: Vec<Vec<f64>> = (0..sums.cells).map(|c| basis.coefficients(a, c)).collect();
    let stride = sums.cells * sums.basis;
    let mut values: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let row = &sums.data[idx * stride..(idx + 1) * stride];
            let mut m = Complex64::new(0.0, 0.0);
            for (c, cc) in coef.iter().enumerate() {
                for (b, &v) in cc.iter().enumerate() {
                    m += row[c * sums.basis + b] * v;
                }
            }
            m
        })
        .collect();
    for idx in 0..grid.len() {
        if grid.partner(idx) == idx {
            values[idx].im = 0.0;
        }
        values[idx].re = values[idx].re.min(0.0);
    }
    Ok(values)
}

/// Outcome of comparing `j(|ξ|)|ξ|^d` with `Ψ(1/|ξ|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolKernelBound {
    /// `sup j(|ξ|)|ξ|^d / Ψ(|ξ|⁻¹)` over the sample grid.
    pub sup_ratio: f64,
    /// Same on a grid of twice the density.
    pub sup_ratio_refined: f64,
    /// Empirical `C` in `j(s) ≥ C j(t)` for `s ≤ t`.
    pub comparability: f64,
    pub pass: bool,
}

fn bound_sup(kernel: &RadialJumpKernel, per_decade: usize) -> Result<f64> {
    let d = kernel.dim() as f64;
    let n = 4 * per_decade;
    let mut sup: f64 = 0.0;
    for i in 0..=n {
        let x = 10f64.powf(-2.0 + 4.0 * i as f64 / n as f64);
        let ratio = kernel.j(x) * x.powf(d) / psi_radial(kernel, 1.0 / x, &QuadConfig::default())?;
        sup = sup.max(ratio);
    }
    Ok(sup)
}

/// `sup_{|ξ| ∈ [1e−2, 1e2]} j(|ξ|)|ξ|^d / Ψ(|ξ|⁻¹)` with a refinement check.
pub fn check_symbol_kernel_bound(kernel: &RadialJumpKernel) -> Result<SymbolKernelBound> {
    let sup_ratio = bound_sup(kernel, 64)?;
    let sup_ratio_refined = bound_sup(kernel, 128)?;
    let samples: Vec<f64> = (0..=256).map(|i| kernel.j(10f64.powf(-2.0 + 4.0 * i as f64 / 256.0))).collect();
    let mut comparability: f64 = 1.0;
    let mut running_min = f64::INFINITY;
    // inf over s ≤ t of j(s)/j(t): scan t upward keeping min j(s) so far.
    for &v in &samples {
        if v > 0.0 {
            comparability = comparability.min(running_min / v);
        }
        running_min = running_min.min(v);
    }
    let stable = (sup_ratio_refined - sup_ratio).abs() <= 0.05 * sup_ratio.max(f64::MIN_POSITIVE);
    Ok(SymbolKernelBound {
        sup_ratio,
        sup_ratio_refined,
        comparability,
        pass: sup_ratio.is_finite() && stable && comparability > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{stable_kernel, subordinate_kernel, BernsteinFunction};

    #[test]
    fn stable_symbol_in_one_dimension() {
        for alpha in [0.5, 1.0, 1.5] {
            let k = stable_kernel(1, alpha).unwrap();
            for xi in [0.5, 1.0, 2.0, 4.0] {
                let v = psi(&k, &[xi]).unwrap();
                assert!((v / xi.powf(alpha) - 1.0).abs() < 1e-6, "alpha {alpha} xi {xi}: {v}");
            }
        }
    }

    #[test]
    fn stable_symbol_scales_in_higher_dimensions() {
        for d in [2, 3] {
            let k = stable_kernel(d, 0.7).unwrap();
            let mut xi = vec![0.0; d];
            xi[d - 1] = 3.0;
            let v = psi(&k, &xi).unwrap();
            assert!((v / 3f64.powf(0.7) - 1.0).abs() < 1e-5, "d {d}: {v}");
        }
    }

    #[test]
    fn psi_vanishes_at_zero() {
        let k = stable_kernel(2, 1.2).unwrap();
        assert_eq!(psi(&k, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn subordinate_symbol_matches_bernstein_function() {
        let phi = BernsteinFunction::Power { alpha: 0.5 };
        for d in [1, 2] {
            let k = subordinate_kernel(phi.clone(), d, &QuadConfig::default()).unwrap();
            for p in [0.3, 1.0, 5.0] {
                let v = psi_radial(&k, p, &QuadConfig::default()).unwrap();
                assert!((v / p - 1.0).abs() < 1e-4, "d {d} p {p}: {v}");
            }
        }
    }

    #[test]
    fn closed_forms() {
        let k = stable_kernel(1, 0.5).unwrap();
        assert_eq!(closed_form_psi(&k, 4.0), Some(2.0));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let y: Vec<f64> = (0..6).map(|i| (i as f64).powi(2)).collect();
        assert!((hermite(&y, 2, 0.5) - 6.25).abs() < 1e-12);
    }

    #[test]
    fn kernel_bound_is_flat_for_stable_kernels() {
        let k = stable_kernel(1, 0.8).unwrap();
        let r = check_symbol_kernel_bound(&k).unwrap();
        assert!(r.pass && r.comparability == 1.0);
        let c = crate::kernel::stable_normalization(1, 0.8).unwrap();
        assert!((r.sup_ratio / c - 1.0).abs() < 1e-6, "{r:?}");
    }
}
