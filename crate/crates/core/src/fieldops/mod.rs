//! Periodic grid functions, the discrete Fourier transform and the analysis
//! functionals the estimates are stated in.
//!
//! The torus is `[−B/2, B/2)^d` with `n` points per axis. The transform is
//! normalized to approximate the whole-space one,
//! `û(ξ) = h^d Σ_x u(x) e^{−iξ·x}`, so that
//! `h^d Σ |u|² = B^{−d} Σ |û|²`.

pub mod analysis;
pub mod cone;

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{
    holder_seminorm, lp_norm, maximal_function, mean_oscillation, osc, sharp_function, weighted_l1_norm, Ball,
    HolderEstimate, RadiusSweep,
};
pub use cone::{cone_convexity_check, max_admissible_eta, ConeKernel, ConeReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, box_len: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!("n must be a power of two >= 8, got {n}")));
        }
        if !(box_len > 0.0 && box_len.is_finite()) {
            return Err(Error::InvalidInput(format!("box must be positive, got {box_len}")));
        }
        Ok(Self { d, n, box_len })
    }

    /// Grid spacing `h = B/n`.
    pub fn h(&self) -> f64 {
        self.box_len / self.n as f64
    }

    /// Number of lattice points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut m = [0; 3];
        let mut rest = idx;
        for a in (0..self.d).rev() {
            m[a] = rest % self.n;
            rest /= self.n;
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of lattice point `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        let h = self.h();
        (0..self.d).map(|a| -0.5 * self.box_len + m[a] as f64 * h).collect()
    }

    /// Index of the lattice point nearest to `x` (periodically wrapped).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let h = self.h();
        let m: Vec<usize> = x
            .iter()
            .map(|&v| (((v + 0.5 * self.box_len) / h).round() as i64).rem_euclid(self.n as i64) as usize)
            .collect();
        self.flat_index(&m)
    }

    /// Signed integer frequency per axis for spectrum index `idx`.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let m = self.multi_index(idx);
        let mut k = [0i64; 3];
        for a in 0..self.d {
            let v = m[a] as i64;
            k[a] = if v < (self.n / 2) as i64 { v } else { v - self.n as i64 };
        }
        k
    }

    /// Lattice frequency `ξ_k = 2πk/B`.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        let k = self.mode(idx);
        let s = 2.0 * std::f64::consts::PI / self.box_len;
        (0..self.d).map(|a| s * k[a] as f64).collect()
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.wavevector(idx).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Index of `−ξ` (the Nyquist plane maps to itself).
    pub fn partner(&self, idx: usize) -> usize {
        let m = self.multi_index(idx);
        let p: Vec<usize> = (0..self.d).map(|a| (self.n - m[a]) % self.n).collect();
        self.flat_index(&p)
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Real samples on a periodic grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    /// `Σ u v h^d`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Writes the JSON header to `path` and the raw little-endian payload to
    /// a sibling file with extension `f64`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let data = path.with_extension("f64");
        let header = GridFileHeader {
            d: self.grid.d,
            n: self.grid.n,
            box_len: self.grid.box_len,
            dtype: "f64".into(),
            order: "row-major".into(),
            data: data.file_name().map(|s| s.to_string_lossy().into_owned()),
        };
        fs::write(path, serde_json::to_string_pretty(&header)? + "\n")?;
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(&data)?.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let header: GridFileHeader = serde_json::from_str(&fs::read_to_string(path)?)?;
        if header.dtype != "f64" || header.order != "row-major" {
            return Err(Error::InvalidInput(format!(
                "unsupported grid file layout dtype={} order={}",
                header.dtype, header.order
            )));
        }
        let grid = GridSpec::new(header.d, header.n, header.box_len)?;
        let data: PathBuf = match &header.data {
            Some(name) => path.with_file_name(name),
            None => path.with_extension("f64"),
        };
        let mut bytes = Vec::new();
        fs::File::open(&data)?.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * grid.len() {
            return Err(Error::GridMismatch(format!(
                "payload has {} bytes, header implies {}",
                bytes.len(),
                8 * grid.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridFunction::new(grid, values)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridFileHeader {
    d: usize,
    n: usize,
    #[serde(rename = "box")]
    box_len: f64,
    dtype: String,
    order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<String>,
}

/// Complex spectrum on the lattice frequencies, FFT index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    /// Pointwise product with a multiplier given per index.
    pub fn multiply(&self, m: &[Complex64]) -> Result<Spectrum> {
        if m.len() != self.values.len() {
            return Err(Error::GridMismatch("multiplier length differs from spectrum".into()));
        }
        Ok(Spectrum {
            grid: self.grid,
            values: self.values.iter().zip(m).map(|(a, b)| a * b).collect(),
        })
    }
}

/// In-place multidimensional FFT (unnormalized).
fn fft_nd(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let total = data.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        // gather lines along `axis` contiguously
        let block = stride * n;
        let mut line = 0;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for k in 0..n {
                    buf[line * n + k] = data[base + k * stride];
                }
                line += 1;
            }
        }
        fft.process(&mut buf);
        line = 0;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for k in 0..n {
                    data[base + k * stride] = buf[line * n + k];
                }
                line += 1;
            }
        }
    }
}

/// `(−1)^{Σk}` from the half-box offset of the lattice.
fn phase(grid: &GridSpec, idx: usize) -> f64 {
    let m = grid.multi_index(idx);
    let s: usize = m[..grid.d].iter().sum();
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn dft(u: &GridFunction) -> Spectrum {
    let g = u.grid;
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, g.n, g.d, false);
    let s = g.cell_volume();
    for (i, v) in data.iter_mut().enumerate() {
        *v *= s * phase(&g, i);
    }
    Spectrum { grid: g, values: data }
}

/// Inverse transform, complex valued.
pub fn idft_complex(spec: &Spectrum) -> Vec<Complex64> {
    let g = spec.grid;
    let mut data: Vec<Complex64> = spec
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * phase(&g, i))
        .collect();
    fft_nd(&mut data, g.n, g.d, true);
    let s = 1.0 / g.box_len.powi(g.d as i32);
    for v in data.iter_mut() {
        *v *= s;
    }
    data
}

/// Inverse transform; the imaginary part is discarded.
pub fn idft(spec: &Spectrum) -> GridFunction {
    GridFunction {
        grid: spec.grid,
        values: idft_complex(spec).into_iter().map(|v| v.re).collect(),
    }
}

/// Trigonometric interpolant of `u` at an arbitrary point `x`. Exact at
/// grid points; the Nyquist modes contribute their cosine part only.
pub fn interpolate(u: &GridFunction, x: &[f64]) -> f64 {
    let g = u.grid;
    let s = dft(u);
    let sum: f64 = s
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let t: f64 = g.wavevector(i).iter().zip(x).map(|(k, y)| k * y).sum();
            (v * Complex64::from_polar(1.0, t)).re
        })
        .sum();
    sum / g.box_len.powi(g.d as i32)
}
