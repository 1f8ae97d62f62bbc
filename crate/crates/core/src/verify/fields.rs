//! Seeded random data for the verification ensembles.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fieldops::{idft, GridFunction, GridSpec, Spectrum};

/// Sign pattern of the amplitudes in [`bump_field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signs {
    Mixed,
    Negative,
}

/// Where the bumps of [`bump_field`] sit and how wide they are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpLayout {
    pub count: usize,
    /// Centers have norm in `[inner, outer]`.
    pub inner: f64,
    pub outer: f64,
    pub width: (f64, f64),
    pub signs: Signs,
}

impl BumpLayout {
    /// Gaussians of width `B/64 .. B/32` centered in the central eighth.
    pub fn central(grid: &GridSpec, signs: Signs) -> Self {
        let b = grid.box_len;
        Self {
            count: 4,
            inner: 0.0,
            outer: b / 8.0,
            width: (b / 64.0, b / 32.0),
            signs,
        }
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_center(d: usize, inner: f64, outer: f64, rng: &mut impl Rng) -> Vec<f64> {
    let dir: Vec<f64> = loop {
        let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            break v.iter().map(|x| x / n).collect();
        }
    };
    let r = inner + (outer - inner) * rng.gen::<f64>();
    dir.iter().map(|x| r * x).collect()
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Sum of Gaussian bumps `a_i exp(−|x − c_i|² / 2w_i²)`.
pub fn bump_field(grid: GridSpec, seed: u64, layout: &BumpLayout) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..layout.count)
        .map(|_| {
            let c = random_center(grid.d, layout.inner, layout.outer, &mut rng);
            let w = layout.width.0 + (layout.width.1 - layout.width.0) * rng.gen::<f64>();
            let a = normal(&mut rng);
            let a = match layout.signs {
                Signs::Mixed => a,
                Signs::Negative => -a.abs() - 0.1,
            };
            (c, w, a)
        })
        .collect();
    GridFunction::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| a * (-dist2(x, c) / (2.0 * w * w)).exp())
            .sum()
    })
}

/// Sum of `C³` bumps `a_i (1 − |x − c_i|²/ρ_i²)₊⁴` supported in `B_R`.
pub fn compact_field(grid: GridSpec, seed: u64, radius: f64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let rho = radius * (0.25 + 0.25 * rng.gen::<f64>());
            let c = random_center(grid.d, 0.0, radius - rho, &mut rng);
            (c, rho, normal(&mut rng))
        })
        .collect();
    GridFunction::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, rho, a)| {
                let t = 1.0 - dist2(x, c) / (rho * rho);
                if t > 0.0 {
                    a * t.powi(4)
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// Real field with random modes `|k_a| ≤ k_max`, amplitudes `N(0,1)/(1+|k|)`.
pub fn band_limited_field(grid: GridSpec, seed: u64, k_max: usize) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let volume = grid.box_len.powi(grid.d as i32);
    for idx in 0..grid.len() {
        let k = grid.mode(idx);
        let q = grid.partner(idx);
        if q < idx || k[..grid.d].iter().any(|v| v.unsigned_abs() as usize > k_max) {
            continue;
        }
        let norm = k[..grid.d].iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
        let amp = volume / (1.0 + norm);
        let z = if q == idx {
            Complex64::new(normal(&mut rng), 0.0)
        } else {
            Complex64::new(normal(&mut rng), normal(&mut rng))
        } * amp;
        values[idx] = z;
        values[q] = z.conj();
    }
    idft(&Spectrum { grid, values })
}

/// Derived per-trial seed.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldops::dft;
    use crate::operator::top_octave_energy;

    #[test]
    fn fields_are_reproducible_and_shaped() {
        let grid = GridSpec::new(1, 256, 64.0).unwrap();
        let a = bump_field(grid, 4, &BumpLayout::central(&grid, Signs::Negative));
        assert_eq!(a, bump_field(grid, 4, &BumpLayout::central(&grid, Signs::Negative)));
        assert!(a.values.iter().all(|v| *v <= 0.0));
        assert!(top_octave_energy(&a) < 1e-12);
        let c = compact_field(grid, 2, 1.0);
        for (i, v) in c.values.iter().enumerate() {
            if grid.point(i)[0].abs() > 1.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn band_limited_field_has_no_high_modes() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let u = band_limited_field(grid, 1, 4);
        let s = dft(&u);
        for (idx, v) in s.values.iter().enumerate() {
            if grid.mode(idx)[..2].iter().any(|k| k.abs() > 4) {
                assert!(v.norm() < 1e-9);
            }
        }
        assert!(u.max_abs() > 0.0);
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
    }
}
