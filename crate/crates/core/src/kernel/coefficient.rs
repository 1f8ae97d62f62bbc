//! Bounded measurable coefficients `a(y)` with `ν ≤ a ≤ Λ`.
//!
//! Every field is piecewise constant in the radius: `radial_edges()` lists the
//! radii where it may jump, and on each radial cell it depends only on the
//! direction `y/|y|`. Quadratures split at those edges.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_sectors() -> usize {
    8
}

/// How a coefficient field is described in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientConfig {
    Constant {
        value: f64,
    },
    /// `base + amp · sign(y¹)`.
    Sign { base: f64, amp: f64 },
    /// `base + amp · y¹/|y|`.
    AngleCosine { base: f64, amp: f64 },
    /// Independent uniform values in `[nu, lambda]` on radial × angular
    /// cells. Radial cells have dyadic edges `2^i`, `i = -6..=6`; angular
    /// cells are the two half-lines (d = 1), `sectors` circular sectors
    /// (d = 2) or `sectors` azimuthal sectors per hemisphere (d = 3).
    RandomCells {
        nu: f64,
        lambda: f64,
        seed: u64,
        #[serde(default = "default_sectors")]
        sectors: usize,
        #[serde(default)]
        even_inside: bool,
        #[serde(default)]
        even_outside: bool,
    },
}

impl CoefficientConfig {
    pub fn random(nu: f64, lambda: f64, seed: u64) -> Self {
        Self::RandomCells {
            nu,
            lambda,
            seed,
            sectors: default_sectors(),
            even_inside: false,
            even_outside: false,
        }
    }

    pub fn random_even(nu: f64, lambda: f64, seed: u64) -> Self {
        Self::RandomCells {
            nu,
            lambda,
            seed,
            sectors: default_sectors(),
            even_inside: true,
            even_outside: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientField {
    d: usize,
    config: CoefficientConfig,
    edges: Vec<f64>,
    /// `values[radial_cell][angular_cell]` for `RandomCells`.
    values: Vec<Vec<f64>>,
    reflected: bool,
}

fn dyadic_edges() -> Vec<f64> {
    (-6..=6).map(|i| 2f64.powi(i)).collect()
}

impl CoefficientField {
    pub fn new(config: CoefficientConfig, d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        let bad = |m: String| Err(Error::InvalidInput(m));
        let (mut edges, mut values) = (Vec::new(), Vec::new());
        match &config {
            CoefficientConfig::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return bad(format!("constant coefficient must be positive, got {value}"));
                }
            }
            CoefficientConfig::Sign { base, amp } | CoefficientConfig::AngleCosine { base, amp } => {
                if !(base - amp.abs() > 0.0 && (base + amp.abs()).is_finite()) {
                    return bad(format!("base {base} ± amp {amp} must stay positive"));
                }
            }
            CoefficientConfig::RandomCells {
                nu,
                lambda,
                seed,
                sectors,
                even_inside,
                even_outside,
            } => {
                if !(*nu > 0.0 && nu <= lambda && lambda.is_finite()) {
                    return bad(format!("need 0 < nu <= lambda, got nu = {nu}, lambda = {lambda}"));
                }
                if d >= 2 && (*sectors < 2 || sectors % 2 != 0 || 256 % sectors != 0) {
                    return bad(format!("sectors must be an even divisor of 256, got {sectors}"));
                }
                edges = dyadic_edges();
                let n_ang = angular_cells(d, *sectors);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                values = (0..=edges.len())
                    .map(|_| (0..n_ang).map(|_| rng.gen_range(*nu..=*lambda)).collect::<Vec<f64>>())
                    .collect();
                for (c, row) in values.iter_mut().enumerate() {
                    // cell c covers radii below edges[c]; edge index of 1.0 is 6
                    let inside = c <= 6;
                    if (inside && *even_inside) || (!inside && *even_outside) {
                        for a in 0..n_ang {
                            let o = opposite_cell(d, *sectors, a);
                            if o > a {
                                row[o] = row[a];
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            d,
            config,
            edges,
            values,
            reflected: false,
        })
    }

    /// The field `y ↦ a(−y)`.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.reflected = !self.reflected;
        out
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn config(&self) -> &CoefficientConfig {
        &self.config
    }

    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    /// Lower bound `ν`.
    pub fn nu(&self) -> f64 {
        match &self.config {
            CoefficientConfig::Constant { value } => *value,
            CoefficientConfig::Sign { base, amp } | CoefficientConfig::AngleCosine { base, amp } => base - amp.abs(),
            CoefficientConfig::RandomCells { nu, .. } => *nu,
        }
    }

    /// Upper bound `Λ`.
    pub fn lambda(&self) -> f64 {
        match &self.config {
            CoefficientConfig::Constant { value } => *value,
            CoefficientConfig::Sign { base, amp } | CoefficientConfig::AngleCosine { base, amp } => base + amp.abs(),
            CoefficientConfig::RandomCells { lambda, .. } => *lambda,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.config {
            CoefficientConfig::RandomCells { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.config {
            CoefficientConfig::Constant { .. } => true,
            CoefficientConfig::Sign { amp, .. } | CoefficientConfig::AngleCosine { amp, .. } => *amp == 0.0,
            CoefficientConfig::RandomCells { nu, lambda, .. } => nu == lambda,
        }
    }

    /// `a(y) = a(−y)` for `|y| ≤ 1`.
    pub fn even_inside(&self) -> bool {
        self.is_constant()
            || matches!(self.config, CoefficientConfig::RandomCells { even_inside: true, .. })
    }

    /// `a(y) = a(−y)` for `|y| ≥ 1`.
    pub fn even_outside(&self) -> bool {
        self.is_constant()
            || matches!(self.config, CoefficientConfig::RandomCells { even_outside: true, .. })
    }

    pub fn is_even(&self) -> bool {
        self.even_inside() && self.even_outside()
    }

    /// Interior radii where the field may jump (sorted).
    pub fn radial_edges(&self) -> &[f64] {
        &self.edges
    }

    /// Index of the radial cell containing `r`.
    pub fn radial_cell(&self, r: f64) -> usize {
        self.edges.partition_point(|&e| e <= r)
    }

    /// Value on radial cell `cell` in unit direction `theta`.
    pub fn cell_value(&self, cell: usize, theta: &[f64]) -> f64 {
        let flip;
        let theta = if self.reflected {
            flip = theta.iter().map(|v| -v).collect::<Vec<f64>>();
            &flip[..]
        } else {
            theta
        };
        match &self.config {
            CoefficientConfig::Constant { value } => *value,
            CoefficientConfig::Sign { base, amp } => {
                base + amp * if theta[0] > 0.0 {
                    1.0
                } else if theta[0] < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            CoefficientConfig::AngleCosine { base, amp } => base + amp * theta[0],
            CoefficientConfig::RandomCells { sectors, .. } => {
                self.values[cell][angular_cell(self.d, *sectors, theta)]
            }
        }
    }

    /// `a(y)` for `y ≠ 0`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let theta: Vec<f64> = y.iter().map(|v| v / r).collect();
        self.cell_value(self.radial_cell(r), &theta)
    }
}

pub(crate) fn angular_cells(d: usize, sectors: usize) -> usize {
    match d {
        1 => 2,
        2 => sectors,
        _ => 2 * sectors,
    }
}

fn sector_of(x: f64, y: f64, sectors: usize) -> usize {
    let mut t = y.atan2(x);
    if t < 0.0 {
        t += 2.0 * PI;
    }
    ((t / (2.0 * PI) * sectors as f64).floor() as usize).min(sectors - 1)
}

pub(crate) fn angular_cell(d: usize, sectors: usize, theta: &[f64]) -> usize {
    match d {
        1 => usize::from(theta[0] < 0.0),
        2 => sector_of(theta[0], theta[1], sectors),
        _ => sector_of(theta[0], theta[1], sectors) + sectors * usize::from(theta[2] < 0.0),
    }
}

fn opposite_cell(d: usize, sectors: usize, cell: usize) -> usize {
    match d {
        1 => 1 - cell,
        2 => (cell + sectors / 2) % sectors,
        _ => {
            let (s, h) = (cell % sectors, cell / sectors);
            (s + sectors / 2) % sectors + sectors * (1 - h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{QuadConfig, SphereRule};

    fn sample_points(d: usize) -> Vec<Vec<f64>> {
        let rule = SphereRule::new(d, &QuadConfig::default()).unwrap();
        let radii = [0.003, 0.02, 0.3, 0.9, 1.0, 1.7, 9.0, 100.0];
        let mut pts = Vec::new();
        for th in &rule.nodes {
            for r in radii {
                pts.push(th.iter().map(|v| v * r).collect());
            }
        }
        pts
    }

    #[test]
    fn random_fields_respect_bounds_and_seed() {
        for d in 1..=3 {
            let a = CoefficientField::new(CoefficientConfig::random(0.5, 2.0, 7), d).unwrap();
            let b = CoefficientField::new(CoefficientConfig::random(0.5, 2.0, 7), d).unwrap();
            for y in sample_points(d) {
                let v = a.eval(&y);
                assert!((0.5..=2.0).contains(&v));
                assert_eq!(v, b.eval(&y));
            }
        }
    }

    #[test]
    fn symmetry_flags_hold_exactly() {
        for d in 1..=3 {
            let cfg = CoefficientConfig::RandomCells {
                nu: 0.5,
                lambda: 2.0,
                seed: 3,
                sectors: 8,
                even_inside: true,
                even_outside: false,
            };
            let a = CoefficientField::new(cfg, d).unwrap();
            let mut odd_outside = false;
            for y in sample_points(d) {
                let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                if r < 1.0 {
                    assert_eq!(a.eval(&y), a.eval(&neg));
                } else if a.eval(&y) != a.eval(&neg) {
                    odd_outside = true;
                }
            }
            assert!(odd_outside, "d={d}: unflagged region should not be even");
            let full = CoefficientField::new(CoefficientConfig::random_even(0.5, 2.0, 3), d).unwrap();
            for y in sample_points(d) {
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                assert_eq!(full.eval(&y), full.eval(&neg));
            }
        }
    }

    #[test]
    fn reflection_flips_direction() {
        let a = CoefficientField::new(CoefficientConfig::Sign { base: 1.5, amp: 0.5 }, 1).unwrap();
        assert_eq!(a.eval(&[0.3]), 2.0);
        assert_eq!(a.reflected().eval(&[0.3]), 1.0);
        assert_eq!((a.nu(), a.lambda()), (1.0, 2.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(CoefficientField::new(CoefficientConfig::random(2.0, 1.0, 0), 1).is_err());
        assert!(CoefficientField::new(CoefficientConfig::Sign { base: 0.4, amp: 0.5 }, 1).is_err());
        let cfg = CoefficientConfig::RandomCells {
            nu: 1.0,
            lambda: 2.0,
            seed: 0,
            sectors: 6,
            even_inside: false,
            even_outside: false,
        };
        assert!(CoefficientField::new(cfg, 2).is_err());
    }
}
