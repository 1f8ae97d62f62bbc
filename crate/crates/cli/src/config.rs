//! Run configuration: one JSON file with a section per subcommand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nonlocal_core::fieldops::{GridFunction, GridSpec};
use nonlocal_core::kernel::{CoefficientConfig, KernelConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_kernel")]
    pub kernel: KernelConfig,
    #[serde(default = "unit_coefficient")]
    pub coefficient: CoefficientConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: default_kernel(),
            coefficient: unit_coefficient(),
            grid: GridConfig::default(),
            solve: SolveConfig::default(),
            verify: VerifyConfig::default(),
            mc: McConfig::default(),
            output: default_output(),
            seed: default_seed(),
        }
    }
}

fn default_kernel() -> KernelConfig {
    KernelConfig::Stable { alpha: 1.0 }
}

fn unit_coefficient() -> CoefficientConfig {
    CoefficientConfig::Constant { value: 1.0 }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    20240601
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            d: 1,
            n: 512,
            box_len: 64.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Resolvent,
    Semigroup,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Exponents of the norms reported in the diagnostics.
    #[serde(default = "default_ps")]
    pub ps: Vec<f64>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_method")]
    pub method: MethodChoice,
    #[serde(default)]
    pub data: DataSpec,
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0]
}

fn default_ps() -> Vec<f64> {
    vec![2.0]
}

fn default_variant() -> Variant {
    Variant::L
}

fn default_method() -> MethodChoice {
    MethodChoice::Resolvent
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            ps: default_ps(),
            variant: default_variant(),
            method: default_method(),
            data: DataSpec::default(),
        }
    }
}

/// Right-hand side: a named analytic profile or a grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `amplitude · cos(ξ·x)`; `ξ` must be a lattice frequency.
    Cosine { frequency: Vec<f64>, amplitude: f64 },
    /// `amplitude · exp(−|x − center|²/2w²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Constant { value: f64 },
    File { path: PathBuf },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            center: None,
        }
    }
}

impl DataSpec {
    /// Pointwise evaluation; `None` for grid files.
    pub fn evaluator(&self, d: usize) -> Option<Box<dyn Fn(&[f64]) -> f64 + Sync>> {
        match self.clone() {
            DataSpec::Cosine { frequency, amplitude } => Some(Box::new(move |x: &[f64]| {
                amplitude * x.iter().zip(&frequency).map(|(a, b)| a * b).sum::<f64>().cos()
            })),
            DataSpec::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let c = center.unwrap_or_else(|| vec![0.0; d]);
                Some(Box::new(move |x: &[f64]| {
                    let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                    amplitude * (-r2 / (2.0 * width * width)).exp()
                }))
            }
            DataSpec::Constant { value } => Some(Box::new(move |_: &[f64]| value)),
            DataSpec::File { .. } => None,
        }
    }

    /// Samples the profile on `grid`, or reads the grid file relative to
    /// `base`.
    pub fn sample(&self, grid: GridSpec, base: &Path) -> Result<GridFunction, CliError> {
        match self {
            DataSpec::File { path } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let u = GridFunction::read(&path)?;
                if u.grid != grid {
                    return Err(CliError::Config {
                        path: "solve.data.path".into(),
                        message: format!("grid file has {:?}, config has {:?}", u.grid, grid),
                    });
                }
                Ok(u)
            }
            _ => {
                let f = self.evaluator(grid.d).expect("analytic profile");
                Ok(GridFunction::from_fn(grid, |x| f(x)))
            }
        }
    }

    fn validate(&self, at: &str, grid: &GridConfig) -> Result<(), CliError> {
        let bad = |field: &str, message: String| CliError::Config {
            path: format!("{at}.{field}"),
            message,
        };
        match self {
            DataSpec::Cosine { frequency, amplitude } => {
                if frequency.len() != grid.d {
                    return Err(bad("frequency", format!("needs {} components", grid.d)));
                }
                for (a, xi) in frequency.iter().enumerate() {
                    let k = xi * grid.box_len / (2.0 * PI);
                    if !xi.is_finite() || (k - k.round()).abs() > 1e-9 {
                        return Err(bad(
                            &format!("frequency[{a}]"),
                            format!("{xi} is not a multiple of 2π/box"),
                        ));
                    }
                }
                finite(amplitude, || bad("amplitude", "must be finite".into()))
            }
            DataSpec::Gaussian {
                amplitude,
                width,
                center,
            } => {
                finite(amplitude, || bad("amplitude", "must be finite".into()))?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(bad("width", format!("must be positive, got {width}")));
                }
                match center {
                    Some(c) if c.len() != grid.d => Err(bad("center", format!("needs {} components", grid.d))),
                    _ => Ok(()),
                }
            }
            DataSpec::Constant { value } => finite(value, || bad("value", "must be finite".into())),
            DataSpec::File { .. } => Ok(()),
        }
    }
}

fn finite(v: &f64, err: impl FnOnce() -> CliError) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(err())
    }
}

/// Overrides of the per-suite default ensembles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub ps: Option<Vec<f64>>,
    #[serde(default)]
    pub variants: Option<Vec<Variant>>,
    /// Use the config's grid instead of the suite default.
    #[serde(default)]
    pub use_config_grid: bool,
    #[serde(default)]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_points")]
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_mc_lambda")]
    pub lambda: f64,
    /// Falls back to `solve.data`.
    #[serde(default)]
    pub data: Option<DataSpec>,
    /// Standard errors allowed against the spectral reference.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_points() -> Vec<Vec<f64>> {
    vec![vec![0.0]]
}

fn default_paths() -> usize {
    100_000
}

fn default_mc_lambda() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    3.0
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            points: default_points(),
            paths: default_paths(),
            lambda: default_mc_lambda(),
            data: None,
            tolerance: default_tolerance(),
        }
    }
}

impl RunConfig {
    /// Parses JSON, reporting the path of the offending field.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.grid.d, self.grid.n, self.grid.box_len).map_err(|e| CliError::Config {
            path: "grid".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |path: &str, message: String| {
            Err(CliError::Config {
                path: path.into(),
                message,
            })
        };
        let g = &self.grid;
        if !(1..=3).contains(&g.d) {
            return bad("grid.d", format!("must be 1, 2 or 3, got {}", g.d));
        }
        if g.n < 8 || !g.n.is_power_of_two() {
            return bad("grid.n", format!("must be a power of two >= 8, got {}", g.n));
        }
        if !(g.box_len > 0.0 && g.box_len.is_finite()) {
            return bad("grid.box", format!("must be positive, got {}", g.box_len));
        }
        match &self.coefficient {
            CoefficientConfig::RandomCells { nu, lambda, .. } => {
                if !(*nu > 0.0) {
                    return bad("coefficient.nu", format!("must be positive, got {nu}"));
                }
                if !(nu <= lambda && lambda.is_finite()) {
                    return bad("coefficient.lambda", format!("must be finite and at least nu = {nu}, got {lambda}"));
                }
            }
            CoefficientConfig::Constant { value } if !(*value > 0.0 && value.is_finite()) => {
                return bad("coefficient.value", format!("must be positive, got {value}"));
            }
            CoefficientConfig::Sign { base, amp } | CoefficientConfig::AngleCosine { base, amp }
                if !(base - amp.abs() > 0.0 && base.is_finite()) =>
            {
                return bad("coefficient.amp", format!("base - |amp| must be positive, got {base} and {amp}"));
            }
            _ => {}
        }
        for (i, l) in self.solve.lambdas.iter().enumerate() {
            if !(*l > 0.0 && l.is_finite()) {
                return bad(&format!("solve.lambdas[{i}]"), format!("must be positive, got {l}"));
            }
        }
        if self.solve.lambdas.is_empty() {
            return bad("solve.lambdas", "must not be empty".into());
        }
        for (i, p) in self.solve.ps.iter().enumerate() {
            if !(*p >= 1.0) {
                return bad(&format!("solve.ps[{i}]"), format!("must be at least 1, got {p}"));
            }
        }
        self.solve.data.validate("solve.data", g)?;
        if let Some(ls) = &self.verify.lambdas {
            for (i, l) in ls.iter().enumerate() {
                if !(*l > 0.0 && l.is_finite()) {
                    return bad(&format!("verify.lambdas[{i}]"), format!("must be positive, got {l}"));
                }
            }
        }
        if !(self.mc.lambda > 0.0 && self.mc.lambda.is_finite()) {
            return bad("mc.lambda", format!("must be positive, got {}", self.mc.lambda));
        }
        for (i, p) in self.mc.points.iter().enumerate() {
            if p.len() != g.d {
                return bad(&format!("mc.points[{i}]"), format!("needs {} components", g.d));
            }
        }
        if let Some(data) = &self.mc.data {
            data.validate("mc.data", g)?;
            if matches!(data, DataSpec::File { .. }) {
                return bad("mc.data", "Monte Carlo needs an analytic profile".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "kernel": {"family": "stable", "alpha": 0.5},
        "coefficient": {"family": "random_cells", "nu": 0.5, "lambda": 2.0, "seed": 3},
        "grid": {"d": 1, "n": 64, "box": 6.283185307179586},
        "solve": {"lambdas": [0.5, 1.0], "ps": [2.0, 3.0], "variant": "l-tilde", "method": "both",
                  "data": {"profile": "cosine", "frequency": [1.0], "amplitude": 1.0}},
        "verify": {"suites": ["resolvent-bound"], "trials": 4},
        "mc": {"points": [[0.0], [1.5]], "paths": 2000, "lambda": 1.0},
        "output": "runs/a",
        "seed": 7
    }"#;

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(FULL).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        let minimal = RunConfig::parse(r#"{"kernel": {"family": "stable", "alpha": 1.5}}"#).unwrap();
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse(&serde_json::to_string(&minimal).unwrap()).unwrap(), minimal);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let e = RunConfig::parse(&FULL.replace("\"n\": 64", "\"n\": 48")).unwrap_err();
        assert!(e.to_string().contains("grid.n"), "{e}");
        let e = RunConfig::parse(&FULL.replace("\"lambda\": 2.0", "\"lambda\": 0.25")).unwrap_err();
        assert!(e.to_string().contains("coefficient.lambda"), "{e}");
        let e = RunConfig::parse(&FULL.replace("[0.5, 1.0]", "[0.5, -1.0]")).unwrap_err();
        assert!(e.to_string().contains("solve.lambdas[1]"), "{e}");
        let e = RunConfig::parse(&FULL.replace("\"d\": 1", "\"d\": \"one\"")).unwrap_err();
        assert!(e.to_string().contains("grid.d"), "{e}");
        let e = RunConfig::parse(&FULL.replace("\"frequency\": [1.0]", "\"frequency\": [1.1]")).unwrap_err();
        assert!(e.to_string().contains("solve.data.frequency[0]"), "{e}");
    }
}
