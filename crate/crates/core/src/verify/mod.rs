//! The a-priori estimates run as experiments over seeded ensembles.
//!
//! Estimates with explicit constants pass when every trial satisfies the
//! inequality with 5% slack. Estimates whose constant is not explicit are
//! reported as monitored constants: the supremum of the ratio over the
//! ensemble must be finite and change by at most a factor of two when the
//! grid is refined.

pub mod fields;
mod suites;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldops::GridSpec;
use crate::hypothesis::Verdict;
use crate::kernel::{CoefficientConfig, CoefficientField, KernelConfig, OperatorSpec, RadialJumpKernel, Variant};
use crate::symbol::{full_symbol, SymbolTable};

pub use suites::{
    verify_cone_convexity, verify_holder, verify_l2, verify_lp, verify_operator_continuity,
    verify_positivity_max_principle, verify_resolvent_bound, verify_sharp_oscillation,
};

/// Slack on the estimates with explicit constants.
pub const SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateId {
    ResolventBound,
    L2,
    Lp,
    Positivity,
    Holder,
    SharpOscillation,
    OperatorContinuity,
    ConeConvexity,
}

impl EstimateId {
    pub const ALL: [EstimateId; 8] = [
        EstimateId::ResolventBound,
        EstimateId::L2,
        EstimateId::Lp,
        EstimateId::Positivity,
        EstimateId::Holder,
        EstimateId::SharpOscillation,
        EstimateId::OperatorContinuity,
        EstimateId::ConeConvexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimateId::ResolventBound => "resolvent-bound",
            EstimateId::L2 => "l2",
            EstimateId::Lp => "lp",
            EstimateId::Positivity => "positivity",
            EstimateId::Holder => "holder",
            EstimateId::SharpOscillation => "sharp-oscillation",
            EstimateId::OperatorContinuity => "operator-continuity",
            EstimateId::ConeConvexity => "cone-convexity",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidInput(format!("unknown suite {name:?} (known: {})", known.join(", ")))
            })
    }

    pub fn monitored(self) -> bool {
        matches!(
            self,
            EstimateId::Lp | EstimateId::Holder | EstimateId::SharpOscillation | EstimateId::OperatorContinuity
        )
    }
}

/// How each trial draws its coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientDraw {
    Unit,
    /// Independent cell values in `[nu, lambda]`, optionally even.
    Random {
        nu: f64,
        lambda: f64,
        #[serde(default)]
        even: bool,
    },
}

impl CoefficientDraw {
    pub fn nu(&self) -> f64 {
        match self {
            CoefficientDraw::Unit => 1.0,
            CoefficientDraw::Random { nu, .. } => *nu,
        }
    }

    pub fn config(&self, seed: u64) -> CoefficientConfig {
        match self {
            CoefficientDraw::Unit => CoefficientConfig::Constant { value: 1.0 },
            CoefficientDraw::Random { nu, lambda, even } => {
                if *even {
                    CoefficientConfig::random_even(*nu, *lambda, seed)
                } else {
                    CoefficientConfig::random(*nu, *lambda, seed)
                }
            }
        }
    }
}

/// A kernel together with its coefficient law. Trials cycle through members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub kernel: KernelConfig,
    pub coefficient: CoefficientDraw,
}

fn default_kappas() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0]
}

fn default_true() -> bool {
    true
}

fn default_radius() -> f64 {
    1.0
}

/// Everything a suite needs to reproduce its trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
    pub members: Vec<Member>,
    pub variants: Vec<Variant>,
    pub lambdas: Vec<f64>,
    pub ps: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Radius `R` of the Hölder suite.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Hölder exponent; defaults to `0.6 min(1, α₀)`.
    #[serde(default)]
    pub holder_alpha: Option<f64>,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    /// Rerun monitored suites with `2n` points per axis.
    #[serde(default = "default_true")]
    pub refine: bool,
}

impl Ensemble {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.n, self.box_len)
    }

    /// Defaults per suite: 50 trials (20 for positivity, 100 cone draws);
    /// `n = 512, B = 64` in one dimension, `n = 128, B = 32` in two, and
    /// `n = 32, B = 16` in three.
    pub fn default_for(id: EstimateId, d: usize) -> Self {
        let (n, box_len) = match d {
            1 => (512, 64.0),
            2 => (128, 32.0),
            _ => (32, 16.0),
        };
        let stable = |alpha: f64| KernelConfig::Stable { alpha };
        let random = CoefficientDraw::Random {
            nu: 0.5,
            lambda: 2.0,
            even: false,
        };
        let even = CoefficientDraw::Random {
            nu: 0.5,
            lambda: 2.0,
            even: true,
        };
        let member = |alpha: f64, c: &CoefficientDraw| Member {
            kernel: stable(alpha),
            coefficient: c.clone(),
        };
        let mut e = Ensemble {
            d,
            n,
            box_len,
            members: vec![member(0.5, &random), member(1.5, &random)],
            variants: vec![Variant::L, Variant::LTilde],
            lambdas: vec![0.5, 1.0, 4.0],
            ps: vec![1.5, 2.0, 3.0],
            trials: 50,
            seed: 20240601,
            radius: 1.0,
            holder_alpha: None,
            kappas: default_kappas(),
            refine: true,
        };
        match id {
            EstimateId::ResolventBound | EstimateId::ConeConvexity => {}
            EstimateId::L2 => e.ps = vec![2.0],
            EstimateId::Lp => {
                e.variants = vec![Variant::L];
                e.lambdas = vec![0.5, 1.0, 4.0, 16.0];
                if d == 1 {
                    e.n = 256;
                }
            }
            EstimateId::Positivity => {
                e.trials = 20;
                e.members = vec![member(0.5, &random), member(1.0, &even), member(1.5, &random)];
                e.lambdas = vec![0.5, 1.0, 4.0];
            }
            EstimateId::Holder => {
                e.members = vec![member(0.5, &random)];
                e.variants = vec![Variant::L];
                e.lambdas = vec![1.0];
                e.trials = 20;
                if d == 1 {
                    e.n = 256;
                    e.box_len = 16.0;
                }
            }
            EstimateId::SharpOscillation => {
                e.variants = vec![Variant::L];
                e.lambdas = vec![1.0];
                e.trials = 20;
                if d == 1 {
                    e.n = 256;
                }
            }
            EstimateId::OperatorContinuity => {
                e.variants = vec![Variant::L];
                e.lambdas = vec![];
                e.ps = vec![1.5, 2.0, 3.0];
                e.trials = 20;
                if d == 1 {
                    e.n = 256;
                }
            }
        }
        if id == EstimateId::ConeConvexity {
            e.trials = 100;
        }
        e
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.members.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one member".into()));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput("every lambda must be positive".into()));
        }
        if self.ps.iter().any(|p| !(*p >= 1.0)) {
            return Err(Error::InvalidInput("every p must be at least 1".into()));
        }
        for m in &self.members {
            if let CoefficientDraw::Random { nu, lambda, .. } = m.coefficient {
                if !(nu > 0.0 && nu <= lambda) {
                    return Err(Error::InvalidInput(format!("need 0 < nu <= lambda, got {nu} and {lambda}")));
                }
            }
        }
        Ok(())
    }

    fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..self.clone() }
    }
}

/// One ratio `lhs / rhs` of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub kernel: String,
    pub variant: Variant,
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub kappa: Option<f64>,
    /// Which inequality of the estimate this row checks.
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub estimate: EstimateId,
    pub monitored: bool,
    pub ensemble: Ensemble,
    pub trials: Vec<Trial>,
    pub worst_ratio: f64,
    /// Worst ratio of the same ensemble on the refined grid.
    pub refined_worst_ratio: Option<f64>,
    /// The worst ratio changes by at most a factor of two under refinement.
    pub refinement_stable: Option<bool>,
    pub constants: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Per-trial rows; the header names the columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,seed,kernel,variant,lambda,p,kappa,label,lhs,rhs,ratio\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for t in &self.trials {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
                t.index,
                t.seed,
                quoted(&t.kernel),
                serde_json::to_value(t.variant).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                opt(t.lambda),
                opt(t.p),
                opt(t.kappa),
                t.label,
                t.lhs,
                t.rhs,
                t.ratio
            );
        }
        s
    }
}

/// CSV field with quotes doubled, since kernel keys contain commas.
fn quoted(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

/// Runs the named suite on `ensemble`.
pub fn run_suite(id: EstimateId, ensemble: &Ensemble) -> Result<VerificationReport> {
    match id {
        EstimateId::ResolventBound => verify_resolvent_bound(ensemble),
        EstimateId::L2 => verify_l2(ensemble),
        EstimateId::Lp => verify_lp(ensemble),
        EstimateId::Positivity => verify_positivity_max_principle(ensemble),
        EstimateId::Holder => verify_holder(ensemble),
        EstimateId::SharpOscillation => verify_sharp_oscillation(ensemble),
        EstimateId::OperatorContinuity => verify_operator_continuity(ensemble),
        EstimateId::ConeConvexity => verify_cone_convexity(ensemble),
    }
}

/// Kernels built once per ensemble; subordinate kernels are tabulated.
struct Kernels(Vec<RadialJumpKernel>);

impl Kernels {
    fn new(ensemble: &Ensemble) -> Result<Self> {
        static CACHE: std::sync::OnceLock<Mutex<HashMap<String, RadialJumpKernel>>> = std::sync::OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut out = Vec::new();
        for m in &ensemble.members {
            let key = format!("{}|{:?}", ensemble.d, m.kernel);
            let cached = cache.lock().unwrap().get(&key).cloned();
            let k = match cached {
                Some(k) => k,
                None => {
                    let k = RadialJumpKernel::new(m.kernel.clone(), ensemble.d)?;
                    cache.lock().unwrap().insert(key, k.clone());
                    k
                }
            };
            out.push(k);
        }
        Ok(Self(out))
    }
}

/// The operator of trial `index`.
fn trial_spec(ensemble: &Ensemble, kernels: &Kernels, index: usize, variant: Variant) -> Result<OperatorSpec> {
    let m = index % ensemble.members.len();
    let seed = fields::trial_seed(ensemble.seed ^ 0xC0EF, index);
    let a = CoefficientField::new(ensemble.members[m].coefficient.config(seed), ensemble.d)?;
    OperatorSpec::new(kernels.0[m].clone(), a, variant)
}

fn table(spec: &OperatorSpec, grid: &GridSpec) -> Result<SymbolTable> {
    full_symbol(spec, grid)
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn worst(trials: &[Trial]) -> f64 {
    trials.iter().map(|t| t.ratio).fold(0.0, f64::max)
}

/// `max(a/b, b/a) ≤ 2`, with zero matching only zero.
fn within_factor_two(a: f64, b: f64) -> bool {
    if a == 0.0 || b == 0.0 {
        return a == b;
    }
    a.is_finite() && b.is_finite() && (a / b).max(b / a) <= 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for id in EstimateId::ALL {
            assert_eq!(EstimateId::parse(id.name()).unwrap(), id);
        }
        assert!(EstimateId::parse("bogus").is_err());
    }

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        assert_eq!(quoted(r#"{"a":1,"b":2}"#), r#""{""a"":1,""b"":2}""#);
    }
}
