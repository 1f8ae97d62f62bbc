use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use super::fields::{band_limited_field, bump_field, compact_field, trial_seed, BumpLayout, Signs};
use super::{
    ratio, table, trial_spec, within_factor_two, worst, Ensemble, EstimateId, Kernels, Trial, VerificationReport,
    SLACK,
};
use crate::error::{Error, Result};
use crate::fieldops::{
    cone_convexity_check, lp_norm, max_admissible_eta, maximal_function, mean_oscillation, osc, Ball, ConeKernel,
    GridFunction, GridSpec, RadiusSweep,
};
use crate::fieldops::{analysis::weighted_l1_norm, cone::selection_rule, holder_seminorm};
use crate::hypothesis::{check_h1, check_h2, check_h3, h3_clauses, HypothesisCertificate, Verdict};
use crate::kernel::{OperatorSpec, RadialJumpKernel, Variant};
use crate::operator::apply_spectral;
use crate::solver::resolvent_solve;
use crate::symbol::SymbolTable;

/// Runs `f` for every trial index in parallel, keeping trial order.
fn per_trial(e: &Ensemble, f: impl Fn(usize) -> Result<Vec<Trial>> + Sync + Send) -> Result<Vec<Trial>> {
    let rows = (0..e.trials).into_par_iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

struct Row<'a> {
    index: usize,
    seed: u64,
    spec: &'a OperatorSpec,
    lambda: Option<f64>,
    p: Option<f64>,
    kappa: Option<f64>,
}

impl Row<'_> {
    fn make(&self, label: &str, lhs: f64, rhs: f64) -> Trial {
        Trial {
            index: self.index,
            seed: self.seed,
            kernel: self.spec.kernel.key(),
            variant: self.spec.variant,
            lambda: self.lambda,
            p: self.p,
            kappa: self.kappa,
            label: label.to_string(),
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
        }
    }
}

fn explicit_report(
    id: EstimateId,
    e: &Ensemble,
    trials: Vec<Trial>,
    constants: BTreeMap<String, f64>,
    extra_ok: bool,
    notes: Vec<String>,
) -> VerificationReport {
    let w = worst(&trials);
    let pass = extra_ok && w <= 1.0 + SLACK && trials.iter().all(|t| t.ratio.is_finite());
    VerificationReport {
        estimate: id,
        monitored: false,
        ensemble: e.clone(),
        trials,
        worst_ratio: w,
        refined_worst_ratio: None,
        refinement_stable: None,
        constants,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        notes,
    }
}

/// Output of one run of a monitored suite on one grid.
struct MonitoredRun {
    trials: Vec<Trial>,
    /// The monitored constant (usually the worst ratio).
    value: f64,
    constants: BTreeMap<String, f64>,
    ok: bool,
    notes: Vec<String>,
}

fn monitored_report(
    id: EstimateId,
    e: &Ensemble,
    run: impl Fn(&Ensemble) -> Result<MonitoredRun>,
) -> Result<VerificationReport> {
    e.validate()?;
    let base = run(e)?;
    let mut constants = base.constants;
    let mut notes = base.notes;
    let mut ok = base.ok && base.value.is_finite();
    let (refined, stable) = if e.refine {
        let r = run(&e.refined())?;
        for (k, v) in r.constants {
            constants.insert(format!("refined_{k}"), v);
        }
        ok &= r.ok;
        let stable = within_factor_two(base.value, r.value);
        if !stable {
            notes.push(format!(
                "monitored constant moved from {:.6e} to {:.6e} under grid doubling",
                base.value, r.value
            ));
        }
        (Some(r.value), Some(stable))
    } else {
        notes.push("refinement skipped; stability not established".into());
        (None, None)
    };
    let pass = ok && stable.unwrap_or(false);
    constants.insert("monitored_constant".into(), base.value);
    Ok(VerificationReport {
        estimate: id,
        monitored: true,
        ensemble: e.clone(),
        trials: base.trials,
        worst_ratio: base.value,
        refined_worst_ratio: refined,
        refinement_stable: stable,
        constants,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        notes,
    })
}

struct KernelCertificates {
    h1: HypothesisCertificate,
    h2: HypothesisCertificate,
}

fn kernel_certificates(kernel: &RadialJumpKernel, sigma: f64) -> std::sync::Arc<KernelCertificates> {
    static CACHE: OnceLock<Mutex<HashMap<String, std::sync::Arc<KernelCertificates>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = format!("{}|{}", kernel.key(), sigma);
    if let Some(c) = cache.lock().unwrap().get(&key) {
        return c.clone();
    }
    let c = std::sync::Arc::new(KernelCertificates {
        h1: check_h1(kernel, sigma),
        h2: check_h2(kernel, sigma),
    });
    cache.lock().unwrap().insert(key, c.clone());
    c
}

fn refuse(cert: &HypothesisCertificate) -> Error {
    let id = serde_json::to_value(cert.id)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    Error::MissingCertificate(format!("{id} ({:?}): {}", cert.verdict, cert.notes.join("; ")))
}

/// Checks H1 (and H2 when `with_h2`) for every member; returns `min α₀`.
fn require_kernels(kernels: &Kernels, with_h2: impl Fn(f64) -> bool) -> Result<f64> {
    let mut alpha0 = f64::INFINITY;
    for k in &kernels.0 {
        let sigma = k
            .sigma()
            .ok_or_else(|| Error::InvalidInput(format!("kernel {} has no analytic sigma", k.key())))?;
        let c = kernel_certificates(k, sigma);
        if !c.h1.passed() {
            return Err(refuse(&c.h1));
        }
        if with_h2(sigma) && !c.h2.passed() {
            return Err(refuse(&c.h2));
        }
        alpha0 = alpha0.min(c.h1.constant("alpha0").unwrap_or(f64::NAN));
    }
    Ok(alpha0)
}

/// The L-tilde theory additionally needs the drift-control clauses.
fn require_h3(spec: &OperatorSpec) -> Result<()> {
    if !matches!(spec.variant, Variant::LTilde | Variant::LTildeStar) {
        return Ok(());
    }
    for clause in h3_clauses(spec.sigma) {
        let c = check_h3(spec, clause);
        if !c.passed() {
            return Err(refuse(&c));
        }
    }
    Ok(())
}

fn a_table(spec: &OperatorSpec, grid: &GridSpec) -> Result<SymbolTable> {
    table(&spec.with_variant(Variant::A)?, grid)
}

pub fn verify_resolvent_bound(e: &Ensemble) -> Result<VerificationReport> {
    e.validate()?;
    let grid = e.grid()?;
    let kernels = Kernels::new(e)?;
    let trials = per_trial(e, |i| {
        let seed = trial_seed(e.seed, i);
        let f = bump_field(grid, seed, &BumpLayout::central(&grid, Signs::Mixed));
        let mut out = Vec::new();
        for &v in &e.variants {
            let spec = trial_spec(e, &kernels, i, v)?;
            let t = table(&spec, &grid)?;
            for &lambda in &e.lambdas {
                let u = resolvent_solve(&t, &f, lambda)?.u;
                for &p in &e.ps {
                    let row = Row {
                        index: i,
                        seed,
                        spec: &spec,
                        lambda: Some(lambda),
                        p: Some(p),
                        kappa: None,
                    };
                    out.push(row.make("lambda_u_over_f", lambda * lp_norm(&u, p)?, lp_norm(&f, p)?));
                }
            }
        }
        Ok(out)
    })?;
    Ok(explicit_report(EstimateId::ResolventBound, e, trials, BTreeMap::new(), true, vec![]))
}

/// `max_ξ max(νΨ, λ) / |m − λ|`, at most one for every admissible symbol.
fn symbol_margin(m: &SymbolTable, a: &SymbolTable, nu: f64, lambda: f64) -> f64 {
    let grid = m.grid;
    (0..grid.len())
        .map(|i| {
            let mi = 0.5 * (m.values[i] + m.values[grid.partner(i)].conj());
            let psi = -a.values[i].re;
            (nu * psi).max(lambda) / (mi - Complex64::new(lambda, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

pub fn verify_l2(e: &Ensemble) -> Result<VerificationReport> {
    e.validate()?;
    let grid = e.grid()?;
    let kernels = Kernels::new(e)?;
    let margins = Mutex::new(0.0_f64);
    let trials = per_trial(e, |i| {
        let seed = trial_seed(e.seed, i);
        let member = &e.members[i % e.members.len()];
        let nu = member.coefficient.nu();
        let f = bump_field(grid, seed, &BumpLayout::central(&grid, Signs::Mixed));
        let f2 = lp_norm(&f, 2.0)?;
        let mut out = Vec::new();
        for &v in &e.variants {
            let spec = trial_spec(e, &kernels, i, v)?;
            let t = table(&spec, &grid)?;
            let at = a_table(&spec, &grid)?;
            for &lambda in &e.lambdas {
                let margin = symbol_margin(&t, &at, nu, lambda);
                let mut g = margins.lock().unwrap();
                *g = g.max(margin);
                drop(g);
                let u = resolvent_solve(&t, &f, lambda)?.u;
                let au = apply_spectral(&at, &u)?;
                let row = Row {
                    index: i,
                    seed,
                    spec: &spec,
                    lambda: Some(lambda),
                    p: Some(2.0),
                    kappa: None,
                };
                out.push(row.make("Au_over_sqrt2_f_over_nu", lp_norm(&au, 2.0)?, std::f64::consts::SQRT_2 / nu * f2));
                out.push(row.make("lambda_u_over_sqrt2_f", lambda * lp_norm(&u, 2.0)?, std::f64::consts::SQRT_2 * f2));
            }
        }
        Ok(out)
    })?;
    let margin = margins.into_inner().unwrap();
    let mut constants = BTreeMap::new();
    constants.insert("symbol_margin".into(), margin);
    let mut notes = vec![];
    let ok = margin <= 1.0 + 1e-6;
    if !ok {
        notes.push(format!("symbol inequality max(nu Psi, lambda) <= |m - lambda| violated: {margin:.6e}"));
    }
    Ok(explicit_report(EstimateId::L2, e, trials, constants, ok, notes))
}

pub fn verify_lp(e: &Ensemble) -> Result<VerificationReport> {
    monitored_report(EstimateId::Lp, e, |e| {
        let grid = e.grid()?;
        let kernels = Kernels::new(e)?;
        require_kernels(&kernels, |_| true)?;
        let trials = per_trial(e, |i| {
            let seed = trial_seed(e.seed, i);
            let f = bump_field(grid, seed, &BumpLayout::central(&grid, Signs::Mixed));
            let mut out = Vec::new();
            for &v in &e.variants {
                let spec = trial_spec(e, &kernels, i, v)?;
                require_h3(&spec)?;
                let t = table(&spec, &grid)?;
                let at = a_table(&spec, &grid)?;
                for &lambda in &e.lambdas {
                    let u = resolvent_solve(&t, &f, lambda)?.u;
                    let au = apply_spectral(&at, &u)?;
                    for &p in &e.ps {
                        let row = Row {
                            index: i,
                            seed,
                            spec: &spec,
                            lambda: Some(lambda),
                            p: Some(p),
                            kappa: None,
                        };
                        let lhs = lp_norm(&au, p)? + lambda * lp_norm(&u, p)?;
                        out.push(row.make("Au_plus_lambda_u_over_f", lhs, lp_norm(&f, p)?));
                    }
                }
            }
            Ok(out)
        })?;
        let mut constants = BTreeMap::new();
        let per_lambda: Vec<f64> = e
            .lambdas
            .iter()
            .map(|&l| {
                let w = trials.iter().filter(|t| t.lambda == Some(l)).map(|t| t.ratio).fold(0.0, f64::max);
                constants.insert(format!("monitored_lambda_{l}"), w);
                w
            })
            .collect();
        let hi = per_lambda.iter().copied().fold(0.0, f64::max);
        let lo = per_lambda.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        constants.insert("lambda_spread".into(), spread);
        let ok = spread <= 1.5;
        let mut notes = vec![];
        if !ok {
            notes.push(format!("monitored constant varies by {spread:.3} over the lambda set (allowed 1.5)"));
        }
        Ok(MonitoredRun {
            value: worst(&trials),
            trials,
            constants,
            ok,
            notes,
        })
    })
}

pub fn verify_positivity_max_principle(e: &Ensemble) -> Result<VerificationReport> {
    e.validate()?;
    let grid = e.grid()?;
    let kernels = Kernels::new(e)?;
    let zero_worst = Mutex::new(0.0_f64);
    let trials = per_trial(e, |i| {
        let seed = trial_seed(e.seed, i);
        let f = bump_field(grid, seed, &BumpLayout::central(&grid, Signs::Negative));
        let zero = GridFunction::zeros(grid);
        let sup = f.max_abs();
        let mut out = Vec::new();
        for &v in &e.variants {
            let spec = trial_spec(e, &kernels, i, v)?;
            let t = table(&spec, &grid)?;
            for &lambda in &e.lambdas {
                let z = resolvent_solve(&t, &zero, lambda)?.u.max_abs();
                let mut g = zero_worst.lock().unwrap();
                *g = g.max(z);
                drop(g);
                let u = resolvent_solve(&t, &f, lambda)?.u;
                let row = Row {
                    index: i,
                    seed,
                    spec: &spec,
                    lambda: Some(lambda),
                    p: None,
                    kappa: None,
                };
                // Ratio ≤ 1 means min u ≥ −1e-8 ‖f‖∞.
                let mut t = row.make("negative_part_over_1e-8_sup_f", (-u.min()).max(0.0), 1e-8 * sup);
                t.ratio = t.ratio.max(0.0);
                out.push(t);
            }
        }
        Ok(out)
    })?;
    let z = zero_worst.into_inner().unwrap();
    let mut constants = BTreeMap::new();
    constants.insert("zero_data_max_abs".into(), z);
    constants.insert(
        "max_negative_part_over_sup_f".into(),
        trials.iter().map(|t| t.lhs / (t.rhs / 1e-8)).fold(0.0, f64::max),
    );
    let ok = z <= 1e-12;
    let w = worst(&trials);
    let pass = ok && w <= 1.0;
    let mut report = explicit_report(EstimateId::Positivity, e, trials, constants, ok, vec![]);
    report.verdict = if pass { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

fn holder_exponent(e: &Ensemble, alpha0: f64) -> Result<f64> {
    let top = alpha0.min(1.0);
    let a = e.holder_alpha.unwrap_or(0.6 * top);
    if !(a > 0.0 && a < top) {
        return Err(Error::InvalidInput(format!(
            "Holder exponent must lie in (0, min(1, alpha0)) = (0, {top}), got {a}"
        )));
    }
    Ok(a)
}

pub fn verify_holder(e: &Ensemble) -> Result<VerificationReport> {
    monitored_report(EstimateId::Holder, e, |e| {
        let grid = e.grid()?;
        let kernels = Kernels::new(e)?;
        let alpha0 = require_kernels(&kernels, |_| true)?;
        let alpha = holder_exponent(e, alpha0)?;
        let r_big = e.radius;
        let trials = per_trial(e, |i| {
            let seed = trial_seed(e.seed, i);
            let f = compact_field(grid, seed, r_big);
            let osc_f = osc(&f, &Ball::centered(grid.d, r_big))?;
            let mut out = Vec::new();
            for &v in &e.variants {
                let spec = trial_spec(e, &kernels, i, v)?;
                require_h3(&spec)?;
                let t = table(&spec, &grid)?;
                let scale = spec.kernel.j(r_big) * r_big.powf(grid.d as f64 + alpha);
                for &lambda in &e.lambdas {
                    let u = resolvent_solve(&t, &f, lambda)?.u;
                    let lhs = holder_seminorm(&u, alpha, &Ball::centered(grid.d, 0.5 * r_big), seed)?.value;
                    let rhs = (weighted_l1_norm(&u, r_big, &spec.kernel)? + osc_f) / scale;
                    let row = Row {
                        index: i,
                        seed,
                        spec: &spec,
                        lambda: Some(lambda),
                        p: None,
                        kappa: None,
                    };
                    out.push(row.make("holder_over_weighted_l1_plus_osc", lhs, rhs));
                }
            }
            Ok(out)
        })?;
        let mut constants = BTreeMap::new();
        constants.insert("holder_alpha".into(), alpha);
        constants.insert("alpha0".into(), alpha0);
        constants.insert("radius".into(), r_big);
        Ok(MonitoredRun {
            value: worst(&trials),
            trials,
            constants,
            ok: true,
            notes: vec![],
        })
    })
}

pub fn verify_sharp_oscillation(e: &Ensemble) -> Result<VerificationReport> {
    if e.kappas.iter().any(|k| !(*k >= 2.0)) {
        return Err(Error::InvalidInput("every kappa must be at least 2".into()));
    }
    // Fixed by the unrefined grid so both runs use the same balls.
    let r = (e.box_len / 256.0).max(e.box_len / e.n as f64);
    let kappa_max = e.kappas.iter().copied().fold(2.0, f64::max);
    let width = e.box_len / 128.0;
    let inner = 2.0 * kappa_max * r + 6.0 * width;
    let outer = (inner + e.box_len / 16.0).min(0.45 * e.box_len);
    if outer <= inner {
        return Err(Error::InvalidInput(format!(
            "box {} too small to keep data outside B_(2 kappa r) with kappa = {kappa_max}",
            e.box_len
        )));
    }
    let far = BumpLayout {
        count: 4,
        inner,
        outer,
        width: (width, width),
        signs: Signs::Mixed,
    };
    monitored_report(EstimateId::SharpOscillation, e, |e| {
        let grid = e.grid()?;
        let kernels = Kernels::new(e)?;
        let alpha0 = require_kernels(&kernels, |_| true)?;
        let alpha = 0.5 * alpha0.min(1.0);
        let d = grid.d;
        let origin = vec![0.0; d];
        let trials = per_trial(e, |i| {
            let seed = trial_seed(e.seed, i);
            // Odd trials keep f away from B_{2κr} for every κ.
            let vanishing = i % 2 == 1;
            let f = if vanishing {
                bump_field(grid, seed, &far)
            } else {
                bump_field(grid, seed, &BumpLayout::central(&grid, Signs::Mixed))
            };
            let f2 = f.map(|v| v * v);
            let mf2 = maximal_function(&f2, &origin, RadiusSweep::Dyadic);
            let ball = Ball::centered(d, r);
            let mut out = Vec::new();
            for &v in &e.variants {
                let spec = trial_spec(e, &kernels, i, v)?;
                require_h3(&spec)?;
                let t = table(&spec, &grid)?;
                let at = a_table(&spec, &grid)?;
                for &lambda in &e.lambdas {
                    let u = resolvent_solve(&t, &f, lambda)?.u;
                    let au = apply_spectral(&at, &u)?;
                    let lhs = lambda * mean_oscillation(&u, &ball)? + mean_oscillation(&au, &ball)?;
                    let mu = lambda * maximal_function(&u, &origin, RadiusSweep::Dyadic)
                        + maximal_function(&au, &origin, RadiusSweep::Dyadic);
                    for &kappa in &e.kappas {
                        let first = kappa.powf(-alpha) * mu;
                        let second = kappa.powf(0.5 * d as f64) * mf2.sqrt();
                        let row = Row {
                            index: i,
                            seed,
                            spec: &spec,
                            lambda: Some(lambda),
                            p: None,
                            kappa: Some(kappa),
                        };
                        out.push(row.make("mean_osc_over_rhs", lhs, first + second));
                        if vanishing {
                            out.push(row.make("mean_osc_over_first_group", lhs, first));
                        }
                    }
                }
            }
            Ok(out)
        })?;
        let sup = |label: &str| {
            trials
                .iter()
                .filter(|t| t.label == label)
                .map(|t| t.ratio)
                .fold(0.0, f64::max)
        };
        let mut constants = BTreeMap::new();
        let far_constant = sup("mean_osc_over_first_group");
        constants.insert("far_data_first_group_constant".into(), far_constant);
        constants.insert("sharp_alpha".into(), alpha);
        constants.insert("radius".into(), r);
        constants.insert("kappa_doubling_factor".into(), 2f64.powf(-alpha));
        Ok(MonitoredRun {
            value: sup("mean_osc_over_rhs"),
            trials,
            constants,
            ok: far_constant.is_finite(),
            notes: vec![],
        })
    })
}

/// `max_{ξ ≠ 0} |m(ξ)| / Ψ(ξ)`.
fn symbol_ratio_bound(m: &SymbolTable, a: &SymbolTable) -> f64 {
    let grid = m.grid;
    (0..grid.len())
        .filter(|&i| a.values[i].re < 0.0)
        .map(|i| {
            let mi = 0.5 * (m.values[i] + m.values[grid.partner(i)].conj());
            mi.norm() / -a.values[i].re
        })
        .fold(0.0, f64::max)
}

pub fn verify_operator_continuity(e: &Ensemble) -> Result<VerificationReport> {
    monitored_report(EstimateId::OperatorContinuity, e, |e| {
        let grid = e.grid()?;
        let kernels = Kernels::new(e)?;
        require_kernels(&kernels, |sigma| sigma <= 1.0)?;
        let bound = Mutex::new(0.0_f64);
        let trials = per_trial(e, |i| {
            let seed = trial_seed(e.seed, i);
            let u = band_limited_field(grid, seed, grid.n / 8);
            let mut out = Vec::new();
            for &v in &e.variants {
                let spec = trial_spec(e, &kernels, i, v)?;
                let t = table(&spec, &grid)?;
                let at = a_table(&spec, &grid)?;
                let b = symbol_ratio_bound(&t, &at);
                let mut g = bound.lock().unwrap();
                *g = g.max(b);
                drop(g);
                let lu = apply_spectral(&t, &u)?;
                let au = apply_spectral(&at, &u)?;
                for &p in &e.ps {
                    let an = lp_norm(&au, p)?;
                    if an < 1e-10 {
                        continue;
                    }
                    let row = Row {
                        index: i,
                        seed,
                        spec: &spec,
                        lambda: None,
                        p: Some(p),
                        kappa: None,
                    };
                    out.push(row.make("Lu_over_Au", lp_norm(&lu, p)?, an));
                }
            }
            Ok(out)
        })?;
        let bound = bound.into_inner().unwrap();
        let p2 = trials
            .iter()
            .filter(|t| t.p == Some(2.0))
            .map(|t| t.ratio)
            .fold(0.0, f64::max);
        let mut constants = BTreeMap::new();
        constants.insert("symbol_ratio_bound".into(), bound);
        constants.insert("monitored_p2".into(), p2);
        let ok = p2 <= bound * (1.0 + 1e-6);
        let mut notes = vec![];
        if !ok {
            notes.push(format!("p = 2 ratio {p2:.6e} exceeds the symbol bound {bound:.6e}"));
        }
        Ok(MonitoredRun {
            value: worst(&trials),
            trials,
            constants,
            ok,
            notes,
        })
    })
}

/// Random admissible draw: `α`, `b`, `η₁, η₂` and a piecewise kernel.
fn cone_draw(d: usize, seed: u64) -> (f64, Vec<f64>, ConeKernel, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = 0.05 + 0.9 * rng.gen::<f64>();
    let z: f64 = StandardNormal.sample(&mut rng);
    let scale = z.exp();
    let b: Vec<f64> = loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if v.iter().map(|x: &f64| x * x).sum::<f64>() > 1e-6 {
            break v.iter().map(|x| scale * x).collect();
        }
    };
    let t = max_admissible_eta(alpha);
    let (eta1, eta2) = loop {
        let e1 = t * (0.05 + 0.95 * rng.gen::<f64>());
        let e2 = t * (0.05 + 0.95 * rng.gen::<f64>());
        if selection_rule(alpha, e1, e2) {
            break (e1, e2);
        }
    };
    let radial_cells = rng.gen_range(1..=4);
    let angular_cells = rng.gen_range(1..=4);
    let values = (0..2 * radial_cells * angular_cells)
        .map(|_| {
            if rng.gen::<f64>() < 0.3 {
                0.0
            } else {
                let e: f64 = Exp1.sample(&mut rng);
                e * 10f64.powf(4.0 * rng.gen::<f64>() - 2.0)
            }
        })
        .collect();
    let kernel = ConeKernel::Piecewise {
        radial_cells,
        angular_cells,
        values,
    };
    (alpha, b, kernel, eta1, eta2)
}

pub fn verify_cone_convexity(e: &Ensemble) -> Result<VerificationReport> {
    if !(1..=3).contains(&e.d) {
        return Err(Error::UnsupportedDimension(e.d));
    }
    let mut trials = Vec::new();
    let mut all_hold = true;
    let mut quad_err: f64 = 0.0;
    for i in 0..e.trials {
        let seed = trial_seed(e.seed, i);
        let (alpha, b, kernel, eta1, eta2) = cone_draw(e.d, seed);
        let r = cone_convexity_check(alpha, &b, &kernel, eta1, eta2)?;
        all_hold &= r.holds;
        quad_err = quad_err.max(r.quadrature_error / (r.lhs.abs() + r.rhs.abs()).max(f64::MIN_POSITIVE));
        // Normalized excess of the left side; nonpositive when the inequality holds.
        let excess = (r.lhs - r.rhs) / (r.lhs.abs() + r.rhs.abs()).max(f64::MIN_POSITIVE);
        trials.push(Trial {
            index: i,
            seed,
            kernel: format!("cone alpha={alpha:.6} eta1={eta1:.6} eta2={eta2:.6}"),
            variant: Variant::A,
            lambda: None,
            p: None,
            kappa: None,
            label: "normalized_excess".into(),
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: excess,
        });
    }
    let w = trials.iter().map(|t| t.ratio).fold(f64::NEG_INFINITY, f64::max);
    let mut constants = BTreeMap::new();
    constants.insert("max_relative_quadrature_error".into(), quad_err);
    Ok(VerificationReport {
        estimate: EstimateId::ConeConvexity,
        monitored: false,
        ensemble: e.clone(),
        trials,
        worst_ratio: w,
        refined_worst_ratio: None,
        refinement_stable: None,
        constants,
        verdict: if all_hold { Verdict::Pass } else { Verdict::Fail },
        notes: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::super::{CoefficientDraw, Member};
    use super::*;
    use crate::kernel::KernelConfig;

    fn small(id: EstimateId) -> Ensemble {
        let mut e = Ensemble::default_for(id, 1);
        e.n = 128;
        e.box_len = if id == EstimateId::Holder { 8.0 } else { 32.0 };
        e.trials = 4;
        e
    }

    #[test]
    fn resolvent_bound_single_mode_ratio_is_half() {
        let grid = GridSpec::new(1, 64, 8.0 * std::f64::consts::PI).unwrap();
        let e = Ensemble {
            members: vec![Member {
                kernel: KernelConfig::Stable { alpha: 1.0 },
                coefficient: CoefficientDraw::Unit,
            }],
            ..small(EstimateId::ResolventBound)
        };
        let kernels = Kernels::new(&e).unwrap();
        let spec = trial_spec(&e, &kernels, 0, Variant::A).unwrap();
        let t = table(&spec, &grid).unwrap();
        let f = GridFunction::from_fn(grid, |x| x[0].cos());
        let u = resolvent_solve(&t, &f, 1.0).unwrap().u;
        let r = lp_norm(&u, 3.0).unwrap() / lp_norm(&f, 3.0).unwrap();
        assert!((r - 0.5).abs() < 1e-6);
    }

    #[test]
    fn explicit_suites_pass_on_small_ensembles() {
        for id in [EstimateId::ResolventBound, EstimateId::L2, EstimateId::Positivity] {
            let r = super::super::run_suite(id, &small(id)).unwrap();
            assert!(r.passed(), "{id:?}: {} {:?}", r.worst_ratio, r.notes);
            assert!(!r.trials.is_empty());
        }
    }

    #[test]
    fn large_lambda_keeps_resolvent_ratio_small() {
        let e = Ensemble {
            lambdas: vec![100.0],
            ..small(EstimateId::ResolventBound)
        };
        let r = verify_resolvent_bound(&e).unwrap();
        assert!(r.worst_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn monitored_suites_report_finite_constants() {
        for id in [EstimateId::Lp, EstimateId::Holder, EstimateId::SharpOscillation, EstimateId::OperatorContinuity] {
            let r = super::super::run_suite(id, &small(id)).unwrap();
            assert!(r.worst_ratio.is_finite() && r.worst_ratio > 0.0, "{id:?}");
            assert!(r.refined_worst_ratio.is_some());
        }
    }

    #[test]
    fn unit_coefficient_continuity_ratio_is_one() {
        let e = Ensemble {
            members: vec![Member {
                kernel: KernelConfig::Stable { alpha: 0.5 },
                coefficient: CoefficientDraw::Unit,
            }],
            refine: false,
            ..small(EstimateId::OperatorContinuity)
        };
        let r = verify_operator_continuity(&e).unwrap();
        for t in &r.trials {
            assert!((t.ratio - 1.0).abs() < 1e-9, "{}", t.ratio);
        }
    }

    #[test]
    fn even_coefficients_bound_the_continuity_ratio() {
        let e = Ensemble {
            members: vec![Member {
                kernel: KernelConfig::Stable { alpha: 0.7 },
                coefficient: CoefficientDraw::Random {
                    nu: 0.5,
                    lambda: 2.0,
                    even: true,
                },
            }],
            refine: false,
            ..small(EstimateId::OperatorContinuity)
        };
        let r = verify_operator_continuity(&e).unwrap();
        assert!(r.constants["symbol_ratio_bound"] <= 2.0 * (1.0 + 1e-6));
        assert!(r.constants["monitored_p2"] <= r.constants["symbol_ratio_bound"] * (1.0 + 1e-6));
    }

    #[test]
    fn holder_refuses_bad_exponent() {
        let e = Ensemble {
            holder_alpha: Some(0.9),
            ..small(EstimateId::Holder)
        };
        assert!(verify_holder(&e).is_err());
    }

    #[test]
    fn lp_refuses_without_h2() {
        let e = Ensemble {
            members: vec![Member {
                kernel: KernelConfig::ExpTail {
                    alpha: 1.0,
                    rate: 1.0,
                    onset: 0.0,
                },
                coefficient: CoefficientDraw::Unit,
            }],
            ..small(EstimateId::Lp)
        };
        assert!(matches!(verify_lp(&e), Err(Error::MissingCertificate(_))));
    }

    #[test]
    fn cone_suite_draws_are_admissible_and_hold() {
        let mut e = Ensemble::default_for(EstimateId::ConeConvexity, 2);
        e.trials = 10;
        let r = verify_cone_convexity(&e).unwrap();
        assert!(r.passed());
        assert_eq!(r.trials.len(), 10);
    }
}
