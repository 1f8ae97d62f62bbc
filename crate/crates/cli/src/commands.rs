//! One function per subcommand. Each returns whether all its verdicts passed.

use std::path::Path;

use nonlocal_core::fieldops::{interpolate, lp_norm, GridFunction, GridSpec};
use nonlocal_core::hypothesis::{certify, check_levy, estimate_sigma, HypothesisCertificate};
use nonlocal_core::kernel::{CoefficientField, OperatorSpec, RadialJumpKernel, Variant};
use nonlocal_core::solver::{feynman_kac_mc, mc_exponent, resolvent_solve, semigroup_solve, SolveResult, TimeConfig};
use nonlocal_core::symbol::{full_symbol, SymbolTable};
use nonlocal_core::verify::{run_suite, Ensemble, EstimateId};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DataSpec, MethodChoice, RunConfig};
use crate::output::{num, Artifacts};
use crate::CliError;

/// Relative residual above which a solve counts as failed.
const RESIDUAL_TOL: f64 = 1e-6;

fn operator(config: &RunConfig, variant: Variant) -> Result<OperatorSpec, CliError> {
    let d = config.grid.d;
    let kernel = RadialJumpKernel::new(config.kernel.clone(), d).map_err(|e| CliError::Config {
        path: "kernel".into(),
        message: e.to_string(),
    })?;
    let coefficient = CoefficientField::new(config.coefficient.clone(), d).map_err(|e| CliError::Config {
        path: "coefficient".into(),
        message: e.to_string(),
    })?;
    match kernel.sigma() {
        Some(_) => Ok(OperatorSpec::new(kernel, coefficient, variant)?),
        None => {
            let sigma = estimate_sigma(&kernel).sigma;
            Ok(OperatorSpec::with_sigma(kernel, coefficient, variant, sigma)?)
        }
    }
}

/// LEVY must hold before any evaluation; the symbol builder itself refuses
/// operators that lack CANCEL.
fn require_prerequisites(spec: &OperatorSpec) -> Result<(), CliError> {
    let levy = check_levy(&spec.kernel);
    if !levy.passed() {
        return Err(CliError::MissingCertificate(format!("LEVY ({})", levy.notes.join("; "))));
    }
    Ok(())
}

fn table(spec: &OperatorSpec, grid: &GridSpec) -> Result<SymbolTable, CliError> {
    require_prerequisites(spec)?;
    Ok(full_symbol(spec, grid)?)
}

fn name<T: Serialize>(v: T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn finish(artifacts: &Artifacts, pass: bool) -> bool {
    for p in artifacts.written() {
        println!("wrote {}", p.display());
    }
    println!("{}", if pass { "PASS" } else { "FAIL" });
    pass
}

pub fn kernel_check(config: &RunConfig) -> Result<bool, CliError> {
    let spec = operator(config, config.solve.variant)?;
    let certs: Vec<HypothesisCertificate> = certify(&spec);
    let mut out = Artifacts::new(&config.output)?;
    for c in &certs {
        let constants: Vec<String> = c.constants.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        println!("{:<14} {:<12} {}", name(c.id), name(c.verdict), constants.join(" "));
    }
    out.json("certificates.json", &certs)?;
    Ok(finish(&out, certs.iter().all(|c| c.passed())))
}

pub fn symbol_dump(config: &RunConfig) -> Result<bool, CliError> {
    let grid = config.grid()?;
    let spec = operator(config, config.solve.variant)?;
    let t = table(&spec, &grid)?;
    let axes = ["xi1", "xi2", "xi3"];
    let mut columns = vec!["index".to_string()];
    columns.extend(axes[..grid.d].iter().map(|s| s.to_string()));
    columns.extend(["abs_xi", "re", "im"].map(String::from));
    let mut csv = columns.join(",") + "\n";
    for (i, m) in t.values.iter().enumerate() {
        let xi = grid.wavevector(i);
        let mut row = vec![i.to_string()];
        row.extend(xi.iter().map(|v| num(*v)));
        row.extend([num(grid.wavenumber(i)), num(m.re), num(m.im)]);
        csv += &(row.join(",") + "\n");
    }
    let mut out = Artifacts::new(&config.output)?;
    out.text("symbol.csv", &csv)?;
    let max_abs = t.max_abs();
    let pass = t.max_real() <= 1e-9 * max_abs.max(1.0) && t.hermitian_defect() <= 1e-9 * max_abs.max(1.0);
    out.json(
        "symbol.json",
        &json!({
            "kernel": config.kernel,
            "coefficient": config.coefficient,
            "variant": t.variant,
            "grid": grid,
            "csv": "symbol.csv",
            "csv_columns": columns,
            "max_real": t.max_real(),
            "max_abs": max_abs,
            "hermitian_defect": t.hermitian_defect(),
            "pass": pass,
        }),
    )?;
    Ok(finish(&out, pass))
}

fn norms(u: &GridFunction, f: &GridFunction, ps: &[f64], lambda: f64) -> Result<Vec<Value>, CliError> {
    ps.iter()
        .map(|&p| {
            let nu = lp_norm(u, p)?;
            let nf = lp_norm(f, p)?;
            Ok(json!({
                "p": p,
                "u_norm": nu,
                "f_norm": nf,
                "lambda_ratio": if nf > 0.0 { lambda * nu / nf } else { 0.0 },
            }))
        })
        .collect()
}

fn l2_difference(a: &GridFunction, b: &GridFunction) -> f64 {
    let diff: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    let base: f64 = b.values.iter().map(|y| y * y).sum();
    if base > 0.0 {
        (diff / base).sqrt()
    } else {
        diff.sqrt()
    }
}

pub fn solve(config: &RunConfig, base: &Path) -> Result<bool, CliError> {
    let grid = config.grid()?;
    let s = &config.solve;
    let f = s.data.sample(grid, base)?;
    let spec = operator(config, s.variant)?;
    let forward = matches!(s.method, MethodChoice::Resolvent | MethodChoice::Both)
        .then(|| table(&spec, &grid))
        .transpose()?;
    let reflected = if matches!(s.method, MethodChoice::Semigroup | MethodChoice::Both) {
        let adjoint = s.variant.adjoint();
        if !(adjoint.reflected() || adjoint == Variant::A) {
            return Err(CliError::Config {
                path: "solve.variant".into(),
                message: format!(
                    "the semigroup solve needs an unreflected variant (A, l or l-tilde), got {}",
                    name(s.variant)
                ),
            });
        }
        Some(table(&spec.with_variant(adjoint)?, &grid)?)
    } else {
        None
    };
    let mut out = Artifacts::new(&config.output)?;
    out.grid("f.json", &f)?;
    let mut entries = Vec::new();
    let mut pass = true;
    for (i, &lambda) in s.lambdas.iter().enumerate() {
        let mut results: Vec<(&str, SolveResult)> = Vec::new();
        if let Some(t) = &forward {
            results.push(("resolvent", resolvent_solve(t, &f, lambda)?));
        }
        if let Some(t) = &reflected {
            results.push(("semigroup", semigroup_solve(t, &f, lambda, &TimeConfig::default())?));
        }
        for (method, r) in &results {
            let file = format!("u_{method}_{i}.json");
            out.grid(&file, &r.u)?;
            let ok = r.residual.is_finite() && r.residual <= RESIDUAL_TOL;
            pass &= ok;
            entries.push(json!({
                "lambda": lambda,
                "method": method,
                "file": file,
                "residual": r.residual,
                "pass": ok,
                "norms": norms(&r.u, &f, &s.ps, lambda)?,
                "diagnostics": r.diagnostics,
            }));
        }
        if let [(_, a), (_, b)] = results.as_slice() {
            entries.push(json!({
                "lambda": lambda,
                "method": "agreement",
                "relative_l2_difference": l2_difference(&b.u, &a.u),
            }));
        }
    }
    out.json(
        "solve.json",
        &json!({
            "kernel": config.kernel,
            "coefficient": config.coefficient,
            "variant": s.variant,
            "grid": grid,
            "data": s.data,
            "residual_tolerance": RESIDUAL_TOL,
            "solves": entries,
        }),
    )?;
    Ok(finish(&out, pass))
}

fn ensemble(config: &RunConfig, id: EstimateId) -> Ensemble {
    let v = &config.verify;
    let mut e = Ensemble::default_for(id, config.grid.d);
    e.seed = config.seed;
    if v.use_config_grid {
        e.n = config.grid.n;
        e.box_len = config.grid.box_len;
    }
    if let Some(t) = v.trials {
        e.trials = t;
    }
    if let Some(l) = &v.lambdas {
        e.lambdas = l.clone();
    }
    if let Some(p) = &v.ps {
        e.ps = p.clone();
    }
    if let Some(vs) = &v.variants {
        e.variants = vs.clone();
    }
    if let Some(r) = v.refine {
        e.refine = r;
    }
    e
}

const TRIAL_COLUMNS: [&str; 11] = [
    "index", "seed", "kernel", "variant", "lambda", "p", "kappa", "label", "lhs", "rhs", "ratio",
];

pub fn verify(config: &RunConfig) -> Result<bool, CliError> {
    if config.verify.suites.is_empty() {
        return Err(CliError::Config {
            path: "verify.suites".into(),
            message: format!(
                "no suites requested; choose from {}",
                EstimateId::ALL.map(|e| e.name()).join(", ")
            ),
        });
    }
    let ids = config
        .verify
        .suites
        .iter()
        .enumerate()
        .map(|(i, s)| {
            EstimateId::parse(s).map_err(|e| CliError::Config {
                path: format!("verify.suites[{i}]"),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Artifacts::new(&config.output)?;
    let mut summary = Vec::new();
    let mut pass = true;
    for id in ids {
        let e = ensemble(config, id);
        e.validate().map_err(|err| CliError::Config {
            path: "verify".into(),
            message: err.to_string(),
        })?;
        let report = run_suite(id, &e)?;
        let csv = format!("report_{}.csv", id.name());
        let mut v = serde_json::to_value(&report).map_err(|err| CliError::Io(err.to_string()))?;
        v["csv"] = json!(csv);
        v["csv_columns"] = json!(TRIAL_COLUMNS);
        out.json(&format!("report_{}.json", id.name()), &v)?;
        out.text(&csv, &report.to_csv())?;
        println!(
            "{:<20} {:<12} worst ratio {:.4}",
            id.name(),
            name(report.verdict),
            report.worst_ratio
        );
        pass &= report.passed();
        summary.push(json!({
            "estimate": id.name(),
            "verdict": report.verdict,
            "worst_ratio": report.worst_ratio,
        }));
    }
    out.json("summary.json", &summary)?;
    Ok(finish(&out, pass))
}

pub fn mc(config: &RunConfig, base: &Path) -> Result<bool, CliError> {
    let grid = config.grid()?;
    let m = &config.mc;
    let data: &DataSpec = m.data.as_ref().unwrap_or(&config.solve.data);
    let f = data.evaluator(grid.d).ok_or_else(|| CliError::Config {
        path: "mc.data".into(),
        message: "Monte Carlo needs an analytic profile".into(),
    })?;
    let spec = operator(config, config.solve.variant)?;
    let alpha = mc_exponent(&spec).map_err(|e| CliError::Config {
        path: "kernel".into(),
        message: e.to_string(),
    })?;
    let result = feynman_kac_mc(alpha, grid.d, &*f, m.lambda, &m.points, m.paths, config.seed, Some(grid.box_len))?;
    let fg = data.sample(grid, base)?;
    let u = resolvent_solve(&table(&spec, &grid)?, &fg, m.lambda)?.u;
    let mut csv = String::from("point,estimate,std_error,reference,z\n");
    let mut rows = Vec::new();
    let mut pass = true;
    for (k, x) in m.points.iter().enumerate() {
        let reference = interpolate(&u, x);
        let (est, se) = (result.estimates[k], result.std_errors[k]);
        let z = (est - reference).abs() / se;
        pass &= (est - reference).abs() <= m.tolerance * se;
        let coords: Vec<String> = x.iter().map(|v| num(*v)).collect();
        csv += &format!("{},{},{},{},{}\n", coords.join(" "), num(est), num(se), num(reference), num(z));
        rows.push(json!({"point": x, "reference": reference, "z": z}));
    }
    let mut out = Artifacts::new(&config.output)?;
    out.text("mc.csv", &csv)?;
    out.json(
        "mc.json",
        &json!({
            "result": result,
            "comparison": rows,
            "tolerance_std_errors": m.tolerance,
            "grid": grid,
            "csv": "mc.csv",
            "csv_columns": ["point", "estimate", "std_error", "reference", "z"],
            "pass": pass,
        }),
    )?;
    Ok(finish(&out, pass))
}
