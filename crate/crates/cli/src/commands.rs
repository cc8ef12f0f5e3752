use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use xrt_core::abel::{abel_coefficients, abel_coefficients_oracle};
use xrt_core::grid::rasterize;
use xrt_core::io::{self, KeyValues};
use xrt_core::recon::{solve, spectrum_report, uniqueness_probe, MaskedProblem, Solver};
use xrt_core::riesz::{self, Apodization, RieszOrder, DEFAULT_APODIZATION};
use xrt_core::seismo::{half_local_problem, recover_difference, synthesize_splitting, SplitScenario};
use xrt_core::symkernel::{
    check_hypothesis, exponents_of_degree, format_expansion, parse_rational, rational_sample_points,
    KernelAlgebra, Polynomial,
};
use xrt_core::xray::{lines_meeting_region, normal_operator, xray_adjoint, xray_forward};
use xrt_core::{GridField, LineMask, SinogramGeometry};

use crate::config::{as_strs, parse_phantom, region_key, with_phantom_keys, RunConfig};

/// Text written to stdout (and to a report file when asked) plus whether
/// every check in the command passed.
pub struct Outcome {
    pub report: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Outcome { report, passed: true }
    }
}

fn write_field(cfg: &RunConfig, f: &GridField, csv: Option<&Path>) -> Result<()> {
    io::write_field(cfg.output()?, f)?;
    if let Some(p) = csv {
        std::fs::write(p, io::field_to_csv(f)?)?;
    }
    Ok(())
}

fn geometry(kv: &KeyValues, n: usize) -> Result<SinogramGeometry> {
    let n_theta = kv.value_or("n_theta", 2 * n)?;
    Ok(match kv.parse_value::<usize>("n_s")? {
        Some(n_s) => SinogramGeometry::new(n_theta, n_s)?,
        None => SinogramGeometry::for_grid(n, n_theta)?,
    })
}

pub fn phantom(cfg: &RunConfig, csv: Option<&Path>) -> Result<Outcome> {
    cfg.allow(&as_strs(&with_phantom_keys(&["n", "dim"])))?;
    let n = cfg.params.require("n")?;
    let dim = cfg.params.value_or("dim", 2)?;
    let f = rasterize(&parse_phantom(&cfg.params)?, n, dim)?;
    write_field(cfg, &f, csv)?;
    Ok(Outcome::ok(format!("n={n}\ndim={dim}\nintegral={:e}\n", f.integral())))
}

pub fn xray(cfg: &RunConfig) -> Result<Outcome> {
    cfg.allow(&["n_theta", "n_s"])?;
    let f = io::read_field(cfg.input()?)?;
    let geom = geometry(&cfg.params, f.n())?;
    let g = xray_forward(&f, &geom)?;
    io::write_sinogram(cfg.output()?, &g)?;
    Ok(Outcome::ok(format!("n_theta={}\nn_s={}\n", geom.n_theta(), geom.n_s())))
}

pub fn adjoint(cfg: &RunConfig, csv: Option<&Path>) -> Result<Outcome> {
    cfg.allow(&["n"])?;
    let g = io::read_sinogram(cfg.input()?)?;
    let n = cfg.params.require("n")?;
    let f = xray_adjoint(&g, n)?;
    write_field(cfg, &f, csv)?;
    Ok(Outcome::ok(format!("n={n}\n")))
}

pub fn normal(cfg: &RunConfig, csv: Option<&Path>) -> Result<Outcome> {
    cfg.allow(&["n_theta", "n_s"])?;
    let f = io::read_field(cfg.input()?)?;
    let geom = geometry(&cfg.params, f.n())?;
    let nf = normal_operator(&f, &geom)?;
    write_field(cfg, &nf, csv)?;
    Ok(Outcome::ok(format!("n_theta={}\nn_s={}\n", geom.n_theta(), geom.n_s())))
}

/// `op=potential` (default, `alpha`, default `d - 1`) or `op=laplacian` (`s`).
pub fn riesz(cfg: &RunConfig, csv: Option<&Path>) -> Result<Outcome> {
    cfg.allow(&["op", "alpha", "s"])?;
    let f = io::read_field(cfg.input()?)?;
    let op = cfg.params.get("op").unwrap_or("potential");
    let (out, line) = match op {
        "potential" => {
            let alpha = cfg.params.value_or("alpha", (f.dim() - 1) as f64)?;
            let ord = RieszOrder::new(alpha, f.dim())?;
            (riesz::riesz_potential(&f, &ord)?, format!("alpha={alpha}"))
        }
        "laplacian" => {
            let s = cfg.params.require("s")?;
            (riesz::fractional_laplacian(&f, s)?, format!("s={s}"))
        }
        other => bail!("unknown op {other}"),
    };
    write_field(cfg, &out, csv)?;
    Ok(Outcome::ok(format!("op={op}\n{line}\n")))
}

/// `window=default|none|PASS,STOP`; with `truth` set, reports the error.
pub fn invert(cfg: &RunConfig, truth: Option<&Path>, csv: Option<&Path>) -> Result<Outcome> {
    cfg.allow(&["window"])?;
    let nf = io::read_field(cfg.input()?)?;
    let window = match cfg.params.get("window").unwrap_or("default") {
        "default" => Some(DEFAULT_APODIZATION),
        "none" => None,
        w => {
            let Some((a, b)) = w.split_once(',') else {
                bail!("window must be default, none or PASS,STOP");
            };
            Some(Apodization::new(a.trim().parse()?, b.trim().parse()?)?)
        }
    };
    let f = riesz::invert_normal_with(&nf, window)?;
    write_field(cfg, &f, csv)?;
    let mut report = format!("n={}\n", f.n());
    if let Some(t) = truth {
        let t = io::read_field(t)?;
        writeln!(report, "relative_error={:e}", f.relative_l2_error(&t)?)?;
    }
    Ok(Outcome::ok(report))
}

/// Expands every monomial up to `degree` and checks it exactly at `points`
/// rational points; one PASS/FAIL line per monomial.
pub fn lemma_verify(cfg: &RunConfig) -> Result<Outcome> {
    cfg.allow(&["d", "alpha", "degree", "points", "dump"])?;
    let d: usize = cfg.params.require("d")?;
    let alpha = parse_rational(cfg.params.get("alpha").unwrap_or("1"))?;
    let degree: u32 = cfg.params.value_or("degree", 6)?;
    let count = cfg.params.value_or("points", 20)?;
    let dump: bool = cfg.params.value_or("dump", false)?;
    check_hypothesis(degree as usize, d, &alpha)?;
    let mut algebra = KernelAlgebra::new(d)?;
    let points = rational_sample_points(d, count, cfg.seed);
    let mut report = String::new();
    let mut passed = true;
    for deg in 0..=degree {
        for gamma in exponents_of_degree(d, deg) {
            let p = Polynomial::monomial(&gamma);
            let ok = algebra.verify_polynomial(&p, &alpha, &points)?;
            passed &= ok;
            let g: Vec<String> = gamma.iter().map(u32::to_string).collect();
            writeln!(report, "{} gamma=({})", if ok { "PASS" } else { "FAIL" }, g.join(","))?;
            if dump {
                report.push_str(&format_expansion(&algebra.expand_polynomial_symbolic(&p)?));
            }
        }
    }
    Ok(Outcome { report, passed })
}

/// Writes `k n A_k^n` lines; `check_oracle=true` compares every entry with
/// the series oracle.
pub fn abel_tables(cfg: &RunConfig) -> Result<Outcome> {
    cfg.allow(&["k_max", "n_max", "check_oracle"])?;
    let k_max = cfg.params.require("k_max")?;
    let n_max = cfg.params.require("n_max")?;
    let table = abel_coefficients(k_max, n_max)?;
    let mut passed = true;
    let mut summary = String::new();
    if cfg.params.value_or("check_oracle", false)? {
        let mut mismatches = 0usize;
        for k in 0..=k_max {
            for n in 0..=n_max {
                let oracle = abel_coefficients_oracle(k, n)?;
                if !oracle.is_integer() || oracle.to_integer() != *table.get(k, n) {
                    mismatches += 1;
                }
            }
        }
        passed = mismatches == 0;
        writeln!(summary, "oracle_mismatches={mismatches}")?;
    }
    for k in 0..=k_max {
        match table.threshold(k) {
            Some(t) => writeln!(summary, "threshold_{k}={t}")?,
            None => writeln!(summary, "threshold_{k}=none")?,
        }
    }
    match &cfg.output {
        Some(p) => {
            std::fs::write(p, table.to_text())?;
            Ok(Outcome { report: summary, passed })
        }
        None => Ok(Outcome {
            report: table.to_text() + &summary,
            passed,
        }),
    }
}

const PROBLEM_KEYS: &[&str] = &["n", "n_theta", "n_s", "roi", "arc", "support", "known_zero", "noise"];

/// The masked problem described by the config: a phantom, and either `roi`
/// (lines meeting a region) with optional `support` / `known_zero`, or `arc`
/// (the half-local problem for receivers on a boundary arc).
fn build_problem(cfg: &RunConfig) -> Result<MaskedProblem> {
    let kv = &cfg.params;
    let n = kv.require("n")?;
    let geom = geometry(kv, n)?;
    let phantom = parse_phantom(kv)?;
    let problem = match (region_key(kv, "arc")?, region_key(kv, "roi")?) {
        (Some(_), Some(_)) => bail!("give either arc or roi, not both"),
        (Some(arc), None) => {
            if kv.get("support").is_some() || kv.get("known_zero").is_some() {
                bail!("arc problems fix their own support and known_zero");
            }
            half_local_problem(&arc, &phantom, n, geom.n_theta(), geom.n_s())?.0
        }
        (None, roi) => {
            let truth = rasterize(&phantom, n, 2)?;
            let data = xray_forward(&truth, &geom)?;
            let mask = match &roi {
                Some(r) => lines_meeting_region(&geom, n, r)?,
                None => LineMask::full(geom.clone()),
            };
            let support = region_key(kv, "support")?;
            let known_zero = region_key(kv, "known_zero")?;
            MaskedProblem::from_regions(n, data, mask, support.as_ref(), known_zero.as_ref())?
                .with_truth(truth)?
        }
    };
    let sigma: f64 = kv.value_or("noise", 0.0)?;
    if sigma > 0.0 {
        Ok(problem.with_noise(sigma, cfg.seed)?)
    } else {
        Ok(problem)
    }
}

pub fn roi_recon(cfg: &RunConfig, csv: Option<&Path>) -> Result<Outcome> {
    let mut keys = with_phantom_keys(PROBLEM_KEYS);
    keys.extend(["solver", "max_iter", "tol", "probe_trials"].map(String::from));
    cfg.allow(&as_strs(&keys))?;
    let kv = &cfg.params;
    let problem = build_problem(cfg)?;
    let solver: Solver = kv.value_or("solver", Solver::Cgls)?;
    let max_iter = kv.value_or("max_iter", 2000)?;
    let tol = kv.value_or("tol", 1e-10)?;
    let (f, report) = solve(&problem, solver, max_iter, tol)?;
    let mut out = report.to_key_values();
    out.set("unknowns", problem.unknown_count());
    out.set("rows", problem.row_count());
    let trials: usize = kv.value_or("probe_trials", 0)?;
    if trials > 0 {
        let probe = uniqueness_probe(&problem, trials, max_iter, tol, cfg.seed)?;
        out.set("probe_trials", trials);
        out.set("probe_seed", cfg.seed);
        out.set("probe_distance", format!("{:e}", probe.max_distance));
    }
    if cfg.output.is_some() {
        write_field(cfg, &f, csv)?;
    }
    Ok(Outcome::ok(out.to_text()))
}

/// Singular values of the configured problem, and with `compare_full=true`
/// of the same problem with every line measured.
pub fn spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let mut keys = with_phantom_keys(PROBLEM_KEYS);
    keys.extend(["compare_full", "list"].map(String::from));
    cfg.allow(&as_strs(&keys))?;
    let kv = &cfg.params;
    let problem = build_problem(cfg)?;
    let report = spectrum_report(&problem)?;
    let mut out = report.to_key_values();
    let mut passed = true;
    if kv.value_or("compare_full", false)? {
        let full = MaskedProblem::new(
            problem.n(),
            problem.data().clone(),
            LineMask::full(problem.data().geometry().clone()),
            problem.support().to_vec(),
            problem.known_zero().to_vec(),
        )?;
        let full_report = spectrum_report(&full)?;
        let (c, cf) = (report.condition_number(), full_report.condition_number());
        if let Some(cf) = cf {
            out.set("full_condition_number", format!("{cf:e}"));
        }
        let worse = matches!((c, cf), (Some(c), Some(cf)) if c > cf);
        out.set("masked_worse_conditioned", worse);
        passed = worse;
    }
    let mut text = out.to_text();
    if kv.value_or("list", false)? {
        for v in &report.singular_values {
            writeln!(text, "sigma={v:e}")?;
        }
    }
    Ok(Outcome { report: text, passed })
}

pub fn seismo(cfg: &RunConfig, csv: Option<&Path>) -> Result<Outcome> {
    let mut keys: Vec<&str> = SplitScenario::KEYS.to_vec();
    keys.extend(["n", "n_theta", "n_s", "max_iter", "tol"]);
    cfg.allow(&keys)?;
    let kv = &cfg.params;
    let n = kv.require("n")?;
    let geom = geometry(kv, n)?;
    let mut scenario_kv = KeyValues::new();
    for k in SplitScenario::KEYS {
        if let Some(v) = kv.get(k) {
            scenario_kv.set(k, v);
        }
    }
    let scenario = SplitScenario::from_key_values(&scenario_kv)?;
    let data = synthesize_splitting(&scenario, n, geom.n_theta(), geom.n_s())?;
    let (f, report) = recover_difference(
        &data,
        &scenario,
        kv.value_or("max_iter", 2000)?,
        kv.value_or("tol", 1e-10)?,
    )?;
    let mut out = report.to_key_values();
    for (i, w) in data.warnings.iter().enumerate() {
        out.set(&format!("warning_{}", i + 1), w);
    }
    if cfg.output.is_some() {
        write_field(cfg, &f, csv)?;
    }
    Ok(Outcome::ok(out.to_text()))
}
