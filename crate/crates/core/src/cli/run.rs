//! Experiment execution and run manifests.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::{validate, ExperimentKind, Issue, RunConfig};
use super::dump::{write_dump, Dump};
use crate::diagnostics::{
    analyticity_check, bessel_specs, common_radius, moment_estimates, path_norms, tightness_check,
    CrOptions,
};
use crate::dissipation::{
    default_psi_grid, energy_bootstrap, psi_convergence, verify_psi_properties, PsiM,
};
use crate::error::{Error, Result};
use crate::linear::{
    solve_linear, Forcing, LinearProblem, NoiseForcing, PathEnsemble, SolverOptions,
};
use crate::operator::{check_coercivity, DenseOperatorPair, SampleState};
use crate::quasilinear::{
    check_ql_coercivity, martingale_residuals, random_martingale_tests, random_samples,
    sampled_constants, solve_ql, QlOptions, QlProblem,
};
use crate::spectral::{SpaceTag, SpectralTriple, TimeNorm};
use crate::stats::mean_estimate;
use crate::stein::{
    compute_mu_rho, default_z_grid, endpoint_perturbation_check, verify_distance_bound,
    verify_strip_coercivity, SteinFamily, SteinParams,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug)]
pub enum RunFailure {
    Invalid(Vec<Issue>),
    Failed(Error),
}

impl RunFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunFailure::Invalid(_) => 2,
            RunFailure::Failed(Error::Io(_)) => 1,
            RunFailure::Failed(e) if e.is_numeric() => 3,
            RunFailure::Failed(_) => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            RunFailure::Invalid(issues) => {
                json!({ "error": "validation", "exit_code": 2, "issues": issues })
            }
            RunFailure::Failed(e) => {
                let kind = match (e, self.exit_code()) {
                    (_, 1) => "io",
                    (_, 3) => "numeric",
                    _ => "validation",
                };
                json!({ "error": kind, "exit_code": self.exit_code(), "message": e.to_string() })
            }
        }
    }
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        RunFailure::Failed(e)
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::Invalid(issues) => {
                write!(f, "{} validation issue(s)", issues.len())?;
                for i in issues {
                    write!(f, "\n  {}: {}", i.field, i.message)?;
                }
                Ok(())
            }
            RunFailure::Failed(e) => write!(f, "{e}"),
        }
    }
}

/// Validates, runs and writes the outputs followed by `manifest.json`.
/// Failures leave an `error.json` in `out_dir` when it is writable.
pub fn run(
    cfg: &RunConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> std::result::Result<RunManifest, RunFailure> {
    let result = run_inner(cfg, out_dir, workers);
    if let Err(f) = &result {
        if std::fs::create_dir_all(out_dir).is_ok() {
            let _ = std::fs::write(out_dir.join("error.json"), pretty(&f.to_json()));
        }
    }
    result
}

fn run_inner(
    cfg: &RunConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> std::result::Result<RunManifest, RunFailure> {
    let issues = validate(cfg);
    if !issues.is_empty() {
        return Err(RunFailure::Invalid(issues));
    }
    let start = Instant::now();
    let files = execute(cfg, workers)?;
    std::fs::create_dir_all(out_dir).map_err(Error::from)?;
    let _ = std::fs::remove_file(out_dir.join("error.json"));
    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        std::fs::write(out_dir.join(&name), &bytes).map_err(Error::from)?;
        outputs.push(OutputFile {
            name,
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = RunManifest {
        kind: cfg.kind.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: VERSION.into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    std::fs::write(out_dir.join("manifest.json"), pretty(&manifest)).map_err(Error::from)?;
    Ok(manifest)
}

/// Runs the experiment in memory: `(file name, contents)` in write order.
pub fn execute(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    match cfg.kind {
        ExperimentKind::SolveLinear => solve_linear_run(cfg, workers),
        ExperimentKind::SolveQl => solve_ql_run(cfg, workers),
        ExperimentKind::SteinVerify => stein_run(cfg, workers),
        ExperimentKind::PsiTest => psi_run(cfg),
        ExperimentKind::Bootstrap => bootstrap_run(cfg, workers),
        ExperimentKind::Moments => moments_run(cfg, workers),
        ExperimentKind::Tightness => tightness_run(cfg, workers),
        ExperimentKind::Analyticity => analyticity_run(cfg, workers),
        ExperimentKind::CheckCoercivity => coercivity_run(cfg),
    }
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn json_file<T: Serialize>(name: &str, value: &T) -> (String, Vec<u8>) {
    (name.into(), pretty(value))
}

fn csv_file(name: &str, header: &str, rows: &[String]) -> (String, Vec<u8>) {
    let mut s = String::with_capacity(header.len() + 32 * rows.len());
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    (name.into(), s.into_bytes())
}

fn dump_file(e: &PathEnsemble) -> Result<(String, Vec<u8>)> {
    let mut buf = Vec::new();
    write_dump(&mut buf, &Dump::from_ensemble(e))?;
    Ok(("trajectories.vspd".into(), buf))
}

fn pair_of(cfg: &RunConfig, triple: &SpectralTriple, seed: u64) -> Result<DenseOperatorPair> {
    let spec = cfg
        .pair
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{} needs a [pair] section", cfg.kind.name())))?;
    spec.build(triple, cfg.noise.modes, seed)
}

fn linear_problem(
    cfg: &RunConfig,
    triple: &SpectralTriple,
    pair: DenseOperatorPair,
    seed: u64,
) -> Result<LinearProblem> {
    let noise = cfg.noise.build(seed)?;
    let mut problem =
        LinearProblem::new(triple.clone(), Arc::new(pair), noise).with_u0(cfg.u0(triple.len())?);
    if let Some(f) = &cfg.forcing.f {
        problem = problem.with_f(Forcing::Constant(f.clone()));
    }
    if let Some(g) = &cfg.forcing.g {
        problem = problem.with_g(NoiseForcing::Constant(g.clone()));
    }
    Ok(problem)
}

fn solver_options(cfg: &RunConfig, workers: Option<usize>) -> SolverOptions {
    SolverOptions {
        paths: cfg.numerics.paths,
        first_path: cfg.numerics.first_path,
        workers,
    }
}

fn ql_options(cfg: &RunConfig, workers: Option<usize>) -> QlOptions {
    let n = &cfg.numerics;
    QlOptions {
        paths: n.paths,
        first_path: n.first_path,
        workers,
        m: n.m,
        r_trunc: n.r_trunc,
        grid_points: n.grid_points,
        kernel_nodes: n.kernel_nodes,
        y_window: n.y_window,
    }
}

fn ql_problem(cfg: &RunConfig, seed: u64) -> Result<QlProblem> {
    let triple = cfg.triple()?;
    let spec = cfg.coefficients.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "{} needs a [coefficients] section",
            cfg.kind.name()
        ))
    })?;
    let coeffs = spec.build(&triple, cfg.noise.modes)?;
    let u0 = cfg.u0(triple.len())?;
    Ok(QlProblem::new(triple, coeffs, u0, cfg.noise.build(seed)?))
}

/// Ensemble means of `‖u(T)‖²_H`, `sup_t ‖u‖²_H` and `∫‖u‖²_V`.
fn ensemble_summary(
    e: &PathEnsemble,
    triple: &SpectralTriple,
    workers: Option<usize>,
) -> Result<serde_json::Value> {
    let final_h: Vec<f64> = (0..e.len())
        .map(|p| {
            triple
                .norm_slice(e.final_state(p), SpaceTag::H)
                .map(|x| x * x)
        })
        .collect::<Result<_>>()?;
    let sup_h: Vec<f64> = path_norms(e, triple, TimeNorm::sup_h(), workers)?
        .iter()
        .map(|x| x * x)
        .collect();
    let l2_v: Vec<f64> = path_norms(e, triple, TimeNorm::lp_v(2.0), workers)?
        .iter()
        .map(|x| x * x)
        .collect();
    Ok(json!({
        "paths": e.len(),
        "steps": e.n_times() - 1,
        "t_end": e.grid.last().copied().unwrap_or(0.0),
        "state_len": e.state_len(),
        "seed": e.seed,
        "problem": e.metadata.problem,
        "solver": e.metadata.solver,
        "final_h_sq": mean_estimate(&final_h),
        "sup_h_sq": mean_estimate(&sup_h),
        "l2_v_sq": mean_estimate(&l2_v),
    }))
}

/// The trajectories of a `solve-linear` or `solve-ql` config, after validation.
pub fn solve_ensemble(
    cfg: &RunConfig,
    workers: Option<usize>,
) -> std::result::Result<PathEnsemble, RunFailure> {
    let issues = validate(cfg);
    if !issues.is_empty() {
        return Err(RunFailure::Invalid(issues));
    }
    Ok(match cfg.kind {
        ExperimentKind::SolveLinear => {
            let triple = cfg.triple()?;
            let pair = pair_of(cfg, &triple, cfg.seed)?;
            solve_linear(
                &linear_problem(cfg, &triple, pair, cfg.seed)?,
                &solver_options(cfg, workers),
            )?
        }
        ExperimentKind::SolveQl => {
            solve_ql(&ql_problem(cfg, cfg.seed)?, &ql_options(cfg, workers))?
        }
        other => {
            return Err(
                Error::Config(format!("{} does not produce trajectories", other.name())).into(),
            )
        }
    })
}

fn solve_linear_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let triple = cfg.triple()?;
    let pair = pair_of(cfg, &triple, cfg.seed)?;
    let problem = linear_problem(cfg, &triple, pair, cfg.seed)?;
    let e = solve_linear(&problem, &solver_options(cfg, workers))?;
    let summary = ensemble_summary(&e, &triple, workers)?;
    Ok(vec![dump_file(&e)?, json_file("summary.json", &summary)])
}

fn solve_ql_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let problem = ql_problem(cfg, cfg.seed)?;
    let options = ql_options(cfg, workers);
    let e = solve_ql(&problem, &options)?;
    let summary = ensemble_summary(&e, &problem.triple, workers)?;
    let mut files = vec![dump_file(&e)?, json_file("summary.json", &summary)];
    let count = cfg.numerics.martingale_tests;
    if count > 0 {
        let tests = random_martingale_tests(
            count,
            problem.triple.components(),
            problem.triple.dim(),
            &e.grid,
            cfg.seed,
        );
        let stats = martingale_residuals(&e, &problem, &options, &tests)?;
        let rows: Vec<String> = tests
            .iter()
            .zip(&stats)
            .enumerate()
            .map(|(k, (t, s))| {
                format!(
                    "{k},{},{},{},{},{},{},{}",
                    t.s,
                    t.t,
                    t.quadratic,
                    s.mean,
                    s.se,
                    s.z,
                    s.accepted()
                )
            })
            .collect();
        files.push(csv_file(
            "martingale.csv",
            "test,s,t,quadratic,mean,se,z,accepted",
            &rows,
        ));
    }
    Ok(files)
}

fn big_r(cfg: &RunConfig, rho: f64) -> f64 {
    cfg.numerics
        .big_r
        .unwrap_or_else(|| SteinParams::admissible_big_r(rho, 0.5))
}

fn stein_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let n = &cfg.numerics;
    let triple = cfg.triple()?;
    let pair = pair_of(cfg, &triple, cfg.seed)?;
    let report = check_coercivity(&pair, &triple, 0.0, &SampleState::deterministic(), 0, 0.0)?;
    let (mu, rho) = compute_mu_rho(&report)?;
    let params = SteinParams::new(mu, rho, n.r, big_r(cfg, rho), n.q)?;
    let family = SteinFamily::new(&pair, &triple, params)?;
    let distance = verify_distance_bound(&pair, &triple, &params, n.probes)?;
    let z_grid = default_z_grid();
    let strip = verify_strip_coercivity(&family, &triple, &z_grid, n.probes, workers)?;
    let ts = [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0];
    let endpoint = endpoint_perturbation_check(&family, n.c_p, &ts)?;
    let theta = Complex64::new(params.theta, 0.0);
    let mut reproduction = family
        .a_z(theta)?
        .iter()
        .zip(family.a().iter())
        .map(|(z, a)| (z - a).norm())
        .fold(0.0, f64::max);
    for (bz, b) in family.b_z(theta)?.iter().zip(family.b()) {
        reproduction = bz
            .iter()
            .zip(b.iter())
            .map(|(z, a)| (z - a).norm())
            .fold(reproduction, f64::max);
    }
    let out = json!({
        "params": params,
        "coercivity": report,
        "distance": distance,
        "strip": strip,
        "strip_bound": 1.0 - params.big_r * (1.0 - params.rho),
        "endpoint": endpoint,
        "theta_reproduction": reproduction,
    });
    Ok(vec![json_file("stein.json", &out)])
}

fn psi_run(cfg: &RunConfig) -> Result<Vec<(String, Vec<u8>)>> {
    let n = &cfg.numerics;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &m in &n.m_list {
        let p = PsiM::new(n.q, m)?;
        let r = verify_psi_properties(&p, &default_psi_grid(m), 1e-10)?;
        for c in &r.inequalities {
            rows.push(format!(
                "{},{},\"{}\",{},{},{}",
                n.q, m, c.name, c.min_slack, c.worst_xi, c.violations
            ));
        }
        reports.push(json!({ "report": r, "passes": r.passes(1e-10, 1e-12) }));
    }
    let xi = n.m_list.iter().copied().fold(0.0, f64::max) / 2.0;
    let convergence = psi_convergence(n.q, &n.m_list, xi)?;
    let out = json!({ "q": n.q, "levels": reports, "convergence": convergence });
    Ok(vec![
        csv_file(
            "psi.csv",
            "q,m,inequality,min_slack,worst_xi,violations",
            &rows,
        ),
        json_file("psi.json", &out),
    ])
}

fn bootstrap_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let n = &cfg.numerics;
    let problem = ql_problem(cfg, cfg.seed)?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &r in &n.r_list {
        let options = QlOptions {
            r_trunc: Some(r),
            ..ql_options(cfg, workers)
        };
        let e = solve_ql(&problem, &options)?;
        for &m in &n.m_list {
            let b = energy_bootstrap(
                &e,
                &problem.triple,
                &PsiM::new(n.q, m)?,
                n.grid_points,
                workers,
            )?;
            rows.push(format!(
                "{r},{m},{},{},{},{},{}",
                b.psi_term.value,
                b.gradient_term.value,
                b.initial_lq.value,
                b.ratio.value,
                b.ratio.se
            ));
            reports.push(json!({ "r_trunc": r, "report": b }));
        }
    }
    // Largest relative change of the ratio between consecutive radii, per ψ level.
    let k = n.m_list.len();
    let ratio = |i: usize| {
        reports[i]["report"]["ratio"]["value"]
            .as_f64()
            .unwrap_or(f64::NAN)
    };
    let changes: Vec<f64> = (0..k)
        .map(|j| {
            (1..n.r_list.len())
                .map(|i| {
                    let (a, b) = (ratio((i - 1) * k + j), ratio(i * k + j));
                    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let out = json!({ "q": n.q, "m_list": n.m_list, "r_list": n.r_list, "runs": reports, "max_change": changes });
    Ok(vec![
        csv_file(
            "bootstrap.csv",
            "r_trunc,m,psi_term,gradient_term,initial_lq,ratio,ratio_se",
            &rows,
        ),
        json_file("bootstrap.json", &out),
    ])
}

fn moments_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let triple = cfg.triple()?;
    let pair = pair_of(cfg, &triple, cfg.seed)?;
    let problem = linear_problem(cfg, &triple, pair, cfg.seed)?;
    let e = solve_linear(&problem, &solver_options(cfg, workers))?;
    let report = moment_estimates(&e, &triple, &bessel_specs(&cfg.numerics.p_list), workers)?;
    let rows: Vec<String> = report
        .entries
        .iter()
        .map(|en| {
            let (r, rse) = en.ratio.map_or((f64::NAN, f64::NAN), |r| (r.value, r.se));
            format!(
                "\"{}\",{},{},{},{},{},{r},{rse}",
                en.spec.norm.label(),
                en.spec.p,
                en.moment.value,
                en.moment.se,
                en.norm.value,
                en.data.total()
            )
        })
        .collect();
    Ok(vec![
        csv_file(
            "moments.csv",
            "norm,p,moment,moment_se,norm_p,data,ratio,ratio_se",
            &rows,
        ),
        json_file("moments.json", &report),
    ])
}

fn tightness_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let n = &cfg.numerics;
    let triple = cfg.triple()?;
    let mut reports = Vec::with_capacity(n.battery);
    let mut rows = Vec::new();
    for j in 0..n.battery as u64 {
        let seed = cfg.seed.wrapping_add(j);
        let pair = pair_of(cfg, &triple, seed)?;
        let problem = linear_problem(cfg, &triple, pair, seed)?;
        let e = solve_linear(&problem, &solver_options(cfg, workers))?;
        let r = tightness_check(&e, &triple, n.theta, n.p, &n.radii, n.eps, workers)?;
        for ((radius, tail), bound) in r.radii.iter().zip(&r.tails).zip(&r.bounds) {
            let mut row = String::new();
            let _ = write!(
                row,
                "{j},{radius},{},{},{},{}",
                tail.value, tail.se, bound.value, bound.se
            );
            rows.push(row);
        }
        reports.push(r);
    }
    let out = json!({
        "members": reports,
        "dominated": reports.iter().all(|r| r.dominated()),
        "common_radius": common_radius(&reports),
    });
    Ok(vec![
        csv_file(
            "tightness.csv",
            "member,radius,tail,tail_se,bound,bound_se",
            &rows,
        ),
        json_file("tightness.json", &out),
    ])
}

fn analyticity_run(cfg: &RunConfig, workers: Option<usize>) -> Result<Vec<(String, Vec<u8>)>> {
    let n = &cfg.numerics;
    let triple = cfg.triple()?;
    let pair = pair_of(cfg, &triple, cfg.seed)?;
    let report = check_coercivity(&pair, &triple, 0.0, &SampleState::deterministic(), 0, 0.0)?;
    let (_, rho) = compute_mu_rho(&report)?;
    let family = SteinFamily::from_pair(&pair, &triple, n.r, big_r(cfg, rho), n.q)?;
    let problem = linear_problem(cfg, &triple, pair, cfg.seed)?;
    let z_grid: Vec<Complex64> = match &n.z_grid {
        Some(zs) => zs.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
        None => vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.25, 0.5),
            Complex64::new(0.75, -0.5),
        ],
    };
    let eta = triple.basis(0, 0).coeffs;
    let options = CrOptions {
        h: n.h,
        time_index: None,
        paths: n.paths,
        workers,
    };
    let r = analyticity_check(&family, &problem, &z_grid, &eta, &options)?;
    let out = json!({ "params": family.params(), "report": r });
    Ok(vec![json_file("analyticity.json", &out)])
}

fn coercivity_run(cfg: &RunConfig) -> Result<Vec<(String, Vec<u8>)>> {
    let triple = cfg.triple()?;
    let mut out = serde_json::Map::new();
    if let Some(spec) = &cfg.pair {
        let pair = pair_of(cfg, &triple, cfg.seed)?;
        let r = check_coercivity(
            &pair,
            &triple,
            0.0,
            &SampleState::deterministic(),
            cfg.numerics.probes,
            spec.m,
        )?;
        out.insert("coercive".into(), json!(r.lambda > 0.0));
        out.insert("pair".into(), json!(r));
    }
    if let Some(spec) = &cfg.coefficients {
        let coeffs = spec.build(&triple, cfg.noise.modes)?;
        let samples = random_samples(&coeffs, spec.samples, cfg.noise.t_end, spec.y_max, cfg.seed);
        let c = check_ql_coercivity(&coeffs, &samples)?;
        let constants = sampled_constants(&coeffs, &samples, spec.growth_exponent)?;
        out.insert(
            "coefficients".into(),
            json!({
                "samples": samples.len(),
                "margin": c.margin,
                "coercive": c.margin > 0.0,
                "worst_sample": c.worst_sample.map(|i| &samples[i]),
                "worst_component": c.worst_component,
                "constants": constants,
            }),
        );
    }
    Ok(vec![json_file("coercivity.json", &out)])
}
