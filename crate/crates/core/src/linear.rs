//! Strong solutions of the linear problem
//!
//! ```text
//! du + A(t) u dt = f(t) dt + (B(t) u + g(t)) dW,   u(0) = u₀
//! ```
//!
//! on the Galerkin space, by drift-implicit / diffusion-explicit
//! Euler–Maruyama:
//!
//! ```text
//! (I + Δt A(t_i)) u_{i+1} = u_i + Δt f(t_i) + Σ_n (B_n(t_i) u_i + g_n(t_i)) Δw_n^i
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::operator::{DenseOperatorPair, FnOperatorPair, OperatorPair, SampleState};
use crate::parallel::try_map_indexed;
use crate::spectral::{SpaceTag, SpectralTriple};

/// The reference operator `A₀ = diag(1 + λ_k)`, `⟨A₀u, v⟩ = (u | v)_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszMap {
    weights: Vec<f64>,
}

impl RieszMap {
    pub fn new(triple: &SpectralTriple) -> Self {
        Self {
            weights: triple.v_weights(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.weights))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.weights).map(|(x, w)| x * w).collect()
    }

    /// `(u | v)_V`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }
}

type VecFn = dyn Fn(f64, &SampleState) -> Vec<f64> + Send + Sync;
type VecListFn = dyn Fn(f64, &SampleState) -> Vec<Vec<f64>> + Send + Sync;
type InitFn = dyn Fn(u64) -> Vec<f64> + Send + Sync;

/// Deterministic forcing `f ∈ V*` (or state-dependent through the noise past).
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    Constant(Vec<f64>),
    Fn(Arc<VecFn>),
}

impl Forcing {
    pub fn from_fn(f: impl Fn(f64, &SampleState) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Forcing::Fn(Arc::new(f))
    }

    pub(crate) fn eval(&self, t: f64, state: &SampleState, n: usize) -> Option<Vec<f64>> {
        match self {
            Forcing::Zero => None,
            Forcing::Constant(v) => Some(v.clone()),
            Forcing::Fn(f) => {
                let v = f(t, state);
                debug_assert_eq!(v.len(), n);
                Some(v)
            }
        }
    }

    fn scaled(&self, factor: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        match self {
            Forcing::Zero => Forcing::Zero,
            other => {
                let inner = other.clone();
                Forcing::from_fn(move |t, s| {
                    let c = factor(t);
                    match &inner {
                        Forcing::Constant(v) => v.iter().map(|x| c * x).collect(),
                        Forcing::Fn(f) => f(t, s).into_iter().map(|x| c * x).collect(),
                        Forcing::Zero => unreachable!(),
                    }
                })
            }
        }
    }
}

/// Additive noise `g`: one `H` vector per noise mode.
#[derive(Clone, Default)]
pub enum NoiseForcing {
    #[default]
    Zero,
    Constant(Vec<Vec<f64>>),
    Fn(Arc<VecListFn>),
}

impl NoiseForcing {
    pub fn from_fn(f: impl Fn(f64, &SampleState) -> Vec<Vec<f64>> + Send + Sync + 'static) -> Self {
        NoiseForcing::Fn(Arc::new(f))
    }

    pub(crate) fn eval(&self, t: f64, state: &SampleState) -> Option<Vec<Vec<f64>>> {
        match self {
            NoiseForcing::Zero => None,
            NoiseForcing::Constant(v) => Some(v.clone()),
            NoiseForcing::Fn(f) => Some(f(t, state)),
        }
    }
}

#[derive(Clone)]
pub enum InitialData {
    Fixed(Vec<f64>),
    /// `u₀` as a function of the path index (independent of the driving noise).
    PerPath(Arc<InitFn>),
}

impl InitialData {
    pub fn eval(&self, path_index: u64) -> Vec<f64> {
        match self {
            InitialData::Fixed(v) => v.clone(),
            InitialData::PerPath(f) => f(path_index),
        }
    }
}

#[derive(Clone)]
pub struct LinearProblem {
    pub triple: SpectralTriple,
    pub pair: Arc<dyn OperatorPair>,
    pub f: Forcing,
    pub g: NoiseForcing,
    pub u0: InitialData,
    pub noise: NoiseModel,
}

impl LinearProblem {
    pub fn new(triple: SpectralTriple, pair: Arc<dyn OperatorPair>, noise: NoiseModel) -> Self {
        let u0 = InitialData::Fixed(vec![0.0; triple.len()]);
        Self {
            triple,
            pair,
            f: Forcing::Zero,
            g: NoiseForcing::Zero,
            u0,
            noise,
        }
    }

    pub fn with_u0(mut self, u0: Vec<f64>) -> Self {
        self.u0 = InitialData::Fixed(u0);
        self
    }

    pub fn with_f(mut self, f: Forcing) -> Self {
        self.f = f;
        self
    }

    pub fn with_g(mut self, g: NoiseForcing) -> Self {
        self.g = g;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.triple.len();
        if self.pair.size() != n {
            return Err(Error::shape(format!(
                "pair acts on {} coefficients, triple has {}",
                self.pair.size(),
                n
            )));
        }
        if self.pair.noise_modes() > self.noise.modes() {
            return Err(Error::shape(format!(
                "pair uses {} noise modes, noise model has {}",
                self.pair.noise_modes(),
                self.noise.modes()
            )));
        }
        if let InitialData::Fixed(u0) = &self.u0 {
            if u0.len() != n || u0.iter().any(|x| !x.is_finite()) {
                return Err(Error::shape(
                    "u0 must be finite with one entry per coefficient",
                ));
            }
        }
        if let Forcing::Constant(f) = &self.f {
            if f.len() != n {
                return Err(Error::shape("f has the wrong length"));
            }
        }
        if let NoiseForcing::Constant(g) = &self.g {
            if g.len() > self.noise.modes() || g.iter().any(|v| v.len() != n) {
                return Err(Error::shape("g must hold one H vector per noise mode"));
            }
        }
        Ok(())
    }
}

/// Per-step data norms recorded alongside each path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    /// `‖f(t_i)‖_{V*}` for each step.
    pub f_vdual: Vec<f64>,
    /// `‖g(t_i)‖_{HS(U,H)}` for each step.
    pub g_hs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMetadata {
    pub problem: String,
    pub solver: String,
    pub first_path: u64,
}

/// Seeded ensemble of discrete trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: Vec<f64>,
    pub components: usize,
    pub dim: usize,
    pub seed: u64,
    /// `P` paths, each `(n+1) × components·dim`, time-major.
    pub paths: Vec<Vec<f64>>,
    pub data: Vec<DataNorms>,
    pub metadata: EnsembleMetadata,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn state_len(&self) -> usize {
        self.components * self.dim
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn state(&self, path: usize, time: usize) -> &[f64] {
        let n = self.state_len();
        &self.paths[path][time * n..(time + 1) * n]
    }

    pub fn path_states(&self, path: usize) -> Vec<&[f64]> {
        (0..self.n_times()).map(|i| self.state(path, i)).collect()
    }

    pub fn final_state(&self, path: usize) -> &[f64] {
        self.state(path, self.n_times() - 1)
    }

    /// Sub-ensemble on every `stride`-th time point (the last point is kept).
    pub fn subsample(&self, stride: usize) -> Self {
        if stride <= 1 {
            return self.clone();
        }
        let last = self.n_times() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(stride).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        let paths = (0..self.len())
            .map(|p| {
                idx.iter()
                    .flat_map(|&i| self.state(p, i).iter().copied())
                    .collect()
            })
            .collect();
        Self {
            grid: idx.iter().map(|&i| self.grid[i]).collect(),
            paths,
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.paths.iter().all(|p| p.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub paths: usize,
    /// Path index of the first trajectory.
    pub first_path: u64,
    pub workers: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            paths: 1,
            first_path: 0,
            workers: None,
        }
    }
}

/// Implicit Euler for `u' + μ A₀ u = f`, `u(0) = 0`.
pub fn solve_deterministic_reference(
    triple: &SpectralTriple,
    mu: f64,
    f: &dyn Fn(f64) -> Vec<f64>,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param(format!("μ = {mu} must be positive")));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param(
            "grid must be strictly increasing with at least one step",
        ));
    }
    let w = triple.v_weights();
    let mut u = vec![0.0; triple.len()];
    let mut out = Vec::with_capacity(grid.len());
    out.push(u.clone());
    for (i, step) in grid.windows(2).enumerate() {
        let dt = step[1] - step[0];
        let fi = f(step[0]);
        if fi.len() != u.len() {
            return Err(Error::shape("forcing has the wrong length"));
        }
        for k in 0..u.len() {
            u[k] = (u[k] + dt * fi[k]) / (1.0 + dt * mu * w[k]);
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                step: i + 1,
                what: "reference solution".into(),
            });
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// `μ ‖u‖_{L^p(0,T;V)} / ‖f‖_{L^p(0,T;V*)}` for the reference problem; the
/// measured counterpart of the `μ`-independent constant `C_p`.
pub fn reference_ratio(
    triple: &SpectralTriple,
    mu: f64,
    f: &dyn Fn(f64) -> Vec<f64>,
    grid: &[f64],
    p: f64,
) -> Result<f64> {
    let u = solve_deterministic_reference(triple, mu, f, grid)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() - 1 {
        let dt = grid[i + 1] - grid[i];
        // u_{i+1} is the implicit response to f(t_i)
        num += dt * triple.norm_slice(&u[i + 1], SpaceTag::V)?.powf(p);
        den += dt * triple.norm_slice(&f(grid[i]), SpaceTag::Vdual)?.powf(p);
    }
    if den == 0.0 {
        return Err(Error::param("zero forcing"));
    }
    Ok(mu * num.powf(1.0 / p) / den.powf(1.0 / p))
}

type Lu = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;
type StepMatrices<'s> = (
    std::borrow::Cow<'s, Lu>,
    std::borrow::Cow<'s, Vec<DMatrix<f64>>>,
);

/// Step matrices, cached when the pair is autonomous.
struct Stepper<'a> {
    problem: &'a LinearProblem,
    cached: Option<(Lu, Vec<DMatrix<f64>>)>,
    cached_dt: f64,
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a LinearProblem) -> Self {
        Self {
            problem,
            cached: None,
            cached_dt: f64::NAN,
        }
    }

    fn matrices(&mut self, t: f64, dt: f64, state: &SampleState) -> StepMatrices<'_> {
        use std::borrow::Cow;
        let pair = &self.problem.pair;
        if pair.is_autonomous() {
            if self.cached.is_none() || self.cached_dt != dt {
                let a = pair.a(t, state);
                let m = DMatrix::identity(a.nrows(), a.ncols()) + a * dt;
                self.cached = Some((m.lu(), pair.b(t, state)));
                self.cached_dt = dt;
            }
            let (lu, b) = self.cached.as_ref().unwrap();
            (Cow::Borrowed(lu), Cow::Borrowed(b))
        } else {
            let a = pair.a(t, state);
            let m = DMatrix::identity(a.nrows(), a.ncols()) + a * dt;
            (Cow::Owned(m.lu()), Cow::Owned(pair.b(t, state)))
        }
    }
}

/// Replaces `B u` in the noise term; the fixed-point solver feeds the
/// previous iterate here.
enum Multiplicative<'a> {
    Own,
    Frozen(&'a [f64]),
}

fn solve_path(
    problem: &LinearProblem,
    path_index: u64,
    mult: Multiplicative<'_>,
) -> Result<(Vec<f64>, DataNorms)> {
    let triple = &problem.triple;
    let n = triple.len();
    let grid = problem.noise.grid();
    let steps = grid.len() - 1;
    let inc = problem.noise.sample_increments(path_index);
    let modes = problem.noise.modes();
    let u0 = problem.u0.eval(path_index);
    if u0.len() != n {
        return Err(Error::shape("u0 has the wrong length"));
    }
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(&u0);
    let mut data = DataNorms {
        f_vdual: Vec::with_capacity(steps),
        g_hs: Vec::with_capacity(steps),
    };
    let mut u = DVector::from_vec(u0);
    let mut w = vec![0.0; modes];
    let mut stepper = Stepper::new(problem);
    for i in 0..steps {
        let t = grid[i];
        let dt = grid[i + 1] - t;
        let state = SampleState {
            path_index,
            step: i,
            brownian: &w,
        };
        let mut rhs = u.clone();
        match problem.f.eval(t, &state, n) {
            Some(f) => {
                data.f_vdual.push(triple.norm_slice(&f, SpaceTag::Vdual)?);
                for k in 0..n {
                    rhs[k] += dt * f[k];
                }
            }
            None => data.f_vdual.push(0.0),
        }
        let g = problem.g.eval(t, &state);
        let mut g_hs2 = 0.0;
        if let Some(g) = &g {
            for (mode, gn) in g.iter().enumerate() {
                if gn.len() != n {
                    return Err(Error::shape("g_n has the wrong length"));
                }
                let dw = inc.get(mode, i);
                g_hs2 += gn.iter().map(|x| x * x).sum::<f64>();
                for k in 0..n {
                    rhs[k] += gn[k] * dw;
                }
            }
        }
        data.g_hs.push(g_hs2.sqrt());
        let (lu, b) = stepper.matrices(t, dt, &state);
        if !b.is_empty() {
            let source = match mult {
                Multiplicative::Own => u.clone(),
                Multiplicative::Frozen(phi) => DVector::from_column_slice(&phi[i * n..(i + 1) * n]),
            };
            for (mode, bn) in b.iter().enumerate() {
                let dw = inc.get(mode, i);
                rhs.gemv(dw, bn, &source, 1.0);
            }
        }
        let next = lu.solve(&rhs).ok_or(Error::SingularSystem { step: i })?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                step: i + 1,
                what: format!("path {path_index}"),
            });
        }
        u = next;
        states.extend(u.iter().copied());
        for (mode, wm) in w.iter_mut().enumerate() {
            *wm += inc.get(mode, i);
        }
    }
    Ok((states, data))
}

fn ensemble_from(
    problem: &LinearProblem,
    options: &SolverOptions,
    solver: &str,
    results: Vec<(Vec<f64>, DataNorms)>,
) -> PathEnsemble {
    let (paths, data) = results.into_iter().unzip();
    PathEnsemble {
        grid: problem.noise.grid(),
        components: problem.triple.components(),
        dim: problem.triple.dim(),
        seed: problem.noise.seed(),
        paths,
        data,
        metadata: EnsembleMetadata {
            problem: "linear".into(),
            solver: solver.into(),
            first_path: options.first_path,
        },
    }
}

pub fn solve_linear(problem: &LinearProblem, options: &SolverOptions) -> Result<PathEnsemble> {
    problem.validate()?;
    let results = try_map_indexed(options.paths, options.workers, |p| {
        solve_path(problem, options.first_path + p as u64, Multiplicative::Own)
    })?;
    Ok(ensemble_from(problem, options, "semi-implicit-em", results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Integrability of the increment norm `L^p(Ω×(0,T);V)`.
    pub p: f64,
    /// Contraction certificate `c Λ(B) ≤ 1 − δ`, checked when given.
    pub certificate: Option<(f64, f64, f64)>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            p: 2.0,
            certificate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointStep {
    pub iteration: usize,
    pub increment: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub ensemble: PathEnsemble,
    pub log: Vec<FixedPointStep>,
}

/// Includes `B` by iterating `Φ ↦ R(Φ)`, where `R(Φ)` solves the problem
/// with `B u` replaced by `B Φ`, starting from `Φ = 0`.
pub fn solve_with_b_fixed_point(
    problem: &LinearProblem,
    options: &SolverOptions,
    fp: &FixedPointOptions,
) -> Result<FixedPointResult> {
    problem.validate()?;
    if let Some((c, lambda_b, delta)) = fp.certificate {
        if c * lambda_b > 1.0 - delta {
            return Err(Error::Precondition(format!(
                "contraction certificate fails: c Λ(B) = {} > 1 − δ = {}",
                c * lambda_b,
                1.0 - delta
            )));
        }
    }
    let n = problem.triple.len();
    let steps = problem.noise.n_steps();
    let grid = problem.noise.grid();
    let weights = problem.triple.v_weights();
    let mut current: Vec<Vec<f64>> = vec![vec![0.0; (steps + 1) * n]; options.paths];
    let mut log = Vec::new();
    let mut previous_increment: Option<f64> = None;
    for iteration in 1..=fp.max_iter {
        let results = try_map_indexed(options.paths, options.workers, |p| {
            solve_path(
                problem,
                options.first_path + p as u64,
                Multiplicative::Frozen(&current[p]),
            )
        })?;
        let mut acc = 0.0;
        for (p, (next, _)) in results.iter().enumerate() {
            for i in 0..steps {
                let dt = grid[i + 1] - grid[i];
                let v2: f64 = (0..n)
                    .map(|k| {
                        let d = next[(i + 1) * n + k] - current[p][(i + 1) * n + k];
                        weights[k % weights.len()] * d * d
                    })
                    .sum();
                acc += dt * v2.sqrt().powf(fp.p);
            }
        }
        let increment = (acc / options.paths as f64).powf(1.0 / fp.p);
        let ratio = previous_increment.map(|prev| if prev > 0.0 { increment / prev } else { 0.0 });
        log.push(FixedPointStep {
            iteration,
            increment,
            ratio,
        });
        let (paths, data): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        current = paths;
        if increment < fp.tol {
            let ensemble = ensemble_from(
                problem,
                options,
                "fixed-point",
                current.into_iter().zip(data).collect(),
            );
            return Ok(FixedPointResult { ensemble, log });
        }
        if let Some(r) = ratio {
            if r >= 1.0 {
                return Err(Error::Divergence {
                    iteration,
                    ratio: r,
                });
            }
        }
        previous_increment = Some(increment);
    }
    let last = log.last().and_then(|s| s.ratio).unwrap_or(f64::NAN);
    Err(Error::Divergence {
        iteration: fp.max_iter,
        ratio: last,
    })
}

/// `A ↦ A + λ_s Id` with data scaled by `e^{−λ_s t}`; the solution of the
/// shifted problem is `e^{−λ_s t} u(t)`.
pub fn exponential_shift(problem: &LinearProblem, shift: f64) -> LinearProblem {
    if shift == 0.0 {
        return problem.clone();
    }
    let inner = problem.pair.clone();
    let size = inner.size();
    let modes = inner.noise_modes();
    let pair: Arc<dyn OperatorPair> = if inner.is_autonomous() {
        let state = SampleState::deterministic();
        let dense = DenseOperatorPair {
            a: inner.a(0.0, &state),
            b: inner.b(0.0, &state),
            noise_modes: modes,
        };
        Arc::new(dense.shifted(shift))
    } else {
        let a_src = inner.clone();
        Arc::new(FnOperatorPair::new(
            size,
            modes,
            move |t, s| {
                let mut a = a_src.a(t, s);
                for i in 0..size {
                    a[(i, i)] += shift;
                }
                a
            },
            move |t, s| inner.b(t, s),
        ))
    };
    let factor: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |t| (-shift * t).exp());
    let g = match &problem.g {
        NoiseForcing::Zero => NoiseForcing::Zero,
        other => {
            let inner = other.clone();
            let factor = factor.clone();
            NoiseForcing::from_fn(move |t, s| {
                let c = factor(t);
                inner
                    .eval(t, s)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|v| v.into_iter().map(|x| c * x).collect())
                    .collect()
            })
        }
    };
    LinearProblem {
        triple: problem.triple.clone(),
        pair,
        f: problem.f.scaled(factor),
        g,
        u0: problem.u0.clone(),
        noise: problem.noise.clone(),
    }
}

/// Undo [`exponential_shift`] on a solved ensemble: `u(t) = e^{λ_s t} ũ(t)`.
pub fn unshift(ensemble: &PathEnsemble, shift: f64) -> PathEnsemble {
    let mut out = ensemble.clone();
    let n = ensemble.state_len();
    for path in &mut out.paths {
        for (i, &t) in ensemble.grid.iter().enumerate() {
            let c = (shift * t).exp();
            for x in &mut path[i * n..(i + 1) * n] {
                *x *= c;
            }
        }
    }
    out
}
