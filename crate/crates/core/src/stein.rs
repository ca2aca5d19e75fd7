//! Complex interpolation family on the closed unit strip
//!
//! ```text
//! F(z) = r exp(z log(R/r)),   A_z = μ (F(z)(μ⁻¹A − A₀) + A₀),   B_z = F(z)^{1/2} B
//! ```
//!
//! with `μ = Λ(A)` and `ρ = λ/Λ(A)`. At `θ = −log r / log(R/r)` one has
//! `F(θ) = 1`, so the family passes through `(A, B)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::LinearProblem;
use crate::noise::NormalSampler;
use crate::operator::{
    check_coercivity, congruence, is_symmetric, scaled_forms, CoercivityReport, OperatorPair,
    SampleState, SYMMETRY_TOL,
};
use crate::parallel::{map_indexed, try_map_indexed};
use crate::spectral::SpectralTriple;

const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinParams {
    pub mu: f64,
    pub rho: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub theta: f64,
    pub q: f64,
    pub q_theta: f64,
}

impl SteinParams {
    pub fn new(mu: f64, rho: f64, r: f64, big_r: f64, q: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::param(format!("μ = {mu} must be positive")));
        }
        if !(rho > 0.0 && rho <= 1.0 + 1e-12) {
            return Err(Error::param(format!("ρ = {rho} must lie in (0, 1]")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::param(format!("r = {r} must lie in (0, 1)")));
        }
        if !(big_r > 1.0 && big_r.is_finite()) {
            return Err(Error::param(format!("R = {big_r} must exceed 1")));
        }
        if big_r * (1.0 - rho) >= 1.0 {
            return Err(Error::param(format!(
                "R(1 − ρ) = {} must be below 1",
                big_r * (1.0 - rho)
            )));
        }
        if !(q > 2.0 && q.is_finite()) {
            return Err(Error::param(format!("q = {q} must exceed 2")));
        }
        let theta = -r.ln() / (big_r / r).ln();
        let q_theta = 1.0 / ((1.0 - theta) / 2.0 + theta / q);
        Ok(Self {
            mu,
            rho: rho.min(1.0),
            r,
            big_r,
            theta,
            q,
            q_theta,
        })
    }

    /// The largest `R` with `R(1 − ρ) < 1`, backed off by `safety ∈ (0, 1)`.
    pub fn admissible_big_r(rho: f64, safety: f64) -> f64 {
        if rho >= 1.0 {
            return f64::INFINITY;
        }
        (1.0 + safety * (1.0 / (1.0 - rho) - 1.0)).max(1.0 + 1e-9)
    }

    pub fn f(&self, z: Complex64) -> Complex64 {
        self.r * (z * (self.big_r / self.r).ln()).exp()
    }

    /// Principal root on the strip: `√r exp(z log(R/r) / 2)`.
    pub fn f_sqrt(&self, z: Complex64) -> Complex64 {
        self.r.sqrt() * (z * 0.5 * (self.big_r / self.r).ln()).exp()
    }

    /// Exponent `p₀` reported for these parameters.
    pub fn p0(&self) -> f64 {
        self.q_theta
    }

    /// `r min(C_p(1 − ρ), c Λ(B))`; admissible when below 1.
    pub fn smallness(&self, c_p: f64, c: f64, lambda_b: f64) -> f64 {
        self.r * (c_p * (1.0 - self.rho)).min(c * lambda_b)
    }
}

pub fn in_closed_strip(z: Complex64) -> bool {
    z.re >= 0.0 && z.re <= 1.0 && z.im.is_finite()
}

/// `(Λ(A), λ/Λ(A))` from a coercivity report with `M = 0`.
pub fn compute_mu_rho(report: &CoercivityReport) -> Result<(f64, f64)> {
    if report.m != 0.0 {
        return Err(Error::Precondition(format!(
            "M = {} must be removed by an exponential shift first",
            report.m
        )));
    }
    mu_rho(report.lambda, report.lambda_a)
}

pub fn mu_rho(lambda: f64, lambda_a: f64) -> Result<(f64, f64)> {
    if !(lambda_a > 0.0) {
        return Err(Error::param("Λ(A) = 0"));
    }
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!("λ = {lambda} is not positive")));
    }
    Ok((lambda_a, (lambda / lambda_a).min(1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub holds: bool,
    pub bound: f64,
    /// `max_v |μ⁻¹ c[v] − ‖v‖²_V| / ‖v‖²_V` over the exact spectrum.
    pub form_distance: f64,
    /// Same quantity over the random probes.
    pub probe_distance: f64,
    /// `‖μ⁻¹A − A₀‖_{L(V,V*)}`.
    pub operator_distance: f64,
    pub witness: Option<Vec<f64>>,
}

const BOUND_TOL: f64 = 1e-10;

/// Distance of the scaled form and of the scaled operator to the Riesz map.
pub fn verify_distance_bound(
    pair: &dyn OperatorPair,
    triple: &SpectralTriple,
    params: &SteinParams,
    probes: usize,
) -> Result<DistanceReport> {
    let state = SampleState::deterministic();
    let forms = scaled_forms(pair, triple, 0.0, &state)?;
    if !is_symmetric(&forms.a, SYMMETRY_TOL) {
        return Err(Error::Precondition("A is not symmetric".into()));
    }
    let n = triple.len();
    let s = &forms.inv_sqrt_d;
    let mu = params.mu;
    let bound = 1.0 - params.rho;
    let c = &forms.a - &forms.btb * 0.5;
    let mut c_scaled = congruence(&c, s) / mu;
    let mut a_scaled = congruence(&forms.a, s) / mu;
    for i in 0..n {
        c_scaled[(i, i)] -= 1.0;
        a_scaled[(i, i)] -= 1.0;
    }
    let eig = c_scaled.clone().symmetric_eigen();
    let (imax, form_distance) =
        eig.eigenvalues
            .iter()
            .map(|x| x.abs())
            .enumerate()
            .fold(
                (0, 0.0f64),
                |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
            );
    let operator_distance = a_scaled
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));

    let weights = triple.v_weights();
    let mut rng = NormalSampler::new(0xd157 ^ probes as u64);
    let mut probe_distance = 0.0f64;
    let mut probe_witness = None;
    for _ in 0..probes {
        let v = DVector::from_vec(rng.vec(n));
        let vv: f64 = v.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        let cv = v.dot(&(&c * &v)) / mu;
        let d = (cv - vv).abs() / vv;
        if d > probe_distance {
            probe_distance = d;
            probe_witness = Some(v.iter().copied().collect::<Vec<_>>());
        }
    }
    let tol = BOUND_TOL * (1.0 + bound);
    let holds = form_distance <= bound + tol
        && probe_distance <= bound + tol
        && operator_distance <= bound + tol;
    let witness = if holds {
        None
    } else if form_distance > bound + tol || probe_witness.is_none() {
        Some(
            eig.eigenvectors
                .column(imax)
                .component_mul(s)
                .iter()
                .copied()
                .collect(),
        )
    } else {
        probe_witness
    };
    Ok(DistanceReport {
        holds,
        bound,
        form_distance,
        probe_distance,
        operator_distance,
        witness,
    })
}

/// A family `z ↦ (A_z, B_z)` of complex operator pairs on the strip.
pub trait ComplexFamily: Send + Sync {
    fn size(&self) -> usize;
    fn noise_modes(&self) -> usize;
    fn eval(&self, z: Complex64) -> Result<(DMatrix<Complex64>, Vec<DMatrix<Complex64>>)>;
}

#[derive(Debug, Clone)]
pub struct SteinFamily {
    params: SteinParams,
    a: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    noise_modes: usize,
    conjugate: bool,
}

impl SteinFamily {
    pub fn new(
        pair: &dyn OperatorPair,
        triple: &SpectralTriple,
        params: SteinParams,
    ) -> Result<Self> {
        let state = SampleState::deterministic();
        let forms = scaled_forms(pair, triple, 0.0, &state)?;
        Ok(Self {
            params,
            a: forms.a,
            b: pair.b(0.0, &state),
            weights: triple.v_weights(),
            noise_modes: pair.noise_modes(),
            conjugate: false,
        })
    }

    /// Measures `μ`, `ρ` with `M = 0` and builds the family for `(r, R, q)`.
    pub fn from_pair(
        pair: &dyn OperatorPair,
        triple: &SpectralTriple,
        r: f64,
        big_r: f64,
        q: f64,
    ) -> Result<Self> {
        let report = check_coercivity(pair, triple, 0.0, &SampleState::deterministic(), 0, 0.0)?;
        let (mu, rho) = compute_mu_rho(&report)?;
        Self::new(pair, triple, SteinParams::new(mu, rho, r, big_r, q)?)
    }

    pub fn params(&self) -> &SteinParams {
        &self.params
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[DMatrix<f64>] {
        &self.b
    }

    /// The anti-analytic family `z ↦ (A_{z̄}, B_{z̄})`.
    pub fn conjugated(&self) -> Self {
        Self {
            conjugate: !self.conjugate,
            ..self.clone()
        }
    }

    fn arg(&self, z: Complex64) -> Result<Complex64> {
        if !in_closed_strip(z) {
            return Err(Error::param(format!(
                "z = {z} lies outside the closed unit strip"
            )));
        }
        Ok(if self.conjugate { z.conj() } else { z })
    }

    pub fn a_z(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let f = self.params.f(self.arg(z)?);
        let mu = self.params.mu;
        // μ(F(μ⁻¹A − A₀) + A₀) = F A + μ(1 − F) A₀
        let mut out = self.a.map(|x| f * x);
        for (i, w) in self.weights.iter().enumerate() {
            out[(i, i)] += mu * (C1 - f) * *w;
        }
        Ok(out)
    }

    pub fn b_z(&self, z: Complex64) -> Result<Vec<DMatrix<Complex64>>> {
        let s = self.params.f_sqrt(self.arg(z)?);
        Ok(self.b.iter().map(|m| m.map(|x| s * x)).collect())
    }
}

impl ComplexFamily for SteinFamily {
    fn size(&self) -> usize {
        self.a.nrows()
    }
    fn noise_modes(&self) -> usize {
        self.noise_modes
    }
    fn eval(&self, z: Complex64) -> Result<(DMatrix<Complex64>, Vec<DMatrix<Complex64>>)> {
        Ok((self.a_z(z)?, self.b_z(z)?))
    }
}

/// `z ↦ (A, B)` for every `z`.
#[derive(Debug, Clone)]
pub struct ConstantFamily {
    pub a: DMatrix<f64>,
    pub b: Vec<DMatrix<f64>>,
    pub noise_modes: usize,
}

impl ComplexFamily for ConstantFamily {
    fn size(&self) -> usize {
        self.a.nrows()
    }
    fn noise_modes(&self) -> usize {
        self.noise_modes
    }
    fn eval(&self, _z: Complex64) -> Result<(DMatrix<Complex64>, Vec<DMatrix<Complex64>>)> {
        let c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
        Ok((c(&self.a), self.b.iter().map(c).collect()))
    }
}

/// Boundary lines `Re z ∈ {0, 1}` at `Im z ∈ {0, ±½, ±1, ±2, ±4}` plus an
/// interior grid of step 0.1 with `|Im z| ≤ 1`.
pub fn default_z_grid() -> Vec<Complex64> {
    let ts = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0];
    let mut out: Vec<Complex64> = Vec::new();
    for re in [0.0, 1.0] {
        out.extend(ts.iter().map(|&t| Complex64::new(re, t)));
    }
    for i in 1..10 {
        for j in -10..=10 {
            out.push(Complex64::new(i as f64 * 0.1, j as f64 * 0.1));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSample {
    pub z: [f64; 2],
    pub abs_f: f64,
    /// `min_{‖v‖_V = 1} Re μ⁻¹(a_z[v] − ½‖B_z v‖²)`.
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripReport {
    pub samples: Vec<StripSample>,
    pub min_value: f64,
    /// `min (value − bound)`; negative values are violations.
    pub min_slack: f64,
    pub probe_violations: usize,
}

impl StripReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack >= -tol && self.probe_violations == 0
    }
}

/// Exact strip coercivity of a Stein family on `z_samples`, cross-checked
/// with `probes` random complex vectors per point.
pub fn verify_strip_coercivity(
    family: &SteinFamily,
    triple: &SpectralTriple,
    z_samples: &[Complex64],
    probes: usize,
    workers: Option<usize>,
) -> Result<StripReport> {
    if !is_symmetric(&family.a, SYMMETRY_TOL) {
        return Err(Error::Precondition("A is not symmetric".into()));
    }
    let n = triple.len();
    if family.size() != n {
        return Err(Error::shape("family and triple differ in size"));
    }
    let weights = triple.v_weights();
    let inv_sqrt: Vec<f64> = weights.iter().map(|w| w.sqrt().recip()).collect();
    let mu = family.params.mu;
    let results = try_map_indexed(
        z_samples.len(),
        workers,
        |k| -> Result<(StripSample, usize)> {
            let z = z_samples[k];
            let (a, b) = family.eval(z)?;
            let mut q = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
            for bn in &b {
                q -= bn.adjoint() * bn * Complex64::new(0.5, 0.0);
            }
            let mut scaled = q.clone();
            for i in 0..n {
                for j in 0..n {
                    scaled[(i, j)] *= inv_sqrt[i] * inv_sqrt[j] / mu;
                }
            }
            let value = scaled
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |acc, &x| acc.min(x));
            let abs_f = family
                .params
                .f(if family.conjugate { z.conj() } else { z })
                .norm();
            let bound = 1.0 - abs_f * (1.0 - family.params.rho);
            let mut rng = NormalSampler::new(0x57e1 ^ k as u64);
            let mut violations = 0;
            for _ in 0..probes {
                let v = DVector::from_iterator(
                    n,
                    (0..n).map(|_| Complex64::new(rng.sample(), rng.sample())),
                );
                let vv: f64 = v.iter().zip(&weights).map(|(x, w)| w * x.norm_sqr()).sum();
                let form = (v.adjoint() * &a * &v)[(0, 0)].re
                    - 0.5 * b.iter().map(|bn| (bn * &v).norm_squared()).sum::<f64>();
                if form / (mu * vv) < bound - 1e-10 {
                    violations += 1;
                }
            }
            Ok((
                StripSample {
                    z: [z.re, z.im],
                    abs_f,
                    value,
                    bound,
                },
                violations,
            ))
        },
    )?;
    let probe_violations = results.iter().map(|(_, v)| v).sum();
    let samples: Vec<StripSample> = results.into_iter().map(|(s, _)| s).collect();
    let min_value = samples.iter().fold(f64::INFINITY, |a, s| a.min(s.value));
    let min_slack = samples
        .iter()
        .fold(f64::INFINITY, |a, s| a.min(s.value - s.bound));
    Ok(StripReport {
        samples,
        min_value,
        min_slack,
        probe_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    /// `‖μ⁻¹A − A₀‖_{L(V,V*)}`.
    pub distance: f64,
    pub t: Vec<f64>,
    /// `C_p ‖A₀ − μ⁻¹A_{it}‖` per sampled `t`.
    pub perturbations: Vec<f64>,
    /// `1 − max perturbation`.
    pub margin: f64,
}

impl EndpointReport {
    pub fn holds(&self) -> bool {
        self.margin > 0.0
    }
}

/// Smallness of the `Re z = 0` boundary family relative to `μA₀`.
pub fn endpoint_perturbation_check(
    family: &SteinFamily,
    c_p: f64,
    t_samples: &[f64],
) -> Result<EndpointReport> {
    if !(c_p >= 0.0 && c_p.is_finite()) {
        return Err(Error::param("C_p must be finite and non-negative"));
    }
    let mu = family.params.mu;
    let inv_sqrt: Vec<f64> = family.weights.iter().map(|w| w.sqrt().recip()).collect();
    let s = DVector::from_column_slice(&inv_sqrt);
    let mut d = congruence(&family.a, &s) / mu;
    for i in 0..d.nrows() {
        d[(i, i)] -= 1.0;
    }
    let distance = if d.is_empty() {
        0.0
    } else {
        d.singular_values().max()
    };
    let mut perturbations = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let az = family.a_z(Complex64::new(0.0, t))?;
        let mut e = az.map(|x| -x / mu);
        for i in 0..e.nrows() {
            e[(i, i)] += family.weights[i];
        }
        for i in 0..e.nrows() {
            for j in 0..e.ncols() {
                e[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        let norm = if e.is_empty() {
            0.0
        } else {
            e.singular_values().max()
        };
        perturbations.push(c_p * norm);
    }
    let worst = perturbations.iter().fold(0.0f64, |a, &x| a.max(x));
    Ok(EndpointReport {
        distance,
        t: t_samples.to_vec(),
        perturbations,
        margin: 1.0 - worst,
    })
}

/// Semi-implicit Euler–Maruyama for the member `z` of `family` with the
/// data and noise of `problem` (its own pair is ignored). Returns one
/// flattened trajectory per path.
pub fn solve_member(
    family: &dyn ComplexFamily,
    z: Complex64,
    problem: &LinearProblem,
    paths: usize,
    workers: Option<usize>,
) -> Result<Vec<Vec<Complex64>>> {
    let n = problem.triple.len();
    if family.size() != n {
        return Err(Error::shape("family and problem differ in size"));
    }
    if family.noise_modes() > problem.noise.modes() {
        return Err(Error::shape(
            "family uses more noise modes than the noise model",
        ));
    }
    let (a, b) = family.eval(z)?;
    let grid = problem.noise.grid();
    let steps = grid.len() - 1;
    let modes = problem.noise.modes();
    let mut lu_cache: Vec<(f64, nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>)> =
        Vec::new();
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        if !lu_cache.iter().any(|(h, _)| *h == dt) {
            let m = DMatrix::identity(n, n) + a.map(|x| x * dt);
            lu_cache.push((dt, m.lu()));
        }
    }
    let results = map_indexed(paths, workers, |p| -> Result<Vec<Complex64>> {
        let path_index = p as u64;
        let inc = problem.noise.sample_increments(path_index);
        let u0 = problem.u0.eval(path_index);
        let mut u = DVector::from_iterator(n, u0.iter().map(|&x| Complex64::new(x, 0.0)));
        let mut out = Vec::with_capacity((steps + 1) * n);
        out.extend(u.iter().copied());
        let mut w = vec![0.0; modes];
        for i in 0..steps {
            let t = grid[i];
            let dt = grid[i + 1] - t;
            let state = SampleState {
                path_index,
                step: i,
                brownian: &w,
            };
            let mut rhs = u.clone();
            if let Some(f) = problem.f.eval(t, &state, n) {
                for k in 0..n {
                    rhs[k] += f[k] * dt;
                }
            }
            if let Some(g) = problem.g.eval(t, &state) {
                for (mode, gn) in g.iter().enumerate() {
                    let dw = inc.get(mode, i);
                    for k in 0..n {
                        rhs[k] += gn[k] * dw;
                    }
                }
            }
            for (mode, bn) in b.iter().enumerate() {
                rhs.gemv(Complex64::new(inc.get(mode, i), 0.0), bn, &u, C1);
            }
            let lu = &lu_cache
                .iter()
                .find(|(h, _)| *h == dt)
                .expect("cached step")
                .1;
            u = lu.solve(&rhs).ok_or(Error::SingularSystem { step: i })?;
            if u.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::NonFinite {
                    step: i + 1,
                    what: format!("member z = {z}, path {p}"),
                });
            }
            out.extend(u.iter().copied());
            for (mode, wm) in w.iter_mut().enumerate() {
                *wm += inc.get(mode, i);
            }
        }
        Ok(out)
    });
    results.into_iter().collect()
}

/// `|D_x φ + i D_y φ|` with fourth-order central differences of step `h`.
pub fn cauchy_riemann_residual(
    phi: &dyn Fn(Complex64) -> Result<Complex64>,
    z: Complex64,
    h: f64,
) -> Result<(f64, Complex64)> {
    if !(h >= 1e-5) {
        return Err(Error::param(format!(
            "step h = {h} is below the cancellation guard 1e-5"
        )));
    }
    let diff = |dir: Complex64| -> Result<Complex64> {
        let p1 = phi(z + dir * h)?;
        let m1 = phi(z - dir * h)?;
        let p2 = phi(z + dir * 2.0 * h)?;
        let m2 = phi(z - dir * 2.0 * h)?;
        Ok((m2 - p2 + (p1 - m1) * 8.0) / (12.0 * h))
    };
    let dx = diff(C1)?;
    let dy = diff(Complex64::i())?;
    Ok(((dx + Complex64::i() * dy).norm(), dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{DenseOperatorPair, RandomSymmetricSpec};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mu_rho_examples() {
        assert_eq!(mu_rho(1.0, 2.0).unwrap(), (2.0, 0.5));
        assert_eq!(mu_rho(1.0, 1.0).unwrap(), (1.0, 1.0));
        assert!(mu_rho(0.0, 1.0).is_err());
        assert!(mu_rho(1.0, 0.0).is_err());
    }

    #[test]
    fn mu_rho_requires_m_zero() {
        let t = SpectralTriple::interval(3).unwrap();
        let pair = DenseOperatorPair::laplacian(&t, 1);
        let r = check_coercivity(&pair, &t, 0.0, &SampleState::deterministic(), 0, 1.0).unwrap();
        assert!(matches!(compute_mu_rho(&r), Err(Error::Precondition(_))));
    }

    #[test]
    fn theta_arithmetic() {
        let p = SteinParams::new(1.0, 1.0, 0.5, 2.0, 4.0).unwrap();
        assert_relative_eq!(p.theta, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.f(c(0.0, 0.0)).re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.f(c(1.0, 0.0)).re, 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.f(c(p.theta, 0.0)).re, 1.0, epsilon = 1e-15);
        // 1/q_θ = ¼ + ⅛
        assert_relative_eq!(p.q_theta, 8.0 / 3.0, epsilon = 1e-14);
        assert!(p.q_theta > 2.0 && p.q_theta < p.q);
        for t in [-3.0, 0.1, 7.0] {
            assert_relative_eq!(p.f(c(0.0, t)).norm(), 0.5, epsilon = 1e-15);
            assert_relative_eq!(
                p.f_sqrt(c(0.3, t)).powi(2).re,
                p.f(c(0.3, t)).re,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn params_reject_large_r() {
        assert!(SteinParams::new(1.0, 0.5, 0.5, 2.0, 4.0).is_err());
        assert!(SteinParams::new(1.0, 0.5, 0.5, 1.9, 4.0).is_ok());
        assert!(SteinParams::new(1.0, 0.5, 1.0, 1.9, 4.0).is_err());
        assert!(SteinParams::new(1.0, 0.5, 0.5, 1.9, 2.0).is_err());
        let big = SteinParams::admissible_big_r(0.5, 0.9);
        assert!(big > 1.0 && big * 0.5 < 1.0);
    }

    #[test]
    fn scalar_distance_bound_is_sharp() {
        // ‖v‖²_V = 2v², a = 2, b = 1: Λ(A) = 1, c[v] = 1.5v², λ = 0.75
        let t = SpectralTriple::from_eigenvalues(vec![1.0], 1).unwrap();
        let pair = DenseOperatorPair::scalar(2.0, 1.0);
        let r = check_coercivity(&pair, &t, 0.0, &SampleState::deterministic(), 0, 0.0).unwrap();
        let (mu, rho) = compute_mu_rho(&r).unwrap();
        assert_relative_eq!(mu, 1.0, epsilon = 1e-14);
        assert_relative_eq!(rho, 0.75, epsilon = 1e-14);
        let p = SteinParams::new(mu, rho, 0.5, 2.0, 4.0).unwrap();
        let d = verify_distance_bound(&pair, &t, &p, 20).unwrap();
        assert!(d.holds);
        // |1.5 − 2| / 2 = 0.25 = 1 − ρ
        assert_relative_eq!(d.form_distance, 0.25, epsilon = 1e-14);
        assert_relative_eq!(d.operator_distance, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn riesz_distance_is_zero() {
        let t = SpectralTriple::interval(6).unwrap();
        let pair = DenseOperatorPair::riesz(&t, 1);
        let fam = SteinFamily::from_pair(&pair, &t, 0.5, 3.0, 4.0).unwrap();
        let d = verify_distance_bound(&pair, &t, fam.params(), 10).unwrap();
        assert!(d.holds && d.bound < 1e-14 && d.form_distance < 1e-14);
        let report = verify_strip_coercivity(&fam, &t, &default_z_grid(), 2, Some(1)).unwrap();
        assert!(report.samples.iter().all(|s| (s.value - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_distance_attained_at_extremal_modes() {
        // brute force over basis vectors: scaled entries s_k ∈ [λ, Λ]
        let t = SpectralTriple::interval(5).unwrap();
        let s = [0.4, 1.0, 0.7, 0.55, 0.9];
        let w = t.v_weights();
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { s[i] * w[i] } else { 0.0 });
        let pair = DenseOperatorPair::new(a, vec![], 0).unwrap();
        let fam = SteinFamily::from_pair(&pair, &t, 0.5, 1.5, 4.0).unwrap();
        let p = fam.params();
        assert_relative_eq!(p.mu, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.rho, 0.4, epsilon = 1e-12);
        let d = verify_distance_bound(&pair, &t, p, 50).unwrap();
        let brute = (0..5)
            .map(|k| (s[k] / p.mu - 1.0).abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(d.form_distance, brute, epsilon = 1e-12);
        assert_relative_eq!(d.form_distance, d.bound, epsilon = 1e-12);
        assert!(d.holds);
    }

    #[test]
    fn non_symmetric_rejected() {
        let t = SpectralTriple::interval(2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[20.0, 1.0, 0.0, 50.0]);
        let pair = DenseOperatorPair::new(a, vec![], 0).unwrap();
        let p = SteinParams::new(1.0, 0.9, 0.5, 2.0, 4.0).unwrap();
        assert!(matches!(
            verify_distance_bound(&pair, &t, &p, 1),
            Err(Error::Precondition(_))
        ));
    }

    fn random_family(seed: u64) -> (SpectralTriple, DenseOperatorPair, SteinFamily) {
        let t = SpectralTriple::interval(10).unwrap();
        let spec = RandomSymmetricSpec {
            seed,
            modes: 3,
            ..Default::default()
        };
        let pair = DenseOperatorPair::random_symmetric(&t, &spec).unwrap();
        let r = check_coercivity(&pair, &t, 0.0, &SampleState::deterministic(), 0, 0.0).unwrap();
        let (_, rho) = compute_mu_rho(&r).unwrap();
        let big_r = SteinParams::admissible_big_r(rho, 0.8);
        let fam = SteinFamily::from_pair(&pair, &t, 0.3, big_r, 4.0).unwrap();
        (t, pair, fam)
    }

    #[test]
    fn family_recovers_pair_at_theta() {
        let (_, pair, fam) = random_family(1);
        let th = c(fam.params().theta, 0.0);
        let a = fam.a_z(th).unwrap();
        let b = fam.b_z(th).unwrap();
        let scale = pair.a.amax();
        for (x, y) in a.iter().zip(pair.a.iter()) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
        for (bz, bn) in b.iter().zip(&pair.b) {
            for (x, y) in bz.iter().zip(bn.iter()) {
                assert!((x - y).norm() <= 1e-12 * bn.amax());
            }
        }
    }

    #[test]
    fn family_is_affine_in_f() {
        let (t, pair, fam) = random_family(2);
        let mu = fam.params().mu;
        let w = t.v_weights();
        for z in [c(0.0, 1.0), c(0.4, -2.0), c(1.0, 0.3)] {
            let f = fam.params().f(z);
            let a = fam.a_z(z).unwrap();
            for i in 0..10 {
                for j in 0..10 {
                    let a0 = if i == j { w[i] } else { 0.0 };
                    let lhs = a[(i, j)] - mu * a0;
                    let rhs = f * (pair.a[(i, j)] - mu * a0);
                    assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
                }
            }
            let v = DVector::from_fn(10, |i, _| c(1.0 / (1.0 + i as f64), i as f64 * 0.1));
            let bz = fam.b_z(z).unwrap();
            let lhs: f64 = bz.iter().map(|m| (m * &v).norm_squared()).sum();
            let rhs: f64 = pair
                .b
                .iter()
                .map(|m| (m.map(|x| c(x, 0.0)) * &v).norm_squared())
                .sum();
            assert_relative_eq!(lhs, f.norm() * rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn outside_strip_rejected() {
        let (_, _, fam) = random_family(3);
        assert!(fam.a_z(c(1.01, 0.0)).is_err());
        assert!(fam.b_z(c(-0.01, 0.0)).is_err());
        assert!(fam.a_z(c(1.0, 4.0)).is_ok());
    }

    #[test]
    fn strip_coercivity_on_random_pairs() {
        for seed in 0..4 {
            let (t, pair, fam) = random_family(seed);
            let p = *fam.params();
            let report = verify_strip_coercivity(&fam, &t, &default_z_grid(), 3, None).unwrap();
            assert!(report.holds(1e-10), "seed {seed}: {}", report.min_slack);
            assert!(report.min_value >= 1.0 - p.big_r * (1.0 - p.rho) - 1e-10);
            assert!(1.0 - p.big_r * (1.0 - p.rho) > 0.0);
            // at θ the value times μ is the coercivity constant
            let at_theta = verify_strip_coercivity(&fam, &t, &[c(p.theta, 0.0)], 0, None).unwrap();
            let r =
                check_coercivity(&pair, &t, 0.0, &SampleState::deterministic(), 0, 0.0).unwrap();
            assert_relative_eq!(at_theta.min_value * p.mu, r.lambda, max_relative = 1e-9);
        }
    }

    #[test]
    fn strip_margin_decreases_with_abs_f() {
        let (t, _, fam) = random_family(9);
        let zs: Vec<Complex64> = (0..=10).map(|i| c(i as f64 * 0.1, 0.7)).collect();
        let report = verify_strip_coercivity(&fam, &t, &zs, 0, None).unwrap();
        for w in report.samples.windows(2) {
            assert!(w[1].abs_f > w[0].abs_f);
            assert!(w[1].value <= w[0].value + 1e-12);
        }
    }

    #[test]
    fn endpoint_report_matches_singular_values() {
        let t = SpectralTriple::interval(4).unwrap();
        let s = [0.5, 1.0, 0.8, 0.6];
        let w = t.v_weights();
        let a = DMatrix::from_fn(4, 4, |i, j| if i == j { s[i] * w[i] } else { 0.0 });
        let pair = DenseOperatorPair::new(a, vec![], 0).unwrap();
        let fam = SteinFamily::from_pair(&pair, &t, 0.25, 1.8, 4.0).unwrap();
        let c_p = 1.7;
        let rep = endpoint_perturbation_check(&fam, c_p, &[0.0, 1.0, -2.5]).unwrap();
        // diagonal: ‖μ⁻¹A − A₀‖ = max |s_k − 1|
        assert_relative_eq!(rep.distance, 0.5, epsilon = 1e-12);
        for x in &rep.perturbations {
            assert_relative_eq!(*x, 0.25 * c_p * 0.5, epsilon = 1e-12);
        }
        assert!(rep.holds());
    }

    #[test]
    fn endpoint_vanishes_for_riesz_multiple() {
        let t = SpectralTriple::interval(4).unwrap();
        let mut pair = DenseOperatorPair::riesz(&t, 1);
        pair.a *= 3.0;
        let fam = SteinFamily::from_pair(&pair, &t, 0.9, 5.0, 3.0).unwrap();
        let rep = endpoint_perturbation_check(&fam, 100.0, &[0.0, 2.0]).unwrap();
        assert!(rep.perturbations.iter().all(|&x| x < 1e-12));
    }

    #[test]
    fn f_is_analytic() {
        let p = SteinParams::new(1.0, 0.8, 0.3, 4.0, 4.0).unwrap();
        for z in [c(0.2, 0.0), c(0.5, 1.3), c(0.8, -3.0)] {
            let (res, _) = cauchy_riemann_residual(&|z| Ok(p.f(z)), z, 1e-3).unwrap();
            assert!(res < 1e-10, "{res}");
        }
        assert!(cauchy_riemann_residual(&|z| Ok(p.f(z)), c(0.5, 0.0), 1e-6).is_err());
    }
}
