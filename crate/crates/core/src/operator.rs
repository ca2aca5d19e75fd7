//! Operator pairs `(A, B)` on the Galerkin space and their structural
//! constants.
//!
//! `A` is stored as the matrix of the bilinear form `⟨A e_l, e_k⟩`, so the
//! duality pairing `⟨Av, v⟩` is `vᵀ A v`. Each `B_n` maps coefficient
//! vectors to `H` coefficients. With `D = diag(1 + λ_k)`:
//!
//! ```text
//! Q(v) = vᵀ sym(A) v − ½ Σ_n |B_n v|²
//! λ(M) = λ_min( D^{-1/2} (sym(A) − ½ Σ B_nᵀ B_n + M) D^{-1/2} )
//! Λ(A) = σ_max( D^{-1/2} A D^{-1/2} )
//! Λ(B) = λ_max( D^{-1/2} Σ B_nᵀ B_n D^{-1/2} )^{1/2}
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NormalSampler;
use crate::spectral::SpectralTriple;

/// What a pair may observe about the driving noise at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct SampleState<'a> {
    pub path_index: u64,
    pub step: usize,
    /// `W_n(t)` for each noise mode, known at time `t`.
    pub brownian: &'a [f64],
}

impl SampleState<'static> {
    pub fn deterministic() -> Self {
        SampleState {
            path_index: 0,
            step: 0,
            brownian: &[],
        }
    }
}

/// A progressively measurable pair `(A, B)`. Evaluation must be a pure
/// function of `(t, state)`.
pub trait OperatorPair: Send + Sync {
    /// Length of a flattened coefficient vector.
    fn size(&self) -> usize;
    fn noise_modes(&self) -> usize;
    fn a(&self, t: f64, state: &SampleState) -> DMatrix<f64>;
    /// One matrix per noise mode; an empty list means `B = 0`.
    fn b(&self, t: f64, state: &SampleState) -> Vec<DMatrix<f64>>;

    /// True when neither `A` nor `B` depend on `(t, state)`; lets solvers
    /// factor the step matrix once.
    fn is_autonomous(&self) -> bool {
        false
    }
}

/// Time-independent pair with explicit matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperatorPair {
    pub a: DMatrix<f64>,
    pub b: Vec<DMatrix<f64>>,
    pub noise_modes: usize,
}

impl DenseOperatorPair {
    pub fn new(a: DMatrix<f64>, b: Vec<DMatrix<f64>>, noise_modes: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape("A must be square"));
        }
        if !b.is_empty() && b.len() != noise_modes {
            return Err(Error::shape(format!(
                "{} B matrices for {} noise modes",
                b.len(),
                noise_modes
            )));
        }
        if b.iter().any(|m| m.shape() != a.shape()) {
            return Err(Error::shape("every B_n must match A's shape"));
        }
        if a.iter()
            .chain(b.iter().flat_map(|m| m.iter()))
            .any(|x| !x.is_finite())
        {
            return Err(Error::param("operator matrices must be finite"));
        }
        Ok(Self { a, b, noise_modes })
    }

    /// `A = A₀`, `B = 0`.
    pub fn riesz(triple: &SpectralTriple, noise_modes: usize) -> Self {
        let a = DMatrix::from_diagonal(&DVector::from_vec(triple.v_weights()));
        Self {
            a,
            b: Vec::new(),
            noise_modes,
        }
    }

    /// `⟨Av, v⟩ = Σ λ_k |v_k|²`, `B = 0`.
    pub fn laplacian(triple: &SpectralTriple, noise_modes: usize) -> Self {
        let d: Vec<f64> = (0..triple.len())
            .map(|i| triple.eigenvalues()[i % triple.dim()])
            .collect();
        let a = DMatrix::from_diagonal(&DVector::from_vec(d));
        Self {
            a,
            b: Vec::new(),
            noise_modes,
        }
    }

    /// One mode, `A = a`, one noise mode with `B = b`.
    pub fn scalar(a: f64, b: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: if b == 0.0 {
                Vec::new()
            } else {
                vec![DMatrix::from_element(1, 1, b)]
            },
            noise_modes: 1,
        }
    }

    /// Banded random symmetric pair with certified bounds; see
    /// [`RandomSymmetricSpec`].
    pub fn random_symmetric(triple: &SpectralTriple, spec: &RandomSymmetricSpec) -> Result<Self> {
        spec.validate()?;
        let n = triple.len();
        let mut rng = NormalSampler::new(spec.seed);
        let spread = 0.25 * (spec.upper - spec.lower);
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            s[(i, i)] =
                spec.lower + spread + (spec.upper - spec.lower - 2.0 * spread) * rng.uniform();
        }
        if n > 1 && spread > 0.0 {
            let mut e = banded(n, spec.bandwidth, &mut rng);
            e = (&e + e.transpose()) * 0.5;
            let norm = spectral_norm(&e);
            if norm > 0.0 {
                s += e * (spread / norm);
            }
        }
        let sqrt_d = DVector::from_iterator(n, triple.v_weights().into_iter().map(f64::sqrt));
        let d_half = DMatrix::from_diagonal(&sqrt_d);
        let a = &d_half * &s * &d_half;
        let b = if spec.noise > 0.0 {
            // ‖C_n‖² = 2 noise² lower / K, so ½ Σ ‖C_n‖² = noise² lower
            let target = (2.0 * spec.noise * spec.noise * spec.lower / spec.modes as f64).sqrt();
            (0..spec.modes)
                .map(|_| {
                    let c = banded(n, spec.bandwidth, &mut rng);
                    let norm = spectral_norm(&c);
                    c * (target / norm) * &d_half
                })
                .collect()
        } else {
            Vec::new()
        };
        Self::new(a, b, spec.modes)
    }

    /// `A + shift·Id` (the identity embedding `V → V*`).
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.a.nrows() {
            out.a[(i, i)] += shift;
        }
        out
    }
}

impl OperatorPair for DenseOperatorPair {
    fn size(&self) -> usize {
        self.a.nrows()
    }
    fn noise_modes(&self) -> usize {
        self.noise_modes
    }
    fn a(&self, _t: f64, _state: &SampleState) -> DMatrix<f64> {
        self.a.clone()
    }
    fn b(&self, _t: f64, _state: &SampleState) -> Vec<DMatrix<f64>> {
        self.b.clone()
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

type MatrixFn = dyn Fn(f64, &SampleState) -> DMatrix<f64> + Send + Sync;
type MatrixListFn = dyn Fn(f64, &SampleState) -> Vec<DMatrix<f64>> + Send + Sync;

/// Pair given by closures in `(t, state)`.
#[derive(Clone)]
pub struct FnOperatorPair {
    size: usize,
    noise_modes: usize,
    a: Arc<MatrixFn>,
    b: Arc<MatrixListFn>,
}

impl FnOperatorPair {
    pub fn new(
        size: usize,
        noise_modes: usize,
        a: impl Fn(f64, &SampleState) -> DMatrix<f64> + Send + Sync + 'static,
        b: impl Fn(f64, &SampleState) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            size,
            noise_modes,
            a: Arc::new(a),
            b: Arc::new(b),
        }
    }
}

impl OperatorPair for FnOperatorPair {
    fn size(&self) -> usize {
        self.size
    }
    fn noise_modes(&self) -> usize {
        self.noise_modes
    }
    fn a(&self, t: f64, state: &SampleState) -> DMatrix<f64> {
        (self.a)(t, state)
    }
    fn b(&self, t: f64, state: &SampleState) -> Vec<DMatrix<f64>> {
        (self.b)(t, state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSymmetricSpec {
    pub seed: u64,
    /// Lower bound on the eigenvalues of `D^{-1/2} A D^{-1/2}`.
    pub lower: f64,
    /// Upper bound on the same.
    pub upper: f64,
    /// Noise strength in `[0, 1)`: `½ Σ ‖B_n v‖² ≤ noise² · lower · ‖v‖²_V`.
    pub noise: f64,
    pub modes: usize,
    pub bandwidth: usize,
}

impl Default for RandomSymmetricSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            lower: 0.5,
            upper: 2.0,
            noise: 0.5,
            modes: 4,
            bandwidth: 2,
        }
    }
}

impl RandomSymmetricSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.upper >= self.lower && self.upper.is_finite()) {
            return Err(Error::param("need 0 < lower ≤ upper < ∞"));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::param("noise strength must lie in [0, 1)"));
        }
        if self.noise > 0.0 && self.modes == 0 {
            return Err(Error::param("nonzero noise needs at least one noise mode"));
        }
        Ok(())
    }
}

fn banded(n: usize, bandwidth: usize, rng: &mut NormalSampler) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) <= bandwidth {
                m[(i, j)] = rng.sample();
            }
        }
    }
    m
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub lambda: f64,
    #[serde(rename = "LambdaA")]
    pub lambda_a: f64,
    #[serde(rename = "LambdaB")]
    pub lambda_b: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub symmetric: bool,
    /// Unit-`V` vectors attaining `λ`, `Λ(A)` and `Λ(B)` in that order.
    #[serde(rename = "witness_vectors")]
    pub witnesses: Vec<Vec<f64>>,
    /// Probe vectors on which the certificate failed (should be 0).
    pub probe_violations: usize,
}

impl CoercivityReport {
    pub fn lambda_total(&self) -> f64 {
        self.lambda_a + self.lambda_b
    }
}

pub const SYMMETRY_TOL: f64 = 1e-10;

/// Matrices entering the coercivity form, scaled to the `V` geometry.
pub(crate) struct ScaledForms {
    pub inv_sqrt_d: DVector<f64>,
    pub a: DMatrix<f64>,
    /// `Σ B_nᵀ B_n`, unscaled.
    pub btb: DMatrix<f64>,
}

pub(crate) fn scaled_forms(
    pair: &dyn OperatorPair,
    triple: &SpectralTriple,
    t: f64,
    state: &SampleState,
) -> Result<ScaledForms> {
    let n = triple.len();
    if pair.size() != n {
        return Err(Error::shape(format!(
            "pair acts on {} coefficients, triple has {}",
            pair.size(),
            n
        )));
    }
    let a = pair.a(t, state);
    let b = pair.b(t, state);
    if a.shape() != (n, n) {
        return Err(Error::shape("A has the wrong shape"));
    }
    if pair.noise_modes() == 0 && !b.is_empty() {
        return Err(Error::param("B given but the pair has no noise modes"));
    }
    if !b.is_empty() && b.len() != pair.noise_modes() {
        return Err(Error::shape("B list length differs from the noise modes"));
    }
    if a.iter()
        .chain(b.iter().flat_map(|m| m.iter()))
        .any(|x| !x.is_finite())
    {
        return Err(Error::param("non-finite operator entries"));
    }
    let mut btb = DMatrix::zeros(n, n);
    for bn in &b {
        btb += bn.transpose() * bn;
    }
    let inv_sqrt_d =
        DVector::from_iterator(n, triple.v_weights().into_iter().map(|w| w.sqrt().recip()));
    Ok(ScaledForms { inv_sqrt_d, a, btb })
}

pub(crate) fn congruence(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] *= s[i] * s[j];
        }
    }
    out
}

pub fn check_coercivity(
    pair: &dyn OperatorPair,
    triple: &SpectralTriple,
    t: f64,
    state: &SampleState,
    probes: usize,
    m: f64,
) -> Result<CoercivityReport> {
    let forms = scaled_forms(pair, triple, t, state)?;
    let n = triple.len();
    let s = &forms.inv_sqrt_d;
    let sym = (&forms.a + forms.a.transpose()) * 0.5;
    let mut q = sym - &forms.btb * 0.5;
    for i in 0..n {
        q[(i, i)] += m;
    }
    let q_scaled = congruence(&q, s);
    let eig = q_scaled.clone().symmetric_eigen();
    let (imin, lambda) = argmin(eig.eigenvalues.as_slice());
    let w_lambda = eig.eigenvectors.column(imin).component_mul(s);

    let a_scaled = congruence(&forms.a, s);
    let svd = a_scaled.svd(false, true);
    let (imax, lambda_a) = argmax(svd.singular_values.as_slice());
    let w_a = svd
        .v_t
        .as_ref()
        .map(|vt| vt.row(imax).transpose().component_mul(s))
        .unwrap_or_else(|| DVector::zeros(n));

    let b_scaled = congruence(&forms.btb, s);
    let beig = b_scaled.symmetric_eigen();
    let (ibmax, lb2) = argmax(beig.eigenvalues.as_slice());
    let lambda_b = lb2.max(0.0).sqrt();
    let w_b = beig.eigenvectors.column(ibmax).component_mul(s);

    // independent spot-check of the certificate on random probes
    let mut rng = NormalSampler::new(0x5eed ^ probes as u64);
    let weights = triple.v_weights();
    let mut violations = 0;
    for _ in 0..probes {
        let v = DVector::from_vec(rng.vec(n));
        let vv: f64 = v.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        let qv = v.dot(&(&q * &v));
        if qv < lambda * vv - 1e-10 * vv.max(1.0) {
            violations += 1;
        }
    }

    Ok(CoercivityReport {
        lambda,
        lambda_a,
        lambda_b,
        m,
        symmetric: check_symmetry(pair, t, state, SYMMETRY_TOL),
        witnesses: vec![
            w_lambda.iter().copied().collect(),
            w_a.iter().copied().collect(),
            w_b.iter().copied().collect(),
        ],
        probe_violations: violations,
    })
}

fn argmin(xs: &[f64]) -> (usize, f64) {
    xs.iter().copied().enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, x)| if x < acc.1 { (i, x) } else { acc },
    )
}

fn argmax(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
        )
}

/// `⟨Au, v⟩ = ⟨Av, u⟩`: the matrix of `A` equals its transpose within `tol`.
pub fn check_symmetry(pair: &dyn OperatorPair, t: f64, state: &SampleState, tol: f64) -> bool {
    let a = pair.a(t, state);
    is_symmetric(&a, tol)
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol))
}

pub fn is_hermitian(a: &DMatrix<Complex64>, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows()).all(|i| (0..=i).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationOutcome {
    pub holds: bool,
    /// Largest `|a(u,v)| / (‖u‖_V ‖v‖_V)` seen.
    pub max_ratio: f64,
    pub bound: f64,
    pub witness: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

/// Checks `|a(u,v)| ≤ c ‖u‖_V ‖v‖_V` for a hermitian form with
/// `|a[u]| ≤ c ‖u‖²_V`. The form is `a(u, v) = v^H F u`; `weights` are the
/// `V` weights `(1 + λ_k)`.
pub fn polarization_bound(
    form: &DMatrix<Complex64>,
    weights: &[f64],
    c: f64,
    probes: usize,
    seed: u64,
) -> Result<PolarizationOutcome> {
    let n = form.nrows();
    if weights.len() != n {
        return Err(Error::shape("weights must match the form size"));
    }
    if !is_hermitian(form, 1e-12 * (1.0 + form.norm())) {
        return Err(Error::Precondition("form is not hermitian".into()));
    }
    let tol = 1e-12 * c.abs().max(1e-300);
    let vnorm = |u: &DVector<Complex64>| -> f64 {
        u.iter()
            .zip(weights)
            .map(|(x, w)| w * x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let mut rng = NormalSampler::new(seed);
    let draw = |rng: &mut NormalSampler| -> DVector<Complex64> {
        DVector::from_iterator(
            n,
            (0..n).map(|_| Complex64::new(rng.sample(), rng.sample())),
        )
    };
    // diagonal bound on the probes
    for _ in 0..probes {
        let u = draw(&mut rng);
        let au = (u.adjoint() * form * &u)[(0, 0)].norm();
        let nu = vnorm(&u);
        if au > c * nu * nu + tol * nu * nu {
            return Err(Error::Precondition(format!(
                "diagonal bound fails: |a[u]| = {au:.6e} > c‖u‖² = {:.6e}",
                c * nu * nu
            )));
        }
    }
    let mut max_ratio = 0.0f64;
    let mut witness = None;
    let mut holds = true;
    for _ in 0..probes {
        let u = draw(&mut rng);
        let v = draw(&mut rng);
        let auv = (v.adjoint() * form * &u)[(0, 0)].norm();
        let ratio = auv / (vnorm(&u) * vnorm(&v));
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        if ratio > c + tol {
            holds = false;
            if witness.is_none() {
                witness = Some((u.iter().copied().collect(), v.iter().copied().collect()));
            }
        }
    }
    Ok(PolarizationOutcome {
        holds,
        max_ratio,
        bound: c,
        witness,
    })
}

/// Exact `sup |a[u]| / ‖u‖²_V` of a hermitian form.
pub fn numerical_radius(form: &DMatrix<Complex64>, weights: &[f64]) -> f64 {
    let n = form.nrows();
    let mut scaled = form.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] /= (weights[i] * weights[j]).sqrt();
        }
    }
    let herm = (&scaled + scaled.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
}
