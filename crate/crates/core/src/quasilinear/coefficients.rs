//! Coefficient fields of the diagonal quasilinear system
//!
//! ```text
//! du^α = [∂_i(a^α_ij(u) ∂_j u^α) + ∂_i Φ^α_i(u) + φ^α(u)] dt
//!        + Σ_n [b^α_nj(u^α) ∂_j u^α + g^α_n(u)] dw_n
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NormalSampler;

/// Evaluation point `(t, x, y)`.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// `a^α(t, x, y)`, written row-major into a `d × d` buffer.
pub type MatrixField = Arc<dyn Fn(&Point, usize, &mut [f64]) + Send + Sync>;
/// `b^α(t, x, y^α)`, written row-major into a `K × d` buffer.
pub type NoiseGradField = Arc<dyn Fn(f64, &[f64], f64, usize, &mut [f64]) + Send + Sync>;
/// Vector-valued field of `(t, x, y)` for component `α`.
pub type VectorField = Arc<dyn Fn(&Point, usize, &mut [f64]) + Send + Sync>;
/// `Φ̄^α(y^α)`, length `d`.
pub type FluxBar = Arc<dyn Fn(f64, usize, &mut [f64]) + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&Point, usize) -> f64 + Send + Sync>;

/// Which fields read the state `y`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YDependence {
    pub a: bool,
    pub b: bool,
    pub flux: bool,
    pub phi: bool,
    pub g: bool,
}

impl YDependence {
    pub fn any(&self) -> bool {
        self.a || self.b || self.flux || self.phi || self.g
    }
}

/// Constants a user claims for the fields; checked on samples, not trusted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub lambda: Option<f64>,
    #[serde(rename = "Lambda")]
    pub big_lambda: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Clone)]
pub struct QlCoefficients {
    components: usize,
    spatial_dim: usize,
    noise_modes: usize,
    pub(crate) a: MatrixField,
    pub(crate) b: Option<NoiseGradField>,
    pub(crate) flux_bar: Option<FluxBar>,
    pub(crate) flux_hat: Option<VectorField>,
    pub(crate) phi: Option<ScalarField>,
    pub(crate) g: Option<VectorField>,
    pub(crate) depends: YDependence,
    pub(crate) time_dependent: bool,
    pub declared: DeclaredConstants,
    pub name: String,
}

impl std::fmt::Debug for QlCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QlCoefficients")
            .field("name", &self.name)
            .field("components", &self.components)
            .field("spatial_dim", &self.spatial_dim)
            .field("noise_modes", &self.noise_modes)
            .field("depends", &self.depends)
            .finish_non_exhaustive()
    }
}

impl QlCoefficients {
    /// `a^α = I`, everything else zero.
    pub fn heat(components: usize, spatial_dim: usize, noise_modes: usize) -> Result<Self> {
        if components == 0 || !(1..=2).contains(&spatial_dim) {
            return Err(Error::param("need N ≥ 1 components and d ∈ {1, 2}"));
        }
        let d = spatial_dim;
        Ok(Self {
            components,
            spatial_dim,
            noise_modes,
            a: Arc::new(move |_, _, out| {
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }),
            b: None,
            flux_bar: None,
            flux_hat: None,
            phi: None,
            g: None,
            depends: YDependence::default(),
            time_dependent: false,
            declared: DeclaredConstants::default(),
            name: "heat".into(),
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn noise_modes(&self) -> usize {
        self.noise_modes
    }

    pub fn depends(&self) -> YDependence {
        self.depends
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_time_dependence(mut self, yes: bool) -> Self {
        self.time_dependent = yes;
        self
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Self {
        self.declared = declared;
        self
    }

    pub fn with_a(
        mut self,
        depends_on_y: bool,
        a: impl Fn(&Point, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.a = Arc::new(a);
        self.depends.a = depends_on_y;
        self
    }

    pub fn with_b(
        mut self,
        depends_on_y: bool,
        b: impl Fn(f64, &[f64], f64, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.b = Some(Arc::new(b));
        self.depends.b = depends_on_y;
        self
    }

    pub fn with_flux_bar(
        mut self,
        f: impl Fn(f64, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.flux_bar = Some(Arc::new(f));
        self.depends.flux = true;
        self
    }

    pub fn with_flux_hat(
        mut self,
        depends_on_y: bool,
        f: impl Fn(&Point, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.flux_hat = Some(Arc::new(f));
        self.depends.flux |= depends_on_y;
        self
    }

    pub fn with_phi(
        mut self,
        depends_on_y: bool,
        f: impl Fn(&Point, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.phi = Some(Arc::new(f));
        self.depends.phi = depends_on_y;
        self
    }

    pub fn with_g(
        mut self,
        depends_on_y: bool,
        f: impl Fn(&Point, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.g = Some(Arc::new(f));
        self.depends.g = depends_on_y;
        self
    }

    /// `φ^α(y) = −c (y^α)³`.
    pub fn with_cubic_reaction(self, c: f64) -> Self {
        self.with_phi(true, move |p, alpha| -c * p.y[alpha].powi(3))
    }

    /// `b^α_{0,0} = β`, all other entries zero.
    pub fn with_constant_gradient_noise(self, beta: f64) -> Self {
        self.with_b(false, move |_, _, _, _, out| {
            out.fill(0.0);
            out[0] = beta;
        })
    }

    pub fn has_b(&self) -> bool {
        self.b.is_some()
    }

    pub fn has_g(&self) -> bool {
        self.g.is_some()
    }

    pub fn has_flux(&self) -> bool {
        self.flux_bar.is_some() || self.flux_hat.is_some()
    }

    pub fn has_phi(&self) -> bool {
        self.phi.is_some()
    }

    pub fn eval_a(&self, p: &Point, alpha: usize, out: &mut [f64]) {
        (self.a)(p, alpha, out)
    }

    pub fn eval_b(&self, t: f64, x: &[f64], y_alpha: f64, alpha: usize, out: &mut [f64]) {
        match &self.b {
            Some(b) => b(t, x, y_alpha, alpha, out),
            None => out.fill(0.0),
        }
    }

    /// `Φ^α = Φ̄^α(y^α) + Φ̂^α(t, x, y)`.
    pub fn eval_flux(&self, p: &Point, alpha: usize, out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        if let Some(fb) = &self.flux_bar {
            fb(p.y[alpha], alpha, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
        if let Some(fh) = &self.flux_hat {
            fh(p, alpha, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
    }

    pub fn eval_phi(&self, p: &Point, alpha: usize) -> f64 {
        self.phi.as_ref().map_or(0.0, |f| f(p, alpha))
    }

    pub fn eval_g(&self, p: &Point, alpha: usize, out: &mut [f64]) {
        match &self.g {
            Some(g) => g(p, alpha, out),
            None => out.fill(0.0),
        }
    }

    /// Symmetric part `a^α − ½ (b^α)ᵀ b^α` at one point.
    pub fn parabolic_matrix(&self, p: &Point, alpha: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.spatial_dim;
        let k = self.noise_modes;
        let mut a = vec![0.0; d * d];
        self.eval_a(p, alpha, &mut a);
        let a = DMatrix::from_row_slice(d, d, &a);
        let mut b = vec![0.0; k * d];
        self.eval_b(p.t, p.x, p.y[alpha], alpha, &mut b);
        let b = DMatrix::from_row_slice(k, d, &b);
        let q = &a - b.transpose() * &b * 0.5;
        (a, q)
    }
}

/// One sampled `(t, x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl QlSample {
    pub fn point(&self) -> Point<'_> {
        Point {
            t: self.t,
            x: &self.x,
            y: &self.y,
        }
    }
}

/// Uniform samples with `t ∈ [0, t_end]`, `x ∈ (0,1)^d`, `y ∈ [−y_max, y_max]^N`.
pub fn random_samples(
    coeffs: &QlCoefficients,
    count: usize,
    t_end: f64,
    y_max: f64,
    seed: u64,
) -> Vec<QlSample> {
    let mut rng = NormalSampler::new(seed);
    (0..count)
        .map(|_| QlSample {
            t: t_end * rng.uniform(),
            x: (0..coeffs.spatial_dim()).map(|_| rng.uniform()).collect(),
            y: (0..coeffs.components())
                .map(|_| y_max * (2.0 * rng.uniform() - 1.0))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlCoercivity {
    /// Minimal eigenvalue of `a^α − ½(b^α)ᵀb^α` over components and samples.
    pub margin: f64,
    pub worst_sample: Option<usize>,
    pub worst_component: usize,
}

impl QlCoercivity {
    pub fn is_coercive(&self, lambda: f64) -> bool {
        self.margin >= lambda
    }
}

pub const QL_SYMMETRY_TOL: f64 = 1e-12;

pub fn check_ql_coercivity(coeffs: &QlCoefficients, samples: &[QlSample]) -> Result<QlCoercivity> {
    let mut out = QlCoercivity {
        margin: f64::INFINITY,
        worst_sample: None,
        worst_component: 0,
    };
    for (s, sample) in samples.iter().enumerate() {
        check_sample_shape(coeffs, sample)?;
        let p = sample.point();
        for alpha in 0..coeffs.components() {
            let (a, q) = coeffs.parabolic_matrix(&p, alpha);
            if (&a - a.transpose()).amax() > QL_SYMMETRY_TOL * (1.0 + a.amax()) {
                return Err(Error::Precondition(format!(
                    "a^{alpha} is not symmetric at sample {s}"
                )));
            }
            let m = q.symmetric_eigenvalues().min();
            if m < out.margin {
                out = QlCoercivity {
                    margin: m,
                    worst_sample: Some(s),
                    worst_component: alpha,
                };
            }
        }
    }
    Ok(out)
}

fn check_sample_shape(coeffs: &QlCoefficients, s: &QlSample) -> Result<()> {
    if s.x.len() != coeffs.spatial_dim() || s.y.len() != coeffs.components() {
        return Err(Error::shape(format!(
            "sample has x ∈ R^{} and y ∈ R^{}, coefficients expect R^{} and R^{}",
            s.x.len(),
            s.y.len(),
            coeffs.spatial_dim(),
            coeffs.components()
        )));
    }
    Ok(())
}

/// Measured structural constants on samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledConstants {
    /// `max ‖a^α‖₂`.
    pub a_bound: f64,
    /// `max ‖b^α‖_F`.
    pub b_bound: f64,
    /// `max (|Φ| + |φ|) / (1 + |y|^h)`.
    pub growth: f64,
    /// `max_α φ^α(y) y^α / (|y|² + 1)`, clipped below at 0.
    pub dissipativity: f64,
}

pub fn sampled_constants(
    coeffs: &QlCoefficients,
    samples: &[QlSample],
    h: f64,
) -> Result<SampledConstants> {
    let d = coeffs.spatial_dim();
    let n = coeffs.components();
    let k = coeffs.noise_modes();
    let mut out = SampledConstants {
        a_bound: 0.0,
        b_bound: 0.0,
        growth: 0.0,
        dissipativity: 0.0,
    };
    let mut abuf = vec![0.0; d * d];
    let mut bbuf = vec![0.0; k * d];
    let mut flux = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for s in samples {
        check_sample_shape(coeffs, s)?;
        let p = s.point();
        let y2: f64 = s.y.iter().map(|v| v * v).sum();
        let mut flux2 = 0.0;
        let mut phi2 = 0.0;
        for alpha in 0..n {
            coeffs.eval_a(&p, alpha, &mut abuf);
            let a = DMatrix::from_row_slice(d, d, &abuf);
            out.a_bound = out.a_bound.max(a.singular_values().max());
            coeffs.eval_b(s.t, &s.x, s.y[alpha], alpha, &mut bbuf);
            out.b_bound = out
                .b_bound
                .max(bbuf.iter().map(|v| v * v).sum::<f64>().sqrt());
            coeffs.eval_flux(&p, alpha, &mut flux, &mut scratch);
            flux2 += flux.iter().map(|v| v * v).sum::<f64>();
            let phi = coeffs.eval_phi(&p, alpha);
            phi2 += phi * phi;
            out.dissipativity = out.dissipativity.max(phi * s.y[alpha] / (y2 + 1.0));
        }
        out.growth = out
            .growth
            .max((flux2.sqrt() + phi2.sqrt()) / (1.0 + y2.sqrt().powf(h)));
    }
    Ok(out)
}

/// Nearest point of the closed ball of radius `radius`.
pub fn project_ball(y: &[f64], radius: f64) -> Vec<f64> {
    let mut out = y.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

pub fn project_ball_in_place(y: &mut [f64], radius: f64) {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        for v in y.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let p = project_ball(&[3.0, 4.0], 2.0);
        assert!((p[0] - 1.2).abs() < 1e-15 && (p[1] - 1.6).abs() < 1e-15);
        assert_eq!(project_ball(&[0.3, -0.4], 1.0), vec![0.3, -0.4]);
    }

    #[test]
    fn heat_margin_is_one() {
        let c = QlCoefficients::heat(2, 2, 1).unwrap();
        let s = random_samples(&c, 20, 1.0, 3.0, 1);
        let r = check_ql_coercivity(&c, &s).unwrap();
        assert!((r.margin - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_noise_margin() {
        for (beta, expected) in [
            (1.0, 0.5),
            (std::f64::consts::SQRT_2, 0.0),
            (0.3, 1.0 - 0.045),
        ] {
            let c = QlCoefficients::heat(1, 2, 1)
                .unwrap()
                .with_constant_gradient_noise(beta);
            let s = random_samples(&c, 5, 1.0, 1.0, 2);
            let r = check_ql_coercivity(&c, &s).unwrap();
            assert!(
                (r.margin - expected).abs() < 1e-14,
                "β = {beta}: {}",
                r.margin
            );
        }
        let c = QlCoefficients::heat(1, 1, 1)
            .unwrap()
            .with_constant_gradient_noise(std::f64::consts::SQRT_2);
        let r = check_ql_coercivity(&c, &random_samples(&c, 3, 1.0, 1.0, 0)).unwrap();
        assert!(!r.is_coercive(0.1));
    }

    #[test]
    fn non_symmetric_a_rejected() {
        let c = QlCoefficients::heat(1, 2, 0)
            .unwrap()
            .with_a(false, |_, _, out| {
                out.copy_from_slice(&[1.0, 0.5, 0.0, 1.0]);
            });
        let s = random_samples(&c, 1, 1.0, 1.0, 0);
        assert!(matches!(
            check_ql_coercivity(&c, &s),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn symmetrization_does_not_change_margin() {
        // a depends on y, symmetric by construction
        let c = QlCoefficients::heat(1, 2, 1)
            .unwrap()
            .with_a(true, |p, _, out| {
                let s = 0.3 * p.y[0].tanh();
                out.copy_from_slice(&[1.5, s, s, 1.2 + 0.2 * p.y[0].sin()]);
            })
            .with_constant_gradient_noise(0.8);
        let sym = c.clone().with_a(true, {
            let base = c.a.clone();
            move |p, al, out| {
                let mut m = [0.0; 4];
                base(p, al, &mut m);
                out.copy_from_slice(&[m[0], 0.5 * (m[1] + m[2]), 0.5 * (m[1] + m[2]), m[3]]);
            }
        });
        let s = random_samples(&c, 50, 1.0, 4.0, 3);
        let (m1, m2) = (
            check_ql_coercivity(&c, &s).unwrap(),
            check_ql_coercivity(&sym, &s).unwrap(),
        );
        assert_eq!(m1.margin, m2.margin);
    }

    #[test]
    fn growth_and_dissipativity() {
        let c = QlCoefficients::heat(1, 1, 0)
            .unwrap()
            .with_cubic_reaction(1.0);
        let s = random_samples(&c, 200, 1.0, 5.0, 4);
        let k = sampled_constants(&c, &s, 3.0).unwrap();
        assert!(k.growth <= 1.0 + 1e-12);
        assert_eq!(k.dissipativity, 0.0);
        let lin = QlCoefficients::heat(1, 1, 0)
            .unwrap()
            .with_phi(true, |p, _| p.y[0]);
        let k = sampled_constants(&lin, &s, 1.0).unwrap();
        assert!(k.dissipativity <= 1.0 && k.dissipativity > 0.5);
    }

    #[test]
    fn sample_shape_checked() {
        let c = QlCoefficients::heat(2, 1, 0).unwrap();
        let bad = QlSample {
            t: 0.0,
            x: vec![0.5],
            y: vec![1.0],
        };
        assert!(check_ql_coercivity(&c, &[bad]).is_err());
    }
}
