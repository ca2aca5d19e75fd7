//! Semi-implicit collocation scheme for the mollified / truncated system.
//!
//! Per component `α` and step `i`, with `v = u_i`:
//!
//! ```text
//! (I + Δt A^α(v)) u^α_{i+1} = u^α_i + Δt F^α(v) + Σ_n G^α_n(v) Δw_n
//! A^α_kl = ∫ ₘa^α_ij(R_m v) ∂_j e_l ∂_i e_k
//! F^α_k  = −∫ ᵣΦ^α_i(v) ∂_i e_k + ∫ ᵣφ^α(v) e_k
//! G^α_nk = ∫ (ₘb^α_nj(R_m v^α) ∂_j v^α + g^α_n(v)) e_k
//! ```
//!
//! `R_m` mollifies `v` in space (zero extension outside the domain). With
//! `m = None` the coefficients read `v` directly; with `R = None` nothing
//! is truncated.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use super::coefficients::{project_ball_in_place, Point, QlCoefficients};
use super::collocation::Collocation;
use super::mollify::{MollifiedCoefficients, DEFAULT_KERNEL_NODES, DEFAULT_Y_WINDOW};
use crate::error::{Error, Result};
use crate::linear::{
    DataNorms, EnsembleMetadata, Forcing, InitialData, LinearProblem, NoiseForcing, PathEnsemble,
};
use crate::noise::NoiseModel;
use crate::operator::DenseOperatorPair;
use crate::parallel::try_map_indexed;
use crate::spectral::{SpaceTag, SpectralTriple};

type Lu = LU<f64, Dyn, Dyn>;

#[derive(Clone)]
pub struct QlProblem {
    pub triple: SpectralTriple,
    pub coeffs: QlCoefficients,
    pub u0: InitialData,
    pub noise: NoiseModel,
}

impl QlProblem {
    pub fn new(
        triple: SpectralTriple,
        coeffs: QlCoefficients,
        u0: Vec<f64>,
        noise: NoiseModel,
    ) -> Self {
        Self {
            triple,
            coeffs,
            u0: InitialData::Fixed(u0),
            noise,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.triple.len();
        if self.coeffs.components() != self.triple.components() {
            return Err(Error::shape(format!(
                "coefficients have {} components, triple has {}",
                self.coeffs.components(),
                self.triple.components()
            )));
        }
        if self.triple.domain().spatial_dim() != Some(self.coeffs.spatial_dim()) {
            return Err(Error::shape("coefficient and domain dimensions differ"));
        }
        if self.coeffs.noise_modes() > self.noise.modes() {
            return Err(Error::shape(format!(
                "coefficients use {} noise modes, noise model has {}",
                self.coeffs.noise_modes(),
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
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlOptions {
    pub paths: usize,
    pub first_path: u64,
    pub workers: Option<usize>,
    /// Mollification level.
    pub m: Option<f64>,
    /// Truncation radius for `Φ` and `φ`.
    pub r_trunc: Option<f64>,
    /// Collocation points per direction.
    pub grid_points: Option<usize>,
    pub kernel_nodes: usize,
    pub y_window: f64,
}

impl Default for QlOptions {
    fn default() -> Self {
        Self {
            paths: 1,
            first_path: 0,
            workers: None,
            m: None,
            r_trunc: None,
            grid_points: None,
            kernel_nodes: DEFAULT_KERNEL_NODES,
            y_window: DEFAULT_Y_WINDOW,
        }
    }
}

/// Frozen-coefficient terms at one state.
pub(crate) struct StepTerms {
    /// `A^α`, per component.
    pub a: Vec<Arc<DMatrix<f64>>>,
    /// `F^α`, per component.
    pub f: Vec<DVector<f64>>,
    /// `G^α_n`, per component and noise mode.
    pub g: Vec<Vec<DVector<f64>>>,
}

pub(crate) struct Assembler {
    pub coeffs: QlCoefficients,
    pub col: Collocation,
    mollifier: Option<(MollifiedCoefficients, DMatrix<f64>)>,
    r_trunc: Option<f64>,
    frozen_a: Option<Vec<Arc<DMatrix<f64>>>>,
    dim: usize,
}

impl Assembler {
    pub fn new(problem: &QlProblem, options: &QlOptions) -> Result<Self> {
        problem.validate()?;
        if let Some(r) = options.r_trunc {
            if !(r > 0.0) {
                return Err(Error::param(format!(
                    "truncation radius {r} must be positive"
                )));
            }
        }
        let col = Collocation::new(&problem.triple, options.grid_points)?;
        let (coeffs, mollifier) = match options.m {
            Some(m) => {
                let mc = MollifiedCoefficients::new(
                    &problem.coeffs,
                    m,
                    options.kernel_nodes,
                    options.y_window,
                )?;
                let table = col.mollified_basis(&mc.kernel, m);
                (mc.coefficients(), Some((mc, table)))
            }
            None => (problem.coeffs.clone(), None),
        };
        let mut out = Self {
            coeffs,
            col,
            mollifier,
            r_trunc: options.r_trunc,
            frozen_a: None,
            dim: problem.triple.dim(),
        };
        if !out.coeffs.depends().a && !out.coeffs.is_time_dependent() {
            let zeros = vec![0.0; problem.triple.len()];
            let a = out.assemble_a(0.0, &out.grid_states(&zeros).1)?;
            out.frozen_a = Some(a);
        }
        Ok(out)
    }

    pub fn a_is_frozen(&self) -> bool {
        self.frozen_a.is_some()
    }

    /// Grid values of `v` and of the state the coefficients read.
    fn grid_states(&self, u: &[f64]) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let n = self.coeffs.components();
        let y: Vec<DVector<f64>> = (0..n)
            .map(|al| self.col.values(&u[al * self.dim..(al + 1) * self.dim]))
            .collect();
        let ym = match &self.mollifier {
            Some((_, table)) => (0..n)
                .map(|al| {
                    table * DVector::from_column_slice(&u[al * self.dim..(al + 1) * self.dim])
                })
                .collect(),
            None => y.clone(),
        };
        (y, ym)
    }

    fn assemble_a(&self, t: f64, ym: &[DVector<f64>]) -> Result<Vec<Arc<DMatrix<f64>>>> {
        let n = self.coeffs.components();
        let d = self.col.spatial_dim();
        let np = self.col.len();
        let w = self.col.weight();
        let mut out = Vec::with_capacity(n);
        let mut buf = vec![0.0; d * d];
        let mut yg = vec![0.0; n];
        for alpha in 0..n {
            let mut coef = vec![vec![0.0; np]; d * d];
            for g in 0..np {
                for c in 0..n {
                    yg[c] = ym[c][g];
                }
                let p = Point {
                    t,
                    x: self.col.point(g),
                    y: &yg,
                };
                self.coeffs.eval_a(&p, alpha, &mut buf);
                for (ij, v) in buf.iter().enumerate() {
                    coef[ij][g] = w * v;
                }
            }
            let mut a = DMatrix::zeros(self.dim, self.dim);
            for i in 0..d {
                for j in 0..d {
                    let c = &coef[i * d + j];
                    if c.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let mut scaled = self.col.grad[j].clone();
                    for (g, mut row) in scaled.row_iter_mut().enumerate() {
                        row *= c[g];
                    }
                    a += self.col.grad[i].tr_mul(&scaled);
                }
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step: 0,
                    what: format!("stiffness matrix of component {alpha}"),
                });
            }
            out.push(Arc::new(a));
        }
        Ok(out)
    }

    pub fn terms(&self, t: f64, u: &[f64]) -> Result<StepTerms> {
        let n = self.coeffs.components();
        let d = self.col.spatial_dim();
        let k = self.coeffs.noise_modes();
        let np = self.col.len();
        let (y, ym) = self.grid_states(u);
        let reads_state = self.coeffs.depends().a || self.coeffs.depends().b;
        if let (Some((mc, _)), true) = (&self.mollifier, reads_state) {
            let ymax = ym
                .iter()
                .flat_map(|v| v.iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            mc.check_window(ymax)?;
        }
        let a = match &self.frozen_a {
            Some(a) => a.clone(),
            None => self.assemble_a(t, &ym)?,
        };
        let grads: Vec<Vec<DVector<f64>>> = (0..n)
            .map(|al| {
                (0..d)
                    .map(|i| self.col.gradient(&u[al * self.dim..(al + 1) * self.dim], i))
                    .collect()
            })
            .collect();
        let has_flux = self.coeffs.has_flux();
        let has_phi = self.coeffs.has_phi();
        let has_b = self.coeffs.has_b();
        let has_g = self.coeffs.has_g();
        let mut flux = vec![vec![DVector::zeros(np); d]; n];
        let mut phi = vec![DVector::zeros(np); n];
        let mut noise = vec![vec![DVector::zeros(np); k]; n];
        let mut yg = vec![0.0; n];
        let mut yt = vec![0.0; n];
        let mut fbuf = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut bbuf = vec![0.0; k * d];
        let mut gbuf = vec![0.0; k];
        for g in 0..np {
            let x = self.col.point(g);
            for c in 0..n {
                yg[c] = y[c][g];
            }
            yt.copy_from_slice(&yg);
            if let Some(r) = self.r_trunc {
                project_ball_in_place(&mut yt, r);
            }
            let pt = Point { t, x, y: &yt };
            let py = Point { t, x, y: &yg };
            for alpha in 0..n {
                if has_flux {
                    self.coeffs.eval_flux(&pt, alpha, &mut fbuf, &mut scratch);
                    for i in 0..d {
                        flux[alpha][i][g] = fbuf[i];
                    }
                }
                if has_phi {
                    phi[alpha][g] = self.coeffs.eval_phi(&pt, alpha);
                }
                if has_b {
                    self.coeffs.eval_b(t, x, ym[alpha][g], alpha, &mut bbuf);
                    for nm in 0..k {
                        let mut s = 0.0;
                        for j in 0..d {
                            s += bbuf[nm * d + j] * grads[alpha][j][g];
                        }
                        noise[alpha][nm][g] = s;
                    }
                }
                if has_g {
                    self.coeffs.eval_g(&py, alpha, &mut gbuf);
                    for nm in 0..k {
                        noise[alpha][nm][g] += gbuf[nm];
                    }
                }
            }
        }
        let mut f = Vec::with_capacity(n);
        let mut gs = Vec::with_capacity(n);
        for alpha in 0..n {
            let mut fa = if has_phi {
                self.col.project(&phi[alpha])
            } else {
                DVector::zeros(self.dim)
            };
            if has_flux {
                for (i, fl) in flux[alpha].iter().enumerate().take(d) {
                    fa -= self.col.project_grad(fl, i);
                }
            }
            f.push(fa);
            gs.push(if has_b || has_g {
                noise[alpha].iter().map(|v| self.col.project(v)).collect()
            } else {
                vec![DVector::zeros(self.dim); k]
            });
        }
        Ok(StepTerms { a, f, g: gs })
    }
}

fn step_lu(a: &DMatrix<f64>, dt: f64) -> LU<f64, Dyn, Dyn> {
    (DMatrix::identity(a.nrows(), a.ncols()) + a * dt).lu()
}

pub(crate) fn solve_ql_path(
    asm: &Assembler,
    problem: &QlProblem,
    path_index: u64,
) -> Result<(Vec<f64>, DataNorms)> {
    let triple = &problem.triple;
    let len = triple.len();
    let dim = triple.dim();
    let n = triple.components();
    let grid = problem.noise.grid();
    let steps = grid.len() - 1;
    let inc = problem.noise.sample_increments(path_index);
    let mut u = problem.u0.eval(path_index);
    if u.len() != len {
        return Err(Error::shape("u0 has the wrong length"));
    }
    let mut states = Vec::with_capacity((steps + 1) * len);
    states.extend_from_slice(&u);
    let mut data = DataNorms::default();
    let mut cached: Option<(f64, Vec<Lu>)> = None;
    for i in 0..steps {
        let t = grid[i];
        let dt = grid[i + 1] - t;
        let terms = asm.terms(t, &u)?;
        let mut next = vec![0.0; len];
        let mut fall = Vec::with_capacity(len);
        let mut g2 = 0.0;
        let frozen = asm.a_is_frozen();
        if !(frozen && cached.as_ref().is_some_and(|(h, _)| *h == dt)) {
            cached = None;
        }
        if frozen && cached.is_none() {
            cached = Some((dt, terms.a.iter().map(|a| step_lu(a, dt)).collect()));
        }
        for alpha in 0..n {
            let ua = DVector::from_column_slice(&u[alpha * dim..(alpha + 1) * dim]);
            let mut rhs = &ua + &terms.f[alpha] * dt;
            for (mode, gn) in terms.g[alpha].iter().enumerate() {
                rhs.axpy(inc.get(mode, i), gn, 1.0);
                g2 += gn.norm_squared();
            }
            fall.extend(terms.f[alpha].iter().copied());
            let sol = match &cached {
                Some((_, lus)) => lus[alpha].solve(&rhs),
                None => step_lu(&terms.a[alpha], dt).solve(&rhs),
            }
            .ok_or(Error::SingularSystem { step: i })?;
            next[alpha * dim..(alpha + 1) * dim].copy_from_slice(sol.as_slice());
        }
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                step: i + 1,
                what: format!("path {path_index}"),
            });
        }
        data.f_vdual
            .push(triple.norm_slice(&fall, SpaceTag::Vdual)?);
        data.g_hs.push(g2.sqrt());
        u = next;
        states.extend_from_slice(&u);
    }
    Ok((states, data))
}

pub fn solve_ql(problem: &QlProblem, options: &QlOptions) -> Result<PathEnsemble> {
    let asm = Assembler::new(problem, options)?;
    let results = try_map_indexed(options.paths, options.workers, |p| {
        solve_ql_path(&asm, problem, options.first_path + p as u64)
    })?;
    let (paths, data) = results.into_iter().unzip();
    Ok(PathEnsemble {
        grid: problem.noise.grid(),
        components: problem.triple.components(),
        dim: problem.triple.dim(),
        seed: problem.noise.seed(),
        paths,
        data,
        metadata: EnsembleMetadata {
            problem: format!("quasilinear: {}", problem.coeffs.name),
            solver: "semi-implicit-collocation".into(),
            first_path: options.first_path,
        },
    })
}

/// The linear problem solved by the same scheme when no field reads `y`
/// or `t`: block-diagonal `A`, `B_n` from the gradient noise, `f = F`,
/// `g = G(0)`.
pub fn as_linear_problem(problem: &QlProblem, options: &QlOptions) -> Result<LinearProblem> {
    if problem.coeffs.depends().any() || problem.coeffs.is_time_dependent() {
        return Err(Error::Precondition(
            "only state- and time-independent coefficients reduce to a linear problem".into(),
        ));
    }
    let asm = Assembler::new(problem, options)?;
    let len = problem.triple.len();
    let dim = problem.triple.dim();
    let n = problem.triple.components();
    let k = problem.noise.modes();
    let kc = problem.coeffs.noise_modes();
    let zero = asm.terms(0.0, &vec![0.0; len])?;
    let mut a = DMatrix::zeros(len, len);
    for alpha in 0..n {
        a.view_mut((alpha * dim, alpha * dim), (dim, dim))
            .copy_from(&*zero.a[alpha]);
    }
    let mut b = vec![DMatrix::zeros(len, len); k];
    if problem.coeffs.has_b() {
        for col in 0..len {
            let mut e = vec![0.0; len];
            e[col] = 1.0;
            let terms = asm.terms(0.0, &e)?;
            for alpha in 0..n {
                for (mode, bm) in b.iter_mut().enumerate().take(kc) {
                    let diff = &terms.g[alpha][mode] - &zero.g[alpha][mode];
                    bm.view_mut((alpha * dim, col), (dim, 1)).copy_from(&diff);
                }
            }
        }
    }
    let b = if problem.coeffs.has_b() {
        b
    } else {
        Vec::new()
    };
    let pair = DenseOperatorPair::new(a, b, k)?;
    let f: Vec<f64> = zero.f.iter().flat_map(|v| v.iter().copied()).collect();
    let g: Vec<Vec<f64>> = (0..k)
        .map(|mode| {
            (0..n)
                .flat_map(|alpha| {
                    if mode < kc {
                        zero.g[alpha][mode].iter().copied().collect::<Vec<_>>()
                    } else {
                        vec![0.0; dim]
                    }
                })
                .collect()
        })
        .collect();
    Ok(LinearProblem {
        triple: problem.triple.clone(),
        pair: Arc::new(pair),
        f: if problem.coeffs.has_flux() || problem.coeffs.has_phi() {
            Forcing::Constant(f)
        } else {
            Forcing::Zero
        },
        g: if problem.coeffs.has_g() {
            NoiseForcing::Constant(g)
        } else {
            NoiseForcing::Zero
        },
        u0: problem.u0.clone(),
        noise: problem.noise.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{solve_linear, SolverOptions};
    use crate::spectral::DomainKind;
    use std::f64::consts::PI;

    #[test]
    fn heat_modes_decay_by_the_linear_recurrence() {
        let triple = SpectralTriple::interval(6).unwrap();
        let coeffs = QlCoefficients::heat(1, 1, 1).unwrap();
        let u0: Vec<f64> = (0..6).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let noise = NoiseModel::uniform(1, 20, 0.1, 0).unwrap();
        let dt = 0.1 / 20.0;
        let e = solve_ql(
            &QlProblem::new(triple.clone(), coeffs, u0.clone(), noise),
            &QlOptions::default(),
        )
        .unwrap();
        for i in [1, 5, 20] {
            for (k, &u0k) in u0.iter().enumerate().take(6) {
                let lam = triple.eigenvalues()[k];
                let exact = u0k * (1.0 + dt * lam).powi(-(i as i32));
                assert!(
                    (e.state(0, i)[k] - exact).abs() < 1e-12,
                    "mode {k} step {i}"
                );
            }
        }
        assert!((triple.eigenvalues()[0] - PI * PI).abs() < 1e-12);
    }

    fn y_independent(n: usize, d: usize) -> QlCoefficients {
        QlCoefficients::heat(n, d, 2)
            .unwrap()
            .with_a(false, move |p, al, out| {
                let s = 0.2 * (PI * p.x[0]).sin();
                if d == 1 {
                    out[0] = 1.0 + s + 0.1 * al as f64;
                } else {
                    out.copy_from_slice(&[1.0 + s, 0.1, 0.1, 1.3]);
                }
            })
            .with_b(false, move |_, x, _, _, out| {
                out.fill(0.0);
                out[0] = 0.4 * x[0];
            })
            .with_phi(false, |p, al| (2.0 * PI * p.x[0]).cos() + al as f64)
            .with_flux_hat(false, move |p, _, out| {
                out.fill(0.0);
                out[0] = p.x[0] * (1.0 - p.x[0]);
            })
            .with_g(false, |p, _, out| {
                out[0] = 0.3 * (PI * p.x[0]).sin();
                out[1] = 0.1;
            })
    }

    #[test]
    fn state_independent_fields_match_linear_solver() {
        for (triple, d) in [
            (SpectralTriple::new(DomainKind::Interval, 7, 2).unwrap(), 1),
            (SpectralTriple::new(DomainKind::Square, 6, 1).unwrap(), 2),
        ] {
            let coeffs = y_independent(triple.components(), d);
            let u0: Vec<f64> = (0..triple.len()).map(|i| (i as f64 * 0.7).sin()).collect();
            let noise = NoiseModel::uniform(2, 30, 0.3, 11).unwrap();
            let prob = QlProblem::new(triple.clone(), coeffs, u0, noise);
            let opts = QlOptions {
                paths: 3,
                ..Default::default()
            };
            let ql = solve_ql(&prob, &opts).unwrap();
            let lin = solve_linear(
                &as_linear_problem(&prob, &opts).unwrap(),
                &SolverOptions {
                    paths: 3,
                    ..Default::default()
                },
            )
            .unwrap();
            for (a, b) in ql.paths.iter().zip(&lin.paths) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-11 * (1.0 + y.abs()), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn inactive_truncation_is_exact() {
        let triple = SpectralTriple::interval(8).unwrap();
        let coeffs = QlCoefficients::heat(1, 1, 1)
            .unwrap()
            .with_cubic_reaction(1.0)
            .with_g(false, |p, _, out| out[0] = 0.2 * (PI * p.x[0]).sin());
        let mut u0 = vec![0.0; 8];
        u0[0] = 0.5;
        let noise = NoiseModel::uniform(1, 40, 0.5, 2).unwrap();
        let prob = QlProblem::new(triple, coeffs, u0, noise);
        let free = solve_ql(
            &prob,
            &QlOptions {
                paths: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let sup = free
            .paths
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        // |u(x)| ≤ √2 Σ|c_k|
        let bound: f64 = free
            .paths
            .iter()
            .flat_map(|p| {
                p.chunks(8)
                    .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() * 2f64.sqrt())
            })
            .fold(0.0, f64::max);
        assert!(bound >= sup);
        let r = bound + 0.1;
        let a = solve_ql(
            &prob,
            &QlOptions {
                paths: 4,
                r_trunc: Some(r),
                ..Default::default()
            },
        )
        .unwrap();
        let b = solve_ql(
            &prob,
            &QlOptions {
                paths: 4,
                r_trunc: Some(2.0 * r),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.paths, b.paths);
        assert_eq!(a.paths, free.paths);
    }

    #[test]
    fn worker_invariance() {
        let triple = SpectralTriple::interval(6).unwrap();
        let coeffs = QlCoefficients::heat(1, 1, 1)
            .unwrap()
            .with_a(true, |p, _, out| out[0] = 1.0 + 0.5 * p.y[0].tanh())
            .with_constant_gradient_noise(0.5)
            .with_cubic_reaction(1.0);
        let prob = QlProblem::new(
            triple,
            coeffs,
            vec![1.0, 0.0, 0.5, 0.0, 0.0, 0.0],
            NoiseModel::uniform(1, 20, 0.2, 5).unwrap(),
        );
        let o1 = QlOptions {
            paths: 6,
            workers: Some(1),
            m: Some(2.0),
            r_trunc: Some(3.0),
            ..Default::default()
        };
        let o3 = QlOptions {
            workers: Some(3),
            ..o1.clone()
        };
        assert_eq!(solve_ql(&prob, &o1).unwrap(), solve_ql(&prob, &o3).unwrap());
    }

    #[test]
    fn window_guard_fires() {
        let triple = SpectralTriple::interval(4).unwrap();
        let coeffs = QlCoefficients::heat(1, 1, 0)
            .unwrap()
            .with_a(true, |p, _, out| out[0] = 1.0 + 0.1 * p.y[0].sin());
        let prob = QlProblem::new(
            triple,
            coeffs,
            vec![5.0, 0.0, 0.0, 0.0],
            NoiseModel::uniform(1, 5, 0.1, 0).unwrap(),
        );
        let opts = QlOptions {
            m: Some(1.0),
            y_window: 2.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_ql(&prob, &opts),
            Err(Error::MollifierGuard(_))
        ));
    }

    #[test]
    fn shape_errors() {
        let triple = SpectralTriple::interval(4).unwrap();
        let coeffs = QlCoefficients::heat(2, 1, 0).unwrap();
        let prob = QlProblem::new(
            triple,
            coeffs,
            vec![0.0; 4],
            NoiseModel::uniform(1, 5, 0.1, 0).unwrap(),
        );
        assert!(solve_ql(&prob, &QlOptions::default()).is_err());
    }
}
