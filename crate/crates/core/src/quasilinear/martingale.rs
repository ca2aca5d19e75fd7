//! Martingale residuals of the weak formulation.
//!
//! For a test vector `ξ` in the Galerkin span,
//!
//! ```text
//! M(t_k) = ⟨u_k − u_0, ξ⟩ − Σ_{i<k} Δt_i [−ξᵀA(u_i)u_{i+1} + ξᵀF(u_i)]
//! Q(t_k) = Σ_{i<k} Δt_i Σ_n (ξᵀG_n(u_i))²
//! ```
//!
//! where `M` is built from the drift only. For a correct solver both `M`
//! and `M² − Q` are discrete martingales, so `E[γ (M(t) − M(s))] = 0` for
//! every bounded `γ` of the path up to `s`.

use serde::{Deserialize, Serialize};

use super::solver::{Assembler, QlOptions, QlProblem};
use crate::error::{Error, Result};
use crate::linear::PathEnsemble;
use crate::noise::NormalSampler;
use crate::parallel::try_map_indexed;

/// Bounded functional `γ` of finitely many path values at times `≤ s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathFunctional {
    One,
    /// `tanh(scale · Σ_j ⟨u(τ_j), η⟩)`.
    Tanh {
        times: Vec<f64>,
        eta: Vec<f64>,
        scale: f64,
    },
    /// `cos(scale · Σ_j ⟨u(τ_j), η⟩)`.
    Cos {
        times: Vec<f64>,
        eta: Vec<f64>,
        scale: f64,
    },
}

impl PathFunctional {
    fn eval(&self, ensemble: &PathEnsemble, path: usize, s_index: usize) -> Result<f64> {
        let (times, eta, scale, f) = match self {
            PathFunctional::One => return Ok(1.0),
            PathFunctional::Tanh { times, eta, scale } => {
                (times, eta, *scale, f64::tanh as fn(f64) -> f64)
            }
            PathFunctional::Cos { times, eta, scale } => {
                (times, eta, *scale, f64::cos as fn(f64) -> f64)
            }
        };
        if eta.len() != ensemble.state_len() {
            return Err(Error::shape("γ test vector has the wrong length"));
        }
        let mut acc = 0.0;
        for &tau in times {
            let i = grid_index(&ensemble.grid, tau)?;
            if i > s_index {
                return Err(Error::param(format!("γ reads the path at {tau}, after s")));
            }
            acc += ensemble
                .state(path, i)
                .iter()
                .zip(eta)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        Ok(f(scale * acc))
    }
}

/// Index of the grid point nearest to `t`.
fn grid_index(grid: &[f64], t: f64) -> Result<usize> {
    let (i, dist) = grid
        .iter()
        .enumerate()
        .map(|(i, &g)| (i, (g - t).abs()))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let h = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if dist > 0.5 * h + 1e-12 {
        return Err(Error::param(format!("time {t} lies outside the grid")));
    }
    Ok(i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTest {
    /// Test vector in the Galerkin span, component-major.
    pub xi: Vec<f64>,
    pub s: f64,
    pub t: f64,
    pub gamma: PathFunctional,
    /// Test `M² − Q` instead of `M`.
    pub quadratic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleStat {
    pub mean: f64,
    pub se: f64,
    pub z: f64,
    pub paths: usize,
}

impl MartingaleStat {
    pub fn accepted(&self) -> bool {
        self.mean.abs() <= 3.0 * self.se
    }
}

/// `count` reproducible tests: `ξ_k ~ N(0,1)/(1+k)` within each component,
/// grid times `s < t`, and `γ` cycling through `1`, `tanh` and `cos` of
/// the path at `{s/2, s}`. Every third test is quadratic.
pub fn random_martingale_tests(
    count: usize,
    components: usize,
    dim: usize,
    grid: &[f64],
    seed: u64,
) -> Vec<MartingaleTest> {
    let mut rng = NormalSampler::new(seed);
    let n = grid.len().saturating_sub(1).max(1);
    let vector = |rng: &mut NormalSampler| -> Vec<f64> {
        (0..components * dim)
            .map(|i| rng.sample() / (1 + i % dim) as f64)
            .collect()
    };
    (0..count)
        .map(|j| {
            let xi = vector(&mut rng);
            let s_index = ((rng.uniform() * n as f64) as usize).min(n - 1);
            let t_index = s_index
                + 1
                + ((rng.uniform() * (n - s_index) as f64) as usize).min(n - s_index - 1);
            let (s, t) = (grid[s_index], grid[t_index]);
            let times = vec![grid[s_index / 2], s];
            let gamma = match j % 3 {
                0 => PathFunctional::One,
                1 => PathFunctional::Tanh {
                    times,
                    eta: vector(&mut rng),
                    scale: 1.0,
                },
                _ => PathFunctional::Cos {
                    times,
                    eta: vector(&mut rng),
                    scale: 1.0,
                },
            };
            MartingaleTest {
                xi,
                s,
                t,
                gamma,
                quadratic: j % 3 == 2,
            }
        })
        .collect()
}

pub fn martingale_residual(
    ensemble: &PathEnsemble,
    problem: &QlProblem,
    options: &QlOptions,
    test: &MartingaleTest,
) -> Result<MartingaleStat> {
    Ok(martingale_residuals(ensemble, problem, options, std::slice::from_ref(test))?.remove(0))
}

/// All tests share one pass over the ensemble.
pub fn martingale_residuals(
    ensemble: &PathEnsemble,
    problem: &QlProblem,
    options: &QlOptions,
    tests: &[MartingaleTest],
) -> Result<Vec<MartingaleStat>> {
    let len = problem.triple.len();
    let dim = problem.triple.dim();
    let ncomp = problem.triple.components();
    if ensemble.state_len() != len || ensemble.grid != problem.noise.grid() {
        return Err(Error::shape("ensemble does not belong to this problem"));
    }
    if ensemble.len() < 2 {
        return Err(Error::param("need at least two paths"));
    }
    let mut idx = Vec::with_capacity(tests.len());
    for test in tests {
        if test.xi.len() != len {
            return Err(Error::shape(format!(
                "ξ has {} coefficients; the Galerkin span has {len}",
                test.xi.len()
            )));
        }
        let (s, t) = (
            grid_index(&ensemble.grid, test.s)?,
            grid_index(&ensemble.grid, test.t)?,
        );
        if s > t {
            return Err(Error::param("need s ≤ t"));
        }
        idx.push((s, t));
    }
    let last = idx.iter().map(|&(_, t)| t).max().unwrap_or(0);
    let asm = Assembler::new(problem, options)?;
    let grid = &ensemble.grid;
    let per_path = try_map_indexed(ensemble.len(), options.workers, |p| -> Result<Vec<f64>> {
        // running M and Q per test
        let mut m = vec![vec![0.0; last + 1]; tests.len()];
        let mut q = vec![vec![0.0; last + 1]; tests.len()];
        let mut drift_sum = vec![0.0; tests.len()];
        let u0 = ensemble.state(p, 0);
        for i in 0..last {
            let dt = grid[i + 1] - grid[i];
            let ui = ensemble.state(p, i);
            let un = ensemble.state(p, i + 1);
            let terms = asm.terms(grid[i], ui)?;
            for (k, test) in tests.iter().enumerate() {
                let mut drift = 0.0;
                let mut noise = vec![0.0; terms.g.first().map_or(0, |g| g.len())];
                for alpha in 0..ncomp {
                    let xi = nalgebra::DVector::from_column_slice(
                        &test.xi[alpha * dim..(alpha + 1) * dim],
                    );
                    let next =
                        nalgebra::DVector::from_column_slice(&un[alpha * dim..(alpha + 1) * dim]);
                    drift += -xi.dot(&(&*terms.a[alpha] * &next)) + xi.dot(&terms.f[alpha]);
                    for (n, gn) in terms.g[alpha].iter().enumerate() {
                        noise[n] += xi.dot(gn);
                    }
                }
                let qv: f64 = noise.iter().map(|v| v * v).sum();
                drift_sum[k] += dt * drift;
                m[k][i + 1] = pair_diff(un, u0, &test.xi) - drift_sum[k];
                q[k][i + 1] = q[k][i] + dt * qv;
            }
        }
        tests
            .iter()
            .enumerate()
            .map(|(k, test)| {
                let (s, t) = idx[k];
                let gamma = test.gamma.eval(ensemble, p, s)?;
                Ok(if test.quadratic {
                    gamma * ((m[k][t].powi(2) - q[k][t]) - (m[k][s].powi(2) - q[k][s]))
                } else {
                    gamma * (m[k][t] - m[k][s])
                })
            })
            .collect()
    })?;
    let paths = per_path.len();
    Ok((0..tests.len())
        .map(|k| {
            let xs: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
            let mean = xs.iter().sum::<f64>() / paths as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
            let se = (var / paths as f64).sqrt();
            let z = if se > 0.0 {
                mean / se
            } else if mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            MartingaleStat { mean, se, z, paths }
        })
        .collect())
}

/// `⟨u − u0, ξ⟩`.
fn pair_diff(u: &[f64], u0: &[f64], xi: &[f64]) -> f64 {
    u.iter()
        .zip(u0)
        .zip(xi)
        .map(|((a, b), x)| (a - b) * x)
        .sum()
}
