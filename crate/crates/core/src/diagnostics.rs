//! Ensemble statistics: moments against the data size `C_{u0,f,g}`,
//! Markov tails and a Cauchy–Riemann test of `z ↦ u_z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{LinearProblem, PathEnsemble};
use crate::parallel::try_map_indexed;
use crate::spectral::{SpaceTag, SpectralTriple, TimeNorm};
use crate::stats::{jackknife, mean, mean_estimate, Estimate, DEFAULT_BATCHES};
use crate::stein::{cauchy_riemann_residual, solve_member, ComplexFamily};

/// `E‖u‖^p` in the path norm `norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub norm: TimeNorm,
    pub p: f64,
}

impl MomentSpec {
    /// `H^{θ,p}(0,T; [H,V]_{1−2θ})`.
    pub fn bessel(theta: f64, p: f64) -> Self {
        Self {
            norm: TimeNorm::Gagliardo {
                theta,
                p,
                space: SpaceTag::ComplexInterp(1.0 - 2.0 * theta),
            },
            p,
        }
    }
}

/// `θ ∈ {0, 0.1, …, 0.4}` crossed with the given exponents.
pub fn bessel_specs(ps: &[f64]) -> Vec<MomentSpec> {
    [0.0, 0.1, 0.2, 0.3, 0.4]
        .iter()
        .flat_map(|&theta| ps.iter().map(move |&p| MomentSpec::bessel(theta, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSize {
    pub p: f64,
    /// `(E‖u₀‖^p_{(H,V)_{1−2/p,p}})^{1/p}`.
    pub u0: f64,
    /// `(E Σ Δt ‖f‖^p_{V*})^{1/p}`.
    pub f: f64,
    /// `(E Σ Δt ‖g‖^p_{HS})^{1/p}`.
    pub g: f64,
}

impl DataSize {
    pub fn total(&self) -> f64 {
        self.u0 + self.f + self.g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub spec: MomentSpec,
    /// `Ê‖u‖^p`.
    pub moment: Estimate,
    /// `(Ê‖u‖^p)^{1/p}`.
    pub norm: Estimate,
    pub data: DataSize,
    /// `norm / C_{u0,f,g}`; absent when the data vanish.
    pub ratio: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub paths: usize,
    pub entries: Vec<MomentEntry>,
}

/// Per-path values of a path norm.
pub fn path_norms(
    ensemble: &PathEnsemble,
    triple: &SpectralTriple,
    norm: TimeNorm,
    workers: Option<usize>,
) -> Result<Vec<f64>> {
    if ensemble.state_len() != triple.len() {
        return Err(Error::shape("ensemble does not match the spectral triple"));
    }
    try_map_indexed(ensemble.len(), workers, |p| {
        triple.time_norm_slices(&ensemble.path_states(p), &ensemble.grid, norm)
    })
}

fn initial_space(p: f64) -> SpaceTag {
    let s = 1.0 - 2.0 / p;
    if s <= 0.0 {
        SpaceTag::H
    } else {
        SpaceTag::RealInterp { s, p }
    }
}

/// Per-path `(‖u₀‖^p, Σ Δt‖f‖^p, Σ Δt‖g‖^p)`.
fn data_samples(ensemble: &PathEnsemble, triple: &SpectralTriple, p: f64) -> Result<Vec<[f64; 3]>> {
    let grid = &ensemble.grid;
    (0..ensemble.len())
        .map(|path| {
            let u0 = triple
                .norm_slice(ensemble.state(path, 0), initial_space(p))?
                .powf(p);
            let d = ensemble.data.get(path).cloned().unwrap_or_default();
            let integral = |v: &[f64]| {
                v.iter()
                    .zip(grid.windows(2))
                    .map(|(x, w)| (w[1] - w[0]) * x.powf(p))
                    .sum::<f64>()
            };
            Ok([u0, integral(&d.f_vdual), integral(&d.g_hs)])
        })
        .collect()
}

fn data_size(samples: &[[f64; 3]], p: f64) -> DataSize {
    let col = |k: usize| mean(&samples.iter().map(|s| s[k]).collect::<Vec<_>>()).powf(1.0 / p);
    DataSize {
        p,
        u0: col(0),
        f: col(1),
        g: col(2),
    }
}

pub fn moment_estimates(
    ensemble: &PathEnsemble,
    triple: &SpectralTriple,
    specs: &[MomentSpec],
    workers: Option<usize>,
) -> Result<MomentReport> {
    if ensemble.is_empty() {
        return Err(Error::param("empty ensemble"));
    }
    if !ensemble.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            what: "ensemble contains non-finite states".into(),
        });
    }
    let mut entries = Vec::with_capacity(specs.len());
    for spec in specs {
        if !(spec.p >= 1.0) {
            return Err(Error::param(format!("moment exponent p = {} < 1", spec.p)));
        }
        let p = spec.p;
        let norms = path_norms(ensemble, triple, spec.norm, workers)?;
        let powers: Vec<f64> = norms.iter().map(|x| x.powf(p)).collect();
        let data = data_samples(ensemble, triple, p)?;
        let size = data_size(&data, p);
        let joint: Vec<(f64, [f64; 3])> =
            powers.iter().copied().zip(data.iter().copied()).collect();
        let ratio = (size.total() > 0.0).then(|| {
            jackknife(&joint, DEFAULT_BATCHES, |s| {
                let top = mean(&s.iter().map(|x| x.0).collect::<Vec<_>>()).powf(1.0 / p);
                let d: Vec<[f64; 3]> = s.iter().map(|x| x.1).collect();
                top / data_size(&d, p).total()
            })
        });
        entries.push(MomentEntry {
            spec: *spec,
            moment: mean_estimate(&powers),
            norm: jackknife(&powers, DEFAULT_BATCHES, |s| mean(s).powf(1.0 / p)),
            data: size,
            ratio,
        });
    }
    Ok(MomentReport {
        paths: ensemble.len(),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub theta: f64,
    pub p: f64,
    pub radii: Vec<f64>,
    /// Empirical `P(‖u‖ ≥ R)`.
    pub tails: Vec<Estimate>,
    /// `R^{−p} Ê‖u‖^p`.
    pub bounds: Vec<Estimate>,
    /// Smallest grid radius with empirical tail `≤ ε`.
    pub radius_eps: Option<f64>,
    pub eps: f64,
}

impl TightnessReport {
    /// `tail ≤ bound + 3·SE` at every radius.
    pub fn dominated(&self) -> bool {
        self.tails
            .iter()
            .zip(&self.bounds)
            .all(|(t, b)| t.value <= b.value + 3.0 * b.se.hypot(t.se))
    }

    pub fn tail_at(&self, radius: f64) -> Option<f64> {
        self.radii
            .iter()
            .position(|&r| r == radius)
            .map(|i| self.tails[i].value)
    }
}

/// The Hölder path norm `sup_t ‖u‖ + [u]_{θ−1/p}` in `[H,V]_{1−2θ}`.
pub fn holder_norms(
    ensemble: &PathEnsemble,
    triple: &SpectralTriple,
    theta: f64,
    p: f64,
    workers: Option<usize>,
) -> Result<Vec<f64>> {
    if !(theta > 1.0 / p && theta < 0.5) {
        return Err(Error::param(format!(
            "need 1/p < θ < 1/2, got θ = {theta}, p = {p}"
        )));
    }
    let space = SpaceTag::ComplexInterp(1.0 - 2.0 * theta);
    let sup = path_norms(ensemble, triple, TimeNorm::Sup { space }, workers)?;
    let semi = path_norms(
        ensemble,
        triple,
        TimeNorm::Holder {
            gamma: theta - 1.0 / p,
            space,
        },
        workers,
    )?;
    Ok(sup.iter().zip(&semi).map(|(a, b)| a + b).collect())
}

pub fn tightness_from_norms(
    norms: &[f64],
    theta: f64,
    p: f64,
    radii: &[f64],
    eps: f64,
) -> Result<TightnessReport> {
    if norms.is_empty() {
        return Err(Error::param("empty ensemble"));
    }
    if radii.iter().any(|&r| !(r >= 0.0)) || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("radii must be non-negative and increasing"));
    }
    let powers: Vec<f64> = norms.iter().map(|x| x.powf(p)).collect();
    let mut tails = Vec::with_capacity(radii.len());
    let mut bounds = Vec::with_capacity(radii.len());
    for &r in radii {
        let ind: Vec<f64> = norms
            .iter()
            .map(|&x| if x >= r { 1.0 } else { 0.0 })
            .collect();
        tails.push(mean_estimate(&ind));
        let scale = r.powf(-p);
        let m = mean_estimate(&powers);
        bounds.push(if r == 0.0 {
            Estimate::exact(f64::INFINITY)
        } else {
            Estimate {
                value: scale * m.value,
                se: scale * m.se,
            }
        });
    }
    let radius_eps = radii
        .iter()
        .zip(&tails)
        .find(|(_, t)| t.value <= eps)
        .map(|(r, _)| *r);
    Ok(TightnessReport {
        theta,
        p,
        radii: radii.to_vec(),
        tails,
        bounds,
        radius_eps,
        eps,
    })
}

pub fn tightness_check(
    ensemble: &PathEnsemble,
    triple: &SpectralTriple,
    theta: f64,
    p: f64,
    radii: &[f64],
    eps: f64,
    workers: Option<usize>,
) -> Result<TightnessReport> {
    let norms = holder_norms(ensemble, triple, theta, p, workers)?;
    tightness_from_norms(&norms, theta, p, radii, eps)
}

/// One radius covering the whole battery: the largest individual `R_ε`.
/// `None` when some member never reaches the level on its grid.
pub fn common_radius(reports: &[TightnessReport]) -> Option<f64> {
    reports
        .iter()
        .map(|r| r.radius_eps)
        .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrSample {
    pub z: Complex64,
    pub residual: f64,
    /// `residual / max(|∂_x φ|, 10⁻³⁰⁰)`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticityReport {
    pub h: f64,
    pub samples: Vec<CrSample>,
    pub max_residual: f64,
    pub max_relative: f64,
}

impl AnalyticityReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_residual <= threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrOptions {
    pub h: f64,
    /// Defaults to the final time.
    pub time_index: Option<usize>,
    pub paths: usize,
    pub workers: Option<usize>,
}

impl Default for CrOptions {
    fn default() -> Self {
        Self {
            h: 1e-3,
            time_index: None,
            paths: 1,
            workers: None,
        }
    }
}

/// Cauchy–Riemann residuals of `z ↦ Ê⟨u_z(t_k), η⟩` (bilinear pairing) with
/// the noise fixed across `z`.
pub fn analyticity_check(
    family: &dyn ComplexFamily,
    problem: &LinearProblem,
    z_grid: &[Complex64],
    eta: &[f64],
    options: &CrOptions,
) -> Result<AnalyticityReport> {
    let CrOptions {
        h,
        time_index,
        paths,
        workers,
    } = *options;
    if paths == 0 {
        return Err(Error::param("need at least one path"));
    }
    let n = problem.triple.len();
    if eta.len() != n {
        return Err(Error::shape("test vector has the wrong length"));
    }
    let steps = problem.noise.n_steps();
    let k = time_index.unwrap_or(steps);
    if k > steps {
        return Err(Error::param("time index beyond the grid"));
    }
    let phi = |z: Complex64| -> Result<Complex64> {
        let sols = solve_member(family, z, problem, paths, workers)?;
        let sum: Complex64 = sols
            .iter()
            .map(|s| {
                s[k * n..(k + 1) * n]
                    .iter()
                    .zip(eta)
                    .map(|(u, e)| u * e)
                    .sum::<Complex64>()
            })
            .sum();
        Ok(sum / paths as f64)
    };
    let mut samples = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let (residual, dx) = cauchy_riemann_residual(&phi, z, h)?;
        samples.push(CrSample {
            z,
            residual,
            relative: residual / dx.norm().max(1e-300),
        });
    }
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    let max_relative = samples.iter().map(|s| s.relative).fold(0.0, f64::max);
    Ok(AnalyticityReport {
        h,
        samples,
        max_residual,
        max_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{solve_linear, Forcing, NoiseForcing, SolverOptions};
    use crate::noise::NoiseModel;
    use crate::operator::DenseOperatorPair;
    use crate::stein::{ConstantFamily, SteinFamily};
    use std::sync::Arc;

    fn scalar(
        a: f64,
        b: f64,
        paths: usize,
        steps: usize,
        t: f64,
    ) -> (SpectralTriple, PathEnsemble) {
        let triple = SpectralTriple::from_eigenvalues(vec![1.0], 1).unwrap();
        let pair = DenseOperatorPair::scalar(a, b);
        let prob = LinearProblem::new(
            triple.clone(),
            Arc::new(pair),
            NoiseModel::uniform(1, steps, t, 21).unwrap(),
        )
        .with_u0(vec![1.0]);
        let e = solve_linear(
            &prob,
            &SolverOptions {
                paths,
                ..Default::default()
            },
        )
        .unwrap();
        (triple, e)
    }

    #[test]
    fn scalar_second_moment_matches_discrete_oracle() {
        let (a, b, n, t) = (1.0, 0.8, 50, 0.5);
        let (triple, e) = scalar(a, b, 4000, n, t);
        let r = moment_estimates(
            &e,
            &triple,
            &[MomentSpec {
                norm: TimeNorm::Lp {
                    p: 2.0,
                    space: SpaceTag::H,
                },
                p: 2.0,
            }],
            None,
        )
        .unwrap();
        let dt = t / n as f64;
        // E u_{i+1}² = E u_i² (1 + b²Δt)/(1 + aΔt)²; left-point time sum
        let rho = (1.0 + b * b * dt) / (1.0 + a * dt).powi(2);
        let oracle: f64 = (0..n).map(|i| dt * rho.powi(i as i32)).sum();
        let m = r.entries[0].moment;
        assert!((m.value - oracle).abs() < 3.0 * m.se, "{m:?} vs {oracle}");
        let ratio = r.entries[0].ratio.unwrap();
        assert!(
            (ratio.value - m.value.sqrt()).abs() < 1e-12,
            "u₀ = 1 and no f, g"
        );
    }

    #[test]
    fn deterministic_ratio_is_exact() {
        let (triple, e) = scalar(2.0, 0.0, 1, 20, 1.0);
        let spec = MomentSpec {
            norm: TimeNorm::Sup { space: SpaceTag::H },
            p: 2.0,
        };
        let r = moment_estimates(&e, &triple, &[spec], None).unwrap();
        assert_eq!(r.entries[0].moment.se, 0.0);
        assert_eq!(r.entries[0].ratio.unwrap().value, 1.0);
    }

    #[test]
    fn zero_data_gives_zero() {
        let triple = SpectralTriple::interval(4).unwrap();
        let prob = LinearProblem::new(
            triple.clone(),
            Arc::new(DenseOperatorPair::laplacian(&triple, 1)),
            NoiseModel::uniform(1, 10, 0.1, 0).unwrap(),
        );
        let e = solve_linear(
            &prob,
            &SolverOptions {
                paths: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let r = moment_estimates(&e, &triple, &bessel_specs(&[2.0, 2.5]), None).unwrap();
        assert_eq!(r.entries.len(), 10);
        for entry in &r.entries {
            assert_eq!(entry.moment.value, 0.0);
            assert!(entry.ratio.is_none());
        }
        let bad = MomentSpec {
            norm: TimeNorm::sup_h(),
            p: 0.5,
        };
        assert!(moment_estimates(&e, &triple, &[bad], None).is_err());
    }

    #[test]
    fn data_size_counts_forcing() {
        let triple = SpectralTriple::interval(3).unwrap();
        let prob = LinearProblem::new(
            triple.clone(),
            Arc::new(DenseOperatorPair::laplacian(&triple, 1)),
            NoiseModel::uniform(1, 10, 1.0, 0).unwrap(),
        )
        .with_f(Forcing::Constant(vec![1.0, 0.0, 0.0]))
        .with_g(NoiseForcing::Constant(vec![vec![0.0, 2.0, 0.0]]));
        let e = solve_linear(
            &prob,
            &SolverOptions {
                paths: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let r = moment_estimates(&e, &triple, &[MomentSpec::bessel(0.0, 2.0)], None).unwrap();
        let d = &r.entries[0].data;
        let f = triple
            .norm_slice(&[1.0, 0.0, 0.0], SpaceTag::Vdual)
            .unwrap();
        assert!((d.f - f).abs() < 1e-12 && (d.g - 2.0).abs() < 1e-12 && d.u0 == 0.0);
    }

    #[test]
    fn markov_dominates_tails() {
        let (triple, e) = scalar(1.0, 1.0, 500, 40, 1.0);
        let r = tightness_check(
            &e,
            &triple,
            0.4,
            4.0,
            &[0.5, 1.0, 2.0, 4.0, 8.0],
            0.05,
            None,
        )
        .unwrap();
        assert!(r.dominated());
        for (t, b) in r.tails.iter().zip(&r.bounds) {
            assert!(t.value <= b.value, "samplewise Markov");
        }
        assert!(tightness_check(&e, &triple, 0.2, 4.0, &[1.0], 0.05, None).is_err());
        let all = tightness_from_norms(&[1.0, 2.0], 0.4, 4.0, &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(all.radius_eps, Some(0.0));
        assert_eq!(common_radius(&[all.clone(), all]), Some(0.0));
    }

    #[test]
    fn analyticity_detects_conjugation() {
        let triple = SpectralTriple::interval(3).unwrap();
        let pair = DenseOperatorPair::laplacian(&triple, 1).shifted(1.0);
        let fam = SteinFamily::from_pair(&pair, &triple, 0.5, 1.5, 4.0).unwrap();
        let prob = LinearProblem::new(
            triple.clone(),
            Arc::new(pair.clone()),
            NoiseModel::uniform(1, 10, 0.1, 0).unwrap(),
        )
        .with_u0(vec![1.0, 0.5, 0.2]);
        let zs = [Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.4)];
        let eta = [1.0, 0.0, 0.0];
        let opts = CrOptions::default();
        let ok = analyticity_check(&fam, &prob, &zs, &eta, &opts).unwrap();
        assert!(ok.max_residual < 1e-6, "{ok:?}");
        let bad = analyticity_check(&fam.conjugated(), &prob, &zs, &eta, &opts).unwrap();
        assert!(bad.max_relative > 0.5, "{bad:?}");
        let constant = ConstantFamily {
            a: pair.a.clone(),
            b: pair.b.clone(),
            noise_modes: 1,
        };
        let c = analyticity_check(&constant, &prob, &zs, &eta, &opts).unwrap();
        assert_eq!(c.max_residual, 0.0);
        assert!(analyticity_check(&fam, &prob, &zs, &eta, &CrOptions { h: 1e-6, ..opts }).is_err());
    }
}
