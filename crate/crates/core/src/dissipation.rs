//! `C²` approximations `ψ_m` of `|ξ|^q` and the energy statistics built on
//! them.
//!
//! ```text
//! ψ_m(ξ) = |ξ|^q                                                     |ξ| ≤ m
//!        = m^{q−2} [q(q−1)/2 ξ² − q(q−2) m|ξ| + (q−1)(q−2)/2 m²]      |ξ| > m
//! ```
//!
//! The outer branch has constant second derivative `q(q−1)m^{q−2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::PathEnsemble;
use crate::parallel::map_indexed;
use crate::quasilinear::{Collocation, QlCoefficients, QlSample};
use crate::spectral::SpectralTriple;
use crate::stats::{jackknife, mean, mean_estimate, Estimate, DEFAULT_BATCHES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiM {
    q: f64,
    m: f64,
}

impl PsiM {
    pub fn new(q: f64, m: f64) -> Result<Self> {
        if !(q > 2.0 && q.is_finite()) {
            return Err(Error::param(format!("ψ needs q > 2, got {q}")));
        }
        if !(m >= 1.0 && m.is_finite()) {
            return Err(Error::param(format!("ψ needs m ≥ 1, got {m}")));
        }
        Ok(Self { q, m })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    fn inner(&self, a: f64) -> [f64; 3] {
        let q = self.q;
        [
            a.powf(q),
            q * a.powf(q - 1.0),
            q * (q - 1.0) * a.powf(q - 2.0),
        ]
    }

    fn outer(&self, a: f64) -> [f64; 3] {
        let (q, m) = (self.q, self.m);
        let s = m.powf(q - 2.0);
        [
            s * (0.5 * q * (q - 1.0) * a * a - q * (q - 2.0) * m * a
                + 0.5 * (q - 1.0) * (q - 2.0) * m * m),
            s * (q * (q - 1.0) * a - q * (q - 2.0) * m),
            s * q * (q - 1.0),
        ]
    }

    /// `[ψ, ψ′, ψ″]` at `|ξ|`; `ψ′` is odd.
    fn branches(&self, xi: f64) -> [f64; 3] {
        let a = xi.abs();
        if a <= self.m {
            self.inner(a)
        } else {
            self.outer(a)
        }
    }

    pub fn psi(&self, xi: f64) -> f64 {
        self.branches(xi)[0]
    }

    pub fn d1(&self, xi: f64) -> f64 {
        let d = self.branches(xi)[1];
        if xi < 0.0 {
            -d
        } else {
            d
        }
    }

    pub fn d2(&self, xi: f64) -> f64 {
        self.branches(xi)[2]
    }

    /// `sup ψ″ = q(q−1)m^{q−2}`.
    pub fn d2_bound(&self) -> f64 {
        self.q * (self.q - 1.0) * self.m.powf(self.q - 2.0)
    }

    /// Jumps of `(ψ, ψ′, ψ″)` across `|ξ| = m`, relative to `max(1, |value|)`.
    pub fn matching_jumps(&self) -> [f64; 3] {
        let (i, o) = (self.inner(self.m), self.outer(self.m));
        [0, 1, 2].map(|k| (i[k] - o[k]).abs() / i[k].abs().max(1.0))
    }
}

/// `[−10m, 10m]` with step `10⁻²`.
pub fn default_psi_grid(m: f64) -> Vec<f64> {
    let n = (2000.0 * m).round() as i64;
    (0..=n).map(|j| (j - n / 2) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Smallest `(rhs − lhs) / max(1, |lhs|, |rhs|)` over the grid.
    pub min_slack: f64,
    pub worst_xi: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReport {
    pub q: f64,
    pub m: f64,
    pub grid_points: usize,
    pub inequalities: Vec<InequalityCheck>,
    pub matching: [f64; 3],
    /// `max |ψ″| ≤ q(q−1)m^{q−2}` on the grid.
    pub d2_bounded: bool,
    pub tol: f64,
}

impl PsiReport {
    pub fn passes(&self, slack_tol: f64, match_tol: f64) -> bool {
        self.d2_bounded
            && self.inequalities.iter().all(|c| c.min_slack >= -slack_tol)
            && self.matching.iter().all(|&j| j < match_tol)
    }
}

fn scaled(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / lhs.abs().max(rhs.abs()).max(1.0)
}

/// The five inequalities plus `C²` matching and the `ψ″` bound.
/// `tol` only decides what counts as a violation.
pub fn verify_psi_properties(p: &PsiM, grid: &[f64], tol: f64) -> Result<PsiReport> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("ξ grid must be finite"));
    }
    let qq = p.q * (p.q - 1.0);
    let names = [
        "|ψ′(ξ)| ≤ |ξ|ψ″(ξ)",
        "ψ′(ξ)/ξ ≥ 0",
        "ψ″(ξ) ≤ q(q−1)(1 + ψ(ξ))",
        "ξ²ψ″(ξ) ≤ q(q−1)ψ(ξ)",
        "ψ″ non-decreasing in |ξ|",
    ];
    let mut checks: Vec<InequalityCheck> = names
        .iter()
        .map(|n| InequalityCheck {
            name: n.to_string(),
            min_slack: f64::INFINITY,
            worst_xi: f64::NAN,
            violations: 0,
        })
        .collect();
    let mut record = |k: usize, xi: f64, slack: f64| {
        let c = &mut checks[k];
        if slack < c.min_slack {
            c.min_slack = slack;
            c.worst_xi = xi;
        }
        if slack < -tol {
            c.violations += 1;
        }
    };
    let mut d2_bounded = true;
    for &xi in grid {
        let (v, d1, d2) = (p.psi(xi), p.d1(xi), p.d2(xi));
        record(0, xi, scaled(d1.abs(), xi.abs() * d2));
        if xi != 0.0 {
            record(1, xi, d1 / xi);
        }
        record(2, xi, scaled(d2, qq * (1.0 + v)));
        record(3, xi, scaled(xi * xi * d2, qq * v));
        d2_bounded &= d2.abs() <= p.d2_bound() * (1.0 + 1e-14);
    }
    let mut sorted: Vec<f64> = grid.iter().map(|x| x.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        record(4, w[1], scaled(p.d2(w[0]), p.d2(w[1])));
    }
    Ok(PsiReport {
        q: p.q,
        m: p.m,
        grid_points: grid.len(),
        inequalities: checks,
        matching: p.matching_jumps(),
        d2_bounded,
        tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiConvergence {
    pub xi: f64,
    pub m: Vec<f64>,
    /// `|ψ_m(ξ) − |ξ|^q|`.
    pub value_error: Vec<f64>,
    /// `|ψ″_m(ξ)/(q(q−1)) − |ξ|^{q−2}|`.
    pub d2_error: Vec<f64>,
}

impl PsiConvergence {
    /// Errors vanish once `m ≥ |ξ|`.
    pub fn settles(&self) -> bool {
        self.m
            .iter()
            .zip(self.value_error.iter().zip(&self.d2_error))
            .all(|(&m, (&e, &d))| m < self.xi.abs() || (e == 0.0 && d == 0.0))
    }
}

pub fn psi_convergence(q: f64, ms: &[f64], xi: f64) -> Result<PsiConvergence> {
    let mut value_error = Vec::with_capacity(ms.len());
    let mut d2_error = Vec::with_capacity(ms.len());
    for &m in ms {
        let p = PsiM::new(q, m)?;
        value_error.push((p.psi(xi) - xi.abs().powf(q)).abs());
        d2_error.push((p.d2(xi) / (q * (q - 1.0)) - xi.abs().powf(q - 2.0)).abs());
    }
    Ok(PsiConvergence {
        xi,
        m: ms.to_vec(),
        value_error,
        d2_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub q: f64,
    pub m: f64,
    /// Smallest `K ≥ 0` with `Σ_α ψ′(v^α)φ^α(v) ≤ K(1 + Σ_β ψ(v^β))` on the samples.
    pub k: f64,
    /// Largest signed ratio `LHS / (1 + RHS)`.
    pub sup_ratio: f64,
    pub worst_sample: Option<usize>,
}

pub fn verify_dissipativity(
    coeffs: &QlCoefficients,
    p: &PsiM,
    samples: &[QlSample],
) -> DissipativityReport {
    let mut sup_ratio = f64::NEG_INFINITY;
    let mut worst = None;
    if coeffs.has_phi() {
        for (s, sample) in samples.iter().enumerate() {
            let point = sample.point();
            let lhs: f64 = (0..coeffs.components())
                .map(|a| p.d1(sample.y[a]) * coeffs.eval_phi(&point, a))
                .sum();
            let rhs: f64 = sample.y.iter().map(|&v| p.psi(v)).sum();
            let r = lhs / (1.0 + rhs);
            if r > sup_ratio {
                sup_ratio = r;
                worst = Some(s);
            }
        }
    } else {
        sup_ratio = 0.0;
    }
    DissipativityReport {
        q: p.q,
        m: p.m,
        k: sup_ratio.max(0.0),
        sup_ratio,
        worst_sample: worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub q: f64,
    pub m: f64,
    pub paths: usize,
    /// `Ê Σ_i Δt Σ_α ∫ ψ_m(v^α)`.
    pub psi_term: Estimate,
    /// `Ê Σ_i Δt Σ_α ∫ ψ″_m(v^α)|∇v^α|²`.
    pub gradient_term: Estimate,
    /// `Ê Σ_α ∫ |u₀^α|^q`.
    pub initial_lq: Estimate,
    /// `(psi_term + gradient_term) / (1 + initial_lq)`.
    pub ratio: Estimate,
}

#[derive(Debug, Clone, Copy)]
struct PathEnergy {
    psi: f64,
    grad: f64,
    init: f64,
}

/// Per-path `(Σ_α ∫ψ(v^α), Σ_α ∫ψ″(v^α)|∇v^α|²)` of one state.
fn state_energy(col: &Collocation, p: &PsiM, state: &[f64], components: usize) -> (f64, f64) {
    let dim = col.dim();
    let mut psi = 0.0;
    let mut grad = 0.0;
    for alpha in 0..components {
        let c = &state[alpha * dim..(alpha + 1) * dim];
        let v = col.values(c);
        let mut g2 = vec![0.0; col.len()];
        for i in 0..col.spatial_dim() {
            for (acc, d) in g2.iter_mut().zip(col.gradient(c, i).iter()) {
                *acc += d * d;
            }
        }
        psi += col.integrate(v.iter().map(|&x| p.psi(x)));
        grad += col.integrate(v.iter().zip(&g2).map(|(&x, &g)| p.d2(x) * g));
    }
    (psi, grad)
}

/// Discrete energy statistics of an ensemble on the collocation grid.
/// Time sums use the right endpoints `u_{i+1}` of each step.
pub fn energy_bootstrap(
    ensemble: &PathEnsemble,
    triple: &SpectralTriple,
    p: &PsiM,
    grid_points: Option<usize>,
    workers: Option<usize>,
) -> Result<BootstrapReport> {
    if ensemble.state_len() != triple.len() || ensemble.components != triple.components() {
        return Err(Error::shape("ensemble does not match the spectral triple"));
    }
    if ensemble.is_empty() {
        return Err(Error::param("empty ensemble"));
    }
    let col = Collocation::new(triple, grid_points)?;
    let grid = &ensemble.grid;
    let q = p.q;
    let per_path: Vec<PathEnergy> = map_indexed(ensemble.len(), workers, |path| {
        let mut acc = PathEnergy {
            psi: 0.0,
            grad: 0.0,
            init: 0.0,
        };
        for i in 0..grid.len() - 1 {
            let dt = grid[i + 1] - grid[i];
            let (a, b) = state_energy(&col, p, ensemble.state(path, i + 1), ensemble.components);
            acc.psi += dt * a;
            acc.grad += dt * b;
        }
        let dim = col.dim();
        let u0 = ensemble.state(path, 0);
        acc.init = (0..ensemble.components)
            .map(|alpha| {
                col.integrate(
                    col.values(&u0[alpha * dim..(alpha + 1) * dim])
                        .iter()
                        .map(|x| x.abs().powf(q)),
                )
            })
            .sum();
        acc
    });
    let field = |f: fn(&PathEnergy) -> f64| per_path.iter().map(f).collect::<Vec<f64>>();
    let ratio = jackknife(&per_path, DEFAULT_BATCHES, |s: &[PathEnergy]| {
        let top = mean(&s.iter().map(|e| e.psi + e.grad).collect::<Vec<_>>());
        top / (1.0 + mean(&s.iter().map(|e| e.init).collect::<Vec<_>>()))
    });
    Ok(BootstrapReport {
        q,
        m: p.m,
        paths: per_path.len(),
        psi_term: mean_estimate(&field(|e| e.psi)),
        gradient_term: mean_estimate(&field(|e| e.grad)),
        initial_lq: mean_estimate(&field(|e| e.init)),
        ratio,
    })
}

/// `(Σ_α ∫|u^α(t_i)|^q)^{1/q}` along one path.
pub fn lq_norm_series(
    ensemble: &PathEnsemble,
    triple: &SpectralTriple,
    q: f64,
    grid_points: Option<usize>,
    path: usize,
) -> Result<Vec<f64>> {
    if path >= ensemble.len() || ensemble.state_len() != triple.len() {
        return Err(Error::shape("path index or state length mismatch"));
    }
    if !(q >= 1.0) {
        return Err(Error::param("need q ≥ 1"));
    }
    let col = Collocation::new(triple, grid_points)?;
    let dim = col.dim();
    Ok((0..ensemble.n_times())
        .map(|i| {
            let s = ensemble.state(path, i);
            (0..ensemble.components)
                .map(|a| {
                    col.integrate(
                        col.values(&s[a * dim..(a + 1) * dim])
                            .iter()
                            .map(|x| x.abs().powf(q)),
                    )
                })
                .sum::<f64>()
                .powf(1.0 / q)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::quasilinear::{random_samples, solve_ql, QlOptions, QlProblem};

    #[test]
    fn outer_branch_value() {
        let p = PsiM::new(3.0, 1.0).unwrap();
        assert!((p.psi(2.0) - 7.0).abs() < 1e-14);
        assert!((p.psi(-2.0) - 7.0).abs() < 1e-14);
        assert_eq!(PsiM::new(4.0, 2.0).unwrap().psi(1.0), 1.0);
        assert_eq!(p.psi(0.0), 0.0);
        assert_eq!(p.d1(0.0), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for (q, m) in [(2.5, 1.0), (3.0, 2.0), (4.0, 5.0)] {
            let p = PsiM::new(q, m).unwrap();
            for xi in [-7.3, -2.2, -0.4, 0.3, 1.7, 4.9, 12.0] {
                let h = 1e-5;
                let d1 = (p.psi(xi + h) - p.psi(xi - h)) / (2.0 * h);
                let d2 = (p.d1(xi + h) - p.d1(xi - h)) / (2.0 * h);
                assert!(
                    (d1 - p.d1(xi)).abs() < 1e-6 * (1.0 + d1.abs()),
                    "ψ′ at {xi}"
                );
                assert!(
                    (d2 - p.d2(xi)).abs() < 1e-6 * (1.0 + d2.abs()),
                    "ψ″ at {xi}"
                );
            }
        }
    }

    #[test]
    fn properties_on_default_grid() {
        let p = PsiM::new(3.0, 1.0).unwrap();
        let r = verify_psi_properties(&p, &default_psi_grid(1.0), 1e-10).unwrap();
        assert_eq!(r.grid_points, 2001);
        assert!(r.passes(1e-10, 1e-12), "{r:?}");
        assert!(r.inequalities.iter().all(|c| c.violations == 0));
    }

    #[test]
    fn convergence_settles_once_m_covers_xi() {
        let c = psi_convergence(3.0, &[1.0, 2.0, 4.0, 8.0], 2.0).unwrap();
        assert!(c.value_error[0] > 0.0);
        assert_eq!(c.value_error[1], 0.0);
        assert!(c.settles());
    }

    #[test]
    fn parameter_guards() {
        assert!(PsiM::new(2.0, 1.0).is_err());
        assert!(PsiM::new(3.0, 0.5).is_err());
        assert!(verify_psi_properties(&PsiM::new(3.0, 1.0).unwrap(), &[f64::NAN], 0.0).is_err());
    }

    #[test]
    fn dissipativity_margins() {
        let zero = QlCoefficients::heat(1, 1, 0).unwrap();
        let cubic = QlCoefficients::heat(1, 1, 0)
            .unwrap()
            .with_cubic_reaction(1.0);
        let linear = QlCoefficients::heat(1, 1, 0)
            .unwrap()
            .with_phi(true, |p, _| p.y[0]);
        let samples = random_samples(&cubic, 2000, 1.0, 20.0, 4);
        let mut ks = Vec::new();
        for m in [1.0, 2.0, 4.0, 8.0] {
            let p = PsiM::new(4.0, m).unwrap();
            assert_eq!(verify_dissipativity(&zero, &p, &samples).k, 0.0);
            assert_eq!(verify_dissipativity(&cubic, &p, &samples).k, 0.0);
            ks.push(verify_dissipativity(&linear, &p, &samples).k);
        }
        // ψ′(ξ)ξ ≤ qψ(ξ) on both branches
        assert!(ks.iter().all(|&k| k > 0.0 && k <= 4.0 + 1e-12), "{ks:?}");
    }

    #[test]
    fn heat_lq_norm_decays() {
        let triple = SpectralTriple::interval(16).unwrap();
        let coeffs = QlCoefficients::heat(1, 1, 0).unwrap();
        let mut u0 = vec![0.0; 16];
        u0[0] = 1.0;
        u0[1] = 0.6;
        u0[4] = -0.3;
        let prob = QlProblem::new(
            triple.clone(),
            coeffs,
            u0,
            NoiseModel::uniform(0, 100, 0.1, 0).unwrap(),
        );
        let e = solve_ql(
            &prob,
            &QlOptions {
                paths: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let s = lq_norm_series(&e, &triple, 4.0, None, 0).unwrap();
        for w in s.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-3), "{} -> {}", w[0], w[1]);
        }
        assert!(s.last().unwrap() < &(0.5 * s[0]));
    }

    #[test]
    fn zero_solution_bootstrap() {
        let triple = SpectralTriple::interval(4).unwrap();
        let prob = QlProblem::new(
            triple.clone(),
            QlCoefficients::heat(1, 1, 1)
                .unwrap()
                .with_constant_gradient_noise(0.5),
            vec![0.0; 4],
            NoiseModel::uniform(1, 10, 0.1, 2).unwrap(),
        );
        let e = solve_ql(
            &prob,
            &QlOptions {
                paths: 12,
                ..Default::default()
            },
        )
        .unwrap();
        let r = energy_bootstrap(&e, &triple, &PsiM::new(4.0, 1.0).unwrap(), None, None).unwrap();
        assert_eq!(r.psi_term.value, 0.0);
        assert_eq!(r.gradient_term.value, 0.0);
        assert_eq!(r.ratio.value, 0.0);
        let wrong = SpectralTriple::interval(5).unwrap();
        assert!(energy_bootstrap(&e, &wrong, &PsiM::new(4.0, 1.0).unwrap(), None, None).is_err());
    }

    #[test]
    fn bootstrap_gradient_term_matches_closed_form() {
        // one sine mode, ψ″ evaluated at small amplitude is exactly q(q−1)|v|^{q−2}
        let triple = SpectralTriple::interval(1).unwrap();
        let prob = QlProblem::new(
            triple.clone(),
            QlCoefficients::heat(1, 1, 0).unwrap(),
            vec![0.5],
            NoiseModel::uniform(0, 1, 0.1, 0).unwrap(),
        );
        let e = solve_ql(
            &prob,
            &QlOptions {
                paths: 1,
                grid_points: Some(64),
                ..Default::default()
            },
        )
        .unwrap();
        let c = e.state(0, 1)[0];
        let r =
            energy_bootstrap(&e, &triple, &PsiM::new(4.0, 10.0).unwrap(), Some(64), None).unwrap();
        // ∫ (c√2 sin πx)^4 = 3c⁴/2 ; ∫ 12 (c√2 sin)^2 (c√2 π cos)^2 = 12 c⁴ π² ∫ 4 sin² cos² = 12 c⁴ π² / 2
        let psi = 0.1 * 1.5 * c.powi(4);
        let grad = 0.1 * 6.0 * c.powi(4) * std::f64::consts::PI.powi(2);
        assert!((r.psi_term.value - psi).abs() < 1e-12);
        assert!((r.gradient_term.value - grad).abs() < 1e-10);
        let init = 1.5 * 0.5f64.powi(4);
        assert!((r.initial_lq.value - init).abs() < 1e-12);
    }
}
