//! Pathwise convergence as the mollification level `m` or the truncation
//! radius `R` grows, with the noise held fixed.

use serde::{Deserialize, Serialize};

use super::solver::{solve_ql, QlOptions, QlProblem};
use crate::error::{Error, Result};
use crate::linear::PathEnsemble;
use crate::spectral::{SpaceTag, SpectralTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    Mollification,
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDistance {
    pub from: f64,
    pub to: f64,
    /// Ensemble mean of `sup_t ‖u_from − u_to‖_H`.
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub kind: LimitKind,
    pub levels: Vec<f64>,
    pub distances: Vec<LevelDistance>,
}

impl ConvergenceStudy {
    /// Successive distances are non-increasing.
    pub fn is_monotone(&self) -> bool {
        self.distances.windows(2).all(|w| w[1].mean <= w[0].mean)
    }

    /// Successive distance ratios.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .map(|w| w[1].mean / w[0].mean)
            .collect()
    }
}

/// Mean and max over paths of `sup_t ‖u − v‖_H`.
pub fn sup_h_distance(
    triple: &SpectralTriple,
    u: &PathEnsemble,
    v: &PathEnsemble,
) -> Result<(f64, f64)> {
    if u.len() != v.len() || u.grid != v.grid || u.state_len() != v.state_len() {
        return Err(Error::shape("ensembles are not comparable"));
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for p in 0..u.len() {
        let mut worst = 0.0f64;
        for i in 0..u.n_times() {
            let diff: Vec<f64> = u
                .state(p, i)
                .iter()
                .zip(v.state(p, i))
                .map(|(a, b)| a - b)
                .collect();
            worst = worst.max(triple.norm_slice(&diff, SpaceTag::H)?);
        }
        sum += worst;
        max = max.max(worst);
    }
    Ok((sum / u.len() as f64, max))
}

pub fn convergence_study(
    problem: &QlProblem,
    options: &QlOptions,
    kind: LimitKind,
    levels: &[f64],
) -> Result<ConvergenceStudy> {
    if levels.len() < 2 {
        return Err(Error::param("need at least two levels"));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("levels must be strictly increasing"));
    }
    let mut ensembles = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut opts = options.clone();
        match kind {
            LimitKind::Mollification => opts.m = Some(level),
            LimitKind::Truncation => opts.r_trunc = Some(level),
        }
        ensembles.push(solve_ql(problem, &opts)?);
    }
    let mut distances = Vec::with_capacity(levels.len() - 1);
    for j in 0..levels.len() - 1 {
        let (mean, max) = sup_h_distance(&problem.triple, &ensembles[j], &ensembles[j + 1])?;
        distances.push(LevelDistance {
            from: levels[j],
            to: levels[j + 1],
            mean,
            max,
        });
    }
    Ok(ConvergenceStudy {
        kind,
        levels: levels.to_vec(),
        distances,
    })
}
