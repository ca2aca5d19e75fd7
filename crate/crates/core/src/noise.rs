//! Truncated cylindrical Brownian motion with counter-based sampling.
//!
//! Every Gaussian variate is a pure function of `(seed, path, mode, step)`:
//! the ChaCha key is derived from `(seed, path, level)`, the stream id is
//! the noise mode, and the word position is the step. Two 64-bit words feed
//! one Box–Muller draw, so sampling any subset of paths in any order on any
//! number of workers reproduces the same numbers.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K × n` increments, mode-major (`mode * n + step`).
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub modes: usize,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl Increments {
    pub fn get(&self, mode: usize, step: usize) -> f64 {
        self.values[mode * self.steps + step]
    }

    pub fn mode(&self, mode: usize) -> &[f64] {
        &self.values[mode * self.steps..(mode + 1) * self.steps]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    modes: usize,
    /// Coarsest grid; refinements subdivide every step.
    base_grid: Vec<f64>,
    seed: u64,
    refinements: Vec<usize>,
}

impl NoiseModel {
    pub fn uniform(modes: usize, n_steps: usize, t_end: f64, seed: u64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::param("noise grid needs at least one step"));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::param(format!("final time {t_end} must be positive")));
        }
        let grid = (0..=n_steps)
            .map(|i| t_end * i as f64 / n_steps as f64)
            .collect();
        Self::with_grid(modes, grid, seed)
    }

    pub fn with_grid(modes: usize, grid: Vec<f64>, seed: u64) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::param("noise grid needs at least one step"));
        }
        if grid[0] != 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param(
                "noise grid must start at 0 and increase strictly",
            ));
        }
        Ok(Self {
            modes,
            base_grid: grid,
            seed,
            refinements: Vec::new(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Total subdivision factor relative to the base grid.
    pub fn refinement_factor(&self) -> usize {
        self.refinements.iter().product()
    }

    pub fn n_steps(&self) -> usize {
        (self.base_grid.len() - 1) * self.refinement_factor()
    }

    pub fn t_end(&self) -> f64 {
        *self.base_grid.last().unwrap()
    }

    /// The (refined) time grid `t_0 = 0 < … < t_n = T`.
    pub fn grid(&self) -> Vec<f64> {
        let f = self.refinement_factor();
        let mut out = Vec::with_capacity(self.n_steps() + 1);
        for w in self.base_grid.windows(2) {
            for j in 0..f {
                out.push(w[0] + (w[1] - w[0]) * j as f64 / f as f64);
            }
        }
        out.push(self.t_end());
        out
    }

    /// A model on a grid subdivided `factor` times whose increments sum to
    /// this model's increments over each coarse step.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::param("refinement factor must be at least 1"));
        }
        let mut out = self.clone();
        if factor > 1 {
            out.refinements.push(factor);
        }
        Ok(out)
    }

    /// Increments of path `path_index` on the (refined) grid.
    pub fn sample_increments(&self, path_index: u64) -> Increments {
        let coarse_steps = self.base_grid.len() - 1;
        let mut steps = coarse_steps;
        let mut values = Vec::with_capacity(self.modes * coarse_steps);
        for mode in 0..self.modes {
            let mut stream = GaussianStream::new(self.seed, path_index, 0, mode as u64);
            for i in 0..coarse_steps {
                let dt = self.base_grid[i + 1] - self.base_grid[i];
                values.push(dt.sqrt() * stream.at(i as u64));
            }
        }
        let mut grid = self.base_grid.clone();
        for (level, &factor) in self.refinements.iter().enumerate() {
            let fine_steps = steps * factor;
            let mut fine = Vec::with_capacity(self.modes * fine_steps);
            for mode in 0..self.modes {
                let mut stream =
                    GaussianStream::new(self.seed, path_index, level as u64 + 1, mode as u64);
                for i in 0..steps {
                    let coarse = values[mode * steps + i];
                    let sub_dt = (grid[i + 1] - grid[i]) / factor as f64;
                    let xi: Vec<f64> = (0..factor)
                        .map(|j| sub_dt.sqrt() * stream.at((i * factor + j) as u64))
                        .collect();
                    // Brownian bridge: shift the draws so they sum to the coarse increment
                    let shift = (xi.iter().sum::<f64>() - coarse) / factor as f64;
                    let mut partial = 0.0;
                    for (j, x) in xi.iter().enumerate() {
                        let d = if j + 1 == factor {
                            coarse - partial
                        } else {
                            x - shift
                        };
                        partial += d;
                        fine.push(d);
                    }
                }
            }
            grid = refine_grid(&grid, factor);
            steps = fine_steps;
            values = fine;
        }
        Increments {
            modes: self.modes,
            steps,
            values,
        }
    }

    /// Brownian motion values `W(t_i)` per mode, `K × (n+1)`.
    pub fn brownian_path(&self, path_index: u64) -> Vec<Vec<f64>> {
        let inc = self.sample_increments(path_index);
        (0..inc.modes)
            .map(|m| {
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(inc.steps + 1);
                out.push(0.0);
                for &d in inc.mode(m) {
                    acc += d;
                    out.push(acc);
                }
                out
            })
            .collect()
    }
}

fn refine_grid(grid: &[f64], factor: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((grid.len() - 1) * factor + 1);
    for w in grid.windows(2) {
        for j in 0..factor {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / factor as f64);
        }
    }
    out.push(*grid.last().unwrap());
    out
}

/// Refined increments for one path; see [`NoiseModel::refined`].
pub fn coupled_refinement(
    model: &NoiseModel,
    path_index: u64,
    factor: usize,
) -> Result<Increments> {
    Ok(model.refined(factor)?.sample_increments(path_index))
}

/// Keyed standard normal stream: `at(i)` depends only on the key and `i`.
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: u64, path: u64, level: u64, stream: u64) -> Self {
        let mut state = seed ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        let words = [
            splitmix(&mut state),
            splitmix(&mut state) ^ path,
            splitmix(&mut state) ^ level.rotate_left(32),
            splitmix(&mut state),
        ];
        let mut mix = words[1];
        for (chunk, w) in key.chunks_mut(8).zip(words) {
            mix = splitmix(&mut mix.wrapping_add(w));
            chunk.copy_from_slice(&mix.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn at(&mut self, index: u64) -> f64 {
        // two u64 = four 32-bit words per variate
        self.rng.set_word_pos(index as u128 * 4);
        let u1 = unit(self.rng.next_u64());
        let u2 = unit(self.rng.next_u64());
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Sequential normal draws for test fixtures and random operator families.
pub struct NormalSampler {
    stream: GaussianStream,
    next: u64,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            stream: GaussianStream::new(seed, u64::MAX, u64::MAX, 0),
            next: 0,
        }
    }

    pub fn sample(&mut self) -> f64 {
        let z = self.stream.at(self.next);
        self.next += 1;
        z
    }

    pub fn uniform(&mut self) -> f64 {
        // Φ(z) is uniform on (0, 1); cheaper to reuse a raw word
        self.stream.rng.set_word_pos(self.next as u128 * 4);
        self.next += 1;
        unit(self.stream.rng.next_u64())
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample()).collect()
    }
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_path_is_identical() {
        let m = NoiseModel::uniform(3, 50, 1.0, 11).unwrap();
        assert_eq!(m.sample_increments(4), m.sample_increments(4));
        assert_ne!(m.sample_increments(4), m.sample_increments(5));
    }

    #[test]
    fn stream_is_random_access() {
        let mut a = GaussianStream::new(1, 2, 0, 3);
        let mut b = GaussianStream::new(1, 2, 0, 3);
        let forward: Vec<f64> = (0..10).map(|i| a.at(i)).collect();
        let backward: Vec<f64> = (0..10).rev().map(|i| b.at(i)).collect();
        let mut rev = backward;
        rev.reverse();
        assert_eq!(forward, rev);
    }

    #[test]
    fn increment_variance_matches_step() {
        let m = NoiseModel::uniform(1, 4, 0.2, 99).unwrap();
        let n = 100_000u64;
        let draws: Vec<f64> = (0..n).map(|p| m.sample_increments(p).get(0, 2)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let dt = 0.05;
        // SE of the sample variance of a Gaussian: dt √(2/(n-1))
        let se = dt * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - dt).abs() < 3.0 * se, "var {var} vs {dt} (se {se})");
        assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt());
    }

    #[test]
    fn modes_are_uncorrelated() {
        let m = NoiseModel::uniform(2, 1, 1.0, 5).unwrap();
        let n = 100_000u64;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|p| {
                let inc = m.sample_increments(p);
                (inc.get(0, 0), inc.get(1, 0))
            })
            .collect();
        let corr = pairs.iter().map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn refinement_sums_to_coarse() {
        let m = NoiseModel::uniform(2, 10, 1.0, 3).unwrap();
        let coarse = m.sample_increments(7);
        let fine = coupled_refinement(&m, 7, 4).unwrap();
        assert_eq!(fine.steps, 40);
        for mode in 0..2 {
            for i in 0..10 {
                let s: f64 = fine.mode(mode)[i * 4..(i + 1) * 4].iter().sum();
                assert!((s - coarse.get(mode, i)).abs() < 1e-14);
            }
        }
        let twice = m.refined(2).unwrap().refined(3).unwrap();
        let f6 = twice.sample_increments(7);
        assert_eq!(f6.steps, 60);
        for i in 0..10 {
            let s: f64 = f6.mode(1)[i * 6..(i + 1) * 6].iter().sum();
            assert!((s - coarse.get(1, i)).abs() < 1e-13);
        }
    }

    #[test]
    fn refined_variance() {
        let m = NoiseModel::uniform(1, 1, 1.0, 8).unwrap();
        let n = 50_000u64;
        let draws: Vec<f64> = (0..n)
            .map(|p| coupled_refinement(&m, p, 4).unwrap().get(0, 1))
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let se = 0.25 * (2.0 / n as f64).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn factor_one_is_identity() {
        let m = NoiseModel::uniform(2, 5, 1.0, 3).unwrap();
        assert_eq!(
            coupled_refinement(&m, 1, 1).unwrap(),
            m.sample_increments(1)
        );
        assert!(m.refined(0).is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(NoiseModel::uniform(1, 0, 1.0, 0).is_err());
        assert!(NoiseModel::with_grid(1, vec![0.0], 0).is_err());
    }
}
