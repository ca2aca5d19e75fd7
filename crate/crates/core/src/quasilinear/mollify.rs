//! Mollification of the coefficients in the state variable.
//!
//! `ₘa = ρ_m ∗ a` in `y ∈ R^N` and `ₘb = ζ_m ∗ b` in `y^α`, where `ζ_m` is
//! the bump `ζ(s) ∝ exp(−1/(1 − s²))` rescaled to `(−1/m, 1/m)` and `ρ_m`
//! its `N`-fold product. The integrals are a midpoint rule with positive
//! weights summing to one, so every mollified value is a convex
//! combination of base values: bounds and the coercivity margin carry over
//! exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::coefficients::{Point, QlCoefficients};
use crate::error::{Error, Result};

pub const DEFAULT_KERNEL_NODES: usize = 16;
pub const DEFAULT_Y_WINDOW: f64 = 1.0e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Kernel {
    /// Midpoint nodes on `(−1, 1)`.
    pub fn bump(count: usize) -> Result<Self> {
        if count < 4 {
            return Err(Error::MollifierGuard(format!(
                "{count} kernel nodes are too few to resolve the bump (need ≥ 4)"
            )));
        }
        let nodes: Vec<f64> = (0..count)
            .map(|j| -1.0 + (2 * j + 1) as f64 / count as f64)
            .collect();
        let raw: Vec<f64> = nodes.iter().map(|s| (-1.0 / (1.0 - s * s)).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(Self {
            nodes,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone)]
pub struct MollifiedCoefficients {
    pub base: QlCoefficients,
    pub m: f64,
    pub kernel: Kernel,
    /// Half-width `Y` of the `y`-window `[−Y, Y]` on which the fields are trusted.
    pub y_window: f64,
}

pub fn mollify(base: &QlCoefficients, m: f64) -> Result<MollifiedCoefficients> {
    MollifiedCoefficients::new(base, m, DEFAULT_KERNEL_NODES, DEFAULT_Y_WINDOW)
}

impl MollifiedCoefficients {
    pub fn new(base: &QlCoefficients, m: f64, kernel_nodes: usize, y_window: f64) -> Result<Self> {
        if !(m >= 1.0 && m.is_finite()) {
            return Err(Error::param(format!(
                "mollification level m = {m} must be ≥ 1"
            )));
        }
        let support = 1.0 / m;
        if !(y_window > support) {
            return Err(Error::MollifierGuard(format!(
                "y-window half-width {y_window} does not exceed the kernel support {support}"
            )));
        }
        Ok(Self {
            base: base.clone(),
            m,
            kernel: Kernel::bump(kernel_nodes)?,
            y_window,
        })
    }

    pub fn support(&self) -> f64 {
        1.0 / self.m
    }

    /// Fires when states of size `y_max` would read fields outside the window.
    pub fn check_window(&self, y_max: f64) -> Result<()> {
        if y_max + self.support() > self.y_window {
            return Err(Error::MollifierGuard(format!(
                "state magnitude {y_max} plus kernel support {} exceeds the y-window {}",
                self.support(),
                self.y_window
            )));
        }
        Ok(())
    }

    /// The mollified fields `(ₘa, ₘb)` with every other field unchanged.
    pub fn coefficients(&self) -> QlCoefficients {
        let mut out = self.base.clone();
        let shifts: Arc<Vec<f64>> =
            Arc::new(self.kernel.nodes().iter().map(|s| s / self.m).collect());
        let weights: Arc<Vec<f64>> = Arc::new(self.kernel.weights().to_vec());
        let depends = self.base.depends();
        let n = self.base.components();
        if depends.a {
            let a = self.base.a.clone();
            let (shifts, weights) = (shifts.clone(), weights.clone());
            out = out.with_a(true, move |p, alpha, res| {
                res.fill(0.0);
                let mut tmp = vec![0.0; res.len()];
                let mut y = vec![0.0; n];
                let mut idx = vec![0usize; n];
                let q = shifts.len();
                loop {
                    let mut w = 1.0;
                    for c in 0..n {
                        y[c] = p.y[c] - shifts[idx[c]];
                        w *= weights[idx[c]];
                    }
                    a(
                        &Point {
                            t: p.t,
                            x: p.x,
                            y: &y,
                        },
                        alpha,
                        &mut tmp,
                    );
                    for (r, v) in res.iter_mut().zip(&tmp) {
                        *r += w * v;
                    }
                    // odometer over the N-fold product grid
                    let mut c = 0;
                    while c < n {
                        idx[c] += 1;
                        if idx[c] < q {
                            break;
                        }
                        idx[c] = 0;
                        c += 1;
                    }
                    if c == n {
                        break;
                    }
                }
            });
        }
        if depends.b {
            if let Some(b) = self.base.b.clone() {
                out = out.with_b(true, move |t, x, ya, alpha, res| {
                    res.fill(0.0);
                    let mut tmp = vec![0.0; res.len()];
                    for (s, w) in shifts.iter().zip(weights.iter()) {
                        b(t, x, ya - s, alpha, &mut tmp);
                        for (r, v) in res.iter_mut().zip(&tmp) {
                            *r += w * v;
                        }
                    }
                });
            }
        }
        out.with_name(format!("{} (m = {})", self.base.name, self.m))
    }
}
