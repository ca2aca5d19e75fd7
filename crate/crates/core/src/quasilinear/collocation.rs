//! Midpoint collocation grid on `(0,1)^d` with the sine basis tabulated
//! on it.
//!
//! With `G ≥ dim + 1` points per direction the midpoint rule integrates
//! `cos(jπx)` exactly for `0 < j < 2G`, so the mass matrix is the identity
//! and the stiffness matrix of `a = I` is `diag(λ_k)` up to rounding.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use super::mollify::Kernel;
use crate::error::{Error, Result};
use crate::spectral::{DomainKind, SpectralTriple};

#[derive(Debug, Clone)]
pub struct Collocation {
    d: usize,
    per_dir: usize,
    points: Vec<[f64; 2]>,
    weight: f64,
    /// `e_k(x_g)`, one row per grid point.
    pub basis: DMatrix<f64>,
    /// `∂_i e_k(x_g)` for each direction `i`.
    pub grad: Vec<DMatrix<f64>>,
    wave_numbers: Vec<[usize; 2]>,
}

fn sine(k: usize, x: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * x).sin()
}

fn dsine(k: usize, x: f64) -> f64 {
    SQRT_2 * k as f64 * PI * (k as f64 * PI * x).cos()
}

impl Collocation {
    /// `per_dir` points per direction; `None` means four times the largest
    /// wave number.
    pub fn new(triple: &SpectralTriple, per_dir: Option<usize>) -> Result<Self> {
        let d = match triple.domain() {
            DomainKind::Interval => 1,
            DomainKind::Square => 2,
            DomainKind::Custom => {
                return Err(Error::param(
                    "collocation needs an interval or square domain",
                ))
            }
        };
        let waves = triple.wave_numbers().to_vec();
        let kmax = waves
            .iter()
            .flat_map(|w| w.iter().copied())
            .max()
            .unwrap_or(1);
        let per_dir = per_dir.unwrap_or(4 * kmax);
        if per_dir <= kmax {
            return Err(Error::param(format!(
                "{per_dir} collocation points per direction cannot resolve wave number {kmax}"
            )));
        }
        let nodes: Vec<f64> = (0..per_dir)
            .map(|g| (g as f64 + 0.5) / per_dir as f64)
            .collect();
        let points: Vec<[f64; 2]> = if d == 1 {
            nodes.iter().map(|&x| [x, 0.0]).collect()
        } else {
            nodes
                .iter()
                .flat_map(|&x| nodes.iter().map(move |&y| [x, y]))
                .collect()
        };
        let np = points.len();
        let dim = waves.len();
        let mut basis = DMatrix::zeros(np, dim);
        let mut grad = vec![DMatrix::zeros(np, dim); d];
        for (g, p) in points.iter().enumerate() {
            for (k, w) in waves.iter().enumerate() {
                if d == 1 {
                    basis[(g, k)] = sine(w[0], p[0]);
                    grad[0][(g, k)] = dsine(w[0], p[0]);
                } else {
                    let (sx, sy) = (sine(w[0], p[0]), sine(w[1], p[1]));
                    basis[(g, k)] = sx * sy;
                    grad[0][(g, k)] = dsine(w[0], p[0]) * sy;
                    grad[1][(g, k)] = sx * dsine(w[1], p[1]);
                }
            }
        }
        Ok(Self {
            d,
            per_dir,
            points,
            weight: (per_dir as f64).powi(-(d as i32)),
            basis,
            grad,
            wave_numbers: waves,
        })
    }

    pub fn spatial_dim(&self) -> usize {
        self.d
    }

    pub fn per_dir(&self) -> usize {
        self.per_dir
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Quadrature weight of every grid point.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn point(&self, g: usize) -> &[f64] {
        &self.points[g][..self.d]
    }

    /// Grid values of `Σ_k c_k e_k`.
    pub fn values(&self, coeffs: &[f64]) -> DVector<f64> {
        &self.basis * DVector::from_column_slice(coeffs)
    }

    /// Grid values of `∂_i Σ_k c_k e_k`.
    pub fn gradient(&self, coeffs: &[f64], i: usize) -> DVector<f64> {
        &self.grad[i] * DVector::from_column_slice(coeffs)
    }

    /// `(∫ v e_k)_k` by the grid rule.
    pub fn project(&self, values: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(values) * self.weight
    }

    /// `(∫ v ∂_i e_k)_k` by the grid rule.
    pub fn project_grad(&self, values: &DVector<f64>, i: usize) -> DVector<f64> {
        self.grad[i].tr_mul(values) * self.weight
    }

    /// `∫ f` by the grid rule.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        values.into_iter().sum::<f64>() * self.weight
    }

    /// Grid values of `(ρ_m ∗ E e_k)`: the sine basis extended by zero
    /// outside the domain and mollified in `x` with the product kernel.
    pub fn mollified_basis(&self, kernel: &Kernel, m: f64) -> DMatrix<f64> {
        let factor = |k: usize, x: f64| -> f64 {
            kernel
                .nodes()
                .iter()
                .zip(kernel.weights())
                .map(|(&s, &w)| {
                    let z = x - s / m;
                    if (0.0..=1.0).contains(&z) {
                        w * sine(k, z)
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        let mut out = DMatrix::zeros(self.len(), self.dim());
        for (g, p) in self.points.iter().enumerate() {
            for (k, w) in self.wave_numbers.iter().enumerate() {
                out[(g, k)] = if self.d == 1 {
                    factor(w[0], p[0])
                } else {
                    factor(w[0], p[0]) * factor(w[1], p[1])
                };
            }
        }
        out
    }
}
