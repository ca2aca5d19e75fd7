//! Finite spectral model of the Gelfand triple `V ⊂ H ⊂ V*`.
//!
//! Vectors are coefficient arrays against the `H`-orthonormal Dirichlet
//! eigenbasis. Every norm is a weighted sum over the eigenvalues `λ_k`:
//!
//! ```text
//! ‖v‖²_H      = Σ |v_k|²
//! ‖v‖²_V      = Σ (1 + λ_k) |v_k|²
//! ‖v‖²_{V*}   = Σ (1 + λ_k)^{-1} |v_k|²
//! ‖v‖²_[H,V]θ = Σ (1 + λ_k)^θ |v_k|²
//! ```
//!
//! The real interpolation space `(H, V)_{s,p}` is realised by its dyadic
//! block sequence norm, which is equivalent (not equal) to the K-functional
//! norm.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// `(0, 1)` with `e_k(x) = √2 sin(kπx)`.
    Interval,
    /// `(0, 1)²` with `e_{kl}(x, y) = 2 sin(kπx) sin(lπy)`.
    Square,
    /// User-supplied eigenvalues, no spatial realisation.
    Custom,
}

impl DomainKind {
    pub fn spatial_dim(self) -> Option<usize> {
        match self {
            DomainKind::Interval => Some(1),
            DomainKind::Square => Some(2),
            DomainKind::Custom => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTriple {
    domain: DomainKind,
    eigenvalues: Vec<f64>,
    /// Wave numbers of each mode; one entry per spatial direction.
    wave_numbers: Vec<[usize; 2]>,
    components: usize,
}

impl SpectralTriple {
    pub fn new(domain: DomainKind, dim: usize, components: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim must be positive"));
        }
        if components == 0 {
            return Err(Error::param("components must be positive"));
        }
        let wave_numbers = match domain {
            DomainKind::Interval => (1..=dim).map(|k| [k, 0]).collect::<Vec<_>>(),
            DomainKind::Square => square_modes(dim),
            DomainKind::Custom => {
                return Err(Error::param(
                    "custom triples are built with SpectralTriple::from_eigenvalues",
                ))
            }
        };
        let eigenvalues = wave_numbers
            .iter()
            .map(|&[k, l]| ((k * k + l * l) as f64) * PI * PI)
            .collect();
        Ok(Self {
            domain,
            eigenvalues,
            wave_numbers,
            components,
        })
    }

    pub fn interval(dim: usize) -> Result<Self> {
        Self::new(DomainKind::Interval, dim, 1)
    }

    /// A triple with prescribed eigenvalues and no spatial realisation.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, components: usize) -> Result<Self> {
        if eigenvalues.is_empty() || components == 0 {
            return Err(Error::param(
                "need at least one eigenvalue and one component",
            ));
        }
        if eigenvalues.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::param("eigenvalues must be finite and positive"));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("eigenvalues must be nondecreasing"));
        }
        let wave_numbers = vec![[0, 0]; eigenvalues.len()];
        Ok(Self {
            domain: DomainKind::Custom,
            eigenvalues,
            wave_numbers,
            components,
        })
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Length of a flattened coefficient vector (`components × dim`).
    pub fn len(&self) -> usize {
        self.components * self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn wave_numbers(&self) -> &[[usize; 2]] {
        &self.wave_numbers
    }

    /// Spectral weight `(1 + λ)^θ` of the flattened index `i`.
    pub fn weight(&self, i: usize, theta: f64) -> f64 {
        (1.0 + self.eigenvalues[i % self.dim()]).powf(theta)
    }

    /// `(1 + λ)` for every flattened index; the diagonal of the Riesz map.
    pub fn v_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| 1.0 + self.eigenvalues[i % self.dim()])
            .collect()
    }

    pub fn zeros(&self) -> GalerkinVector {
        GalerkinVector::zeros(self.components, self.dim())
    }

    /// Unit vector on mode `k` (0-based) of component `alpha`.
    pub fn basis(&self, alpha: usize, k: usize) -> GalerkinVector {
        let mut v = self.zeros();
        v.coeffs[alpha * self.dim() + k] = 1.0;
        v
    }

    fn check(&self, v: &GalerkinVector) -> Result<()> {
        if v.dim != self.dim() || v.components != self.components {
            return Err(Error::shape(format!(
                "vector is {}x{}, triple is {}x{}",
                v.components,
                v.dim,
                self.components,
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn norm(&self, v: &GalerkinVector, tag: SpaceTag) -> Result<f64> {
        self.check(v)?;
        self.norm_slice(&v.coeffs, tag)
    }

    /// Norm of a raw flattened coefficient slice.
    pub fn norm_slice(&self, v: &[f64], tag: SpaceTag) -> Result<f64> {
        if v.len() != self.len() {
            return Err(Error::shape(format!(
                "slice has {} entries, triple expects {}",
                v.len(),
                self.len()
            )));
        }
        tag.validate()?;
        Ok(match tag {
            SpaceTag::H => self.weighted(v, 0.0),
            SpaceTag::V => self.weighted(v, 1.0),
            SpaceTag::Vdual => self.weighted(v, -1.0),
            SpaceTag::ComplexInterp(theta) => self.weighted(v, theta),
            SpaceTag::RealInterp { s, p } => self.besov(v, s, p),
        })
    }

    fn weighted(&self, v: &[f64], theta: f64) -> f64 {
        let dim = self.dim();
        v.iter()
            .enumerate()
            .map(|(i, c)| (1.0 + self.eigenvalues[i % dim]).powf(theta) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    fn besov(&self, v: &[f64], s: f64, p: f64) -> f64 {
        let dim = self.dim();
        let mut blocks: Vec<f64> = Vec::new();
        for (i, c) in v.iter().enumerate() {
            let j = dyadic_block(1.0 + self.eigenvalues[i % dim]);
            if blocks.len() <= j {
                blocks.resize(j + 1, 0.0);
            }
            blocks[j] += c * c;
        }
        blocks
            .iter()
            .enumerate()
            .map(|(j, b2)| 2f64.powf(j as f64 * s * p) * b2.powf(p / 2.0))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// `⟨f, v⟩` for `f ∈ V*`, `v ∈ V`: the `H` inner product of the coefficients.
    pub fn duality_pairing(&self, f: &GalerkinVector, v: &GalerkinVector) -> Result<f64> {
        self.check(f)?;
        self.check(v)?;
        Ok(f.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a * b).sum())
    }

    /// Discrete time norm of a trajectory sampled on `grid`.
    pub fn time_norm(&self, path: &[GalerkinVector], grid: &[f64], kind: TimeNorm) -> Result<f64> {
        for v in path {
            self.check(v)?;
        }
        let slices: Vec<&[f64]> = path.iter().map(|v| v.coeffs.as_slice()).collect();
        self.time_norm_slices(&slices, grid, kind)
    }

    pub fn time_norm_slices(&self, path: &[&[f64]], grid: &[f64], kind: TimeNorm) -> Result<f64> {
        if path.is_empty() {
            return Err(Error::param("empty path"));
        }
        if path.len() != grid.len() {
            return Err(Error::shape(format!(
                "path has {} samples, grid has {} points",
                path.len(),
                grid.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("time grid must be strictly increasing"));
        }
        kind.validate()?;
        let n = path.len();
        // left-point weights; the last sample closes the interval
        let dt: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    grid[i + 1] - grid[i]
                } else {
                    0.0
                }
            })
            .collect();
        let norms = |space: SpaceTag| -> Result<Vec<f64>> {
            path.iter().map(|v| self.norm_slice(v, space)).collect()
        };
        let diff_norm = |i: usize, j: usize, space: SpaceTag| -> Result<f64> {
            let d: Vec<f64> = path[j].iter().zip(path[i]).map(|(a, b)| a - b).collect();
            self.norm_slice(&d, space)
        };
        match kind {
            TimeNorm::Lp { p, space } => {
                let nv = norms(space)?;
                Ok(lp_sum(&nv, &dt, p))
            }
            TimeNorm::Sup { space } => Ok(norms(space)?.into_iter().fold(0.0, f64::max)),
            TimeNorm::Holder { gamma, space } => {
                let mut best = 0.0f64;
                for i in 0..n {
                    for j in i + 1..n {
                        let q = diff_norm(i, j, space)? / (grid[j] - grid[i]).powf(gamma);
                        best = best.max(q);
                    }
                }
                Ok(best)
            }
            TimeNorm::Gagliardo { theta, p, space } => {
                let lp = lp_sum(&norms(space)?, &dt, p);
                if theta == 0.0 {
                    return Ok(lp);
                }
                let mut acc = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        let w = dt[i] * dt[j];
                        if w == 0.0 {
                            continue;
                        }
                        let d = diff_norm(i, j, space)?;
                        // symmetric double sum: count (i, j) and (j, i)
                        acc += 2.0 * w * d.powf(p) / (grid[j] - grid[i]).powf(1.0 + theta * p);
                    }
                }
                Ok(acc.powf(1.0 / p) + lp)
            }
        }
    }
}

fn lp_sum(values: &[f64], dt: &[f64], p: f64) -> f64 {
    values
        .iter()
        .zip(dt)
        .map(|(v, w)| w * v.powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Block index `j` with `4^j ≤ w < 4^{j+1}`.
fn dyadic_block(w: f64) -> usize {
    let mut j = (w.log2() / 2.0).floor().max(0.0) as usize;
    // guard against rounding at block edges
    while 4f64.powi(j as i32 + 1) <= w {
        j += 1;
    }
    while j > 0 && 4f64.powi(j as i32) > w {
        j -= 1;
    }
    j
}

/// First `dim` pairs `(k, l)`, `k, l ≥ 1`, ordered by `k² + l²` then lexicographically.
fn square_modes(dim: usize) -> Vec<[usize; 2]> {
    let mut side = 1;
    while side * side < dim {
        side += 1;
    }
    // every pair with k² + l² ≤ (side+1)² is enumerated, enough to fill `dim` slots in order
    let reach = 2 * side + 2;
    let mut modes: Vec<[usize; 2]> = (1..=reach)
        .flat_map(|k| (1..=reach).map(move |l| [k, l]))
        .collect();
    modes.sort_by_key(|&[k, l]| (k * k + l * l, k, l));
    modes.truncate(dim);
    modes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinVector {
    pub components: usize,
    pub dim: usize,
    /// Component-major: index `alpha * dim + k`.
    pub coeffs: Vec<f64>,
}

impl GalerkinVector {
    pub fn zeros(components: usize, dim: usize) -> Self {
        Self {
            components,
            dim,
            coeffs: vec![0.0; components * dim],
        }
    }

    pub fn from_coeffs(components: usize, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != components * dim {
            return Err(Error::shape(format!(
                "expected {} coefficients, got {}",
                components * dim,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coefficients must be finite"));
        }
        Ok(Self {
            components,
            dim,
            coeffs,
        })
    }

    pub fn component(&self, alpha: usize) -> &[f64] {
        &self.coeffs[alpha * self.dim..(alpha + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", content = "params", rename_all = "kebab-case")]
pub enum SpaceTag {
    H,
    V,
    Vdual,
    /// `[H, V]_θ`, `θ ∈ [0, 1]`.
    ComplexInterp(f64),
    /// `(H, V)_{s,p}`, `s ∈ (0, 1)`, `p ∈ [2, ∞)`.
    RealInterp {
        s: f64,
        p: f64,
    },
}

impl SpaceTag {
    pub fn validate(self) -> Result<()> {
        match self {
            SpaceTag::ComplexInterp(t) if !(0.0..=1.0).contains(&t) => Err(Error::param(format!(
                "interpolation exponent {t} outside [0, 1]"
            ))),
            SpaceTag::RealInterp { s, p }
                if !(s > 0.0 && s < 1.0) || !(p >= 2.0) || !p.is_finite() =>
            {
                Err(Error::param(format!(
                    "real interpolation (s={s}, p={p}) out of range"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn label(self) -> String {
        match self {
            SpaceTag::H => "H".into(),
            SpaceTag::V => "V".into(),
            SpaceTag::Vdual => "V*".into(),
            SpaceTag::ComplexInterp(t) => format!("[H,V]_{t}"),
            SpaceTag::RealInterp { s, p } => format!("(H,V)_{s},{p}"),
        }
    }
}

/// Path norms on a discrete time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeNorm {
    /// `(Σ Δt_i ‖u(t_i)‖_X^p)^{1/p}`.
    Lp {
        p: f64,
        space: SpaceTag,
    },
    Sup {
        space: SpaceTag,
    },
    /// Hölder seminorm `max_{i<j} ‖u_j − u_i‖_X / |t_j − t_i|^γ`.
    Holder {
        gamma: f64,
        space: SpaceTag,
    },
    /// Discrete Sobolev–Slobodeckij norm, the surrogate for `H^{θ,p}(0,T; X)`.
    /// At `θ = 0` this is the `L^p(0,T;X)` norm.
    Gagliardo {
        theta: f64,
        p: f64,
        space: SpaceTag,
    },
}

impl TimeNorm {
    pub fn lp_v(p: f64) -> Self {
        TimeNorm::Lp {
            p,
            space: SpaceTag::V,
        }
    }

    pub fn sup_h() -> Self {
        TimeNorm::Sup { space: SpaceTag::H }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            TimeNorm::Lp { p, space } => {
                if !(p >= 1.0) {
                    return Err(Error::param(format!("p = {p} < 1")));
                }
                space.validate()
            }
            TimeNorm::Sup { space } => space.validate(),
            TimeNorm::Holder { gamma, space } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::param(format!(
                        "Hölder exponent {gamma} outside (0, 1)"
                    )));
                }
                space.validate()
            }
            TimeNorm::Gagliardo { theta, p, space } => {
                if !(0.0..0.5).contains(&theta) {
                    return Err(Error::param(format!("θ = {theta} outside [0, 1/2)")));
                }
                if !(p >= 1.0) {
                    return Err(Error::param(format!("p = {p} < 1")));
                }
                space.validate()
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            TimeNorm::Lp { p, space } => format!("L^{p}({})", space.label()),
            TimeNorm::Sup { space } => format!("C({})", space.label()),
            TimeNorm::Holder { gamma, space } => format!("C^{gamma}({})", space.label()),
            TimeNorm::Gagliardo { theta, p, space } => {
                format!("W^{theta},{p}({})", space.label())
            }
        }
    }
}
