//! Batched jackknife estimates over independent paths.

use serde::{Deserialize, Serialize};

pub const DEFAULT_BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// `|self − other| ≤ k · sqrt(se² + se'²)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.se.hypot(other.se)
    }
}

/// Jackknife over `batches` contiguous blocks: `stat` sees the
/// leave-one-block-out samples, the point value uses all samples. With
/// fewer samples than blocks every sample is its own block.
pub fn jackknife<T: Clone>(samples: &[T], batches: usize, stat: impl Fn(&[T]) -> f64) -> Estimate {
    let n = samples.len();
    let value = stat(samples);
    if n < 2 {
        return Estimate::exact(value);
    }
    let b = batches.clamp(2, n);
    let bounds: Vec<usize> = (0..=b).map(|j| j * n / b).collect();
    let mut leave_out = Vec::with_capacity(b);
    let mut rest = Vec::with_capacity(n);
    for j in 0..b {
        rest.clear();
        rest.extend_from_slice(&samples[..bounds[j]]);
        rest.extend_from_slice(&samples[bounds[j + 1]..]);
        leave_out.push(stat(&rest));
    }
    let mean = leave_out.iter().sum::<f64>() / b as f64;
    let var = leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (b - 1) as f64 / b as f64;
    Estimate {
        value,
        se: var.sqrt(),
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Jackknife estimate of the sample mean.
pub fn mean_estimate(samples: &[f64]) -> Estimate {
    jackknife(samples, DEFAULT_BATCHES, mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_batch_means() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 17) as f64).collect();
        let e = mean_estimate(&xs);
        let bm: Vec<f64> = xs.chunks(10).map(mean).collect();
        let m = mean(&bm);
        let se = (bm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 9.0 / 10.0).sqrt();
        assert!((e.value - mean(&xs)).abs() < 1e-12);
        assert!((e.se - se).abs() < 1e-12, "{} vs {se}", e.se);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(mean_estimate(&[3.0]), Estimate::exact(3.0));
        assert_eq!(mean_estimate(&[2.0; 50]).se, 0.0);
        let e = mean_estimate(&[1.0, 3.0]);
        assert_eq!(e.value, 2.0);
        assert!((e.se - 1.0).abs() < 1e-12);
    }
}
