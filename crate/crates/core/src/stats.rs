//! Small statistics and extrapolation helpers shared by the estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Sample mean and standard error of the mean; summation runs in slice order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }
}

/// Paired mean difference of two equally long sample lists.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Estimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Estimate::from_samples(&d)
}

/// Richardson extrapolation for values at step `h` and `h/2` with error order `p`.
pub fn richardson(coarse: f64, fine: f64, order: f64) -> f64 {
    let k = 2f64.powf(order);
    (k * fine - coarse) / (k - 1.0)
}

/// Deterministic generator for one (seed, stream, substream) triple.
pub fn rng_for(seed: u64, stream: u64, substream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&substream.to_le_bytes());
    key[16..24].copy_from_slice(&0x6c6f_6f70_6c61_6221u64.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
