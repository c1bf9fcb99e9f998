//! Seeded Gaussian class-mixture datasets for tests and benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataio::Dataset;
use crate::error::{MrcError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub d: usize,
    pub n_classes: usize,
    /// Standard deviation of each coordinate of the class means.
    pub separation: f64,
    pub seed: u64,
}

/// Balanced classes (sample i has class i mod |Y|) drawn from
/// N(mean_y, I), with every mean coordinate drawn from N(0, separation²).
pub fn gaussian_classes(spec: &GaussianSpec) -> Result<Dataset> {
    if spec.n < spec.n_classes || spec.d == 0 || spec.n_classes == 0 {
        return Err(MrcError::Config(format!(
            "need n ≥ |Y| ≥ 1 and d ≥ 1, got n={} d={} |Y|={}",
            spec.n, spec.d, spec.n_classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mean_dist = Normal::new(0.0, spec.separation.abs()).map_err(|e| MrcError::Config(e.to_string()))?;
    let means: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| (0..spec.d).map(|_| mean_dist.sample(&mut rng)).collect())
        .collect();
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let y = i % spec.n_classes;
        let x: Vec<f64> = means[y]
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + z
            })
            .collect();
        rows.push(x);
        labels.push(y);
    }
    Dataset::from_dense(&rows, labels, spec.n_classes)
}

/// Two classes with means ±separation/2 along the first axis.
pub fn two_gaussians(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || d == 0 {
        return Err(MrcError::Config("need n ≥ 2 and d ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let shift = if y == 0 { -separation / 2.0 } else { separation / 2.0 };
        let x: Vec<f64> = (0..d)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if j == 0 {
                    z + shift
                } else {
                    z
                }
            })
            .collect();
        rows.push(x);
        labels.push(y);
    }
    Dataset::from_dense(&rows, labels, 2)
}
