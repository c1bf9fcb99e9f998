//! Sample embedding Ψ, the one-hot block feature map Φ(x, y), and the
//! moment estimates (τ, λ) that define the uncertainty set.
//!
//! Φ(x, y) places Ψ(x) in block `y` of an `m = d · n_classes` vector and
//! zeros everywhere else, so Φ(x, y)ᵀμ only touches block `y` of μ.

use std::f64::consts::PI;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, RowView, SparseRows};
use crate::error::{MrcError, Result};

/// Default regularization multiplier for the confidence vector.
pub const DEFAULT_LAMBDA0: f64 = 0.01;

/// Deterministic description of the embedding Ψ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMapSpec {
    Identity {
        input_dim: usize,
    },
    Standardize {
        mean: Vec<f64>,
        scale: Vec<f64>,
    },
    /// Random Fourier features `sqrt(2/D) cos(W x + b)`.
    Rff {
        input_dim: usize,
        n_components: usize,
        sigma: f64,
        seed: u64,
        /// `n_components × input_dim`, row-major.
        frequencies: Vec<f64>,
        offsets: Vec<f64>,
    },
}

impl FeatureMapSpec {
    pub fn identity(input_dim: usize) -> Self {
        FeatureMapSpec::Identity { input_dim }
    }

    /// Column means and population standard deviations of `rows`.
    /// Zero-variance columns get scale 1.
    pub fn fit_standardize(rows: &SparseRows) -> Self {
        let n = rows.n_rows() as f64;
        let d = rows.n_cols();
        let mut mean = vec![0.0; d];
        for i in 0..rows.n_rows() {
            let r = rows.row(i);
            for (&k, &v) in r.indices.iter().zip(r.values) {
                mean[k as usize] += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        // Implicit zeros contribute mean² each.
        let mut sq = vec![0.0; d];
        let mut stored = vec![0usize; d];
        for i in 0..rows.n_rows() {
            let r = rows.row(i);
            for (&k, &v) in r.indices.iter().zip(r.values) {
                let k = k as usize;
                sq[k] += (v - mean[k]).powi(2);
                stored[k] += 1;
            }
        }
        let scale = (0..d)
            .map(|k| {
                let missing = rows.n_rows() - stored[k];
                let var = (sq[k] + missing as f64 * mean[k] * mean[k]) / n;
                let s = var.sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        FeatureMapSpec::Standardize { mean, scale }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMapSpec::Identity { input_dim } | FeatureMapSpec::Rff { input_dim, .. } => {
                *input_dim
            }
            FeatureMapSpec::Standardize { mean, .. } => mean.len(),
        }
    }

    /// Output dimension `d` of Ψ.
    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMapSpec::Rff { n_components, .. } => *n_components,
            _ => self.input_dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FeatureMapSpec::Identity { .. } => "identity",
            FeatureMapSpec::Standardize { .. } => "standardize",
            FeatureMapSpec::Rff { .. } => "rff",
        }
    }

    /// Ψ(x) for a dense raw vector.
    pub fn build_psi(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(MrcError::Shape(format!(
                "input has {} features, feature map expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(match self {
            FeatureMapSpec::Identity { .. } => x.to_vec(),
            FeatureMapSpec::Standardize { mean, scale } => x
                .iter()
                .zip(mean.iter().zip(scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect(),
            FeatureMapSpec::Rff {
                n_components,
                frequencies,
                offsets,
                ..
            } => {
                let amp = (2.0 / *n_components as f64).sqrt();
                frequencies
                    .chunks_exact(x.len())
                    .zip(offsets)
                    .map(|(w, b)| {
                        let z: f64 = w.iter().zip(x).map(|(a, c)| a * c).sum();
                        amp * (z + b).cos()
                    })
                    .collect()
            }
        })
    }

    /// Ψ of a sparse raw row, returned as a sparse row over `output_dim` columns.
    fn psi_sparse(&self, row: RowView<'_>) -> Result<(Vec<u32>, Vec<f64>)> {
        let input_dim = self.input_dim();
        if let Some(&k) = row.indices.last() {
            if k as usize >= input_dim {
                return Err(MrcError::Shape(format!(
                    "feature index {} exceeds the feature map input dimension {input_dim}",
                    k + 1
                )));
            }
        }
        Ok(match self {
            FeatureMapSpec::Identity { .. } => (row.indices.to_vec(), row.values.to_vec()),
            FeatureMapSpec::Standardize { mean, scale } => {
                let mut dense: Vec<f64> = mean.iter().zip(scale).map(|(m, s)| -m / s).collect();
                for (&k, &v) in row.indices.iter().zip(row.values) {
                    let k = k as usize;
                    dense[k] = (v - mean[k]) / scale[k];
                }
                ((0..dense.len() as u32).collect(), dense)
            }
            FeatureMapSpec::Rff {
                n_components,
                frequencies,
                offsets,
                ..
            } => {
                let amp = (2.0 / *n_components as f64).sqrt();
                let vals = frequencies
                    .chunks_exact(input_dim)
                    .zip(offsets)
                    .map(|(w, b)| amp * (row.dot(w) + b).cos())
                    .collect();
                ((0..*n_components as u32).collect(), vals)
            }
        })
    }

    /// Embeds every row of `rows`. Identity keeps the input sparsity.
    pub fn embed(&self, rows: &SparseRows) -> Result<SparseRows> {
        let mut out = SparseRows::new(self.output_dim());
        for i in 0..rows.n_rows() {
            let (idx, val) = self.psi_sparse(rows.row(i))?;
            out.push_sparse(&idx, &val)?;
        }
        Ok(out)
    }

    /// Dense Ψ of a sparse raw row.
    pub fn psi_row(&self, row: RowView<'_>) -> Result<Vec<f64>> {
        let (idx, val) = self.psi_sparse(row)?;
        let mut out = vec![0.0; self.output_dim()];
        for (k, v) in idx.into_iter().zip(val) {
            out[k as usize] = v;
        }
        Ok(out)
    }
}

/// Draws a random Fourier feature map: frequencies i.i.d. N(0, 1/sigma²),
/// offsets uniform on [0, 2π).
pub fn sample_rff(input_dim: usize, n_components: usize, sigma: f64, seed: u64) -> Result<FeatureMapSpec> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MrcError::Config(format!("RFF bandwidth must be positive, got {sigma}")));
    }
    if n_components == 0 || input_dim == 0 {
        return Err(MrcError::Config("RFF dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / sigma).expect("finite std");
    let frequencies = (0..n_components * input_dim).map(|_| normal.sample(&mut rng)).collect();
    let offsets = (0..n_components).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    Ok(FeatureMapSpec::Rff {
        input_dim,
        n_components,
        sigma,
        seed,
        frequencies,
        offsets,
    })
}

/// Median pairwise Euclidean distance over a seeded subsample of at most
/// `max_samples` rows. Falls back to 1 when all sampled rows coincide.
pub fn median_bandwidth(rows: &SparseRows, max_samples: usize, seed: u64) -> f64 {
    let n = rows.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<usize> = if n > max_samples {
        let mut v = sample_indices(&mut rng, n, max_samples).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let dense: Vec<Vec<f64>> = picked.iter().map(|&i| rows.row(i).to_dense(rows.n_cols())).collect();
    let mut dists = Vec::with_capacity(dense.len() * dense.len().saturating_sub(1) / 2);
    for a in 0..dense.len() {
        for b in a + 1..dense.len() {
            let d2: f64 = dense[a].iter().zip(&dense[b]).map(|(x, y)| (x - y).powi(2)).sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, &mut med, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            ..Default::default()
        }
    }

    /// Keeps the nonzero entries of `dense`.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        SparseVector {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.len() != self.values.len() {
            return Err(MrcError::Shape("sparse vector index/value length mismatch".into()));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MrcError::Shape("sparse vector indices must increase".into()));
        }
        if self.indices.last().is_some_and(|&i| i >= self.dim) {
            return Err(MrcError::Shape("sparse vector index out of range".into()));
        }
        Ok(())
    }
}

/// Φ(x, y)ᵀμ = Ψ(x)ᵀμ⁽ʸ⁾ for a 0-based class `y`.
///
/// Only the nonzeros of μ that fall inside block `y` are visited.
pub fn phi_dot(psi_x: &[f64], y: usize, mu: &SparseVector) -> Result<f64> {
    let d = psi_x.len();
    if d == 0 || !mu.dim.is_multiple_of(d) {
        return Err(MrcError::Shape(format!(
            "μ of length {} is not a whole number of blocks of size {d}",
            mu.dim
        )));
    }
    let n_classes = mu.dim / d;
    if y >= n_classes {
        return Err(MrcError::Shape(format!("class {y} out of range for {n_classes} classes")));
    }
    if mu.indices.last().is_some_and(|&i| i >= mu.dim) {
        return Err(MrcError::Shape("μ index out of range".into()));
    }
    let (lo, hi) = (y * d, (y + 1) * d);
    let start = mu.indices.partition_point(|&i| i < lo);
    let end = mu.indices.partition_point(|&i| i < hi);
    Ok(mu.indices[start..end]
        .iter()
        .zip(&mu.values[start..end])
        .map(|(&j, &v)| psi_x[j - lo] * v)
        .sum())
}

/// Dense Φ(x, y).
pub fn phi_dense(psi_x: &[f64], y: usize, n_classes: usize) -> Vec<f64> {
    let d = psi_x.len();
    let mut out = vec![0.0; d * n_classes];
    out[y * d..(y + 1) * d].copy_from_slice(psi_x);
    out
}

/// Normalization used for the componentwise standard deviation in λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StdNormalization {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1 (falls back to n when n = 1).
    Sample,
}

/// Mean vector τ, confidence vector λ = λ0·s, and class proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda0: f64,
    pub class_props: Vec<f64>,
    pub d: usize,
    pub n_classes: usize,
}

impl MomentEstimates {
    /// Moments of Φ(x_i, y_i) over already-embedded rows.
    pub fn from_embedded(
        psi: &SparseRows,
        labels: &[usize],
        n_classes: usize,
        lambda0: f64,
        norm: StdNormalization,
    ) -> Result<Self> {
        if !(lambda0 >= 0.0 && lambda0.is_finite()) {
            return Err(MrcError::Config(format!("lambda0 must be nonnegative, got {lambda0}")));
        }
        let n = psi.n_rows();
        if n == 0 {
            return Err(MrcError::NoSamples);
        }
        if labels.len() != n {
            return Err(MrcError::Shape("label count does not match rows".into()));
        }
        let d = psi.n_cols();
        let m = d * n_classes;
        let nf = n as f64;

        let mut counts = vec![0usize; n_classes];
        let mut tau = vec![0.0; m];
        for (i, &y) in labels.iter().enumerate() {
            counts[y] += 1;
            let r = psi.row(i);
            for (&k, &v) in r.indices.iter().zip(r.values) {
                tau[y * d + k as usize] += v;
            }
        }
        tau.iter_mut().for_each(|t| *t /= nf);

        // Σ_i (Φ_j(x_i, y_i) − τ_j)². Rows outside class c and implicit zeros
        // inside it each contribute τ_j².
        let mut ss = vec![0.0; m];
        let mut stored = vec![0usize; m];
        for (i, &y) in labels.iter().enumerate() {
            let r = psi.row(i);
            for (&k, &v) in r.indices.iter().zip(r.values) {
                let j = y * d + k as usize;
                ss[j] += (v - tau[j]).powi(2);
                stored[j] += 1;
            }
        }
        let denom = match norm {
            StdNormalization::Population => nf,
            StdNormalization::Sample if n > 1 => nf - 1.0,
            StdNormalization::Sample => nf,
        };
        let lambda = (0..m)
            .map(|j| {
                let rest = (n - stored[j]) as f64;
                let var = (ss[j] + rest * tau[j] * tau[j]) / denom;
                lambda0 * var.max(0.0).sqrt()
            })
            .collect();
        let class_props = counts.iter().map(|&c| c as f64 / nf).collect();
        Ok(MomentEstimates {
            tau,
            lambda,
            lambda0,
            class_props,
            d,
            n_classes,
        })
    }

    pub fn m(&self) -> usize {
        self.tau.len()
    }
}

/// Embeds `ds` with `spec` and estimates moments with population std.
pub fn estimate_moments(ds: &Dataset, spec: &FeatureMapSpec, lambda0: f64) -> Result<MomentEstimates> {
    let psi = spec.embed(ds.features())?;
    MomentEstimates::from_embedded(&psi, ds.labels(), ds.n_classes(), lambda0, StdNormalization::Population)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identity_and_standardize() {
        let x = [3.0, -1.0];
        assert_eq!(FeatureMapSpec::identity(2).build_psi(&x).unwrap(), vec![3.0, -1.0]);
        let st = FeatureMapSpec::Standardize {
            mean: vec![1.0, 1.0],
            scale: vec![2.0, 2.0],
        };
        assert_eq!(st.build_psi(&x).unwrap(), vec![1.0, -1.0]);
        assert!(matches!(st.build_psi(&[1.0]), Err(MrcError::Shape(_))));
    }

    #[test]
    fn fit_standardize_handles_constant_columns() {
        let rows = SparseRows::from_dense(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        match FeatureMapSpec::fit_standardize(&rows) {
            FeatureMapSpec::Standardize { mean, scale } => {
                assert_eq!(mean, vec![2.0, 5.0]);
                assert_eq!(scale, vec![1.0, 1.0]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rff_direct_formula() {
        let spec = FeatureMapSpec::Rff {
            input_dim: 2,
            n_components: 1,
            sigma: 1.0,
            seed: 0,
            frequencies: vec![1.0, 0.0],
            offsets: vec![0.0],
        };
        let psi = spec.build_psi(&[0.0, 5.0]).unwrap();
        assert_eq!(psi, vec![2f64.sqrt()]);
    }

    #[test]
    fn rff_sampling_is_deterministic() {
        let a = sample_rff(2, 400, 1.0, 7).unwrap();
        let b = sample_rff(2, 400, 1.0, 7).unwrap();
        assert_eq!(a.output_dim(), 400);
        match (&a, &b) {
            (
                FeatureMapSpec::Rff { frequencies: fa, offsets: oa, .. },
                FeatureMapSpec::Rff { frequencies: fb, offsets: ob, .. },
            ) => {
                assert!(fa.iter().zip(fb).all(|(x, y)| x.to_bits() == y.to_bits()));
                assert!(oa.iter().zip(ob).all(|(x, y)| x.to_bits() == y.to_bits()));
                assert!(oa.iter().all(|&b| (0.0..2.0 * PI).contains(&b)));
            }
            _ => unreachable!(),
        }
        assert!(matches!(sample_rff(2, 4, 0.0, 1), Err(MrcError::Config(_))));
        assert!(matches!(sample_rff(2, 4, -1.0, 1), Err(MrcError::Config(_))));
    }

    proptest! {
        #[test]
        fn rff_components_bounded(x in proptest::collection::vec(-50.0f64..50.0, 3), seed in 0u64..1000) {
            let spec = sample_rff(3, 16, 0.7, seed).unwrap();
            let bound = (2.0f64 / 16.0).sqrt();
            for v in spec.build_psi(&x).unwrap() {
                prop_assert!(v.abs() <= bound + 1e-15);
            }
        }

        #[test]
        fn sparse_and_dense_embeddings_agree(x in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let rows = SparseRows::from_dense(std::slice::from_ref(&x)).unwrap();
            let specs = [
                FeatureMapSpec::identity(4),
                FeatureMapSpec::Standardize { mean: vec![0.5; 4], scale: vec![2.0; 4] },
                sample_rff(4, 8, 1.3, 5).unwrap(),
            ];
            for spec in &specs {
                let a = spec.build_psi(&x).unwrap();
                let b = spec.psi_row(rows.row(0)).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn median_bandwidth_of_collinear_points() {
        let rows = SparseRows::from_dense(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        // distances 1, 3, 2
        assert_eq!(median_bandwidth(&rows, 1000, 0), 2.0);
        let same = SparseRows::from_dense(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(median_bandwidth(&same, 1000, 0), 1.0);
    }

    #[test]
    fn phi_dot_examples() {
        let mu = SparseVector::from_dense(&[0.0, 0.0, 1.0, 4.0, 0.0, 0.0]);
        assert_eq!(phi_dot(&[2.0, -1.0], 1, &mu).unwrap(), -2.0);
        assert_eq!(phi_dot(&[2.0, -1.0], 0, &mu).unwrap(), 0.0);

        let zero = SparseVector::zeros(6);
        for y in 0..3 {
            assert_eq!(phi_dot(&[2.0, -1.0], y, &zero).unwrap(), 0.0);
        }

        let mu = SparseVector::from_dense(&[1.0, -1.0]);
        assert_eq!(phi_dot(&[3.0], 0, &mu).unwrap(), 3.0);
        assert_eq!(phi_dot(&[3.0], 1, &mu).unwrap(), -3.0);
        assert!(matches!(phi_dot(&[3.0], 2, &mu), Err(MrcError::Shape(_))));
        assert!(matches!(phi_dot(&[3.0, 1.0, 2.0], 0, &mu), Err(MrcError::Shape(_))));
    }

    #[test]
    fn phi_dot_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let d = rng.gen_range(1..6);
            let k = rng.gen_range(1..5);
            let psi: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let dense_mu: Vec<f64> = (0..d * k)
                .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-2.0..2.0) } else { 0.0 })
                .collect();
            let y = rng.gen_range(0..k);
            let full: f64 = phi_dense(&psi, y, k).iter().zip(&dense_mu).map(|(a, b)| a * b).sum();
            let fast = phi_dot(&psi, y, &SparseVector::from_dense(&dense_mu)).unwrap();
            assert!((full - fast).abs() <= 1e-12);
        }
    }

    #[test]
    fn moments_two_one_hot_samples() {
        let psi = SparseRows::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mo = MomentEstimates::from_embedded(&psi, &[0, 1], 2, 0.01, StdNormalization::Population).unwrap();
        assert_eq!(mo.tau, vec![0.5, 0.0, 0.0, 0.5]);
        // Oracle: population std of the componentwise values {1, 0} and {0, 0}.
        let direct = |vals: [f64; 2]| {
            let mean = (vals[0] + vals[1]) / 2.0;
            (((vals[0] - mean).powi(2) + (vals[1] - mean).powi(2)) / 2.0).sqrt()
        };
        let expected = [
            direct([1.0, 0.0]),
            direct([0.0, 0.0]),
            direct([0.0, 0.0]),
            direct([0.0, 1.0]),
        ];
        for (l, e) in mo.lambda.iter().zip(expected) {
            assert!((l - 0.01 * e).abs() < 1e-15);
        }
        assert!((mo.lambda[0] - 0.005).abs() < 1e-15);
        assert_eq!(mo.class_props, vec![0.5, 0.5]);
    }

    #[test]
    fn moments_single_sample_and_zero_lambda0() {
        let psi = SparseRows::from_dense(&[vec![2.0, 3.0]]).unwrap();
        let mo = MomentEstimates::from_embedded(&psi, &[0], 2, 0.5, StdNormalization::Population).unwrap();
        assert!(mo.lambda.iter().all(|&l| l == 0.0));

        let psi = SparseRows::from_dense(&[vec![2.0], vec![-1.0], vec![0.5]]).unwrap();
        let mo = MomentEstimates::from_embedded(&psi, &[0, 1, 1], 2, 0.0, StdNormalization::Population).unwrap();
        assert!(mo.lambda.iter().all(|&l| l == 0.0));
        assert!((mo.class_props.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_normalization_is_larger() {
        let psi = SparseRows::from_dense(&[vec![1.0], vec![3.0]]).unwrap();
        let pop = MomentEstimates::from_embedded(&psi, &[0, 0], 1, 1.0, StdNormalization::Population).unwrap();
        let smp = MomentEstimates::from_embedded(&psi, &[0, 0], 1, 1.0, StdNormalization::Sample).unwrap();
        assert!((pop.lambda[0] - 1.0).abs() < 1e-15);
        assert!((smp.lambda[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sparse_moments_match_dense() {
        let dense = vec![vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, -3.0], vec![4.0, 1.0, 0.0]];
        let labels = [0, 1, 0, 1];
        let dense_rows = SparseRows::from_dense(&dense).unwrap();
        let mut sparse_rows = SparseRows::new(3);
        for r in &dense {
            let sv = SparseVector::from_dense(r);
            let idx: Vec<u32> = sv.indices.iter().map(|&i| i as u32).collect();
            sparse_rows.push_sparse(&idx, &sv.values).unwrap();
        }
        let a = MomentEstimates::from_embedded(&dense_rows, &labels, 2, 0.3, StdNormalization::Population).unwrap();
        let b = MomentEstimates::from_embedded(&sparse_rows, &labels, 2, 0.3, StdNormalization::Population).unwrap();
        for (x, y) in a.lambda.iter().zip(&b.lambda) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(a.tau, b.tau);
    }
}
