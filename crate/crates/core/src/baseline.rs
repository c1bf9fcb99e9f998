//! Exact small-instance references: the full LP over every constraint and
//! feature, and exhaustive evaluation of φ(μ).

use std::time::Instant;

use crate::dataio::{Dataset, SparseRows};
use crate::error::{MrcError, Result};
use crate::features::{FeatureMapSpec, MomentEstimates, StdNormalization};
use crate::lp::{self, SolveOptions};
use crate::oracle::{ConstraintId, PointStore, SubsetCode};

/// Largest number of primal constraints the full LP will materialize.
pub const DEFAULT_CAP: u128 = 2_000_000;

/// Largest class count `phi_brute` enumerates.
pub const BRUTE_CLASS_LIMIT: usize = 20;

#[derive(Debug, Clone)]
pub struct FullSolution {
    pub r_star: f64,
    /// Dense μ* = μ1* − μ2* over all features.
    pub mu_star: Vec<f64>,
    pub nu: f64,
    pub duality_gap: f64,
    pub n_constraints: usize,
    pub iterations: usize,
}

/// n · (2^|Y| − 1).
pub fn full_constraint_count(n: usize, n_classes: usize) -> u128 {
    if n_classes >= 127 {
        return u128::MAX;
    }
    (n as u128).saturating_mul((1u128 << n_classes) - 1)
}

/// Solves the LP with all n(2^|Y| − 1) constraints over embedded rows `psi`.
pub fn solve_full(psi: &SparseRows, moments: &MomentEstimates, cap: u128, deadline: Option<Instant>) -> Result<FullSolution> {
    let n = psi.n_rows();
    let k = moments.n_classes;
    let required = full_constraint_count(n, k);
    if required > cap {
        return Err(MrcError::CapExceeded { required, cap });
    }
    let subsets = SubsetCode::all(k)?;
    let ids: Vec<ConstraintId> = (0..n)
        .flat_map(|i| subsets.iter().map(move |s| ConstraintId::new(i, s.clone())))
        .collect();
    let points = PointStore::new(psi, k);
    let features: Vec<usize> = (0..moments.m()).collect();
    let sp = lp::build_subproblem(&points, &ids, &features, moments, &[])?;
    let sol = lp::solve(
        &sp,
        None,
        &SolveOptions {
            deadline,
            ..Default::default()
        },
    )?;
    Ok(FullSolution {
        r_star: sol.primal.objective,
        mu_star: sol.primal.mu(),
        nu: sol.primal.nu,
        duality_gap: sol.duality_gap,
        n_constraints: ids.len(),
        iterations: sol.iterations,
    })
}

/// Embeds `ds`, estimates moments and solves the full LP.
pub fn solve_full_dataset(ds: &Dataset, spec: &FeatureMapSpec, lambda0: f64, cap: u128) -> Result<FullSolution> {
    let required = full_constraint_count(ds.n_samples(), ds.n_classes());
    if required > cap {
        return Err(MrcError::CapExceeded { required, cap });
    }
    let psi = spec.embed(ds.features())?;
    let moments = MomentEstimates::from_embedded(&psi, ds.labels(), ds.n_classes(), lambda0, StdNormalization::Population)?;
    solve_full(&psi, &moments, cap, None)
}

/// max over nonempty C of (Σ_{y∈C} Ψ(x)ᵀμ⁽ʸ⁾ − 1)/|C| by enumerating every
/// subset. Ties go to the smallest subset code.
pub fn phi_brute(psi_x: &[f64], mu: &[f64], n_classes: usize) -> Result<(f64, SubsetCode)> {
    if n_classes == 0 {
        return Err(MrcError::Shape("no classes".into()));
    }
    if n_classes > BRUTE_CLASS_LIMIT {
        return Err(MrcError::Config(format!(
            "brute-force enumeration is limited to {BRUTE_CLASS_LIMIT} classes, got {n_classes}"
        )));
    }
    let d = psi_x.len();
    if mu.len() != d * n_classes {
        return Err(MrcError::Shape(format!("μ has length {}, expected {}", mu.len(), d * n_classes)));
    }
    let v: Vec<f64> = (0..n_classes)
        .map(|y| psi_x.iter().zip(&mu[y * d..(y + 1) * d]).map(|(a, b)| a * b).sum())
        .collect();
    let (psi, code) = brute_max(&v);
    Ok((psi, SubsetCode::from_code(code, n_classes)?))
}

/// Exhaustive maximum of (Σ_{y∈C} v_y − 1)/|C| over subset codes.
pub fn brute_max(v: &[f64]) -> (f64, u64) {
    let k = v.len();
    let mut best = (f64::NEG_INFINITY, 0u64);
    for code in 1u64..(1u64 << k) {
        let mut sum = 0.0;
        let mut size = 0;
        for (y, &vy) in v.iter().enumerate() {
            if code >> y & 1 == 1 {
                sum += vy;
                size += 1;
            }
        }
        let val = (sum - 1.0) / size as f64;
        if val > best.0 {
            best = (val, code);
        }
    }
    best
}

/// 1 − τᵀμ + φ(μ) + λᵀ|μ| with φ evaluated over the rows of `psi`.
pub fn mrc_objective(psi: &SparseRows, moments: &MomentEstimates, mu: &[f64]) -> Result<f64> {
    let k = moments.n_classes;
    let mut phi = f64::NEG_INFINITY;
    for i in 0..psi.n_rows() {
        let x = psi.row(i).to_dense(psi.n_cols());
        phi = phi.max(phi_brute(&x, mu, k)?.0);
    }
    let lin: f64 = mu
        .iter()
        .zip(moments.tau.iter().zip(&moments.lambda))
        .map(|(m, (t, l))| -t * m + l * m.abs())
        .sum();
    Ok(1.0 + lin + phi)
}

/// |R_method − R*|.
pub fn average_error(r_method: f64, r_star: f64) -> f64 {
    (r_method - r_star).abs()
}
