//! Separation oracles.
//!
//! One primal constraint of the MRC LP exists per (point, nonempty label
//! subset C). Its row is Σ_{y∈C} Φ(x, y)ᵀ / |C| and its right-hand side is
//! 1/|C| − 1. Rows are never materialized in bulk: a [`ConstraintId`]
//! addresses one and [`constraint_row`] expands it on demand.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::dataio::{RowView, SparseRows};
use crate::error::{MrcError, Result};

/// Label subsets for problems with at most this many classes are stored as
/// a 64-bit mask; larger problems use an explicit label list.
pub const MASK_CLASS_LIMIT: usize = 62;

/// Threshold below which a slack counts as "overly satisfied" for removal.
pub const TOL_REMOVE: f64 = 1e-12;

/// Violations at or below this level are treated as solver noise and never
/// trigger an addition, even when the configured threshold is zero.
pub const DEFAULT_VIOLATION_FLOOR: f64 = 1e-10;

/// A nonempty label subset C ⊆ Y (0-based labels).
///
/// `Mask` bit `l` is set iff label `l` is in C, so the mask equals the
/// integer code Σ_j c_j 2^{j−1} over 1-based labels. `Labels` holds the
/// members in ascending order and compares exactly like the equivalent
/// (arbitrarily wide) integer code.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum SubsetCode {
    Mask(u64),
    Labels(Box<[u32]>),
}

impl SubsetCode {
    /// Builds the subset for the given labels in a problem with `n_classes`
    /// classes. Labels need not be sorted; duplicates are rejected.
    pub fn from_labels(labels: &[usize], n_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(MrcError::Shape("label subset must be nonempty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(MrcError::Shape(format!("label {bad} out of range for {n_classes} classes")));
        }
        if n_classes <= MASK_CLASS_LIMIT {
            let mut mask = 0u64;
            for &l in labels {
                if mask & (1 << l) != 0 {
                    return Err(MrcError::Shape(format!("label {l} repeated in subset")));
                }
                mask |= 1 << l;
            }
            Ok(SubsetCode::Mask(mask))
        } else {
            let mut v: Vec<u32> = labels.iter().map(|&l| l as u32).collect();
            v.sort_unstable();
            if v.windows(2).any(|w| w[0] == w[1]) {
                return Err(MrcError::Shape("label repeated in subset".into()));
            }
            Ok(SubsetCode::Labels(v.into_boxed_slice()))
        }
    }

    /// Subset from a 1-based integer code (bit j−1 set ⇔ label j ∈ C).
    pub fn from_code(code: u64, n_classes: usize) -> Result<Self> {
        if code == 0 {
            return Err(MrcError::Shape("subset code 0 is the empty set".into()));
        }
        if n_classes < 64 && code >> n_classes != 0 {
            return Err(MrcError::Shape(format!("subset code {code} uses labels beyond {n_classes}")));
        }
        let labels: Vec<usize> = (0..64).filter(|b| code >> b & 1 == 1).collect();
        SubsetCode::from_labels(&labels, n_classes)
    }

    /// Integer code, when it fits in 64 bits.
    pub fn code(&self) -> Option<u64> {
        match self {
            SubsetCode::Mask(m) => Some(*m),
            SubsetCode::Labels(l) => {
                if l.last().is_some_and(|&x| x >= 64) {
                    None
                } else {
                    Some(l.iter().fold(0, |acc, &x| acc | 1 << x))
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SubsetCode::Mask(m) => m.count_ones() as usize,
            SubsetCode::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, label: usize) -> bool {
        match self {
            SubsetCode::Mask(m) => label < 64 && m >> label & 1 == 1,
            SubsetCode::Labels(l) => l.binary_search(&(label as u32)).is_ok(),
        }
    }

    /// Members in ascending order.
    pub fn labels(&self) -> Vec<usize> {
        match self {
            SubsetCode::Mask(m) => (0..64).filter(|b| m >> b & 1 == 1).collect(),
            SubsetCode::Labels(l) => l.iter().map(|&x| x as usize).collect(),
        }
    }

    /// Right-hand side 1/|C| − 1 of the constraint.
    pub fn rhs(&self) -> f64 {
        1.0 / self.len() as f64 - 1.0
    }

    /// Every nonempty subset of `n_classes` labels in code order.
    pub fn all(n_classes: usize) -> Result<Vec<SubsetCode>> {
        if n_classes == 0 || n_classes > MASK_CLASS_LIMIT {
            return Err(MrcError::Config(format!(
                "cannot enumerate all subsets of {n_classes} classes"
            )));
        }
        Ok((1..(1u64 << n_classes)).map(SubsetCode::Mask).collect())
    }

    pub fn full(n_classes: usize) -> Self {
        let all: Vec<usize> = (0..n_classes).collect();
        SubsetCode::from_labels(&all, n_classes).expect("valid labels")
    }
}

impl Ord for SubsetCode {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (SubsetCode::Mask(a), SubsetCode::Mask(b)) => a.cmp(b),
            _ => {
                // Integer comparison of bitsets: descending member lists
                // compared lexicographically.
                let a = self.labels();
                let b = other.labels();
                a.iter().rev().cmp(b.iter().rev())
            }
        }
    }
}

impl PartialOrd for SubsetCode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubsetCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.code() {
            Some(c) => write!(f, "SubsetCode({c})"),
            None => write!(f, "SubsetCode({:?})", self.labels()),
        }
    }
}

/// Addresses one primal constraint: a point of the [`PointStore`] and a
/// label subset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId {
    pub point: usize,
    pub subset: SubsetCode,
}

impl ConstraintId {
    pub fn new(point: usize, subset: SubsetCode) -> Self {
        ConstraintId { point, subset }
    }
}

/// A constraint or feature flagged by a scan together with its violation.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport<K> {
    pub id: K,
    pub violation: f64,
}

/// Embedded training points followed by auxiliary points (the class
/// centroids used for initialization). Only training points are scanned
/// for new constraints.
#[derive(Debug, Clone)]
pub struct PointStore<'a> {
    samples: &'a SparseRows,
    extra: SparseRows,
    n_classes: usize,
}

impl<'a> PointStore<'a> {
    pub fn new(samples: &'a SparseRows, n_classes: usize) -> Self {
        PointStore {
            samples,
            extra: SparseRows::new(samples.n_cols()),
            n_classes,
        }
    }

    /// Appends a dense auxiliary point and returns its index.
    pub fn push_extra(&mut self, psi: &[f64]) -> Result<usize> {
        if psi.len() != self.d() {
            return Err(MrcError::Shape("auxiliary point has wrong dimension".into()));
        }
        self.extra.push_dense(psi);
        Ok(self.n_points() - 1)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.n_rows()
    }

    pub fn n_points(&self) -> usize {
        self.samples.n_rows() + self.extra.n_rows()
    }

    pub fn d(&self) -> usize {
        self.samples.n_cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn m(&self) -> usize {
        self.d() * self.n_classes
    }

    #[inline]
    pub fn row(&self, point: usize) -> RowView<'_> {
        let n = self.samples.n_rows();
        if point < n {
            self.samples.row(point)
        } else {
            self.extra.row(point - n)
        }
    }

    /// v_y = Φ(x, y)ᵀμ for every class, with μ dense over all m features.
    #[inline]
    pub fn class_scores(&self, point: usize, mu: &[f64], out: &mut [f64]) {
        let row = self.row(point);
        let d = self.d();
        for (y, o) in out.iter_mut().enumerate() {
            *o = row.dot_offset(mu, y * d);
        }
    }

    /// F_i μ − ν − b_i for a single constraint.
    pub fn constraint_value(&self, id: &ConstraintId, mu: &[f64], nu: f64) -> f64 {
        let row = self.row(id.point);
        let d = self.d();
        let labels = id.subset.labels();
        let sum: f64 = labels.iter().map(|&y| row.dot_offset(mu, y * d)).sum();
        sum / labels.len() as f64 - nu - id.subset.rhs()
    }
}

/// Maximum over nonempty C of (Σ_{y∈C} v_y − 1)/|C| and an achieving subset.
///
/// Labels are visited in descending order of v (ties by ascending label)
/// and each is kept while the running value does not decrease, so the
/// result is always a prefix of that order.
pub fn max_violation_subset(v: &[f64]) -> Result<(f64, SubsetCode)> {
    if v.is_empty() {
        return Err(MrcError::Shape("score vector is empty".into()));
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    let (psi, k) = greedy_prefix(v, &mut order);
    Ok((psi, SubsetCode::from_labels(&order[..k], v.len())?))
}

/// Sorts `order` by descending score and returns (ψ, prefix length).
#[inline]
fn greedy_prefix(v: &[f64], order: &mut [usize]) -> (f64, usize) {
    order.sort_unstable_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut sum = v[order[0]];
    let mut psi = sum - 1.0;
    let mut k = 1;
    while k < order.len() {
        let cand_sum = sum + v[order[k]];
        let cand = (cand_sum - 1.0) / (k + 1) as f64;
        if cand >= psi {
            psi = cand;
            sum = cand_sum;
            k += 1;
        } else {
            break;
        }
    }
    (psi, k)
}

/// Row of one constraint restricted to the global features `features`,
/// together with its right-hand side 1/|C| − 1.
pub fn constraint_row(psi_x: &[f64], subset: &SubsetCode, features: &[usize]) -> (Vec<f64>, f64) {
    let d = psi_x.len();
    let inv = 1.0 / subset.len() as f64;
    let row = features
        .iter()
        .map(|&j| {
            let (class, k) = (j / d, j % d);
            if subset.contains(class) {
                psi_x[k] * inv
            } else {
                0.0
            }
        })
        .collect();
    (row, subset.rhs())
}

#[derive(Debug, Clone, Copy)]
pub struct PrimalScanParams {
    pub eps1: f64,
    pub n_max: usize,
    pub floor: f64,
    pub removal: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PrimalScan {
    pub add: Vec<ViolationReport<ConstraintId>>,
    pub remove: Vec<ConstraintId>,
    /// Largest violation over every constraint of every training sample,
    /// clamped at 0.
    pub max_violation: f64,
}

/// CONSTR: finds the most violated subset of each training sample and
/// selects up to `n_max` new constraints violated by at least `eps1`,
/// most violated first (ties by sample, then subset code).
///
/// `mu` is dense over all m features and zero outside the current feature set.
pub fn scan_primal(
    points: &PointStore<'_>,
    mu: &[f64],
    nu: f64,
    current: &[ConstraintId],
    current_set: &HashSet<ConstraintId>,
    params: PrimalScanParams,
) -> PrimalScan {
    let k = points.n_classes();
    let per_sample: Vec<(f64, usize, Vec<usize>)> = (0..points.n_samples())
        .into_par_iter()
        .map_init(
            || (vec![0.0; k], vec![0usize; k]),
            |(v, order), i| {
                points.class_scores(i, mu, v);
                for (o, y) in order.iter_mut().zip(0..) {
                    *o = y;
                }
                let (psi, len) = greedy_prefix(v, order);
                (psi + 1.0 - nu, i, order[..len].to_vec())
            },
        )
        .collect();

    let max_violation = per_sample
        .iter()
        .map(|(viol, ..)| *viol)
        .fold(0.0f64, f64::max);

    let threshold = params.eps1.max(0.0);
    let mut cands: Vec<ViolationReport<ConstraintId>> = per_sample
        .into_iter()
        .filter(|(viol, ..)| *viol >= threshold && *viol > params.floor)
        .filter_map(|(viol, i, labels)| {
            let id = ConstraintId::new(i, SubsetCode::from_labels(&labels, k).ok()?);
            (!current_set.contains(&id)).then_some(ViolationReport { id, violation: viol })
        })
        .collect();
    top_k(&mut cands, params.n_max, |a, b| {
        b.violation
            .total_cmp(&a.violation)
            .then_with(|| a.id.cmp(&b.id))
    });

    let remove = if params.removal {
        current
            .par_iter()
            .filter(|id| points.constraint_value(id, mu, nu) < -TOL_REMOVE)
            .cloned()
            .collect()
    } else {
        Vec::new()
    };

    PrimalScan {
        add: cands,
        remove,
        max_violation,
    }
}

fn top_k<T>(items: &mut Vec<T>, k: usize, cmp: impl Fn(&T, &T) -> Ordering) {
    if items.len() > k {
        if k == 0 {
            items.clear();
            return;
        }
        items.select_nth_unstable_by(k - 1, &cmp);
        items.truncate(k);
    }
    items.sort_unstable_by(cmp);
}

#[derive(Debug, Clone, Copy)]
pub struct DualScanParams {
    pub eps2: f64,
    pub m_max: usize,
    pub floor: f64,
    pub removal: bool,
}

#[derive(Debug, Clone, Default)]
pub struct DualScan {
    pub add: Vec<ViolationReport<usize>>,
    pub remove: Vec<usize>,
    /// Largest dual violation over all m features, clamped at 0.
    pub max_violation: f64,
}

/// g = F_{I,·}ᵀ α over all m features.
pub fn dual_activity(points: &PointStore<'_>, active: &[(ConstraintId, f64)]) -> Vec<f64> {
    let d = points.d();
    let mut g = vec![0.0; points.m()];
    for (id, alpha) in active {
        if *alpha == 0.0 {
            continue;
        }
        let row = points.row(id.point);
        let w = alpha / id.subset.len() as f64;
        for c in id.subset.labels() {
            let block = &mut g[c * d..(c + 1) * d];
            for (&k, &v) in row.indices.iter().zip(row.values) {
                block[k as usize] += w * v;
            }
        }
    }
    g
}

/// Dual constraint violation max((τ−λ)_j·s − g_j, g_j − (τ+λ)_j·s), which
/// is |g_j − τ_j| − λ_j when `scale` s = 1.
#[inline]
pub fn dual_violation(g: f64, tau: f64, lambda: f64, scale: f64) -> f64 {
    ((tau - lambda) * scale - g).max(g - (tau + lambda) * scale)
}

/// FEAT: selects up to `m_max` features outside the current set whose dual
/// constraint is violated by at least `eps2`, most violated first (ties by
/// feature index).
///
/// `active` lists the current constraints with their dual weights α.
/// `scale` is 1 − β where β is the weight of the objective-positivity row
/// (1 when that row is absent).
#[allow(clippy::too_many_arguments)]
pub fn scan_dual(
    points: &PointStore<'_>,
    active: &[(ConstraintId, f64)],
    scale: f64,
    tau: &[f64],
    lambda: &[f64],
    in_features: &[bool],
    params: DualScanParams,
) -> DualScan {
    let g = dual_activity(points, active);
    scan_dual_activity(&g, scale, tau, lambda, in_features, params)
}

/// [`scan_dual`] on a precomputed activity vector g = Fᵀα.
pub fn scan_dual_activity(
    g: &[f64],
    scale: f64,
    tau: &[f64],
    lambda: &[f64],
    in_features: &[bool],
    params: DualScanParams,
) -> DualScan {
    let viol: Vec<f64> = g
        .par_iter()
        .zip(tau.par_iter().zip(lambda))
        .map(|(&g, (&t, &l))| dual_violation(g, t, l, scale))
        .collect();
    let max_violation = viol.iter().copied().fold(0.0f64, f64::max);
    let threshold = params.eps2.max(0.0);
    let mut add: Vec<ViolationReport<usize>> = viol
        .iter()
        .enumerate()
        .filter(|&(j, &v)| !in_features[j] && v >= threshold && v > params.floor)
        .map(|(j, &v)| ViolationReport { id: j, violation: v })
        .collect();
    top_k(&mut add, params.m_max, |a, b| {
        b.violation.total_cmp(&a.violation).then(a.id.cmp(&b.id))
    });
    let remove = if params.removal {
        viol.iter()
            .enumerate()
            .filter(|&(j, &v)| in_features[j] && v < -TOL_REMOVE)
            .map(|(j, _)| j)
            .collect()
    } else {
        Vec::new()
    };
    DualScan {
        add,
        remove,
        max_violation,
    }
}
