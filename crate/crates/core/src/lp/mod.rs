//! Restricted MRC subproblems.
//!
//! The primal over constraints I and features J is
//!
//! ```text
//! min  −(τ−λ)_Jᵀμ1 + (τ+λ)_Jᵀμ2 + ν
//! s.t. F_{I,J}(μ1 − μ2) − ν ≤ b_I,   μ1, μ2 ≥ 0
//! ```
//!
//! and its dual is `max −b_Iᵀα` over `τ−λ ≤ F_{I,J}ᵀα ≤ τ+λ, 1ᵀα = 1, α ≥ 0`.
//! We hand the dual to the simplex: one column per constraint, one ranged
//! row per feature and a sum row. The primal variables are read back from
//! the row multipliers, so a single solve yields both solutions.

pub mod simplex;

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::time::Instant;

use crate::error::{MrcError, Result};
use crate::features::MomentEstimates;
use crate::oracle::{ConstraintId, PointStore};

pub use simplex::{Basis, LinearProgram, LpResult, LpStatus, SimplexOptions, VarStatus};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const DUALITY_GAP_TOL: f64 = 1e-8;

/// Extra primal rows appended to a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtraRow {
    /// The primal objective must be nonnegative:
    /// (τ−λ)ᵀμ1 − (τ+λ)ᵀμ2 − ν ≤ 0.
    Positivity,
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub constraints: Vec<ConstraintId>,
    pub features: Vec<usize>,
    /// Row i holds F_{i,J} with column positions into `features`.
    row_ptr: Vec<usize>,
    row_pos: Vec<u32>,
    row_val: Vec<f64>,
    pub b: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub extra_rows: Vec<ExtraRow>,
}

impl Subproblem {
    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Number of primal rows including extra rows.
    pub fn n_rows(&self) -> usize {
        self.constraints.len() + self.extra_rows.len()
    }

    /// Sparse F_{i,J} as (position in J, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.row_pos[a..b]
            .iter()
            .zip(&self.row_val[a..b])
            .map(|(&p, &v)| (p as usize, v))
    }

    fn has_positivity(&self) -> bool {
        self.extra_rows.contains(&ExtraRow::Positivity)
    }

    /// Primal objective at (μ1, μ2, ν).
    pub fn primal_objective(&self, mu1: &[f64], mu2: &[f64], nu: f64) -> f64 {
        let mut obj = nu;
        for j in 0..self.n_features() {
            obj += -(self.tau[j] - self.lambda[j]) * mu1[j] + (self.tau[j] + self.lambda[j]) * mu2[j];
        }
        obj
    }

    /// Largest primal row violation max(F_i μ − ν − b_i, extra rows), ≥ 0.
    pub fn primal_residual(&self, mu1: &[f64], mu2: &[f64], nu: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_constraints() {
            let lhs: f64 = self.row(i).map(|(p, v)| v * (mu1[p] - mu2[p])).sum();
            worst = worst.max(lhs - nu - self.b[i]);
        }
        if self.has_positivity() {
            worst = worst.max(-self.primal_objective(mu1, mu2, nu));
        }
        worst
    }

    /// Largest violation of the dual constraints by (α, β).
    pub fn dual_residual(&self, alpha: &[f64], beta: f64) -> f64 {
        let mut g = vec![0.0; self.n_features()];
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                for (p, v) in self.row(i) {
                    g[p] += a * v;
                }
            }
        }
        let scale = 1.0 - beta;
        let mut worst = (alpha.iter().sum::<f64>() + beta - 1.0).abs();
        for ((&gj, &t), &l) in g.iter().zip(&self.tau).zip(&self.lambda) {
            worst = worst.max((t - l) * scale - gj).max(gj - (t + l) * scale);
        }
        for &a in alpha {
            worst = worst.max(-a);
        }
        worst.max(-beta)
    }
}

/// Assembles P_{I,J}. `features` must hold distinct global indices in
/// increasing order.
pub fn build_subproblem(
    points: &PointStore<'_>,
    constraints: &[ConstraintId],
    features: &[usize],
    moments: &MomentEstimates,
    extra_rows: &[ExtraRow],
) -> Result<Subproblem> {
    if constraints.is_empty() {
        return Err(MrcError::Internal("subproblem has no constraints".into()));
    }
    let m = points.m();
    if moments.m() != m {
        return Err(MrcError::Shape(format!(
            "moments have {} features, points have {m}",
            moments.m()
        )));
    }
    let mut seen = HashSet::with_capacity(constraints.len());
    for id in constraints {
        if !seen.insert(id) {
            return Err(MrcError::Internal(format!("duplicate constraint {id:?}")));
        }
        if id.point >= points.n_points() {
            return Err(MrcError::Internal(format!("constraint {id:?} refers to a missing point")));
        }
    }
    if features.windows(2).any(|w| w[0] >= w[1]) || features.last().is_some_and(|&j| j >= m) {
        return Err(MrcError::Internal("feature set must be increasing and in range".into()));
    }

    // Global feature → position in J.
    let mut pos = vec![u32::MAX; m];
    for (p, &j) in features.iter().enumerate() {
        pos[j] = p as u32;
    }
    let d = points.d();
    let mut row_ptr = Vec::with_capacity(constraints.len() + 1);
    row_ptr.push(0);
    let mut row_pos = Vec::new();
    let mut row_val = Vec::new();
    let mut b = Vec::with_capacity(constraints.len());
    for id in constraints {
        let row = points.row(id.point);
        let inv = 1.0 / id.subset.len() as f64;
        for c in id.subset.labels() {
            for (&k, &v) in row.indices.iter().zip(row.values) {
                let p = pos[c * d + k as usize];
                if p != u32::MAX && v != 0.0 {
                    row_pos.push(p);
                    row_val.push(v * inv);
                }
            }
        }
        row_ptr.push(row_pos.len());
        b.push(id.subset.rhs());
    }
    let mut extra: Vec<ExtraRow> = Vec::new();
    for &e in extra_rows {
        if !extra.contains(&e) {
            extra.push(e);
        }
    }
    Ok(Subproblem {
        constraints: constraints.to_vec(),
        features: features.to_vec(),
        row_ptr,
        row_pos,
        row_val,
        b,
        tau: features.iter().map(|&j| moments.tau[j]).collect(),
        lambda: features.iter().map(|&j| moments.lambda[j]).collect(),
        extra_rows: extra,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub nu: f64,
    pub objective: f64,
}

impl PrimalSolution {
    /// μ1 − μ2 over J.
    pub fn mu(&self) -> Vec<f64> {
        self.mu1.iter().zip(&self.mu2).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Multiplier of the positivity row, 0 if absent.
    pub beta: f64,
    /// −b_Iᵀα.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RowKey {
    /// Ranged feature row, or its lower half in split form.
    Feature(usize),
    FeatureUpper(usize),
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ColKey {
    Alpha(usize),
    Beta,
}

/// Basis of a previous solve keyed by constraint and feature identity, so it
/// can seed a subproblem with a different I.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    alpha: HashMap<ConstraintId, VarStatus>,
    beta: Option<VarStatus>,
    rows: HashMap<RowKey, VarStatus>,
}

impl WarmStart {
    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub deadline: Option<Instant>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub primal: PrimalSolution,
    pub dual: DualSolution,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub warm_started: bool,
    pub warm_start: WarmStart,
}

struct Layout {
    rows: Vec<RowKey>,
    cols: Vec<ColKey>,
}

fn to_lp(sp: &Subproblem) -> (LinearProgram, Layout) {
    let nj = sp.n_features();
    let split = sp.has_positivity();
    let inf = f64::INFINITY;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut rows = Vec::new();
    for j in 0..nj {
        let (l, h) = (sp.tau[j] - sp.lambda[j], sp.tau[j] + sp.lambda[j]);
        if split {
            lo.push(l);
            hi.push(inf);
            rows.push(RowKey::Feature(j));
        } else {
            lo.push(l);
            hi.push(h);
            rows.push(RowKey::Feature(j));
        }
    }
    if split {
        for j in 0..nj {
            lo.push(-inf);
            hi.push(sp.tau[j] + sp.lambda[j]);
            rows.push(RowKey::FeatureUpper(j));
        }
    }
    let sum_row = rows.len();
    lo.push(1.0);
    hi.push(1.0);
    rows.push(RowKey::Sum);

    let mut lp = LinearProgram::new(lo, hi);
    let mut cols = Vec::with_capacity(sp.n_constraints() + 1);
    let mut entries = Vec::new();
    for i in 0..sp.n_constraints() {
        entries.clear();
        for (p, v) in sp.row(i) {
            entries.push((p, v));
            if split {
                entries.push((nj + p, v));
            }
        }
        entries.push((sum_row, 1.0));
        lp.add_column(sp.b[i], 0.0, inf, entries.iter().copied());
        cols.push(ColKey::Alpha(i));
    }
    if split {
        // Positivity multiplier β: Fᵀα + β(τ−λ) ≥ τ−λ, Fᵀα + β(τ+λ) ≤ τ+λ,
        // 1ᵀα + β = 1.
        let mut e: Vec<(usize, f64)> = Vec::with_capacity(2 * nj + 1);
        for j in 0..nj {
            e.push((j, sp.tau[j] - sp.lambda[j]));
        }
        for j in 0..nj {
            e.push((nj + j, sp.tau[j] + sp.lambda[j]));
        }
        e.push((sum_row, 1.0));
        lp.add_column(0.0, 0.0, inf, e);
        cols.push(ColKey::Beta);
    }
    (lp, Layout { rows, cols })
}

fn hint_basis(sp: &Subproblem, layout: &Layout, warm: &WarmStart) -> Option<Basis> {
    if warm.is_empty() {
        return None;
    }
    let n = layout.cols.len();
    let mut status = Vec::with_capacity(n + layout.rows.len());
    for c in &layout.cols {
        let st = match c {
            ColKey::Alpha(i) => warm.alpha.get(&sp.constraints[*i]).copied(),
            ColKey::Beta => warm.beta,
        };
        status.push(st.unwrap_or(VarStatus::AtLower));
    }
    for r in &layout.rows {
        let key = match r {
            RowKey::Feature(j) => RowKey::Feature(sp.features[*j]),
            RowKey::FeatureUpper(j) => RowKey::FeatureUpper(sp.features[*j]),
            RowKey::Sum => RowKey::Sum,
        };
        status.push(warm.rows.get(&key).copied().unwrap_or(VarStatus::Basic));
    }
    // Constraints dropped since the hint was taken may have been basic;
    // replace them by slacks of nonbasic rows.
    let m = layout.rows.len();
    let mut n_basic = status.iter().filter(|&&s| s == VarStatus::Basic).count();
    for st in &mut status[n..n + m] {
        if n_basic >= m {
            break;
        }
        if *st != VarStatus::Basic {
            *st = VarStatus::Basic;
            n_basic += 1;
        }
    }
    (n_basic == m).then_some(Basis { status })
}

fn keyed_basis(sp: &Subproblem, layout: &Layout, basis: &Basis) -> WarmStart {
    let n = layout.cols.len();
    let mut ws = WarmStart::default();
    for (c, &st) in layout.cols.iter().zip(&basis.status) {
        match c {
            ColKey::Alpha(i) => {
                ws.alpha.insert(sp.constraints[*i].clone(), st);
            }
            ColKey::Beta => ws.beta = Some(st),
        }
    }
    for (r, &st) in layout.rows.iter().zip(&basis.status[n..]) {
        let key = match r {
            RowKey::Feature(j) => RowKey::Feature(sp.features[*j]),
            RowKey::FeatureUpper(j) => RowKey::FeatureUpper(sp.features[*j]),
            RowKey::Sum => RowKey::Sum,
        };
        ws.rows.insert(key, st);
    }
    ws
}

/// Solves P_{I,J} and D_{I,J} together.
pub fn solve(sp: &Subproblem, warm: Option<&WarmStart>, opts: &SolveOptions) -> Result<Solution> {
    let (lp, layout) = to_lp(sp);
    let mut sopts = SimplexOptions {
        deadline: opts.deadline,
        ..Default::default()
    };
    if let Some(cap) = opts.max_iterations {
        sopts.max_iterations = cap;
    }
    let hint = warm.and_then(|w| hint_basis(sp, &layout, w));
    let res = simplex::solve(&lp, &sopts, hint.as_ref());
    match res.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(MrcError::Unbounded(format!(
                "{} constraints over {} features admit no dual point",
                sp.n_constraints(),
                sp.n_features()
            )))
        }
        LpStatus::Unbounded => return Err(MrcError::Numerical("dual LP reported unbounded".into())),
        LpStatus::IterationLimit => {
            return Err(MrcError::Numerical(format!(
                "simplex hit the iteration cap ({})",
                sopts.max_iterations
            )))
        }
        LpStatus::Singular => return Err(MrcError::Numerical("basis became singular".into())),
        LpStatus::TimeLimit => return Err(MrcError::TimeLimit(0.0)),
    }

    let nj = sp.n_features();
    let split = sp.has_positivity();
    let mut mu1 = vec![0.0; nj];
    let mut mu2 = vec![0.0; nj];
    for j in 0..nj {
        if split {
            mu1[j] = res.row_dual[j].max(0.0);
            mu2[j] = (-res.row_dual[nj + j]).max(0.0);
        } else {
            let y = res.row_dual[j];
            mu1[j] = y.max(0.0);
            mu2[j] = (-y).max(0.0);
        }
    }
    let nu = -res.row_dual[layout.rows.len() - 1];
    let objective = sp.primal_objective(&mu1, &mu2, nu);
    let alpha: Vec<f64> = res.x[..sp.n_constraints()].iter().map(|&a| a.max(0.0)).collect();
    let beta = if split { res.x[sp.n_constraints()].max(0.0) } else { 0.0 };
    let dual_objective = -alpha.iter().zip(&sp.b).map(|(a, b)| a * b).sum::<f64>();

    let duality_gap = (objective - dual_objective).abs();
    let primal_residual = sp.primal_residual(&mu1, &mu2, nu);
    let dual_residual = sp.dual_residual(&alpha, beta);
    if duality_gap > DUALITY_GAP_TOL {
        return Err(MrcError::Numerical(format!("duality gap {duality_gap:.3e}")));
    }
    if primal_residual > FEASIBILITY_TOL || dual_residual > FEASIBILITY_TOL {
        return Err(MrcError::Numerical(format!(
            "residuals primal {primal_residual:.3e}, dual {dual_residual:.3e}"
        )));
    }

    Ok(Solution {
        primal: PrimalSolution {
            mu1,
            mu2,
            nu,
            objective,
        },
        dual: DualSolution {
            alpha,
            beta,
            objective: dual_objective,
        },
        duality_gap,
        primal_residual,
        dual_residual,
        iterations: res.iterations,
        warm_started: res.warm_started,
        warm_start: keyed_basis(sp, &layout, &res.basis),
    })
}

/// Writes the primal subproblem in CPLEX LP format.
pub fn write_lp(sp: &Subproblem, mut w: impl Write) -> std::io::Result<()> {
    let term = |coef: f64, var: &str| -> String {
        if coef < 0.0 {
            format!(" - {} {var}", -coef)
        } else {
            format!(" + {coef} {var}")
        }
    };
    writeln!(w, "\\ restricted MRC primal: {} constraints, {} features", sp.n_constraints(), sp.n_features())?;
    writeln!(w, "Minimize")?;
    let mut line = String::from(" obj:");
    for (p, &j) in sp.features.iter().enumerate() {
        let (t, l) = (sp.tau[p], sp.lambda[p]);
        if t - l != 0.0 {
            line += &term(-(t - l), &format!("a{j}"));
        }
        if t + l != 0.0 {
            line += &term(t + l, &format!("b{j}"));
        }
    }
    line += " + nu";
    writeln!(w, "{line}")?;
    writeln!(w, "Subject To")?;
    for (i, id) in sp.constraints.iter().enumerate() {
        let mut line = format!(" c{}_{}:", id.point, id.subset.labels().iter().map(|c| c.to_string()).collect::<Vec<_>>().join("_"));
        for (p, v) in sp.row(i) {
            let j = sp.features[p];
            line += &term(v, &format!("a{j}"));
            line += &term(-v, &format!("b{j}"));
        }
        line += &format!(" - nu <= {}", sp.b[i]);
        writeln!(w, "{line}")?;
    }
    if sp.has_positivity() {
        let mut line = String::from(" positivity:");
        for (p, &j) in sp.features.iter().enumerate() {
            let (t, l) = (sp.tau[p], sp.lambda[p]);
            line += &term(t - l, &format!("a{j}"));
            line += &term(-(t + l), &format!("b{j}"));
        }
        line += " - nu <= 0";
        writeln!(w, "{line}")?;
    }
    writeln!(w, "Bounds")?;
    writeln!(w, " nu free")?;
    writeln!(w, "End")
}
