//! Bounded-variable revised simplex.
//!
//! Solves
//!
//! ```text
//! min cᵀx  s.t.  row_lower ≤ A x ≤ row_upper,  col_lower ≤ x ≤ col_upper
//! ```
//!
//! Each row gets a slack `s_i = a_iᵀx` carrying the row bounds, so the
//! working system is `A x − s = 0` with every bound on a variable. The basis
//! inverse is kept explicitly (column-major) and updated in product form.
//! It is rebuilt when the primal residual drifts or after `refactor_every`
//! updates; basic slacks are eliminated first so only the structural block
//! is inverted densely.
//!
//! Phase 1 minimizes the sum of bound infeasibilities of the basic
//! variables, stopping each step at the first breakpoint. Pricing is Devex;
//! in phase 2 reduced costs are updated from the pivot row instead of being
//! recomputed. After `stall_threshold` consecutive degenerate pivots pricing
//! falls back to Bland's rule until the objective moves again.

use std::time::Instant;

use rayon::prelude::*;

const PAR_THRESHOLD: usize = 256;

/// Pivots between primal residual checks.
const DRIFT_CHECK_EVERY: usize = 50;
const DRIFT_TOL: f64 = 1e-10;
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
    /// The basis became numerically singular.
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Statuses of all structural variables followed by all row slacks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub stall_threshold: usize,
    pub deadline: Option<Instant>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 1_000_000,
            feasibility_tol: 1e-10,
            optimality_tol: 1e-10,
            pivot_tol: 1e-9,
            refactor_every: 1000,
            stall_threshold: 200,
            deadline: None,
        }
    }
}

/// LP in column-wise sparse storage.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl LinearProgram {
    pub fn new(row_lower: Vec<f64>, row_upper: Vec<f64>) -> Self {
        assert_eq!(row_lower.len(), row_upper.len());
        LinearProgram {
            row_lower,
            row_upper,
            col_ptr: vec![0],
            ..Default::default()
        }
    }

    /// Appends a column given as (row, value) entries and returns its index.
    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64, entries: impl IntoIterator<Item = (usize, f64)>) -> usize {
        for (r, v) in entries {
            debug_assert!(r < self.n_rows());
            if v != 0.0 {
                self.row_idx.push(r as u32);
                self.values.push(v);
            }
        }
        self.col_ptr.push(self.row_idx.len());
        self.cost.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.cost.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cost.len()
    }

    #[inline]
    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    /// A x.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.n_rows()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let (rows, vals) = self.column(j);
                for (&r, &v) in rows.iter().zip(vals) {
                    act[r as usize] += v * xj;
                }
            }
        }
        act
    }
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    /// Row multipliers y: ∂(optimal value)/∂(active row bound).
    pub row_dual: Vec<f64>,
    /// c − Aᵀy for the structural columns.
    pub reduced_cost: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
    pub warm_started: bool,
}

/// Solves `lp`, optionally starting from `warm`. A warm basis that is
/// malformed, singular or primal infeasible is ignored.
pub fn solve(lp: &LinearProgram, opts: &SimplexOptions, warm: Option<&Basis>) -> LpResult {
    let mut s = Simplex::new(lp, opts);
    let warm_started = warm.is_some_and(|b| s.install(b));
    if !warm_started {
        s.cold_start();
    }
    let status = s.run();
    s.result(status, warm_started)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum Step {
    Flip(f64),
    /// `bound` is the value the leaving variable settles at.
    Pivot { row: usize, theta: f64, bound: f64 },
    Unbounded,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    opts: &'a SimplexOptions,
    n: usize,
    m: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    /// Column-major B⁻¹: element (i, j) at `binv[j * m + i]`.
    binv: Vec<f64>,
    /// Reduced costs of the nonbasic variables in the current phase.
    d: Vec<f64>,
    /// Devex reference weights.
    weights: Vec<f64>,
    /// Row-wise copy of A for sparse pivot rows.
    row_ptr: Vec<usize>,
    row_cols: Vec<u32>,
    row_vals: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, opts: &'a SimplexOptions) -> Self {
        let n = lp.n_cols();
        let m = lp.n_rows();
        let mut lb = lp.col_lower.clone();
        lb.extend_from_slice(&lp.row_lower);
        let mut ub = lp.col_upper.clone();
        ub.extend_from_slice(&lp.row_upper);
        let mut row_ptr = vec![0usize; m + 1];
        for &r in &lp.row_idx {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..m {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut next = row_ptr.clone();
        let mut row_cols = vec![0u32; lp.row_idx.len()];
        let mut row_vals = vec![0.0; lp.row_idx.len()];
        for j in 0..n {
            let (rows, vals) = lp.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                let at = &mut next[r as usize];
                row_cols[*at] = j as u32;
                row_vals[*at] = v;
                *at += 1;
            }
        }
        Simplex {
            lp,
            opts,
            n,
            m,
            lb,
            ub,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::with_capacity(m),
            binv: Vec::new(),
            d: vec![0.0; n + m],
            weights: vec![1.0; n + m],
            row_ptr,
            row_cols,
            row_vals,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn nonbasic_status(&self, k: usize, prefer_upper: bool) -> VarStatus {
        match (self.lb[k].is_finite(), self.ub[k].is_finite()) {
            (true, true) if prefer_upper => VarStatus::AtUpper,
            (true, _) => VarStatus::AtLower,
            (false, true) => VarStatus::AtUpper,
            (false, false) => VarStatus::Zero,
        }
    }

    fn nonbasic_value(&self, k: usize) -> f64 {
        match self.status[k] {
            VarStatus::AtLower => self.lb[k],
            VarStatus::AtUpper => self.ub[k],
            _ => 0.0,
        }
    }

    fn cold_start(&mut self) {
        for k in 0..self.n {
            self.status[k] = self.nonbasic_status(k, false);
            self.x[k] = self.nonbasic_value(k);
        }
        self.head.clear();
        for i in 0..self.m {
            self.status[self.n + i] = VarStatus::Basic;
            self.head.push(self.n + i);
        }
        // B = −I
        let m = self.m;
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        self.recompute_basic();
        self.since_refactor = 0;
    }

    fn install(&mut self, basis: &Basis) -> bool {
        if basis.status.len() != self.n + self.m {
            return false;
        }
        let n_basic = basis.status.iter().filter(|&&s| s == VarStatus::Basic).count();
        if n_basic != self.m {
            return false;
        }
        self.head.clear();
        for (k, &st) in basis.status.iter().enumerate() {
            self.status[k] = match st {
                VarStatus::Basic => {
                    self.head.push(k);
                    VarStatus::Basic
                }
                VarStatus::AtUpper if self.ub[k].is_finite() => VarStatus::AtUpper,
                VarStatus::AtLower if self.lb[k].is_finite() => VarStatus::AtLower,
                other => self.nonbasic_status(k, other == VarStatus::AtUpper),
            };
            if self.status[k] != VarStatus::Basic {
                self.x[k] = self.nonbasic_value(k);
            }
        }
        if !self.refactor() {
            return false;
        }
        self.recompute_basic();
        self.max_infeasibility() <= self.opts.feasibility_tol
    }

    #[inline]
    fn for_column(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        if k < self.n {
            let (rows, vals) = self.lp.column(k);
            for (&r, &v) in rows.iter().zip(vals) {
                f(r as usize, v);
            }
        } else {
            f(k - self.n, -1.0);
        }
    }

    #[inline]
    fn column_dot(&self, k: usize, y: &[f64]) -> f64 {
        if k < self.n {
            let (rows, vals) = self.lp.column(k);
            rows.iter().zip(vals).map(|(&r, &v)| v * y[r as usize]).sum()
        } else {
            -y[k - self.n]
        }
    }

    /// Rebuilds B⁻¹ from scratch. Returns false if B is singular.
    ///
    /// With rows P pinned by basic slacks and structural columns S on the
    /// remaining rows Q, B⁻¹ e_j for j ∈ Q is K e_j on S (K = A_QS⁻¹) plus
    /// A_PS K e_j on the slack positions, and −e at the slack's position for
    /// j ∈ P.
    fn refactor(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        let mut slack_pos = vec![usize::MAX; m];
        let mut structural = Vec::new();
        for (c, &k) in self.head.iter().enumerate() {
            if k >= n {
                slack_pos[k - n] = c;
            } else {
                structural.push(c);
            }
        }
        let q_rows: Vec<usize> = (0..m).filter(|&i| slack_pos[i] == usize::MAX).collect();
        let s = structural.len();
        if q_rows.len() != s {
            return false;
        }
        let mut q_index = vec![usize::MAX; m];
        for (u, &i) in q_rows.iter().enumerate() {
            q_index[i] = u;
        }
        let mut a = vec![0.0; s * s];
        for (t, &c) in structural.iter().enumerate() {
            let (rows, vals) = self.lp.column(self.head[c]);
            for (&r, &v) in rows.iter().zip(vals) {
                let u = q_index[r as usize];
                if u != usize::MAX {
                    a[u * s + t] = v;
                }
            }
        }
        let Some(k_inv) = dense_inverse(a, s) else {
            return false;
        };
        let lp = self.lp;
        let head = &self.head;
        let fill = |j: usize, col: &mut [f64]| {
            col.iter_mut().for_each(|v| *v = 0.0);
            let u = q_index[j];
            if u == usize::MAX {
                col[slack_pos[j]] = -1.0;
                return;
            }
            for (t, &c) in structural.iter().enumerate() {
                let z = k_inv[t * s + u];
                if z != 0.0 {
                    col[c] += z;
                    let (rows, vals) = lp.column(head[c]);
                    for (&r, &v) in rows.iter().zip(vals) {
                        let p = slack_pos[r as usize];
                        if p != usize::MAX {
                            col[p] += z * v;
                        }
                    }
                }
            }
        };
        let mut binv = std::mem::take(&mut self.binv);
        binv.resize(m * m, 0.0);
        if m >= PAR_THRESHOLD {
            binv.par_chunks_mut(m).enumerate().for_each(|(j, col)| fill(j, col));
        } else {
            binv.chunks_mut(m).enumerate().for_each(|(j, col)| fill(j, col));
        }
        self.binv = binv;
        self.since_refactor = 0;
        true
    }

    /// max_i |a_iᵀx − s_i|.
    fn drift(&self) -> f64 {
        let act = self.lp.row_activity(&self.x[..self.n]);
        act.iter().zip(&self.x[self.n..]).map(|(a, s)| (a - s).abs()).fold(0.0, f64::max)
    }

    /// x_B = −B⁻¹ N x_N.
    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for k in 0..self.n + m {
            if self.status[k] != VarStatus::Basic {
                let xk = self.x[k];
                if xk != 0.0 {
                    self.for_column(k, |r, v| rhs[r] -= v * xk);
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &ri) in rhs.iter().enumerate() {
            if ri != 0.0 {
                let col = &self.binv[i * m..(i + 1) * m];
                for (x, b) in xb.iter_mut().zip(col) {
                    *x += b * ri;
                }
            }
        }
        for (r, &k) in self.head.iter().enumerate() {
            self.x[k] = xb[r];
        }
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let v = self.x[k];
        (self.lb[k] - v).max(v - self.ub[k]).max(0.0)
    }

    fn max_infeasibility(&self) -> f64 {
        self.head.iter().map(|&k| self.infeasibility(k)).fold(0.0, f64::max)
    }

    fn phase_cost(&self, k: usize, phase: Phase) -> f64 {
        match phase {
            Phase::Two => {
                if k < self.n {
                    self.lp.cost[k]
                } else {
                    0.0
                }
            }
            Phase::One => {
                if self.status[k] != VarStatus::Basic {
                    0.0
                } else {
                    let tol = self.opts.feasibility_tol;
                    if self.x[k] < self.lb[k] - tol {
                        -1.0
                    } else if self.x[k] > self.ub[k] + tol {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        }
    }

    /// y = B⁻ᵀ c_B.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let dot = |j: usize| -> f64 {
            self.binv[j * m..(j + 1) * m]
                .iter()
                .zip(cb)
                .map(|(b, c)| b * c)
                .sum()
        };
        if m >= PAR_THRESHOLD {
            (0..m).into_par_iter().map(dot).collect()
        } else {
            (0..m).map(dot).collect()
        }
    }

    /// B⁻¹ a_k.
    fn ftran(&self, k: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        self.for_column(k, |r, v| {
            for (o, b) in out.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                *o += b * v;
            }
        });
        out
    }

    fn compute_reduced_costs(&mut self, phase: Phase) {
        let cb: Vec<f64> = self.head.iter().map(|&k| self.phase_cost(k, phase)).collect();
        let y = self.btran(&cb);
        let mut d = std::mem::take(&mut self.d);
        let eval = |(k, dk): (usize, &mut f64)| {
            *dk = if self.status[k] == VarStatus::Basic {
                0.0
            } else {
                self.phase_cost(k, phase) - self.column_dot(k, &y)
            };
        };
        if d.len() >= 4 * PAR_THRESHOLD {
            d.par_iter_mut().enumerate().for_each(eval);
        } else {
            d.iter_mut().enumerate().for_each(eval);
        }
        self.d = d;
    }

    /// Entering variable and direction (+1 increase, −1 decrease).
    fn price(&self) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let eval = |k: usize| -> Option<(usize, f64, f64)> {
            let st = self.status[k];
            if st == VarStatus::Basic || self.lb[k] == self.ub[k] {
                return None;
            }
            let d = self.d[k];
            let dir = match st {
                VarStatus::AtLower if d < -tol => 1.0,
                VarStatus::AtUpper if d > tol => -1.0,
                VarStatus::Zero if d.abs() > tol => -d.signum(),
                _ => return None,
            };
            Some((k, dir, d * d / self.weights[k]))
        };
        let total = self.n + self.m;
        if self.bland {
            return (0..total).find_map(eval).map(|(k, dir, _)| (k, dir));
        }
        let better = |a: (usize, f64, f64), b: (usize, f64, f64)| {
            if b.2 > a.2 || (b.2 == a.2 && b.0 < a.0) {
                b
            } else {
                a
            }
        };
        let best = if total >= 4 * PAR_THRESHOLD {
            (0..total)
                .into_par_iter()
                .filter_map(eval)
                .reduce_with(better)
        } else {
            (0..total).filter_map(eval).reduce(better)
        };
        best.map(|(k, dir, _)| (k, dir))
    }

    /// Row `row` of B⁻¹N over all variables (basic entries are junk).
    fn pivot_row(&self, row: usize) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let rho: Vec<f64> = (0..m).map(|j| self.binv[j * m + row]).collect();
        let nnz = rho.iter().filter(|v| **v != 0.0).count();
        let mut out = vec![0.0; n + m];
        if 3 * nnz < m {
            for (i, &r) in rho.iter().enumerate() {
                if r != 0.0 {
                    for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                        out[self.row_cols[t] as usize] += r * self.row_vals[t];
                    }
                    out[n + i] = -r;
                }
            }
        } else {
            let eval = |(k, o): (usize, &mut f64)| {
                if self.status[k] != VarStatus::Basic {
                    *o = self.column_dot(k, &rho);
                }
            };
            if out.len() >= 4 * PAR_THRESHOLD {
                out.par_iter_mut().enumerate().for_each(eval);
            } else {
                out.iter_mut().enumerate().for_each(eval);
            }
        }
        out
    }

    /// Devex weights and reduced costs after `q` enters at `row`, assuming
    /// no other basic cost changes. Must run before the inverse is updated.
    fn update_pricing(&mut self, q: usize, row: usize, alpha_q: f64, phase: Phase) {
        let alpha_r = self.pivot_row(row);
        let dq = self.d[q];
        let wq = self.weights[q];
        let leaving = self.head[row];
        let c_old = self.phase_cost(leaving, phase);
        let c_new = if phase == Phase::Two { c_old } else { 0.0 };
        for (k, &a) in alpha_r.iter().enumerate() {
            if a == 0.0 || k == q || self.status[k] == VarStatus::Basic {
                continue;
            }
            let ratio = a / alpha_q;
            self.d[k] -= dq * ratio;
            self.weights[k] = self.weights[k].max(ratio * ratio * wq);
        }
        self.d[leaving] = c_new - c_old - dq / alpha_q;
        self.d[q] = 0.0;
        self.weights[leaving] = (wq / (alpha_q * alpha_q)).max(1.0);
    }

    /// Bounds a basic variable must respect along the step in the given phase.
    fn step_bounds(&self, k: usize, phase: Phase) -> (f64, f64) {
        let (lb, ub) = (self.lb[k], self.ub[k]);
        if phase == Phase::One {
            let tol = self.opts.feasibility_tol;
            let v = self.x[k];
            if v < lb - tol {
                // Below: may rise up to lb (breakpoint), unrestricted downwards.
                return (f64::NEG_INFINITY, lb);
            }
            if v > ub + tol {
                return (ub, f64::INFINITY);
            }
        }
        (lb, ub)
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase: Phase) -> Step {
        let tol = self.opts.feasibility_tol;
        let ptol = self.opts.pivot_tol;
        let flip = if self.lb[q].is_finite() && self.ub[q].is_finite() {
            self.ub[q] - self.lb[q]
        } else {
            f64::INFINITY
        };

        // Pass 1: relaxed bound.
        let mut theta_max = f64::INFINITY;
        for (r, &a) in alpha.iter().enumerate() {
            if a.abs() < ptol {
                continue;
            }
            let k = self.head[r];
            let delta = -dir * a;
            let (lo, hi) = self.step_bounds(k, phase);
            let v = self.x[k];
            let relaxed = if delta > 0.0 && hi.is_finite() {
                (hi - v + tol) / delta
            } else if delta < 0.0 && lo.is_finite() {
                (v - lo + tol) / -delta
            } else {
                continue;
            };
            theta_max = theta_max.min(relaxed);
        }
        if theta_max == f64::INFINITY && flip == f64::INFINITY {
            return Step::Unbounded;
        }
        if flip <= theta_max {
            return Step::Flip(flip);
        }

        // Pass 2: among rows within the relaxed bound pick the largest pivot
        // (Bland: smallest variable index at the minimum exact ratio).
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (r, &a) in alpha.iter().enumerate() {
            if a.abs() < ptol {
                continue;
            }
            let k = self.head[r];
            let delta = -dir * a;
            let (lo, hi) = self.step_bounds(k, phase);
            let v = self.x[k];
            let (exact, bound) = if delta > 0.0 && hi.is_finite() {
                ((hi - v) / delta, hi)
            } else if delta < 0.0 && lo.is_finite() {
                ((v - lo) / -delta, lo)
            } else {
                continue;
            };
            if exact > theta_max {
                continue;
            }
            let exact = exact.max(0.0);
            let replace = match best {
                None => true,
                Some((br, bt, _, ba)) => {
                    if self.bland {
                        exact < bt - 1e-15 || (exact <= bt + 1e-15 && k < self.head[br])
                    } else {
                        a.abs() > ba
                    }
                }
            };
            if replace {
                best = Some((r, exact, bound, a.abs()));
            }
        }
        match best {
            Some((row, theta, bound, _)) => Step::Pivot { row, theta, bound },
            None => Step::Flip(flip),
        }
    }

    fn apply(&mut self, q: usize, dir: f64, alpha: &[f64], step: Step) -> f64 {
        let theta = match step {
            Step::Flip(t) | Step::Pivot { theta: t, .. } => t,
            Step::Unbounded => unreachable!(),
        };
        if theta != 0.0 {
            self.x[q] += dir * theta;
            for (r, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let k = self.head[r];
                    self.x[k] -= dir * a * theta;
                }
            }
        }
        match step {
            Step::Flip(_) => {
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q);
            }
            Step::Pivot { row, bound, .. } => {
                let leaving = self.head[row];
                self.status[leaving] = if bound == self.ub[leaving] && bound != self.lb[leaving] {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.x[leaving] = self.nonbasic_value(leaving);
                self.status[q] = VarStatus::Basic;
                self.head[row] = q;
                self.pivot_inverse(row, alpha);
            }
            Step::Unbounded => unreachable!(),
        }
        theta
    }

    fn pivot_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let update = |col: &mut [f64]| {
            let t = col[r] / ar;
            if t != 0.0 {
                for (c, a) in col.iter_mut().zip(alpha) {
                    *c -= a * t;
                }
            }
            col[r] = t;
        };
        if m >= PAR_THRESHOLD {
            self.binv.par_chunks_mut(m).for_each(update);
        } else {
            self.binv.chunks_mut(m).for_each(update);
        }
        self.since_refactor += 1;
    }

    fn run(&mut self) -> LpStatus {
        let mut phase = if self.max_infeasibility() > self.opts.feasibility_tol {
            Phase::One
        } else {
            Phase::Two
        };
        let mut fresh = self.since_refactor == 0;
        let mut d_valid = false;
        let mut restarts = 0;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.iterations.is_multiple_of(64) {
                if let Some(dl) = self.opts.deadline {
                    if Instant::now() >= dl {
                        return LpStatus::TimeLimit;
                    }
                }
            }
            let due = self.since_refactor >= self.opts.refactor_every
                || (self.since_refactor > 0 && self.since_refactor.is_multiple_of(DRIFT_CHECK_EVERY) && self.drift() > DRIFT_TOL);
            if due {
                if !self.refactor() {
                    return LpStatus::Singular;
                }
                self.recompute_basic();
                fresh = true;
                d_valid = false;
            }

            if !d_valid {
                self.compute_reduced_costs(phase);
                d_valid = true;
            }
            let Some((q, dir)) = self.price() else {
                d_valid = false;
                if !fresh {
                    if !self.refactor() {
                        return LpStatus::Singular;
                    }
                    self.recompute_basic();
                    fresh = true;
                    continue;
                }
                let infeas = self.max_infeasibility();
                match phase {
                    Phase::One if infeas <= self.opts.feasibility_tol => {
                        phase = Phase::Two;
                        self.bland = false;
                        self.degenerate_run = 0;
                        continue;
                    }
                    Phase::One => return LpStatus::Infeasible,
                    Phase::Two if infeas > self.opts.feasibility_tol => {
                        restarts += 1;
                        if restarts > 20 {
                            return LpStatus::Singular;
                        }
                        phase = Phase::One;
                        continue;
                    }
                    Phase::Two => return LpStatus::Optimal,
                }
            };

            let alpha = self.ftran(q);
            let step = self.ratio_test(q, dir, &alpha, phase);
            if matches!(step, Step::Unbounded) {
                if phase == Phase::Two {
                    return LpStatus::Unbounded;
                }
                // Phase 1 directions are always bounded by a breakpoint;
                // an unbounded one means the factorization drifted.
                if fresh {
                    return LpStatus::Singular;
                }
                if !self.refactor() {
                    return LpStatus::Singular;
                }
                self.recompute_basic();
                fresh = true;
                d_valid = false;
                continue;
            }
            if let Step::Pivot { row, .. } = step {
                if alpha[row].abs() < self.opts.pivot_tol {
                    return LpStatus::Singular;
                }
                self.update_pricing(q, row, alpha[row], phase);
            }
            let pivot_row = match step {
                Step::Pivot { row, .. } => Some(row),
                _ => None,
            };
            let costs_before: Vec<f64> = if phase == Phase::One {
                self.head.iter().map(|&k| self.phase_cost(k, phase)).collect()
            } else {
                Vec::new()
            };
            let theta = self.apply(q, dir, &alpha, step);
            if phase == Phase::One {
                // The incremental update assumed every other basic kept its
                // phase 1 cost (and q entered feasible).
                let stale = self.head.iter().enumerate().any(|(r, &k)| {
                    let before = if Some(r) == pivot_row { 0.0 } else { costs_before[r] };
                    self.phase_cost(k, phase) != before
                });
                if stale {
                    d_valid = false;
                }
            }
            self.iterations += 1;
            fresh = false;

            if theta <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= self.opts.stall_threshold {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }
    }

    fn result(&mut self, status: LpStatus, warm_started: bool) -> LpResult {
        let n = self.n;
        let m = self.m;
        let y = if status == LpStatus::Optimal {
            let cb: Vec<f64> = self.head.iter().map(|&k| self.phase_cost(k, Phase::Two)).collect();
            self.btran(&cb)
        } else {
            vec![0.0; m]
        };
        let reduced_cost = (0..n).map(|k| self.lp.cost[k] - self.column_dot(k, &y)).collect();
        let x = self.x[..n].to_vec();
        let objective = x.iter().zip(&self.lp.cost).map(|(a, c)| a * c).sum();
        LpResult {
            status,
            row_activity: self.lp.row_activity(&x),
            x,
            row_dual: y,
            reduced_cost,
            objective,
            iterations: self.iterations,
            basis: Basis {
                status: self.status.clone(),
            },
            warm_started,
        }
    }
}

/// Gauss–Jordan inverse with partial pivoting of a row-major s×s matrix.
fn dense_inverse(mut a: Vec<f64>, s: usize) -> Option<Vec<f64>> {
    let mut swaps = Vec::new();
    let mut pivot_row = vec![0.0; s];
    for c in 0..s {
        let p = (c..s).max_by(|&i, &j| a[i * s + c].abs().total_cmp(&a[j * s + c].abs()))?;
        let piv = a[p * s + c];
        if piv.abs() < SINGULAR_TOL {
            return None;
        }
        if p != c {
            for col in 0..s {
                a.swap(p * s + col, c * s + col);
            }
            swaps.push((c, p));
        }
        let inv_piv = 1.0 / piv;
        a[c * s + c] = 1.0;
        for v in &mut a[c * s..(c + 1) * s] {
            *v *= inv_piv;
        }
        pivot_row.copy_from_slice(&a[c * s..(c + 1) * s]);
        let eliminate = |(i, row): (usize, &mut [f64])| {
            if i == c {
                return;
            }
            let f = row[c];
            if f != 0.0 {
                row[c] = 0.0;
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
            }
        };
        if s >= PAR_THRESHOLD {
            a.par_chunks_mut(s).enumerate().for_each(eliminate);
        } else {
            a.chunks_mut(s).enumerate().for_each(eliminate);
        }
    }
    // Row swaps of A become column swaps of A⁻¹, undone in reverse.
    for &(c, p) in swaps.iter().rev() {
        for row in a.chunks_mut(s) {
            row.swap(c, p);
        }
    }
    Some(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn single_lower_bounded_row() {
        // min x  s.t. x ≥ 1
        let mut lp = LinearProgram::new(vec![1.0], vec![INF]);
        lp.add_column(1.0, -INF, INF, [(0, 1.0)]);
        let r = solve(&lp, &SimplexOptions::default(), None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-12);
        assert!((r.row_dual[0] - 1.0).abs() < 1e-12);
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ray() {
        // min −x, x ≥ 0, one free row
        let mut lp = LinearProgram::new(vec![-INF], vec![INF]);
        lp.add_column(-1.0, 0.0, INF, [(0, 1.0)]);
        let r = solve(&lp, &SimplexOptions::default(), None);
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_rows() {
        // x ≤ 1 and x ≥ 2
        let mut lp = LinearProgram::new(vec![-INF, 2.0], vec![1.0, INF]);
        lp.add_column(0.0, 0.0, INF, [(0, 1.0), (1, 1.0)]);
        let r = solve(&lp, &SimplexOptions::default(), None);
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y  s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → (2, 6), 36
        let mut lp = LinearProgram::new(vec![-INF; 3], vec![4.0, 12.0, 18.0]);
        lp.add_column(-3.0, 0.0, INF, [(0, 1.0), (2, 3.0)]);
        lp.add_column(-5.0, 0.0, INF, [(1, 2.0), (2, 2.0)]);
        let r = solve(&lp, &SimplexOptions::default(), None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 36.0).abs() < 1e-10);
        assert!((r.x[0] - 2.0).abs() < 1e-10 && (r.x[1] - 6.0).abs() < 1e-10);
        // Shadow prices of the binding rows: 0, −1.5, −1.
        assert!(r.row_dual[0].abs() < 1e-10);
        assert!((r.row_dual[1] + 1.5).abs() < 1e-10);
        assert!((r.row_dual[2] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn boxed_variables_flip() {
        // min −x − y, 0 ≤ x, y ≤ 1, x + y ≤ 5 → both at upper bound.
        let mut lp = LinearProgram::new(vec![-INF], vec![5.0]);
        lp.add_column(-1.0, 0.0, 1.0, [(0, 1.0)]);
        lp.add_column(-1.0, 0.0, 1.0, [(0, 1.0)]);
        let r = solve(&lp, &SimplexOptions::default(), None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.x, vec![1.0, 1.0]);
    }

    #[test]
    fn equality_and_ranged_rows() {
        // min x + 2y, x + y = 1, 0.2 ≤ y ≤ 0.6 via a ranged row
        let mut lp = LinearProgram::new(vec![1.0, 0.2], vec![1.0, 0.6]);
        lp.add_column(1.0, 0.0, INF, [(0, 1.0)]);
        lp.add_column(2.0, 0.0, INF, [(0, 1.0), (1, 1.0)]);
        let r = solve(&lp, &SimplexOptions::default(), None);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 0.8).abs() < 1e-12 && (r.x[1] - 0.2).abs() < 1e-12);
        assert!((r.objective - 1.2).abs() < 1e-12);
    }

    #[test]
    fn warm_start_reuses_basis() {
        let mut lp = LinearProgram::new(vec![-INF; 3], vec![4.0, 12.0, 18.0]);
        lp.add_column(-3.0, 0.0, INF, [(0, 1.0), (2, 3.0)]);
        lp.add_column(-5.0, 0.0, INF, [(1, 2.0), (2, 2.0)]);
        let cold = solve(&lp, &SimplexOptions::default(), None);
        let warm = solve(&lp, &SimplexOptions::default(), Some(&cold.basis));
        assert!(warm.warm_started);
        assert_eq!(warm.iterations, 0);
        assert!((warm.objective - cold.objective).abs() < 1e-12);

        let bogus = Basis { status: vec![VarStatus::Basic; 5] };
        let r = solve(&lp, &SimplexOptions::default(), Some(&bogus));
        assert!(!r.warm_started);
        assert!((r.objective - cold.objective).abs() < 1e-12);
    }

    #[test]
    fn dense_inverse_with_pivoting() {
        // Zero leading entry forces a row swap.
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let inv = dense_inverse(a.clone(), 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(dense_inverse(vec![1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn iteration_cap() {
        let mut lp = LinearProgram::new(vec![-INF; 3], vec![4.0, 12.0, 18.0]);
        lp.add_column(-3.0, 0.0, INF, [(0, 1.0), (2, 3.0)]);
        lp.add_column(-5.0, 0.0, INF, [(1, 2.0), (2, 2.0)]);
        let opts = SimplexOptions {
            max_iterations: 1,
            ..Default::default()
        };
        assert_eq!(solve(&lp, &opts, None).status, LpStatus::IterationLimit);
    }

    /// min cᵀx over {G x ≤ h} by enumerating every vertex.
    fn brute_min(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<f64> {
        let n = c.len();
        let mut best: Option<f64> = None;
        let rows = g.len();
        for mask in 0u32..(1 << rows) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let pick: Vec<usize> = (0..rows).filter(|r| mask >> r & 1 == 1).collect();
            let mut a: Vec<Vec<f64>> = pick.iter().map(|&r| {
                let mut row = g[r].clone();
                row.push(h[r]);
                row
            }).collect();
            let mut ok = true;
            for col in 0..n {
                let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
                if a[p][col].abs() < 1e-9 {
                    ok = false;
                    break;
                }
                a.swap(p, col);
                for r in 0..n {
                    if r != col {
                        let f = a[r][col] / a[col][col];
                        let pivot = a[col].clone();
                        for (x, p) in a[r][col..=n].iter_mut().zip(&pivot[col..=n]) {
                            *x -= f * p;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let x: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
            if (0..rows).all(|r| g[r].iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h[r] + 1e-9) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(300))]

        #[test]
        fn agrees_with_vertex_enumeration(
            n in 1usize..=3,
            seed_c in proptest::collection::vec(-3i32..=3, 3),
            seed_box in proptest::collection::vec((-3i32..=0, 0i32..=3), 3),
            seed_rows in proptest::collection::vec((proptest::collection::vec(-3i32..=3, 3), -4i32..=2, 0i32..=4), 1..=3),
        ) {
            let c: Vec<f64> = seed_c[..n].iter().map(|&v| v as f64).collect();
            let mut lp = LinearProgram::new(
                seed_rows.iter().map(|r| r.1 as f64).collect(),
                seed_rows.iter().map(|r| (r.1 + r.2) as f64).collect(),
            );
            for j in 0..n {
                let entries: Vec<(usize, f64)> = seed_rows.iter().enumerate().map(|(i, r)| (i, r.0[j] as f64)).collect();
                lp.add_column(c[j], seed_box[j].0 as f64, seed_box[j].1 as f64, entries);
            }
            // Half-space form for the oracle.
            let mut g = Vec::new();
            let mut h = Vec::new();
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                g.push(e.clone());
                h.push(seed_box[j].1 as f64);
                g.push(e.iter().map(|v| -v).collect());
                h.push(-(seed_box[j].0 as f64));
            }
            for r in &seed_rows {
                let a: Vec<f64> = r.0[..n].iter().map(|&v| v as f64).collect();
                g.push(a.clone());
                h.push((r.1 + r.2) as f64);
                g.push(a.iter().map(|v| -v).collect());
                h.push(-(r.1 as f64));
            }
            let res = solve(&lp, &SimplexOptions::default(), None);
            match brute_min(&c, &g, &h) {
                Some(v) => {
                    proptest::prop_assert_eq!(res.status, LpStatus::Optimal);
                    proptest::prop_assert!((res.objective - v).abs() < 1e-9, "{} vs {}", res.objective, v);
                    // Dual objective from row multipliers and bound reduced costs.
                    let mut dual = 0.0;
                    for (i, &y) in res.row_dual.iter().enumerate() {
                        dual += y * if y >= 0.0 { lp.row_lower[i] } else { lp.row_upper[i] };
                    }
                    for (j, &d) in res.reduced_cost.iter().enumerate() {
                        dual += d * if d >= 0.0 { lp.col_lower[j] } else { lp.col_upper[j] };
                    }
                    proptest::prop_assert!((dual - v).abs() < 1e-9, "dual {} vs {}", dual, v);
                }
                None => proptest::prop_assert_eq!(res.status, LpStatus::Infeasible),
            }
        }
    }
}
