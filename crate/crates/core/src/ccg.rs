//! Combined constraint and column generation.
//!
//! Each iteration scans the current solution for violated dual constraints
//! (features to add, combined mode only) and violated primal constraints
//! (sample/subset pairs to add), then re-solves the restricted LP. The loop
//! stops when a scan adds nothing or after `k_max` solves.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::dataio::{Dataset, SparseRows};
use crate::error::{MrcError, Result};
use crate::features::{FeatureMapSpec, MomentEstimates, SparseVector, StdNormalization};
use crate::lp::{self, ExtraRow, SolveOptions, Solution, WarmStart};
use crate::model::Model;
use crate::oracle::{
    self, ConstraintId, DualScanParams, PointStore, PrimalScanParams, SubsetCode, DEFAULT_VIOLATION_FLOOR,
};

/// Largest class count for which the full centroid initialization is the
/// default.
pub const FULL_CENTROID_CLASS_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All features are kept; only constraints are generated.
    ConstraintsOnly,
    /// Features and constraints are both generated, never removed.
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Every subset constraint of every class centroid.
    FullCentroid,
    /// Singleton and full-set constraints per centroid plus the
    /// objective-positivity row.
    ReducedCentroid,
}

#[derive(Debug, Clone)]
pub struct CcgConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub n_max: usize,
    pub m_max: usize,
    pub k_max: usize,
    /// `None` picks constraints-only when m ≤ 2·m_max.
    pub mode: Option<Mode>,
    /// `None` means on in constraints-only mode. Always off in combined mode.
    pub removal: Option<bool>,
    /// `None` means on in constraints-only mode, off in combined mode.
    pub warm_start: Option<bool>,
    /// `None` picks the full centroid set up to `full_centroid_limit` classes.
    pub init: Option<Init>,
    pub full_centroid_limit: usize,
    /// Violations at or below this are treated as solver noise.
    pub violation_floor: f64,
    pub time_limit: Option<Duration>,
    /// Known bound on ‖μ*‖₁, completing the combined-mode certificate.
    pub mu_norm_bound: Option<f64>,
    /// When false, wall-clock columns of the trace are written as 0.
    pub record_timings: bool,
    /// Writes the last restricted primal here in LP text format.
    pub dump_lp: Option<PathBuf>,
}

impl Default for CcgConfig {
    fn default() -> Self {
        CcgConfig {
            eps1: 1e-2,
            eps2: 1e-5,
            n_max: 400,
            m_max: 400,
            k_max: 200,
            mode: None,
            removal: None,
            warm_start: None,
            init: None,
            full_centroid_limit: FULL_CENTROID_CLASS_LIMIT,
            violation_floor: DEFAULT_VIOLATION_FLOOR,
            time_limit: Some(Duration::from_secs(600)),
            mu_norm_bound: None,
            record_timings: true,
            dump_lp: None,
        }
    }
}

impl CcgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MrcError::Config(msg));
        if !(self.eps1 >= 0.0 && self.eps1.is_finite()) {
            return bad(format!("eps1 must be a nonnegative number, got {}", self.eps1));
        }
        if !(self.eps2 >= 0.0 && self.eps2.is_finite()) {
            return bad(format!("eps2 must be a nonnegative number, got {}", self.eps2));
        }
        if self.n_max == 0 || self.m_max == 0 || self.k_max == 0 {
            return bad("nmax, mmax and kmax must be at least 1".into());
        }
        if let Some(b) = self.mu_norm_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return bad(format!("mu norm bound must be nonnegative, got {b}"));
            }
        }
        Ok(())
    }

    pub fn resolve_mode(&self, m: usize) -> Mode {
        self.mode.unwrap_or(if m <= 2 * self.m_max {
            Mode::ConstraintsOnly
        } else {
            Mode::Combined
        })
    }

    pub fn resolve_init(&self, n_classes: usize) -> Init {
        self.init.unwrap_or(if n_classes <= self.full_centroid_limit.min(oracle::MASK_CLASS_LIMIT) {
            Init::FullCentroid
        } else {
            Init::ReducedCentroid
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub r_k: f64,
    pub n_constraints: usize,
    pub n_features: usize,
    pub eps1_hat: f64,
    pub eps2_hat: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub lower: f64,
    pub upper: f64,
    pub mode: Mode,
    /// The lower side is unknown (combined mode without a ‖μ*‖₁ bound).
    pub partial: bool,
    /// The loop stopped because nothing was added, not at `k_max`.
    pub terminal: bool,
}

impl Certificate {
    pub fn contains(&self, r: f64, tol: f64) -> bool {
        r >= self.lower - tol && r <= self.upper + tol
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CcgStats {
    pub lp_solves: usize,
    pub simplex_iterations: usize,
    pub warm_started_solves: usize,
    pub max_duality_gap: f64,
    /// Seconds spent in each constraint scan.
    pub constraint_scan_seconds: Vec<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CcgOutput {
    pub mu: SparseVector,
    pub r: f64,
    pub nu: f64,
    pub trace: Vec<TraceRow>,
    pub certificate: Certificate,
    pub stats: CcgStats,
    pub mode: Mode,
    pub init: Init,
    pub removal: bool,
    pub warm_start: bool,
    pub constraints: Vec<ConstraintId>,
    pub features: Vec<usize>,
}

/// Class centroids x̂_c = τ^c / p_c, the class means of Ψ.
pub fn init_centroids(moments: &MomentEstimates, label_names: &[String]) -> Result<Vec<Vec<f64>>> {
    let d = moments.d;
    (0..moments.n_classes)
        .map(|c| {
            let p = moments.class_props[c];
            if p <= 0.0 {
                let name = label_names.get(c).cloned().unwrap_or_else(|| c.to_string());
                return Err(MrcError::Init(format!("class `{name}` has no training samples")));
            }
            Ok(moments.tau[c * d..(c + 1) * d].iter().map(|t| t / p).collect())
        })
        .collect()
}

/// Initial constraints over the centroid points `centroids[c]`.
pub fn initial_constraints(centroids: &[usize], n_classes: usize, init: Init) -> Result<Vec<ConstraintId>> {
    let mut out = Vec::new();
    match init {
        Init::FullCentroid => {
            let subsets = SubsetCode::all(n_classes)?;
            for &p in centroids {
                out.extend(subsets.iter().map(|s| ConstraintId::new(p, s.clone())));
            }
        }
        Init::ReducedCentroid => {
            for &p in centroids {
                for y in 0..n_classes {
                    out.push(ConstraintId::new(p, SubsetCode::from_labels(&[y], n_classes)?));
                }
                if n_classes > 1 {
                    out.push(ConstraintId::new(p, SubsetCode::full(n_classes)));
                }
            }
        }
    }
    Ok(out)
}

/// The `m_max` features with the largest |τ_j|/(λ_j + 1e-12), ascending.
pub fn initial_features(moments: &MomentEstimates, m_max: usize) -> Vec<usize> {
    let m = moments.m();
    if m <= m_max {
        return (0..m).collect();
    }
    let score = |j: usize| moments.tau[j].abs() / (moments.lambda[j] + 1e-12);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    idx.truncate(m_max);
    idx.sort_unstable();
    idx
}

/// Interval for R* from the last trace row.
pub fn certificate_bounds(trace: &[TraceRow], mode: Mode, mu_norm_bound: Option<f64>, terminal: bool) -> Result<Certificate> {
    let last = trace
        .last()
        .ok_or_else(|| MrcError::Internal("empty trace".into()))?;
    let upper = last.r_k + last.eps1_hat;
    let (lower, partial) = match mode {
        Mode::ConstraintsOnly => (last.r_k, false),
        Mode::Combined => match mu_norm_bound {
            Some(b) => (last.r_k - last.eps2_hat * b, false),
            None if last.eps2_hat == 0.0 => (last.r_k, false),
            None => (f64::NEG_INFINITY, true),
        },
    };
    Ok(Certificate {
        lower,
        upper,
        mode,
        partial,
        terminal,
    })
}

pub fn write_trace_csv(trace: &[TraceRow], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| MrcError::Internal(format!("writing trace: {e}"));
    wr.write_record(["k", "R_k", "num_constraints", "num_features", "eps1_hat", "eps2_hat", "wall_seconds"])
        .map_err(io)?;
    for r in trace {
        wr.write_record([
            r.k.to_string(),
            r.r_k.to_string(),
            r.n_constraints.to_string(),
            r.n_features.to_string(),
            r.eps1_hat.to_string(),
            r.eps2_hat.to_string(),
            format!("{:.6}", r.wall_seconds),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| MrcError::Internal(format!("writing trace: {e}")))
}

struct Loop<'a> {
    points: PointStore<'a>,
    moments: &'a MomentEstimates,
    extra: Vec<ExtraRow>,
    constraints: Vec<ConstraintId>,
    constraint_set: HashSet<ConstraintId>,
    features: Vec<usize>,
    in_features: Vec<bool>,
    deadline: Option<Instant>,
    time_limit: f64,
    stats: CcgStats,
}

impl Loop<'_> {
    fn solve(&mut self, warm: Option<&WarmStart>) -> Result<Solution> {
        let sp = lp::build_subproblem(&self.points, &self.constraints, &self.features, self.moments, &self.extra)?;
        let sol = lp::solve(
            &sp,
            warm,
            &SolveOptions {
                deadline: self.deadline,
                ..Default::default()
            },
        )
        .map_err(|e| match e {
            MrcError::TimeLimit(_) => MrcError::TimeLimit(self.time_limit),
            other => other,
        })?;
        self.stats.lp_solves += 1;
        self.stats.simplex_iterations += sol.iterations;
        self.stats.warm_started_solves += sol.warm_started as usize;
        self.stats.max_duality_gap = self.stats.max_duality_gap.max(sol.duality_gap);
        Ok(sol)
    }

    fn dense_mu(&self, sol: &Solution) -> Vec<f64> {
        let mut mu = vec![0.0; self.points.m()];
        for (&j, v) in self.features.iter().zip(sol.primal.mu()) {
            mu[j] = v;
        }
        mu
    }
}

/// Runs the generation loop over embedded rows `psi`.
pub fn run(psi: &SparseRows, moments: &MomentEstimates, label_names: &[String], config: &CcgConfig) -> Result<CcgOutput> {
    config.validate()?;
    let start = Instant::now();
    let k = moments.n_classes;
    if psi.n_cols() != moments.d {
        return Err(MrcError::Shape(format!(
            "rows have {} columns, moments expect {}",
            psi.n_cols(),
            moments.d
        )));
    }
    if psi.n_rows() == 0 {
        return Err(MrcError::NoSamples);
    }
    let m = moments.m();
    let mode = config.resolve_mode(m);
    let combined = mode == Mode::Combined;
    let removal = !combined && config.removal.unwrap_or(true);
    let warm_start = config.warm_start.unwrap_or(!combined);
    let init = config.resolve_init(k);

    let mut points = PointStore::new(psi, k);
    let centroids = init_centroids(moments, label_names)?
        .iter()
        .map(|c| points.push_extra(c))
        .collect::<Result<Vec<_>>>()?;
    let constraints = initial_constraints(&centroids, k, init)?;
    let features = if combined {
        initial_features(moments, config.m_max)
    } else {
        (0..m).collect()
    };
    let mut in_features = vec![false; m];
    for &j in &features {
        in_features[j] = true;
    }
    let mut lp = Loop {
        points,
        moments,
        extra: if init == Init::ReducedCentroid {
            vec![ExtraRow::Positivity]
        } else {
            Vec::new()
        },
        constraint_set: constraints.iter().cloned().collect(),
        constraints,
        features,
        in_features,
        deadline: config.time_limit.map(|t| start + t),
        time_limit: config.time_limit.map_or(0.0, |t| t.as_secs_f64()),
        stats: CcgStats::default(),
    };

    let mut sol = lp.solve(None).map_err(|e| match e {
        MrcError::Unbounded(msg) => MrcError::Init(format!("initial subproblem is unbounded: {msg}")),
        other => other,
    })?;
    let mut trace = Vec::new();
    let mut terminal = false;
    let mut iter = 1;
    loop {
        let mu = lp.dense_mu(&sol);
        let nu = sol.primal.nu;

        let active: Vec<(ConstraintId, f64)> = lp
            .constraints
            .iter()
            .zip(&sol.dual.alpha)
            .filter(|(_, &a)| a > 0.0)
            .map(|(id, &a)| (id.clone(), a))
            .collect();
        let feat = oracle::scan_dual(
            &lp.points,
            &active,
            1.0 - sol.dual.beta,
            &moments.tau,
            &moments.lambda,
            &lp.in_features,
            DualScanParams {
                eps2: config.eps2,
                m_max: config.m_max,
                floor: config.violation_floor,
                removal: false,
            },
        );
        let feature_add: Vec<usize> = if combined {
            feat.add.iter().map(|r| r.id).collect()
        } else {
            Vec::new()
        };

        let t0 = Instant::now();
        let constr = oracle::scan_primal(
            &lp.points,
            &mu,
            nu,
            &lp.constraints,
            &lp.constraint_set,
            PrimalScanParams {
                eps1: config.eps1,
                n_max: config.n_max,
                floor: config.violation_floor,
                removal,
            },
        );
        lp.stats.constraint_scan_seconds.push(t0.elapsed().as_secs_f64());

        trace.push(TraceRow {
            k: iter,
            r_k: sol.primal.objective,
            n_constraints: lp.constraints.len(),
            n_features: lp.features.len(),
            eps1_hat: constr.max_violation.max(0.0),
            eps2_hat: feat.max_violation.max(0.0),
            wall_seconds: if config.record_timings {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });

        if constr.add.is_empty() && feature_add.is_empty() {
            terminal = true;
            break;
        }
        if iter >= config.k_max {
            break;
        }
        if lp.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(MrcError::TimeLimit(lp.time_limit));
        }

        if !constr.remove.is_empty() {
            let drop: HashSet<&ConstraintId> = constr.remove.iter().collect();
            lp.constraints.retain(|id| !drop.contains(id));
            for id in &constr.remove {
                lp.constraint_set.remove(id);
            }
        }
        for r in constr.add {
            lp.constraint_set.insert(r.id.clone());
            lp.constraints.push(r.id);
        }
        if !feature_add.is_empty() {
            for &j in &feature_add {
                lp.in_features[j] = true;
            }
            lp.features.extend(feature_add);
            lp.features.sort_unstable();
        }

        let hint = warm_start.then_some(&sol.warm_start);
        sol = lp.solve(hint)?;
        iter += 1;
    }

    if let Some(path) = &config.dump_lp {
        let sp = lp::build_subproblem(&lp.points, &lp.constraints, &lp.features, moments, &lp.extra)?;
        let file = File::create(path).map_err(|e| MrcError::io(path, e))?;
        let mut w = BufWriter::new(file);
        lp::write_lp(&sp, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| MrcError::io(path, e))?;
    }
    let certificate = certificate_bounds(&trace, mode, config.mu_norm_bound, terminal)?;
    let mu = SparseVector::from_dense(&lp.dense_mu(&sol));
    lp.stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(CcgOutput {
        mu,
        r: sol.primal.objective,
        nu: sol.primal.nu,
        trace,
        certificate,
        stats: lp.stats,
        mode,
        init,
        removal,
        warm_start,
        constraints: lp.constraints,
        features: lp.features,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Model,
    pub ccg: CcgOutput,
    pub moments: MomentEstimates,
}

/// Embeds `ds` with `spec`, estimates moments, runs the loop and packages
/// the model.
pub fn train(ds: &Dataset, spec: &FeatureMapSpec, lambda0: f64, norm: StdNormalization, config: &CcgConfig) -> Result<TrainOutput> {
    let psi = spec.embed(ds.features())?;
    let moments = MomentEstimates::from_embedded(&psi, ds.labels(), ds.n_classes(), lambda0, norm)?;
    let ccg = run(&psi, &moments, ds.label_names(), config)?;
    let model = Model::new(
        spec.clone(),
        ds.n_classes(),
        ccg.mu.clone(),
        ccg.r.clamp(0.0, 1.0),
        ds.label_names().to_vec(),
    )?;
    Ok(TrainOutput { model, ccg, moments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline;
    use crate::features::phi_dense;

    fn data(rows: &[Vec<f64>], labels: &[usize], k: usize) -> (SparseRows, MomentEstimates) {
        let psi = SparseRows::from_dense(rows).unwrap();
        let m = MomentEstimates::from_embedded(&psi, labels, k, 0.01, StdNormalization::Population).unwrap();
        (psi, m)
    }

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| i.to_string()).collect()
    }

    #[test]
    fn centroids_are_class_means() {
        let (_, m) = data(&[vec![1.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0]], &[0, 0, 1], 2);
        let c = init_centroids(&m, &names(2)).unwrap();
        assert_eq!(c, vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let mut sum = [0.0; 4];
        for (y, x) in c.iter().enumerate() {
            for (s, v) in sum.iter_mut().zip(phi_dense(x, y, 2)) {
                *s += m.class_props[y] * v;
            }
        }
        for (s, t) in sum.iter().zip(&m.tau) {
            assert!((s - t).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_class_is_an_init_error() {
        let (_, m) = data(&[vec![1.0], vec![2.0]], &[0, 0], 2);
        let err = init_centroids(&m, &["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, MrcError::Init(msg) if msg.contains("`b`")));
    }

    #[test]
    fn initial_constraint_counts() {
        assert_eq!(initial_constraints(&[10, 11, 12], 3, Init::FullCentroid).unwrap().len(), 21);
        assert_eq!(initial_constraints(&[10, 11, 12], 3, Init::ReducedCentroid).unwrap().len(), 12);
    }

    #[test]
    fn certificate_examples() {
        let row = |r, e1, e2| TraceRow {
            k: 1,
            r_k: r,
            n_constraints: 1,
            n_features: 1,
            eps1_hat: e1,
            eps2_hat: e2,
            wall_seconds: 0.0,
        };
        let c = certificate_bounds(&[row(0.30, 0.01, 0.0)], Mode::ConstraintsOnly, None, true).unwrap();
        assert_eq!((c.lower, c.upper), (0.30, 0.31));
        let c = certificate_bounds(&[row(0.30, 0.0, 0.0)], Mode::ConstraintsOnly, None, true).unwrap();
        assert_eq!((c.lower, c.upper), (0.30, 0.30));
        let c = certificate_bounds(&[row(0.30, 0.0, 0.0)], Mode::Combined, None, true).unwrap();
        assert!(!c.partial && c.lower == c.upper);
        let c = certificate_bounds(&[row(0.30, 0.0, 0.1)], Mode::Combined, None, true).unwrap();
        assert!(c.partial && c.lower == f64::NEG_INFINITY);
        let c = certificate_bounds(&[row(0.30, 0.0, 0.1)], Mode::Combined, Some(2.0), true).unwrap();
        assert!((c.lower - 0.1).abs() < 1e-15 && !c.partial);
        assert!(certificate_bounds(&[], Mode::Combined, None, true).is_err());
    }

    #[test]
    fn zero_features_give_uniform_risk() {
        for k in [2usize, 3, 5] {
            let rows = vec![vec![0.0; 3]; 4 * k];
            let labels: Vec<usize> = (0..4 * k).map(|i| i % k).collect();
            let (psi, m) = data(&rows, &labels, k);
            let out = run(&psi, &m, &names(k), &CcgConfig::default()).unwrap();
            assert!((out.r - (1.0 - 1.0 / k as f64)).abs() < 1e-9);
            assert_eq!(out.mu.nnz(), 0);
        }
    }

    #[test]
    fn exact_run_matches_full_lp() {
        let rows: Vec<Vec<f64>> = (0..24)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin() + (i % 3) as f64, (t * 1.3).cos() - (i % 3) as f64 * 0.5]
            })
            .collect();
        let labels: Vec<usize> = (0..24).map(|i| i % 3).collect();
        let (psi, m) = data(&rows, &labels, 3);
        let full = baseline::solve_full(&psi, &m, baseline::DEFAULT_CAP, None).unwrap();
        for mode in [Mode::ConstraintsOnly, Mode::Combined] {
            for init in [Init::FullCentroid, Init::ReducedCentroid] {
                let cfg = CcgConfig {
                    eps1: 0.0,
                    eps2: 0.0,
                    n_max: 5,
                    m_max: 2,
                    mode: Some(mode),
                    init: Some(init),
                    ..Default::default()
                };
                let out = run(&psi, &m, &names(3), &cfg).unwrap();
                assert!(out.certificate.terminal);
                assert!(
                    (out.r - full.r_star).abs() < 1e-7,
                    "{mode:?} {init:?}: {} vs {}",
                    out.r,
                    full.r_star
                );
            }
        }
    }

    #[test]
    fn trace_csv_layout() {
        let trace = vec![TraceRow {
            k: 1,
            r_k: 0.5,
            n_constraints: 3,
            n_features: 2,
            eps1_hat: 0.0,
            eps2_hat: 0.25,
            wall_seconds: 0.0,
        }];
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,R_k,num_constraints,num_features,eps1_hat,eps2_hat,wall_seconds\n1,0.5,3,2,0,0.25,0.000000\n"
        );
    }
}
