//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::cell::Cell;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mrc_core::baseline::{self, average_error, brute_max, FullSolution};
use mrc_core::ccg::{self, CcgConfig, CcgOutput, Mode};
use mrc_core::dataio::{Dataset, SparseRows};
use mrc_core::features::{self, FeatureMapSpec, MomentEstimates, StdNormalization};
use mrc_core::model::Model;
use mrc_core::oracle::max_violation_subset;
use mrc_core::synth::{gaussian_classes, GaussianSpec};
use mrc_core::MrcError;

const LAMBDA0: f64 = 0.01;

thread_local! {
    static MAX_GAP: Cell<f64> = const { Cell::new(0.0) };
    static SOLVES: Cell<usize> = const { Cell::new(0) };
}

fn record_gap(gap: f64, solves: usize) {
    MAX_GAP.with(|g| g.set(g.get().max(gap)));
    SOLVES.with(|s| s.set(s.get() + solves));
}

struct Instance {
    ds: Dataset,
    psi: SparseRows,
    moments: MomentEstimates,
}

fn instance(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> Instance {
    let ds = gaussian_classes(&GaussianSpec {
        n,
        d,
        n_classes: k,
        separation,
        seed,
    })
    .unwrap();
    let psi = FeatureMapSpec::identity(d).embed(ds.features()).unwrap();
    let moments = MomentEstimates::from_embedded(&psi, ds.labels(), k, LAMBDA0, StdNormalization::Population).unwrap();
    Instance { ds, psi, moments }
}

fn run_ccg(inst: &Instance, cfg: &CcgConfig) -> CcgOutput {
    let out = ccg::run(&inst.psi, &inst.moments, inst.ds.label_names(), cfg).unwrap();
    record_gap(out.stats.max_duality_gap, out.stats.lp_solves);
    out
}

fn run_full(inst: &Instance) -> FullSolution {
    let full = baseline::solve_full(&inst.psi, &inst.moments, baseline::DEFAULT_CAP, None).unwrap();
    record_gap(full.duality_gap, 1);
    full
}

fn exact() -> CcgConfig {
    CcgConfig {
        eps1: 0.0,
        eps2: 0.0,
        ..Default::default()
    }
}

/// The 20 small datasets shared by the exactness and bound criteria.
fn small_instances() -> Vec<Instance> {
    (0..20)
        .map(|i| instance(60 + 12 * i, 3 + i % 18, [2, 3, 4][i % 3], 1.0, 100 + i as u64))
        .collect()
}

type Outcome = Result<String, String>;
type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, fail: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(fail())
    }
}

fn oracle_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 1..=10 {
        for _ in 0..500 {
            let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let (greedy, _) = max_violation_subset(&v).map_err(|e| e.to_string())?;
            let (brute, _) = brute_max(&v);
            worst = worst.max((greedy - brute).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-12, || format!("max |ψ − brute| = {worst:e}"))?;
    check(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("5000 vectors, max |ψ − brute| = {worst:e}, {secs:.3} s"))
}

fn ccg_matches_full_lp(insts: &[Instance]) -> Outcome {
    let mut worst_ae = 0.0f64;
    let mut slowest = 0.0f64;
    let mut combined = 0;
    for (i, inst) in insts.iter().enumerate() {
        let full = run_full(inst);
        // Every other run generates features too.
        let cfg = if i % 2 == 1 {
            combined += 1;
            CcgConfig {
                mode: Some(Mode::Combined),
                m_max: 4,
                ..exact()
            }
        } else {
            exact()
        };
        let t = Instant::now();
        let out = run_ccg(inst, &cfg);
        let secs = t.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        check(out.certificate.terminal, || format!("dataset {i} hit kmax"))?;
        let ae = average_error(out.r, full.r_star);
        worst_ae = worst_ae.max(ae);
        check(ae <= 1e-6, || format!("dataset {i}: R = {}, R* = {}", out.r, full.r_star))?;
        check(secs < 30.0, || format!("dataset {i} took {secs:.1} s"))?;
    }
    Ok(format!("20 datasets ({combined} combined), max AE = {worst_ae:e}, slowest {slowest:.2} s"))
}

fn monotone_with_removal() -> Outcome {
    let mut steps = 0;
    for seed in 0..20u64 {
        let inst = instance(200, 5, [2, 3, 4][seed as usize % 3], 1.0, 500 + seed);
        let cfg = CcgConfig {
            mode: Some(Mode::ConstraintsOnly),
            removal: Some(true),
            eps1: 0.0,
            n_max: 5,
            ..Default::default()
        };
        let out = run_ccg(&inst, &cfg);
        for w in out.trace.windows(2) {
            steps += 1;
            check(w[1].r_k >= w[0].r_k - 1e-9, || {
                format!("seed {seed}: R drops from {} to {} at k = {}", w[0].r_k, w[1].r_k, w[1].k)
            })?;
        }
    }
    Ok(format!("{steps} consecutive pairs over 20 seeds"))
}

fn constraints_only_bounds(insts: &[Instance]) -> Outcome {
    let mut rows = 0;
    for (i, inst) in insts.iter().enumerate() {
        let r_star = run_full(inst).r_star;
        let cfg = CcgConfig {
            mode: Some(Mode::ConstraintsOnly),
            n_max: 10,
            eps1: 0.0,
            ..Default::default()
        };
        let out = run_ccg(inst, &cfg);
        for t in &out.trace {
            rows += 1;
            check(r_star - t.eps1_hat - 1e-7 <= t.r_k && t.r_k <= r_star + 1e-7, || {
                format!("dataset {i}, k = {}: R = {}, R* = {r_star}, ε̂1 = {}", t.k, t.r_k, t.eps1_hat)
            })?;
        }
    }
    Ok(format!("{rows} iterations over 20 datasets"))
}

fn combined_bounds(insts: &[Instance]) -> Outcome {
    let mut rows = 0;
    for (i, inst) in insts.iter().enumerate() {
        let full = run_full(inst);
        let norm: f64 = full.mu_star.iter().map(|v| v.abs()).sum();
        let cfg = CcgConfig {
            mode: Some(Mode::Combined),
            m_max: 3,
            n_max: 10,
            eps1: 0.0,
            eps2: 0.0,
            ..Default::default()
        };
        let out = run_ccg(inst, &cfg);
        let r_star = full.r_star;
        for t in &out.trace {
            rows += 1;
            let upper = r_star + t.eps2_hat * norm + 1e-7;
            let lower = r_star - t.eps1_hat - 1e-7;
            check(lower <= t.r_k && t.r_k <= upper, || {
                format!("dataset {i}, k = {}: R = {} outside [{lower}, {upper}]", t.k, t.r_k)
            })?;
        }
    }
    Ok(format!("{rows} iterations over 20 datasets"))
}

fn zero_features() -> Outcome {
    let mut worst = 0.0f64;
    for k in [2usize, 3, 5] {
        let n = 30;
        let psi = SparseRows::from_dense(&vec![vec![0.0; 3]; n]).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let moments = MomentEstimates::from_embedded(&psi, &labels, k, LAMBDA0, StdNormalization::Population).unwrap();
        let names: Vec<String> = (1..=k).map(|c| c.to_string()).collect();
        let expect = 1.0 - 1.0 / k as f64;

        let full = baseline::solve_full(&psi, &moments, baseline::DEFAULT_CAP, None).unwrap();
        record_gap(full.duality_gap, 1);
        let out = ccg::run(&psi, &moments, &names, &exact()).unwrap();
        record_gap(out.stats.max_duality_gap, out.stats.lp_solves);
        for (what, r) in [("baseline", full.r_star), ("ccg", out.r)] {
            let err = (r - expect).abs();
            worst = worst.max(err);
            check(err <= 1e-9, || format!("|Y| = {k}, {what}: R = {r}, expected {expect}"))?;
        }
    }
    Ok(format!("|Y| ∈ {{2, 3, 5}}, max error {worst:e}"))
}

fn duality_gap() -> Outcome {
    let gap = MAX_GAP.with(Cell::get);
    let solves = SOLVES.with(Cell::get);
    check(gap <= 1e-8, || format!("max gap {gap:e}"))?;
    Ok(format!("{solves} LP solves, max |primal − dual| = {gap:e}"))
}

fn centroid_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let k = 2 + seed as usize % 5;
        let d = 1 + seed as usize % 7;
        let inst = instance(40 + 7 * seed as usize, d, k, 1.5, 900 + seed);
        let m = &inst.moments;
        let centroids = ccg::init_centroids(m, inst.ds.label_names()).unwrap();
        let mut sum = vec![0.0; m.m()];
        for (c, x) in centroids.iter().enumerate() {
            for (s, v) in sum.iter_mut().zip(features::phi_dense(x, c, k)) {
                *s += m.class_props[c] * v;
            }
        }
        for (s, t) in sum.iter().zip(&m.tau) {
            worst = worst.max((s - t).abs());
        }
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("20 datasets, max deviation {worst:e}"))
}

fn eps2_trend() -> Outcome {
    // Random Fourier features give ε2 many small dual violations to gate.
    let ds = gaussian_classes(&GaussianSpec {
        n: 300,
        d: 10,
        n_classes: 3,
        separation: 1.0,
        seed: 77,
    })
    .unwrap();
    let spec = features::sample_rff(10, 60, features::median_bandwidth(ds.features(), 300, 1), 1).unwrap();
    let psi = spec.embed(ds.features()).unwrap();
    let moments = MomentEstimates::from_embedded(&psi, ds.labels(), 3, LAMBDA0, StdNormalization::Population).unwrap();
    let inst = Instance { ds, psi, moments };
    let r_star = run_full(&inst).r_star;
    let mut rows = Vec::new();
    for eps2 in [1e-3, 1e-4, 1e-5] {
        let cfg = CcgConfig {
            mode: Some(Mode::Combined),
            m_max: 5,
            eps1: 0.0,
            eps2,
            ..Default::default()
        };
        let out = run_ccg(&inst, &cfg);
        rows.push((eps2, average_error(out.r, r_star), out.trace.len()));
    }
    let desc = rows
        .iter()
        .map(|(e, ae, it)| format!("ε2={e:e}: AE={ae:.3e}, {it} it"))
        .collect::<Vec<_>>()
        .join("; ");
    for w in rows.windows(2) {
        check(w[1].1 <= w[0].1 && w[1].2 >= w[0].2, || desc.clone())?;
    }
    Ok(desc)
}

fn scalability() -> Outcome {
    // (a) CCG beats the full LP.
    let inst = instance(2000, 50, 4, 0.5, 11);
    let t = Instant::now();
    let full = run_full(&inst);
    let full_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let out = run_ccg(&inst, &CcgConfig::default());
    let ccg_secs = t.elapsed().as_secs_f64();
    check(ccg_secs < full_secs, || format!("(a) CCG {ccg_secs:.2} s vs full LP {full_secs:.2} s"))?;
    let ae_a = average_error(out.r, full.r_star);

    // (b) Ten classes: the full LP is refused, CCG finishes in time.
    let inst = instance(10_000, 50, 10, 0.5, 12);
    match baseline::solve_full(&inst.psi, &inst.moments, baseline::DEFAULT_CAP, None) {
        Err(MrcError::CapExceeded { required, .. }) => {
            check(required == 10_230_000, || format!("(b) refusal reported {required} rows"))?
        }
        other => return Err(format!("(b) full LP was not refused: {:?}", other.map(|f| f.r_star))),
    }
    let t = Instant::now();
    let out = run_ccg(
        &inst,
        &CcgConfig {
            mode: Some(Mode::ConstraintsOnly),
            time_limit: Some(Duration::from_secs(300)),
            ..Default::default()
        },
    );
    let big_secs = t.elapsed().as_secs_f64();
    check(big_secs < 300.0, || format!("(b) CCG took {big_secs:.1} s"))?;

    // (c) Scan time against n.
    let mut pts = Vec::new();
    for n in [1_000usize, 10_000, 100_000] {
        let inst = instance(n, 50, 4, 0.5, 13);
        let out = run_ccg(
            &inst,
            &CcgConfig {
                mode: Some(Mode::ConstraintsOnly),
                k_max: 5,
                ..Default::default()
            },
        );
        let mut s = out.stats.constraint_scan_seconds.clone();
        s.sort_by(f64::total_cmp);
        pts.push(((n as f64).ln(), s[s.len() / 2].ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    check(slope <= 1.2, || format!("(c) log-log slope {slope:.3}"))?;

    Ok(format!(
        "(a) CCG {ccg_secs:.2} s vs full LP {full_secs:.2} s, AE {ae_a:.1e}; (b) CCG {big_secs:.1} s, {} iterations, full LP refused; (c) scan slope {slope:.3}",
        out.trace.len()
    ))
}

fn model_round_trip() -> Outcome {
    let ds = gaussian_classes(&GaussianSpec {
        n: 300,
        d: 6,
        n_classes: 3,
        separation: 1.5,
        seed: 21,
    })
    .unwrap();
    let spec = features::sample_rff(6, 40, features::median_bandwidth(ds.features(), 300, 3), 3).unwrap();
    let out = ccg::train(&ds, &spec, LAMBDA0, StdNormalization::Population, &CcgConfig::default()).unwrap();
    record_gap(out.ccg.stats.max_duality_gap, out.ccg.stats.lp_solves);
    let model = out.model;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    model.save(&a).map_err(|e| e.to_string())?;
    model.save(&b).map_err(|e| e.to_string())?;
    let loaded = Model::load(&a).map_err(|e| e.to_string())?;
    loaded.save(&c).map_err(|e| e.to_string())?;
    let bytes = |p: &std::path::Path| std::fs::read(p).unwrap();
    check(bytes(&a) == bytes(&b) && bytes(&a) == bytes(&c), || "saved files differ".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let p = model.predict(&x).map_err(|e| e.to_string())?;
        let q = loaded.predict(&x).map_err(|e| e.to_string())?;
        check(p == q, || format!("input {i}: {p} vs {q}"))?;
        let (s, t) = (model.scores_psi(&spec.build_psi(&x).unwrap()), loaded.scores_psi(&spec.build_psi(&x).unwrap()));
        check(s == t, || format!("input {i}: scores differ"))?;
    }
    Ok("1000 inputs agree, three saves byte-identical".into())
}

fn main() {
    let start = Instant::now();
    let insts = small_instances();
    let criteria: Vec<Criterion> = vec![
        (1, "oracle exactness", Box::new(oracle_exactness)),
        (2, "CCG matches full LP", Box::new(|| ccg_matches_full_lp(&insts))),
        (3, "monotone R with removal", Box::new(monotone_with_removal)),
        (4, "constraints-only bounds", Box::new(|| constraints_only_bounds(&insts))),
        (5, "combined-mode bounds", Box::new(|| combined_bounds(&insts))),
        (6, "zero features", Box::new(zero_features)),
        (8, "centroid identity", Box::new(centroid_identity)),
        (9, "eps2 trend", Box::new(eps2_trend)),
        (10, "scalability", Box::new(scalability)),
        (11, "model round trip", Box::new(model_round_trip)),
        // Runs last so it covers every solve above.
        (7, "strong duality", Box::new(duality_gap)),
    ];
    let mut failed = 0;
    for (id, name, f) in &criteria {
        let t = Instant::now();
        let res = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}): {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): {detail} [{secs:.1} s]");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
