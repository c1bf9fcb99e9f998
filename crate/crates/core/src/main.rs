use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mrc_core::baseline;
use mrc_core::bench;
use mrc_core::ccg::{self, CcgConfig, Init, Mode};
use mrc_core::dataio::{self, Dataset, LabelColumn};
use mrc_core::features::{self, FeatureMapSpec, StdNormalization, DEFAULT_LAMBDA0};
use mrc_core::model::Model;
use mrc_core::synth::GaussianSpec;
use mrc_core::MrcError;

/// Minimax risk classifiers trained by constraint and column generation.
///
/// Every option can also be set through an environment variable named
/// MRC_<OPTION>, e.g. MRC_EPS1=1e-3.
#[derive(Parser)]
#[command(name = "mrc", version)]
struct Cli {
    /// Caps the number of worker threads.
    #[arg(long, global = true, env = "MRC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learns a model and writes it with a trace and a report.
    Train(TrainArgs),
    /// Writes one prediction per input row.
    Predict(PredictArgs),
    /// Compares classification error with the model's worst-case risk.
    Evaluate(EvaluateArgs),
    /// Solves the full LP over every constraint (small data only).
    Baseline(BaselineArgs),
    /// Times the generation loop against the full LP on synthetic data.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Libsvm,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureKind {
    Identity,
    Standardize,
    Rff,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    ConstraintsOnly,
    Combined,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Auto,
    Full,
    Reduced,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum StdArg {
    Population,
    Sample,
}

#[derive(Args)]
struct DataArgs {
    /// Input data file.
    #[arg(long, env = "MRC_DATA")]
    data: PathBuf,

    /// Input format; inferred from the extension when omitted (.csv → csv).
    #[arg(long, value_enum, env = "MRC_FORMAT")]
    format: Option<Format>,

    /// CSV label column, by header name or 0-based index.
    #[arg(long, default_value = "label", env = "MRC_LABEL_COLUMN")]
    label_column: String,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, MrcError> {
        let format = self.format.unwrap_or_else(|| {
            match self.data.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
                _ => Format::Libsvm,
            }
        });
        match format {
            Format::Libsvm => dataio::load_libsvm(&self.data),
            Format::Csv => {
                let col: LabelColumn = self.label_column.parse().unwrap();
                dataio::load_csv(&self.data, &col)
            }
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    /// Sample embedding Ψ.
    #[arg(long, value_enum, default_value = "identity", env = "MRC_FEATURES")]
    features: FeatureKind,

    /// Number of random Fourier features.
    #[arg(long, default_value_t = 400, env = "MRC_RFF_DIM")]
    rff_dim: usize,

    /// RFF bandwidth; defaults to the median pairwise distance.
    #[arg(long, env = "MRC_RFF_SIGMA")]
    rff_sigma: Option<f64>,

    /// Seed for the RFF draw and the bandwidth subsample.
    #[arg(long, default_value_t = 0, env = "MRC_SEED")]
    seed: u64,

    /// Confidence multiplier: λ = λ0 · std.
    #[arg(long, default_value_t = DEFAULT_LAMBDA0, env = "MRC_LAMBDA0")]
    lambda0: f64,

    /// Normalization of the standard deviation in λ.
    #[arg(long, value_enum, default_value = "population", env = "MRC_STD")]
    std: StdArg,
}

impl EmbedArgs {
    fn spec(&self, ds: &Dataset) -> Result<FeatureMapSpec, MrcError> {
        let d = ds.n_features();
        Ok(match self.features {
            FeatureKind::Identity => FeatureMapSpec::identity(d),
            FeatureKind::Standardize => FeatureMapSpec::fit_standardize(ds.features()),
            FeatureKind::Rff => {
                if self.rff_dim == 0 {
                    return Err(MrcError::Config("--rff-dim must be at least 1".into()));
                }
                let sigma = match self.rff_sigma {
                    Some(s) => s,
                    None => features::median_bandwidth(ds.features(), 1000, self.seed),
                };
                features::sample_rff(d, self.rff_dim, sigma, self.seed)?
            }
        })
    }

    fn norm(&self) -> StdNormalization {
        match self.std {
            StdArg::Population => StdNormalization::Population,
            StdArg::Sample => StdNormalization::Sample,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Primal violation threshold ε1.
    #[arg(long, default_value_t = 1e-2, env = "MRC_EPS1")]
    eps1: f64,

    /// Dual violation threshold ε2.
    #[arg(long, default_value_t = 1e-5, env = "MRC_EPS2")]
    eps2: f64,

    /// Constraints added per iteration.
    #[arg(long, default_value_t = 400, env = "MRC_NMAX")]
    nmax: usize,

    /// Features added per iteration.
    #[arg(long, default_value_t = 400, env = "MRC_MMAX")]
    mmax: usize,

    /// Maximum number of LP solves.
    #[arg(long, default_value_t = 200, env = "MRC_KMAX")]
    kmax: usize,

    #[arg(long, value_enum, default_value = "auto", env = "MRC_MODE")]
    mode: ModeArg,

    /// Remove overly satisfied constraints (constraints-only mode).
    #[arg(long, overrides_with = "no_removal", env = "MRC_REMOVAL")]
    removal: bool,

    #[arg(long, overrides_with = "removal")]
    no_removal: bool,

    /// Seed each LP solve with the previous basis.
    #[arg(long, value_enum, default_value = "auto", env = "MRC_WARM_START")]
    warm_start: Toggle,

    /// Initial constraint set built from the class centroids.
    #[arg(long, value_enum, default_value = "auto", env = "MRC_INIT")]
    init: InitArg,

    /// Class count up to which `--init auto` uses every centroid subset.
    #[arg(long, default_value_t = ccg::FULL_CENTROID_CLASS_LIMIT, env = "MRC_FULL_CENTROID_LIMIT")]
    full_centroid_limit: usize,

    /// Known bound on ‖μ*‖₁ for the combined-mode certificate.
    #[arg(long, env = "MRC_MU_NORM_BOUND")]
    mu_norm_bound: Option<f64>,

    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 600.0, env = "MRC_TIME_LIMIT")]
    time_limit: f64,
}

impl SolverArgs {
    fn config(&self) -> Result<CcgConfig, MrcError> {
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(MrcError::Config(format!("time limit must be positive, got {}", self.time_limit)));
        }
        let removal = if self.removal {
            Some(true)
        } else if self.no_removal {
            Some(false)
        } else {
            None
        };
        let cfg = CcgConfig {
            eps1: self.eps1,
            eps2: self.eps2,
            n_max: self.nmax,
            m_max: self.mmax,
            k_max: self.kmax,
            mode: match self.mode {
                ModeArg::Auto => None,
                ModeArg::ConstraintsOnly => Some(Mode::ConstraintsOnly),
                ModeArg::Combined => Some(Mode::Combined),
            },
            removal,
            warm_start: match self.warm_start {
                Toggle::Auto => None,
                Toggle::On => Some(true),
                Toggle::Off => Some(false),
            },
            init: match self.init {
                InitArg::Auto => None,
                InitArg::Full => Some(Init::FullCentroid),
                InitArg::Reduced => Some(Init::ReducedCentroid),
            },
            full_centroid_limit: self.full_centroid_limit,
            time_limit: Some(Duration::from_secs_f64(self.time_limit)),
            mu_norm_bound: self.mu_norm_bound,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    embed: EmbedArgs,

    #[command(flatten)]
    solver: SolverArgs,

    /// Train on this fraction of the data; the rest is held out and scored.
    #[arg(long, env = "MRC_TRAIN_FRACTION")]
    train_fraction: Option<f64>,

    #[arg(long, default_value_t = 0, env = "MRC_SPLIT_SEED")]
    split_seed: u64,

    /// Model output path.
    #[arg(long, env = "MRC_OUT")]
    out: PathBuf,

    /// Iteration trace CSV.
    #[arg(long, env = "MRC_TRACE")]
    trace: Option<PathBuf>,

    /// JSON summary report.
    #[arg(long, env = "MRC_REPORT")]
    report: Option<PathBuf>,

    /// Last restricted LP in LP text format.
    #[arg(long, env = "MRC_DUMP_LP")]
    dump_lp: Option<PathBuf>,

    /// Record wall-clock times in the trace and report (breaks byte-for-byte
    /// reproducibility of those files).
    #[arg(long, env = "MRC_TIMINGS")]
    timings: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, env = "MRC_MODEL")]
    model: PathBuf,

    #[command(flatten)]
    data: DataArgs,

    /// Predictions CSV; stdout when omitted.
    #[arg(long, env = "MRC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, env = "MRC_MODEL")]
    model: PathBuf,

    #[command(flatten)]
    data: DataArgs,

    /// Machine-readable output.
    #[arg(long, env = "MRC_JSON")]
    json: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    embed: EmbedArgs,

    /// Largest number of constraints the full LP may materialize.
    #[arg(long, default_value_t = baseline::DEFAULT_CAP, env = "MRC_CAP")]
    cap: u128,

    #[arg(long, env = "MRC_JSON")]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Sample counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000", env = "MRC_SAMPLES")]
    samples: Vec<usize>,

    /// Class counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2", env = "MRC_CLASSES")]
    classes: Vec<usize>,

    /// Raw feature dimension of the synthetic data.
    #[arg(long, default_value_t = 10, env = "MRC_DIM")]
    dim: usize,

    /// Standard deviation of the class-mean coordinates.
    #[arg(long, default_value_t = 1.0, env = "MRC_SEPARATION")]
    separation: f64,

    #[arg(long, default_value_t = 0, env = "MRC_SEED")]
    seed: u64,

    #[arg(long, default_value_t = DEFAULT_LAMBDA0, env = "MRC_LAMBDA0")]
    lambda0: f64,

    #[arg(long, default_value_t = baseline::DEFAULT_CAP, env = "MRC_CAP")]
    cap: u128,

    #[command(flatten)]
    solver: SolverArgs,

    /// Output CSV; stdout when omitted.
    #[arg(long, env = "MRC_OUT")]
    out: Option<PathBuf>,

    /// Write 0 instead of measured wall times.
    #[arg(long, env = "MRC_NO_TIMINGS")]
    no_timings: bool,
}

fn exit_code(e: &MrcError) -> u8 {
    match e {
        MrcError::Config(_) | MrcError::CapExceeded { .. } => 2,
        MrcError::Io { .. }
        | MrcError::Parse { .. }
        | MrcError::Format { .. }
        | MrcError::NoSamples
        | MrcError::MissingColumn(_)
        | MrcError::Shape(_)
        | MrcError::Init(_)
        | MrcError::Version(_)
        | MrcError::Model(_) => 3,
        MrcError::Unbounded(_) | MrcError::Numerical(_) | MrcError::Internal(_) => 4,
        MrcError::TimeLimit(_) => 5,
    }
}

/// Fails early if an output path's directory does not exist.
fn check_writable(path: &Path) -> Result<(), MrcError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(MrcError::io(
            path,
            io::Error::new(io::ErrorKind::NotFound, "output directory does not exist"),
        ));
    }
    if path.is_dir() {
        return Err(MrcError::io(path, io::Error::other("path is a directory")));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, MrcError> {
    File::create(path).map(BufWriter::new).map_err(|e| MrcError::io(path, e))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, MrcError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn finish(mut w: impl Write, path: &Path) -> Result<(), MrcError> {
    w.flush().map_err(|e| MrcError::io(path, e))
}

#[derive(Serialize)]
struct TrainReport<'a> {
    worst_case_risk: f64,
    certificate: &'a ccg::Certificate,
    mode: Mode,
    init: Init,
    removal: bool,
    warm_start: bool,
    iterations: usize,
    num_constraints: usize,
    num_features: usize,
    nonzero_coefficients: usize,
    max_duality_gap: f64,
    lp_solves: usize,
    simplex_iterations: usize,
    training_error: f64,
    test_error: Option<f64>,
    wall_seconds: Option<f64>,
}

fn cmd_train(a: &TrainArgs) -> Result<(), MrcError> {
    let start = Instant::now();
    let mut cfg = a.solver.config()?;
    for p in [Some(&a.out), a.trace.as_ref(), a.report.as_ref(), a.dump_lp.as_ref()].into_iter().flatten() {
        check_writable(p)?;
    }
    cfg.record_timings = a.timings;
    cfg.dump_lp = a.dump_lp.clone();

    let full = a.data.load()?;
    let (train, test) = match a.train_fraction {
        Some(f) => {
            let (tr, te) = dataio::split(&full, f, a.split_seed)?;
            (tr, Some(te))
        }
        None => (full, None),
    };
    let spec = a.embed.spec(&train)?;
    let out = ccg::train(&train, &spec, a.embed.lambda0, a.embed.norm(), &cfg)?;
    out.model.save(&a.out)?;

    if let Some(p) = &a.trace {
        let mut w = create(p)?;
        ccg::write_trace_csv(&out.ccg.trace, &mut w)?;
        finish(w, p)?;
    }
    let training_error = out.model.evaluate(&train)?.error_rate;
    let test_error = test.as_ref().map(|t| out.model.evaluate(t)).transpose()?.map(|e| e.error_rate);
    let c = &out.ccg;
    let report = TrainReport {
        worst_case_risk: c.r,
        certificate: &c.certificate,
        mode: c.mode,
        init: c.init,
        removal: c.removal,
        warm_start: c.warm_start,
        iterations: c.trace.len(),
        num_constraints: c.constraints.len(),
        num_features: c.features.len(),
        nonzero_coefficients: c.mu.nnz(),
        max_duality_gap: c.stats.max_duality_gap,
        lp_solves: c.stats.lp_solves,
        simplex_iterations: c.stats.simplex_iterations,
        training_error,
        test_error,
        wall_seconds: a.timings.then(|| start.elapsed().as_secs_f64()),
    };
    if let Some(p) = &a.report {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| MrcError::Internal(e.to_string()))?;
        writeln!(w).map_err(|e| MrcError::io(p, e))?;
        finish(w, p)?;
    }

    println!("R = {:.6}", c.r);
    let cert = &c.certificate;
    if cert.partial {
        println!("certificate: R* <= {:.6} (lower side needs --mu-norm-bound)", cert.upper);
    } else {
        println!("certificate: {:.6} <= R* <= {:.6}", cert.lower, cert.upper);
    }
    if !cert.terminal {
        println!("stopped at kmax = {} before convergence", cfg.k_max);
    }
    println!(
        "iterations {}, |I| = {}, |J| = {}, mode {:?}",
        c.trace.len(),
        c.constraints.len(),
        c.features.len(),
        c.mode
    );
    println!("training error {training_error:.4}");
    if let Some(e) = test_error {
        println!("held-out error {e:.4}");
    }
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<(), MrcError> {
    if let Some(p) = &a.out {
        check_writable(p)?;
    }
    let model = Model::load(&a.model)?;
    let ds = a.data.load()?;
    let preds = model.predict_dataset(&ds)?;
    let label = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut wr = csv::Writer::from_writer(output(a.out.as_deref())?);
    let err = |e: csv::Error| MrcError::io(&label, io::Error::other(e.to_string()));
    wr.write_record(["row_index", "predicted_label", "score_margin"]).map_err(err)?;
    for (i, p) in preds.iter().enumerate() {
        wr.write_record([i.to_string(), model.label_names[p.label].clone(), p.margin.to_string()])
            .map_err(err)?;
    }
    wr.flush().map_err(|e| MrcError::io(&label, e))
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    classification_error: f64,
    worst_case_risk: f64,
    error_within_bound: bool,
    n_samples: usize,
    per_class: &'a [mrc_core::model::ClassErrors],
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), MrcError> {
    let model = Model::load(&a.model)?;
    let ds = a.data.load()?;
    let ev = model.evaluate(&ds)?;
    let r = model.worst_case_risk;
    let ok = ev.error_rate <= r;
    if a.json {
        let rep = EvaluateReport {
            classification_error: ev.error_rate,
            worst_case_risk: r,
            error_within_bound: ok,
            n_samples: ev.n_samples,
            per_class: &ev.per_class,
        };
        println!("{}", serde_json::to_string_pretty(&rep).map_err(|e| MrcError::Internal(e.to_string()))?);
    } else {
        println!("CE = {:.2} ({})", ev.error_rate, ev.error_rate);
        println!("R  = {:.2} ({})", r, r);
        println!("CE <= R: {}", if ok { "yes" } else { "no" });
        for c in &ev.per_class {
            println!("  class {}: {}/{} wrong", c.label, c.errors, c.count);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineReport {
    worst_case_risk: f64,
    num_constraints: usize,
    nonzero_coefficients: usize,
    mu_l1_norm: f64,
    duality_gap: f64,
}

fn cmd_baseline(a: &BaselineArgs) -> Result<(), MrcError> {
    let ds = a.data.load()?;
    let required = baseline::full_constraint_count(ds.n_samples(), ds.n_classes());
    if required > a.cap {
        return Err(MrcError::CapExceeded { required, cap: a.cap });
    }
    let spec = a.embed.spec(&ds)?;
    let psi = spec.embed(ds.features())?;
    let moments = features::MomentEstimates::from_embedded(&psi, ds.labels(), ds.n_classes(), a.embed.lambda0, a.embed.norm())?;
    let sol = baseline::solve_full(&psi, &moments, a.cap, None)?;
    let rep = BaselineReport {
        worst_case_risk: sol.r_star,
        num_constraints: sol.n_constraints,
        nonzero_coefficients: sol.mu_star.iter().filter(|v| **v != 0.0).count(),
        mu_l1_norm: sol.mu_star.iter().map(|v| v.abs()).sum(),
        duality_gap: sol.duality_gap,
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rep).map_err(|e| MrcError::Internal(e.to_string()))?);
    } else {
        println!("R* = {:.6} ({})", rep.worst_case_risk, rep.worst_case_risk);
        println!("constraints {}, nonzero coefficients {}, ||mu||_1 = {:.6}", rep.num_constraints, rep.nonzero_coefficients, rep.mu_l1_norm);
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), MrcError> {
    if let Some(p) = &a.out {
        check_writable(p)?;
    }
    let cfg = a.solver.config()?;
    let mut settings = Vec::new();
    for &k in &a.classes {
        for &n in &a.samples {
            settings.push(GaussianSpec {
                n,
                d: a.dim,
                n_classes: k,
                separation: a.separation,
                seed: a.seed,
            });
        }
    }
    let rows = bench::run(&settings, a.lambda0, &cfg, a.cap, !a.no_timings)?;
    let label = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = output(a.out.as_deref())?;
    bench::write_csv(&rows, &mut w)?;
    finish(w, &label)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
