//! Timing sweeps of the generation loop against the full LP on synthetic
//! data.

use std::io::Write;
use std::time::Instant;

use crate::baseline::{self, average_error};
use crate::ccg::{self, CcgConfig};
use crate::error::{MrcError, Result};
use crate::features::{FeatureMapSpec, MomentEstimates, StdNormalization};
use crate::synth::{gaussian_classes, GaussianSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ccg,
    FullLp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ccg => "ccg",
            Method::FullLp => "full_lp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// AE is unknown when the full LP did not produce R*.
    Solved { r: f64, ae: Option<f64> },
    Refused,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub setting: String,
    pub method: Method,
    pub wall_seconds: f64,
    pub outcome: Outcome,
}

pub fn setting_label(s: &GaussianSpec) -> String {
    format!("n={} classes={} d={} seed={}", s.n, s.n_classes, s.d, s.seed)
}

/// Runs both methods on each setting. Failures are recorded per cell.
pub fn run(settings: &[GaussianSpec], lambda0: f64, config: &CcgConfig, cap: u128, record_timings: bool) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(2 * settings.len());
    for s in settings {
        let label = setting_label(s);
        let ds = gaussian_classes(s)?;
        let spec = FeatureMapSpec::identity(ds.n_features());
        let psi = spec.embed(ds.features())?;
        let moments = MomentEstimates::from_embedded(&psi, ds.labels(), ds.n_classes(), lambda0, StdNormalization::Population)?;
        let clock = |t: Instant| if record_timings { t.elapsed().as_secs_f64() } else { 0.0 };

        let t = Instant::now();
        let full = baseline::solve_full(&psi, &moments, cap, None);
        let full_secs = clock(t);
        let r_star = full.as_ref().ok().map(|f| f.r_star);

        let t = Instant::now();
        let ccg = ccg::run(&psi, &moments, ds.label_names(), config);
        let ccg_secs = clock(t);

        rows.push(BenchRow {
            setting: label.clone(),
            method: Method::Ccg,
            wall_seconds: ccg_secs,
            outcome: match ccg {
                Ok(out) => Outcome::Solved {
                    r: out.r,
                    ae: r_star.map(|r| average_error(out.r, r)),
                },
                Err(e) => Outcome::Failed(e.to_string()),
            },
        });
        rows.push(BenchRow {
            setting: label,
            method: Method::FullLp,
            wall_seconds: full_secs,
            outcome: match full {
                Ok(f) => Outcome::Solved {
                    r: f.r_star,
                    ae: Some(0.0),
                },
                Err(MrcError::CapExceeded { .. }) => Outcome::Refused,
                Err(e) => Outcome::Failed(e.to_string()),
            },
        });
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], w: impl Write) -> Result<()> {
    let err = |e: csv::Error| MrcError::Internal(format!("writing bench table: {e}"));
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["setting", "method", "wall_seconds", "R", "AE"]).map_err(err)?;
    for r in rows {
        let (rv, ae) = match &r.outcome {
            Outcome::Solved { r, ae } => (r.to_string(), ae.map_or("NA".to_string(), |a| a.to_string())),
            Outcome::Refused => ("refused".to_string(), "refused".to_string()),
            Outcome::Failed(msg) => (format!("failed: {msg}"), "NA".to_string()),
        };
        wr.write_record([
            r.setting.clone(),
            r.method.as_str().to_string(),
            format!("{:.6}", r.wall_seconds),
            rv,
            ae,
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| MrcError::Internal(format!("writing bench table: {e}")))
}
