//! The trained classifier: argmax prediction, evaluation, and the model file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, RowView, SourceFormat};
use crate::error::{MrcError, Result};
use crate::features::{FeatureMapSpec, SparseVector};

pub const FORMAT_VERSION: &str = "mrc-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: String,
    pub n_classes: usize,
    /// Dimension of Ψ(x).
    pub d: usize,
    pub spec: FeatureMapSpec,
    /// μ over all `d · n_classes` features.
    pub mu: SparseVector,
    /// Worst-case error probability of the rule.
    #[serde(rename = "R")]
    pub worst_case_risk: f64,
    /// Original label of each internal class index.
    pub label_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// Best score minus the runner-up (0 with a single class).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassErrors {
    pub label: String,
    pub count: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub n_samples: usize,
    pub error_rate: f64,
    pub per_class: Vec<ClassErrors>,
}

impl Model {
    pub fn new(spec: FeatureMapSpec, n_classes: usize, mu: SparseVector, worst_case_risk: f64, label_names: Vec<String>) -> Result<Self> {
        let model = Model {
            format_version: FORMAT_VERSION.to_string(),
            n_classes,
            d: spec.output_dim(),
            spec,
            mu,
            worst_case_risk,
            label_names,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(MrcError::Model("model has no classes".into()));
        }
        if self.d != self.spec.output_dim() {
            return Err(MrcError::Model(format!(
                "d = {} but the feature map produces {}",
                self.d,
                self.spec.output_dim()
            )));
        }
        if self.mu.dim != self.d * self.n_classes {
            return Err(MrcError::Model(format!(
                "μ has dimension {}, expected {}",
                self.mu.dim,
                self.d * self.n_classes
            )));
        }
        self.mu.validate().map_err(|e| MrcError::Model(e.to_string()))?;
        if !(-1e-9..=1.0 + 1e-9).contains(&self.worst_case_risk) {
            return Err(MrcError::Model(format!("R = {} is outside [0, 1]", self.worst_case_risk)));
        }
        if self.label_names.len() != self.n_classes {
            return Err(MrcError::Model("label table does not match n_classes".into()));
        }
        Ok(())
    }

    /// Φ(x, y)ᵀμ for every class, given Ψ(x).
    pub fn scores_psi(&self, psi: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; self.n_classes];
        for (&j, &v) in self.mu.indices.iter().zip(&self.mu.values) {
            out[j / d] += psi[j % d] * v;
        }
        out
    }

    pub fn predict_psi(&self, psi: &[f64]) -> Prediction {
        let scores = self.scores_psi(psi);
        let mut best = 0;
        for (y, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = y;
            }
        }
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|&(y, _)| y != best)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = if runner_up.is_finite() { scores[best] - runner_up } else { 0.0 };
        Prediction { label: best, margin }
    }

    /// Predicted 0-based class of a raw input vector.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_psi(&self.spec.build_psi(x)?).label)
    }

    fn predict_row(&self, row: RowView<'_>) -> Result<Prediction> {
        Ok(self.predict_psi(&self.spec.psi_row(row)?))
    }

    /// Rejects datasets whose raw width cannot belong to this model. Sparse
    /// formats may omit trailing zero columns; CSV must match exactly.
    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        let width = ds.n_features();
        let expected = self.input_dim();
        let bad = match ds.format() {
            SourceFormat::Csv => width != expected,
            _ => width > expected,
        };
        if bad {
            return Err(MrcError::Shape(format!(
                "data has {width} features but the model expects {expected}"
            )));
        }
        Ok(())
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<Prediction>> {
        self.check_dataset(ds)?;
        (0..ds.n_samples()).map(|i| self.predict_row(ds.row(i))).collect()
    }

    /// Classification error against the labels of `ds`. Labels are matched
    /// by name, so the dataset may list its classes in any order.
    pub fn evaluate(&self, ds: &Dataset) -> Result<Evaluation> {
        let preds = self.predict_dataset(ds)?;
        let mut per_class: Vec<ClassErrors> = ds
            .label_names()
            .iter()
            .map(|l| ClassErrors {
                label: l.clone(),
                count: 0,
                errors: 0,
            })
            .collect();
        let mut errors = 0;
        for (p, &y) in preds.iter().zip(ds.labels()) {
            let truth = &ds.label_names()[y];
            let wrong = self.label_names.get(p.label) != Some(truth);
            per_class[y].count += 1;
            if wrong {
                per_class[y].errors += 1;
                errors += 1;
            }
        }
        let n = preds.len();
        Ok(Evaluation {
            n_samples: n,
            error_rate: if n == 0 { 0.0 } else { errors as f64 / n as f64 },
            per_class,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| MrcError::Internal(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| MrcError::Model(format!("unreadable model file: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_str()) {
            Some(FORMAT_VERSION) => {}
            Some(other) => return Err(MrcError::Version(other.to_string())),
            None => return Err(MrcError::Version("<missing>".into())),
        }
        let model: Model = serde_json::from_value(value).map_err(|e| MrcError::Model(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| MrcError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MrcError::io(path, e))?;
        Self::from_json(&text)
    }
}
