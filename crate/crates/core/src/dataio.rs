//! Labeled datasets: sparse row storage, libsvm / CSV loading, and
//! seeded train/test splitting.
//!
//! Class labels are stored as 0-based indices into `label_names`, which
//! holds the original label text in sorted order (numeric order when every
//! label parses as a number, lexicographic otherwise).

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MrcError, Result};

/// Compressed sparse rows. Column indices inside a row are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    n_cols: usize,
}

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> RowView<'a> {
    /// Dot product with a dense vector indexed from `offset`.
    #[inline]
    pub fn dot_offset(&self, dense: &[f64], offset: usize) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&k, &v)| v * dense[offset + k as usize])
            .sum()
    }

    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.dot_offset(dense, 0)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        for (&k, &v) in self.indices.iter().zip(self.values) {
            out[k as usize] = v;
        }
        out
    }
}

impl SparseRows {
    pub fn new(n_cols: usize) -> Self {
        SparseRows {
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            n_cols,
        }
    }

    /// Builds rows from dense data; every entry (zeros included) is stored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut out = SparseRows::new(n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(MrcError::Shape(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.len()
                )));
            }
            out.push_dense(r);
        }
        Ok(out)
    }

    pub fn push_dense(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n_cols);
        self.indices.extend((0..row.len()).map(|k| k as u32));
        self.values.extend_from_slice(row);
        self.indptr.push(self.indices.len());
    }

    /// Appends a sparse row. Indices must be strictly increasing and below `n_cols`.
    pub fn push_sparse(&mut self, indices: &[u32], values: &[f64]) -> Result<()> {
        if indices.len() != values.len() {
            return Err(MrcError::Shape("index/value length mismatch".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MrcError::Format {
                line: self.n_rows() + 1,
                msg: "column indices must be strictly increasing".into(),
            });
        }
        if let Some(&last) = indices.last() {
            if last as usize >= self.n_cols {
                return Err(MrcError::Shape(format!(
                    "column index {last} out of range for {} columns",
                    self.n_cols
                )));
            }
        }
        self.indices.extend_from_slice(indices);
        self.values.extend_from_slice(values);
        self.indptr.push(self.indices.len());
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        RowView {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn select(&self, rows: &[usize]) -> SparseRows {
        let mut out = SparseRows::new(self.n_cols);
        for &i in rows {
            let r = self.row(i);
            out.indices.extend_from_slice(r.indices);
            out.values.extend_from_slice(r.values);
            out.indptr.push(out.indices.len());
        }
        out
    }

    pub(crate) fn widen(&mut self, n_cols: usize) {
        self.n_cols = self.n_cols.max(n_cols);
    }
}

/// Where a dataset came from; decides how strictly dimensions are matched
/// against a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Libsvm,
    Csv,
    InMemory,
}

/// Immutable labeled dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: SparseRows,
    labels: Vec<usize>,
    label_names: Vec<String>,
    format: SourceFormat,
}

impl Dataset {
    /// `labels` are 0-based class indices into `label_names`.
    pub fn new(features: SparseRows, labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        if features.n_rows() == 0 {
            return Err(MrcError::NoSamples);
        }
        if features.n_rows() != labels.len() {
            return Err(MrcError::Shape(format!(
                "{} feature rows but {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        if features.n_cols() == 0 {
            return Err(MrcError::Shape("dataset has no feature columns".into()));
        }
        if label_names.is_empty() {
            return Err(MrcError::Shape("dataset needs at least one class".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(MrcError::Shape(format!(
                "label index {bad} out of range for {} classes",
                label_names.len()
            )));
        }
        Ok(Dataset {
            features,
            labels,
            label_names,
            format: SourceFormat::InMemory,
        })
    }

    /// Dense constructor with generic class names "1", "2", ...
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (1..=n_classes).map(|c| c.to_string()).collect();
        Dataset::new(SparseRows::from_dense(rows)?, labels, names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> &SparseRows {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn format(&self) -> SourceFormat {
        self.format
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            format: self.format,
        }
    }
}

fn compare_labels(a: &str, b: &str, numeric: bool) -> Ordering {
    if numeric {
        let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
        x.total_cmp(&y)
    } else {
        a.cmp(b)
    }
}

/// Maps raw label strings onto contiguous class indices by sorted order.
fn remap_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric = raw.iter().all(|s| s.parse::<f64>().is_ok());
    let mut distinct: Vec<&String> = raw.iter().collect();
    distinct.sort_by(|a, b| compare_labels(a, b, numeric));
    distinct.dedup_by(|a, b| compare_labels(a, b, numeric) == Ordering::Equal);
    let names: Vec<String> = distinct.into_iter().cloned().collect();
    let labels = raw
        .iter()
        .map(|s| {
            names
                .binary_search_by(|n| compare_labels(n, s, numeric))
                .expect("label present in table")
        })
        .collect();
    (labels, names)
}

/// Loads a libsvm / svmlight file (`label idx:val ...`, 1-based indices).
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MrcError::io(path, e))?;
    read_libsvm(BufReader::new(file)).map_err(|e| match e {
        MrcError::Io { source, .. } => MrcError::io(path, source),
        other => other,
    })
}

pub fn read_libsvm(reader: impl BufRead) -> Result<Dataset> {
    let mut rows = SparseRows::new(0);
    let mut raw_labels = Vec::new();
    let mut idx_buf = Vec::new();
    let mut val_buf = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| MrcError::io("<libsvm>", e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().unwrap();
        if label.parse::<f64>().is_err() {
            return Err(MrcError::Parse {
                line: lineno,
                msg: format!("invalid label `{label}`"),
            });
        }
        idx_buf.clear();
        val_buf.clear();
        for tok in tokens {
            if tok.starts_with("qid:") {
                continue;
            }
            let (i, v) = tok.split_once(':').ok_or_else(|| MrcError::Parse {
                line: lineno,
                msg: format!("expected idx:val, found `{tok}`"),
            })?;
            let i: u32 = i.parse().map_err(|_| MrcError::Parse {
                line: lineno,
                msg: format!("invalid feature index `{i}`"),
            })?;
            if i == 0 {
                return Err(MrcError::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let v: f64 = v.parse().map_err(|_| MrcError::Parse {
                line: lineno,
                msg: format!("invalid feature value `{v}`"),
            })?;
            if let Some(&prev) = idx_buf.last() {
                if i - 1 <= prev {
                    return Err(MrcError::Format {
                        line: lineno,
                        msg: format!("feature index {i} does not increase"),
                    });
                }
            }
            idx_buf.push(i - 1);
            val_buf.push(v);
        }
        if let Some(&last) = idx_buf.last() {
            rows.widen(last as usize + 1);
        }
        rows.push_sparse(&idx_buf, &val_buf)?;
        raw_labels.push(label.to_string());
    }

    if raw_labels.is_empty() {
        return Err(MrcError::NoSamples);
    }
    let (labels, names) = remap_labels(&raw_labels);
    let mut ds = Dataset::new(rows, labels, names)?;
    ds.format = SourceFormat::Libsvm;
    Ok(ds)
}

/// Writes `ds` in libsvm format using the original label text.
pub fn write_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| MrcError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        for i in 0..ds.n_samples() {
            write!(w, "{}", ds.label_names[ds.labels[i]])?;
            let r = ds.row(i);
            for (&k, &v) in r.indices.iter().zip(r.values) {
                write!(w, " {}:{}", k + 1, v)?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    emit().map_err(|e| MrcError::io(path, e))
}

/// Selects the label column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// Plain integers select by 0-based index, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Loads a CSV table with a header row. All non-label columns must be numeric.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MrcError::io(path, e))?;
    read_csv(BufReader::new(file), label_column)
}

pub fn read_csv(reader: impl std::io::Read, label_column: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| MrcError::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let width = headers.len();
    let label_idx = match label_column {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MrcError::MissingColumn(name.clone()))?,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(MrcError::MissingColumn(i.to_string())),
    };
    if width < 2 {
        return Err(MrcError::Shape("CSV needs a label column and at least one feature".into()));
    }

    let mut rows = SparseRows::new(width - 1);
    let mut raw_labels = Vec::new();
    let mut buf = Vec::with_capacity(width - 1);
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| MrcError::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(MrcError::Format {
                line,
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        buf.clear();
        for (c, cell) in rec.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| MrcError::Parse {
                line,
                msg: format!("non-numeric value `{cell}` in column `{}`", &headers[c]),
            })?;
            buf.push(v);
        }
        rows.push_dense(&buf);
        raw_labels.push(rec[label_idx].to_string());
    }
    if raw_labels.is_empty() {
        return Err(MrcError::NoSamples);
    }
    let (labels, names) = remap_labels(&raw_labels);
    let mut ds = Dataset::new(rows, labels, names)?;
    ds.format = SourceFormat::Csv;
    Ok(ds)
}

/// Seeded shuffled split. The training part gets `floor(n * train_fraction)`
/// samples (clamped so both parts are nonempty); the remainder is the test part.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MrcError::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.n_samples();
    if n < 2 {
        return Err(MrcError::Config("splitting needs at least two samples".into()));
    }
    let n_train = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (tr, te) = order.split_at(n_train);
    Ok((ds.subset(tr), ds.subset(te)))
}
