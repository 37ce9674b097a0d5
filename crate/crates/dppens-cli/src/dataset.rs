//! Tabular ingestion (CSV/TSV with a header row), optional one-hot
//! expansion of categorical columns, uniform subsampling and
//! training-fold standardization.

use std::collections::BTreeSet;
use std::path::Path;

use dppens::stream_rng;
use nalgebra::{DMatrix, DVector};

use crate::{stream_tag, CliError, Result};

/// An in-memory regression table: one point per row, optional labels.
///
/// `feature_means` and `feature_stds` are populated by
/// [`Dataset::standardized`] and record the fold statistics that were
/// applied; a freshly loaded dataset carries none.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Option<DVector<f64>>,
    feature_means: Option<DVector<f64>>,
    feature_stds: Option<DVector<f64>>,
}

impl Dataset {
    /// Wraps raw features and optional labels, rejecting empty or
    /// non-finite input and label/feature length mismatches.
    pub fn new(features: DMatrix<f64>, labels: Option<DVector<f64>>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(CliError::data(
                "dataset must have at least one row and one feature",
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CliError::data("features contain a non-finite value"));
        }
        if let Some(y) = &labels {
            if y.len() != features.nrows() {
                return Err(CliError::data(format!(
                    "{} labels for {} rows",
                    y.len(),
                    features.nrows()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(CliError::data("labels contain a non-finite value"));
            }
        }
        Ok(Dataset {
            features,
            labels,
            feature_means: None,
            feature_stds: None,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&DVector<f64>> {
        self.labels.as_ref()
    }

    /// Fold means applied by the last standardization, if any.
    pub fn feature_means(&self) -> Option<&DVector<f64>> {
        self.feature_means.as_ref()
    }

    /// Fold standard deviations applied by the last standardization
    /// (constant columns carry 1).
    pub fn feature_stds(&self) -> Option<&DVector<f64>> {
        self.feature_stds.as_ref()
    }

    /// Rows `fold` of the feature matrix as a dense block.
    pub fn rows(&self, fold: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(fold.len(), self.d(), |i, j| self.features[(fold[i], j)])
    }

    /// Labels at `fold`; errors when the dataset has none.
    pub fn labels_at(&self, fold: &[usize]) -> Result<DVector<f64>> {
        let y = self
            .labels
            .as_ref()
            .ok_or_else(|| CliError::data("dataset has no label column"))?;
        Ok(DVector::from_fn(fold.len(), |i, _| y[fold[i]]))
    }

    /// The dataset restricted to `rows`, in the order given.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.iter().any(|&r| r >= self.n()) {
            return Err(CliError::data("row index out of range"));
        }
        if rows.is_empty() {
            return Err(CliError::data("row subset must be non-empty"));
        }
        let features = DMatrix::from_fn(rows.len(), self.d(), |i, j| self.features[(rows[i], j)]);
        let labels = self
            .labels
            .as_ref()
            .map(|y| DVector::from_fn(rows.len(), |i, _| y[rows[i]]));
        Ok(Dataset {
            features,
            labels,
            feature_means: None,
            feature_stds: None,
        })
    }

    /// Standardizes every column with mean and population standard
    /// deviation computed over the `fold` rows only. Columns constant on
    /// the fold keep their offset removed and divide by 1, so the output
    /// is always finite.
    pub fn standardized(&self, fold: &[usize]) -> Result<Self> {
        if fold.is_empty() {
            return Err(CliError::data("standardization fold must be non-empty"));
        }
        if fold.iter().any(|&r| r >= self.n()) {
            return Err(CliError::data("standardization fold index out of range"));
        }
        let d = self.d();
        let len = fold.len() as f64;
        let mut means = DVector::zeros(d);
        let mut stds = DVector::zeros(d);
        for j in 0..d {
            let mean = fold.iter().map(|&r| self.features[(r, j)]).sum::<f64>() / len;
            let var = fold
                .iter()
                .map(|&r| {
                    let c = self.features[(r, j)] - mean;
                    c * c
                })
                .sum::<f64>()
                / len;
            let std = var.sqrt();
            means[j] = mean;
            // constant on the fold up to roundoff: divide by 1
            stds[j] = if std <= 1e-12 * mean.abs().max(1.0) {
                1.0
            } else {
                std
            };
        }
        let features = DMatrix::from_fn(self.n(), d, |i, j| {
            (self.features[(i, j)] - means[j]) / stds[j]
        });
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            feature_means: Some(means),
            feature_stds: Some(stds),
        })
    }
}

/// Uniformly subsamples `target` rows without replacement (ascending row
/// order) when the dataset is larger; smaller datasets pass through.
pub fn subsample(ds: &Dataset, target: usize, seed: u64) -> Result<Dataset> {
    if target == 0 {
        return Err(CliError::usage("--subsample must be at least 1"));
    }
    if ds.n() <= target {
        return Ok(ds.clone());
    }
    let mut rng = stream_rng(seed, &[stream_tag::SUBSAMPLE]);
    let mut rows = rand::seq::index::sample(&mut rng, ds.n(), target).into_vec();
    rows.sort_unstable();
    ds.subset_rows(&rows)
}

fn parse_cell(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Loads a delimited text table with a header row. `label_column` names the
/// column split off as labels; with `one_hot`, non-numeric columns expand
/// into one indicator column per distinct value (sorted), otherwise any
/// non-numeric cell is an error. Row order is preserved.
pub fn load_csv(
    path: &Path,
    label_column: Option<&str>,
    delimiter: u8,
    one_hot: bool,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("bad header row: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::data(format!(
                "label column '{name}' not found (columns: {})",
                headers.join(", ")
            ))
        })?),
        None => None,
    };

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("row {}: {e}", r + 2)))?;
        if record.len() != headers.len() {
            return Err(CliError::data(format!(
                "row {} has {} fields, header has {}",
                r + 2,
                record.len(),
                headers.len()
            )));
        }
        rows.push(record);
    }
    let n = rows.len();
    if n == 0 {
        return Err(CliError::data("no data rows"));
    }

    let labels = match label_idx {
        Some(li) => {
            let mut y = DVector::zeros(n);
            for (r, row) in rows.iter().enumerate() {
                y[r] = parse_cell(&row[li]).ok_or_else(|| {
                    CliError::data(format!(
                        "label column '{}' has non-numeric value '{}' at row {}",
                        headers[li],
                        &row[li],
                        r + 2
                    ))
                })?;
            }
            Some(y)
        }
        None => None,
    };

    // one dense column per numeric input column, a sorted block of
    // indicator columns per categorical one
    let mut columns: Vec<DVector<f64>> = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if Some(j) == label_idx {
            continue;
        }
        let parsed: Vec<Option<f64>> = rows.iter().map(|row| parse_cell(&row[j])).collect();
        if let Some(bad) = parsed.iter().position(|v| v.is_none()) {
            if !one_hot {
                return Err(CliError::data(format!(
                    "column '{}' has non-numeric value '{}' at row {}; \
                     pass --one-hot to expand categorical columns",
                    name,
                    &rows[bad][j],
                    bad + 2
                )));
            }
            let categories: BTreeSet<&str> = rows.iter().map(|row| &row[j]).collect();
            for cat in categories {
                columns.push(DVector::from_fn(n, |r, _| {
                    if &rows[r][j] == cat {
                        1.0
                    } else {
                        0.0
                    }
                }));
            }
        } else {
            columns.push(DVector::from_fn(n, |r, _| parsed[r].unwrap()));
        }
    }
    if columns.is_empty() {
        return Err(CliError::data("no feature columns remain"));
    }
    let features = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    Dataset::new(features, labels)
}
