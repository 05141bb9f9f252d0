//! Input matrix and target handling: CSV ingestion, validation and column centering.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Result, SubicError};

/// An n×p feature matrix with the per-column statistics needed to map raw
/// instances onto the fitted scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub values: Array2<f64>,
    /// Column means removed by [`center_columns`]; zeros until centered.
    pub column_means: Array1<f64>,
    /// Column scales divided out by [`standardize_columns`]; ones by default.
    pub column_scales: Array1<f64>,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub values: Array1<f64>,
    pub name: String,
}

impl DataMatrix {
    /// Wraps a raw matrix with generated labels (`x0..`, `r0..`).
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        let column_names = (0..p).map(|j| format!("x{j}")).collect();
        let row_ids = (0..n).map(|i| format!("r{i}")).collect();
        Self::with_labels(values, column_names, row_ids)
    }

    pub fn with_labels(
        values: Array2<f64>,
        column_names: Vec<String>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 || p < 2 {
            return Err(SubicError::TooSmall(format!(
                "need at least 2 rows and 2 feature columns, got {n}x{p}"
            )));
        }
        if column_names.len() != p || row_ids.len() != n {
            return Err(SubicError::DimensionMismatch(format!(
                "{} column names / {} row ids for a {n}x{p} matrix",
                column_names.len(),
                row_ids.len()
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SubicError::BadCell {
                row: i + 1,
                column: column_names[j].clone(),
                value: v.to_string(),
            });
        }
        Ok(DataMatrix {
            values,
            column_means: Array1::zeros(p),
            column_scales: Array1::ones(p),
            column_names,
            row_ids,
            centered: false,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Indices of columns with zero variance.
    pub fn constant_columns(&self) -> Vec<usize> {
        self.values
            .axis_iter(Axis(1))
            .enumerate()
            .filter(|(_, col)| {
                let first = col[0];
                col.iter().all(|&v| v == first)
            })
            .map(|(j, _)| j)
            .collect()
    }

    /// Root mean square over all entries.
    pub fn rms(&self) -> f64 {
        let len = self.values.len() as f64;
        (self.values.iter().map(|v| v * v).sum::<f64>() / len).sqrt()
    }

    /// Maps a raw-unit instance onto the fitted scale.
    pub fn transform_instance(&self, raw: &[f64]) -> Result<Array1<f64>> {
        if raw.len() != self.p() {
            return Err(SubicError::DimensionMismatch(format!(
                "instance has {} features, model expects {}",
                raw.len(),
                self.p()
            )));
        }
        Ok(Array1::from_iter(
            raw.iter()
                .zip(self.column_means.iter().zip(self.column_scales.iter()))
                .map(|(x, (m, s))| (x - m) / s),
        ))
    }
}

impl TargetVector {
    pub fn new(values: Array1<f64>, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SubicError::BadCell {
                row: i + 1,
                column: name,
                value: v.to_string(),
            });
        }
        Ok(TargetVector { values, name })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Plain left-to-right mean, the same arithmetic the model uses for
    /// per-cluster target means.
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Removes each column's mean and records it for prediction-time reuse.
///
/// Means accumulate across calls, so centering an already centered matrix is
/// a no-op that leaves the stored means intact.
pub fn center_columns(x: &DataMatrix) -> DataMatrix {
    let mut out = x.clone();
    let n = x.n() as f64;
    for (j, mut col) in out.values.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        col.mapv_inplace(|v| v - mean);
        out.column_means[j] += mean * x.column_scales[j];
    }
    out.centered = true;
    out
}

/// Divides every column by its population standard deviation (constant columns
/// are left unscaled). Applied after centering.
pub fn standardize_columns(x: &DataMatrix) -> DataMatrix {
    let mut out = x.clone();
    let n = x.n() as f64;
    for (j, mut col) in out.values.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|v| v / sd);
            out.column_scales[j] *= sd;
        }
    }
    out
}

/// Reads a header-first CSV, splitting off `target_column` as the target.
///
/// A leading column named `id` is used for row labels rather than as a feature.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<(DataMatrix, TargetVector)> {
    let table = read_table(path.as_ref())?;
    let hits: Vec<usize> = table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.as_str() == target_column)
        .map(|(i, _)| i)
        .collect();
    let target_idx = match hits.as_slice() {
        [] => return Err(SubicError::MissingTarget(target_column.to_string())),
        [i] => *i,
        _ => return Err(SubicError::DuplicateTarget(target_column.to_string())),
    };

    let feature_idx: Vec<usize> = (table.first_value_col..table.header.len())
        .filter(|&i| i != target_idx && !table.header[i].starts_with(TRUTH_PREFIX))
        .collect();
    let x = table.matrix(&feature_idx)?;
    let y = table.column(target_idx)?;
    let names = feature_idx.iter().map(|&i| table.header[i].clone()).collect();
    let x = DataMatrix::with_labels(x, names, table.row_ids.clone())?;
    let y = TargetVector::new(y, target_column)?;
    Ok((x, y))
}

/// Reads a CSV of feature columns only (no target), e.g. new instances to predict.
///
/// Columns named in `skip` are ignored, as are hidden truth columns.
pub fn load_features_csv(path: impl AsRef<Path>, skip: &[&str]) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let table = read_table(path.as_ref())?;
    let feature_idx: Vec<usize> = (table.first_value_col..table.header.len())
        .filter(|&i| {
            let h = table.header[i].as_str();
            !skip.contains(&h) && !h.starts_with(TRUTH_PREFIX)
        })
        .collect();
    let x = table.matrix(&feature_idx)?;
    let names = feature_idx.iter().map(|&i| table.header[i].clone()).collect();
    Ok((names, table.row_ids, x))
}

/// Prefix of hidden ground-truth columns written by the simulator.
pub const TRUTH_PREFIX: &str = "_truth_";

/// Writes features plus target (and any extra integer columns) as CSV with an
/// `id` column. Values are written with round-trip precision.
pub fn write_csv(
    path: impl AsRef<Path>,
    x: &DataMatrix,
    y: &TargetVector,
    extra: &[(String, Vec<usize>)],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SubicError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["id".to_string()];
    header.extend(x.column_names.iter().cloned());
    header.push(y.name.clone());
    header.extend(extra.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for i in 0..x.n() {
        let mut rec = vec![x.row_ids[i].clone()];
        rec.extend(x.values.row(i).iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", y.values[i]));
        rec.extend(extra.iter().map(|(_, col)| col[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| SubicError::io(path, e))?;
    Ok(())
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    row_ids: Vec<String>,
    first_value_col: usize,
}

impl Table {
    fn parse(&self, r: usize, c: usize) -> Result<f64> {
        let raw = self.rows[r][c].trim();
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(SubicError::BadCell {
                row: r + 1,
                column: self.header[c].clone(),
                value: raw.to_string(),
            }),
        }
    }

    fn matrix(&self, cols: &[usize]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.rows.len(), cols.len()));
        for r in 0..self.rows.len() {
            for (k, &c) in cols.iter().enumerate() {
                out[[r, k]] = self.parse(r, c)?;
            }
        }
        Ok(out)
    }

    fn column(&self, c: usize) -> Result<Array1<f64>> {
        (0..self.rows.len()).map(|r| self.parse(r, c)).collect()
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| SubicError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let has_id = header.first().is_some_and(|h| h.eq_ignore_ascii_case("id"));
    let row_ids = if has_id {
        rows.iter().map(|r| r[0].clone()).collect()
    } else {
        (0..rows.len()).map(|i| format!("r{i}")).collect()
    };
    if rows.len() < 2 {
        return Err(SubicError::TooSmall(format!("{} data rows in {}", rows.len(), path.display())));
    }
    Ok(Table {
        header,
        rows,
        row_ids,
        first_value_col: usize::from(has_id),
    })
}

/// Writes a plain numeric matrix with a header row.
pub(crate) fn write_matrix_csv<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| SubicError::io("<csv>", e))?;
    Ok(())
}
