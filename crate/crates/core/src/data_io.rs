//! Sample-by-feature matrices, CSV ingestion and every on-disk artifact.
//!
//! Samples are rows and features are columns. Values are written with 17
//! significant digits, which is enough for an exact `f64` round trip.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DiscError, Result};
use crate::spectral::DifferentialResult;

/// An `n x p` matrix of samples (rows) by features (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Mat<f64>,
    feature_ids: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: Mat<f64>, feature_ids: Vec<String>) -> Result<Self> {
        let (n, p) = (values.nrows(), values.ncols());
        if n < 2 || p < 2 {
            return Err(DiscError::Shape(format!(
                "need at least 2 samples and 2 features, got {n} x {p}"
            )));
        }
        if feature_ids.len() != p {
            return Err(DiscError::Shape(format!(
                "{} feature ids for {p} columns",
                feature_ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for id in &feature_ids {
            if !seen.insert(id.as_str()) {
                return Err(DiscError::Validation(format!("duplicate feature id {id:?}")));
            }
        }
        for j in 0..p {
            if let Some(i) = values.col_as_slice(j).iter().position(|v| !v.is_finite()) {
                return Err(DiscError::Validation(format!(
                    "non-finite value {} at sample {}, feature {:?}",
                    values[(i, j)],
                    i + 1,
                    feature_ids[j]
                )));
            }
        }
        Ok(Self {
            values,
            feature_ids,
        })
    }

    /// Builds a matrix with generated ids `f0001, f0002, ...`.
    pub fn with_default_ids(values: Mat<f64>) -> Result<Self> {
        let ids = default_feature_ids(values.ncols());
        Self::new(values, ids)
    }

    pub fn from_rows(rows: &[Vec<f64>], feature_ids: Option<Vec<String>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(DiscError::Shape(format!(
                "row {} has {} values, expected {p}",
                i + 1,
                r.len()
            )));
        }
        let values = Mat::from_fn(n, p, |i, j| rows[i][j]);
        match feature_ids {
            Some(ids) => Self::new(values, ids),
            None => Self::with_default_ids(values),
        }
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn sample_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.values.ncols()
    }

    /// Contiguous view of feature column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        self.values.col_as_slice(j)
    }

    /// Returns a copy with columns reordered so that column `j` is column `order[j]` of `self`.
    pub fn select_columns(&self, order: &[usize]) -> Result<Self> {
        let p = self.feature_count();
        if order.iter().any(|&j| j >= p) {
            return Err(DiscError::Parameter("column index out of range".into()));
        }
        let values = Mat::from_fn(self.sample_count(), order.len(), |i, j| {
            self.values[(i, order[j])]
        });
        let ids = order.iter().map(|&j| self.feature_ids[j].clone()).collect();
        Self::new(values, ids)
    }

    /// Per-column z-scoring. Constant columns are centred but left unscaled.
    pub fn zscore_columns(&self) -> Self {
        let n = self.sample_count() as f64;
        let mut values = self.values.clone();
        for j in 0..self.feature_count() {
            let col = values.col_as_slice_mut(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for v in col.iter_mut() {
                *v = (*v - mean) / sd;
            }
        }
        Self {
            values,
            feature_ids: self.feature_ids.clone(),
        }
    }
}

pub fn default_feature_ids(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("f{i:04}")).collect()
}

/// Reads a comma-separated numeric matrix. With `has_header` the first row
/// supplies the feature ids; otherwise ids are generated.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| DiscError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut ids: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut data: Vec<f64> = Vec::new();
    let mut n = 0usize;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(DiscError::Shape(format!(
                    "{}: line {line} has {} fields, expected {w}",
                    path.display(),
                    record.len()
                )));
            }
            Some(_) => {}
        }
        if has_header && ids.is_none() {
            ids = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| DiscError::Parse {
                path: path.to_path_buf(),
                line,
                column: col + 1,
                value: field.to_owned(),
            })?;
            data.push(v);
        }
        n += 1;
    }

    let p = width.unwrap_or(0);
    // `data` is row-major.
    let values = Mat::from_fn(n, p, |i, j| data[i * p + j]);
    match ids {
        Some(ids) => DataMatrix::new(values, ids),
        None => DataMatrix::with_default_ids(values),
    }
}

/// Reads a labelled CSV whose first column is a non-negative integer class
/// label. A first row whose label cell is not an integer is taken as a header.
pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<(DataMatrix, Vec<usize>)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| DiscError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut ids: Option<Vec<String>> = None;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let head = record.get(0).unwrap_or("");
        let label = match head.parse::<usize>() {
            Ok(l) => l,
            Err(_) if k == 0 => {
                ids = Some(record.iter().skip(1).map(str::to_owned).collect());
                continue;
            }
            Err(_) => {
                return Err(DiscError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: 1,
                    value: head.to_owned(),
                })
            }
        };
        let row = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(col, f)| {
                f.parse::<f64>().map_err(|_| DiscError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: col + 1,
                    value: f.to_owned(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        labels.push(label);
        rows.push(row);
    }
    Ok((DataMatrix::from_rows(&rows, ids)?, labels))
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to a temporary sibling file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| DiscError::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| DiscError::Parameter(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| DiscError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| DiscError::io(&tmp, e))?;
        f.sync_all().map_err(|e| DiscError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| DiscError::io(path, e))
}

/// Writes a data matrix with a header row of feature ids.
pub fn save_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&data.feature_ids().join(","));
    out.push('\n');
    let values = data.values();
    for i in 0..data.sample_count() {
        let row: Vec<String> = (0..data.feature_count())
            .map(|j| fmt_value(values[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Dense matrix dump with optional row labels in the first column.
pub fn save_matrix_csv(
    path: impl AsRef<Path>,
    matrix: &Mat<f64>,
    header: &[String],
    row_ids: Option<&[String]>,
) -> Result<()> {
    let mut out = String::new();
    let mut head: Vec<&str> = Vec::new();
    if row_ids.is_some() {
        head.push("feature_id");
    }
    head.extend(header.iter().map(String::as_str));
    out.push_str(&head.join(","));
    out.push('\n');
    for i in 0..matrix.nrows() {
        let mut row: Vec<String> = Vec::with_capacity(matrix.ncols() + 1);
        if let Some(ids) = row_ids {
            row.push(ids[i].clone());
        }
        row.extend((0..matrix.ncols()).map(|j| fmt_value(matrix[(i, j)])));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Column permutation taking dataset B's feature order to dataset A's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureAlignment {
    /// `permutation[i]` is the column of B holding A's feature `i`.
    permutation: Vec<usize>,
}

impl FeatureAlignment {
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Reorders `b`'s columns into A's feature order.
    pub fn apply(&self, b: &DataMatrix) -> Result<DataMatrix> {
        if b.feature_count() != self.permutation.len() {
            return Err(DiscError::Shape(format!(
                "alignment covers {} features, matrix has {}",
                self.permutation.len(),
                b.feature_count()
            )));
        }
        if self.is_identity() {
            return Ok(b.clone());
        }
        b.select_columns(&self.permutation)
    }
}

pub fn align(a: &DataMatrix, b: &DataMatrix) -> Result<FeatureAlignment> {
    let index_b: HashMap<&str, usize> = b
        .feature_ids()
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();
    let ids_a: HashSet<&str> = a.feature_ids().iter().map(String::as_str).collect();

    let missing: Vec<String> = a
        .feature_ids()
        .iter()
        .filter(|id| !index_b.contains_key(id.as_str()))
        .cloned()
        .collect();
    let extra: Vec<String> = b
        .feature_ids()
        .iter()
        .filter(|id| !ids_a.contains(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(DiscError::Alignment { missing, extra });
    }
    let permutation = a
        .feature_ids()
        .iter()
        .map(|id| index_b[id.as_str()])
        .collect();
    Ok(FeatureAlignment { permutation })
}

/// Writes `v_<name>.csv` (one row per feature, id first) and `sigma_<name>.csv`.
pub fn save_result(
    result: &DifferentialResult,
    feature_ids: &[String],
    dir: impl AsRef<Path>,
    name: &str,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    let v = result.vectors();
    if v.nrows() != feature_ids.len() {
        return Err(DiscError::Shape(format!(
            "{} feature ids for {} loading rows",
            feature_ids.len(),
            v.nrows()
        )));
    }
    let header: Vec<String> = (1..=v.ncols()).map(|j| format!("v{j}")).collect();
    let v_path = dir.join(format!("v_{name}.csv"));
    save_matrix_csv(&v_path, v, &header, Some(feature_ids))?;

    let mut out = String::from("index,sigma\n");
    for (i, s) in result.significance().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_value(*s)));
    }
    let s_path = dir.join(format!("sigma_{name}.csv"));
    write_atomic(&s_path, out.as_bytes())?;
    Ok((v_path, s_path))
}

/// Reads a loading matrix written by [`save_result`]; returns ids and values.
pub fn load_vectors_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Mat<f64>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let r = reader.headers()?.len().saturating_sub(1);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        ids.push(record.get(0).unwrap_or_default().to_owned());
        for (col, field) in record.iter().enumerate().skip(1) {
            data.push(field.parse::<f64>().map_err(|_| DiscError::Parse {
                path: path.to_path_buf(),
                line,
                column: col + 1,
                value: field.to_owned(),
            })?);
        }
    }
    let p = ids.len();
    Ok((ids, Mat::from_fn(p, r, |i, j| data[i * r + j])))
}

pub fn load_sigma_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = record.get(1).unwrap_or_default();
        out.push(field.parse::<f64>().map_err(|_| DiscError::Parse {
            path: path.to_path_buf(),
            line: record.position().map_or(0, |p| p.line() as usize),
            column: 2,
            value: field.to_owned(),
        })?);
    }
    Ok(out)
}

/// `feature_id,label` rows.
pub fn save_labels_csv(path: impl AsRef<Path>, feature_ids: &[String], labels: &[usize]) -> Result<()> {
    let mut out = String::from("feature_id,label\n");
    for (id, l) in feature_ids.iter().zip(labels) {
        out.push_str(&format!("{id},{l}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Hex SHA-256 of a file's contents.
pub fn file_checksum(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DiscError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Everything needed to reproduce a two-dataset run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub d_a: usize,
    pub d_b: usize,
    pub kernel: String,
    pub knn_k: Option<usize>,
    pub seed: u64,
    pub n_a: usize,
    pub n_b: usize,
    pub p: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub standardized: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma_a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma_b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_r_a: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_r_b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub input_checksums: HashMap<String, String>,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub metrics: HashMap<String, f64>,
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DiscError::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
