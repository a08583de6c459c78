//! Tensor and matrix containers: ingestion, unfolding, standardization and
//! MCAR masking.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An `N x T x F` block of observations with its observed/missing mask.
///
/// Cell `(i, t, f)` lives at flat offset `(i * T + t) * F + f`. Values where
/// the mask is `false` carry no information and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MtsTensor<S> {
    n_samples: usize,
    n_steps: usize,
    n_features: usize,
    values: Vec<S>,
    mask: Vec<bool>,
    feature_names: Vec<String>,
    sample_ids: Vec<String>,
}

impl<S: Scalar> MtsTensor<S> {
    pub fn new(
        n_samples: usize,
        n_steps: usize,
        n_features: usize,
        values: Vec<S>,
        mask: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let sample_ids = (0..n_samples).map(|i| i.to_string()).collect();
        Self::with_sample_ids(
            n_samples,
            n_steps,
            n_features,
            values,
            mask,
            feature_names,
            sample_ids,
        )
    }

    pub fn with_sample_ids(
        n_samples: usize,
        n_steps: usize,
        n_features: usize,
        values: Vec<S>,
        mask: Vec<bool>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if n_samples == 0 || n_steps == 0 || n_features == 0 {
            return Err(Error::Shape(format!(
                "tensor dimensions must be positive, got {n_samples}x{n_steps}x{n_features}"
            )));
        }
        let len = n_samples * n_steps * n_features;
        if values.len() != len || mask.len() != len {
            return Err(Error::Shape(format!(
                "expected {len} cells, got {} values and {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::Shape(format!(
                "{} feature names for {n_features} features",
                feature_names.len()
            )));
        }
        if sample_ids.len() != n_samples {
            return Err(Error::Shape(format!(
                "{} sample ids for {n_samples} samples",
                sample_ids.len()
            )));
        }
        Ok(Self {
            n_samples,
            n_steps,
            n_features,
            values,
            mask,
            feature_names,
            sample_ids,
        })
    }

    /// Fully observed tensor built from `f(i, t, f)`.
    pub fn from_fn(
        n_samples: usize,
        n_steps: usize,
        n_features: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_samples * n_steps * n_features);
        for i in 0..n_samples {
            for t in 0..n_steps {
                for k in 0..n_features {
                    values.push(f(i, t, k));
                }
            }
        }
        let len = values.len();
        Self::new(
            n_samples,
            n_steps,
            n_features,
            values,
            vec![true; len],
            default_feature_names(n_features),
        )
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn offset(&self, i: usize, t: usize, f: usize) -> usize {
        (i * self.n_steps + t) * self.n_features + f
    }

    #[inline]
    pub fn is_observed(&self, i: usize, t: usize, f: usize) -> bool {
        self.mask[self.offset(i, t, f)]
    }

    /// The observed value at `(i, t, f)`, or `None` when missing.
    #[inline]
    pub fn get(&self, i: usize, t: usize, f: usize) -> Option<S> {
        let o = self.offset(i, t, f);
        self.mask[o].then(|| self.values[o])
    }

    pub fn set(&mut self, i: usize, t: usize, f: usize, value: Option<S>) {
        let o = self.offset(i, t, f);
        match value {
            Some(v) => {
                self.values[o] = v;
                self.mask[o] = true;
            }
            None => {
                self.values[o] = S::nan();
                self.mask[o] = false;
            }
        }
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::Shape(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Copy that keeps only the listed samples, in the given order.
    pub fn select_samples(&self, idx: &[usize]) -> Result<Self> {
        let block = self.n_steps * self.n_features;
        let mut values = Vec::with_capacity(idx.len() * block);
        let mut mask = Vec::with_capacity(idx.len() * block);
        let mut ids = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.n_samples {
                return Err(Error::Shape(format!("sample {i} out of range")));
            }
            values.extend_from_slice(&self.values[i * block..(i + 1) * block]);
            mask.extend_from_slice(&self.mask[i * block..(i + 1) * block]);
            ids.push(self.sample_ids[i].clone());
        }
        Self::with_sample_ids(
            idx.len(),
            self.n_steps,
            self.n_features,
            values,
            mask,
            self.feature_names.clone(),
            ids,
        )
    }

    /// Reorders features to match `names`, which must be a permutation of
    /// this tensor's feature names.
    pub fn align_features(&self, names: &[String]) -> Result<Self> {
        if names == self.feature_names.as_slice() {
            return Ok(self.clone());
        }
        let missing: Vec<&String> = names
            .iter()
            .filter(|n| self.feature_index(n).is_none())
            .collect();
        let extra: Vec<&String> = self
            .feature_names
            .iter()
            .filter(|n| !names.contains(n))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Contract(format!(
                "feature mismatch: missing {missing:?}, unexpected {extra:?}"
            )));
        }
        let perm: Vec<usize> = names
            .iter()
            .map(|n| self.feature_index(n).expect("checked above"))
            .collect();
        let mut values = Vec::with_capacity(self.values.len());
        let mut mask = Vec::with_capacity(self.mask.len());
        for i in 0..self.n_samples {
            for t in 0..self.n_steps {
                for &f in &perm {
                    let o = self.offset(i, t, f);
                    values.push(self.values[o]);
                    mask.push(self.mask[o]);
                }
            }
        }
        Self::with_sample_ids(
            self.n_samples,
            self.n_steps,
            self.n_features,
            values,
            mask,
            names.to_vec(),
            self.sample_ids.clone(),
        )
    }
}

pub fn default_feature_names(n: usize) -> Vec<String> {
    (0..n).map(|f| format!("f{f}")).collect()
}

/// Marginal kind of a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    Ordinal,
}

/// Per-feature declaration used when fitting marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub feature_name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal_levels: Option<Vec<f64>>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            feature_name: name.into(),
            kind: ColumnKind::Continuous,
            ordinal_levels: None,
        }
    }

    pub fn ordinal(name: impl Into<String>, levels: Vec<f64>) -> Result<Self> {
        let spec = Self {
            feature_name: name.into(),
            kind: ColumnKind::Ordinal,
            ordinal_levels: Some(levels),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Ordinal feature with levels `1..=k`.
    pub fn ordinal_k(name: impl Into<String>, k: usize) -> Result<Self> {
        Self::ordinal(name, (1..=k).map(|l| l as f64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.ordinal_levels) {
            (ColumnKind::Continuous, _) => Ok(()),
            (ColumnKind::Ordinal, Some(levels)) if !levels.is_empty() => {
                if levels.windows(2).all(|w| w[0] < w[1]) && levels.iter().all(|l| l.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Spec(format!(
                        "ordinal levels of {:?} must be finite and strictly increasing",
                        self.feature_name
                    )))
                }
            }
            (ColumnKind::Ordinal, _) => Err(Error::Spec(format!(
                "ordinal feature {:?} declares no levels",
                self.feature_name
            ))),
        }
    }
}

/// Completes a partial list of declarations against the tensor's features:
/// undeclared features default to continuous, unknown names are rejected.
pub fn resolve_specs(feature_names: &[String], declared: &[ColumnSpec]) -> Result<Vec<ColumnSpec>> {
    for spec in declared {
        spec.validate()?;
        if !feature_names.contains(&spec.feature_name) {
            return Err(Error::Spec(format!(
                "column spec names unknown feature {:?}",
                spec.feature_name
            )));
        }
    }
    Ok(feature_names
        .iter()
        .map(|name| {
            declared
                .iter()
                .find(|s| &s.feature_name == name)
                .cloned()
                .unwrap_or_else(|| ColumnSpec::continuous(name.clone()))
        })
        .collect())
}

/// Reads the long CSV format `sample_id,time_index,<feature>...`.
///
/// Empty fields are missing cells and lines starting with `#` are comments. When `n_steps` is `None` it is inferred
/// as one past the largest time index.
pub fn load_csv_long<S: Scalar>(
    path: impl AsRef<Path>,
    schema: &[ColumnSpec],
    n_steps: Option<usize>,
) -> Result<MtsTensor<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv_long(file, schema, n_steps)
}

pub fn read_csv_long<S: Scalar, R: Read>(
    reader: R,
    schema: &[ColumnSpec],
    n_steps: Option<usize>,
) -> Result<MtsTensor<S>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = match rdr.headers() {
        Ok(h) if !h.is_empty() => h.clone(),
        Ok(_) => return Err(Error::NoSamples),
        Err(e) => return Err(csv_error(e)),
    };
    if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "time_index" {
        return Err(Error::Parse {
            line: 1,
            message: "header must be sample_id,time_index,<feature>...".into(),
        });
    }
    let feature_names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    resolve_specs(&feature_names, schema)?;
    let n_features = feature_names.len();

    struct Row<S> {
        sample: usize,
        time: usize,
        line: u64,
        cells: Vec<Option<S>>,
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Row<S>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let sid = record[0].to_owned();
        let time: usize = record[1].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("time_index {:?} is not a nonnegative integer", &record[1]),
        })?;
        let mut cells = Vec::with_capacity(n_features);
        for (k, field) in record.iter().skip(2).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                cells.push(None);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("value {field:?} of feature {:?} is not a number", feature_names[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("value {field:?} is not finite"),
                });
            }
            cells.push(Some(S::lit(v)));
        }
        let sample = *index.entry(sid.clone()).or_insert_with(|| {
            order.push(sid);
            order.len() - 1
        });
        rows.push(Row {
            sample,
            time,
            line,
            cells,
        });
    }
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let n_steps = match n_steps {
        Some(t) => t,
        None => rows.iter().map(|r| r.time).max().unwrap_or(0) + 1,
    };
    let n_samples = order.len();
    let len = n_samples * n_steps * n_features;
    let mut values = vec![S::nan(); len];
    let mut mask = vec![false; len];
    let mut seen = vec![false; n_samples * n_steps];
    for row in rows {
        if row.time >= n_steps {
            return Err(Error::TimeIndexOutOfRange {
                line: row.line,
                time_index: row.time,
                n_steps,
            });
        }
        let slot = row.sample * n_steps + row.time;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::DuplicateCell {
                line: row.line,
                sample_id: order[row.sample].clone(),
                time_index: row.time,
            });
        }
        for (f, cell) in row.cells.into_iter().enumerate() {
            if let Some(v) = cell {
                values[slot * n_features + f] = v;
                mask[slot * n_features + f] = true;
            }
        }
    }
    MtsTensor::with_sample_ids(
        n_samples,
        n_steps,
        n_features,
        values,
        mask,
        feature_names,
        order,
    )
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Writes every `(sample, time)` row of the tensor in long CSV format.
pub fn write_csv_long<S: Scalar, W: Write>(x: &MtsTensor<S>, writer: W) -> Result<()> {
    write_csv_long_annotated(x, writer, None)
}

/// Like [`write_csv_long`], with an optional single-line `# note` before
/// the header.
pub fn write_csv_long_annotated<S: Scalar, W: Write>(
    x: &MtsTensor<S>,
    mut writer: W,
    note: Option<&str>,
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: "<csv output>".into(),
        source,
    };
    if let Some(note) = note {
        if note.contains('\n') {
            return Err(Error::Contract("CSV note must be a single line".into()));
        }
        writeln!(writer, "# {note}").map_err(io_err)?;
    }
    if let Some(id) = x.sample_ids.iter().find(|id| id.starts_with('#')) {
        return Err(Error::Contract(format!(
            "sample id {id:?} would be read back as a comment"
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io {
        path: "<csv output>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut header = vec!["sample_id".to_owned(), "time_index".to_owned()];
    header.extend(x.feature_names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..x.n_samples {
        for t in 0..x.n_steps {
            record.clear();
            record.push(x.sample_ids[i].clone());
            record.push(t.to_string());
            for f in 0..x.n_features {
                record.push(x.get(i, t, f).map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&record).map_err(io)?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })
}

pub fn save_csv_long<S: Scalar>(x: &MtsTensor<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_long(x, std::io::BufWriter::new(file))
}

/// Dense matrix with an observed/missing mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix<S> {
    nrows: usize,
    ncols: usize,
    values: Vec<S>,
    mask: Vec<bool>,
}

impl<S: Scalar> MaskedMatrix<S> {
    pub fn new(nrows: usize, ncols: usize, values: Vec<S>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != nrows * ncols || mask.len() != nrows * ncols {
            return Err(Error::Shape(format!(
                "{}/{} entries for a {nrows}x{ncols} masked matrix",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            values,
            mask,
        })
    }

    /// Fully observed matrix.
    pub fn complete(nrows: usize, ncols: usize, values: Vec<S>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(nrows, ncols, values, mask)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<S> {
        let o = i * self.ncols + j;
        self.mask[o].then(|| self.values[o])
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Option<S>) {
        let o = i * self.ncols + j;
        match value {
            Some(v) => {
                self.values[o] = v;
                self.mask[o] = true;
            }
            None => {
                self.values[o] = S::nan();
                self.mask[o] = false;
            }
        }
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        &self.mask[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Raw row values, including meaningless entries at missing cells.
    pub fn row_values(&self, i: usize) -> &[S] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn column_observed_count(&self, j: usize) -> usize {
        (0..self.nrows).filter(|&i| self.is_observed(i, j)).count()
    }

    /// Observed values of column `j`, top to bottom.
    pub fn column_observed(&self, j: usize) -> Vec<S> {
        (0..self.nrows).filter_map(|i| self.get(i, j)).collect()
    }

    /// Bit-level equality, treating missing cells as equal regardless of
    /// their stored payload.
    pub fn same_observed(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| !m || a.to_f64().map(f64::to_bits) == b.to_f64().map(f64::to_bits))
    }
}

/// How a tensor was flattened into a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    /// One row per sample, `T * F` columns.
    PatientRows,
    /// One row per `(sample, step)`, `F` columns.
    TimeRows,
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::PatientRows => "patient",
            Layout::TimeRows => "timewise",
        })
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patient" | "PatientRows" => Ok(Layout::PatientRows),
            "timewise" | "TimeRows" => Ok(Layout::TimeRows),
            other => Err(Error::Spec(format!(
                "unknown layout {other:?} (expected patient or timewise)"
            ))),
        }
    }
}

/// Origin of an unfolded column. `step` is `None` for the timewise layout,
/// where every row is a single time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnKey {
    pub step: Option<usize>,
    pub feature: usize,
}

/// Tensor flattened to a matrix, with enough bookkeeping to refold it.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedMatrix<S> {
    pub matrix: MaskedMatrix<S>,
    pub layout: Layout,
    pub n_samples: usize,
    pub n_steps: usize,
    pub n_features: usize,
    pub column_index: Vec<ColumnKey>,
    pub feature_names: Vec<String>,
    pub sample_ids: Vec<String>,
}

/// Column of `(t, f)` in the patient-rows layout: time runs fastest within
/// a feature.
#[inline]
pub fn patient_column(n_steps: usize, t: usize, f: usize) -> usize {
    f * n_steps + t
}

/// Flattens each sample's `T x F` block into one row (`vec`, column-major).
pub fn unfold<S: Scalar>(x: &MtsTensor<S>) -> UnfoldedMatrix<S> {
    let (n, t_len, f_len) = (x.n_samples, x.n_steps, x.n_features);
    let m = t_len * f_len;
    let mut values = vec![S::nan(); n * m];
    let mut mask = vec![false; n * m];
    for i in 0..n {
        for t in 0..t_len {
            for f in 0..f_len {
                let src = x.offset(i, t, f);
                let dst = i * m + patient_column(t_len, t, f);
                values[dst] = x.values[src];
                mask[dst] = x.mask[src];
            }
        }
    }
    let column_index = (0..m)
        .map(|j| ColumnKey {
            step: Some(j % t_len),
            feature: j / t_len,
        })
        .collect();
    UnfoldedMatrix {
        matrix: MaskedMatrix::new(n, m, values, mask).expect("consistent shape"),
        layout: Layout::PatientRows,
        n_samples: n,
        n_steps: t_len,
        n_features: f_len,
        column_index,
        feature_names: x.feature_names.clone(),
        sample_ids: x.sample_ids.clone(),
    }
}

/// Stacks every time step of every sample as its own row: `(N*T) x F`.
pub fn unfold_timewise<S: Scalar>(x: &MtsTensor<S>) -> UnfoldedMatrix<S> {
    let rows = x.n_samples * x.n_steps;
    UnfoldedMatrix {
        matrix: MaskedMatrix::new(rows, x.n_features, x.values.clone(), x.mask.clone())
            .expect("consistent shape"),
        layout: Layout::TimeRows,
        n_samples: x.n_samples,
        n_steps: x.n_steps,
        n_features: x.n_features,
        column_index: (0..x.n_features)
            .map(|f| ColumnKey {
                step: None,
                feature: f,
            })
            .collect(),
        feature_names: x.feature_names.clone(),
        sample_ids: x.sample_ids.clone(),
    }
}

pub fn unfold_with<S: Scalar>(x: &MtsTensor<S>, layout: Layout) -> UnfoldedMatrix<S> {
    match layout {
        Layout::PatientRows => unfold(x),
        Layout::TimeRows => unfold_timewise(x),
    }
}

impl<S: Scalar> UnfoldedMatrix<S> {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Tensor coordinates `(sample, step, feature)` of matrix cell `(r, j)`.
    pub fn tensor_coords(&self, r: usize, j: usize) -> (usize, usize, usize) {
        let key = self.column_index[j];
        match self.layout {
            Layout::PatientRows => (r, key.step.expect("patient layout"), key.feature),
            Layout::TimeRows => (r / self.n_steps, r % self.n_steps, key.feature),
        }
    }

    /// Inverse of [`unfold`] / [`unfold_timewise`].
    pub fn refold(&self) -> MtsTensor<S> {
        let (n, t_len, f_len) = (self.n_samples, self.n_steps, self.n_features);
        let len = n * t_len * f_len;
        let mut values = vec![S::nan(); len];
        let mut mask = vec![false; len];
        for r in 0..self.nrows() {
            for j in 0..self.ncols() {
                let (i, t, f) = self.tensor_coords(r, j);
                let dst = (i * t_len + t) * f_len + f;
                let src = r * self.ncols() + j;
                values[dst] = self.matrix.values[src];
                mask[dst] = self.matrix.mask[src];
            }
        }
        MtsTensor::with_sample_ids(
            n,
            t_len,
            f_len,
            values,
            mask,
            self.feature_names.clone(),
            self.sample_ids.clone(),
        )
        .expect("unfolded matrix came from a valid tensor")
    }
}

/// One cell removed by [`mask_mcar`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct HeldOutCell<S> {
    pub row: usize,
    pub col: usize,
    pub value: S,
}

/// Hides `round(rate * observed)` observed cells, chosen uniformly without
/// replacement. Held-out cells are returned in row-major order.
///
/// For a fixed seed the removed sets are nested across rates.
pub fn mask_mcar<S: Scalar>(
    v: &UnfoldedMatrix<S>,
    rate: f64,
    seed: u64,
) -> Result<(UnfoldedMatrix<S>, Vec<HeldOutCell<S>>)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("masking rate {rate} outside [0, 1]")));
    }
    let mut observed: Vec<usize> = (0..v.matrix.mask.len())
        .filter(|&o| v.matrix.mask[o])
        .collect();
    let k = (rate * observed.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    observed.shuffle(&mut rng);
    let mut chosen = observed[..k].to_vec();
    chosen.sort_unstable();

    let mut masked = v.clone();
    let ncols = v.ncols();
    let held = chosen
        .into_iter()
        .map(|o| {
            let cell = HeldOutCell {
                row: o / ncols,
                col: o % ncols,
                value: v.matrix.values[o],
            };
            masked.matrix.values[o] = S::nan();
            masked.matrix.mask[o] = false;
            cell
        })
        .collect();
    Ok((masked, held))
}

pub fn write_held_out<S: Scalar, W: Write>(cells: &[HeldOutCell<S>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io {
        path: "<held-out output>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(["row", "col", "value"]).map_err(to_io)?;
    for c in cells {
        w.write_record([c.row.to_string(), c.col.to_string(), c.value.to_string()])
            .map_err(to_io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<held-out output>".into(),
        source,
    })
}

pub fn read_held_out<S: Scalar, R: Read>(reader: R) -> Result<Vec<HeldOutCell<S>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |what: &str| Error::Parse {
            line,
            message: format!("bad {what} field"),
        };
        if record.len() != 3 {
            return Err(parse_err("record"));
        }
        out.push(HeldOutCell {
            row: record[0].trim().parse().map_err(|_| parse_err("row"))?,
            col: record[1].trim().parse().map_err(|_| parse_err("col"))?,
            value: S::lit(record[2].trim().parse::<f64>().map_err(|_| parse_err("value"))?),
        });
    }
    Ok(out)
}

/// How a feature was treated by [`standardize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureScaling {
    Scaled,
    /// Zero spread in the training data: centred but not divided.
    Constant,
    /// No training observations: left as is.
    Unobserved,
    /// Deliberately passed through (ordinal features keep their levels).
    Exempt,
}

/// Per-feature z-scoring constants, estimated from training observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StandardizationParams<S> {
    pub feature_names: Vec<String>,
    pub mean: Vec<S>,
    pub sd: Vec<S>,
    pub scaling: Vec<FeatureScaling>,
}

impl<S: Scalar> StandardizationParams<S> {
    pub fn identity(feature_names: Vec<String>) -> Self {
        let f = feature_names.len();
        Self {
            feature_names,
            mean: vec![S::zero(); f],
            sd: vec![S::one(); f],
            scaling: vec![FeatureScaling::Exempt; f],
        }
    }

    /// Population mean and standard deviation of each feature's observed
    /// entries, pooled over every column that belongs to that feature.
    pub fn fit(v: &UnfoldedMatrix<S>) -> Self {
        let f_len = v.n_features;
        let mut sum = vec![S::zero(); f_len];
        let mut count = vec![0usize; f_len];
        for r in 0..v.nrows() {
            for (j, key) in v.column_index.iter().enumerate() {
                if let Some(x) = v.matrix.get(r, j) {
                    sum[key.feature] += x;
                    count[key.feature] += 1;
                }
            }
        }
        let mean: Vec<S> = sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / S::count(c) } else { S::zero() })
            .collect();
        let mut ss = vec![S::zero(); f_len];
        for r in 0..v.nrows() {
            for (j, key) in v.column_index.iter().enumerate() {
                if let Some(x) = v.matrix.get(r, j) {
                    let d = x - mean[key.feature];
                    ss[key.feature] += d * d;
                }
            }
        }
        let mut sd = Vec::with_capacity(f_len);
        let mut scaling = Vec::with_capacity(f_len);
        for f in 0..f_len {
            if count[f] == 0 {
                log::warn!("feature {:?} has no training observations", v.feature_names[f]);
                sd.push(S::one());
                scaling.push(FeatureScaling::Unobserved);
                continue;
            }
            let s = (ss[f] / S::count(count[f])).sqrt();
            if s > S::zero() && s.is_finite() {
                sd.push(s);
                scaling.push(FeatureScaling::Scaled);
            } else {
                log::warn!(
                    "feature {:?} is constant in the training data; left unscaled",
                    v.feature_names[f]
                );
                sd.push(S::one());
                scaling.push(FeatureScaling::Constant);
            }
        }
        Self {
            feature_names: v.feature_names.clone(),
            mean,
            sd,
            scaling,
        }
    }

    /// Makes feature `f` pass through unchanged.
    pub fn exempt(&mut self, f: usize) {
        self.mean[f] = S::zero();
        self.sd[f] = S::one();
        self.scaling[f] = FeatureScaling::Exempt;
    }

    #[inline]
    pub fn forward(&self, f: usize, x: S) -> S {
        match self.scaling[f] {
            FeatureScaling::Exempt | FeatureScaling::Unobserved => x,
            _ => (x - self.mean[f]) / self.sd[f],
        }
    }

    #[inline]
    pub fn inverse(&self, f: usize, z: S) -> S {
        match self.scaling[f] {
            FeatureScaling::Exempt | FeatureScaling::Unobserved => z,
            _ => z * self.sd[f] + self.mean[f],
        }
    }

    fn map(&self, v: &UnfoldedMatrix<S>, forward: bool) -> Result<UnfoldedMatrix<S>> {
        if v.n_features != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardization has {} features, matrix has {}",
                self.mean.len(),
                v.n_features
            )));
        }
        let mut out = v.clone();
        let ncols = v.ncols();
        for r in 0..v.nrows() {
            for (j, key) in v.column_index.iter().enumerate() {
                let o = r * ncols + j;
                if out.matrix.mask[o] {
                    let x = out.matrix.values[o];
                    out.matrix.values[o] = if forward {
                        self.forward(key.feature, x)
                    } else {
                        self.inverse(key.feature, x)
                    };
                }
            }
        }
        Ok(out)
    }

    pub fn destandardize(&self, v: &UnfoldedMatrix<S>) -> Result<UnfoldedMatrix<S>> {
        self.map(v, false)
    }

    pub fn apply(&self, v: &UnfoldedMatrix<S>) -> Result<UnfoldedMatrix<S>> {
        self.map(v, true)
    }
}

/// Z-scores observed entries per feature. Missing cells are untouched.
pub fn standardize<S: Scalar>(
    v: &UnfoldedMatrix<S>,
    params: Option<&StandardizationParams<S>>,
) -> Result<(UnfoldedMatrix<S>, StandardizationParams<S>)> {
    let params = match params {
        Some(p) => p.clone(),
        None => StandardizationParams::fit(v),
    };
    Ok((params.apply(v)?, params))
}
