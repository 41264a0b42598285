//! Tabular data: CSV ingestion, categorical handling, seeded splits and network input encoding.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::subset::FeatureSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Values are stored as level indices `0..levels.len()`.
    Categorical { levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Numeric }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    Regression(Vec<f64>),
    Classes { labels: Vec<usize>, names: Vec<String> },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Regression(v) => v.len(),
            Labels::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Labels::Regression(_) => Task::Regression,
            Labels::Classes { .. } => Task::Classification,
        }
    }

    /// Output channels a model needs: 1 for regression, one per class otherwise.
    pub fn outputs(&self) -> usize {
        match self {
            Labels::Regression(_) => 1,
            Labels::Classes { names, .. } => names.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Regression(v) => Labels::Regression(idx.iter().map(|&i| v[i]).collect()),
            Labels::Classes { labels, names } => Labels::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                names: names.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<FeatureSpec>,
    pub x: Array2<f64>,
    pub y: Labels,
    pub target: String,
}

impl Dataset {
    pub fn new(features: Vec<FeatureSpec>, x: Array2<f64>, y: Labels, target: impl Into<String>) -> Result<Self> {
        if x.ncols() != features.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: x.ncols() });
        }
        if x.nrows() != y.len() {
            return Err(Error::Data(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if x.nrows() == 0 {
            return Err(Error::Data("dataset is empty".into()));
        }
        Ok(Dataset { features, x, y, target: target.into() })
    }

    pub fn d(&self) -> usize {
        self.features.len()
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.clone(),
            x: self.x.select(Axis(0), idx),
            y: self.y.select(idx),
            target: self.target.clone(),
        }
    }

    /// Seeded shuffle split into `(train, test)`.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidParameter(format!("test fraction must be in [0, 1), got {test_fraction}")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        if n_test == 0 || n_test == self.len() {
            return Err(Error::Data("split leaves an empty partition".into()));
        }
        Ok((self.select(&idx[n_test..]), self.select(&idx[..n_test])))
    }
}

/// Options for [`load_csv`].
#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    pub target: String,
    pub task: Option<Task>,
    /// Columns forced to categorical; non-numeric columns are always categorical.
    pub categorical: Vec<String>,
    pub drop: Vec<String>,
    /// Prefixes of one-hot column groups to fold into a single categorical feature named by the
    /// prefix; its level is the name of the hot column (`none` if no column is hot).
    pub collapse: Vec<String>,
}

/// Reads a headered CSV; empty cells are rejected.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_col = headers
        .iter()
        .position(|h| *h == opts.target)
        .ok_or_else(|| Error::Data(format!("target column {:?} not found in {}", opts.target, path.display())))?;
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Data(format!("empty cell in column {:?}", headers[j])));
            }
            columns[j].push(cell.to_string());
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(Error::Data(format!("{} has no rows", path.display())));
    }
    let parse_numeric = |col: &[String]| -> Option<Vec<f64>> { col.iter().map(|c| c.parse::<f64>().ok()).collect() };

    let mut features = Vec::new();
    let mut x_cols: Vec<Vec<f64>> = Vec::new();
    let group_of = |j: usize| opts.collapse.iter().position(|p| j != target_col && headers[j].starts_with(p.as_str()));
    let mut emitted = vec![false; opts.collapse.len()];
    for (j, name) in headers.iter().enumerate() {
        if j == target_col || opts.drop.contains(name) {
            continue;
        }
        if let Some(g) = group_of(j) {
            if std::mem::replace(&mut emitted[g], true) {
                continue;
            }
            let members: Vec<usize> = (0..headers.len()).filter(|&k| group_of(k) == Some(g) && !opts.drop.contains(&headers[k])).collect();
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let mut hot = None;
                for &k in &members {
                    match columns[k][i].parse::<f64>() {
                        Ok(v) if v == 0.0 => {}
                        Ok(v) if v == 1.0 && hot.is_none() => hot = Some(k),
                        _ => {
                            return Err(Error::Data(format!(
                                "row {} of group {:?} is not one-hot",
                                i + 1,
                                opts.collapse[g]
                            )))
                        }
                    }
                }
                labels.push(hot.map_or_else(|| "none".to_string(), |k| headers[k].clone()));
            }
            let (levels, codes) = categorical_codes(&labels);
            features.push(FeatureSpec { name: opts.collapse[g].clone(), kind: FeatureKind::Categorical { levels } });
            x_cols.push(codes);
            continue;
        }
        let forced = opts.categorical.contains(name);
        match (forced, parse_numeric(&columns[j])) {
            (false, Some(v)) => {
                features.push(FeatureSpec::numeric(name.clone()));
                x_cols.push(v);
            }
            _ => {
                let (levels, codes) = categorical_codes(&columns[j]);
                features.push(FeatureSpec { name: name.clone(), kind: FeatureKind::Categorical { levels } });
                x_cols.push(codes);
            }
        }
    }
    if features.is_empty() || features.len() > crate::subset::MAX_EXHAUSTIVE_D {
        return Err(Error::DimensionOutOfRange(features.len()));
    }
    let target = &columns[target_col];
    let task = opts.task.unwrap_or(if parse_numeric(target).is_some() { Task::Regression } else { Task::Classification });
    let y = match task {
        Task::Regression => Labels::Regression(
            parse_numeric(target).ok_or_else(|| Error::Data("regression target is not numeric".into()))?,
        ),
        Task::Classification => {
            let (names, codes) = categorical_codes(target);
            if names.len() < 2 {
                return Err(Error::Data("classification target has fewer than two classes".into()));
            }
            Labels::Classes { labels: codes.into_iter().map(|c| c as usize).collect(), names }
        }
    };
    let mut x = Array2::zeros((n, features.len()));
    for (j, col) in x_cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    Dataset::new(features, x, y, opts.target.clone())
}

fn categorical_codes(col: &[String]) -> (Vec<String>, Vec<f64>) {
    let levels: Vec<String> = col.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let codes = col
        .iter()
        .map(|c| levels.binary_search(c).expect("level present") as f64)
        .collect();
    (levels, codes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Column {
    Numeric { mean: f64, scale: f64 },
    /// One-hot over the levels plus a trailing "masked" slot.
    Categorical { levels: usize },
}

impl Column {
    fn width(&self) -> usize {
        match self {
            Column::Numeric { .. } => 1,
            Column::Categorical { levels } => levels + 1,
        }
    }
}

/// Maps raw feature rows (optionally with a mask) to network inputs.
///
/// Numeric features are standardized and zeroed when masked; categoricals are one-hot with a
/// dedicated masked slot. The masked encoding appends the `d` mask bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputEncoder {
    columns: Vec<Column>,
}

impl InputEncoder {
    /// Fits standardization statistics on `x`.
    pub fn fit(features: &[FeatureSpec], x: &Array2<f64>) -> Result<Self> {
        if x.ncols() != features.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: x.ncols() });
        }
        let columns = features
            .iter()
            .enumerate()
            .map(|(j, f)| match &f.kind {
                FeatureKind::Numeric => {
                    let col = x.column(j);
                    let n = col.len().max(1) as f64;
                    let mean = col.sum() / n;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    Column::Numeric { mean, scale: if var > 0.0 { var.sqrt() } else { 1.0 } }
                }
                FeatureKind::Categorical { levels } => Column::Categorical { levels: levels.len() },
            })
            .collect();
        Ok(InputEncoder { columns })
    }

    /// Identity encoding for `d` numeric features.
    pub fn identity(d: usize) -> Self {
        InputEncoder { columns: vec![Column::Numeric { mean: 0.0, scale: 1.0 }; d] }
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    /// Width without the mask channel.
    pub fn width(&self) -> usize {
        self.columns.iter().map(Column::width).sum()
    }

    pub fn masked_width(&self) -> usize {
        self.width() + self.d()
    }

    fn write_values(&self, x: &[f64], mask: FeatureSet, out: &mut [f64]) {
        let mut o = 0;
        for (j, col) in self.columns.iter().enumerate() {
            let on = mask.contains(j);
            match col {
                Column::Numeric { mean, scale } => {
                    out[o] = if on { (x[j] - mean) / scale } else { 0.0 };
                    o += 1;
                }
                Column::Categorical { levels } => {
                    out[o..o + levels + 1].iter_mut().for_each(|v| *v = 0.0);
                    let slot = if on { (x[j] as usize).min(*levels) } else { *levels };
                    out[o + slot] = 1.0;
                    o += levels + 1;
                }
            }
        }
    }

    /// Writes `width()` entries for a fully observed row.
    pub fn encode_into(&self, x: &[f64], out: &mut [f64]) {
        self.write_values(x, FeatureSet::full(self.d()), out);
    }

    /// Writes `masked_width()` entries: masked values then the mask bits.
    pub fn encode_masked_into(&self, x: &[f64], mask: FeatureSet, out: &mut [f64]) {
        let w = self.width();
        self.write_values(x, mask, &mut out[..w]);
        for j in 0..self.d() {
            out[w + j] = if mask.contains(j) { 1.0 } else { 0.0 };
        }
    }

    pub fn encode_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.width()));
        for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
            self.encode_into(&row.to_vec(), o.as_slice_mut().expect("contiguous"));
        }
        out
    }
}
