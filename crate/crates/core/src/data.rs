//! Datasets, CSV ingestion, standardization and the nonconformity functions.

use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

/// Response vector: real values or class indices in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Response {
    Real(Vec<f64>),
    Class { labels: Vec<usize>, n_classes: usize },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Real(y) => y.len(),
            Response::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Response::Real(_) => Task::Regression,
            Response::Class { .. } => Task::Classification,
        }
    }

    /// Prediction dimension d.
    pub fn output_dim(&self) -> usize {
        match self {
            Response::Real(_) => 1,
            Response::Class { n_classes, .. } => *n_classes,
        }
    }

    /// Response of row `i` as a borrowed scalar.
    pub fn target(&self, i: usize) -> Target {
        match self {
            Response::Real(y) => Target::Real(y[i]),
            Response::Class { labels, .. } => Target::Class(labels[i]),
        }
    }

    /// Responses restricted to `rows`.
    pub fn subset(&self, rows: &[usize]) -> Response {
        match self {
            Response::Real(y) => Response::Real(rows.iter().map(|&i| y[i]).collect()),
            Response::Class { labels, n_classes } => Response::Class {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }

    pub fn as_targets(&self) -> Targets<'_> {
        match self {
            Response::Real(y) => Targets::Real(y),
            Response::Class { labels, n_classes } => Targets::Class {
                labels,
                n_classes: *n_classes,
            },
        }
    }
}

/// Borrowed response slice handed to base learners.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Real(&'a [f64]),
    Class { labels: &'a [usize], n_classes: usize },
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(y) => y.len(),
            Targets::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Targets::Real(_) => 1,
            Targets::Class { n_classes, .. } => *n_classes,
        }
    }
}

/// A single response value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Real(f64),
    Class(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Response,
    pub feature_names: Option<Vec<String>>,
    /// Original label strings for classification targets, indexed by class.
    pub class_labels: Option<Vec<String>>,
    pub target_name: Option<String>,
}

impl Dataset {
    /// Validating constructor.
    pub fn new(x: Array2<f64>, y: Response) -> Result<Self> {
        let (n, m) = x.dim();
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        if m < 2 {
            return Err(Error::InvalidSize(format!("need at least 2 features, found {m}")));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, col });
        }
        match &y {
            Response::Real(v) => {
                if let Some(row) = v.iter().position(|t| !t.is_finite()) {
                    return Err(Error::NonFiniteValue { row, col: m });
                }
            }
            Response::Class { labels, n_classes } => {
                if *n_classes < 2 {
                    return Err(Error::InvalidSize("need at least 2 classes".into()));
                }
                if let Some(&index) = labels.iter().find(|&&l| l >= *n_classes) {
                    return Err(Error::InvalidClassIndex {
                        index,
                        classes: *n_classes,
                    });
                }
            }
        }
        Ok(Dataset {
            x,
            y,
            feature_names: None,
            class_labels: None,
            target_name: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn task(&self) -> Task {
        self.y.task()
    }

    pub fn output_dim(&self) -> usize {
        self.y.output_dim()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn feature_name(&self, j: usize) -> String {
        self.feature_names
            .as_ref()
            .map(|n| n[j].clone())
            .unwrap_or_else(|| format!("x{j}"))
    }

    /// Rows `rows` as a new dataset (metadata retained).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.subset(rows),
            feature_names: self.feature_names.clone(),
            class_labels: self.class_labels.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Model output: a length-d vector (d = 1 for regression, class
/// probabilities for classification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction(pub Vec<f64>);

impl Prediction {
    pub fn scalar(v: f64) -> Self {
        Prediction(vec![v])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Nonconformity functions. `Absolute` and `OneMinusProb` are the defaults
/// for regression and classification; `Squared` is used by the linear-model
/// closed-form checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFn {
    Absolute,
    Squared,
    OneMinusProb,
}

impl ErrorFn {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Regression => ErrorFn::Absolute,
            Task::Classification => ErrorFn::OneMinusProb,
        }
    }

    /// Lipschitz constant in the prediction (None for squared error).
    pub fn lipschitz(self) -> Option<f64> {
        match self {
            ErrorFn::Absolute | ErrorFn::OneMinusProb => Some(1.0),
            ErrorFn::Squared => None,
        }
    }

    pub fn score(self, y: Target, yhat: &[f64]) -> Result<f64> {
        match (self, y) {
            (ErrorFn::Absolute | ErrorFn::Squared, Target::Real(y)) => {
                if yhat.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: yhat.len(),
                    });
                }
                let r = y - yhat[0];
                Ok(if self == ErrorFn::Absolute { r.abs() } else { r * r })
            }
            (ErrorFn::OneMinusProb, Target::Class(c)) => {
                if c >= yhat.len() {
                    return Err(Error::InvalidClassIndex {
                        index: c,
                        classes: yhat.len(),
                    });
                }
                Ok(1.0 - yhat[c])
            }
            (ErrorFn::OneMinusProb, Target::Real(_)) => Err(Error::TaskMismatch {
                expected: "classification",
            }),
            (_, Target::Class(_)) => Err(Error::TaskMismatch {
                expected: "regression",
            }),
        }
    }
}

/// Default nonconformity score for `task`: |y − ŷ| or 1 − ŷ_y.
pub fn error_score(task: Task, y: Target, yhat: &Prediction) -> Result<f64> {
    ErrorFn::default_for(task).score(y, yhat.values())
}

/// Read a CSV file with a header row. `target` names the response column
/// (or gives its zero-based index as a decimal string).
pub fn load_dataset(path: impl AsRef<Path>, task: Task, target: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file, task, target)
}

pub fn read_dataset(reader: impl std::io::Read, task: Task, target: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let target_col = header
        .iter()
        .position(|h| h == target)
        .or_else(|| target.parse::<usize>().ok().filter(|&i| i < header.len()))
        .ok_or_else(|| Error::MissingColumn(target.to_string()))?;

    let n_features = header.len() - 1;
    let mut values = Vec::new();
    let mut real_y = Vec::new();
    let mut class_y = Vec::new();
    let mut class_labels: Vec<String> = Vec::new();
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                got: record.len(),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            if col == target_col {
                match task {
                    Task::Regression => real_y.push(parse_cell(cell, row, col)?),
                    Task::Classification => {
                        let idx = match class_labels.iter().position(|l| l == cell) {
                            Some(idx) => idx,
                            None => {
                                class_labels.push(cell.to_string());
                                class_labels.len() - 1
                            }
                        };
                        class_y.push(idx);
                    }
                }
            } else {
                values.push(parse_cell(cell, row, col)?);
            }
        }
        n_rows += 1;
    }
    if n_rows < 2 {
        return Err(Error::TooFewRows(n_rows));
    }
    let x = Array2::from_shape_vec((n_rows, n_features), values)
        .map_err(|e| Error::InvalidSize(e.to_string()))?;
    let y = match task {
        Task::Regression => Response::Real(real_y),
        Task::Classification => Response::Class {
            labels: class_y,
            n_classes: class_labels.len().max(2),
        },
    };
    let names = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut ds = Dataset::new(x, y)?.with_feature_names(names)?;
    ds.target_name = Some(header[target_col].clone());
    if task == Task::Classification {
        ds.class_labels = Some(class_labels);
    }
    Ok(ds)
}

/// Read the columns named `names`, in that order, from a headed CSV. Other
/// columns (such as a response) are ignored.
pub fn read_features(reader: impl std::io::Read, names: &[String]) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let cols = names
        .iter()
        .map(|n| header.iter().position(|h| h == n).ok_or_else(|| Error::MissingColumn(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                got: record.len(),
            });
        }
        for &col in &cols {
            values.push(parse_cell(&record[col], row, col)?);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyInput);
    }
    Array2::from_shape_vec((n_rows, cols.len()), values).map_err(|e| Error::InvalidSize(e.to_string()))
}

pub fn load_features(path: impl AsRef<Path>, names: &[String]) -> Result<Array2<f64>> {
    read_features(std::fs::File::open(path.as_ref())?, names)
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::NonNumericCell { row, col })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue { row, col });
    }
    Ok(v)
}

/// Write features then target as CSV. Floats use the shortest representation
/// that parses back to the same bits.
pub fn write_dataset(ds: &Dataset, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.n_features()).map(|j| ds.feature_name(j)).collect();
    header.push(ds.target_name.clone().unwrap_or_else(|| "y".to_string()));
    w.write_record(&header)?;
    for i in 0..ds.n_obs() {
        let mut rec: Vec<String> = ds.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(match &ds.y {
            Response::Real(y) => y[i].to_string(),
            Response::Class { labels, .. } => match &ds.class_labels {
                Some(names) => names[labels[i]].clone(),
                None => labels[i].to_string(),
            },
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_dataset(ds, std::io::BufWriter::new(file))
}

/// Per-feature centering and scaling record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// (mean, scale) of the response when it was standardized.
    pub response: Option<(f64, f64)>,
}

impl Standardization {
    /// Map a standardized dataset back to the original units.
    pub fn inverse(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for (j, mut col) in out.x.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v * self.scales[j] + self.means[j]);
        }
        if let (Some((mu, s)), Response::Real(y)) = (self.response, &mut out.y) {
            y.iter_mut().for_each(|v| *v = *v * s + mu);
        }
        out
    }

    /// Apply the stored transform to a raw feature vector.
    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Center every feature to mean 0 and scale to unit sample variance.
/// The response is standardized only for regression and when
/// `standardize_response` is set.
pub fn standardize(ds: &Dataset, standardize_response: bool) -> Result<(Dataset, Standardization)> {
    let mut out = ds.clone();
    let mut means = Vec::with_capacity(ds.n_features());
    let mut scales = Vec::with_capacity(ds.n_features());
    for (j, mut col) in out.x.axis_iter_mut(Axis(1)).enumerate() {
        let (mean, sd) = mean_sd(col.iter().copied());
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ZeroVarianceFeature(j));
        }
        col.mapv_inplace(|v| (v - mean) / sd);
        means.push(mean);
        scales.push(sd);
    }
    let mut response = None;
    if standardize_response {
        if let Response::Real(y) = &mut out.y {
            let (mean, sd) = mean_sd(y.iter().copied());
            if sd > 0.0 {
                y.iter_mut().for_each(|v| *v = (*v - mean) / sd);
                response = Some((mean, sd));
            }
        }
    }
    Ok((
        out,
        Standardization {
            means,
            scales,
            response,
        },
    ))
}
