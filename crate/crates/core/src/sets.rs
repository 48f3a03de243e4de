//! Labeled and unlabeled example sets.
//!
//! A [`LabeledSet`] is the `(x, y)` collection used for training data, the
//! natural test set and its attacked copy. Dropping the labels yields an
//! [`UnlabeledSet`], which is all a transductive defender ever receives.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix plus one class index per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLabeled", into = "RawLabeled")]
pub struct LabeledSet {
    features: Array2<f64>,
    labels: Vec<usize>,
    unit_box: bool,
}

/// Feature matrix without labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnlabeled", into = "RawUnlabeled")]
pub struct UnlabeledSet {
    features: Array2<f64>,
}

fn check_finite(features: &Array2<f64>) -> Result<()> {
    if features.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("feature matrix".into()))
    }
}

impl LabeledSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        check_finite(&features)?;
        Ok(Self {
            features,
            labels,
            unit_box: false,
        })
    }

    /// Like [`LabeledSet::new`] but additionally requires every feature in `[0, 1]`.
    pub fn new_unit_box(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let mut set = Self::new(features, labels)?;
        if set.features.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::BadParams("feature outside [0, 1] in unit-box set".into()));
        }
        set.unit_box = true;
        Ok(set)
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch { expected: dim, got: row.len() });
            }
            flat.extend_from_slice(row);
        }
        let features = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::BadParams(e.to_string()))?;
        Self::new(features, labels)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            features: Array2::zeros((0, dim)),
            labels: Vec::new(),
            unit_box: false,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn is_unit_box(&self) -> bool {
        self.unit_box
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ArrayView1<'_, f64>, usize)> + '_ {
        self.features.outer_iter().zip(self.labels.iter().copied())
    }

    /// Largest label plus one (0 for an empty set).
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            unit_box: self.unit_box,
        }
    }

    /// Same labels, new features (e.g. an attacked copy).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        if features.dim() != self.features.dim() {
            return Err(Error::DimMismatch {
                expected: self.features.len(),
                got: features.len(),
            });
        }
        check_finite(&features)?;
        Ok(Self {
            features,
            labels: self.labels.clone(),
            unit_box: self.unit_box,
        })
    }

    /// Concatenate two sets with the same dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: other.dim() });
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| Error::BadParams(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self {
            features,
            labels,
            unit_box: self.unit_box && other.unit_box,
        })
    }
}

impl UnlabeledSet {
    pub fn new(features: Array2<f64>) -> Result<Self> {
        check_finite(&features)?;
        Ok(Self { features })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let labels = vec![0; rows.len()];
        LabeledSet::from_rows(rows, labels).map(|s| project_features(&s))
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Column means, `None` when empty.
    pub fn mean(&self) -> Option<Array1<f64>> {
        self.features.mean_axis(Axis(0))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
        }
    }

    /// Attach labels, producing a labeled set over the same rows.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<LabeledSet> {
        LabeledSet::new(self.features.clone(), labels)
    }
}

/// Drop the labels of `set`, keeping the row order.
pub fn project_features(set: &LabeledSet) -> UnlabeledSet {
    UnlabeledSet {
        features: set.features.clone(),
    }
}

#[derive(Serialize, Deserialize)]
struct RawLabeled {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
    #[serde(default)]
    unit_box: bool,
}

impl From<LabeledSet> for RawLabeled {
    fn from(s: LabeledSet) -> Self {
        let (rows, cols) = s.features.dim();
        Self {
            rows,
            cols,
            data: s.features.iter().copied().collect(),
            labels: s.labels,
            unit_box: s.unit_box,
        }
    }
}

impl TryFrom<RawLabeled> for LabeledSet {
    type Error = Error;

    fn try_from(raw: RawLabeled) -> Result<Self> {
        let features = Array2::from_shape_vec((raw.rows, raw.cols), raw.data)
            .map_err(|e| Error::BadParams(e.to_string()))?;
        if raw.unit_box {
            LabeledSet::new_unit_box(features, raw.labels)
        } else {
            LabeledSet::new(features, raw.labels)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawUnlabeled {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<UnlabeledSet> for RawUnlabeled {
    fn from(s: UnlabeledSet) -> Self {
        let (rows, cols) = s.features.dim();
        Self {
            rows,
            cols,
            data: s.features.iter().copied().collect(),
        }
    }
}

impl TryFrom<RawUnlabeled> for UnlabeledSet {
    type Error = Error;

    fn try_from(raw: RawUnlabeled) -> Result<Self> {
        let features = Array2::from_shape_vec((raw.rows, raw.cols), raw.data)
            .map_err(|e| Error::BadParams(e.to_string()))?;
        UnlabeledSet::new(features)
    }
}
