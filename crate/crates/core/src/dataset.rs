//! Predictor/response data with optional per-object response weights.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Result, SrcekError};

/// An `m x n` predictor matrix with its `m` responses.
///
/// `gamma` holds the (diagonal) response weights; plain PLS uses all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub gamma: Array1<f64>,
    pub channel_labels: Option<Vec<String>>,
    pub object_labels: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset with unit response weights.
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let gamma = Array1::ones(y.len());
        Self::with_gamma(x, y, gamma)
    }

    pub fn with_gamma(x: Array2<f64>, y: Array1<f64>, gamma: Array1<f64>) -> Result<Self> {
        let data = Dataset {
            x,
            y,
            gamma,
            channel_labels: None,
            object_labels: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_channel_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_channels() {
            return Err(SrcekError::DimensionMismatch(format!(
                "{} channel labels for {} channels",
                labels.len(),
                self.n_channels()
            )));
        }
        self.channel_labels = Some(labels);
        Ok(self)
    }

    pub fn with_object_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_objects() {
            return Err(SrcekError::DimensionMismatch(format!(
                "{} object labels for {} objects",
                labels.len(),
                self.n_objects()
            )));
        }
        self.object_labels = Some(labels);
        Ok(self)
    }

    pub fn n_objects(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.x.dim();
        if self.y.len() != m {
            return Err(SrcekError::DimensionMismatch(format!(
                "predictor matrix has {m} rows but response has {} entries",
                self.y.len()
            )));
        }
        if self.gamma.len() != m {
            return Err(SrcekError::DimensionMismatch(format!(
                "predictor matrix has {m} rows but {} response weights were given",
                self.gamma.len()
            )));
        }
        if m < 2 {
            return Err(SrcekError::InvalidDataset(format!(
                "at least 2 objects are required, got {m}"
            )));
        }
        if n < 1 {
            return Err(SrcekError::InvalidDataset(
                "at least one channel is required".into(),
            ));
        }
        if let Some(i) = self.gamma.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(SrcekError::InvalidDataset(format!(
                "response weight {i} is not strictly positive"
            )));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(SrcekError::InvalidDataset(
                "predictor matrix contains non-finite entries".into(),
            ));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(SrcekError::InvalidDataset(
                "response contains non-finite entries".into(),
            ));
        }
        Ok(())
    }

    /// Rows `idx` of the dataset. Labels follow the selected objects.
    pub fn select_objects(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            gamma: self.gamma.select(Axis(0), idx),
            channel_labels: self.channel_labels.clone(),
            object_labels: self
                .object_labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// Columns `idx` of the dataset.
    pub fn select_channels(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(1), idx),
            y: self.y.clone(),
            gamma: self.gamma.clone(),
            channel_labels: self
                .channel_labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
            object_labels: self.object_labels.clone(),
        }
    }

    /// The dataset with predictors replaced by `X diag(lambda)`.
    pub fn weighted(&self, lambda: &Array1<f64>) -> Result<Dataset> {
        if lambda.len() != self.n_channels() {
            return Err(SrcekError::DimensionMismatch(format!(
                "{} weights for {} channels",
                lambda.len(),
                self.n_channels()
            )));
        }
        let mut out = self.clone();
        out.x *= &lambda.view().insert_axis(Axis(0));
        Ok(out)
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma.sum()
    }

    /// Response-weighted mean of the response.
    pub fn weighted_mean_y(&self) -> f64 {
        self.gamma.dot(&self.y) / self.gamma_sum()
    }
}
