//! Sources of per-layer hidden states for a single univariate series.

mod file;
mod mock;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::{Error, Result};

pub use file::{
    export_hidden_states, file_extract, interchange_path, read_hidden_states, write_hidden_states,
    FileProvider, HiddenStateFile, InterchangeHeader, FORMAT_VERSION,
};
pub use mock::{instance_normalize, MockProvider};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `L` matrices of shape `seq'_l × D_l`, one per captured layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    layers: Vec<Matrix>,
}

impl HiddenStates {
    pub fn new(layers: Vec<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("hidden states need at least one layer"));
        }
        if let Some(l) = layers.iter().position(Matrix::is_empty) {
            return Err(Error::shape(format!("layer {l} is empty")));
        }
        if layers.iter().any(|m| m.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("hidden states contain a non-finite value"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(Matrix::cols).collect()
    }
}

/// Which transform of the raw sample a request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesView {
    Raw,
    Differenced,
}

/// Identifies the series being embedded. File-backed providers look states
/// up by this key; the mock provider ignores it.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRef<'a> {
    pub dataset: &'a str,
    pub split: Split,
    pub sample: usize,
    pub view: SeriesView,
}

impl<'a> SeriesRef<'a> {
    pub fn raw(dataset: &'a str, split: Split, sample: usize) -> Self {
        Self {
            dataset,
            split,
            sample,
            view: SeriesView::Raw,
        }
    }

    pub fn with_view(self, view: SeriesView) -> Self {
        Self { view, ..self }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;

    /// Hidden states for variate `variate` of the referenced series, whose
    /// values are `values`.
    fn hidden_states(&self, at: &SeriesRef<'_>, variate: usize, values: &[f64])
        -> Result<HiddenStates>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Identity,
}

impl Nonlinearity {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Identity => x,
        }
    }
}

fn default_layers() -> usize {
    4
}
fn default_width() -> usize {
    32
}
fn default_patch() -> usize {
    16
}
fn default_model_id() -> String {
    "mock".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSpec {
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_patch")]
    pub patch: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

impl Default for MockSpec {
    fn default() -> Self {
        Self {
            model_id: default_model_id(),
            layers: default_layers(),
            width: default_width(),
            patch: default_patch(),
            seed: 0,
            nonlinearity: Nonlinearity::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub model_id: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    Mock(MockSpec),
    File(FileSpec),
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::Mock(MockSpec::default())
    }
}

impl ProviderSpec {
    pub fn model_id(&self) -> &str {
        match self {
            ProviderSpec::Mock(m) => &m.model_id,
            ProviderSpec::File(f) => &f.model_id,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::Mock(m) => Arc::new(MockProvider::new(m.clone())?),
            ProviderSpec::File(f) => Arc::new(FileProvider::new(f.clone())),
        })
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Mock(m) => write!(
                f,
                "mock:{} (L={}, D={}, w={}, seed={})",
                m.model_id, m.layers, m.width, m.patch, m.seed
            ),
            ProviderSpec::File(s) => write!(f, "file:{} ({})", s.model_id, s.dir.display()),
        }
    }
}
