//! Labeled time-series containers, the text dataset format, and synthetic
//! fixtures.

mod io;
mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{
    load_dataset, load_split_pair, load_suite, parse_dataset, write_dataset, write_suite_member,
    DatasetFormat, SUITE_EXTENSION,
};
pub use synthetic::{generate_blobs, generate_sine_toy, Blobs, SineToy, SINE_TOY_LEN};

/// One sample: `V` variates of equal length `T`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    n_variates: usize,
    len: usize,
}

impl TimeSeries {
    /// Builds a series from one row per variate.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_variates = rows.len();
        if n_variates == 0 {
            return Err(Error::invalid("a time series needs at least one variate"));
        }
        let len = rows[0].len();
        if len == 0 {
            return Err(Error::invalid("a time series needs at least one step"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != len) {
            return Err(Error::shape(format!(
                "variate {bad} has length {}, expected {len}",
                rows[bad].len()
            )));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time series contains a non-finite value"));
        }
        Ok(Self {
            values,
            n_variates,
            len,
        })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values])
    }

    pub fn n_variates(&self) -> usize {
        self.n_variates
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn variate(&self, v: usize) -> &[f64] {
        &self.values[v * self.len..(v + 1) * self.len]
    }

    pub fn variates(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.len)
    }

    /// Applies `f` to every value, keeping the shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.variates().map(|r| r.iter().map(|&x| f(x)).collect()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Univariate,
    Multivariate,
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteKind::Univariate => "univariate",
            SuiteKind::Multivariate => "multivariate",
        })
    }
}

/// Samples with class indices in `[0, K)`.
///
/// `classes[i]` is the original label string of class `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub split: Split,
    samples: Vec<TimeSeries>,
    labels: Vec<usize>,
    classes: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        samples: Vec<TimeSeries>,
        labels: Vec<usize>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::Empty(name));
        }
        if samples.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if classes.len() < 2 {
            return Err(Error::invalid(format!(
                "dataset {name} declares {} classes, need at least 2",
                classes.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {} classes",
                classes.len()
            )));
        }
        let v = samples[0].n_variates();
        if let Some(i) = samples.iter().position(|s| s.n_variates() != v) {
            return Err(Error::InconsistentVariates {
                line: i + 1,
                expected: v,
                found: samples[i].n_variates(),
            });
        }
        Ok(Self {
            name,
            split,
            samples,
            labels,
            classes,
        })
    }

    /// Same as [`LabeledDataset::new`] with classes named `"0".."K-1"`.
    pub fn with_class_count(
        name: impl Into<String>,
        split: Split,
        samples: Vec<TimeSeries>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let classes = (0..n_classes).map(|c| c.to_string()).collect();
        Self::new(name, split, samples, labels, classes)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[TimeSeries] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_variates(&self) -> usize {
        self.samples[0].n_variates()
    }

    pub fn max_len(&self) -> usize {
        self.samples.iter().map(TimeSeries::len).max().unwrap_or(0)
    }

    pub fn min_len(&self) -> usize {
        self.samples.iter().map(TimeSeries::len).min().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TimeSeries, usize)> + '_ {
        self.samples.iter().zip(self.labels.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkEntry {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub kind: SuiteKind,
}

impl BenchmarkEntry {
    pub fn new(train: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        if train.name != test.name {
            return Err(Error::invalid(format!(
                "train/test names differ: {} vs {}",
                train.name, test.name
            )));
        }
        if train.n_classes() != test.n_classes() || train.classes() != test.classes() {
            return Err(Error::invalid(format!(
                "{}: train and test disagree on the class set",
                train.name
            )));
        }
        if train.n_variates() != test.n_variates() {
            return Err(Error::invalid(format!(
                "{}: train has {} variates, test has {}",
                train.name,
                train.n_variates(),
                test.n_variates()
            )));
        }
        let kind = if train.n_variates() == 1 {
            SuiteKind::Univariate
        } else {
            SuiteKind::Multivariate
        };
        Ok(Self { train, test, kind })
    }

    pub fn name(&self) -> &str {
        &self.train.name
    }

    /// Longest sample over both splits.
    pub fn max_len(&self) -> usize {
        self.train.max_len().max(self.test.max_len())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkSuite {
    pub datasets: Vec<BenchmarkEntry>,
}

impl BenchmarkSuite {
    pub fn new(datasets: Vec<BenchmarkEntry>) -> Self {
        Self { datasets }
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.datasets.iter().map(BenchmarkEntry::name).collect()
    }
}

/// Keeps datasets whose longest sample (train and test) is at most `max_len`.
/// `max_len == 0` disables the filter.
pub fn filter_by_length(suite: &BenchmarkSuite, max_len: usize) -> BenchmarkSuite {
    if max_len == 0 {
        return suite.clone();
    }
    BenchmarkSuite {
        datasets: suite
            .datasets
            .iter()
            .filter(|e| e.max_len() <= max_len)
            .cloned()
            .collect(),
    }
}
