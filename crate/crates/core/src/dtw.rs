//! Dynamic time warping distance and the nearest-neighbour baseline built on it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, TimeSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtwMode {
    /// One warping path shared by all variates; step cost is the squared
    /// Euclidean distance across variates.
    #[default]
    Dependent,
    /// Sum of univariate distances, one warping path per variate.
    Independent,
}

impl fmt::Display for DtwMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DtwMode::Dependent => "dependent",
            DtwMode::Independent => "independent",
        })
    }
}

impl FromStr for DtwMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dependent" => Ok(DtwMode::Dependent),
            "independent" => Ok(DtwMode::Independent),
            other => Err(Error::invalid(format!("unknown DTW mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtwConfig {
    pub k: usize,
    pub mode: DtwMode,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            k: 1,
            mode: DtwMode::Dependent,
        }
    }
}

impl DtwConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("DTW k must be >= 1"));
        }
        Ok(())
    }

    /// Row label, e.g. `DTW (1-NN)`.
    pub fn label(&self) -> String {
        format!("DTW ({}-NN)", self.k)
    }
}

/// Full cost table without a warping window. `cost(i, j)` is the local cost
/// of aligning step `i` of the first series with step `j` of the second.
fn dp(ta: usize, tb: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    let mut prev = vec![f64::INFINITY; tb + 1];
    let mut cur = vec![f64::INFINITY; tb + 1];
    prev[0] = 0.0;
    for i in 1..=ta {
        cur[0] = f64::INFINITY;
        for j in 1..=tb {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = cost(i - 1, j - 1) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[tb]
}

/// Accumulated squared cost of the optimal alignment (no square root).
pub fn dtw_distance(a: &TimeSeries, b: &TimeSeries, mode: DtwMode) -> Result<f64> {
    if a.n_variates() != b.n_variates() {
        return Err(Error::shape(format!(
            "variate count mismatch: {} vs {}",
            a.n_variates(),
            b.n_variates()
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("DTW needs non-empty series".into()));
    }
    let v = a.n_variates();
    Ok(match mode {
        DtwMode::Dependent if v == 1 => {
            let (x, y) = (a.variate(0), b.variate(0));
            dp(x.len(), y.len(), |i, j| (x[i] - y[j]).powi(2))
        }
        DtwMode::Dependent => {
            let av: Vec<&[f64]> = (0..v).map(|i| a.variate(i)).collect();
            let bv: Vec<&[f64]> = (0..v).map(|i| b.variate(i)).collect();
            dp(a.len(), b.len(), |i, j| {
                av.iter().zip(&bv).map(|(x, y)| (x[i] - y[j]).powi(2)).sum()
            })
        }
        DtwMode::Independent => (0..v)
            .map(|c| {
                let (x, y) = (a.variate(c), b.variate(c));
                dp(x.len(), y.len(), |i, j| (x[i] - y[j]).powi(2))
            })
            .sum(),
    })
}

/// Votes among the `k` nearest training series. Neighbours are ranked by
/// distance then training index; the vote is won by the most frequent
/// class, ties going to the smallest class index.
pub fn dtw_knn_classify(
    train: &LabeledDataset,
    test: &LabeledDataset,
    config: &DtwConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    if train.n_variates() != test.n_variates() {
        return Err(Error::invalid(format!(
            "train has {} variates, test has {}",
            train.n_variates(),
            test.n_variates()
        )));
    }
    if train.n_classes() != test.n_classes() {
        return Err(Error::invalid("train and test class counts differ"));
    }
    if config.k > train.len() {
        return Err(Error::invalid(format!(
            "k = {} exceeds the {} training series",
            config.k,
            train.len()
        )));
    }
    test.samples()
        .par_iter()
        .map(|q| {
            let mut d = train
                .samples()
                .iter()
                .enumerate()
                .map(|(i, s)| dtw_distance(s, q, config.mode).map(|d| (d, i)))
                .collect::<Result<Vec<_>>>()?;
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let labels = d[..config.k].iter().map(|&(_, i)| train.labels()[i]);
            Ok(crate::classify::majority_vote(labels, train.n_classes()))
        })
        .collect()
}
