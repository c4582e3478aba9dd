//! Classifier heads trained on embedding vectors.

mod forest;
mod knn;
mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use forest::{train_forest, DecisionTree, ForestConfig, RandomForest};
pub use knn::{cosine_distance, knn_predict, KnnModel};
pub use linear::{
    fit_without_validation, objective_and_gradient, train_linear, LinearModel, LinearParams,
    LinearTrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[default]
    Forest,
    Linear,
    Knn,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::Linear => "linear",
            ClassifierKind::Knn => "knn",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(ClassifierKind::Forest),
            "linear" => Ok(ClassifierKind::Linear),
            "knn" => Ok(ClassifierKind::Knn),
            other => Err(Error::invalid(format!("unknown classifier {other:?}"))),
        }
    }
}

fn default_trees() -> usize {
    300
}
fn default_neighbors() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    #[serde(default)]
    pub kind: ClassifierKind,
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    #[serde(default)]
    pub linear: LinearTrainConfig,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for forest training; `None` uses the ambient pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Forest,
            n_trees: default_trees(),
            neighbors: default_neighbors(),
            linear: LinearTrainConfig::default(),
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedClassifier {
    Forest(RandomForest),
    Linear(LinearModel),
    Knn(KnnModel),
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::Forest(_) => ClassifierKind::Forest,
            TrainedClassifier::Linear(_) => ClassifierKind::Linear,
            TrainedClassifier::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedClassifier::Forest(m) => m.n_features(),
            TrainedClassifier::Linear(m) => m.n_features(),
            TrainedClassifier::Knn(m) => m.n_features(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            TrainedClassifier::Forest(m) => m.n_classes(),
            TrainedClassifier::Linear(m) => m.n_classes(),
            TrainedClassifier::Knn(m) => m.n_classes(),
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        check_width(x, self.n_features())?;
        Ok(match self {
            TrainedClassifier::Forest(m) => x.iter().map(|r| m.predict_one(r)).collect(),
            TrainedClassifier::Linear(m) => x.iter().map(|r| m.predict_one(r)).collect(),
            TrainedClassifier::Knn(m) => m.predict(x),
        })
    }
}

/// Trains the head selected by `config.kind`.
pub fn train_classifier(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    Ok(match config.kind {
        ClassifierKind::Forest => TrainedClassifier::Forest(train_forest(
            x,
            y,
            n_classes,
            &ForestConfig {
                n_trees: config.n_trees,
                seed: config.seed,
                threads: config.threads,
            },
        )?),
        ClassifierKind::Linear => {
            let cfg = LinearTrainConfig {
                seed: config.seed,
                ..config.linear.clone()
            };
            TrainedClassifier::Linear(train_linear(x, y, n_classes, &cfg)?)
        }
        ClassifierKind::Knn => {
            TrainedClassifier::Knn(KnnModel::fit(x, y, n_classes, config.neighbors)?)
        }
    })
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("training matrix has no rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let width = x[0].len();
    if width == 0 {
        return Err(Error::shape("training matrix has no columns"));
    }
    check_width(x, width)?;
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {bad} >= class count {n_classes}")));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training matrix contains a non-finite value"));
    }
    Ok(width)
}

pub(crate) fn check_width(x: &[Vec<f64>], width: usize) -> Result<()> {
    if let Some(bad) = x.iter().position(|r| r.len() != width) {
        return Err(Error::shape(format!(
            "row {bad} has width {}, expected {width}",
            x[bad].len()
        )));
    }
    Ok(())
}

pub(crate) fn distinct_classes(y: &[usize]) -> usize {
    let mut seen: Vec<usize> = y.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Most frequent label; ties go to the smallest class index.
pub fn majority_vote(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}
