//! Pooling hidden states down to one fixed-size vector per sample.
//!
//! Order of operations for every variate: pool each layer over the sequence
//! axis, optionally z-normalize each layer vector, combine layers. The
//! per-variate vectors are then combined across variates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeries;
use crate::provider::{EmbeddingProvider, Matrix, SeriesRef};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequencePooling {
    #[default]
    Mean,
    Max,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerPooling {
    #[default]
    Concat,
    Mean,
    Max,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariatePooling {
    #[default]
    Concat,
    Mean,
    Max,
}

impl SequencePooling {
    pub const ALL: [SequencePooling; 3] = [Self::Mean, Self::Max, Self::Last];
}

impl LayerPooling {
    pub const ALL: [LayerPooling; 4] = [Self::Concat, Self::Mean, Self::Max, Self::Last];
}

impl VariatePooling {
    pub const ALL: [VariatePooling; 3] = [Self::Concat, Self::Mean, Self::Max];
}

macro_rules! strategy_names {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::invalid(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

strategy_names!(SequencePooling, Mean => "mean", Max => "max", Last => "last");
strategy_names!(LayerPooling, Concat => "concat", Mean => "mean", Max => "max", Last => "last");
strategy_names!(VariatePooling, Concat => "concat", Mean => "mean", Max => "max");

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationConfig {
    #[serde(default)]
    pub sequence: SequencePooling,
    #[serde(default)]
    pub layer: LayerPooling,
    #[serde(default)]
    pub variate: VariatePooling,
    #[serde(default = "default_true")]
    pub layer_normalize: bool,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            sequence: SequencePooling::Mean,
            layer: LayerPooling::Concat,
            variate: VariatePooling::Concat,
            layer_normalize: true,
        }
    }
}

impl fmt::Display for AggregationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seq={} layer={} variate={}", self.sequence, self.layer, self.variate)?;
        if !self.layer_normalize {
            f.write_str(" raw-layers")?;
        }
        Ok(())
    }
}

/// Which augmentation blocks follow the base embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub aggregation: AggregationConfig,
    pub stats: bool,
    pub diff: bool,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl EmbeddingVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pools a `seq' × D` layer matrix over its rows.
pub fn aggregate_sequence(layer: &Matrix, strategy: SequencePooling) -> Result<Vec<f64>> {
    if layer.is_empty() {
        return Err(Error::shape("cannot pool an empty layer matrix"));
    }
    let out = match strategy {
        SequencePooling::Mean => {
            let mut acc = vec![0.0; layer.cols()];
            for row in layer.iter_rows() {
                for (a, x) in acc.iter_mut().zip(row) {
                    *a += x;
                }
            }
            let n = layer.rows() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
        SequencePooling::Max => {
            let mut acc = vec![f64::NEG_INFINITY; layer.cols()];
            for row in layer.iter_rows() {
                for (a, &x) in acc.iter_mut().zip(row) {
                    *a = a.max(x);
                }
            }
            acc
        }
        SequencePooling::Last => layer.row(layer.rows() - 1).to_vec(),
    };
    Ok(out)
}

/// Z-normalizes a vector over its own components (population std).
/// A constant vector maps to zeros.
pub fn normalize_layer_vector(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std >= 1e-12) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - mean) / std).collect()
}

fn require_equal_lengths(vectors: &[Vec<f64>], what: &str) -> Result<usize> {
    let len = vectors[0].len();
    if let Some(bad) = vectors.iter().position(|v| v.len() != len) {
        return Err(Error::shape(format!(
            "{what} {bad} has length {}, expected {len}",
            vectors[bad].len()
        )));
    }
    Ok(len)
}

fn elementwise(vectors: &[Vec<f64>], what: &str, max: bool) -> Result<Vec<f64>> {
    let len = require_equal_lengths(vectors, what)?;
    let mut acc = if max {
        vec![f64::NEG_INFINITY; len]
    } else {
        vec![0.0; len]
    };
    for v in vectors {
        for (a, &x) in acc.iter_mut().zip(v) {
            if max {
                *a = a.max(x);
            } else {
                *a += x;
            }
        }
    }
    if !max {
        let n = vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(acc)
}

pub fn aggregate_layers(
    per_layer: &[Vec<f64>],
    strategy: LayerPooling,
    normalize: bool,
) -> Result<Vec<f64>> {
    if per_layer.is_empty() {
        return Err(Error::shape("no layers to aggregate"));
    }
    let normalized;
    let layers = if normalize {
        normalized = per_layer
            .iter()
            .map(|v| normalize_layer_vector(v))
            .collect::<Vec<_>>();
        &normalized[..]
    } else {
        per_layer
    };
    match strategy {
        LayerPooling::Concat => Ok(layers.concat()),
        LayerPooling::Last => Ok(layers[layers.len() - 1].clone()),
        LayerPooling::Mean => elementwise(layers, "layer", false),
        LayerPooling::Max => elementwise(layers, "layer", true),
    }
}

pub fn aggregate_variates(per_variate: &[Vec<f64>], strategy: VariatePooling) -> Result<Vec<f64>> {
    if per_variate.is_empty() {
        return Err(Error::shape("no variates to aggregate"));
    }
    match strategy {
        VariatePooling::Concat => Ok(per_variate.concat()),
        VariatePooling::Mean => elementwise(per_variate, "variate", false),
        VariatePooling::Max => elementwise(per_variate, "variate", true),
    }
}

/// Embeds every variate of `series` independently and combines them.
pub fn embed_sample(
    series: &TimeSeries,
    at: &SeriesRef<'_>,
    provider: &dyn EmbeddingProvider,
    config: &AggregationConfig,
) -> Result<EmbeddingVector> {
    let per_variate = series
        .variates()
        .enumerate()
        .map(|(v, values)| {
            let states = provider.hidden_states(at, v, values)?;
            let pooled = states
                .layers()
                .iter()
                .map(|m| aggregate_sequence(m, config.sequence))
                .collect::<Result<Vec<_>>>()?;
            aggregate_layers(&pooled, config.layer, config.layer_normalize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbeddingVector {
        values: aggregate_variates(&per_variate, config.variate)?,
        provenance: Provenance {
            aggregation: *config,
            ..Provenance::default()
        },
    })
}
