//! Seeded synthetic fixtures.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{LabeledDataset, Split, TimeSeries};
use crate::{seed, Error, Result};

/// Length of every toy sine series.
pub const SINE_TOY_LEN: usize = 256;
const SINE_TOY_CLASSES: usize = 4;
const SINE_TOY_FREQ: f64 = 5.0;
const SINE_TOY_BASELINE: f64 = 2.0;

/// Sine waves that differ only by a vertical baseline.
#[derive(Debug, Clone)]
pub struct SineToy {
    /// Labels are the quartile bin of each sample's baseline.
    pub dataset: LabeledDataset,
    pub baselines: Vec<f64>,
}

/// `y_t = sin(5 t) + a` on the grid `t_j = 2πj/256`, with `a ~ U[-2, 2]`
/// drawn once per sample.
pub fn generate_sine_toy(n: usize, seed: u64) -> Result<SineToy> {
    if n == 0 {
        return Err(Error::invalid("sine toy needs n >= 1"));
    }
    let mut rng = seed::rng(seed);
    let wave: Vec<f64> = (0..SINE_TOY_LEN)
        .map(|j| (SINE_TOY_FREQ * 2.0 * PI * j as f64 / SINE_TOY_LEN as f64).sin())
        .collect();
    let baselines: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-SINE_TOY_BASELINE..SINE_TOY_BASELINE))
        .collect();

    // quartile bin by rank; ties resolved by sample order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| baselines[i].total_cmp(&baselines[j]).then(i.cmp(&j)));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * SINE_TOY_CLASSES / n;
    }

    let samples = baselines
        .iter()
        .map(|&a| TimeSeries::univariate(wave.iter().map(|s| s + a).collect()))
        .collect::<Result<Vec<_>>>()?;
    let dataset = LabeledDataset::with_class_count(
        "SineToy",
        Split::Train,
        samples,
        labels,
        SINE_TOY_CLASSES,
    )?;
    Ok(SineToy { dataset, baselines })
}

/// Two unit-variance Gaussian clusters centred at `±separation/2 · e₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Blobs {
    /// Views each feature vector as a univariate series of length `dims`.
    pub fn to_dataset(&self, name: &str, split: Split) -> Result<LabeledDataset> {
        let samples = self
            .features
            .iter()
            .map(|f| TimeSeries::univariate(f.clone()))
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::with_class_count(name, split, samples, self.labels.clone(), 2)
    }
}

/// Samples alternate between class 0 and class 1.
pub fn generate_blobs(n_per_class: usize, dims: usize, separation: f64, seed: u64) -> Result<Blobs> {
    if n_per_class == 0 || dims == 0 {
        return Err(Error::invalid("blobs need n_per_class >= 1 and dims >= 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be finite and non-negative"));
    }
    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for class in 0..2 {
            let mut x: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
            let sign = if class == 0 { -1.0 } else { 1.0 };
            x[0] += sign * separation / 2.0;
            features.push(x);
            labels.push(class);
        }
    }
    Ok(Blobs { features, labels })
}
