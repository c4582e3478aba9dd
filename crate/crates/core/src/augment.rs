//! Embedding augmentations: absolute patch statistics and first-order
//! differencing.
//!
//! Both exist because the feature extractor normalizes its input: patch
//! statistics put the absolute level and scale back, and the differenced
//! embedding exposes step-to-step structure that a trend would dominate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{embed_sample, AggregationConfig, EmbeddingVector, Provenance};
use crate::dataset::{LabeledDataset, TimeSeries};
use crate::provider::{EmbeddingProvider, SeriesRef, SeriesView};
use crate::{Error, Result};

pub const DEFAULT_PATCHES: usize = 8;

/// Patch counts evaluated by the `patches` ablation grid.
pub const PATCH_GRID: [usize; 6] = [1, 2, 4, 8, 16, 32];

fn default_k() -> usize {
    DEFAULT_PATCHES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default)]
    pub stats: bool,
    #[serde(default)]
    pub diff: bool,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            stats: false,
            diff: false,
            k: DEFAULT_PATCHES,
        }
    }
}

impl AugmentConfig {
    pub fn stat_diff() -> Self {
        Self {
            stats: true,
            diff: true,
            k: DEFAULT_PATCHES,
        }
    }

    pub fn label(&self) -> String {
        match (self.stats, self.diff) {
            (false, false) => "none".into(),
            (true, false) => format!("stats(k={})", self.k),
            (false, true) => "diff".into(),
            (true, true) => format!("stats(k={})+diff", self.k),
        }
    }
}

/// Chunk `i` of `k` over `len` steps is `[⌊i·len/k⌋, ⌊(i+1)·len/k⌋)`.
fn chunk_bounds(len: usize, k: usize, i: usize) -> (usize, usize) {
    (i * len / k, (i + 1) * len / k)
}

fn chunk_stats(values: &[f64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    [mean, var.sqrt(), lo, hi]
}

/// Per variate and per chunk: `(mean, population std, min, max)`.
///
/// Output length is `4·k·V` for every `T`. When `T < k` some chunks are
/// empty; an empty chunk repeats the statistics of the nearest preceding
/// non-empty chunk, or of the first non-empty chunk if none precedes it.
pub fn patch_statistics(series: &TimeSeries, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("patch count k must be >= 1"));
    }
    let mut out = Vec::with_capacity(4 * k * series.n_variates());
    for row in series.variates() {
        let stats: Vec<Option<[f64; 4]>> = (0..k)
            .map(|i| {
                let (lo, hi) = chunk_bounds(row.len(), k, i);
                (hi > lo).then(|| chunk_stats(&row[lo..hi]))
            })
            .collect();
        let first = stats
            .iter()
            .flatten()
            .next()
            .copied()
            .expect("T >= 1 leaves at least one chunk non-empty");
        let mut carry = first;
        for s in stats {
            if let Some(s) = s {
                carry = s;
            }
            out.extend_from_slice(&carry);
        }
    }
    Ok(out)
}

/// `x'_t = x_t − x_{t−1}` per variate; output has `T − 1` steps.
pub fn difference(series: &TimeSeries) -> Result<TimeSeries> {
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "differencing needs T >= 2, got {}",
            series.len()
        )));
    }
    TimeSeries::new(
        series
            .variates()
            .map(|row| row.windows(2).map(|w| w[1] - w[0]).collect())
            .collect(),
    )
}

/// `[base embedding | differenced-series embedding | patch statistics]`,
/// with the optional blocks present only when enabled.
pub fn build_features(
    series: &TimeSeries,
    at: &SeriesRef<'_>,
    provider: &dyn EmbeddingProvider,
    agg: &AggregationConfig,
    aug: &AugmentConfig,
) -> Result<EmbeddingVector> {
    let mut values = embed_sample(series, &at.with_view(SeriesView::Raw), provider, agg)?.values;
    if aug.diff {
        let diffed = difference(series)?;
        let at = at.with_view(SeriesView::Differenced);
        values.extend(embed_sample(&diffed, &at, provider, agg)?.values);
    }
    if aug.stats {
        values.extend(patch_statistics(series, aug.k)?);
    }
    Ok(EmbeddingVector {
        values,
        provenance: Provenance {
            aggregation: *agg,
            stats: aug.stats,
            diff: aug.diff,
            k: aug.stats.then_some(aug.k),
        },
    })
}

/// Feature matrix for every sample of `dataset`, one row per sample.
pub fn embed_dataset(
    dataset: &LabeledDataset,
    provider: &dyn EmbeddingProvider,
    agg: &AggregationConfig,
    aug: &AugmentConfig,
) -> Result<Vec<Vec<f64>>> {
    dataset
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let at = SeriesRef::raw(&dataset.name, dataset.split, i);
            build_features(s, &at, provider, agg, aug).map(|e| e.values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use crate::provider::{MockProvider, MockSpec};
    use proptest::prelude::*;

    fn uni(v: &[f64]) -> TimeSeries {
        TimeSeries::univariate(v.to_vec()).unwrap()
    }

    #[test]
    fn patch_stats_example() {
        let s = patch_statistics(&uni(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(s, vec![1.5, 0.5, 1.0, 2.0, 3.5, 0.5, 3.0, 4.0]);
    }

    #[test]
    fn constant_series_stats() {
        for k in [1, 3, 8, 20] {
            let s = patch_statistics(&uni(&[2.5; 11]), k).unwrap();
            assert_eq!(s.len(), 4 * k);
            for c in s.chunks(4) {
                assert_eq!(c, &[2.5, 0.0, 2.5, 2.5]);
            }
        }
    }

    /// Independent partition: assign each index to the chunk `i` with
    /// `⌊i·T/k⌋ <= t < ⌊(i+1)·T/k⌋` by scanning all chunks.
    fn partition_oracle(t_len: usize, k: usize) -> Vec<Vec<usize>> {
        let mut chunks = vec![Vec::new(); k];
        for t in 0..t_len {
            for (i, c) in chunks.iter_mut().enumerate() {
                if i * t_len / k <= t && t < (i + 1) * t_len / k {
                    c.push(t);
                }
            }
        }
        chunks
    }

    #[test]
    fn short_series_borrow_neighbouring_chunks() {
        let chunks = partition_oracle(3, 8);
        let expect: Vec<Vec<usize>> =
            vec![vec![], vec![], vec![0], vec![], vec![], vec![1], vec![], vec![2]];
        assert_eq!(chunks, expect);

        let s = patch_statistics(&uni(&[10.0, 20.0, 30.0]), 8).unwrap();
        assert_eq!(s.len(), 32);
        let means: Vec<f64> = s.chunks(4).map(|c| c[0]).collect();
        // leading empties take the first non-empty chunk, later ones the preceding chunk
        assert_eq!(means, vec![10.0, 10.0, 10.0, 10.0, 10.0, 20.0, 20.0, 30.0]);
        for c in s.chunks(4) {
            assert_eq!(c[1], 0.0);
            assert_eq!(c[0], c[2]);
            assert_eq!(c[0], c[3]);
        }
    }

    #[test]
    fn multivariate_stats_concatenate_in_order() {
        let s = TimeSeries::new(vec![vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]]).unwrap();
        let out = patch_statistics(&s, 2).unwrap();
        assert_eq!(out.len(), 16);
        assert_eq!(&out[..8], &patch_statistics(&uni(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap()[..]);
        assert_eq!(&out[8..], &patch_statistics(&uni(&[4.0, 3.0, 2.0, 1.0]), 2).unwrap()[..]);
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&uni(&[1.0, 3.0, 6.0])).unwrap().variate(0), &[2.0, 3.0]);
        let c = 0.7;
        let ramp: Vec<f64> = (0..4).map(|i| i as f64 * c).collect();
        let d = difference(&uni(&ramp)).unwrap();
        for x in d.variate(0) {
            assert!((x - c).abs() < 1e-12);
        }
        assert!(difference(&uni(&[1.0])).is_err());
        let quad: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let dd = difference(&difference(&uni(&quad)).unwrap()).unwrap();
        assert_eq!(dd.len(), 8);
        assert!(dd.variate(0).iter().all(|&x| x == 2.0));
    }

    fn mock() -> MockProvider {
        MockProvider::new(MockSpec::default()).unwrap()
    }

    #[test]
    fn feature_widths() {
        let p = mock();
        let at = SeriesRef::raw("d", Split::Train, 0);
        let x = uni(&(0..60).map(|i| (i as f64 * 0.2).sin()).collect::<Vec<_>>());
        let agg = AggregationConfig::default();
        let plain = build_features(&x, &at, &p, &agg, &AugmentConfig::default()).unwrap();
        assert_eq!(plain.values, embed_sample(&x, &at, &p, &agg).unwrap().values);
        let stats = AugmentConfig {
            stats: true,
            ..AugmentConfig::default()
        };
        assert_eq!(build_features(&x, &at, &p, &agg, &stats).unwrap().len(), 160);
        let both = build_features(&x, &at, &p, &agg, &AugmentConfig::stat_diff()).unwrap();
        assert_eq!(both.len(), 288);
        assert_eq!(&both.values[..128], &plain.values[..]);
        assert_eq!(&both.values[256..], &patch_statistics(&x, 8).unwrap()[..]);
        assert_eq!(both.provenance.k, Some(8));
    }

    #[test]
    fn stats_restore_affine_information() {
        let p = mock();
        let at = SeriesRef::raw("d", Split::Train, 0);
        let raw: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).cos()).collect();
        let agg = AggregationConfig::default();
        let aug = AugmentConfig {
            stats: true,
            ..AugmentConfig::default()
        };
        let base = build_features(&uni(&raw), &at, &p, &agg, &aug).unwrap().values;
        for (alpha, beta) in [(0.5, -3.0), (2.0, 0.0), (10.0, 7.0), (1.0, 7.0)] {
            let y: Vec<f64> = raw.iter().map(|v| alpha * v + beta).collect();
            let f = build_features(&uni(&y), &at, &p, &agg, &aug).unwrap().values;
            assert_eq!(&f[..128], &base[..128]);
            assert_ne!(&f[128..], &base[128..]);
        }
    }

    proptest! {
        #[test]
        fn patch_stats_are_affine_equivariant(
            v in prop::collection::vec(-100f64..100.0, 1..50),
            k in 1usize..12,
            alpha in 0.1f64..10.0,
            beta in -10f64..10.0,
        ) {
            let x = patch_statistics(&uni(&v), k).unwrap();
            let y: Vec<f64> = v.iter().map(|x| alpha * x + beta).collect();
            let y = patch_statistics(&uni(&y), k).unwrap();
            prop_assert_eq!(x.len(), 4 * k);
            for (a, b) in x.chunks(4).zip(y.chunks(4)) {
                let tol = 1e-9 * (1.0 + a[0].abs() + a[2].abs() + a[3].abs()) * alpha.max(1.0) + 1e-9 * beta.abs();
                prop_assert!((alpha * a[0] + beta - b[0]).abs() < tol);
                prop_assert!((alpha * a[1] - b[1]).abs() < tol);
                prop_assert!((alpha * a[2] + beta - b[2]).abs() < tol);
                prop_assert!((alpha * a[3] + beta - b[3]).abs() < tol);
            }
        }

        #[test]
        fn cumulative_sum_inverts_difference(v in prop::collection::vec(-10f64..10.0, 2..60)) {
            let d = difference(&uni(&v)).unwrap();
            prop_assert_eq!(d.len(), v.len() - 1);
            let mut acc = v[0];
            for (t, x) in d.variate(0).iter().enumerate() {
                acc += x;
                prop_assert!((acc - v[t + 1]).abs() < 1e-12);
            }
        }
    }
}
