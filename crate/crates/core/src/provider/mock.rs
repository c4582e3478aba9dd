//! Deterministic stand-in for a frozen forecasting model.
//!
//! The series is instance-normalized, cut into non-overlapping patches, and
//! pushed through a stack of fixed random affine maps with a pointwise
//! nonlinearity. Every layer's output (`⌈T/w⌉ × D`) is captured.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{EmbeddingProvider, HiddenStates, Matrix, MockSpec, SeriesRef};
use crate::{seed, Error, Result};

/// Normalized inputs are snapped to this grid. Without it, `α·x + β` and `x`
/// normalize to values a few ulps apart and the outputs would only match
/// approximately.
const INPUT_GRID: f64 = 4096.0;

const BIAS_SCALE: f64 = 0.1;

/// Subtracts the mean and divides by the population standard deviation,
/// then snaps to a `2^-12` grid. A (relatively) zero deviation divides by 1.
pub fn instance_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std < 1e-12 * mean.abs().max(1.0) {
        1.0
    } else {
        std
    };
    values
        .iter()
        .map(|x| {
            let z = ((x - mean) / scale * INPUT_GRID).round() / INPUT_GRID;
            // avoid -0.0 so that bitwise comparisons behave
            z + 0.0
        })
        .collect()
}

struct AffineLayer {
    /// `out × in`, row-major.
    weights: Matrix,
    bias: Vec<f64>,
}

impl AffineLayer {
    fn random(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (inputs as f64).sqrt();
        let w: Vec<f64> = (0..inputs * outputs)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bias = (0..outputs)
            .map(|_| BIAS_SCALE * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            weights: Matrix::new(outputs, inputs, w).expect("sized above"),
            bias,
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut [f64], f: impl Fn(f64) -> f64) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.iter_rows().zip(&self.bias)) {
            let acc: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            *o = f(acc + b);
        }
    }
}

pub struct MockProvider {
    spec: MockSpec,
    layers: Vec<AffineLayer>,
}

impl MockProvider {
    pub fn new(spec: MockSpec) -> Result<Self> {
        if spec.layers == 0 || spec.width == 0 || spec.patch == 0 {
            return Err(Error::invalid(
                "mock provider needs layers, width and patch >= 1",
            ));
        }
        let mut rng = seed::rng(seed::derive(spec.seed, seed::hash_str(&spec.model_id)));
        let mut layers = Vec::with_capacity(spec.layers);
        layers.push(AffineLayer::random(spec.patch, spec.width, &mut rng));
        for _ in 1..spec.layers {
            layers.push(AffineLayer::random(spec.width, spec.width, &mut rng));
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MockSpec {
        &self.spec
    }

    /// Runs the mock model over one univariate series.
    pub fn extract(&self, values: &[f64]) -> Result<HiddenStates> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "mock provider needs T >= 2, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite input"));
        }
        let w = self.spec.patch;
        let d = self.spec.width;
        let seq = values.len().div_ceil(w);

        let z = instance_normalize(values);
        let mut current = Matrix::zeros(seq, w);
        for (s, chunk) in z.chunks(w).enumerate() {
            current.row_mut(s)[..chunk.len()].copy_from_slice(chunk);
        }

        let act = self.spec.nonlinearity;
        let mut outputs = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut next = Matrix::zeros(seq, d);
            for s in 0..seq {
                layer.forward_into(current.row(s), next.row_mut(s), |x| act.apply(x));
            }
            outputs.push(next.clone());
            current = next;
        }
        HiddenStates::new(outputs)
    }
}

impl EmbeddingProvider for MockProvider {
    fn model_id(&self) -> &str {
        &self.spec.model_id
    }

    fn hidden_states(&self, _at: &SeriesRef<'_>, _variate: usize, values: &[f64]) -> Result<HiddenStates> {
        self.extract(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::Nonlinearity;

    fn provider() -> MockProvider {
        MockProvider::new(MockSpec::default()).unwrap()
    }

    fn series(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn bits(h: &HiddenStates) -> Vec<u64> {
        h.layers()
            .iter()
            .flat_map(|m| m.as_slice().iter().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn affine_inputs_give_identical_states() {
        let p = provider();
        let x = series(100, 1);
        let base = bits(&p.extract(&x).unwrap());
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 5.0).collect();
        assert_eq!(bits(&p.extract(&y).unwrap()), base);
        for alpha in [0.5, 2.0, 10.0] {
            for beta in [-3.0, 0.0, 7.0] {
                let y: Vec<f64> = x.iter().map(|v| alpha * v + beta).collect();
                assert_eq!(bits(&p.extract(&y).unwrap()), base, "alpha={alpha} beta={beta}");
            }
        }
    }

    #[test]
    fn single_patch_sequence() {
        let h = provider().extract(&series(16, 2)).unwrap();
        assert_eq!(h.n_layers(), 4);
        for m in h.layers() {
            assert_eq!((m.rows(), m.cols()), (1, 32));
        }
        let h = provider().extract(&series(17, 2)).unwrap();
        assert!(h.layers().iter().all(|m| m.rows() == 2));
    }

    #[test]
    fn constant_series_matches_zero_series() {
        let p = provider();
        let zero = bits(&p.extract(&[0.0; 40]).unwrap());
        for c in [0.1, -7.25, 1e6, 3.0] {
            assert_eq!(bits(&p.extract(&[c; 40]).unwrap()), zero, "c={c}");
        }
    }

    #[test]
    fn too_short_series_rejected() {
        assert!(provider().extract(&[1.0]).is_err());
    }

    #[test]
    fn seed_and_model_id_select_weights() {
        let x = series(64, 3);
        let a = provider().extract(&x).unwrap();
        let b = MockProvider::new(MockSpec {
            seed: 1,
            ..MockSpec::default()
        })
        .unwrap()
        .extract(&x)
        .unwrap();
        let c = MockProvider::new(MockSpec {
            model_id: "other".into(),
            ..MockSpec::default()
        })
        .unwrap()
        .extract(&x)
        .unwrap();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, provider().extract(&x).unwrap());
    }

    #[test]
    fn identity_nonlinearity_is_affine_in_patch() {
        let p = MockProvider::new(MockSpec {
            layers: 1,
            width: 3,
            patch: 4,
            nonlinearity: Nonlinearity::Identity,
            ..MockSpec::default()
        })
        .unwrap();
        let h = p.extract(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = instance_normalize(&[1.0, 2.0, 3.0, 4.0]);
        let l = &p.layers[0];
        for (o, (row, b)) in h.layers()[0].row(0).iter().zip(l.weights.iter_rows().zip(&l.bias)) {
            let expect: f64 = row.iter().zip(&z).map(|(w, x)| w * x).sum::<f64>() + b;
            assert_eq!(*o, expect);
        }
    }
}
