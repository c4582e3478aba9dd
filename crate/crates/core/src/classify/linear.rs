//! Single linear layer trained with softmax cross-entropy and AdamW.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, distinct_classes};
use crate::{seed, Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub val_fraction: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for LinearTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-2,
            val_fraction: 0.2,
            patience: 100,
            max_epochs: 10_000,
            seed: 0,
        }
    }
}

impl LinearTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Weights `W` (K×F, row-major) and bias `b` (K).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub n_classes: usize,
    pub n_features: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            n_classes,
            n_features,
            w: vec![0.0; n_classes * n_features],
            b: vec![0.0; n_classes],
        }
    }

    /// Uniform `[-1/√F, 1/√F)` for both weights and bias.
    pub fn init(n_classes: usize, n_features: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (n_features as f64).sqrt();
        let mut p = Self::zeros(n_classes, n_features);
        for v in p.w.iter_mut().chain(p.b.iter_mut()) {
            *v = rng.random_range(-bound..bound);
        }
        p
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|k| {
                let row = &self.w[k * self.n_features..(k + 1) * self.n_features];
                self.b[k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn squared_norm(&self) -> f64 {
        self.w.iter().chain(&self.b).map(|v| v * v).sum()
    }

    fn flat_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }

    fn flat(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(self.b.iter())
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Mean cross-entropy over `rows` and its gradient.
fn cross_entropy(p: &LinearParams, x: &[Vec<f64>], y: &[usize], rows: &[usize]) -> (f64, LinearParams) {
    let mut grad = LinearParams::zeros(p.n_classes, p.n_features);
    let mut loss = 0.0;
    let scale = 1.0 / rows.len() as f64;
    for &i in rows {
        let ls = log_softmax(&p.logits(&x[i]));
        loss -= ls[y[i]];
        for (k, l) in ls.iter().enumerate() {
            let d = (l.exp() - if k == y[i] { 1.0 } else { 0.0 }) * scale;
            grad.b[k] += d;
            let row = &mut grad.w[k * p.n_features..(k + 1) * p.n_features];
            for (g, v) in row.iter_mut().zip(&x[i]) {
                *g += d * v;
            }
        }
    }
    (loss * scale, grad)
}

/// Mean cross-entropy plus `weight_decay/2 · ‖θ‖²` and its gradient; the
/// decay term matches the decoupled update `θ -= lr·wd·θ` to first order.
pub fn objective_and_gradient(
    params: &LinearParams,
    x: &[Vec<f64>],
    y: &[usize],
    weight_decay: f64,
) -> (f64, LinearParams) {
    let rows: Vec<usize> = (0..x.len()).collect();
    let (ce, mut g) = cross_entropy(params, x, y, &rows);
    for (gi, &p) in g.flat_mut().zip(params.flat()) {
        *gi += weight_decay * p;
    }
    (ce + 0.5 * weight_decay * params.squared_norm(), g)
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    wd: f64,
}

impl AdamW {
    fn new(n: usize, lr: f64, wd: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            wd,
        }
    }

    fn step(&mut self, p: &mut LinearParams, g: &LinearParams) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((pi, &gi), m), v) in p.flat_mut().zip(g.flat()).zip(&mut self.m).zip(&mut self.v) {
            *pi *= 1.0 - self.lr * self.wd;
            *m = BETA1 * *m + (1.0 - BETA1) * gi;
            *v = BETA2 * *v + (1.0 - BETA2) * gi * gi;
            *pi -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    params: LinearParams,
    mean: Vec<f64>,
    scale: Vec<f64>,
    epochs: usize,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.params.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.params.n_classes
    }

    pub fn params(&self) -> &LinearParams {
        &self.params
    }

    /// Epoch whose parameters were kept.
    pub fn best_epoch(&self) -> usize {
        self.epochs
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> usize {
        let z = self.params.logits(&self.standardize(x));
        let mut best = 0;
        for (k, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = k;
            }
        }
        best
    }

    /// Mean cross-entropy on raw (unstandardized) rows.
    pub fn loss(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let z: Vec<Vec<f64>> = x.iter().map(|r| self.standardize(r)).collect();
        let rows: Vec<usize> = (0..z.len()).collect();
        cross_entropy(&self.params, &z, y, &rows).0
    }
}

fn column_stats(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let f = x[0].len();
    let mut mean = vec![0.0; f];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; f];
    for r in x {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scale {
        *s = s.sqrt();
        if !(*s >= STD_FLOOR) {
            *s = 1.0;
        }
    }
    (mean, scale)
}

/// Per-class shuffle, then `round(n_c · fraction)` rows of each class go to
/// validation. If that leaves validation empty, one row is moved from the
/// largest class that can spare it.
fn stratified_split(y: &[usize], n_classes: usize, fraction: f64, rng: &mut impl Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in y.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut largest: Option<usize> = None;
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(rng);
        let n_val = ((idx.len() as f64 * fraction).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
        if idx.len() >= 2 && largest.is_none_or(|b| by_class_len(y, b) < idx.len()) {
            largest = Some(c);
        }
    }
    if val.is_empty() {
        let Some(c) = largest else {
            return Err(Error::invalid("too few samples for a non-empty validation split"));
        };
        let pick = by_class[c][0];
        train.retain(|&i| i != pick);
        val.push(pick);
    }
    if train.is_empty() {
        return Err(Error::invalid("too few samples for a non-empty training split"));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

fn by_class_len(y: &[usize], c: usize) -> usize {
    y.iter().filter(|&&l| l == c).count()
}

/// Trains with a seeded stratified validation split and early stopping on
/// validation loss; returns the parameters of the best validation epoch.
pub fn train_linear(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    config: &LinearTrainConfig,
) -> Result<LinearModel> {
    config.validate()?;
    check_training_set(x, y, n_classes)?;
    if n_classes < 2 {
        return Err(Error::invalid("linear head needs K >= 2"));
    }
    if x.len() < 5 {
        return Err(Error::invalid(format!(
            "linear head needs at least 5 samples, got {}",
            x.len()
        )));
    }
    let mut rng = seed::rng(config.seed);
    let (train, val) = stratified_split(y, n_classes, config.val_fraction, &mut rng)?;
    let (mean, scale) = column_stats(x);
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();

    let mut p = LinearParams::init(n_classes, z[0].len(), &mut rng);
    let mut opt = AdamW::new(p.w.len() + p.b.len(), config.learning_rate, config.weight_decay);
    let mut best = p.clone();
    let mut best_loss = cross_entropy(&p, &z, y, &val).0;
    let mut best_epoch = 0;
    for epoch in 1..=config.max_epochs {
        let (_, g) = cross_entropy(&p, &z, y, &train);
        opt.step(&mut p, &g);
        let vl = cross_entropy(&p, &z, y, &val).0;
        if vl < best_loss {
            best_loss = vl;
            best = p.clone();
            best_epoch = epoch;
        } else if epoch - best_epoch >= config.patience {
            break;
        }
    }
    log::debug!("linear head: best epoch {best_epoch}, validation loss {best_loss:.6}");
    Ok(LinearModel {
        params: best,
        mean,
        scale,
        epochs: best_epoch,
    })
}

/// Trains on every row for exactly `max_epochs` epochs with no validation
/// split. Returns the model and its final training loss.
pub fn fit_without_validation(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    config: &LinearTrainConfig,
) -> Result<(LinearModel, f64)> {
    check_training_set(x, y, n_classes)?;
    if distinct_classes(y) < 1 || n_classes < 2 {
        return Err(Error::invalid("linear head needs K >= 2"));
    }
    let mut rng = seed::rng(config.seed);
    let (mean, scale) = column_stats(x);
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    let rows: Vec<usize> = (0..z.len()).collect();
    let mut p = LinearParams::init(n_classes, z[0].len(), &mut rng);
    let mut opt = AdamW::new(p.w.len() + p.b.len(), config.learning_rate, config.weight_decay);
    for _ in 0..config.max_epochs {
        let (_, g) = cross_entropy(&p, &z, y, &rows);
        opt.step(&mut p, &g);
    }
    let loss = cross_entropy(&p, &z, y, &rows).0;
    Ok((
        LinearModel {
            params: p,
            mean,
            scale,
            epochs: config.max_epochs,
        },
        loss,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_blobs;
    use rand_distr::{Distribution, StandardNormal};

    fn random_instance(seed_: u64, n: usize, f: usize, k: usize) -> (LinearParams, Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(seed_);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| normal()).collect()).collect();
        let mut p = LinearParams::zeros(k, f);
        for v in p.w.iter_mut().chain(p.b.iter_mut()) {
            *v = normal();
        }
        let y = (0..n).map(|i| i % k).collect();
        (p, x, y)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-5;
        for s in 0..10 {
            let (p, x, y) = random_instance(100 + s, 6, 4, 3);
            let (_, g) = objective_and_gradient(&p, &x, &y, 1e-2);
            let analytic: Vec<f64> = g.flat().copied().collect();
            let n = analytic.len();
            for j in 0..n {
                let mut plus = p.clone();
                let mut minus = p.clone();
                *plus.flat_mut().nth(j).unwrap() += h;
                *minus.flat_mut().nth(j).unwrap() -= h;
                let fd = (objective_and_gradient(&plus, &x, &y, 1e-2).0
                    - objective_and_gradient(&minus, &x, &y, 1e-2).0)
                    / (2.0 * h);
                let rel = (fd - analytic[j]).abs() / fd.abs().max(analytic[j].abs()).max(1e-8);
                assert!(rel < 1e-4, "instance {s} param {j}: fd {fd} vs {}", analytic[j]);
            }
        }
    }

    #[test]
    fn separable_blobs() {
        let train = generate_blobs(20, 2, 10.0, 3).unwrap();
        let test = generate_blobs(20, 2, 10.0, 4).unwrap();
        let m = train_linear(&train.features, &train.labels, 2, &LinearTrainConfig { seed: 3, ..Default::default() }).unwrap();
        let hits = test.features.iter().zip(&test.labels).filter(|(r, &l)| m.predict_one(r) == l).count();
        assert!(hits as f64 / 40.0 >= 0.95, "{hits}/40");
    }

    #[test]
    fn zero_features_predict_the_majority_class() {
        let x = vec![vec![0.0; 3]; 10];
        let y = vec![0, 1, 1, 2, 1, 1, 0, 1, 2, 1];
        let m = train_linear(&x, &y, 3, &LinearTrainConfig::default()).unwrap();
        let preds: Vec<usize> = x.iter().map(|r| m.predict_one(r)).collect();
        assert!(preds.iter().all(|&p| p == preds[0]));
        let acc = preds.iter().zip(&y).filter(|(p, l)| p == l).count() as f64 / 10.0;
        assert_eq!(acc, 0.6);
    }

    #[test]
    fn orthogonal_points_are_fit() {
        for k in [2usize, 3, 4] {
            let x: Vec<Vec<f64>> = (0..k).map(|c| (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect()).collect();
            let y: Vec<usize> = (0..k).collect();
            let cfg = LinearTrainConfig { weight_decay: 0.0, learning_rate: 1e-3, ..Default::default() };
            let (_, loss) = fit_without_validation(&x, &y, k, &cfg).unwrap();
            assert!(loss < 1e-3, "K={k}: loss {loss}");
        }
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let y: Vec<usize> = (0..50).map(|i| if i < 40 { 0 } else { 1 }).collect();
        let (train, val) = stratified_split(&y, 2, 0.2, &mut seed::rng(7)).unwrap();
        assert_eq!(val.len(), 10);
        assert_eq!(val.iter().filter(|&&i| y[i] == 1).count(), 2);
        let mut all = [train, val].concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn preconditions() {
        let x = vec![vec![1.0]; 4];
        assert!(train_linear(&x, &[0, 1, 0, 1], 2, &LinearTrainConfig::default()).is_err());
        let x = vec![vec![1.0]; 6];
        let bad = LinearTrainConfig { val_fraction: 1.0, ..Default::default() };
        assert!(train_linear(&x, &[0, 1, 0, 1, 0, 1], 2, &bad).is_err());
    }
}
