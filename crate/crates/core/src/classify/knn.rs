//! k-nearest-neighbour head under cosine distance.

use rayon::prelude::*;

use super::{check_training_set, check_width, majority_vote};
use crate::{Error, Result};

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            1.0 - dot / (na * nb)
        }
    }
}

/// `1 - a·b / (‖a‖‖b‖)`. A zero vector is at distance 1 from any non-zero
/// vector and at distance 0 from another zero vector.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, norm(a), b, norm(b))
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    x: Vec<Vec<f64>>,
    norms: Vec<f64>,
    y: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, k: usize) -> Result<Self> {
        check_training_set(x, y, n_classes)?;
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if k > x.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the {} training rows",
                x.len()
            )));
        }
        Ok(Self {
            norms: x.iter().map(|r| norm(r)).collect(),
            x: x.to_vec(),
            y: y.to_vec(),
            n_classes,
            k,
        })
    }

    pub fn n_features(&self) -> usize {
        self.x[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `k` nearest training rows, nearest first; equal
    /// distances are ordered by training index.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let nq = norm(q);
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (r, &nr))| (cosine_with_norms(q, nq, r, nr), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(self.k);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_one(&self, q: &[f64]) -> usize {
        let nb = self.neighbors(q);
        majority_vote(nb.into_iter().map(|i| self.y[i]), self.n_classes)
    }

    pub fn predict(&self, queries: &[Vec<f64>]) -> Vec<usize> {
        queries.par_iter().map(|q| self.predict_one(q)).collect()
    }
}

/// One-shot fit and predict.
pub fn knn_predict(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    n_classes: usize,
    queries: &[Vec<f64>],
    k: usize,
) -> Result<Vec<usize>> {
    let m = KnnModel::fit(train_x, train_y, n_classes, k)?;
    check_width(queries, m.n_features())?;
    Ok(m.predict(queries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ],
            vec![0, 1, 2, 3],
        )
    }

    #[test]
    fn axis_points_by_hand() {
        let (x, y) = axes();
        let q = [1.0, 0.9];
        let n = (1.0f64 + 0.81).sqrt();
        let by_hand = [1.0 - 1.0 / n, 1.0 - 0.9 / n, 1.0 + 1.0 / n, 1.0 + 0.9 / n];
        for (r, want) in x.iter().zip(by_hand) {
            assert!((cosine_distance(&q, r) - want).abs() < 1e-15);
        }
        assert_eq!(knn_predict(&x, &y, 4, &[q.to_vec()], 1).unwrap(), vec![0]);
    }

    #[test]
    fn exact_and_scaled_queries() {
        let x = vec![vec![1.0, 2.0, 3.0], vec![-2.0, 0.5, 1.0], vec![0.3, -1.0, 4.0]];
        let y = vec![2, 0, 1];
        let m = KnnModel::fit(&x, &y, 3, 1).unwrap();
        for (r, &l) in x.iter().zip(&y) {
            assert_eq!(m.predict_one(r), l);
            let scaled: Vec<f64> = r.iter().map(|v| 5.0 * v).collect();
            assert_eq!(m.predict_one(&scaled), l);
        }
    }

    #[test]
    fn zero_vectors() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert_eq!(cosine_distance(&[3.0, 0.0], &[0.0, 0.0]), 1.0);
        let x = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(knn_predict(&x, &[0, 1], 2, &[vec![0.0, 0.0]], 1).unwrap(), vec![1]);
    }

    #[test]
    fn ties_go_to_lowest_training_index() {
        let x = vec![vec![2.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(knn_predict(&x, &[1, 0, 1], 2, &[vec![1.0, 0.0]], 1).unwrap(), vec![1]);
    }

    #[test]
    fn k_larger_than_training_set_is_rejected() {
        let (x, y) = axes();
        assert!(KnnModel::fit(&x, &y, 4, 5).is_err());
        assert!(KnnModel::fit(&x, &y, 4, 0).is_err());
    }

    #[test]
    fn three_neighbours_vote() {
        let x = vec![vec![1.0, 0.1], vec![1.0, 0.2], vec![1.0, -0.3], vec![-1.0, 0.0]];
        let y = vec![1, 0, 0, 1];
        assert_eq!(knn_predict(&x, &y, 2, &[vec![1.0, 0.0]], 3).unwrap(), vec![0]);
    }
}
