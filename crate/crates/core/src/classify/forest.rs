//! Random forest of CART trees.
//!
//! Defaults mirror the usual library defaults: Gini impurity, bootstrap
//! samples of size `N`, `⌈√F⌉` candidate features per split, no depth limit.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{check_training_set, distinct_classes, majority_vote};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_one(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
    n_classes: usize,
}

impl RandomForest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn predict_one(&self, x: &[f64]) -> usize {
        majority_vote(self.trees.iter().map(|t| t.predict_one(x)), self.n_classes)
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn gini_weighted(counts: &[usize], n: usize) -> f64 {
    // n * gini = n - Σ c² / n
    let n = n as f64;
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n - sq / n
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split_on(&self, idx: &mut [usize], feature: usize, total: &[usize]) -> Option<BestSplit> {
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let n = idx.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = total.to_vec();
        let mut best: Option<BestSplit> = None;
        for pos in 0..n - 1 {
            let c = self.y[idx[pos]];
            left[c] += 1;
            right[c] -= 1;
            let here = x[idx[pos]][feature];
            let next = x[idx[pos + 1]][feature];
            if here >= next {
                continue;
            }
            let score = gini_weighted(&left, pos + 1) + gini_weighted(&right, n - pos - 1);
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = here + (next - here) / 2.0;
                if threshold >= next || !threshold.is_finite() {
                    threshold = here;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn is_constant(&self, idx: &[usize], feature: usize) -> bool {
        let first = self.x[idx[0]][feature];
        idx.iter().all(|&i| self.x[i][feature] == first)
    }

    /// Grows the subtree for `idx` and returns its root node index.
    fn grow(&mut self, root_idx: Vec<usize>, rng: &mut impl Rng) -> usize {
        let root = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let mut stack = vec![(root, root_idx)];
        let n_features = self.x[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();

        while let Some((slot, mut idx)) = stack.pop() {
            let counts = self.counts(&idx);
            let majority = majority_vote_counts(&counts);
            if counts.iter().filter(|&&c| c > 0).count() <= 1 {
                self.nodes[slot] = Node::Leaf { class: majority };
                continue;
            }

            // visit features in random order until `max_features` non-constant
            // ones have been evaluated
            order.shuffle(rng);
            let mut best: Option<BestSplit> = None;
            let mut evaluated = 0;
            for &f in &order {
                if evaluated >= self.max_features {
                    break;
                }
                if self.is_constant(&idx, f) {
                    continue;
                }
                evaluated += 1;
                if let Some(s) = self.best_split_on(&mut idx, f, &counts) {
                    if best.as_ref().is_none_or(|b| s.score < b.score) {
                        best = Some(s);
                    }
                }
            }

            let Some(split) = best else {
                self.nodes[slot] = Node::Leaf { class: majority };
                continue;
            };
            let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| self.x[i][split.feature] <= split.threshold);
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { class: 0 });
            let right = self.nodes.len();
            self.nodes.push(Node::Leaf { class: 0 });
            self.nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            stack.push((right, r_idx));
            stack.push((left, l_idx));
        }
        root
    }
}

fn majority_vote_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn build_tree(x: &[Vec<f64>], y: &[usize], n_classes: usize, max_features: usize, tree_seed: u64) -> DecisionTree {
    let mut rng = seed::rng(tree_seed);
    let n = x.len();
    let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut b = Builder {
        x,
        y,
        n_classes,
        max_features,
        nodes: Vec::new(),
    };
    b.grow(sample, &mut rng);
    DecisionTree { nodes: b.nodes }
}

/// Trains `n_trees` trees; tree `i` draws its randomness from
/// `derive(seed, i)`, so the result does not depend on the thread count.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    config: &ForestConfig,
) -> Result<RandomForest> {
    let n_features = check_training_set(x, y, n_classes)?;
    if x.len() < 2 {
        return Err(Error::invalid("random forest needs at least 2 samples"));
    }
    if distinct_classes(y) < 2 {
        return Err(Error::invalid(
            "random forest needs at least 2 distinct classes in the training data",
        ));
    }
    if config.n_trees == 0 {
        return Err(Error::invalid("n_trees must be >= 1"));
    }
    let max_features = (n_features as f64).sqrt().ceil() as usize;
    let build = || -> Vec<DecisionTree> {
        (0..config.n_trees)
            .into_par_iter()
            .map(|t| build_tree(x, y, n_classes, max_features, seed::derive(config.seed, t as u64)))
            .collect()
    };
    let trees = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(build),
        None => build(),
    };
    Ok(RandomForest {
        trees,
        n_features,
        n_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_blobs;

    fn accuracy(m: &RandomForest, x: &[Vec<f64>], y: &[usize]) -> f64 {
        x.iter().zip(y).filter(|(r, &l)| m.predict_one(r) == l).count() as f64 / y.len() as f64
    }

    #[test]
    fn single_tree_on_full_data_is_pure() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| (i * 3 % 4 == 0) as usize).collect();
        let mut b = Builder {
            x: &x,
            y: &y,
            n_classes: 2,
            max_features: 2,
            nodes: Vec::new(),
        };
        b.grow((0..20).collect(), &mut seed::rng(1));
        let tree = DecisionTree { nodes: b.nodes };
        for (r, &l) in x.iter().zip(&y) {
            assert_eq!(tree.predict_one(r), l);
        }
    }

    #[test]
    fn fits_training_data() {
        let b = generate_blobs(30, 4, 1.0, 5).unwrap();
        let m = train_forest(&b.features, &b.labels, 2, &ForestConfig::default()).unwrap();
        assert!(accuracy(&m, &b.features, &b.labels) >= 0.99);
    }

    #[test]
    fn separable_blobs() {
        let train = generate_blobs(20, 2, 10.0, 3).unwrap();
        let test = generate_blobs(20, 2, 10.0, 4).unwrap();
        let m = train_forest(&train.features, &train.labels, 2, &ForestConfig { seed: 3, ..ForestConfig::default() }).unwrap();
        assert!(accuracy(&m, &test.features, &test.labels) >= 0.95);
    }

    #[test]
    fn thread_count_does_not_change_the_forest() {
        let b = generate_blobs(25, 5, 1.5, 8).unwrap();
        let one = train_forest(&b.features, &b.labels, 2, &ForestConfig { n_trees: 50, seed: 2, threads: Some(1) }).unwrap();
        let eight = train_forest(&b.features, &b.labels, 2, &ForestConfig { n_trees: 50, seed: 2, threads: Some(8) }).unwrap();
        assert_eq!(one, eight);
    }

    #[test]
    fn accuracy_grows_with_separation() {
        let mut last = 0.0;
        for sep in [0.5, 2.0, 10.0] {
            let train = generate_blobs(40, 3, sep, 21).unwrap();
            let test = generate_blobs(100, 3, sep, 22).unwrap();
            let m = train_forest(&train.features, &train.labels, 2, &ForestConfig { n_trees: 100, seed: 1, threads: None }).unwrap();
            let acc = accuracy(&m, &test.features, &test.labels);
            assert!(acc >= last, "separation {sep}: {acc} < {last}");
            last = acc;
        }
    }

    #[test]
    fn rejects_degenerate_training_sets() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train_forest(&x, &[1, 1], 2, &ForestConfig::default()).is_err());
        assert!(train_forest(&x[..1], &[0], 2, &ForestConfig::default()).is_err());
        assert!(train_forest(&x, &[0, 2], 2, &ForestConfig::default()).is_err());
    }

    #[test]
    fn indistinguishable_rows_fall_back_to_majority() {
        let x = vec![vec![1.0]; 5];
        let y = vec![1, 0, 1, 1, 0];
        let m = train_forest(&x, &y, 2, &ForestConfig { n_trees: 9, ..ForestConfig::default() }).unwrap();
        for t in m.trees() {
            assert_eq!(t.n_nodes(), 1);
        }
    }
}
