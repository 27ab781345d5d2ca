use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{substream, ClassifierSpec, TrainingView};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Binary CART tree: `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    nodes: Vec<Node<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest<T> {
    trees: Vec<DecisionTree<T>>,
    n_classes: usize,
}

impl<T: Scalar> RandomForest<T> {
    pub(crate) fn fit(spec: &ClassifierSpec, data: &TrainingView<T>) -> Result<Self> {
        let n_features = data.rows.first().map_or(0, Vec::len);
        let width = spec.split_width(n_features)?;
        let trees = (0..spec.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(substream(spec.seed, t as u64));
                let n = data.rows.len();
                // Rows are in sample-id order, so draws are keyed by sample id.
                let mut bag: Vec<usize> = if spec.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                bag.sort_unstable();
                let mut grower = Grower {
                    data,
                    width,
                    max_depth: spec.max_depth,
                    rng,
                    nodes: Vec::new(),
                };
                grower.grow(bag, 0);
                DecisionTree {
                    nodes: grower.nodes,
                }
            })
            .collect();
        Ok(Self {
            trees,
            n_classes: data.n_classes,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_leaf_votes(leaf_classes: &[usize], n_classes: usize) -> Self {
        Self {
            trees: leaf_classes
                .iter()
                .map(|&class| DecisionTree {
                    nodes: vec![Node::Leaf { class }],
                })
                .collect(),
            n_classes,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[DecisionTree<T>] {
        &self.trees
    }

    /// Vote count per class.
    pub fn votes(&self, row: &[T]) -> Vec<usize> {
        let mut votes = vec![0; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(row)] += 1;
        }
        votes
    }
}

impl<T: Scalar> DecisionTree<T> {
    pub fn predict(&self, row: &[T]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Split<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

struct Grower<'a, T> {
    data: &'a TrainingView<T>,
    width: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl<T: Scalar> Grower<'_, T> {
    fn class_counts(&self, bag: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.data.n_classes];
        for &i in bag {
            counts[self.data.targets[i]] += 1;
        }
        counts
    }

    fn grow(&mut self, bag: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.class_counts(&bag);
        // majority, ties to the lowest class index
        let majority = super::first_argmax(&counts);
        self.nodes.push(Node::Leaf { class: majority });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(split) = self.find_split(&bag, &counts) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = bag
            .into_iter()
            .partition(|&i| self.data.rows[i][split.feature] <= split.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    /// Best split over a random feature subset. When none of the drawn
    /// features separates the node, the remaining features are searched.
    fn find_split(&mut self, bag: &[usize], counts: &[usize]) -> Option<Split<T>> {
        let m = self.data.rows[0].len();
        let mut drawn = sample(&mut self.rng, m, self.width).into_vec();
        drawn.sort_unstable();
        if let Some(s) = self.best_over(&drawn, bag, counts) {
            return Some(s);
        }
        let rest: Vec<usize> = (0..m).filter(|f| drawn.binary_search(f).is_err()).collect();
        self.best_over(&rest, bag, counts)
    }

    /// Scans features in ascending order and thresholds ascending; strict
    /// improvement keeps the lowest feature, then the lowest threshold.
    fn best_over(&self, features: &[usize], bag: &[usize], counts: &[usize]) -> Option<Split<T>> {
        let n = bag.len();
        let parent = gini(counts, n);
        let mut best: Option<Split<T>> = None;
        let mut pairs: Vec<(T, usize)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(bag.iter().map(|&i| (self.data.rows[i][f], self.data.targets[i])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
            let mut left = vec![0usize; counts.len()];
            for k in 0..n - 1 {
                left[pairs[k].1] += 1;
                let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = k + 1;
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let child = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl))
                    / n as f64;
                let gain = parent - child;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let two = T::one() + T::one();
                    let mut threshold = lo + (hi - lo) / two;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
