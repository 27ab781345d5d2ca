use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{substream, ClassifierSpec, TrainingView};
use crate::scalar::Scalar;

/// One-vs-rest linear margin classifier on standardized inputs, trained by
/// stochastic subgradient descent on the L2-regularized hinge loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOvr<T> {
    mean: Vec<T>,
    scale: Vec<T>,
    weights: Vec<Vec<T>>,
    bias: Vec<T>,
}

impl<T: Scalar> LinearOvr<T> {
    pub(crate) fn fit(spec: &ClassifierSpec, data: &TrainingView<T>) -> Self {
        let n = data.rows.len();
        let m = data.rows[0].len();
        let count = T::from_usize(n).expect("count fits scalar");
        let mut mean = vec![T::zero(); m];
        for row in &data.rows {
            for (acc, &v) in mean.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        mean.iter_mut().for_each(|v| *v = *v / count);
        let mut scale = vec![T::zero(); m];
        for row in &data.rows {
            for ((acc, &v), &mu) in scale.iter_mut().zip(row).zip(&mean) {
                *acc = *acc + (v - mu) * (v - mu);
            }
        }
        for s in scale.iter_mut() {
            let sd = (*s / count).sqrt();
            *s = if sd > T::zero() { sd } else { T::one() };
        }
        let x: Vec<Vec<T>> = data
            .rows
            .iter()
            .map(|r| standardize(r, &mean, &scale))
            .collect();

        let lr = T::from_f64_lossy(spec.linear_lr);
        let shrink = T::one() - lr * T::from_f64_lossy(spec.linear_reg);
        let mut weights = vec![vec![T::zero(); m]; data.n_classes];
        let mut bias = vec![T::zero(); data.n_classes];
        let mut rng = ChaCha8Rng::seed_from_u64(substream(spec.seed, u64::MAX));
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..spec.linear_epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                for c in 0..data.n_classes {
                    let y = if data.targets[i] == c { T::one() } else { -T::one() };
                    let margin = y * (dot(&weights[c], &x[i]) + bias[c]);
                    weights[c].iter_mut().for_each(|w| *w = *w * shrink);
                    if margin < T::one() {
                        for (w, &v) in weights[c].iter_mut().zip(&x[i]) {
                            *w = *w + lr * y * v;
                        }
                        bias[c] = bias[c] + lr * y;
                    }
                }
            }
        }
        Self {
            mean,
            scale,
            weights,
            bias,
        }
    }

    /// Raw per-class margins `w_c . x + b_c`.
    pub fn margins(&self, row: &[T]) -> Vec<f64> {
        let x = standardize(row, &self.mean, &self.scale);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| (dot(w, &x) + b).as_f64())
            .collect()
    }
}

fn standardize<T: Scalar>(row: &[T], mean: &[T], scale: &[T]) -> Vec<T> {
    row.iter()
        .zip(mean)
        .zip(scale)
        .map(|((&v, &mu), &s)| (v - mu) / s)
        .collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
