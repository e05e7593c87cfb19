//! Multinomial logistic regression trained by mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{log_sum_exp, prediction_from_scores, validate_training_inputs, Prediction};
use crate::corpus::TaskLabel;
use crate::{Error, Result};

/// Softmax-regression parameters: a K x D weight matrix and a K bias vector.
/// The bias is not regularized, so under heavy L2 the predictions fall back
/// to the class priors rather than to uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub classes: Vec<TaskLabel>,
    /// Row-major K x D.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub dim: usize,
    pub l2_lambda: f64,
    /// Full-dataset regularized loss recorded after each epoch.
    pub train_log: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub rng_seed: u64,
}

impl Default for LinearTrainConfig {
    fn default() -> Self {
        LinearTrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.1,
            l2_lambda: 1e-4,
            rng_seed: 0,
        }
    }
}

/// Gradient of the regularized mean cross-entropy, same shape as the
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    fn zeros(classes: &[TaskLabel], dim: usize, l2_lambda: f64) -> LinearModel {
        LinearModel {
            classes: classes.to_vec(),
            weights: vec![0.0; classes.len() * dim],
            bias: vec![0.0; classes.len()],
            dim,
            l2_lambda,
            train_log: Vec::new(),
        }
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let k = self.classes.len();
        let mut scores = self.bias.clone();
        for (c, score) in scores.iter_mut().enumerate().take(k) {
            let row = &self.weights[c * self.dim..(c + 1) * self.dim];
            *score += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        scores
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(prediction_from_scores(self.scores(x), &self.classes))
    }
}

/// Regularized mean cross-entropy and its analytic gradient over a dataset.
///
/// `loss = (1/N) sum_i [logsumexp(z_i) - z_i[y_i]] + (lambda/2) ||W||^2`.
/// The mean formulation makes both loss and gradient invariant under
/// duplicating the dataset.
pub fn linear_loss_grad(
    model: &LinearModel,
    x: &[Vec<f64>],
    y: &[TaskLabel],
) -> Result<(f64, LinearGradient)> {
    let y_idx = validate_training_inputs(x, y, &model.classes)?;
    if x[0].len() != model.dim {
        return Err(Error::Dimension(format!(
            "input has {} features, model expects {}",
            x[0].len(),
            model.dim
        )));
    }
    let (loss, mut grad) = loss_grad_over(model, x, &y_idx, (0..x.len()).collect::<Vec<_>>().as_slice());
    // L2 term on the weights only.
    let mut reg = 0.0;
    for (g, w) in grad.weights.iter_mut().zip(&model.weights) {
        *g += model.l2_lambda * w;
        reg += w * w;
    }
    Ok((loss + 0.5 * model.l2_lambda * reg, grad))
}

/// Unregularized mean cross-entropy and gradient over the given sample
/// indices.
fn loss_grad_over(
    model: &LinearModel,
    x: &[Vec<f64>],
    y_idx: &[usize],
    samples: &[usize],
) -> (f64, LinearGradient) {
    let k = model.classes.len();
    let d = model.dim;
    let inv_n = 1.0 / samples.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    for &i in samples {
        let mut scores = model.scores(&x[i]);
        let lse = log_sum_exp(&scores);
        loss += (lse - scores[y_idx[i]]) * inv_n;
        // scores become the predicted probabilities
        for s in scores.iter_mut() {
            *s = (*s - lse).exp();
        }
        for c in 0..k {
            let delta = (scores[c] - if c == y_idx[i] { 1.0 } else { 0.0 }) * inv_n;
            gb[c] += delta;
            let row = &mut gw[c * d..(c + 1) * d];
            for (g, v) in row.iter_mut().zip(&x[i]) {
                *g += delta * v;
            }
        }
    }
    (
        loss,
        LinearGradient {
            weights: gw,
            bias: gb,
        },
    )
}

/// Trains softmax regression by mini-batch gradient descent on the mean
/// cross-entropy plus `(lambda/2)||W||^2`. Deterministic for a given seed;
/// the full-dataset loss is recorded after every epoch.
pub fn train_linear(
    x: &[Vec<f64>],
    y: &[TaskLabel],
    classes: &[TaskLabel],
    cfg: &LinearTrainConfig,
) -> Result<LinearModel> {
    let y_idx = validate_training_inputs(x, y, classes)?;
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.learning_rate <= 0.0 || cfg.l2_lambda < 0.0 {
        return Err(Error::Validation(
            "epochs, batch size, and learning rate must be positive; lambda nonnegative".into(),
        ));
    }
    let dim = x[0].len();
    let mut model = LinearModel::zeros(classes, dim, cfg.l2_lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let all: Vec<usize> = order.clone();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = loss_grad_over(&model, x, &y_idx, batch);
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                *w -= cfg.learning_rate * (g + cfg.l2_lambda * *w);
            }
            for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                *b -= cfg.learning_rate * g;
            }
        }
        let (epoch_loss, _) = loss_grad_over(&model, x, &y_idx, &all);
        let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>();
        model.train_log.push(epoch_loss + 0.5 * cfg.l2_lambda * reg);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Task;
    use rand::{Rng, SeedableRng};

    /// 2-class toy set separable on the first coordinate.
    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<TaskLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let center = if class == 0 { -2.0 } else { 2.0 };
            x.push(vec![
                center + rng.gen_range(-0.5..0.5),
                rng.gen_range(-1.0..1.0),
            ]);
            y.push(Task::Detection.classes()[class]);
        }
        (x, y)
    }

    #[test]
    fn zero_model_loss_is_ln_k() {
        for task in [Task::Detection, Task::Attribution] {
            let classes = task.classes();
            let k = classes.len();
            let model = LinearModel::zeros(classes, 3, 0.0);
            let x: Vec<Vec<f64>> = (0..k * 2).map(|i| vec![i as f64, 1.0, -1.0]).collect();
            let y: Vec<TaskLabel> = (0..k * 2).map(|i| classes[i % k]).collect();
            let (loss, _) = linear_loss_grad(&model, &x, &y).unwrap();
            assert_eq!(loss, (k as f64).ln());
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let classes = Task::Detection.classes();
        let n = 5;
        let d = 4;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<TaskLabel> = (0..n).map(|i| classes[i % 2]).collect();
        let mut model = LinearModel::zeros(classes, d, 0.1);
        for w in model.weights.iter_mut().chain(model.bias.iter_mut()) {
            *w = rng.gen_range(-0.5..0.5);
        }
        let (_, grad) = linear_loss_grad(&model, &x, &y).unwrap();
        let h = 1e-5;
        let mut check = |analytic: f64, weights_idx: Option<usize>, bias_idx: Option<usize>| {
            let mut probe = model.clone();
            let slot = |m: &mut LinearModel| -> &mut f64 {
                match (weights_idx, bias_idx) {
                    (Some(i), None) => &mut m.weights[i],
                    (None, Some(i)) => &mut m.bias[i],
                    _ => unreachable!(),
                }
            };
            *slot(&mut probe) += h;
            let (up, _) = linear_loss_grad(&probe, &x, &y).unwrap();
            *slot(&mut probe) -= 2.0 * h;
            let (down, _) = linear_loss_grad(&probe, &x, &y).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic - numeric).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
            assert!(rel <= 1e-4, "analytic {analytic} vs numeric {numeric}");
        };
        for i in 0..model.weights.len() {
            check(grad.weights[i], Some(i), None);
        }
        for i in 0..model.bias.len() {
            check(grad.bias[i], None, Some(i));
        }
    }

    #[test]
    fn duplicating_dataset_preserves_loss_and_gradient() {
        let (x, y) = separable(20, 3);
        let mut model = LinearModel::zeros(Task::Detection.classes(), 2, 0.05);
        model.weights[0] = 0.3;
        model.bias[1] = -0.2;
        let (loss1, grad1) = linear_loss_grad(&model, &x, &y).unwrap();
        let xx: Vec<Vec<f64>> = x.iter().chain(x.iter()).cloned().collect();
        let yy: Vec<TaskLabel> = y.iter().chain(y.iter()).cloned().collect();
        let (loss2, grad2) = linear_loss_grad(&model, &xx, &yy).unwrap();
        assert!((loss1 - loss2).abs() < 1e-12);
        for (a, b) in grad1.weights.iter().zip(&grad2.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_data_trains_to_high_accuracy() {
        let (x, y) = separable(200, 1);
        let cfg = LinearTrainConfig {
            epochs: 60,
            learning_rate: 0.5,
            l2_lambda: 0.0,
            ..Default::default()
        };
        let model = train_linear(&x, &y, Task::Detection.classes(), &cfg).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, yi)| model.predict(xi).unwrap().label == **yi)
            .count();
        assert!(correct as f64 / x.len() as f64 >= 0.99);
    }

    #[test]
    fn epoch_loss_is_non_increasing_at_small_lr() {
        let (x, y) = separable(200, 2);
        let cfg = LinearTrainConfig {
            epochs: 30,
            learning_rate: 0.01,
            l2_lambda: 0.0,
            ..Default::default()
        };
        let model = train_linear(&x, &y, Task::Detection.classes(), &cfg).unwrap();
        for pair in model.train_log.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "loss increased: {pair:?}");
        }
    }

    #[test]
    fn heavy_regularization_shrinks_to_class_priors() {
        // 3:1 imbalance; with lambda so large the weights stay ~0, the
        // unpenalized bias should learn the priors.
        let classes = Task::Detection.classes();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            x.push(vec![(i % 7) as f64 - 3.0, (i % 5) as f64]);
            y.push(if i % 4 == 0 { classes[1] } else { classes[0] });
        }
        let cfg = LinearTrainConfig {
            epochs: 400,
            learning_rate: 0.05,
            l2_lambda: 1e6,
            ..Default::default()
        };
        let model = train_linear(&x, &y, classes, &cfg).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-3));
        let p = model.predict(&[0.0, 0.0]).unwrap();
        assert!((p.probabilities[0] - 0.75).abs() < 0.03, "{:?}", p.probabilities);
        assert!((p.probabilities[1] - 0.25).abs() < 0.03);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = separable(100, 4);
        let cfg = LinearTrainConfig::default();
        let a = train_linear(&x, &y, Task::Detection.classes(), &cfg).unwrap();
        let b = train_linear(&x, &y, Task::Detection.classes(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let model = LinearModel::zeros(Task::Detection.classes(), 3, 0.0);
        assert!(matches!(model.predict(&[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let model = LinearModel::zeros(Task::Attribution.classes(), 2, 0.0);
        let p = model.predict(&[5.0, -3.0]).unwrap();
        for prob in &p.probabilities {
            assert!((prob - 1.0 / 6.0).abs() < 1e-12);
        }
    }
}
