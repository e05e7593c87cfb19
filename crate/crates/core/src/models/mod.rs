//! From-scratch trainable classifiers with a shared predict contract:
//! multinomial logistic regression and second-order gradient-boosted trees,
//! plus a versioned binary container for both.

mod gbdt;
mod io;
mod linear;

pub use gbdt::{split_gain, train_gbdt, GbdtTrainConfig, Tree, TreeEnsemble, TreeNode};
pub use io::{
    load_model, load_model_with_meta, save_model, save_model_with_meta, KIND_ENSEMBLE,
    KIND_LINEAR, MODEL_FORMAT_VERSION, MODEL_MAGIC,
};
pub use linear::{
    linear_loss_grad, train_linear, LinearGradient, LinearModel, LinearTrainConfig,
};

use crate::corpus::TaskLabel;
use crate::{Error, Result};

/// Class probabilities plus the argmax label.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub label: TaskLabel,
}

/// A trained classifier of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Ensemble(TreeEnsemble),
}

impl Model {
    pub fn classes(&self) -> &[TaskLabel] {
        match self {
            Model::Linear(m) => &m.classes,
            Model::Ensemble(m) => &m.classes,
        }
    }

    /// Input feature dimension the model was trained on.
    pub fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim,
            Model::Ensemble(m) => m.dim,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            Model::Linear(m) => m.predict(x),
            Model::Ensemble(m) => m.predict(x),
        }
    }
}

/// Numerically stable log of the softmax normalizer.
pub(crate) fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Softmax over `scores`, written in place.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Builds a prediction from raw class scores.
pub(crate) fn prediction_from_scores(mut scores: Vec<f64>, classes: &[TaskLabel]) -> Prediction {
    softmax_in_place(&mut scores);
    let argmax = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    Prediction {
        label: classes[argmax],
        probabilities: scores,
    }
}

/// Shared training-input validation. Returns per-sample class indices.
pub(crate) fn validate_training_inputs(
    x: &[Vec<f64>],
    y: &[TaskLabel],
    classes: &[TaskLabel],
) -> Result<Vec<usize>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if classes.len() < 2 {
        return Err(Error::Validation("need at least 2 classes".into()));
    }
    if x.len() < classes.len() {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} classes",
            x.len(),
            classes.len()
        )));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::Dimension("zero-length feature vectors".into()));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Dimension(format!(
                "feature row {} has length {} but row 0 has {}",
                i,
                row.len(),
                dim
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {i}")));
        }
    }
    let mut indices = Vec::with_capacity(y.len());
    let mut present = vec![false; classes.len()];
    for (i, label) in y.iter().enumerate() {
        let k = classes.iter().position(|c| c == label).ok_or_else(|| {
            Error::Validation(format!("label '{label}' of sample {i} not in class list"))
        })?;
        present[k] = true;
        indices.push(k);
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::Validation(
            "fewer than 2 classes present in the training labels".into(),
        ));
    }
    Ok(indices)
}
