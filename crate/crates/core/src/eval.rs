//! Evaluation: confusion matrices, per-class F1, macro-F1, accuracy,
//! per-class error rates, and the few-shot learning-curve protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Language, TaskLabel};
use crate::models::Prediction;
use crate::{Error, Result};

/// Default few-shot sweep totals (split evenly across the two languages).
pub const DEFAULT_FEWSHOT_SIZES: [usize; 5] = [200, 400, 600, 800, 1000];

/// Gold-by-predicted counts over a fixed class list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: Vec<TaskLabel>,
    /// Row-major K x K; rows are gold, columns predicted.
    counts: Vec<u64>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> &[TaskLabel] {
        &self.classes
    }

    pub fn count(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold * self.classes.len() + pred]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row_total(&self, gold: usize) -> u64 {
        let k = self.classes.len();
        self.counts[gold * k..(gold + 1) * k].iter().sum()
    }

    pub fn col_total(&self, pred: usize) -> u64 {
        (0..self.classes.len()).map(|g| self.count(g, pred)).sum()
    }
}

/// Tallies gold/predicted label pairs.
pub fn confusion(
    gold: &[TaskLabel],
    pred: &[TaskLabel],
    classes: &[TaskLabel],
) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Validation("empty prediction set".into()));
    }
    let k = classes.len();
    let index = |label: &TaskLabel| {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Validation(format!("label '{label}' not in class list")))
    };
    let mut counts = vec![0u64; k * k];
    for (g, p) in gold.iter().zip(pred) {
        counts[index(g)? * k + index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
        total: gold.len() as u64,
    })
}

/// Per-class F1 with the zero conventions: a class with no predicted or no
/// gold instances (or P+R = 0) scores 0.
pub fn per_class_f1(cm: &ConfusionMatrix) -> BTreeMap<TaskLabel, f64> {
    let mut out = BTreeMap::new();
    for (c, class) in cm.classes.iter().enumerate() {
        let tp = cm.count(c, c) as f64;
        let fp = cm.col_total(c) as f64 - tp;
        let fn_ = cm.row_total(c) as f64 - tp;
        let f1 = if tp + fp == 0.0 || tp + fn_ == 0.0 {
            0.0
        } else {
            let p = tp / (tp + fp);
            let r = tp / (tp + fn_);
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        };
        out.insert(*class, f1);
    }
    out
}

/// Unweighted mean of per-class F1 over the full class list.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let f1 = per_class_f1(cm);
    f1.values().sum::<f64>() / f1.len() as f64
}

/// Trace over total.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let correct: u64 = (0..cm.classes.len()).map(|c| cm.count(c, c)).sum();
    correct as f64 / cm.total as f64
}

/// `1 - recall` per class; classes absent from the gold labels are omitted.
pub fn per_class_error(cm: &ConfusionMatrix) -> BTreeMap<TaskLabel, f64> {
    let mut out = BTreeMap::new();
    for (c, class) in cm.classes.iter().enumerate() {
        let row = cm.row_total(c);
        if row == 0 {
            continue;
        }
        out.insert(*class, (row - cm.count(c, c)) as f64 / row as f64);
    }
    out
}

/// All headline metrics for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class_f1: BTreeMap<TaskLabel, f64>,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_error: BTreeMap<TaskLabel, f64>,
    pub language: Option<Language>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn from_confusion(cm: &ConfusionMatrix, language: Option<Language>) -> EvalReport {
        EvalReport {
            per_class_f1: per_class_f1(cm),
            macro_f1: macro_f1(cm),
            accuracy: accuracy(cm),
            per_class_error: per_class_error(cm),
            language,
            n_test: cm.total() as usize,
        }
    }

    /// Human-readable `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let scope = self.language.map_or("joint", |l| l.code());
        let _ = writeln!(out, "scope: {scope}");
        let _ = writeln!(out, "n_test: {}", self.n_test);
        let _ = writeln!(out, "accuracy: {:.6}", self.accuracy);
        let _ = writeln!(out, "macro_f1: {:.6}", self.macro_f1);
        for (label, f1) in &self.per_class_f1 {
            let _ = writeln!(out, "f1_{label}: {f1:.6}");
        }
        for (label, err) in &self.per_class_error {
            let _ = writeln!(out, "error_{label}: {err:.6}");
        }
        out
    }
}

/// One point of a few-shot learning curve: evaluated per language and
/// jointly, with the mean per-example cross-entropy on the joint test set.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotPoint {
    pub total_samples: usize,
    pub per_language_samples: usize,
    pub eval_en: EvalReport,
    pub eval_es: EvalReport,
    pub eval_joint: EvalReport,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotReport {
    pub points: Vec<FewShotPoint>,
    pub rng_seed: u64,
}

/// Draws a stratified sample of `per_language_n` documents from each
/// language and merges them.
///
/// Samples are nested: under one seed, the draw for `n` is a subset of the
/// draw for any larger `n`, because each class keeps a fixed seed-derived
/// permutation and takes a prefix. Per-class quotas differ by at most one.
pub fn fewshot_sample(
    en: &Corpus,
    es: &Corpus,
    per_language_n: usize,
    seed: u64,
) -> Result<Corpus> {
    if en.task != es.task {
        return Err(Error::Validation("corpora have different tasks".into()));
    }
    if per_language_n == 0 {
        return Err(Error::Validation("sample size must be positive".into()));
    }
    let task = en.task;
    let classes = task.classes();
    let mut sampled: Vec<Document> = Vec::with_capacity(2 * per_language_n);
    for (lang_tag, corpus) in [(0u64, en), (1u64, es)] {
        let quota_base = per_language_n / classes.len();
        let quota_rem = per_language_n % classes.len();
        for (c, class) in classes.iter().enumerate() {
            let quota = quota_base + usize::from(c < quota_rem);
            let mut members: Vec<usize> = corpus
                .documents
                .iter()
                .enumerate()
                .filter(|(_, d)| d.label == *class)
                .map(|(i, _)| i)
                .collect();
            if members.len() < quota {
                return Err(Error::InsufficientData(format!(
                    "class '{}' has {} documents in the {} corpus, need {} for a {}-per-language sample",
                    class,
                    members.len(),
                    if lang_tag == 0 { "first" } else { "second" },
                    quota,
                    per_language_n
                )));
            }
            // The permutation depends only on (seed, language slot, class),
            // which is what makes prefixes nest across sample sizes.
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (lang_tag << 32) ^ ((c as u64) << 40));
            members.shuffle(&mut rng);
            for &i in members.iter().take(quota) {
                sampled.push(corpus.documents[i].clone());
            }
        }
    }
    Corpus::new(task, sampled, en.split_tag)
}

/// Arithmetic mean of nonnegative per-example losses.
pub fn mean_loss(per_example_losses: &[f64]) -> Result<f64> {
    if per_example_losses.is_empty() {
        return Err(Error::Validation("mean loss of an empty list".into()));
    }
    if per_example_losses.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return Err(Error::Validation("losses must be finite and nonnegative".into()));
    }
    Ok(per_example_losses.iter().sum::<f64>() / per_example_losses.len() as f64)
}

/// Cross-entropy of one prediction against its gold label.
pub fn prediction_loss(prediction: &Prediction, gold: TaskLabel, classes: &[TaskLabel]) -> Result<f64> {
    let idx = classes
        .iter()
        .position(|c| *c == gold)
        .ok_or_else(|| Error::Validation(format!("label '{gold}' not in class list")))?;
    Ok(-prediction.probabilities[idx].max(1e-15).ln())
}

/// Runs the few-shot protocol: for each total size, draw a nested bilingual
/// sample, train a model from scratch, and evaluate per language and
/// jointly.
///
/// `train` builds a model from a sampled corpus; `predict` scores one test
/// document with it.
pub fn fewshot_curve<M, TF, PF>(
    en_train: &Corpus,
    es_train: &Corpus,
    sizes: &[usize],
    seed: u64,
    en_test: &Corpus,
    es_test: &Corpus,
    mut train: TF,
    predict: PF,
) -> Result<FewShotReport>
where
    TF: FnMut(&Corpus) -> Result<M>,
    PF: Fn(&M, &Document) -> Result<Prediction>,
{
    if sizes.is_empty() {
        return Err(Error::Validation("few-shot sweep needs at least one size".into()));
    }
    for pair in sizes.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Validation(format!(
                "few-shot sizes must be strictly increasing, got {sizes:?}"
            )));
        }
    }
    let classes = en_train.task.classes();
    let mut points = Vec::with_capacity(sizes.len());
    for &total in sizes {
        if total % 2 != 0 {
            return Err(Error::Validation(format!(
                "few-shot total {total} cannot be split evenly across two languages"
            )));
        }
        let per_language = total / 2;
        let sample = fewshot_sample(en_train, es_train, per_language, seed)?;
        let model = train(&sample)?;

        let mut score =
            |corpus: &Corpus| -> Result<(Vec<TaskLabel>, Vec<TaskLabel>, Vec<f64>)> {
                let mut gold = Vec::with_capacity(corpus.len());
                let mut pred = Vec::with_capacity(corpus.len());
                let mut losses = Vec::with_capacity(corpus.len());
                for doc in &corpus.documents {
                    let p = predict(&model, doc)?;
                    losses.push(prediction_loss(&p, doc.label, classes)?);
                    gold.push(doc.label);
                    pred.push(p.label);
                }
                Ok((gold, pred, losses))
            };

        let (gold_en, pred_en, loss_en) = score(en_test)?;
        let (gold_es, pred_es, loss_es) = score(es_test)?;
        let eval_en = EvalReport::from_confusion(
            &confusion(&gold_en, &pred_en, classes)?,
            Some(Language::En),
        );
        let eval_es = EvalReport::from_confusion(
            &confusion(&gold_es, &pred_es, classes)?,
            Some(Language::Es),
        );
        let gold_joint: Vec<TaskLabel> = gold_en.iter().chain(&gold_es).copied().collect();
        let pred_joint: Vec<TaskLabel> = pred_en.iter().chain(&pred_es).copied().collect();
        let eval_joint =
            EvalReport::from_confusion(&confusion(&gold_joint, &pred_joint, classes)?, None);
        let all_losses: Vec<f64> = loss_en.iter().chain(&loss_es).copied().collect();
        points.push(FewShotPoint {
            total_samples: total,
            per_language_samples: per_language,
            eval_en,
            eval_es,
            eval_joint,
            mean_loss: mean_loss(&all_losses)?,
        });
    }
    Ok(FewShotReport {
        points,
        rng_seed: seed,
    })
}
