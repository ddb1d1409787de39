use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureVector, IntentLabel};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;
const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Stop once the largest gradient component falls below this.
    pub tol: f64,
    pub l2: f64,
    pub seed: u64,
    /// Uniform jitter amplitude for the initial weights; 0 keeps the zero start.
    pub init_jitter: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iters: 1000,
            tol: 1e-6,
            l2: 1e-4,
            seed: 0,
            init_jitter: 0.0,
        }
    }
}

/// Multinomial logistic regression over [`FeatureVector::to_dense`] inputs.
///
/// Inputs are divided by the per-dimension max magnitude seen in training,
/// which keeps the hashed bag of words sparse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: u32,
    pub dim: usize,
    pub scale: Vec<f64>,
    /// One row per class, in [`IntentLabel::CLASSES`] order.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl ClassifierModel {
    pub fn hash_dim(&self) -> usize {
        self.dim.saturating_sub(super::DENSE_FEATURES)
    }

    /// Linear class scores for an already-flattened feature vector.
    pub fn scores(&self, dense: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if dense.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                got: dense.len(),
            });
        }
        let mut out = [0.0; NUM_CLASSES];
        for (k, row) in self.weights.iter().enumerate() {
            out[k] = self.bias[k]
                + dense
                    .iter()
                    .zip(&self.scale)
                    .zip(row)
                    .filter(|((x, _), _)| **x != 0.0)
                    .map(|((x, s), w)| x / s * w)
                    .sum::<f64>();
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ClassifierModel = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::UndefinedInput(format!(
                "unsupported classifier format version {}",
                model.format_version
            )));
        }
        if model.weights.len() != NUM_CLASSES
            || model.bias.len() != NUM_CLASSES
            || model.scale.len() != model.dim
            || model.weights.iter().any(|w| w.len() != model.dim)
        {
            return Err(Error::UndefinedInput("classifier tables have inconsistent shapes".into()));
        }
        Ok(model)
    }
}

fn softmax(scores: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| (s - max).exp());
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

pub fn train_classifier(
    features: &[FeatureVector],
    labels: &[IntentLabel],
    config: &TrainConfig,
) -> Result<ClassifierModel> {
    if features.len() != labels.len() {
        return Err(Error::Shape {
            expected: features.len(),
            got: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::UndefinedInput("no training samples".into()));
    }
    let targets = labels
        .iter()
        .map(|l| {
            l.slot()
                .ok_or_else(|| Error::DegenerateTraining("Unknown labels cannot be trained on".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut present = [false; NUM_CLASSES];
    targets.iter().for_each(|&t| present[t] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateTraining("need at least two distinct labels".into()));
    }

    let dim = features[0].dim();
    let dense: Vec<Vec<f64>> = features.iter().map(FeatureVector::to_dense).collect();
    if let Some(bad) = dense.iter().find(|d| d.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut scale = vec![0.0f64; dim];
    for row in &dense {
        for (s, x) in scale.iter_mut().zip(row) {
            *s = s.max(x.abs());
        }
    }
    scale.iter_mut().filter(|s| **s == 0.0).for_each(|s| *s = 1.0);
    let rows: Vec<Vec<(usize, f64)>> = dense
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(j, x)| (j, x / scale[j]))
                .collect()
        })
        .collect();

    // Step size from a bound on the loss curvature (bias input counted as 1).
    let max_norm_sq = rows
        .iter()
        .map(|r| 1.0 + r.iter().map(|(_, x)| x * x).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / (0.5 * max_norm_sq + config.l2);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = vec![vec![0.0; dim]; NUM_CLASSES];
    if config.init_jitter > 0.0 {
        for w in weights.iter_mut().flatten() {
            *w = rng.gen_range(-config.init_jitter..config.init_jitter);
        }
    }
    let mut bias = [0.0; NUM_CLASSES];
    let n = rows.len() as f64;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;
        let mut grad_w = vec![vec![0.0; dim]; NUM_CLASSES];
        let mut grad_b = [0.0; NUM_CLASSES];
        for (row, &target) in rows.iter().zip(&targets) {
            let mut scores = bias;
            for (k, w) in weights.iter().enumerate() {
                scores[k] += row.iter().map(|&(j, x)| w[j] * x).sum::<f64>();
            }
            let probs = softmax(&scores);
            for k in 0..NUM_CLASSES {
                let err = probs[k] - f64::from(u8::from(k == target));
                grad_b[k] += err;
                for &(j, x) in row {
                    grad_w[k][j] += err * x;
                }
            }
        }
        let mut max_grad: f64 = 0.0;
        for k in 0..NUM_CLASSES {
            grad_b[k] /= n;
            max_grad = max_grad.max(grad_b[k].abs());
            bias[k] -= step * grad_b[k];
            for j in 0..dim {
                let g = grad_w[k][j] / n + config.l2 * weights[k][j];
                max_grad = max_grad.max(g.abs());
                weights[k][j] -= step * g;
            }
        }
        if max_grad < config.tol {
            converged = true;
            break;
        }
    }

    Ok(ClassifierModel {
        format_version: FORMAT_VERSION,
        dim,
        scale,
        weights,
        bias: bias.to_vec(),
        iterations,
        converged,
        seed: config.seed,
    })
}

/// Highest-scoring class; ties resolve to the earliest class.
pub fn argmax_label(scores: &[f64; NUM_CLASSES]) -> IntentLabel {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    IntentLabel::CLASSES[best]
}

/// Returns the predicted label and per-class probabilities.
pub fn classify(
    model: &ClassifierModel,
    features: &FeatureVector,
) -> Result<(IntentLabel, [f64; NUM_CLASSES])> {
    let scores = model.scores(&features.to_dense())?;
    Ok((argmax_label(&scores), softmax(&scores)))
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of true instances.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub per_class: [ClassMetrics; NUM_CLASSES],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Per-class and macro-averaged precision, recall and F1.
///
/// A class absent from both truth and predictions scores 1.0 and is left out
/// of the macro averages.
pub fn evaluate_classifier(
    predictions: &[IntentLabel],
    truth: &[IntentLabel],
) -> Result<ClassificationReport> {
    if truth.is_empty() {
        return Err(Error::UndefinedInput("no samples to evaluate".into()));
    }
    if predictions.len() != truth.len() {
        return Err(Error::Shape {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if truth.contains(&IntentLabel::Unknown) {
        return Err(Error::UndefinedInput("ground truth contains Unknown".into()));
    }

    let mut tp = [0usize; NUM_CLASSES];
    let mut predicted = [0usize; NUM_CLASSES];
    let mut actual = [0usize; NUM_CLASSES];
    let mut correct = 0;
    for (p, t) in predictions.iter().zip(truth) {
        let t = t.slot().expect("checked above");
        actual[t] += 1;
        if let Some(p) = p.slot() {
            predicted[p] += 1;
            if p == t {
                tp[t] += 1;
                correct += 1;
            }
        }
    }

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut per_class = [ClassMetrics {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
        support: 0,
    }; NUM_CLASSES];
    let mut active = 0;
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for k in 0..NUM_CLASSES {
        if actual[k] == 0 && predicted[k] == 0 {
            continue;
        }
        let precision = ratio(tp[k], predicted[k]);
        let recall = ratio(tp[k], actual[k]);
        let f1 = f1_score(precision, recall);
        per_class[k] = ClassMetrics {
            precision,
            recall,
            f1,
            support: actual[k],
        };
        active += 1;
        sp += precision;
        sr += recall;
        sf += f1;
    }
    let active = active as f64;
    Ok(ClassificationReport {
        per_class,
        macro_precision: sp / active,
        macro_recall: sr / active,
        macro_f1: sf / active,
        accuracy: correct as f64 / truth.len() as f64,
    })
}
