use serde::{Deserialize, Serialize};

use super::{Dataset, LearnerError, MIN_RECORDS_PER_CLASS};
use crate::signal::FeatureVector;
use crate::AttentionLabel;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 500, step_size: 0.1, l2: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub step_size: f64,
    pub l2: f64,
    pub seed: u64,
    pub final_loss: f64,
    /// Objective before the first step, then after every epoch.
    pub losses: Vec<f64>,
    pub n_records: usize,
    /// Semi-supervised records present at training time.
    pub semi_supervised_seen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionModel {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Features with zero spread in training; their weight is pinned to 0.
    pub constant: Vec<bool>,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: AttentionLabel,
    pub confidence: f64,
}

/// Anything that can label a feature vector; the session engine only talks
/// to this interface.
pub trait Classifier: Send + Sync {
    fn classify(&self, fv: &FeatureVector) -> Result<Prediction, LearnerError>;
}

impl Classifier for AttentionModel {
    fn classify(&self, fv: &FeatureVector) -> Result<Prediction, LearnerError> {
        predict(self, fv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    /// 0 when nothing was predicted positive.
    pub precision: f64,
    /// 0 when there are no positive records.
    pub recall: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Normalised design matrix with per-record class weights.
pub(crate) struct Problem {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    sample_weight: Vec<f64>,
    mask: Vec<bool>,
    l2: f64,
}

impl Problem {
    pub(crate) fn new(data: &Dataset, means: &[f64], stds: &[f64], constant: &[bool], l2: f64) -> Problem {
        let n = data.len() as f64;
        let n_pos = data.count(AttentionLabel::Attention) as f64;
        let n_neg = n - n_pos;
        let mut x = Vec::with_capacity(data.len());
        let mut y = Vec::with_capacity(data.len());
        let mut sample_weight = Vec::with_capacity(data.len());
        for r in data.records() {
            x.push(r.fv.values.iter().enumerate().map(|(j, v)| if constant[j] { 0.0 } else { (v - means[j]) / stds[j] }).collect());
            let pos = r.label.is_attention();
            y.push(if pos { 1.0 } else { 0.0 });
            sample_weight.push(if pos { n / (2.0 * n_pos) } else { n / (2.0 * n_neg) });
        }
        Problem { x, y, sample_weight, mask: constant.iter().map(|c| !c).collect(), l2 }
    }

    /// Weighted mean cross-entropy plus `l2/2 · ‖w‖²`, with its gradient in
    /// `(w, b)`. The bias is not penalised.
    pub(crate) fn eval(&self, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
        let n = self.x.len() as f64;
        let mut loss = 0.0;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for ((xi, yi), si) in self.x.iter().zip(&self.y).zip(&self.sample_weight) {
            let z = b + xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            loss += si * (softplus(z) - yi * z);
            let r = si * (sigmoid(z) - yi);
            for (g, a) in gw.iter_mut().zip(xi) {
                *g += r * a;
            }
            gb += r;
        }
        loss /= n;
        gb /= n;
        for (j, g) in gw.iter_mut().enumerate() {
            *g = if self.mask[j] { *g / n + self.l2 * w[j] } else { 0.0 };
        }
        loss += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        (loss, gw, gb)
    }
}

fn check_classes(data: &Dataset) -> Result<(), LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyDataset);
    }
    for label in [AttentionLabel::Attention, AttentionLabel::NonAttention] {
        let got = data.count(label);
        if got == 0 {
            return Err(LearnerError::ClassImbalanceFatal(label));
        }
        if got < MIN_RECORDS_PER_CLASS {
            return Err(LearnerError::TooFewRecords { label, got, needed: MIN_RECORDS_PER_CLASS });
        }
    }
    Ok(())
}

/// Fits the logistic model by full-batch gradient descent from zero
/// weights. Class imbalance is handled by inverse-frequency record weights.
pub fn train(data: &Dataset, config: &TrainConfig, seed: u64) -> Result<AttentionModel, LearnerError> {
    if !(config.step_size > 0.0 && config.step_size.is_finite() && config.epochs > 0 && config.l2 >= 0.0) {
        return Err(LearnerError::InvalidConfig(format!("{config:?}")));
    }
    check_classes(data)?;
    let d = data.dim();
    let n = data.len() as f64;
    let mut means = vec![0.0; d];
    for r in data.records() {
        for (m, v) in means.iter_mut().zip(&r.fv.values) {
            *m += v / n;
        }
    }
    let mut stds = vec![0.0; d];
    for r in data.records() {
        for (j, v) in r.fv.values.iter().enumerate() {
            stds[j] += (v - means[j]).powi(2) / n;
        }
    }
    let mut constant = vec![false; d];
    for j in 0..d {
        stds[j] = stds[j].sqrt();
        if !(stds[j] > 1e-12 * means[j].abs().max(1.0)) {
            constant[j] = true;
            stds[j] = 1.0;
        }
    }
    let problem = Problem::new(data, &means, &stds, &constant, config.l2);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut losses = Vec::with_capacity(config.epochs + 1);
    let (mut loss, mut gw, mut gb) = problem.eval(&w, b);
    losses.push(loss);
    for _ in 0..config.epochs {
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= config.step_size * g;
        }
        b -= config.step_size * gb;
        (loss, gw, gb) = problem.eval(&w, b);
        losses.push(loss);
    }
    Ok(AttentionModel {
        version: MODEL_VERSION,
        feature_names: data.feature_names.clone(),
        weights: w,
        bias: b,
        means,
        stds,
        constant,
        meta: TrainingMeta {
            epochs: config.epochs,
            step_size: config.step_size,
            l2: config.l2,
            seed,
            final_loss: loss,
            losses,
            n_records: data.len(),
            semi_supervised_seen: data.count_origin(super::Origin::SemiSupervised),
        },
    })
}

impl AttentionModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, values: &[f64]) -> f64 {
        let mut z = self.bias;
        for j in 0..self.dim() {
            if !self.constant[j] {
                z += self.weights[j] * (values[j] - self.means[j]) / self.stds[j];
            }
        }
        z
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<AttentionModel, LearnerError> {
        let m: AttentionModel = serde_json::from_str(text).map_err(|e| LearnerError::Persist(e.to_string()))?;
        if m.version != MODEL_VERSION {
            return Err(LearnerError::Persist(format!("unsupported model version {}", m.version)));
        }
        let d = m.weights.len();
        if [m.means.len(), m.stds.len(), m.constant.len(), m.feature_names.len()].iter().any(|l| *l != d) {
            return Err(LearnerError::Persist("inconsistent model dimensions".into()));
        }
        Ok(m)
    }
}

/// Training objective at the model's parameters and its gradient in
/// `(weights, bias)`, using the model's normalisation and penalty.
pub fn objective(model: &AttentionModel, data: &Dataset) -> Result<(f64, Vec<f64>, f64), LearnerError> {
    if data.dim() != model.dim() {
        return Err(LearnerError::DimensionMismatch { expected: model.dim(), got: data.dim() });
    }
    check_classes(data)?;
    let p = Problem::new(data, &model.means, &model.stds, &model.constant, model.meta.l2);
    Ok(p.eval(&model.weights, model.bias))
}

/// Confidence is the sigmoid of the affine score; a tie at exactly 0.5 is
/// labeled non-attention.
pub fn predict(model: &AttentionModel, fv: &FeatureVector) -> Result<Prediction, LearnerError> {
    if fv.dim() != model.dim() {
        return Err(LearnerError::DimensionMismatch { expected: model.dim(), got: fv.dim() });
    }
    let confidence = sigmoid(model.score(&fv.values));
    let label = if confidence > 0.5 { AttentionLabel::Attention } else { AttentionLabel::NonAttention };
    Ok(Prediction { label, confidence })
}

pub fn evaluate(model: &AttentionModel, data: &Dataset) -> Result<EvalReport, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyDataset);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for r in data.records() {
        let p = predict(model, &r.fv)?.label.is_attention();
        match (p, r.label.is_attention()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(EvalReport::from_counts(tp, fp, tn, fn_))
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> EvalReport {
        let n = tp + fp + tn + fn_;
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        EvalReport { n, tp, fp, tn, fn_, accuracy: ratio(tp + tn, n), precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_) }
    }
}
