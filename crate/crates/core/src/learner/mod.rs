//! Attention classifier: datasets, an L2-regularised logistic model, evaluation
//! and the semi-supervised update from agreeing phase-2 feedback.

mod model;

pub use model::{evaluate, objective, predict, train, AttentionModel, Classifier, EvalReport, Prediction, TrainConfig, TrainingMeta, MODEL_VERSION};

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{FeedbackEvent, FeedbackKind};
use crate::signal::FeatureVector;
use crate::AttentionLabel;

/// Minimum records per class accepted by [`train`].
pub const MIN_RECORDS_PER_CLASS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("class {0} is absent from the training data")]
    ClassImbalanceFatal(AttentionLabel),
    #[error("class {label} has {got} records, at least {needed} are required")]
    TooFewRecords { label: AttentionLabel, got: usize, needed: usize },
    #[error("feature vector has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("persistence: {0}")]
    Persist(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Phase1,
    SemiSupervised,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Phase1 => "phase1",
            Origin::SemiSupervised => "semi_supervised",
        }
    }

    pub fn parse(s: &str) -> Option<Origin> {
        match s {
            "phase1" => Some(Origin::Phase1),
            "semi_supervised" => Some(Origin::SemiSupervised),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub fv: FeatureVector,
    pub label: AttentionLabel,
    pub origin: Origin,
    /// 1-based session the window was recorded in.
    pub session: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub participant_id: String,
    pub feature_names: Vec<String>,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(participant_id: impl Into<String>, feature_names: Vec<String>) -> Self {
        Dataset { participant_id: participant_id.into(), feature_names, records: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: Record) -> Result<(), LearnerError> {
        if record.fv.dim() != self.dim() {
            return Err(LearnerError::DimensionMismatch { expected: self.dim(), got: record.fv.dim() });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn count(&self, label: AttentionLabel) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.records.iter().filter(|r| r.origin == origin).count()
    }

    pub fn sessions(&self) -> BTreeSet<u32> {
        self.records.iter().map(|r| r.session).collect()
    }

    fn with_records(&self, records: Vec<Record>) -> Dataset {
        Dataset { participant_id: self.participant_id.clone(), feature_names: self.feature_names.clone(), records }
    }

    /// `(train, test)` where the test part holds the records of `test_sessions`.
    pub fn split_by_session(&self, test_sessions: &BTreeSet<u32>) -> (Dataset, Dataset) {
        let (test, train): (Vec<Record>, Vec<Record>) = self.records.iter().cloned().partition(|r| test_sessions.contains(&r.session));
        (self.with_records(train), self.with_records(test))
    }

    /// Subsamples the majority class down to the minority count, keeping the
    /// original record order.
    pub fn balanced(&self, seed: u64) -> Dataset {
        let idx = |l| self.records.iter().enumerate().filter(|(_, r)| r.label == l).map(|(i, _)| i).collect::<Vec<_>>();
        let (mut a, mut b) = (idx(AttentionLabel::Attention), idx(AttentionLabel::NonAttention));
        let keep = a.len().min(b.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let mut chosen: Vec<usize> = a[..keep].iter().chain(&b[..keep]).copied().collect();
        chosen.sort_unstable();
        self.with_records(chosen.into_iter().map(|i| self.records[i].clone()).collect())
    }

    /// Appends a semi-supervised record for agreeing feedback: case (a)
    /// adds an attention example, case (b) a non-attention one. Returns
    /// whether a record was added.
    pub fn apply_feedback(&mut self, fv: &FeatureVector, event: &FeedbackEvent, session: u32) -> Result<bool, LearnerError> {
        let label = match event.kind {
            FeedbackKind::NfbEncourage => AttentionLabel::Attention,
            FeedbackKind::NfbReinforce => AttentionLabel::NonAttention,
            _ => return Ok(false),
        };
        self.push(Record { fv: fv.clone(), label, origin: Origin::SemiSupervised, session })?;
        Ok(true)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# participant={}\n", self.participant_id);
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = ["ts", "label", "origin", "session"].into_iter().chain(self.feature_names.iter().map(String::as_str)).collect();
        let _ = w.write_record(&header);
        for r in &self.records {
            let mut row = vec![r.fv.ts.to_string(), r.label.as_str().to_string(), r.origin.as_str().to_string(), r.session.to_string()];
            row.extend(r.fv.values.iter().map(|v| v.to_string()));
            let _ = w.write_record(&row);
        }
        out.push_str(&String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default());
        out
    }

    pub fn from_csv(text: &str) -> Result<Dataset, LearnerError> {
        let bad = |m: String| LearnerError::Persist(m);
        let (first, rest) = text.split_once('\n').ok_or_else(|| bad("empty dataset file".into()))?;
        let participant = first.trim_end().strip_prefix("# participant=").ok_or_else(|| bad("missing participant line".into()))?;
        let mut rdr = csv::Reader::from_reader(rest.as_bytes());
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 4 || cols[..4] != ["ts", "label", "origin", "session"] {
            return Err(bad(format!("unexpected header {cols:?}")));
        }
        let mut data = Dataset::new(participant, cols[4..].iter().map(|s| s.to_string()).collect());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("record {}: bad number {s:?}", line + 1)));
            let label = AttentionLabel::parse(&rec[1]).ok_or_else(|| bad(format!("record {}: bad label {:?}", line + 1, &rec[1])))?;
            let origin = Origin::parse(&rec[2]).ok_or_else(|| bad(format!("record {}: bad origin {:?}", line + 1, &rec[2])))?;
            let session = rec[3].parse().map_err(|_| bad(format!("record {}: bad session", line + 1)))?;
            let values = rec.iter().skip(4).map(num).collect::<Result<Vec<_>, _>>()?;
            data.push(Record { fv: FeatureVector { ts: num(&rec[0])?, values }, label, origin, session })?;
        }
        Ok(data)
    }
}

/// Copy of `data` with the feedback applied; existing records are untouched.
pub fn semi_supervised_update(data: &Dataset, fv: &FeatureVector, event: &FeedbackEvent, session: u32) -> Result<Dataset, LearnerError> {
    let mut out = data.clone();
    out.apply_feedback(fv, event, session)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrainPolicy {
    pub min_new_records: usize,
}

impl Default for RetrainPolicy {
    fn default() -> Self {
        RetrainPolicy { min_new_records: 50 }
    }
}

/// Whether to retrain now. `trained_on` is the number of semi-supervised
/// records the current model has already seen; retraining only happens
/// between sessions.
pub fn retrain_schedule(data: &Dataset, policy: &RetrainPolicy, trained_on: usize, between_sessions: bool) -> bool {
    between_sessions && data.count_origin(Origin::SemiSupervised).saturating_sub(trained_on) >= policy.min_new_records
}
