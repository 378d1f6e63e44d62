//! Pair-level scoring, antecedent resolution and feature ablation.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Conversation;
use crate::embeddings::EmbeddingTable;
use crate::featurizer::{pair_vector, FeatureBlock, FeatureError, Featurizer};
use crate::mlp::{bce_loss, MlpError, MlpModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] MlpError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Precision, recall and F1 for the positive class. A zero denominator
/// yields 0 and sets the matching flag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn scores(&self) -> Scores {
        let (tp, fp, fn_) = (self.tp as f64, self.fp as f64, self.fn_ as f64);
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        // 2tp / (2tp + fp + fn) is the harmonic mean of P and R, computed
        // with a single rounding.
        let (f1, f1_undefined) = if precision + recall == 0.0 {
            (0.0, true)
        } else {
            (2.0 * tp / (2.0 * tp + fp + fn_), false)
        };
        Scores {
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub loss: f64,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

/// A prediction is positive iff its probability is strictly above
/// `threshold`.
pub fn confusion(probs: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts, EvalError> {
    if probs.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: probs.len(),
            labels: labels.len(),
        });
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::BadThreshold(threshold));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p > threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn precision_recall_f1(probs: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport, EvalError> {
    let counts = confusion(probs, labels, threshold)?;
    let targets: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    Ok(EvalReport {
        loss: bce_loss(probs, &targets),
        counts,
        scores: counts.scores(),
    })
}

/// A named row of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn format_table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.config.len()).max().unwrap_or(0).max("Config".len());
    let mut out = format!(
        "{:<width$} | {:>8} | {:>9} | {:>8} | {:>8}\n",
        "Config", "Loss", "Precision", "Recall", "F1"
    );
    writeln!(out, "{}", "-".repeat(width + 46)).unwrap();
    for r in rows {
        let s = &r.report.scores;
        writeln!(
            out,
            "{:<width$} | {:>8.4} | {:>9.4} | {:>8.4} | {:>8.4}",
            r.config, r.report.loss, s.precision, s.recall, s.f1
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Resolution {
    Resolved { antecedent: String, score: f64 },
    Unresolved { best_score: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMention {
    pub anaphor: String,
    #[serde(flatten)]
    pub resolution: Resolution,
}

/// Picks, for every mention with at least one earlier mention, the
/// highest-scoring earlier candidate. Ties go to the most recent
/// candidate. Mentions whose best score is not above `threshold` are
/// reported as unresolved.
pub fn resolve_with<F>(conversation: &Conversation, threshold: f64, mut score: F) -> Result<Vec<ResolvedMention>, EvalError>
where
    F: FnMut(&str, &str) -> Result<f64, EvalError>,
{
    let ordered = conversation.mentions_in_order();
    let mut out = Vec::new();
    for (j, anaphor) in ordered.iter().enumerate().skip(1) {
        let mut best: Option<(&str, f64)> = None;
        for candidate in &ordered[..j] {
            let s = score(&candidate.id, &anaphor.id)?;
            if best.is_none_or(|(_, b)| s >= b) {
                best = Some((&candidate.id, s));
            }
        }
        let (antecedent, best_score) = best.expect("at least one candidate");
        let resolution = if best_score > threshold {
            Resolution::Resolved {
                antecedent: antecedent.to_string(),
                score: best_score,
            }
        } else {
            Resolution::Unresolved { best_score }
        };
        out.push(ResolvedMention {
            anaphor: anaphor.id.clone(),
            resolution,
        });
    }
    Ok(out)
}

pub fn resolve_antecedents(
    conversation: &Conversation,
    model: &MlpModel,
    table: &EmbeddingTable,
    featurizer: &Featurizer,
    threshold: f64,
) -> Result<Vec<ResolvedMention>, EvalError> {
    let mut vectors = HashMap::new();
    for m in &conversation.mentions {
        let utterance = &conversation.utterances[m.utterance_index];
        vectors.insert(m.id.as_str(), featurizer.mention_vector(m, utterance, table)?);
    }
    resolve_with(conversation, threshold, |a, b| {
        let pair = pair_vector(&vectors[a], &vectors[b])?;
        Ok(model.predict_pair(&pair)?)
    })
}

/// Ablation rows: the embedding-only baseline, then the baseline plus one
/// agreement block each.
pub fn ablation_configs() -> Vec<(&'static str, Vec<FeatureBlock>)> {
    vec![
        ("None", vec![FeatureBlock::Embedding]),
        ("Gender", vec![FeatureBlock::Embedding, FeatureBlock::Gender]),
        ("Number", vec![FeatureBlock::Embedding, FeatureBlock::Number]),
        ("Person", vec![FeatureBlock::Embedding, FeatureBlock::Person]),
        ("PoP", vec![FeatureBlock::Embedding, FeatureBlock::Pop]),
    ]
}
