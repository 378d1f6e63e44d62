//! End-to-end experiments: featurize, rebalance, train, evaluate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{generate_pairs, split_corpus, Conversation, CorpusError};
use crate::embeddings::EmbeddingTable;
use crate::evaluator::{ablation_configs, precision_recall_f1, EvalError, EvalReport, ReportRow};
use crate::featurizer::{pair_vector, FeatureError, FeatureLayout, Featurizer, MentionVector};
use crate::mlp::{train_with, EpochStats, MlpConfig, MlpError, MlpModel, TrainReport};
use crate::sampler::{rebalance, PairDataset, SamplerError, Sampling, SmoteConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] MlpError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Pair vectors for every within-conversation mention pair.
pub fn build_dataset(
    conversations: &[Conversation],
    table: &EmbeddingTable,
    featurizer: &Featurizer,
) -> Result<PairDataset, FeatureError> {
    let mut data = PairDataset::default();
    for conv in conversations {
        let vectors: std::collections::HashMap<&str, MentionVector> = conv
            .mentions
            .iter()
            .map(|m| {
                featurizer
                    .mention_vector(m, &conv.utterances[m.utterance_index], table)
                    .map(|v| (m.id.as_str(), v))
            })
            .collect::<Result<_, _>>()?;
        for pair in generate_pairs(conv) {
            let v = pair_vector(&vectors[pair.antecedent.as_str()], &vectors[pair.anaphor.as_str()])?;
            data.push(v, pair.label, pair.provenance);
        }
    }
    Ok(data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub sampling: Sampling,
    pub smote: SmoteConfig,
    pub mlp: MlpConfig,
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            test_fraction: 0.2,
            split_seed: 0,
            sampling: Sampling::Over,
            smote: SmoteConfig::default(),
            mlp: MlpConfig::default(),
            threshold: 0.5,
        }
    }
}

impl ExperimentConfig {
    /// Uses one seed for the split, the resampling and the network.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split_seed = seed;
        self.smote.seed = seed;
        self.mlp.seed = seed;
        self
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub model: MlpModel,
    pub train_report: TrainReport,
    pub eval: EvalReport,
    pub train_pairs: usize,
    pub test_pairs: usize,
}

/// Training pairs after rebalancing.
pub fn training_data(
    train: &[Conversation],
    table: &EmbeddingTable,
    featurizer: &Featurizer,
    cfg: &ExperimentConfig,
) -> Result<PairDataset, PipelineError> {
    let raw = build_dataset(train, table, featurizer)?;
    Ok(rebalance(&raw, cfg.sampling, &cfg.smote)?)
}

/// Trains a fresh model on prepared pairs. The featurizer is recorded in
/// the model so it can be reapplied at inference time.
pub fn train_on(
    data: &PairDataset,
    featurizer: &Featurizer,
    cfg: &ExperimentConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(MlpModel, TrainReport), PipelineError> {
    let mut mlp = cfg.mlp.clone();
    mlp.input_dim = featurizer.layout.pair_dim();
    let mut model = MlpModel::new(mlp)?;
    model.features = Some(featurizer.clone());
    Ok(train_with(model, data, on_epoch)?)
}

/// Rebalances the training pairs, trains a fresh model and returns it
/// with its report.
pub fn train_model(
    train: &[Conversation],
    table: &EmbeddingTable,
    featurizer: &Featurizer,
    cfg: &ExperimentConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(MlpModel, TrainReport), PipelineError> {
    let data = training_data(train, table, featurizer, cfg)?;
    train_on(&data, featurizer, cfg, on_epoch)
}

pub fn evaluate(
    model: &MlpModel,
    conversations: &[Conversation],
    table: &EmbeddingTable,
    featurizer: &Featurizer,
    threshold: f64,
) -> Result<EvalReport, PipelineError> {
    let data = build_dataset(conversations, table, featurizer)?;
    let probs = model.predict_dataset(&data)?;
    Ok(precision_recall_f1(&probs, &data.labels, threshold)?)
}

/// Splits by conversation, trains on the training side and scores the
/// held-out pairs.
pub fn run_experiment(
    conversations: &[Conversation],
    table: &EmbeddingTable,
    featurizer: &Featurizer,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, PipelineError> {
    let (train, test) = split_corpus(conversations, cfg.test_fraction, cfg.split_seed)?;
    let (model, train_report) = train_model(&train, table, featurizer, cfg, |_| {})?;
    let test_pairs = build_dataset(&test, table, featurizer)?.len();
    let eval = evaluate(&model, &test, table, featurizer, cfg.threshold)?;
    Ok(ExperimentResult {
        train_pairs: train_report.train_pairs,
        model,
        train_report,
        eval,
        test_pairs,
    })
}

/// One row per ablation configuration, all sharing the same split and
/// seeds.
pub fn run_ablation(
    conversations: &[Conversation],
    table: &EmbeddingTable,
    layout: FeatureLayout,
    cfg: &ExperimentConfig,
) -> Result<Vec<ReportRow>, PipelineError> {
    ablation_configs()
        .into_iter()
        .map(|(name, kept)| {
            let featurizer = Featurizer::keeping_only(layout, &kept);
            let result = run_experiment(conversations, table, &featurizer, cfg)?;
            Ok(ReportRow {
                config: name.to_string(),
                report: result.eval,
            })
        })
        .collect()
}
