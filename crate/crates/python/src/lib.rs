//! Python bindings for the teluref pipeline.
//!
//! Conversations and models stay on the Rust side; Python gets handles
//! plus plain lists, tuples and dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use teluref_core::corpus::{corpus_stats, generate_pairs, load_corpus_dir, split_corpus, Conversation, CorpusError};
use teluref_core::embeddings::{load_embeddings, EmbeddingTable, OovPolicy};
use teluref_core::evaluator::{self, resolve_antecedents, EvalReport, Resolution};
use teluref_core::featurizer::{FeatureBlock, FeatureLayout, Featurizer, PairVector};
use teluref_core::mlp::{MlpConfig, MlpModel};
use teluref_core::pipeline::{self, build_dataset, ExperimentConfig, PipelineError};
use teluref_core::sampler::{self, Sampling};
use teluref_core::ssf::{parse_ssf_document, ParseMode};
use teluref_core::synth::{generate_corpus, SynthConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn read(path: &PathBuf) -> PyResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Corpus(CorpusError::Io { path, source }) => {
            PyIOError::new_err(format!("{path}: {source}"))
        }
        other => value_err(other),
    }
}

/// Parses SSF text into a list of sentences, each a list of token dicts.
#[pyfunction]
#[pyo3(signature = (text, strict = false))]
fn parse_ssf<'py>(py: Python<'py>, text: &str, strict: bool) -> PyResult<Vec<Vec<Bound<'py, PyDict>>>> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let doc = parse_ssf_document(text, mode).map_err(value_err)?;
    let mut sentences = Vec::with_capacity(doc.sentences.len());
    for sentence in &doc.sentences {
        let mut tokens = Vec::with_capacity(sentence.tokens.len());
        for t in &sentence.tokens {
            let d = PyDict::new(py);
            let morph = t.morph();
            d.set_item("index", t.index)?;
            d.set_item("form", &t.form)?;
            d.set_item("pos", &t.pos)?;
            d.set_item("root", t.fs.as_ref().map(|fs| fs.root.clone()))?;
            d.set_item("gender", morph.gender.code())?;
            d.set_item("number", morph.number.code())?;
            d.set_item("person", morph.person.code())?;
            tokens.push(d);
        }
        sentences.push(tokens);
    }
    Ok(sentences)
}

#[pyfunction]
fn true_pair_count(n: u64, k: u64) -> PyResult<u64> {
    sampler::true_pair_count(n, k).map_err(value_err)
}

#[pyfunction]
fn false_pair_count(n: u64, k: u64) -> PyResult<u64> {
    sampler::false_pair_count(n, k).map_err(value_err)
}

/// `(k, true_pairs, false_pairs)` for every chain size up to `n`.
#[pyfunction]
fn imbalance_curve(n: u64) -> PyResult<Vec<(u64, u64, u64)>> {
    let rows = sampler::imbalance_curve(n).map_err(value_err)?;
    Ok(rows.iter().map(|r| (r.k, r.true_pairs, r.false_pairs)).collect())
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("loss", r.loss)?;
    d.set_item("precision", r.scores.precision)?;
    d.set_item("recall", r.scores.recall)?;
    d.set_item("f1", r.scores.f1)?;
    d.set_item("tp", r.counts.tp)?;
    d.set_item("fp", r.counts.fp)?;
    d.set_item("tn", r.counts.tn)?;
    d.set_item("fn", r.counts.fn_)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (probabilities, labels, threshold = 0.5))]
fn precision_recall_f1<'py>(
    py: Python<'py>,
    probabilities: Vec<f64>,
    labels: Vec<bool>,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = evaluator::precision_recall_f1(&probabilities, &labels, threshold).map_err(value_err)?;
    report_dict(py, &report)
}

#[pyclass(name = "Embeddings", frozen)]
struct PyEmbeddings {
    table: EmbeddingTable,
}

#[pymethods]
impl PyEmbeddings {
    /// Loads a word2vec text file. `oov` is "hashed" or "zeros".
    #[staticmethod]
    #[pyo3(signature = (path, dim, oov = "hashed"))]
    fn load(path: PathBuf, dim: usize, oov: &str) -> PyResult<Self> {
        let policy: OovPolicy = oov.parse().map_err(PyValueError::new_err)?;
        let table = load_embeddings(&read(&path)?, dim).map_err(value_err)?;
        Ok(PyEmbeddings {
            table: table.with_oov_policy(policy),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn __len__(&self) -> usize {
        self.table.len()
    }

    fn __contains__(&self, word: &str) -> bool {
        self.table.contains(word)
    }

    fn lookup(&self, word: &str) -> Vec<f64> {
        self.table.lookup(word)
    }
}

#[pyclass(name = "Corpus", frozen)]
struct PyCorpus {
    conversations: Vec<Conversation>,
}

impl PyCorpus {
    fn get(&self, id: &str) -> PyResult<&Conversation> {
        self.conversations
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| PyKeyError::new_err(id.to_string()))
    }
}

#[pymethods]
impl PyCorpus {
    /// Loads every `*.json` conversation in a directory.
    #[staticmethod]
    fn load_dir(path: PathBuf) -> PyResult<Self> {
        let conversations = load_corpus_dir(&path).map_err(|e| pipeline_err(e.into()))?;
        Ok(PyCorpus { conversations })
    }

    fn __len__(&self) -> usize {
        self.conversations.len()
    }

    fn ids(&self) -> Vec<String> {
        self.conversations.iter().map(|c| c.id.clone()).collect()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = corpus_stats(&self.conversations);
        let d = PyDict::new(py);
        d.set_item("conversations", s.conversations)?;
        d.set_item("mentions", s.mentions)?;
        d.set_item("true_pairs", s.true_pairs)?;
        d.set_item("false_pairs", s.false_pairs)?;
        Ok(d)
    }

    /// `(antecedent, anaphor, label)` for every ordered mention pair.
    fn pairs(&self, conversation: &str) -> PyResult<Vec<(String, String, bool)>> {
        let conv = self.get(conversation)?;
        Ok(generate_pairs(conv)
            .into_iter()
            .map(|p| (p.antecedent, p.anaphor, p.label))
            .collect())
    }

    /// Splits whole conversations into `(train, test)`.
    #[pyo3(signature = (test_fraction = 0.2, seed = 0))]
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(PyCorpus, PyCorpus)> {
        let (train, test) = split_corpus(&self.conversations, test_fraction, seed).map_err(value_err)?;
        Ok((PyCorpus { conversations: train }, PyCorpus { conversations: test }))
    }

    /// Pair feature vectors and labels for the whole corpus.
    #[pyo3(signature = (embeddings, ablate = Vec::new()))]
    fn pair_vectors(&self, embeddings: &PyEmbeddings, ablate: Vec<String>) -> PyResult<(Vec<Vec<f64>>, Vec<bool>)> {
        let featurizer = featurizer(embeddings.table.dim(), &ablate)?;
        let data = build_dataset(&self.conversations, &embeddings.table, &featurizer).map_err(value_err)?;
        Ok((data.vectors.into_iter().map(PairVector::into_inner).collect(), data.labels))
    }
}

fn featurizer(embedding_dim: usize, ablate: &[String]) -> PyResult<Featurizer> {
    let blocks = ablate
        .iter()
        .map(|b| b.parse::<FeatureBlock>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(PyValueError::new_err)?;
    Ok(Featurizer::new(FeatureLayout { embedding_dim }).with_ablated(blocks))
}

/// A synthetic corpus with matching embeddings, for demos and tests.
#[pyfunction]
#[pyo3(signature = (seed = 0, conversations = 40))]
fn synthetic_corpus(seed: u64, conversations: usize) -> (PyCorpus, PyEmbeddings) {
    let synth = generate_corpus(&SynthConfig {
        seed,
        conversations,
        ..SynthConfig::default()
    });
    (
        PyCorpus {
            conversations: synth.conversations,
        },
        PyEmbeddings { table: synth.embeddings },
    )
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    model: MlpModel,
}

impl PyModel {
    fn featurizer_for(&self, embeddings: &PyEmbeddings) -> Featurizer {
        self.model.features.clone().unwrap_or_else(|| {
            Featurizer::new(FeatureLayout {
                embedding_dim: embeddings.table.dim(),
            })
        })
    }
}

#[pymethods]
impl PyModel {
    /// A freshly initialised, untrained network.
    #[new]
    #[pyo3(signature = (input_dim = 226, seed = 0))]
    fn new(input_dim: usize, seed: u64) -> PyResult<Self> {
        let model = MlpModel::new(MlpConfig {
            input_dim,
            seed,
            ..MlpConfig::default()
        })
        .map_err(value_err)?;
        Ok(PyModel { model })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let model = MlpModel::load(&read(&path)?).map_err(value_err)?;
        Ok(PyModel { model })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(&path, self.model.save()).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.model.config.input_dim
    }

    /// Coreference probability for each pair vector (eval mode).
    fn predict(&self, py: Python<'_>, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        py.detach(|| {
            rows.into_iter()
                .map(|r| self.model.predict_pair(&PairVector::from_values(r)))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(value_err)
    }

    #[pyo3(signature = (corpus, embeddings, threshold = 0.5))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        corpus: &PyCorpus,
        embeddings: &PyEmbeddings,
        threshold: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let featurizer = self.featurizer_for(embeddings);
        let report = py
            .detach(|| pipeline::evaluate(&self.model, &corpus.conversations, &embeddings.table, &featurizer, threshold))
            .map_err(pipeline_err)?;
        report_dict(py, &report)
    }

    /// `(anaphor, antecedent or None, score)` for each mention after the
    /// first.
    #[pyo3(signature = (corpus, conversation, embeddings, threshold = 0.5))]
    fn resolve(
        &self,
        corpus: &PyCorpus,
        conversation: &str,
        embeddings: &PyEmbeddings,
        threshold: f64,
    ) -> PyResult<Vec<(String, Option<String>, f64)>> {
        let conv = corpus.get(conversation)?;
        let featurizer = self.featurizer_for(embeddings);
        let resolved =
            resolve_antecedents(conv, &self.model, &embeddings.table, &featurizer, threshold).map_err(value_err)?;
        Ok(resolved
            .into_iter()
            .map(|r| match r.resolution {
                Resolution::Resolved { antecedent, score } => (r.anaphor, Some(antecedent), score),
                Resolution::Unresolved { best_score } => (r.anaphor, None, best_score),
            })
            .collect())
    }
}

/// Rebalances the corpus pairs, trains a network and returns it with the
/// per-epoch mean losses.
#[pyfunction]
#[pyo3(signature = (corpus, embeddings, sampling = "over", seed = 0, epochs = 100, ablate = Vec::new()))]
fn train(
    py: Python<'_>,
    corpus: &PyCorpus,
    embeddings: &PyEmbeddings,
    sampling: &str,
    seed: u64,
    epochs: usize,
    ablate: Vec<String>,
) -> PyResult<(PyModel, Vec<f64>)> {
    let sampling: Sampling = sampling.parse().map_err(PyValueError::new_err)?;
    let featurizer = featurizer(embeddings.table.dim(), &ablate)?;
    let mut cfg = ExperimentConfig {
        sampling,
        ..ExperimentConfig::default()
    }
    .with_seed(seed);
    cfg.mlp.epochs = epochs;
    let (model, report) = py
        .detach(|| pipeline::train_model(&corpus.conversations, &embeddings.table, &featurizer, &cfg, |_| {}))
        .map_err(pipeline_err)?;
    let losses = report.epochs.iter().map(|e| e.mean_loss).collect();
    Ok((PyModel { model }, losses))
}

#[pymodule]
pub fn teluref(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_ssf, m)?)?;
    m.add_function(wrap_pyfunction!(true_pair_count, m)?)?;
    m.add_function(wrap_pyfunction!(false_pair_count, m)?)?;
    m.add_function(wrap_pyfunction!(imbalance_curve, m)?)?;
    m.add_function(wrap_pyfunction!(precision_recall_f1, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<PyEmbeddings>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
