//! Conversation corpus: data model, JSON file format, pair generation,
//! annotation adjudication and train/test splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ssf::{self, MorphFeatures};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("annotation sets refer to different conversations: {0} and {1}")]
    ConversationMismatch(String, String),
    #[error("{0} conflicted pair(s) need a third review")]
    MissingThirdReview(usize),
    #[error("split would leave the {0} side empty")]
    EmptySplit(&'static str),
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CorpusError::SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// One token of an utterance as stored in the corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub pos: String,
    #[serde(default)]
    pub af: String,
}

impl Token {
    /// Morphology decoded from the `af` string; neutral when absent or short.
    pub fn morph(&self) -> MorphFeatures {
        ssf::parse_fs_attribute(&self.af)
            .map(|fs| fs.morph)
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<Token>,
}

/// Who a first/second person mention points at, relative to the utterance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    #[serde(rename = "speaker")]
    SpeakerRef,
    #[serde(rename = "hearer")]
    HearerRef,
    #[default]
    Neither,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    #[serde(rename = "utterance")]
    pub utterance_index: usize,
    /// Token span `[start, end)` within the utterance.
    #[serde(rename = "span")]
    pub token_span: (usize, usize),
    pub head: String,
    #[serde(flatten)]
    pub morph: MorphFeatures,
    #[serde(rename = "pop")]
    pub part_of_plural: bool,
    pub actor: Actor,
}

impl Mention {
    /// Sort key for document order.
    pub fn position(&self) -> (usize, usize, usize) {
        (self.utterance_index, self.token_span.0, self.token_span.1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub speakers: Vec<String>,
    pub utterances: Vec<Utterance>,
    #[serde(default)]
    pub mentions: Vec<Mention>,
    #[serde(default)]
    pub chains: Vec<Vec<String>>,
}

impl Conversation {
    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == id)
    }

    /// Mentions sorted by document order. Ties keep file order.
    pub fn mentions_in_order(&self) -> Vec<&Mention> {
        let mut ordered: Vec<&Mention> = self.mentions.iter().collect();
        ordered.sort_by_key(|m| m.position());
        ordered
    }

    /// Index of the chain each mention belongs to.
    pub fn chain_index(&self) -> HashMap<&str, usize> {
        self.chains
            .iter()
            .enumerate()
            .flat_map(|(i, chain)| chain.iter().map(move |id| (id.as_str(), i)))
            .collect()
    }

    /// Checks every structural invariant, reporting the first violation
    /// with the JSON pointer of the offending value.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let speakers: HashSet<&str> = self.speakers.iter().map(String::as_str).collect();
        for (i, utt) in self.utterances.iter().enumerate() {
            if !speakers.contains(utt.speaker.as_str()) {
                return Err(CorpusError::schema(
                    format!("/utterances/{i}/speaker"),
                    format!("unknown speaker `{}`", utt.speaker),
                ));
            }
        }

        let mut ids = HashSet::new();
        for (i, m) in self.mentions.iter().enumerate() {
            if !ids.insert(m.id.as_str()) {
                return Err(CorpusError::schema(
                    format!("/mentions/{i}/id"),
                    format!("duplicate mention id `{}`", m.id),
                ));
            }
            let Some(utt) = self.utterances.get(m.utterance_index) else {
                return Err(CorpusError::schema(
                    format!("/mentions/{i}/utterance"),
                    format!(
                        "utterance index {} out of range ({} utterances)",
                        m.utterance_index,
                        self.utterances.len()
                    ),
                ));
            };
            let (start, end) = m.token_span;
            if start >= end || end > utt.tokens.len() {
                return Err(CorpusError::schema(
                    format!("/mentions/{i}/span"),
                    format!(
                        "span [{start}, {end}) invalid for utterance with {} tokens",
                        utt.tokens.len()
                    ),
                ));
            }
        }

        let mut seen = HashSet::new();
        for (c, chain) in self.chains.iter().enumerate() {
            if chain.len() < 2 {
                return Err(CorpusError::schema(
                    format!("/chains/{c}"),
                    "a chain needs at least two mentions",
                ));
            }
            for (j, id) in chain.iter().enumerate() {
                if !ids.contains(id.as_str()) {
                    return Err(CorpusError::schema(
                        format!("/chains/{c}/{j}"),
                        format!("unknown mention id `{id}`"),
                    ));
                }
                if !seen.insert(id.as_str()) {
                    return Err(CorpusError::schema(
                        format!("/chains/{c}/{j}"),
                        format!("mention `{id}` appears in more than one chain"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn path_to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

/// Parses and validates one conversation from corpus JSON.
pub fn load_conversation(bytes: &[u8]) -> Result<Conversation, CorpusError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let conversation: Conversation = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = path_to_pointer(err.path());
        CorpusError::schema(path, err.into_inner().to_string())
    })?;
    conversation.validate()?;
    Ok(conversation)
}

/// Canonical serialization: sorted keys, two-space indentation, trailing
/// newline. Identical data always yields identical bytes.
pub fn save_conversation(conversation: &Conversation) -> Vec<u8> {
    canonical_json(conversation)
}

pub(crate) fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    // serde_json::Value keeps object keys in a BTreeMap, hence sorted.
    let value = serde_json::to_value(value).expect("corpus types serialize");
    let mut bytes = serde_json::to_vec_pretty(&value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

/// Loads every conversation under `dir`: `*.json` files hold one
/// conversation, `*.jsonl` files one per line. Files are visited in name
/// order so the corpus order is stable.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<Conversation>, CorpusError> {
    let io_err = |path: &Path, source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "jsonl")))
        .collect();
    paths.sort();

    let mut conversations = Vec::new();
    for path in paths {
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let with_file = |err: CorpusError, line: Option<usize>| match err {
            CorpusError::SchemaError { path: p, message } => {
                let location = match line {
                    Some(l) => format!("{}:{l}", path.display()),
                    None => path.display().to_string(),
                };
                CorpusError::schema(format!("{location}#{p}"), message)
            }
            other => other,
        };
        if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            for (i, line) in bytes.split(|b| *b == b'\n').enumerate() {
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                conversations.push(load_conversation(line).map_err(|e| with_file(e, Some(i + 1)))?);
            }
        } else {
            conversations.push(load_conversation(&bytes).map_err(|e| with_file(e, None))?);
        }
    }
    Ok(conversations)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Gold,
    Synthetic,
}

/// An (antecedent, anaphor) pair with its coreference label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub antecedent: String,
    pub anaphor: String,
    pub label: bool,
    pub provenance: Provenance,
}

/// Every within-conversation mention pair in document order, labeled true
/// iff both mentions sit in the same chain. Yields n(n-1)/2 pairs.
pub fn generate_pairs(conversation: &Conversation) -> Vec<LabeledPair> {
    let chain_of = conversation.chain_index();
    let ordered = conversation.mentions_in_order();
    let mut pairs = Vec::with_capacity(ordered.len() * ordered.len().saturating_sub(1) / 2);
    for (j, anaphor) in ordered.iter().enumerate() {
        for antecedent in &ordered[..j] {
            let label = match (
                chain_of.get(antecedent.id.as_str()),
                chain_of.get(anaphor.id.as_str()),
            ) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            };
            pairs.push(LabeledPair {
                antecedent: antecedent.id.clone(),
                anaphor: anaphor.id.clone(),
                label,
                provenance: Provenance::Gold,
            });
        }
    }
    pairs
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub conversation: String,
    pub antecedent: String,
    pub anaphor: String,
    pub label: bool,
    pub annotator: String,
}

impl AnnotationRecord {
    /// Checks that both mentions exist and the antecedent comes first.
    pub fn validate_against(&self, conversation: &Conversation) -> Result<(), CorpusError> {
        if self.conversation != conversation.id {
            return Err(CorpusError::ConversationMismatch(
                self.conversation.clone(),
                conversation.id.clone(),
            ));
        }
        let ante = conversation.mention(&self.antecedent).ok_or_else(|| {
            CorpusError::schema("/antecedent", format!("unknown mention `{}`", self.antecedent))
        })?;
        let ana = conversation.mention(&self.anaphor).ok_or_else(|| {
            CorpusError::schema("/anaphor", format!("unknown mention `{}`", self.anaphor))
        })?;
        if ante.position() >= ana.position() {
            return Err(CorpusError::schema(
                "/antecedent",
                format!(
                    "antecedent `{}` does not precede anaphor `{}`",
                    self.antecedent, self.anaphor
                ),
            ));
        }
        Ok(())
    }
}

/// Reads a JSON-lines annotation log.
pub fn load_annotations(bytes: &[u8]) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in bytes.split(|b| *b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_slice(line);
        let record = serde_path_to_error::deserialize(de).map_err(|err| {
            CorpusError::schema(
                format!("line {}#{}", i + 1, path_to_pointer(err.path())),
                err.into_inner().to_string(),
            )
        })?;
        records.push(record);
    }
    Ok(records)
}

pub type PairKey = (String, String);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub antecedent: String,
    pub anaphor: String,
    pub first: bool,
    pub second: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjudication {
    /// Labels settled by agreement or by the third review.
    pub gold: BTreeMap<PairKey, bool>,
    /// Disagreements that no third review has settled yet.
    pub conflicts: Vec<Conflict>,
}

impl Adjudication {
    pub fn needs_third_review(&self) -> bool {
        !self.conflicts.is_empty()
    }

    pub fn final_labels(&self) -> Result<&BTreeMap<PairKey, bool>, CorpusError> {
        if self.conflicts.is_empty() {
            Ok(&self.gold)
        } else {
            Err(CorpusError::MissingThirdReview(self.conflicts.len()))
        }
    }
}

/// Latest label per pair; later records override earlier ones.
fn latest_labels(records: &[AnnotationRecord]) -> BTreeMap<PairKey, bool> {
    records
        .iter()
        .map(|r| ((r.antecedent.clone(), r.anaphor.clone()), r.label))
        .collect()
}

/// Merges two independent annotations of one conversation.
///
/// A pair one annotator labeled and the other did not counts as an
/// implicit `false` from the silent annotator. Pairs both left unlabeled
/// are not reported. With a third review, a conflicted pair takes the
/// majority label, which is the reviewer's; conflicts the reviewer has not
/// labeled stay open.
pub fn adjudicate(
    first: &[AnnotationRecord],
    second: &[AnnotationRecord],
    third: Option<&[AnnotationRecord]>,
) -> Result<Adjudication, CorpusError> {
    let mut conversation: Option<&str> = None;
    for record in first.iter().chain(second).chain(third.unwrap_or(&[])) {
        match conversation {
            None => conversation = Some(&record.conversation),
            Some(c) if c != record.conversation => {
                return Err(CorpusError::ConversationMismatch(
                    c.to_string(),
                    record.conversation.clone(),
                ))
            }
            Some(_) => {}
        }
    }

    let a = latest_labels(first);
    let b = latest_labels(second);
    let c = third.map(latest_labels).unwrap_or_default();
    let keys: BTreeSet<&PairKey> = a.keys().chain(b.keys()).collect();

    let mut result = Adjudication::default();
    for key in keys {
        let la = a.get(key).copied().unwrap_or(false);
        let lb = b.get(key).copied().unwrap_or(false);
        if la == lb {
            result.gold.insert(key.clone(), la);
        } else if let Some(&lc) = c.get(key) {
            result.gold.insert(key.clone(), lc);
        } else {
            result.conflicts.push(Conflict {
                antecedent: key.0.clone(),
                anaphor: key.1.clone(),
                first: la,
                second: lb,
            });
        }
    }
    Ok(result)
}

/// Rebuilds coreference chains from gold pair labels: the connected
/// components of the true pairs, in order of first mention.
pub fn apply_gold_labels(
    conversation: &Conversation,
    gold: &BTreeMap<PairKey, bool>,
) -> Conversation {
    let ordered: Vec<&str> = conversation
        .mentions_in_order()
        .iter()
        .map(|m| m.id.as_str())
        .collect();
    let index: HashMap<&str, usize> = ordered.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut parent: Vec<usize> = (0..ordered.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for ((ante, ana), &label) in gold {
        if !label {
            continue;
        }
        if let (Some(&i), Some(&j)) = (index.get(ante.as_str()), index.get(ana.as_str())) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, id) in ordered.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(id.to_string());
    }
    let mut updated = conversation.clone();
    updated.chains = groups.into_values().filter(|g| g.len() >= 2).collect();
    updated
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub conversations: usize,
    pub mentions: usize,
    pub true_pairs: usize,
    pub false_pairs: usize,
}

pub fn corpus_stats(conversations: &[Conversation]) -> CorpusStats {
    let mut stats = CorpusStats {
        conversations: conversations.len(),
        ..CorpusStats::default()
    };
    for conversation in conversations {
        stats.mentions += conversation.mentions.len();
        for pair in generate_pairs(conversation) {
            if pair.label {
                stats.true_pairs += 1;
            } else {
                stats.false_pairs += 1;
            }
        }
    }
    stats
}

/// Splits whole conversations into train and test sets. The test side
/// gets `round(n * test_fraction)` conversations; both sides keep the
/// input order.
pub fn split_corpus(
    conversations: &[Conversation],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<Conversation>, Vec<Conversation>), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    let n = conversations.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 {
        return Err(CorpusError::EmptySplit("test"));
    }
    if n_test >= n {
        return Err(CorpusError::EmptySplit("train"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_idx: HashSet<usize> = order[..n_test].iter().copied().collect();

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, c) in conversations.iter().enumerate() {
        if test_idx.contains(&i) {
            test.push(c.clone());
        } else {
            train.push(c.clone());
        }
    }
    Ok((train, test))
}
