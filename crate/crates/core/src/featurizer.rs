//! Mention and mention-pair feature vectors.
//!
//! A mention vector is laid out as
//!
//! | block     | dims | content                                        |
//! |-----------|------|------------------------------------------------|
//! | embedding | 100  | mean word vector over the mention span         |
//! | gender    | 3    | one-hot `[Any, Male, Female]`                  |
//! | number    | 3    | one-hot `[Zero, Singular, Plural]`             |
//! | person    | 4    | one-hot `[None, First, Second, Third]`         |
//! | pop       | 1    | part-of-plural flag                            |
//! | actor     | 2    | `[1,0]` speaker, `[0,1]` hearer, `[0,0]` other |
//!
//! for 113 dims in total. A pair vector is antecedent followed by anaphor.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Actor, Mention, Utterance};
use crate::embeddings::{EmbeddingError, EmbeddingTable};
use crate::ssf::{Gender, MorphFeatures, Number, Person};

pub const EMBEDDING_DIM: usize = 100;
pub const GNP_DIM: usize = 10;
pub const MENTION_DIM: usize = EMBEDDING_DIM + GNP_DIM + 1 + 2;
pub const PAIR_DIM: usize = 2 * MENTION_DIM;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("span [{start}, {end}) is invalid for an utterance of {len} tokens")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionError { expected: usize, found: usize },
    #[error("embedding table has dim {found}, featurizer expects {expected}")]
    EmbeddingDim { expected: usize, found: usize },
}

/// Named feature blocks, usable as ablation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureBlock {
    Embedding,
    Gender,
    Number,
    Person,
    Pop,
    Actor,
}

impl FeatureBlock {
    pub const ALL: [FeatureBlock; 6] = [
        FeatureBlock::Embedding,
        FeatureBlock::Gender,
        FeatureBlock::Number,
        FeatureBlock::Person,
        FeatureBlock::Pop,
        FeatureBlock::Actor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureBlock::Embedding => "embedding",
            FeatureBlock::Gender => "gender",
            FeatureBlock::Number => "number",
            FeatureBlock::Person => "person",
            FeatureBlock::Pop => "pop",
            FeatureBlock::Actor => "actor",
        }
    }
}

impl fmt::Display for FeatureBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureBlock {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureBlock::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                format!("unknown feature block `{s}` (expected embedding|gender|number|person|pop|actor)")
            })
    }
}

/// Block offsets for a given embedding width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub embedding_dim: usize,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        FeatureLayout {
            embedding_dim: EMBEDDING_DIM,
        }
    }
}

impl FeatureLayout {
    pub fn mention_dim(&self) -> usize {
        self.embedding_dim + GNP_DIM + 3
    }

    pub fn pair_dim(&self) -> usize {
        2 * self.mention_dim()
    }

    pub fn range(&self, block: FeatureBlock) -> Range<usize> {
        let e = self.embedding_dim;
        match block {
            FeatureBlock::Embedding => 0..e,
            FeatureBlock::Gender => e..e + 3,
            FeatureBlock::Number => e + 3..e + 6,
            FeatureBlock::Person => e + 6..e + 10,
            FeatureBlock::Pop => e + 10..e + 11,
            FeatureBlock::Actor => e + 11..e + 13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MentionVector(Vec<f64>);

impl MentionVector {
    pub fn new(values: Vec<f64>, layout: FeatureLayout) -> Result<Self, FeatureError> {
        if values.len() != layout.mention_dim() {
            return Err(FeatureError::DimensionError {
                expected: layout.mention_dim(),
                found: values.len(),
            });
        }
        Ok(MentionVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairVector(Vec<f64>);

impl PairVector {
    /// Wraps raw values; callers are responsible for the length.
    pub fn from_values(values: Vec<f64>) -> Self {
        PairVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn encode_gnp(morph: MorphFeatures) -> [f64; GNP_DIM] {
    let mut out = [0.0; GNP_DIM];
    let g = Gender::ALL.iter().position(|&g| g == morph.gender).unwrap();
    let n = Number::ALL.iter().position(|&n| n == morph.number).unwrap();
    let p = Person::ALL.iter().position(|&p| p == morph.person).unwrap();
    out[g] = 1.0;
    out[3 + n] = 1.0;
    out[6 + p] = 1.0;
    out
}

pub fn encode_actor(actor: Actor) -> [f64; 2] {
    match actor {
        Actor::SpeakerRef => [1.0, 0.0],
        Actor::HearerRef => [0.0, 1.0],
        Actor::Neither => [0.0, 0.0],
    }
}

/// Concatenates antecedent and anaphor vectors.
pub fn pair_vector(antecedent: &MentionVector, anaphor: &MentionVector) -> Result<PairVector, FeatureError> {
    if antecedent.len() != anaphor.len() {
        return Err(FeatureError::DimensionError {
            expected: antecedent.len(),
            found: anaphor.len(),
        });
    }
    let mut values = Vec::with_capacity(2 * antecedent.len());
    values.extend_from_slice(antecedent.as_slice());
    values.extend_from_slice(anaphor.as_slice());
    Ok(PairVector(values))
}

/// Builds mention vectors, zeroing any ablated blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    pub layout: FeatureLayout,
    pub ablated: BTreeSet<FeatureBlock>,
}

impl Featurizer {
    pub fn new(layout: FeatureLayout) -> Self {
        Featurizer {
            layout,
            ablated: BTreeSet::new(),
        }
    }

    pub fn with_ablated(mut self, blocks: impl IntoIterator<Item = FeatureBlock>) -> Self {
        self.ablated.extend(blocks);
        self
    }

    /// Keeps `kept` and zeroes every other block.
    pub fn keeping_only(layout: FeatureLayout, kept: &[FeatureBlock]) -> Self {
        Featurizer::new(layout).with_ablated(FeatureBlock::ALL.into_iter().filter(|b| !kept.contains(b)))
    }

    pub fn mention_vector(
        &self,
        mention: &Mention,
        utterance: &Utterance,
        table: &EmbeddingTable,
    ) -> Result<MentionVector, FeatureError> {
        if table.dim() != self.layout.embedding_dim {
            return Err(FeatureError::EmbeddingDim {
                expected: self.layout.embedding_dim,
                found: table.dim(),
            });
        }
        let (start, end) = mention.token_span;
        if start >= end || end > utterance.tokens.len() {
            return Err(FeatureError::SpanOutOfRange {
                start,
                end,
                len: utterance.tokens.len(),
            });
        }
        let words: Vec<&str> = utterance.tokens[start..end]
            .iter()
            .map(|t| t.form.as_str())
            .collect();

        let mut values = Vec::with_capacity(self.layout.mention_dim());
        values.extend(table.compose_span(&words)?);
        values.extend(encode_gnp(mention.morph));
        values.push(if mention.part_of_plural { 1.0 } else { 0.0 });
        values.extend(encode_actor(mention.actor));
        self.apply_ablation(&mut values);
        MentionVector::new(values, self.layout)
    }

    /// Zeroes the ablated blocks of a mention vector in place.
    pub fn apply_ablation(&self, values: &mut [f64]) {
        for block in &self.ablated {
            values[self.layout.range(*block)].fill(0.0);
        }
    }
}
