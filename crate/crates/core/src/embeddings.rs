//! Pretrained word vectors in word2vec text format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("bad header line, expected `<vocab_count> <dim>`")]
    BadHeader,
    #[error("dimension mismatch: expected {expected}, file has {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("line {0}: malformed vector line")]
    BadVectorLine(usize),
    #[error("line {0}: duplicate word `{1}`")]
    DuplicateWord(usize, String),
    #[error("header announces {expected} words, file has {found}")]
    VocabCountMismatch { expected: usize, found: usize },
    #[error("cannot compose an empty span")]
    EmptySpan,
}

/// What `lookup` returns for words missing from the table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OovPolicy {
    Zeros,
    /// A unit vector seeded by a stable hash of the word.
    #[default]
    HashedDeterministic,
}

impl FromStr for OovPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zeros" => Ok(OovPolicy::Zeros),
            "hashed" => Ok(OovPolicy::HashedDeterministic),
            other => Err(format!("unknown OOV policy `{other}` (expected zeros|hashed)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    oov_policy: OovPolicy,
}

/// 64-bit FNV-1a. Fixed constants, so the value never changes across
/// platforms or toolchains.
pub fn stable_hash(word: &str) -> u64 {
    word.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov_policy: OovPolicy) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
            oov_policy,
        }
    }

    pub fn with_oov_policy(mut self, oov_policy: OovPolicy) -> Self {
        self.oov_policy = oov_policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Inserts or replaces a vector. Panics if its length is not `dim`.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector length must equal table dim");
        self.entries.insert(word.into(), vector);
    }

    /// Vector for `word`; never fails.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        if let Some(v) = self.entries.get(word) {
            return v.clone();
        }
        match self.oov_policy {
            OovPolicy::Zeros => vec![0.0; self.dim],
            OovPolicy::HashedDeterministic => self.hashed_vector(word),
        }
    }

    fn hashed_vector(&self, word: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(word));
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    /// Elementwise mean of the word vectors. Words are summed in sorted
    /// order so the result does not depend on the order of `words`.
    pub fn compose_span<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<f64>, EmbeddingError> {
        if words.is_empty() {
            return Err(EmbeddingError::EmptySpan);
        }
        let mut sorted: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
        sorted.sort_unstable();
        let mut acc = vec![0.0; self.dim];
        for word in &sorted {
            for (a, x) in acc.iter_mut().zip(self.lookup(word)) {
                *a += x;
            }
        }
        let n = sorted.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    /// Writes the table in word2vec text format, words in sorted order.
    pub fn to_word2vec_text(&self) -> String {
        let mut words: Vec<&String> = self.entries.keys().collect();
        words.sort();
        let mut out = format!("{} {}\n", words.len(), self.dim);
        for word in words {
            out.push_str(word);
            for x in &self.entries[word] {
                write!(out, " {x}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a word2vec text file: a `<vocab_count> <dim>` header, then one
/// word per line followed by `dim` floats.
pub fn load_embeddings(bytes: &[u8], expected_dim: usize) -> Result<EmbeddingTable, EmbeddingError> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(EmbeddingError::BadHeader)?;
    let mut parts = header.split_whitespace();
    let (Some(count), Some(dim), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(EmbeddingError::BadHeader);
    };
    let count: usize = count.parse().map_err(|_| EmbeddingError::BadHeader)?;
    let dim: usize = dim.parse().map_err(|_| EmbeddingError::BadHeader)?;
    if dim != expected_dim {
        return Err(EmbeddingError::DimMismatch {
            expected: expected_dim,
            found: dim,
        });
    }

    let mut table = EmbeddingTable::new(dim, OovPolicy::default());
    table.entries.reserve(count);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().ok_or(EmbeddingError::BadVectorLine(line_no))?;
        let vector = fields
            .map(str::parse::<f64>)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| EmbeddingError::BadVectorLine(line_no))?;
        if vector.len() != dim || vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::BadVectorLine(line_no));
        }
        if table.entries.insert(word.to_string(), vector).is_some() {
            return Err(EmbeddingError::DuplicateWord(line_no, word.to_string()));
        }
    }
    if table.entries.len() != count {
        return Err(EmbeddingError::VocabCountMismatch {
            expected: count,
            found: table.entries.len(),
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &[u8] = b"2 3\na 1 0 0\nb 0 1 0\n";

    #[test]
    fn loads_fixture() {
        let t = load_embeddings(FIXTURE, 3).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("a"), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn load_errors() {
        assert_eq!(
            load_embeddings(FIXTURE, 100).unwrap_err(),
            EmbeddingError::DimMismatch {
                expected: 100,
                found: 3
            }
        );
        assert_eq!(load_embeddings(b"", 3).unwrap_err(), EmbeddingError::BadHeader);
        assert_eq!(load_embeddings(b"two 3\n", 3).unwrap_err(), EmbeddingError::BadHeader);
        assert_eq!(
            load_embeddings(b"2 3\na 1 0 0\nb 0 1\n", 3).unwrap_err(),
            EmbeddingError::BadVectorLine(3)
        );
        assert_eq!(
            load_embeddings(b"1 3\na 1 x 0\n", 3).unwrap_err(),
            EmbeddingError::BadVectorLine(2)
        );
        assert_eq!(
            load_embeddings(b"3 3\na 1 0 0\nb 0 1 0\n", 3).unwrap_err(),
            EmbeddingError::VocabCountMismatch {
                expected: 3,
                found: 2
            }
        );
        assert!(matches!(
            load_embeddings(b"2 3\na 1 0 0\na 0 1 0\n", 3).unwrap_err(),
            EmbeddingError::DuplicateWord(3, _)
        ));
    }

    #[test]
    fn short_line_in_100_dim_file() {
        let mut text = String::from("1 100\nw");
        for _ in 0..99 {
            text.push_str(" 0.5");
        }
        assert_eq!(
            load_embeddings(text.as_bytes(), 100).unwrap_err(),
            EmbeddingError::BadVectorLine(2)
        );
    }

    #[test]
    fn oov_policies() {
        let t = load_embeddings(FIXTURE, 3).unwrap().with_oov_policy(OovPolicy::Zeros);
        assert_eq!(t.lookup("zzz"), vec![0.0; 3]);

        let t = t.with_oov_policy(OovPolicy::HashedDeterministic);
        let v = t.lookup("vADu");
        assert_eq!(v, t.lookup("vADu"));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_ne!(v, t.lookup("Ame"));
    }

    #[test]
    fn hashed_vectors_are_pinned() {
        // Fixed across runs and builds: FNV-1a + ChaCha8 are both stable.
        assert_eq!(stable_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stable_hash("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn composition() {
        let t = load_embeddings(FIXTURE, 3).unwrap();
        assert_eq!(t.compose_span(&["a"]).unwrap(), t.lookup("a"));
        assert_eq!(t.compose_span(&["a", "b"]).unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(
            t.compose_span::<&str>(&[]).unwrap_err(),
            EmbeddingError::EmptySpan
        );
    }

    #[test]
    fn text_round_trip() {
        let mut t = EmbeddingTable::new(2, OovPolicy::Zeros);
        t.insert("x", vec![0.1, -1.0 / 3.0]);
        t.insert("y", vec![1e-300, 7.0]);
        let back = load_embeddings(t.to_word2vec_text().as_bytes(), 2).unwrap();
        assert_eq!(back.lookup("x"), t.lookup("x"));
        assert_eq!(back.lookup("y"), t.lookup("y"));
    }

    proptest! {
        #[test]
        fn lookup_total_and_deterministic(word in "\\PC{0,12}") {
            let t = load_embeddings(FIXTURE, 3).unwrap();
            let v = t.lookup(&word);
            prop_assert_eq!(v.len(), 3);
            prop_assert_eq!(v, t.lookup(&word));
        }

        #[test]
        fn compose_is_permutation_invariant(
            words in proptest::collection::vec("[a-e]{1,3}", 1..6),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let t = load_embeddings(FIXTURE, 3).unwrap();
            let mut shuffled = words.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(t.compose_span(&words).unwrap(), t.compose_span(&shuffled).unwrap());
        }
    }
}
