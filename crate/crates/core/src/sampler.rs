//! Class imbalance of mention pairs and the two rebalancing strategies.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Provenance;
use crate::featurizer::PairVector;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("pair counts need n >= 2 and 0 <= k <= n (got n={n}, k={k})")]
    DomainError { n: u64, k: u64 },
    #[error("dataset holds a single class")]
    SingleClass,
    #[error("SMOTE needs at least 2 minority instances, found {0}")]
    TooFewMinority(usize),
    #[error("k_neighbors must be at least 1")]
    BadNeighbors,
    #[error("dataset columns have different lengths")]
    Ragged,
}

fn check_domain(n: u64, k: u64) -> Result<(), SamplerError> {
    if n < 2 || k > n {
        Err(SamplerError::DomainError { n, k })
    } else {
        Ok(())
    }
}

/// Coreferent pairs among `n` mentions when `k` of them share one entity.
pub fn true_pair_count(n: u64, k: u64) -> Result<u64, SamplerError> {
    check_domain(n, k)?;
    Ok(k * k.saturating_sub(1) / 2)
}

/// Non-coreferent pairs for the same setting: `(n-k)(n+k-1)/2`.
pub fn false_pair_count(n: u64, k: u64) -> Result<u64, SamplerError> {
    check_domain(n, k)?;
    Ok((n - k) * (n + k - 1) / 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: u64,
    pub true_pairs: u64,
    pub false_pairs: u64,
}

/// True and false pair counts for every chain size `k` in `0..=n`.
pub fn imbalance_curve(n: u64) -> Result<Vec<CurveRow>, SamplerError> {
    (0..=n)
        .map(|k| {
            Ok(CurveRow {
                k,
                true_pairs: true_pair_count(n, k)?,
                false_pairs: false_pair_count(n, k)?,
            })
        })
        .collect()
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("k,true_pairs,false_pairs\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.k, row.true_pairs, row.false_pairs));
    }
    out
}

/// Pair vectors with labels and where each instance came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairDataset {
    pub vectors: Vec<PairVector>,
    pub labels: Vec<bool>,
    pub provenance: Vec<Provenance>,
}

impl PairDataset {
    pub fn push(&mut self, vector: PairVector, label: bool, provenance: Provenance) {
        self.vectors.push(vector);
        self.labels.push(label);
        self.provenance.push(provenance);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(true, false)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let positives = self.labels.iter().filter(|l| **l).count();
        (positives, self.labels.len() - positives)
    }

    pub fn extend(&mut self, other: PairDataset) {
        self.vectors.extend(other.vectors);
        self.labels.extend(other.labels);
        self.provenance.extend(other.provenance);
    }

    fn check(&self) -> Result<(), SamplerError> {
        if self.vectors.len() != self.labels.len() || self.labels.len() != self.provenance.len() {
            return Err(SamplerError::Ragged);
        }
        Ok(())
    }

    fn select(&self, keep: &[usize]) -> PairDataset {
        PairDataset {
            vectors: keep.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            provenance: keep.iter().map(|&i| self.provenance[i]).collect(),
        }
    }
}

/// Which rebalancing to apply to training pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Over,
    Under,
    None,
}

impl std::str::FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "over" => Ok(Sampling::Over),
            "under" => Ok(Sampling::Under),
            "none" => Ok(Sampling::None),
            other => Err(format!("unknown sampling `{other}` (expected over|under|none)")),
        }
    }
}

/// Randomly drops majority-class instances until both classes have the
/// minority count. Survivors keep their original order.
pub fn undersample(dataset: &PairDataset, seed: u64) -> Result<PairDataset, SamplerError> {
    dataset.check()?;
    let (positives, negatives) = dataset.class_counts();
    if positives == 0 || negatives == 0 {
        return Err(SamplerError::SingleClass);
    }
    let majority_label = positives > negatives;
    let minority_count = positives.min(negatives);
    let majority: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.labels[i] == majority_label)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = index::sample(&mut rng, majority.len(), minority_count)
        .into_iter()
        .map(|j| majority[j])
        .collect();
    keep.extend((0..dataset.len()).filter(|&i| dataset.labels[i] != majority_label));
    keep.sort_unstable();
    Ok(dataset.select(&keep))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            seed: 0,
        }
    }
}

/// One synthetic instance: `base + lambda * (neighbor - base)`, with both
/// indices pointing into the input dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoteDraw {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoteOutput {
    /// The input followed by the synthetic instances.
    pub dataset: PairDataset,
    /// One entry per synthetic instance, in the order they were appended.
    pub draws: Vec<SmoteDraw>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `points`) of the `k` nearest other points for each point,
/// by Euclidean distance. Ties go to the lower index.
fn nearest_neighbors(points: &[&[f64]], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(points[i], points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

/// SMOTE over the raw pair vectors. Synthetic minority instances are
/// appended until both classes are equal; gold instances are untouched.
///
/// Each synthetic vector picks a uniformly random minority base, one of its
/// `k` nearest minority neighbors uniformly, and `lambda` uniform in
/// `[0, 1)`. `k` is clamped to `minority - 1`.
pub fn smote_oversample(dataset: &PairDataset, cfg: &SmoteConfig) -> Result<SmoteOutput, SamplerError> {
    dataset.check()?;
    if cfg.k_neighbors == 0 {
        return Err(SamplerError::BadNeighbors);
    }
    let (positives, negatives) = dataset.class_counts();
    let minority_label = positives <= negatives;
    let (minority_count, majority_count) = if minority_label {
        (positives, negatives)
    } else {
        (negatives, positives)
    };
    let mut out = dataset.clone();
    if minority_count == majority_count {
        return Ok(SmoteOutput {
            dataset: out,
            draws: Vec::new(),
        });
    }
    if minority_count < 2 {
        return Err(SamplerError::TooFewMinority(minority_count));
    }

    let minority: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.labels[i] == minority_label)
        .collect();
    let points: Vec<&[f64]> = minority.iter().map(|&i| dataset.vectors[i].as_slice()).collect();
    let k = cfg.k_neighbors.min(minority_count - 1);
    let neighbors = nearest_neighbors(&points, k);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let needed = majority_count - minority_count;
    let mut draws = Vec::with_capacity(needed);
    for _ in 0..needed {
        let b = rng.random_range(0..minority.len());
        let nb = neighbors[b][rng.random_range(0..k)];
        let lambda: f64 = rng.random();
        let (x, x2) = (points[b], points[nb]);
        let synthetic: Vec<f64> = x.iter().zip(x2).map(|(a, c)| a + lambda * (c - a)).collect();
        out.push(PairVector::from_values(synthetic), minority_label, Provenance::Synthetic);
        draws.push(SmoteDraw {
            base: minority[b],
            neighbor: minority[nb],
            lambda,
        });
    }
    Ok(SmoteOutput {
        dataset: out,
        draws,
    })
}

/// Applies the chosen strategy. `None` returns the input unchanged.
pub fn rebalance(dataset: &PairDataset, sampling: Sampling, smote: &SmoteConfig) -> Result<PairDataset, SamplerError> {
    match sampling {
        Sampling::None => Ok(dataset.clone()),
        Sampling::Under => undersample(dataset, smote.seed),
        Sampling::Over => smote_oversample(dataset, smote).map(|o| o.dataset),
    }
}
