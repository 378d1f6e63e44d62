//! Seeded generator for small annotated dialogue corpora.
//!
//! Each conversation tracks a few third-person entities with distinct
//! gender/number combinations. An entity is introduced by name and later
//! referred to by repeating the name, by a pronoun or by an agreeing verb.
//! Which entity is mentioned next favours recently mentioned ones. Name
//! vectors lean toward a per-gender centroid; pronoun vectors only carry
//! number and verb vectors carry nothing, so agreement features are needed
//! to link most anaphors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Actor, Conversation, Mention, Token, Utterance};
use crate::embeddings::{EmbeddingTable, OovPolicy};
use crate::ssf::{Gender, MorphFeatures, Number, Person};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub conversations: usize,
    pub mentions_per_conversation: usize,
    pub min_entities: usize,
    pub max_entities: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            conversations: 40,
            mentions_per_conversation: 10,
            min_entities: 4,
            max_entities: 5,
            embedding_dim: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub conversations: Vec<Conversation>,
    pub embeddings: EmbeddingTable,
}

const CLASSES: [(Gender, Number); 6] = [
    (Gender::Male, Number::Singular),
    (Gender::Female, Number::Singular),
    (Gender::Any, Number::Singular),
    (Gender::Male, Number::Plural),
    (Gender::Female, Number::Plural),
    (Gender::Any, Number::Plural),
];

const NAMES_PER_CLASS: usize = 12;
const VERBS: [&str; 12] = [
    "vaccu", "vell", "cUs", "ceppu", "tiMt", "koM", "ic", "aDug", "rAs", "cadav", "nEast", "paMp",
];
const FILLERS: [&str; 8] = ["avunu", "kAxu", "ikkada", "ninna", "ippudu", "bAgA", "kUDA", "mari"];
const SG_PRONOUN: &str = "wanu";
const PL_PRONOUN: &str = "vAlYlYu";
const SYLLABLES: [&str; 12] = ["rA", "mu", "sI", "ta", "la", "ksh", "vi", "ja", "ya", "ka", "ni", "pa"];

fn name_for(class: usize, i: usize) -> String {
    let (g, n) = CLASSES[class];
    let a = SYLLABLES[(i * 5 + class) % SYLLABLES.len()];
    let b = SYLLABLES[(i * 7 + 3 * class + 1) % SYLLABLES.len()];
    let suffix = match (g, n) {
        (Gender::Male, Number::Singular) => "Du",
        (Gender::Female, Number::Singular) => "mma",
        (Gender::Any, Number::Singular) => "M",
        (Gender::Male, _) => "ulu",
        (Gender::Female, _) => "lYlYu",
        (Gender::Any, _) => "lu",
    };
    format!("{a}{b}{i}{suffix}")
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

fn blend(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

fn gender_index(g: Gender) -> usize {
    match g {
        Gender::Male => 0,
        Gender::Female => 1,
        Gender::Any => 2,
    }
}

fn build_embeddings(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(dim, OovPolicy::HashedDeterministic);
    let gender_centroids: Vec<Vec<f64>> = (0..3).map(|_| unit(rng, dim)).collect();
    let number_centroids: Vec<Vec<f64>> = (0..2).map(|_| unit(rng, dim)).collect();
    for (class, (g, _)) in CLASSES.iter().enumerate() {
        for i in 0..NAMES_PER_CLASS {
            let noise = unit(rng, dim);
            table.insert(name_for(class, i), blend(&gender_centroids[gender_index(*g)], 0.6, &noise, 0.8));
        }
    }
    for (word, centroid) in [(SG_PRONOUN, 0), (PL_PRONOUN, 1)] {
        let noise = unit(rng, dim);
        table.insert(word, blend(&number_centroids[centroid], 0.8, &noise, 0.6));
    }
    for word in VERBS.iter().chain(FILLERS.iter()) {
        table.insert(*word, unit(rng, dim));
    }
    table
}

fn af(root: &str, cat: &str, morph: MorphFeatures) -> String {
    format!(
        "{root},{cat},{},{},{},,0,0",
        morph.gender.code(),
        morph.number.code(),
        morph.person.code()
    )
}

struct Entity {
    name: String,
    morph: MorphFeatures,
    last_seen: Option<usize>,
    mentions: Vec<String>,
}

fn conversation(rng: &mut ChaCha8Rng, cfg: &SynthConfig, index: usize) -> Conversation {
    let entity_count = rng.random_range(cfg.min_entities..=cfg.max_entities).min(CLASSES.len());
    let mut classes: Vec<usize> = (0..CLASSES.len()).collect();
    classes.shuffle(rng);
    let mut entities: Vec<Entity> = classes[..entity_count]
        .iter()
        .map(|&c| {
            let (gender, number) = CLASSES[c];
            Entity {
                name: name_for(c, rng.random_range(0..NAMES_PER_CLASS)),
                morph: MorphFeatures::new(gender, number, Person::Third),
                last_seen: None,
                mentions: Vec::new(),
            }
        })
        .collect();

    let speakers = vec!["A".to_string(), "B".to_string()];
    let mut utterances: Vec<Utterance> = Vec::new();
    let mut mentions = Vec::new();
    let n = cfg.mentions_per_conversation;
    let mut introduced = 0;

    for i in 0..n {
        let remaining_slots = n - i;
        let remaining_intros = entity_count - introduced;
        let introduce = introduced == 0
            || remaining_intros >= remaining_slots
            || (remaining_intros > 0 && rng.random::<f64>() < 1.5 * remaining_intros as f64 / remaining_slots as f64);
        let e = if introduce {
            introduced += 1;
            introduced - 1
        } else {
            let weights: Vec<f64> = entities[..introduced]
                .iter()
                .map(|e| 1.0 / (1.0 + (i - e.last_seen.unwrap_or(0)) as f64))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = introduced - 1;
            for (j, w) in weights.iter().enumerate() {
                if pick < *w {
                    chosen = j;
                    break;
                }
                pick -= w;
            }
            chosen
        };

        let entity = &entities[e];
        let morph = entity.morph;
        let (form, pos, root, cat) = if introduce {
            (entity.name.clone(), "NNP", entity.name.clone(), "n")
        } else {
            match rng.random_range(0..10) {
                0..=2 => (entity.name.clone(), "NNP", entity.name.clone(), "n"),
                3..=6 => {
                    let p = if morph.number == Number::Plural { PL_PRONOUN } else { SG_PRONOUN };
                    (p.to_string(), "PRP", p.to_string(), "pn")
                }
                _ => {
                    let v = VERBS[rng.random_range(0..VERBS.len())];
                    (v.to_string(), "VM", v.to_string(), "v")
                }
            }
        };

        let new_utterance = utterances.is_empty()
            || utterances.last().is_some_and(|u| u.tokens.len() >= 4)
            || rng.random::<f64>() < 0.6;
        if new_utterance {
            let speaker = speakers[utterances.len() % 2].clone();
            let filler = FILLERS[rng.random_range(0..FILLERS.len())];
            utterances.push(Utterance {
                speaker,
                text: String::new(),
                tokens: vec![Token {
                    form: filler.into(),
                    pos: "RB".into(),
                    af: String::new(),
                }],
            });
        }
        let u_idx = utterances.len() - 1;
        let utt = utterances.last_mut().expect("pushed above");
        let start = utt.tokens.len();
        utt.tokens.push(Token {
            form: form.clone(),
            pos: pos.into(),
            af: af(&root, cat, morph),
        });
        let id = format!("m{}", i + 1);
        mentions.push(Mention {
            id: id.clone(),
            utterance_index: u_idx,
            token_span: (start, start + 1),
            head: form,
            morph,
            part_of_plural: morph.number == Number::Plural,
            actor: Actor::Neither,
        });
        let entity = &mut entities[e];
        entity.last_seen = Some(i);
        entity.mentions.push(id);
    }

    for u in &mut utterances {
        u.text = u.tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ");
    }
    Conversation {
        id: format!("c{:03}", index + 1),
        speakers,
        utterances,
        mentions,
        chains: entities.into_iter().map(|e| e.mentions).filter(|c| c.len() > 1).collect(),
    }
}

pub fn generate_corpus(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let embeddings = build_embeddings(&mut rng, cfg.embedding_dim);
    let conversations = (0..cfg.conversations).map(|i| conversation(&mut rng, cfg, i)).collect();
    SynthCorpus {
        conversations,
        embeddings,
    }
}
