#![allow(dead_code)]

use std::path::Path;

use teluref_core::corpus::{save_conversation, Actor, Conversation, Mention, Token, Utterance};
use teluref_core::ssf::{Gender, MorphFeatures, Number, Person};

pub const DIM: usize = 4;

/// `n` single-token mentions in one utterance; the first `k` share a chain.
pub fn conversation(id: &str, n: usize, k: usize) -> Conversation {
    let genders = [Gender::Male, Gender::Female, Gender::Any];
    let mut tokens = Vec::new();
    let mut mentions = Vec::new();
    for i in 0..n {
        let g = if i < k { Gender::Male } else { genders[i % 3] };
        let morph = MorphFeatures::new(g, Number::Singular, Person::Third);
        let form = format!("w{}", i % 5);
        tokens.push(Token {
            form: form.clone(),
            pos: "NN".into(),
            af: format!("{form},n,{},sg,3,d,0,0", g.code()),
        });
        mentions.push(Mention {
            id: format!("m{}", i + 1),
            utterance_index: 0,
            token_span: (i, i + 1),
            head: form,
            morph,
            part_of_plural: false,
            actor: Actor::Neither,
        });
    }
    let chains = if k >= 2 {
        vec![(1..=k).map(|i| format!("m{i}")).collect()]
    } else {
        Vec::new()
    };
    Conversation {
        id: id.into(),
        speakers: vec!["A".into(), "B".into()],
        utterances: vec![Utterance {
            speaker: "A".into(),
            text: String::new(),
            tokens,
        }],
        mentions,
        chains,
    }
}

pub fn write_corpus(dir: &Path, conversations: &[Conversation]) {
    std::fs::create_dir_all(dir).unwrap();
    for c in conversations {
        std::fs::write(dir.join(format!("{}.json", c.id)), save_conversation(c)).unwrap();
    }
}

/// 642 true and 1818 false pairs in total.
pub fn imbalanced_corpus() -> Vec<Conversation> {
    let mut out = Vec::new();
    for i in 0..9 {
        out.push(conversation(&format!("a{i:02}"), 10, 3));
    }
    for i in 0..41 {
        out.push(conversation(&format!("b{i:02}"), 10, 6));
    }
    for i in 0..14 {
        out.push(conversation(&format!("c{i:02}"), 6, 0));
    }
    out
}

pub fn write_embeddings(path: &Path) {
    let mut text = format!("5 {DIM}\n");
    for i in 0..5 {
        let v: Vec<String> = (0..DIM).map(|d| format!("{}", if d == i % DIM { 1.0 } else { 0.1 * i as f64 })).collect();
        text.push_str(&format!("w{i} {}\n", v.join(" ")));
    }
    std::fs::write(path, text).unwrap();
}
