use teluref_core::corpus::{load_conversation, Conversation};
use teluref_core::evaluator::{resolve_antecedents, resolve_with, Resolution, ResolvedMention};
use teluref_core::featurizer::Featurizer;
use teluref_core::mlp::{MlpConfig, MlpModel};
use teluref_core::synth::{generate_corpus, SynthConfig};

fn conversation(n: usize) -> Conversation {
    let tokens: Vec<String> = (0..n)
        .map(|i| format!(r#"{{"form":"w{i}","pos":"NN","af":"w{i},n,m,sg,3,d,0,0"}}"#))
        .collect();
    let mentions: Vec<String> = (0..n)
        .map(|i| format!(r#"{{"id":"m{}","utterance":0,"span":[{i},{}],"head":"w{i}","gender":"m","number":"sg","person":"3","pop":false,"actor":"neither"}}"#, i + 1, i + 1))
        .collect();
    let json = format!(
        r#"{{"id":"c1","speakers":["A","B"],"utterances":[{{"speaker":"A","text":"","tokens":[{}]}}],"mentions":[{}],"chains":[]}}"#,
        tokens.join(","),
        mentions.join(",")
    );
    load_conversation(json.as_bytes()).unwrap()
}

fn antecedent(r: &ResolvedMention) -> Option<&str> {
    match &r.resolution {
        Resolution::Resolved { antecedent, .. } => Some(antecedent),
        Resolution::Unresolved { .. } => None,
    }
}

#[test]
fn single_mention_has_nothing_to_resolve() {
    let out = resolve_with(&conversation(1), 0.5, |_, _| Ok(0.9)).unwrap();
    assert!(out.is_empty());
}

#[test]
fn confident_pair_resolves() {
    let out = resolve_with(&conversation(2), 0.5, |_, _| Ok(0.9)).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].anaphor, "m2");
    assert_eq!(antecedent(&out[0]), Some("m1"));
}

#[test]
fn ties_go_to_the_most_recent_candidate() {
    let out = resolve_with(&conversation(3), 0.5, |a, b| {
        Ok(match (a, b) {
            ("m1", "m3") | ("m2", "m3") => 0.7,
            _ => 0.1,
        })
    })
    .unwrap();
    assert_eq!(antecedent(&out[1]), Some("m2"));
    assert_eq!(out[0].resolution, Resolution::Unresolved { best_score: 0.1 });
}

#[test]
fn below_threshold_is_unresolved() {
    let out = resolve_with(&conversation(2), 0.5, |_, _| Ok(0.5)).unwrap();
    assert_eq!(antecedent(&out[0]), None);
}

#[test]
fn antecedents_always_precede_anaphors() {
    let corpus = generate_corpus(&SynthConfig {
        conversations: 3,
        ..SynthConfig::default()
    });
    let model = MlpModel::new(MlpConfig::default()).unwrap();
    let featurizer = Featurizer::default();
    for conv in &corpus.conversations {
        let out = resolve_antecedents(conv, &model, &corpus.embeddings, &featurizer, 0.0).unwrap();
        assert_eq!(out.len(), conv.mentions.len() - 1);
        let order: Vec<&str> = conv.mentions_in_order().iter().map(|m| m.id.as_str()).collect();
        let pos = |id: &str| order.iter().position(|m| *m == id).unwrap();
        for r in &out {
            if let Some(a) = antecedent(r) {
                assert!(pos(a) < pos(&r.anaphor));
            }
        }
    }
}
