use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teluref_core::corpus::Provenance;
use teluref_core::featurizer::PairVector;
use teluref_core::mlp::{train, ForwardMode, MlpConfig, MlpModel};
use teluref_core::sampler::PairDataset;

/// Two Gaussian-ish blobs in 226 dimensions separated along every axis.
fn blobs(n: usize, seed: u64) -> PairDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = PairDataset::default();
    for i in 0..n {
        let label = i % 2 == 0;
        let center = if label { 0.3 } else { -0.3 };
        let v = (0..226)
            .map(|_| center + (rng.random::<f64>() + rng.random::<f64>() - 1.0) * 0.5)
            .collect();
        d.push(PairVector::from_values(v), label, Provenance::Gold);
    }
    d
}

#[test]
fn separable_blobs_are_learned() {
    let cfg = MlpConfig {
        epochs: 50,
        seed: 1,
        ..MlpConfig::default()
    };
    let data = blobs(200, 5);
    let (model, report) = train(MlpModel::new(cfg).unwrap(), &data).unwrap();
    assert!(report.epochs_run <= 50);
    let first = report.epochs.first().unwrap().mean_loss;
    let last = report.epochs.last().unwrap().mean_loss;
    assert!(last < first, "loss went from {first} to {last}");
    assert!(report.epochs.iter().all(|e| e.mean_loss >= 0.0));

    let probs = model.predict_dataset(&data).unwrap();
    let correct = probs.iter().zip(&data.labels).filter(|(p, l)| (**p > 0.5) == **l).count();
    assert!(correct as f64 / data.len() as f64 >= 0.99, "{correct}/200 correct");
}

#[test]
fn same_seed_same_bytes() {
    let cfg = MlpConfig {
        epochs: 3,
        seed: 7,
        ..MlpConfig::default()
    };
    let data = blobs(150, 2);
    let (a, ra) = train(MlpModel::new(cfg.clone()).unwrap(), &data).unwrap();
    let (b, rb) = train(MlpModel::new(cfg).unwrap(), &data).unwrap();
    assert_eq!(a.save(), b.save());
    assert_eq!(a.save_checkpoint(), b.save_checkpoint());
    assert_eq!(ra.without_timing(), rb.without_timing());
}

#[test]
fn probabilities_stay_in_open_interval() {
    let model = MlpModel::new(MlpConfig {
        seed: 3,
        ..MlpConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..10_000 {
        let scale = if i % 100 == 0 { 1e3 } else { 1.0 };
        let x: Vec<f64> = (0..226).map(|_| rng.random_range(-scale..scale)).collect();
        let p = model.predict_pair(&PairVector::from_values(x)).unwrap();
        assert!(p > 0.0 && p < 1.0, "input {i}: {p}");
    }
}

#[test]
fn eval_ignores_dropout_seed_and_train_mode_varies() {
    let model = MlpModel::new(MlpConfig::default()).unwrap();
    let x = vec![0.25; 226];
    let eval = model.forward(&x, ForwardMode::Eval).unwrap().0;
    let t1 = model.forward(&x, ForwardMode::Train { seed: 1 }).unwrap().0;
    let t2 = model.forward(&x, ForwardMode::Train { seed: 2 }).unwrap().0;
    assert_eq!(eval, model.forward(&x, ForwardMode::Eval).unwrap().0);
    assert_ne!(t1, t2);
}

#[test]
fn saved_model_has_documented_shape() {
    let model = MlpModel::new(MlpConfig::default()).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&model.save()).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["dims"], serde_json::json!([226, 512, 128, 1]));
    assert_eq!(v["w1"].as_array().unwrap().len(), 512);
    assert_eq!(v["w1"][0].as_array().unwrap().len(), 226);
    assert_eq!(v["w2"].as_array().unwrap().len(), 128);
    assert_eq!(v["w_out"].as_array().unwrap().len(), 128);
    assert!(v.get("b_out").is_none());
    assert!(v.get("adam").is_none());
    let ck: serde_json::Value = serde_json::from_slice(&model.save_checkpoint()).unwrap();
    assert_eq!(ck["adam"]["step"], 0);
}
