//! Acceptance criteria. Every criterion runs sequentially inside one test
//! so wall-clock limits are not skewed by parallel test threads, and each
//! prints a single PASS/FAIL line.

use std::io::Write as _;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teluref_core::corpus::{corpus_stats, Provenance};
use teluref_core::evaluator::{ablation_configs, precision_recall_f1};
use teluref_core::featurizer::{FeatureLayout, Featurizer, PairVector};
use teluref_core::mlp::{bce_loss, ForwardMode, MlpConfig, MlpModel};
use teluref_core::pipeline::{run_experiment, train_model, ExperimentConfig};
use teluref_core::sampler::{false_pair_count, smote_oversample, true_pair_count, PairDataset, Sampling, SmoteConfig};
use teluref_core::ssf::{parse_ssf_document, Gender, Number, ParseMode, Person};
use teluref_core::synth::{generate_corpus, SynthConfig, SynthCorpus};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn run(name: &'static str, limit: Duration, check: impl FnOnce() -> Result<String, String>) -> Outcome {
    let started = Instant::now();
    let result = check();
    let elapsed = started.elapsed();
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > limit {
        passed = false;
        detail = format!("{detail}; exceeded time limit {limit:?}");
    }
    let status = if passed { "PASS" } else { "FAIL" };
    // Straight to the stdout handle: libtest only captures `print!`, and
    // these lines should show up in a plain `cargo test` run.
    let _ = writeln!(
        std::io::stdout().lock(),
        "{status} {name}: {detail} [{:.3}s]",
        elapsed.as_secs_f64()
    );
    Outcome {
        name,
        passed,
        detail,
        elapsed,
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const EXAMPLE_LINE: &str = "unnADu\tVM\t<fs af='unDu,v,m,sg,3,,A,A' name=\"unnaaDu\">";

fn ssf_fidelity() -> Result<String, String> {
    let doc = parse_ssf_document(EXAMPLE_LINE, ParseMode::Strict).map_err(|e| e.to_string())?;
    let token = doc
        .sentences
        .first()
        .and_then(|s| s.tokens.first())
        .ok_or("no token parsed")?;
    let fs = token.fs.as_ref().ok_or("no feature structure")?;
    ensure(token.form == "unnADu" && token.pos == "VM", || format!("token {token:?}"))?;
    ensure(fs.root == "unDu" && fs.category == "v", || format!("root/category {fs:?}"))?;
    ensure(
        fs.morph.gender == Gender::Male && fs.morph.number == Number::Singular && fs.morph.person == Person::Third,
        || format!("morph {:?}", fs.morph),
    )?;
    Ok("root unDu, category v, Male/Singular/Third".into())
}

/// Enumerates all pairs of `n` mentions where the first `k` form one chain
/// and the rest are singletons.
fn brute_force_counts(n: u64, k: u64) -> (u64, u64) {
    let chain = |i: u64| if i < k { Some(0) } else { Some(i + 1) };
    let (mut t, mut f) = (0, 0);
    for j in 0..n {
        for i in 0..j {
            if chain(i) == chain(j) {
                t += 1;
            } else {
                f += 1;
            }
        }
    }
    (t, f)
}

fn pair_count_oracle() -> Result<String, String> {
    let mut cases = 0;
    for n in 2..=12u64 {
        for k in 0..=n {
            let expected = brute_force_counts(n, k);
            let got = (
                true_pair_count(n, k).map_err(|e| e.to_string())?,
                false_pair_count(n, k).map_err(|e| e.to_string())?,
            );
            ensure(got == expected, || format!("n={n} k={k}: got {got:?}, enumerated {expected:?}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (n, k) cases match enumeration exactly"))
}

fn oversampling_arithmetic() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut data = PairDataset::default();
    for i in 0..642 + 1818 {
        let v: Vec<f64> = (0..226).map(|_| rng.random_range(-1.0..1.0)).collect();
        data.push(PairVector::from_values(v), i < 642, Provenance::Gold);
    }
    let out = smote_oversample(&data, &SmoteConfig { k_neighbors: 5, seed: 3 }).map_err(|e| e.to_string())?;
    let (t, f) = out.dataset.class_counts();
    ensure((t, f) == (1818, 1818) && out.dataset.len() == 3636, || {
        format!("got {t}/{f}, total {}", out.dataset.len())
    })?;
    ensure(out.draws.len() == 1818 - 642, || format!("{} draws", out.draws.len()))?;
    for i in 0..data.len() {
        ensure(
            out.dataset.vectors[i] == data.vectors[i] && out.dataset.labels[i] == data.labels[i],
            || format!("gold instance {i} changed"),
        )?;
    }
    let mut worst: f64 = 0.0;
    for (s, draw) in out.draws.iter().enumerate() {
        let synth = out.dataset.vectors[data.len() + s].as_slice();
        ensure(out.dataset.labels[data.len() + s], || format!("synthetic {s} is not labeled true"))?;
        ensure(out.dataset.provenance[data.len() + s] == Provenance::Synthetic, || {
            format!("synthetic {s} has gold provenance")
        })?;
        ensure(data.labels[draw.base] && data.labels[draw.neighbor], || {
            format!("draw {s} uses a non-minority source")
        })?;
        ensure((0.0..1.0).contains(&draw.lambda), || format!("draw {s} lambda {}", draw.lambda))?;
        let a = data.vectors[draw.base].as_slice();
        let b = data.vectors[draw.neighbor].as_slice();
        for d in 0..226 {
            let (lo, hi) = (a[d].min(b[d]), a[d].max(b[d]));
            ensure(synth[d] >= lo - 1e-9 && synth[d] <= hi + 1e-9, || {
                format!("synthetic {s} dim {d} outside [{lo}, {hi}]")
            })?;
            worst = worst.max((synth[d] - (a[d] + draw.lambda * (b[d] - a[d]))).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max reconstruction error {worst:e}"))?;
    Ok(format!("642/1818 -> 1818/1818 = 3636; max convex-combination error {worst:e}"))
}

fn gradient_check() -> Result<String, String> {
    let cfg = MlpConfig::default();
    let h = 1e-5;
    let per_tensor = 40;
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    for draw in 0..10u64 {
        let mut model = MlpModel::new(MlpConfig {
            seed: 100 + draw,
            ..cfg.clone()
        })
        .map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(200 + draw);
        for (_, t) in model.params.tensors_mut().into_iter().filter(|(n, _)| n.starts_with('b')) {
            t.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
        let x = Array2::from_shape_simple_fn((4, cfg.input_dim), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..4).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();

        let cache = model.forward_batch(x.view(), ForwardMode::Eval).map_err(|e| e.to_string())?;
        let grads = model.backward(&cache, &y).map_err(|e| e.to_string())?;
        let loss = |m: &MlpModel| bce_loss(m.predict_batch(x.view()).unwrap().as_slice().unwrap(), &y);

        // Every tensor that carries a gradient without an output bias.
        for t in 0..5 {
            let len = model.params.tensors()[t].1.len();
            for _ in 0..per_tensor.min(len) {
                let i = rng.random_range(0..len);
                let orig = model.params.tensors()[t].1[i];
                model.params.tensors_mut()[t].1[i] = orig + h;
                let up = loss(&model);
                model.params.tensors_mut()[t].1[i] = orig - h;
                let down = loss(&model);
                model.params.tensors_mut()[t].1[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.tensors()[t].1[i];
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
                checked += 1;
            }
        }
    }
    ensure(max_rel < 1e-4, || format!("max relative error {max_rel:e}"))?;
    Ok(format!("{checked} coordinates over 10 draws, max relative error {max_rel:e}"))
}

fn corpus() -> SynthCorpus {
    generate_corpus(&SynthConfig::default())
}

fn determinism(c: &SynthCorpus) -> Result<String, String> {
    let featurizer = Featurizer::new(FeatureLayout::default());
    let cfg = ExperimentConfig::default().with_seed(7);
    let train = |_: ()| {
        train_model(&c.conversations, &c.embeddings, &featurizer, &cfg, |_| {})
            .map(|(m, r)| (m.save(), r.without_timing()))
            .map_err(|e| e.to_string())
    };
    let (a, ra) = train(())?;
    let (b, rb) = train(())?;
    ensure(a == b, || "model files differ".into())?;
    ensure(ra == rb, || "train reports differ".into())?;
    Ok(format!("two runs, {} epochs each, identical {}-byte model files", ra.epochs_run, a.len()))
}

fn experiment(c: &SynthCorpus, kept: &[teluref_core::featurizer::FeatureBlock], sampling: Sampling, seed: u64) -> Result<f64, String> {
    let featurizer = Featurizer::keeping_only(FeatureLayout::default(), kept);
    let mut cfg = ExperimentConfig::default().with_seed(seed);
    cfg.sampling = sampling;
    cfg.mlp.epochs = 50;
    run_experiment(&c.conversations, &c.embeddings, &featurizer, &cfg)
        .map(|r| r.eval.scores.f1)
        .map_err(|e| e.to_string())
}

fn end_to_end(c: &SynthCorpus) -> Result<String, String> {
    let stats = corpus_stats(&c.conversations);
    ensure(stats.conversations >= 40, || format!("{} conversations", stats.conversations))?;
    let all = teluref_core::featurizer::FeatureBlock::ALL;
    let f1 = experiment(c, &all, Sampling::Over, 0)?;
    ensure(f1 >= 0.85, || format!("held-out pair F1 {f1:.4} < 0.85"))?;
    Ok(format!(
        "{} conversations, {} mentions; held-out F1 {f1:.4} after 50 epochs",
        stats.conversations, stats.mentions
    ))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ablation_direction(c: &SynthCorpus) -> Result<String, String> {
    let configs = ablation_configs();
    let kept = |name: &str| configs.iter().find(|(n, _)| *n == name).map(|(_, k)| k.clone()).unwrap();
    let (base, gender) = (kept("None"), kept("Gender"));
    let mut base_f1 = Vec::new();
    let mut gender_f1 = Vec::new();
    for seed in 0..5 {
        base_f1.push(experiment(c, &base, Sampling::Over, seed)?);
        gender_f1.push(experiment(c, &gender, Sampling::Over, seed)?);
    }
    let (b, g) = (mean(&base_f1), mean(&gender_f1));
    ensure(b < g, || format!("baseline mean F1 {b:.4} is not below gender mean F1 {g:.4}"))?;
    Ok(format!("mean F1 over 5 seeds: baseline {b:.4} < embeddings+gender {g:.4}"))
}

fn sampling_comparison(c: &SynthCorpus) -> Result<String, String> {
    let stats = corpus_stats(&c.conversations);
    let ratio = stats.false_pairs as f64 / stats.true_pairs as f64;
    ensure(ratio >= 3.0, || format!("false:true ratio {ratio:.2} < 3"))?;
    let all = teluref_core::featurizer::FeatureBlock::ALL;
    let mut over = Vec::new();
    let mut under = Vec::new();
    for seed in 0..5 {
        over.push(experiment(c, &all, Sampling::Over, seed)?);
        under.push(experiment(c, &all, Sampling::Under, seed)?);
    }
    let (o, u) = (mean(&over), mean(&under));
    ensure(o >= u, || format!("SMOTE mean F1 {o:.4} < undersampling mean F1 {u:.4}"))?;
    Ok(format!("false:true {ratio:.2}; mean F1 SMOTE {o:.4} >= undersampling {u:.4}"))
}

/// Probabilities and labels realising the given counts at threshold 0.5.
fn records(tp: u64, fp: u64, tn: u64, fn_: u64) -> (Vec<f64>, Vec<bool>) {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (n, p, l) in [(tp, 0.9, true), (fp, 0.8, false), (tn, 0.1, false), (fn_, 0.5, true)] {
        for _ in 0..n {
            probs.push(p);
            labels.push(l);
        }
    }
    (probs, labels)
}

fn metric_identities() -> Result<String, String> {
    // (tp, fp, tn, fn) -> hand-computed (precision, recall, f1); None marks
    // a zero denominator, reported as 0 with a flag.
    type Row = ((u64, u64, u64, u64), (Option<f64>, Option<f64>, Option<f64>));
    let table: [Row; 10] = [
        ((10, 0, 10, 0), (Some(1.0), Some(1.0), Some(1.0))),
        ((0, 0, 5, 3), (None, Some(0.0), None)),
        ((0, 0, 7, 0), (None, None, None)),
        ((0, 4, 6, 0), (Some(0.0), None, None)),
        ((0, 2, 3, 2), (Some(0.0), Some(0.0), None)),
        ((8, 2, 85, 5), (Some(0.8), Some(8.0 / 13.0), Some(16.0 / 23.0))),
        ((1, 1, 0, 0), (Some(0.5), Some(1.0), Some(2.0 / 3.0))),
        ((3, 1, 10, 1), (Some(0.75), Some(0.75), Some(0.75))),
        ((5, 0, 2, 5), (Some(1.0), Some(0.5), Some(2.0 / 3.0))),
        ((90, 18, 300, 10), (Some(90.0 / 108.0), Some(0.9), Some(180.0 / 208.0))),
    ];
    for ((tp, fp, tn, fn_), (p, r, f)) in table {
        let (probs, labels) = records(tp, fp, tn, fn_);
        let report = precision_recall_f1(&probs, &labels, 0.5).map_err(|e| e.to_string())?;
        let c = report.counts;
        let s = report.scores;
        ensure((c.tp, c.fp, c.tn, c.fn_) == (tp, fp, tn, fn_), || format!("counts {c:?}"))?;
        ensure(c.total() as usize == probs.len(), || "counts do not sum to the record count".into())?;
        let matches = |got: f64, flag: bool, want: Option<f64>| match want {
            Some(v) => got == v && !flag,
            None => got == 0.0 && flag,
        };
        ensure(
            matches(s.precision, s.precision_undefined, p)
                && matches(s.recall, s.recall_undefined, r)
                && matches(s.f1, s.f1_undefined, f),
            || format!("table {:?}: got {s:?}, expected {:?}", (tp, fp, tn, fn_), (p, r, f)),
        )?;
    }
    Ok("10 confusion tables reproduced exactly".into())
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = vec![
        run("ssf_fidelity", Duration::from_millis(1), ssf_fidelity),
        run("pair_count_oracle", Duration::from_secs(1), pair_count_oracle),
        run("oversampling_arithmetic", Duration::from_secs(5), oversampling_arithmetic),
        run("gradient_check", Duration::from_secs(30), gradient_check),
    ];
    let c = corpus();
    outcomes.push(run("determinism", Duration::from_secs(120), || determinism(&c)));
    outcomes.push(run("end_to_end_learning", Duration::from_secs(120), || end_to_end(&c)));
    outcomes.push(run("ablation_direction", Duration::from_secs(600), || ablation_direction(&c)));
    outcomes.push(run("sampling_comparison", Duration::from_secs(300), || sampling_comparison(&c)));
    outcomes.push(run("metric_identities", Duration::from_secs(1), metric_identities));

    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({}, {:.3}s)", o.name, o.detail, o.elapsed.as_secs_f64()))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
