use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use teluref_core::corpus::{
    load_conversation, load_corpus_dir, save_conversation, Actor, Conversation, Mention, Token, Utterance,
};
use teluref_core::embeddings::{load_embeddings, EmbeddingTable, OovPolicy};
use teluref_core::evaluator::{format_table, resolve_antecedents, ReportRow};
use teluref_core::featurizer::{FeatureBlock, FeatureLayout, Featurizer};
use teluref_core::mlp::MlpModel;
use teluref_core::pipeline::{evaluate, run_ablation, train_on, training_data, ExperimentConfig};
use teluref_core::sampler::{curve_to_csv, imbalance_curve, Sampling};
use teluref_core::ssf::{extract_mention_candidates, parse_ssf_document, ParseMode};
use teluref_core::synth::{generate_corpus, SynthConfig};

use crate::error::{read, write, CliError};
use crate::service::{serve, ServeOptions};

pub const DEFAULT_CORPUS_DIR: &str = "data/corpus";

#[derive(Debug, Parser)]
#[command(name = "teluref", version, about = "Mention-pair anaphora resolution for Telugu dialogue")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert shallow-parser SSF output into a conversation skeleton.
    ParseSsf(ParseSsfArgs),
    /// Train a pair classifier on every conversation in a corpus directory.
    Train(TrainArgs),
    /// Score a trained model on a corpus directory.
    Eval(EvalArgs),
    /// Pick an antecedent for each mention of one conversation.
    Resolve(ResolveArgs),
    /// Write the true/false pair counts for n mentions as CSV.
    Curve(CurveArgs),
    /// Train and score the embedding baseline plus one agreement block at a time.
    Ablation(AblationArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Write a seeded synthetic corpus and embedding file.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ParseSsfArgs {
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Conversation id; defaults to the input file stem.
    #[arg(long)]
    pub id: Option<String>,
    /// Speakers assigned to sentences in rotation.
    #[arg(long, value_delimiter = ',', default_value = "A,B")]
    pub speakers: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory of conversation JSON files.
    #[arg(long, env = "TELUREF_DATA", default_value = DEFAULT_CORPUS_DIR)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// word2vec text file.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub embedding_dim: usize,
    /// Vectors for unknown words: `zeros` or `hashed`.
    #[arg(long, default_value = "hashed")]
    pub oov: OovPolicy,
}

impl EmbeddingArgs {
    pub fn load(&self) -> Result<EmbeddingTable, CliError> {
        let bytes = read(&self.embeddings)?;
        let table = load_embeddings(&bytes, self.embedding_dim)
            .map_err(|e| CliError::invalid(self.embeddings.display(), e))?;
        Ok(table.with_oov_policy(self.oov))
    }

    fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            embedding_dim: self.embedding_dim,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, default_value = "over")]
    pub sampling: Sampling,
    #[arg(long, default_value_t = 5)]
    pub k_neighbors: usize,
    /// Feature blocks to zero out, e.g. `gender,number`.
    #[arg(long, value_delimiter = ',')]
    pub ablate: Vec<FeatureBlock>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Checkpoint including optimizer state.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Conversation JSON file.
    #[arg(long)]
    pub conversation: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    pub n: u64,
    /// CSV file; stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, default_value = "over")]
    pub sampling: Sampling,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Append-only annotation log (JSON lines); created when missing.
    #[arg(long, default_value = "annotations.jsonl")]
    pub annotations: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Model used by the suggestions endpoint; requires --embeddings.
    #[arg(long, requires = "embeddings")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub embedding_dim: usize,
    /// Directory of static annotator assets served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; conversations go to `<out>/corpus`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub conversations: usize,
    #[arg(long, default_value_t = 10)]
    pub mentions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ParseSsf(args) => parse_ssf(&args),
        Command::Train(args) => train(&args),
        Command::Eval(args) => eval(&args),
        Command::Resolve(args) => resolve(&args),
        Command::Curve(args) => curve(&args),
        Command::Ablation(args) => ablation(&args),
        Command::Serve(args) => serve_command(args),
        Command::Synth(args) => synth(&args),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write(path, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn load_corpus(dir: &Path) -> Result<Vec<Conversation>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        ));
    }
    Ok(load_corpus_dir(dir)?)
}

fn load_model(path: &Path) -> Result<MlpModel, CliError> {
    MlpModel::load(&read(path)?).map_err(|e| CliError::invalid(path.display(), e))
}

fn model_featurizer(model: &MlpModel, emb: &EmbeddingArgs) -> Result<Featurizer, CliError> {
    let featurizer = model
        .features
        .clone()
        .unwrap_or_else(|| Featurizer::new(emb.layout()));
    if featurizer.layout.pair_dim() != model.config.input_dim {
        return Err(CliError::Invalid(format!(
            "model expects {} inputs but the featurizer produces {}",
            model.config.input_dim,
            featurizer.layout.pair_dim()
        )));
    }
    Ok(featurizer)
}

pub fn ssf_to_conversation(text: &str, mode: ParseMode, id: &str, speakers: &[String]) -> Result<Conversation, CliError> {
    if speakers.is_empty() {
        return Err(CliError::Invalid("at least one speaker is required".into()));
    }
    let doc = parse_ssf_document(text, mode)?;
    for warning in &doc.warnings {
        eprintln!("warning: {warning}");
    }
    let mut conversation = Conversation {
        id: id.to_string(),
        speakers: speakers.to_vec(),
        utterances: Vec::new(),
        mentions: Vec::new(),
        chains: Vec::new(),
    };
    for (i, sentence) in doc.sentences.iter().enumerate() {
        let tokens: Vec<Token> = sentence
            .tokens
            .iter()
            .map(|t| Token {
                form: t.form.clone(),
                pos: t.pos.clone(),
                af: t.fs.as_ref().map(|fs| fs.raw_af.clone()).unwrap_or_default(),
            })
            .collect();
        let text = tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ");
        for candidate in extract_mention_candidates(&sentence.tokens) {
            conversation.mentions.push(Mention {
                id: format!("m{}", conversation.mentions.len() + 1),
                utterance_index: i,
                token_span: (candidate.start, candidate.end),
                head: candidate.head,
                morph: candidate.morph,
                part_of_plural: false,
                actor: Actor::Neither,
            });
        }
        conversation.utterances.push(Utterance {
            speaker: speakers[i % speakers.len()].clone(),
            text,
            tokens,
        });
    }
    Ok(conversation)
}

fn parse_ssf(args: &ParseSsfArgs) -> Result<(), CliError> {
    let bytes = read(&args.input)?;
    let text = String::from_utf8_lossy(&bytes);
    let mode = if args.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let id = args.id.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "conversation".into())
    });
    let conversation = ssf_to_conversation(&text, mode, &id, &args.speakers)
        .map_err(|e| match e {
            CliError::Invalid(msg) => CliError::Invalid(format!("{}: {msg}", args.input.display())),
            other => other,
        })?;
    emit(args.output.as_deref(), &save_conversation(&conversation))
}

fn train(args: &TrainArgs) -> Result<(), CliError> {
    let conversations = load_corpus(&args.corpus.corpus)?;
    let table = args.embeddings.load()?;
    let featurizer = Featurizer::new(args.embeddings.layout()).with_ablated(args.ablate.iter().copied());
    let mut cfg = ExperimentConfig::default().with_seed(args.seed);
    cfg.sampling = args.sampling;
    cfg.smote.k_neighbors = args.k_neighbors;
    cfg.mlp.epochs = args.epochs;
    cfg.mlp.learning_rate = args.lr;

    let data = training_data(&conversations, &table, &featurizer, &cfg)?;
    let (t, f) = data.class_counts();
    println!("train pairs: {} ({t} true, {f} false)", data.len());
    let (model, report) = train_on(&data, &featurizer, &cfg, |e| {
        println!("epoch {:>3}  loss {:.6}  train_acc {:.4}", e.epoch, e.mean_loss, e.train_accuracy);
    })?;
    write(&args.out, model.save())?;
    if let Some(path) = &args.checkpoint {
        write(path, model.save_checkpoint())?;
    }
    if let Some(path) = &args.report {
        write(path, serde_json::to_vec_pretty(&report).expect("report serializes"))?;
    }
    eprintln!(
        "trained {} epochs in {:.2}s, model written to {}",
        report.epochs_run,
        report.wall_time_secs,
        args.out.display()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let conversations = load_corpus(&args.corpus.corpus)?;
    let table = args.embeddings.load()?;
    let featurizer = model_featurizer(&model, &args.embeddings)?;
    let report = evaluate(&model, &conversations, &table, &featurizer, args.threshold)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        let config = args
            .model
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        print!("{}", format_table(&[ReportRow { config, report }]));
    }
    Ok(())
}

fn resolve(args: &ResolveArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let conversation =
        load_conversation(&read(&args.conversation)?).map_err(|e| CliError::invalid(args.conversation.display(), e))?;
    let table = args.embeddings.load()?;
    let featurizer = model_featurizer(&model, &args.embeddings)?;
    let result = resolve_antecedents(&conversation, &model, &table, &featurizer, args.threshold)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
    Ok(())
}

fn curve(args: &CurveArgs) -> Result<(), CliError> {
    let rows = imbalance_curve(args.n).map_err(|e| CliError::Invalid(e.to_string()))?;
    emit(args.out.as_deref(), curve_to_csv(&rows).as_bytes())
}

fn ablation(args: &AblationArgs) -> Result<(), CliError> {
    let conversations = load_corpus(&args.corpus.corpus)?;
    let table = args.embeddings.load()?;
    let mut cfg = ExperimentConfig::default().with_seed(args.seed);
    cfg.sampling = args.sampling;
    cfg.test_fraction = args.test_fraction;
    cfg.threshold = args.threshold;
    cfg.mlp.epochs = args.epochs;
    cfg.mlp.learning_rate = args.lr;
    let rows = run_ablation(&conversations, &table, args.embeddings.layout(), &cfg)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
    } else {
        print!("{}", format_table(&rows));
    }
    Ok(())
}

fn serve_command(args: ServeArgs) -> Result<(), CliError> {
    let options = ServeOptions {
        corpus_dir: args.corpus.corpus,
        annotations: args.annotations,
        model: args.model,
        embeddings: args.embeddings,
        embedding_dim: args.embedding_dim,
        ui_dir: args.ui_dir,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
    runtime.block_on(serve(options, &args.host, args.port))
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let corpus = generate_corpus(&SynthConfig {
        conversations: args.conversations,
        mentions_per_conversation: args.mentions,
        seed: args.seed,
        ..SynthConfig::default()
    });
    let dir = args.out.join("corpus");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for c in &corpus.conversations {
        write(&dir.join(format!("{}.json", c.id)), save_conversation(c))?;
    }
    let emb = args.out.join("embeddings.txt");
    write(&emb, corpus.embeddings.to_word2vec_text())?;
    eprintln!(
        "wrote {} conversations to {} and embeddings to {}",
        corpus.conversations.len(),
        dir.display(),
        emb.display()
    );
    Ok(())
}
