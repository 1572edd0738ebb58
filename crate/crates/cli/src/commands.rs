use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use compsum::corpus::{build_vocab, load_documents, load_embeddings, Document, EmbeddingTable, Stopwords};
use compsum::eval::{evaluate, Lead, LeadWord, ModelSystem, SummarySystem};
use compsum::model::{Budgets, Checkpoint, Summarizer, SummaryLevel};
use compsum::rewards::{coverage_plan, export_plan};
use compsum::training::{score_summary, train, Resources, TrainConfig};
use compsum::Error;
use serde::Serialize;

use crate::args::{BudgetArgs, EvaluateArgs, ExplainArgs, RewardInputs, ScoreArgs, SummarizeArgs, TrainArgs, WeightArgs};

/// Why a command stopped; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or inputs (exit 2).
    Usage(String),
    /// Anything that went wrong while running (exit 1).
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Checkpoint(_) | Error::MissingReferences(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime(context: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{context}: {e}"))
}

type CmdResult = std::result::Result<(), Failure>;

impl BudgetArgs {
    /// Profile budgets, then explicit flags, over `base`.
    pub fn resolve(&self, base: Budgets) -> std::result::Result<Budgets, Failure> {
        let mut b = self.profile.map_or(base, |p| p.budgets());
        if let Some(n) = self.l_e {
            b.sentences = n;
        }
        if let Some(n) = self.l_c {
            b.words = n;
        }
        b.validate()?;
        Ok(b)
    }
}

impl WeightArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(w) = self.w_cov {
            cfg.w_cov = w;
        }
        if let Some(w) = self.w_flu {
            cfg.w_flu = w;
        }
    }
}

fn load_config(path: Option<&Path>) -> std::result::Result<TrainConfig, Failure> {
    Ok(match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    })
}

fn load_checkpoint(path: &Path) -> std::result::Result<Checkpoint, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(format!("--checkpoint {} does not exist", path.display())));
    }
    Ok(Checkpoint::load(path)?)
}

pub fn cmd_train(args: TrainArgs) -> CmdResult {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(d) = args.data {
        cfg.data = Some(d);
    }
    if let Some(e) = args.embeddings {
        cfg.embeddings = Some(e);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    let budgets = args.budgets.resolve(cfg.budgets())?;
    cfg.extract_budget = budgets.sentences;
    cfg.compress_budget = budgets.words;
    args.weights.apply(&mut cfg);
    cfg.validate()?;
    match &cfg.data {
        None => return Err(Failure::Usage("missing training data: pass --data or set `data` in --config".into())),
        Some(d) if !d.exists() => return Err(Failure::Usage(format!("--data {} does not exist", d.display()))),
        Some(_) => {}
    }

    fs::create_dir_all(&args.out).map_err(|e| runtime(&args.out.display().to_string(), e))?;
    let resolved = args.out.join("config.toml");
    fs::write(&resolved, cfg.to_toml()).map_err(|e| runtime(&resolved.display().to_string(), e))?;
    eprintln!(
        "training: lr {} batch size {} epochs {} L_E {} L_C {} w_cov {} w_flu {} seed {}",
        cfg.learning_rate, cfg.batch_size, cfg.epochs, cfg.extract_budget, cfg.compress_budget, cfg.w_cov, cfg.w_flu, cfg.seed
    );
    let summary = train(&cfg, &args.out)?;
    #[derive(Serialize)]
    struct Done<'a> {
        steps: u64,
        checkpoint: &'a Path,
        metrics: &'a Path,
    }
    let done = Done { steps: summary.steps, checkpoint: &summary.checkpoint, metrics: &summary.metrics };
    println!("{}", serde_json::to_string(&done).expect("serializable"));
    Ok(())
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    id: &'a str,
    extractive: String,
    compressive: String,
}

pub fn cmd_summarize(args: SummarizeArgs) -> CmdResult {
    let ck = load_checkpoint(&args.checkpoint)?;
    let budgets = args.budgets.resolve(compsum::model::Profile::Cnndm.budgets())?;
    if !args.data.exists() {
        return Err(Failure::Usage(format!("--data {} does not exist", args.data.display())));
    }
    let (model, vocab, embeddings) = Summarizer::from_checkpoint(&ck)?;
    let docs = load_documents(&args.data)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| runtime(&p.display().to_string(), e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for (i, doc) in docs.iter().enumerate() {
        let line = if doc.is_empty() {
            SummaryLine { id: &doc.id, extractive: String::new(), compressive: String::new() }
        } else {
            let seed = args.seed.wrapping_add(i as u64);
            let (ext, comp) = model.summarize(doc, &vocab, &embeddings, budgets, args.mode, seed)?;
            SummaryLine { id: &doc.id, extractive: ext.text, compressive: comp.text }
        };
        writeln!(out, "{}", serde_json::to_string(&line).expect("serializable")).map_err(|e| runtime("write", e))?;
    }
    out.flush().map_err(|e| runtime("write", e))?;
    Ok(())
}

/// Document, summary and the reward resources for scoring them.
struct RewardSetup {
    doc: Document,
    summary: Vec<String>,
    config: TrainConfig,
    resources: Resources,
}

fn reward_setup(inputs: &RewardInputs) -> std::result::Result<RewardSetup, Failure> {
    let mut config = load_config(inputs.config.as_deref())?;
    inputs.weights.apply(&mut config);
    if inputs.exact {
        config.exact_ot = true;
    }
    config.seed = inputs.seed;
    config.validate()?;

    let text = match (&inputs.document, &inputs.document_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| Failure::Usage(format!("--document-file {}: {e}", p.display())))?,
        (None, None) => return Err(Failure::Usage("pass --document or --document-file".into())),
    };
    let doc = Document::new("input", text);
    if doc.is_empty() {
        return Err(Failure::Usage("the document has no tokens".into()));
    }
    let summary: Vec<String> = Document::new("summary", inputs.summary.as_str()).tokens().map(str::to_string).collect();
    if summary.is_empty() {
        return Err(Failure::Usage("the summary is empty".into()));
    }

    let lm_docs = match &inputs.data {
        Some(p) => load_documents(p)?,
        None => vec![doc.clone()],
    };
    let stopwords = Stopwords::from_env()?;
    let resources = match &inputs.checkpoint {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            let (_, vocab, embeddings) = Summarizer::from_checkpoint(&ck)?;
            Resources::with_vectors(&lm_docs, vocab, embeddings, stopwords, config.lm_order)
        }
        None => {
            let summary_doc = Document::new("summary", inputs.summary.as_str());
            let vocab = build_vocab(lm_docs.iter().chain([&doc, &summary_doc]), 1)?;
            let dim = config.model.embedding_dim;
            let embeddings = match &inputs.embeddings {
                Some(p) => load_embeddings(p, &vocab, dim, config.seed)?,
                None => EmbeddingTable::random(&vocab, dim, config.seed),
            };
            Resources::with_vectors(&lm_docs, vocab, embeddings, stopwords, config.lm_order)
        }
    };
    Ok(RewardSetup { doc, summary, config, resources })
}

pub fn cmd_score(args: ScoreArgs) -> CmdResult {
    let setup = reward_setup(&args.inputs)?;
    let reward = setup.resources.reward_model(&setup.config);
    let summary: Vec<&str> = setup.summary.iter().map(String::as_str).collect();
    let breakdown = score_summary(&reward, &setup.doc, &summary);
    println!("{}", serde_json::to_string(&breakdown).expect("serializable"));
    Ok(())
}

pub fn cmd_explain(args: ExplainArgs) -> CmdResult {
    let setup = reward_setup(&args.inputs)?;
    let reward = setup.resources.reward_model(&setup.config);
    let doc_tokens: Vec<&str> = setup.doc.tokens().collect();
    let summary: Vec<&str> = setup.summary.iter().map(String::as_str).collect();
    let plan = coverage_plan(&doc_tokens, &summary, &reward.coverage)?;
    let files = export_plan(&plan, &args.out, &args.name, !args.no_heatmap)?;
    #[derive(Serialize)]
    struct Explained<'a> {
        distance: f64,
        coverage: f64,
        matrix: &'a Path,
        heatmap: Option<&'a Path>,
    }
    let report = Explained {
        distance: plan.distance,
        coverage: 1.0 - plan.distance,
        matrix: &files.tsv,
        heatmap: files.heatmap.as_deref(),
    };
    println!("{}", serde_json::to_string(&report).expect("serializable"));
    Ok(())
}

/// A parsed `--systems` entry.
enum SystemSpec {
    Lead,
    LeadWord,
    Model(PathBuf),
}

fn parse_systems(specs: &[String]) -> std::result::Result<Vec<SystemSpec>, Failure> {
    specs
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| match s.to_ascii_lowercase().as_str() {
            "lead" => Ok(SystemSpec::Lead),
            "leadword" | "lead-word" => Ok(SystemSpec::LeadWord),
            _ => match s.strip_prefix("model:") {
                Some(p) if !p.is_empty() => Ok(SystemSpec::Model(PathBuf::from(p))),
                _ => Err(Failure::Usage(format!("unknown system {s:?} (lead, leadword, model:<checkpoint>)"))),
            },
        })
        .collect()
}

pub fn cmd_evaluate(args: EvaluateArgs) -> CmdResult {
    let data = args.data.as_ref().ok_or_else(|| Failure::Usage("missing test data: pass --data".into()))?;
    if !data.exists() {
        return Err(Failure::Usage(format!("--data {} does not exist", data.display())));
    }
    let budgets = args.budgets.resolve(compsum::model::Profile::Cnndm.budgets())?;
    let specs = parse_systems(&args.systems)?;
    if specs.is_empty() {
        return Err(Failure::Usage("--systems is empty".into()));
    }
    let mut models = Vec::new();
    for spec in &specs {
        if let SystemSpec::Model(path) = spec {
            let ck = load_checkpoint(path)?;
            let label = path.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
            models.push((label, Summarizer::from_checkpoint(&ck)?));
        }
    }
    let mut systems: Vec<Box<dyn SummarySystem + '_>> = Vec::new();
    let mut next_model = models.iter();
    for spec in &specs {
        match spec {
            SystemSpec::Lead => systems.push(Box::new(Lead)),
            SystemSpec::LeadWord => systems.push(Box::new(LeadWord)),
            SystemSpec::Model(_) => {
                let (label, (model, vocab, embeddings)) = next_model.next().expect("one entry per model spec");
                for level in [SummaryLevel::Sentence, SummaryLevel::Word] {
                    systems.push(Box::new(ModelSystem {
                        label: label.clone(),
                        model,
                        vocab,
                        embeddings,
                        level,
                        mode: args.mode,
                    }));
                }
            }
        }
    }
    let refs: Vec<&dyn SummarySystem> = systems.iter().map(|s| s.as_ref()).collect();
    let report = evaluate(data, &refs, args.sample_size, budgets, args.seed)?;
    let json = report.to_json();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| runtime(&dir.display().to_string(), e))?;
        for (name, body) in [("report.json", &json), ("report.txt", &report.to_table())] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| runtime(&p.display().to_string(), e))?;
        }
    }
    println!("{json}");
    eprint!("{}", report.to_table());
    Ok(())
}
