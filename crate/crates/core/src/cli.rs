//! Command-line front end: a TOML run configuration, eight subcommands and
//! versioned JSON reports.
//!
//! Exit codes: 0 success, 1 data error, 2 configuration error, 3 numerical
//! failure.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, CorpusRecord, Document, Lexicon, Schema};
use crate::error::{Error, Result};
use crate::evaluation::{
    ensemble_train_select, run_pipeline, score_predictions, DocumentOutput, EnsembleSpec, MatchVoting,
    PipelineConfig, PipelineMode, PipelineModels,
};
use crate::tasks::{Task, DEFAULT_TEMPLATE, DEFAULT_THRESHOLD};
use crate::tokenizer::Vocab;
use crate::training::{
    build_task_vocab, cross_validate, neighborhood_search, train_with_vocab, Checkpoint, HyperParam, ParamDelta,
    TaskDataset, TrainConfig,
};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "finkey", version, about = "Financial sentiment and key-entity detection")]
pub struct Cli {
    /// TOML run configuration. Relative paths inside it are resolved against
    /// its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a corpus file against a schema.
    Validate {
        corpus: PathBuf,
        #[arg(long, default_value = "dataset-1")]
        schema: Schema,
    },
    /// Build the vocabulary of a task's training corpus.
    BuildVocab {
        task: Task,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and write its checkpoint.
    Train {
        task: Task,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-fold cross-validation on the training corpus.
    Crossval {
        task: Task,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train one model per seed and keep the best.
    Ensemble {
        task: Task,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sentiment filter plus key-entity detection over a corpus.
    Pipeline {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        mode: Option<PipelineMode>,
    },
    /// Score a predictions file against a gold corpus.
    Evaluate {
        predictions: PathBuf,
        gold: PathBuf,
        #[arg(long)]
        task: Task,
    },
    /// Cross-validated neighborhood search around the task config.
    Search {
        task: Task,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Dataset-1 corpora (sentiment and match).
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    /// Dataset-2 corpora (mrc).
    pub mrc_train: Option<PathBuf>,
    pub mrc_dev: Option<PathBuf>,
    /// Prebuilt vocabulary; when it exists, training uses it.
    pub vocab: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    /// Pipeline models; default to `<checkpoint_dir>/<task>.ckpt`.
    pub sentiment_checkpoints: Vec<PathBuf>,
    pub match_checkpoints: Vec<PathBuf>,
    pub mrc_checkpoint: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            train: None,
            dev: None,
            mrc_train: None,
            mrc_dev: None,
            vocab: None,
            lexicon: None,
            checkpoint_dir: PathBuf::from("checkpoints"),
            sentiment_checkpoints: Vec::new(),
            match_checkpoints: Vec::new(),
            mrc_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrcSection {
    /// Tag-to-question template with one `{tag}` placeholder.
    pub template: String,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for MrcSection {
    fn default() -> Self {
        MrcSection {
            template: DEFAULT_TEMPLATE.to_string(),
            train: TrainConfig::for_task(Task::Mrc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub mode: PipelineMode,
    pub threshold: f64,
    pub voting: MatchVoting,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            mode: PipelineMode::Coarse,
            threshold: DEFAULT_THRESHOLD,
            voting: MatchVoting::Majority,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub k: usize,
    pub deltas: Vec<ParamDelta>,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            k: 5,
            deltas: vec![ParamDelta {
                param: HyperParam::LearningRate,
                factors: vec![0.5, 2.0],
            }],
        }
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, replaces the seed of every task section.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub sentiment: TrainConfig,
    #[serde(rename = "match")]
    pub matcher: TrainConfig,
    pub mrc: MrcSection,
    pub ensemble: EnsembleSpec,
    pub pipeline: PipelineSection,
    pub search: SearchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            paths: PathsConfig::default(),
            sentiment: TrainConfig::for_task(Task::Sentiment),
            matcher: TrainConfig::for_task(Task::Match),
            mrc: MrcSection::default(),
            ensemble: EnsembleSpec::default(),
            pipeline: PipelineSection::default(),
            search: SearchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.normalize();
        Ok(cfg)
    }

    /// Pins each section's task, copies the mrc template into the mrc
    /// training config and applies the global seed.
    fn normalize(&mut self) {
        self.sentiment.task = Task::Sentiment;
        self.matcher.task = Task::Match;
        self.mrc.train.task = Task::Mrc;
        self.mrc.train.question_template = self.mrc.template.clone();
        if let Some(s) = self.seed {
            for c in [&mut self.sentiment, &mut self.matcher, &mut self.mrc.train] {
                c.seed = s;
            }
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if seed.is_some() {
            self.seed = seed;
        }
        self.normalize();
        self
    }

    pub fn task_config(&self, task: Task) -> &TrainConfig {
        match task {
            Task::Sentiment => &self.sentiment,
            Task::Match => &self.matcher,
            Task::Mrc => &self.mrc.train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in [Task::Sentiment, Task::Match, Task::Mrc] {
            self.task_config(t).validate()?;
        }
        self.ensemble.validate()?;
        crate::tasks::check_threshold(self.pipeline.threshold)?;
        if self.search.k < 2 {
            return Err(Error::config("search.k must be at least 2"));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for o in [&mut p.train, &mut p.dev, &mut p.mrc_train, &mut p.mrc_dev, &mut p.vocab, &mut p.lexicon, &mut p.mrc_checkpoint] {
            if let Some(path) = o {
                fix(path);
            }
        }
        fix(&mut p.checkpoint_dir);
        p.sentiment_checkpoints.iter_mut().chain(&mut p.match_checkpoints).for_each(fix);
    }

    pub fn pipeline_config(&self, mode: PipelineMode) -> PipelineConfig {
        PipelineConfig {
            mode,
            threshold: self.pipeline.threshold,
            voting: self.pipeline.voting,
            question_template: self.mrc.template.clone(),
            max_span_len: self.mrc.train.max_span_len,
        }
    }
}

/// Versioned envelope around every command result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub result: Value,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Numerical(_) => 3,
        _ => 1,
    }
}

struct Outcome {
    command: &'static str,
    seed: Option<u64>,
    result: Value,
    code: i32,
}

impl Outcome {
    fn ok(command: &'static str, seed: Option<u64>, result: Value) -> Self {
        Outcome {
            command,
            seed,
            result,
            code: 0,
        }
    }
}

fn schema_for(task: Task) -> Schema {
    match task {
        Task::Mrc => Schema::Dataset2,
        Task::Sentiment | Task::Match => Schema::Dataset1,
    }
}

/// Loads a corpus and fails on the first invalid record.
fn load_strict(path: &Path, schema: Schema) -> Result<Vec<Document>> {
    let loaded = load_corpus(path, schema)?;
    if let Some(e) = loaded.report.errors.first() {
        return Err(Error::InvalidRecord {
            id: e.id.clone(),
            message: format!("{} line {}: {}", path.display(), e.line, e.message),
        });
    }
    Ok(loaded.documents)
}

/// Reads pipeline input: every record becomes a document, whatever fields it
/// carries, so that the output has one line per input line.
fn load_input(path: &Path) -> Result<Vec<Document>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = HashSet::new();
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: CorpusRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !ids.insert(r.id.clone()) {
            return Err(Error::InvalidRecord {
                id: r.id,
                message: "duplicate id".into(),
            });
        }
        let mut doc = Document::new(r.id, r.text);
        doc.sentiment = r.sentiment;
        doc.entity_list = r.entity_list;
        doc.key_entities = r.key_entities;
        doc.tag = r.tag;
        docs.push(doc);
    }
    Ok(docs)
}

fn load_predictions(path: &Path) -> Result<Vec<DocumentOutput>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::config(format!("no {what} path given on the command line or in [paths]")))
}

fn train_paths(cfg: &RunConfig, task: Task) -> (Option<PathBuf>, Option<PathBuf>) {
    match task {
        Task::Mrc => (cfg.paths.mrc_train.clone(), cfg.paths.mrc_dev.clone()),
        _ => (cfg.paths.train.clone(), cfg.paths.dev.clone()),
    }
}

fn task_datasets(cfg: &RunConfig, task: Task, train: Option<PathBuf>, dev: Option<PathBuf>) -> Result<(TaskDataset, TaskDataset)> {
    let (dt, dd) = train_paths(cfg, task);
    let train = required(train.or(dt), "training corpus")?;
    let dev = required(dev.or(dd), "dev corpus")?;
    let tc = cfg.task_config(task);
    let schema = schema_for(task);
    let tr = TaskDataset::from_documents(task, &load_strict(&train, schema)?, &tc.question_template)?;
    let dv = TaskDataset::from_documents(task, &load_strict(&dev, schema)?, &tc.question_template)?;
    Ok((tr, dv))
}

fn prebuilt_vocab(cfg: &RunConfig) -> Result<Option<Vocab>> {
    match &cfg.paths.vocab {
        Some(p) if p.exists() => Vocab::load(p).map(Some),
        _ => Ok(None),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Validate { corpus, schema } => {
            let loaded = load_corpus(&corpus, schema)?;
            let code = if loaded.report.is_clean() { 0 } else { 1 };
            Ok(Outcome {
                command: "validate",
                seed: None,
                result: to_value(&loaded.report),
                code,
            })
        }
        Command::BuildVocab { task, corpus, out } => {
            let tc = cfg.task_config(task);
            let path = required(corpus.or(train_paths(cfg, task).0), "training corpus")?;
            let docs = load_strict(&path, schema_for(task))?;
            let data = TaskDataset::from_documents(task, &docs, &tc.question_template)?;
            let vocab = build_task_vocab(&data, tc)?;
            let out = required(out.or(cfg.paths.vocab.clone()), "vocab output")?;
            vocab.save(&out)?;
            Ok(Outcome::ok(
                "build-vocab",
                None,
                json!({ "task": task.as_str(), "size": vocab.len(), "path": out }),
            ))
        }
        Command::Train { task, train, dev, out } => {
            let tc = cfg.task_config(task);
            let (tr, dv) = task_datasets(cfg, task, train, dev)?;
            let outcome = train_with_vocab(&tr, tc, &dv, prebuilt_vocab(cfg)?)?;
            let out = out.unwrap_or_else(|| cfg.paths.checkpoint_dir.join(format!("{}.ckpt", task.as_str())));
            write_file(&out, &outcome.checkpoint.to_bytes()?)?;
            Ok(Outcome::ok(
                "train",
                Some(tc.seed),
                json!({
                    "task": task.as_str(),
                    "checkpoint": out,
                    "best_epoch": outcome.best_epoch,
                    "dev_score": outcome.checkpoint.dev_score,
                    "skipped_examples": outcome.skipped_examples,
                    "epochs": outcome.history,
                }),
            ))
        }
        Command::Crossval { task, k, corpus } => {
            let tc = cfg.task_config(task);
            let path = required(corpus.or(train_paths(cfg, task).0), "training corpus")?;
            let docs = load_strict(&path, schema_for(task))?;
            let cv = cross_validate(&docs, tc, k)?;
            Ok(Outcome::ok(
                "crossval",
                Some(tc.seed),
                json!({ "task": task.as_str(), "k": k, "folds": cv.folds, "mean_score": cv.mean_score }),
            ))
        }
        Command::Ensemble { task, train, dev, out_dir } => {
            let tc = cfg.task_config(task);
            let (tr, dv) = task_datasets(cfg, task, train, dev)?;
            let sel = ensemble_train_select(&tr, tc, &cfg.ensemble, &dv)?;
            let dir = out_dir.unwrap_or_else(|| cfg.paths.checkpoint_dir.clone());
            let mut written = Vec::new();
            for c in &sel.kept {
                let p = dir.join(format!("{}-seed{}.ckpt", task.as_str(), c.seed));
                write_file(&p, &c.to_bytes()?)?;
                written.push(p);
            }
            Ok(Outcome::ok(
                "ensemble",
                Some(tc.seed),
                json!({ "task": task.as_str(), "top_m": cfg.ensemble.top_m, "members": sel.members, "checkpoints": written }),
            ))
        }
        Command::Pipeline { input, output, mode } => {
            let mode = mode.unwrap_or(cfg.pipeline.mode);
            let docs = load_input(&input)?;
            let default = |t: &str| vec![cfg.paths.checkpoint_dir.join(format!("{t}.ckpt"))];
            let or_default = |v: &Vec<PathBuf>, t: &str| if v.is_empty() { default(t) } else { v.clone() };
            let load_all = |paths: Vec<PathBuf>| paths.iter().map(Checkpoint::load).collect::<Result<Vec<_>>>();
            let sentiment = load_all(or_default(&cfg.paths.sentiment_checkpoints, "sentiment"))?;
            let (matcher, mrc) = match mode {
                PipelineMode::Coarse => (load_all(or_default(&cfg.paths.match_checkpoints, "match"))?, None),
                PipelineMode::Fine => {
                    let p = cfg.paths.mrc_checkpoint.clone().unwrap_or_else(|| default("mrc").remove(0));
                    (Vec::new(), Some(Checkpoint::load(p)?))
                }
            };
            let lexicon = cfg.paths.lexicon.as_ref().map(Lexicon::load).transpose()?;
            let models = PipelineModels {
                sentiment: &sentiment,
                matcher: &matcher,
                mrc: mrc.as_ref(),
                lexicon: lexicon.as_ref(),
            };
            let result = run_pipeline(&docs, &models, &cfg.pipeline_config(mode))?;
            let mut out = Vec::new();
            for o in &result.outputs {
                serde_json::to_writer(&mut out, o).expect("outputs serialize");
                out.push(b'\n');
            }
            write_file(&output, &out)?;
            Ok(Outcome::ok(
                "pipeline",
                cfg.seed,
                json!({ "mode": mode, "output": output, "counters": result.counters }),
            ))
        }
        Command::Evaluate { predictions, gold, task } => {
            let preds = load_predictions(&predictions)?;
            let gold = load_strict(&gold, schema_for(task))?;
            let scores = score_predictions(&preds, &gold)?;
            let metric = match task {
                Task::Sentiment => scores.sentiment_accuracy,
                Task::Match => scores.entities.map(|e| e.f1),
                Task::Mrc => scores.span_exact_match,
            }
            .ok_or_else(|| Error::input(format!("predictions and gold support no {} metric", task.as_str())))?;
            Ok(Outcome::ok(
                "evaluate",
                None,
                json!({ "task": task.as_str(), "metric": metric, "scores": scores }),
            ))
        }
        Command::Search { task, k, corpus } => {
            let tc = cfg.task_config(task);
            let k = k.unwrap_or(cfg.search.k);
            let path = required(corpus.or(train_paths(cfg, task).0), "training corpus")?;
            let docs = load_strict(&path, schema_for(task))?;
            let res = neighborhood_search(tc, &cfg.search.deltas, &docs, k)?;
            let table: Vec<Value> = res
                .table
                .iter()
                .map(|r| {
                    let factors: serde_json::Map<String, Value> =
                        r.factors.iter().map(|(p, f)| (p.as_str().to_string(), json!(f))).collect();
                    json!({ "factors": factors, "changed": r.changed, "fold_scores": r.fold_scores, "mean_score": r.mean_score })
                })
                .collect();
            Ok(Outcome::ok(
                "search",
                Some(tc.seed),
                json!({ "task": task.as_str(), "k": k, "best_row": res.best_row, "best": res.best, "table": table }),
            ))
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    Ok(cfg)
}

fn run_cli(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(cli.config.as_deref())?.with_seed(cli.seed);
    cfg.validate()?;
    let outcome = execute(cli.command, &cfg)?;
    let report = Report {
        format_version: REPORT_FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: outcome.command.to_string(),
        config_hash: cfg.hash(),
        seed: outcome.seed,
        result: outcome.result,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    match &cli.report {
        Some(p) => write_file(p, text.as_bytes())?,
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(outcome.code)
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_cli(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
