//! The `cre` command line.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cre_core::annotate::build_cre;
use cre_core::corpus::{dataset_stats, enumerate_pairs, expand_confusion_set, MulticlassInstance};
use cre_core::eval::{
    binarize_multiclass, build_tacred_plus, score_binary, score_items, EvalReport, Polarity,
};
use cre_core::inoculate::{augment_train, split_cre, Half, SplitManifest, SplitMode};
use cre_core::miner::{export_tasks, sample_batches, verify_group, SuspiciousGroup};
use cre_core::predict::{EventOracle, EventTypeOracle, GoldIndex, Predictor, TypeOracle};
use cre_core::qa::{qa_classify, MatchMode};
use cre_core::{CandidateInstance, CreDataset, SchemaConfig, Sentence};
use serde::{Deserialize, Serialize};

use crate::annotation::{self, AnnotationService};
use crate::error::{Error, Result};
use crate::formats::{self, InstanceRecord, SampleFile};
use crate::parallel::mine_parallel;
use crate::predictors::{open_predictor, open_qa, PredictorContext, PredictorSpec, QaSpec};
use crate::remote::RemoteOptions;
use crate::report;
use crate::schema_file::resolve_schema;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "cre",
    version,
    about = "Build and score relation-extraction challenge sets"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with defaults for any of the global flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Relation schema file (default: $CRE_SCHEMA, else the built-in TACRED schema).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Restrict the schema to a named relation profile (e.g. `cre`).
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Worker threads for mining (default: available parallelism; 1 = sequential).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Instances per remote request.
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Concurrent remote requests.
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
    /// Retries per remote request after the first attempt.
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// Remote request timeout in milliseconds.
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// Print reports as JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find sentences where the seed model predicts one relation for several pairs.
    Mine {
        /// Sentence corpus (JSON Lines with typed mentions).
        #[arg(long)]
        corpus: PathBuf,
        /// Seed model: file:PATH, remote:URL, oracle-type, oracle-event:GOLD, oracle-event-type:GOLD.
        #[arg(long)]
        seed: PredictorSpec,
        /// Sentences per predictor call.
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a per-relation sample of suspicious sentences.
    Sample {
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        per_relation: Option<usize>,
        #[arg(long)]
        rng_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a sample into annotation tasks.
    ExportTasks {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the annotation HTTP service.
    ServeAnnotation {
        #[arg(long)]
        tasks: PathBuf,
        /// Label log (created if absent, replayed if present).
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        addr: Option<SocketAddr>,
        /// Directory of static UI assets served for non-API paths.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Guideline version recorded when a label request does not name one.
        #[arg(long)]
        guideline_version: Option<String>,
    },
    /// Adjudicate a label log and write the challenge set.
    BuildCre {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Challenge-set statistics.
    Stats {
        #[arg(long)]
        cre: PathBuf,
    },
    /// Score a predictor on a challenge set, or predictions on binarized TACRED.
    Eval {
        /// Challenge set, or a TACRED file with --binarized-tacred.
        #[arg(long)]
        gold: PathBuf,
        /// Predictor spec, or a bare path to a prediction file.
        #[arg(long, value_parser = parse_pred)]
        pred: PredictorSpec,
        #[arg(long)]
        binarized_tacred: bool,
        /// Add challenge-set instances of one polarity (needs --cre).
        #[arg(long, requires = "binarized_tacred", requires = "cre")]
        plus: Option<PolarityArg>,
        #[arg(long)]
        cre: Option<PathBuf>,
        /// Split manifest; with --eval-half only that half is scored.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        eval_half: Option<HalfArg>,
        /// Refuse to score any instance of this manifest half.
        #[arg(long, requires = "manifest")]
        train_half: Option<HalfArg>,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score an extractive QA model on a challenge set through question templates.
    QaEval {
        #[arg(long)]
        gold: PathBuf,
        /// file:PATH (answers keyed by query id) or remote:URL.
        #[arg(long)]
        qa: QaSpec,
        #[arg(long = "match")]
        match_mode: Option<MatchArg>,
        /// Write per-instance verdicts (JSON Lines).
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the predictions of a gold-informed heuristic.
    HeuristicPredict {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        oracle: OracleArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a challenge set into two stratified halves.
    InoculateSplit {
        #[arg(long)]
        cre: PathBuf,
        #[arg(long)]
        rng_seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Instance)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append one half of a challenge set to a TACRED training file.
    ExportTrain {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        cre: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        half: HalfArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// List every type-compatible candidate of every sentence.
    EnumeratePairs {
        #[arg(long)]
        corpus: PathBuf,
        /// Default: standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the candidates that share a given candidate's types and relation.
    ExpandConfusion {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        instance: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolarityArg {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HalfArg {
    A,
    B,
}

impl From<HalfArg> for Half {
    fn from(h: HalfArg) -> Half {
        match h {
            HalfArg::A => Half::A,
            HalfArg::B => Half::B,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MatchArg {
    Normalized,
    Strict,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleArg {
    Event,
    Type,
    EventType,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Instance,
    Sentence,
}

fn parse_pred(s: &str) -> std::result::Result<PredictorSpec, String> {
    let has_kind = s
        .split_once(':')
        .is_some_and(|(k, _)| ["file", "remote", "oracle-event", "oracle-event-type"].contains(&k))
        || s == "oracle-type";
    if has_kind {
        s.parse()
    } else {
        Ok(PredictorSpec::File(s.into()))
    }
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema: Option<PathBuf>,
    pub profile: Option<String>,
    pub rng_seed: Option<u64>,
    pub workers: Option<usize>,
    pub chunk_size: Option<usize>,
    pub per_relation: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub timeout_ms: Option<u64>,
    pub guideline_version: Option<String>,
    #[serde(rename = "match")]
    pub match_mode: Option<MatchArg>,
    pub addr: Option<SocketAddr>,
}

pub const DEFAULT_RNG_SEED: u64 = 13;
pub const DEFAULT_PER_RELATION: usize = 40;
pub const DEFAULT_CHUNK_SIZE: usize = 256;
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_GUIDELINE: &str = "v1";

/// Fully resolved settings of one run, logged before any work starts.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub version: &'static str,
    pub command: String,
    pub schema: Option<PathBuf>,
    pub profile: Option<String>,
    pub relations: usize,
    pub rng_seed: u64,
    pub workers: usize,
    pub chunk_size: usize,
    pub per_relation: usize,
    pub remote: RemoteOptions,
    pub guideline_version: String,
    #[serde(rename = "match")]
    pub match_mode: MatchArg,
    pub addr: SocketAddr,
}

struct Ctx {
    run: RunConfig,
    /// The whole schema: any relation a predictor may output.
    full: SchemaConfig,
    /// The schema restricted to the selected profile.
    active: SchemaConfig,
    json: bool,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::record(path, 0, e.message()))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Mine { .. } => "mine",
        Command::Sample { .. } => "sample",
        Command::ExportTasks { .. } => "export-tasks",
        Command::ServeAnnotation { .. } => "serve-annotation",
        Command::BuildCre { .. } => "build-cre",
        Command::Stats { .. } => "stats",
        Command::Eval { .. } => "eval",
        Command::QaEval { .. } => "qa-eval",
        Command::HeuristicPredict { .. } => "heuristic-predict",
        Command::InoculateSplit { .. } => "inoculate-split",
        Command::ExportTrain { .. } => "export-train",
        Command::EnumeratePairs { .. } => "enumerate-pairs",
        Command::ExpandConfusion { .. } => "expand-confusion",
    }
}

fn resolve(cli: &Cli) -> Result<Ctx> {
    let g = &cli.global;
    let file = load_file_config(g.config.as_deref())?;
    let schema_path = g.schema.clone().or(file.schema.clone());
    let profile = g.profile.clone().or(file.profile.clone());
    let full = resolve_schema(schema_path.as_deref(), None)?;
    let active = match &profile {
        Some(p) => full.with_profile(p)?,
        None => full.clone(),
    };
    let (rng_seed, per_relation, chunk_size, guideline, addr, match_mode) = match &cli.command {
        Command::Sample {
            rng_seed,
            per_relation,
            ..
        } => (*rng_seed, *per_relation, None, None, None, None),
        Command::InoculateSplit { rng_seed, .. } => (*rng_seed, None, None, None, None, None),
        Command::Mine { chunk_size, .. } => (None, None, *chunk_size, None, None, None),
        Command::ServeAnnotation {
            addr,
            guideline_version,
            ..
        } => (None, None, None, guideline_version.clone(), *addr, None),
        Command::QaEval { match_mode, .. } => (None, None, None, None, None, *match_mode),
        _ => (None, None, None, None, None, None),
    };
    let defaults = RemoteOptions::default();
    let remote = RemoteOptions {
        batch_size: g
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        max_in_flight: g
            .max_in_flight
            .or(file.max_in_flight)
            .unwrap_or(defaults.max_in_flight),
        retries: g.retries.or(file.retries).unwrap_or(defaults.retries),
        timeout: g
            .timeout_ms
            .or(file.timeout_ms)
            .map(Duration::from_millis)
            .unwrap_or(defaults.timeout),
        backoff: defaults.backoff,
    };
    let run = RunConfig {
        version: VERSION,
        command: command_name(&cli.command).into(),
        relations: active.relations.len(),
        schema: schema_path
            .or_else(|| std::env::var_os(crate::schema_file::SCHEMA_ENV).map(PathBuf::from)),
        profile,
        rng_seed: rng_seed.or(file.rng_seed).unwrap_or(DEFAULT_RNG_SEED),
        workers: g
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        chunk_size: chunk_size.or(file.chunk_size).unwrap_or(DEFAULT_CHUNK_SIZE),
        per_relation: per_relation
            .or(file.per_relation)
            .unwrap_or(DEFAULT_PER_RELATION),
        remote,
        guideline_version: guideline
            .or(file.guideline_version)
            .unwrap_or_else(|| DEFAULT_GUIDELINE.into()),
        match_mode: match_mode
            .or(file.match_mode)
            .unwrap_or(MatchArg::Normalized),
        addr: addr
            .or(file.addr)
            .unwrap_or_else(|| DEFAULT_ADDR.parse().expect("valid default address")),
    };
    Ok(Ctx {
        run,
        full,
        active,
        json: g.json,
    })
}

/// Entry point used by the binary: parses arguments, runs, and turns errors
/// into a one-line JSON object on stderr.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() },
                "version": VERSION,
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = resolve(&cli)?;
    log::info!(
        "cre {VERSION} config {}",
        serde_json::to_string(&ctx.run).expect("config serializes")
    );
    match cli.command {
        Command::Mine {
            corpus, seed, out, ..
        } => mine(&ctx, &corpus, &seed, &out),
        Command::Sample { groups, out, .. } => sample(&ctx, &groups, &out),
        Command::ExportTasks {
            sample,
            corpus,
            out,
        } => export(&ctx, &sample, &corpus, &out),
        Command::ServeAnnotation {
            tasks,
            log,
            static_dir,
            ..
        } => {
            let tasks = formats::load_tasks(&tasks)?;
            let service = AnnotationService::open(tasks, &log, &ctx.run.guideline_version)?;
            annotation::serve(ctx.run.addr, service, static_dir.as_deref())
        }
        Command::BuildCre { tasks, log, out } => build(&ctx, &tasks, &log, &out),
        Command::Stats { cre } => {
            let cre = formats::load_cre(&cre)?;
            let stats = dataset_stats(&cre, &ctx.active);
            print_report(&ctx, &stats, || report::stats_table(&stats))
        }
        Command::Eval {
            gold,
            pred,
            binarized_tacred,
            plus,
            cre,
            manifest,
            eval_half,
            train_half,
            report,
        } => {
            let manifest = manifest
                .map(|m| formats::read_json::<SplitManifest>(&m))
                .transpose()?;
            let split = Split {
                manifest: manifest.as_ref(),
                eval_half: eval_half.map(Half::from),
                train_half: train_half.map(Half::from),
            };
            let out = if binarized_tacred {
                eval_tacred(&ctx, &gold, &pred, plus, cre.as_deref(), &split)?
            } else {
                eval_cre(&ctx, &gold, &pred, &split)?
            };
            finish_report(&ctx, &out, report.as_deref())
        }
        Command::QaEval {
            gold,
            qa,
            verdicts,
            report,
            ..
        } => {
            let out = qa_eval(&ctx, &gold, &qa, verdicts.as_deref())?;
            finish_report(&ctx, &out, report.as_deref())
        }
        Command::HeuristicPredict { gold, oracle, out } => heuristic(&ctx, &gold, oracle, &out),
        Command::InoculateSplit { cre, mode, out, .. } => {
            let cre = formats::load_cre(&cre)?;
            let mode = match mode {
                ModeArg::Instance => SplitMode::Instance,
                ModeArg::Sentence => SplitMode::Sentence,
            };
            let manifest = split_cre(&cre, ctx.run.rng_seed, mode);
            log::info!(
                "half a: {} instance(s), half b: {} instance(s)",
                manifest.half_a.len(),
                manifest.half_b.len()
            );
            formats::write_json(&out, &manifest)
        }
        Command::ExportTrain {
            train,
            cre,
            manifest,
            half,
            out,
        } => {
            let train = formats::load_tacred(&train)?;
            let cre = formats::load_cre(&cre)?;
            let manifest: SplitManifest = formats::read_json(&manifest)?;
            let before = train.len();
            let augmented = augment_train(
                train,
                &cre,
                manifest.half(half.into()),
                &ctx.full.no_relation_label,
            )?;
            log::info!(
                "appended {} instance(s) to {before}",
                augmented.len() - before
            );
            formats::write_tacred(&out, &augmented)
        }
        Command::EnumeratePairs { corpus, out } => {
            let corpus = formats::load_corpus(&corpus)?;
            let records = corpus.iter().flat_map(|s| {
                enumerate_pairs(s, &ctx.active)
                    .into_iter()
                    .map(move |i| InstanceRecord::from_instance(&i, &s.tokens))
            });
            emit(out.as_deref(), &formats::jsonl_string(records))
        }
        Command::ExpandConfusion {
            corpus,
            instance,
            out,
        } => {
            let corpus = formats::load_corpus(&corpus)?;
            let (sentence, target) = corpus
                .iter()
                .find_map(|s| {
                    enumerate_pairs(s, &ctx.active)
                        .into_iter()
                        .find(|c| c.instance_id() == instance)
                        .map(|c| (s, c))
                })
                .ok_or_else(|| {
                    Error::Usage(format!(
                        "instance `{instance}` is not a candidate of any sentence"
                    ))
                })?;
            let set = expand_confusion_set(sentence, &target, &ctx.active)?;
            let records = set
                .iter()
                .map(|i| InstanceRecord::from_instance(i, &sentence.tokens));
            emit(out.as_deref(), &formats::jsonl_string(records))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn print_report<T: Serialize>(ctx: &Ctx, value: &T, table: impl FnOnce() -> String) -> Result<()> {
    if ctx.json {
        emit(None, &formats::json_string(value))
    } else {
        emit(None, &table())
    }
}

fn token_map<'a>(
    sentences: impl IntoIterator<Item = &'a Sentence>,
) -> Arc<BTreeMap<String, Vec<String>>> {
    Arc::new(
        sentences
            .into_iter()
            .map(|s| (s.sentence_id.clone(), s.tokens.clone()))
            .collect(),
    )
}

fn predictor_ctx<'a>(
    ctx: &'a Ctx,
    tokens: Arc<BTreeMap<String, Vec<String>>>,
) -> PredictorContext<'a> {
    PredictorContext {
        schema: &ctx.full,
        tokens,
        remote: ctx.run.remote.clone(),
    }
}

fn mine(ctx: &Ctx, corpus: &Path, seed: &PredictorSpec, out: &Path) -> Result<()> {
    let corpus = formats::load_corpus(corpus)?;
    let predictor = open_predictor(seed, &predictor_ctx(ctx, token_map(&corpus)))?;
    let groups = mine_parallel(
        &corpus,
        &predictor,
        &ctx.active,
        ctx.run.chunk_size,
        ctx.run.workers,
    )?;
    let by_id: BTreeMap<&str, &Sentence> =
        corpus.iter().map(|s| (s.sentence_id.as_str(), s)).collect();
    for g in &groups {
        let ok = by_id
            .get(g.sentence_id.as_str())
            .is_some_and(|s| verify_group(g, s, &ctx.active, |_| true));
        if !ok {
            return Err(Error::Usage(format!(
                "internal check failed for group {} / {}",
                g.sentence_id, g.relation
            )));
        }
    }
    let sentences: std::collections::BTreeSet<&str> =
        groups.iter().map(|g| g.sentence_id.as_str()).collect();
    log::info!(
        "{} suspicious group(s) in {} of {} sentence(s)",
        groups.len(),
        sentences.len(),
        corpus.len()
    );
    formats::write_jsonl(out, &groups)
}

fn sample(ctx: &Ctx, groups: &Path, out: &Path) -> Result<()> {
    let groups: Vec<SuspiciousGroup> = formats::read_jsonl(groups)?;
    let relations = sample_batches(&groups, ctx.run.per_relation, ctx.run.rng_seed);
    for (rel, batch) in &relations {
        if batch.shortfall {
            log::warn!(
                "{rel}: only {} suspicious sentence(s), {} requested",
                batch.available,
                ctx.run.per_relation
            );
        }
    }
    formats::write_json(
        out,
        &SampleFile {
            rng_seed: ctx.run.rng_seed,
            per_relation: ctx.run.per_relation,
            relations,
        },
    )
}

fn export(ctx: &Ctx, sample: &Path, corpus: &Path, out: &Path) -> Result<()> {
    let sample: SampleFile = formats::read_json(sample)?;
    let corpus: BTreeMap<String, Sentence> = formats::load_corpus(corpus)?
        .into_iter()
        .map(|s| (s.sentence_id.clone(), s))
        .collect();
    let tasks = export_tasks(&sample.relations, &corpus, &ctx.active)?;
    log::info!("{} task(s)", tasks.len());
    formats::write_tasks(out, &tasks)
}

#[derive(Debug, Serialize)]
struct BuildSummary {
    included: usize,
    excluded_conflicted: usize,
    excluded_single: usize,
    excluded_unlabeled: usize,
    panel_agreement: Option<f64>,
    pairwise_agreement: Option<f64>,
    stats: cre_core::corpus::DatasetStats,
}

fn build(ctx: &Ctx, tasks: &Path, log: &Path, out: &Path) -> Result<()> {
    let tasks = formats::load_tasks(tasks)?;
    let events = annotation::read_log(log)?;
    let ledger = cre_core::annotate::LabelLedger::replay(tasks, events)?;
    let adjudication = ledger.adjudicate();
    let built = build_cre(&adjudication, ledger.tasks(), &ctx.active)?;
    formats::write_cre(out, &built.dataset)?;
    let summary = BuildSummary {
        included: built.included,
        excluded_conflicted: built.excluded_conflicted,
        excluded_single: built.excluded_single,
        excluded_unlabeled: built.excluded_unlabeled,
        panel_agreement: adjudication.panel_agreement,
        pairwise_agreement: adjudication.pairwise_agreement,
        stats: built.stats,
    };
    print_report(ctx, &summary, || {
        format!(
            "included {}  conflicted {}  single {}  unlabeled {}  agreement {}%\n\n{}",
            summary.included,
            summary.excluded_conflicted,
            summary.excluded_single,
            summary.excluded_unlabeled,
            report::fmt1(summary.panel_agreement.map(|a| 100.0 * a)),
            report::stats_table(&summary.stats)
        )
    })
}

struct Split<'a> {
    manifest: Option<&'a SplitManifest>,
    eval_half: Option<Half>,
    train_half: Option<Half>,
}

impl Split<'_> {
    /// Keeps only the evaluation half (if any) and refuses training-half ids.
    fn apply(&self, instances: Vec<CandidateInstance>) -> Result<Vec<CandidateInstance>> {
        let Some(m) = self.manifest else {
            return Ok(instances);
        };
        let instances = match self.eval_half {
            Some(h) => {
                let keep: std::collections::BTreeSet<&str> =
                    m.half(h).iter().map(String::as_str).collect();
                instances
                    .into_iter()
                    .filter(|i| keep.contains(i.instance_id()))
                    .collect()
            }
            None => instances,
        };
        if let Some(train) = self.train_half {
            m.check_uncontaminated(train, instances.iter().map(|i| i.instance_id()))?;
        }
        Ok(instances)
    }
}

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    pub gold: PathBuf,
    pub predictor: String,
    pub protocol: String,
    pub report: EvalReport,
}

fn finish_report(ctx: &Ctx, out: &EvalOutput, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        formats::write_json(p, out)?;
    }
    print_report(ctx, out, || {
        format!(
            "{} on {} ({})\n{}",
            out.predictor,
            out.gold.display(),
            out.protocol,
            report::eval_table(&out.report)
        )
    })
}

fn eval_cre(ctx: &Ctx, gold: &Path, pred: &PredictorSpec, split: &Split<'_>) -> Result<EvalOutput> {
    let cre = formats::load_cre(gold)?;
    let instances = split.apply(cre.instances().to_vec())?;
    let predictor = open_predictor(pred, &predictor_ctx(ctx, token_map(cre.sentences())))?;
    let unlabeled: Vec<CandidateInstance> =
        instances.iter().map(|i| i.clone().without_gold()).collect();
    let predictions = predictor.predict_batch(&unlabeled)?;
    Ok(EvalOutput {
        gold: gold.into(),
        predictor: pred.to_string(),
        protocol: "challenge set".into(),
        report: score_binary(&instances, &predictions)?,
    })
}

fn eval_tacred(
    ctx: &Ctx,
    gold: &Path,
    pred: &PredictorSpec,
    plus: Option<PolarityArg>,
    cre: Option<&Path>,
    split: &Split<'_>,
) -> Result<EvalOutput> {
    let PredictorSpec::File(pred_path) = pred else {
        return Err(Error::Usage(
            "binarized TACRED scoring needs a prediction file".into(),
        ));
    };
    let tacred: Vec<MulticlassInstance> = formats::load_tacred(gold)?
        .iter()
        .map(|r| r.to_instance().map(|(_, i)| i))
        .collect::<std::result::Result<_, _>>()?;
    let (items, protocol) = match plus {
        None => (
            binarize_multiclass(&tacred, &ctx.active),
            "binarized TACRED".to_string(),
        ),
        Some(p) => {
            let cre_path = cre.ok_or_else(|| Error::Usage("--plus needs --cre".into()))?;
            let cre = formats::load_cre(cre_path)?;
            let kept = split.apply(cre.instances().to_vec())?;
            let cre = restrict(&cre, &kept)?;
            let polarity = match p {
                PolarityArg::Positive => Polarity::Positive,
                PolarityArg::Negative => Polarity::Negative,
            };
            (
                build_tacred_plus(&tacred, &cre, polarity, &ctx.active)?,
                format!("binarized TACRED + challenge-set {:?}", polarity).to_lowercase(),
            )
        }
    };
    let predicted: BTreeMap<String, Option<String>> =
        formats::load_predictions(pred_path, &ctx.full.no_relation_label)?
            .into_iter()
            .map(|(id, raw)| (id, raw.predicted_relation))
            .collect();
    for rel in predicted.values().flatten() {
        if !ctx.full.contains(rel) {
            return Err(cre_core::predict::PredictError::UnknownRelation(rel.clone()).into());
        }
    }
    Ok(EvalOutput {
        gold: gold.into(),
        predictor: pred.to_string(),
        protocol,
        report: score_items(&items, &predicted)?,
    })
}

fn restrict(cre: &CreDataset, kept: &[CandidateInstance]) -> Result<CreDataset> {
    if kept.len() == cre.len() {
        return Ok(cre.clone());
    }
    let ids: std::collections::BTreeSet<&str> = kept.iter().map(|i| i.instance_id()).collect();
    Ok(CreDataset::from_entries(
        cre.entries()
            .filter(|e| ids.contains(e.instance.instance_id())),
    )?)
}

fn qa_eval(ctx: &Ctx, gold: &Path, qa: &QaSpec, verdicts_out: Option<&Path>) -> Result<EvalOutput> {
    let cre = formats::load_cre(gold)?;
    let predictor = open_qa(qa, ctx.run.remote.clone())?;
    let sentences: BTreeMap<String, Sentence> = cre
        .sentences()
        .map(|s| (s.sentence_id.clone(), s.clone()))
        .collect();
    let mode = match ctx.run.match_mode {
        MatchArg::Normalized => MatchMode::Normalized,
        MatchArg::Strict => MatchMode::Strict,
    };
    let verdicts = qa_classify(cre.instances(), &sentences, &predictor, &ctx.full, mode)?;
    if let Some(path) = verdicts_out {
        formats::write_jsonl(path, &verdicts)?;
    }
    let predictions: Vec<_> = cre
        .instances()
        .iter()
        .zip(&verdicts)
        .map(|(inst, v)| v.to_prediction(inst, predictor.id()))
        .collect();
    Ok(EvalOutput {
        gold: gold.into(),
        predictor: predictor.id().into(),
        protocol: format!("question answering, {:?} matching", ctx.run.match_mode).to_lowercase(),
        report: score_binary(cre.instances(), &predictions)?,
    })
}

fn heuristic(ctx: &Ctx, gold: &Path, oracle: OracleArg, out: &Path) -> Result<()> {
    let cre = formats::load_cre(gold)?;
    let index = GoldIndex::from_instances(cre.instances());
    let predictor: Box<dyn Predictor> = match oracle {
        OracleArg::Event => Box::new(EventOracle { gold: index }),
        OracleArg::Type => Box::new(TypeOracle {
            schema: ctx.full.clone(),
        }),
        OracleArg::EventType => Box::new(EventTypeOracle {
            gold: index,
            schema: ctx.full.clone(),
        }),
    };
    let unlabeled: Vec<CandidateInstance> = cre
        .instances()
        .iter()
        .map(|i| i.clone().without_gold())
        .collect();
    let predictions = predictor.predict_batch(&unlabeled)?;
    formats::write_predictions(out, &predictions, &ctx.full.no_relation_label)?;
    let report = score_binary(cre.instances(), &predictions)?;
    let output = EvalOutput {
        gold: gold.into(),
        predictor: predictor.id().into(),
        protocol: "challenge set".into(),
        report,
    };
    finish_report(ctx, &output, None)
}
