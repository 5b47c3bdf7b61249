use std::io::Write;
use std::path::{Path, PathBuf};

use adi_core::eval::{self, report, EvalReport, RankHistogram};
use adi_core::extract::{self, WindowPolicy, DEFAULT_K};
use adi_core::rerank::{
    self, preset, preset_benchmark, train, FeatureSet, ModelCoefficients, TrainOptions,
};
use adi_core::{GoldSet, NBestList, RerankedList, SuffixIndex};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::formats::{self, read_text};

#[derive(Debug, Parser)]
#[command(
    name = "adi",
    version,
    about = "Abbreviation definition extraction, reranking and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract SF/LF pairs as TSV, or n-best candidate lists as JSONL with --nbest.
    Extract(ExtractArgs),
    /// Build a suffix-array index over a corpus.
    Index(IndexArgs),
    /// Rescore n-best lists with a logistic model.
    Rerank(RerankArgs),
    /// Fit a reranking model.
    Train(TrainArgs),
    /// Score predictions against gold pairs.
    Eval(EvalArgs),
    /// Print the built-in models as JSON.
    Presets,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Emit up to K candidates per definition site as JSONL.
    #[arg(long, value_name = "K")]
    pub nbest: Option<usize>,
    /// Fixed window size in tokens instead of min(|sf|+5, 2|sf|).
    #[arg(long, value_name = "N")]
    pub max_window: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Lowercase the corpus and all queries.
    #[arg(long)]
    pub case_fold: bool,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    pub nbest: PathBuf,
    /// Preset id 1-12 or a model JSON file written by `train`.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled instances, or n-best lists when --gold is given.
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub features: u8,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, requires = "gold")]
    pub index: Option<PathBuf>,
    #[arg(long, default_value_t = TrainOptions::default().l2)]
    pub l2: f64,
    #[arg(long, default_value_t = TrainOptions::default().tol)]
    pub tol: f64,
    #[arg(long, default_value_t = TrainOptions::default().max_iter)]
    pub max_iter: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    All,
    F1,
    Rank,
    Charmatch,
    Confidence,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("system").required(true).args(["predictions", "reranked", "nbest"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Pair TSV as written by `extract`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// JSONL as written by `rerank`.
    #[arg(long)]
    pub reranked: Option<PathBuf>,
    /// N-best JSONL; rank 0 is taken as the prediction.
    #[arg(long)]
    pub nbest: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub reports: Vec<ReportKind>,
    /// Minimum number of rank histogram bins.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Write the report JSON to PATH, or to standard output with `-`.
    #[arg(long, value_name = "PATH")]
    pub json: Option<String>,
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(a) => cmd_extract(&a, out),
        Command::Index(a) => cmd_index(&a, out, err),
        Command::Rerank(a) => cmd_rerank(&a, out, err),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Presets => cmd_presets(out),
    }
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(p) => formats::write_text(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn warn(err: &mut dyn Write, msg: &str) {
    let _ = writeln!(err, "warning: {msg}");
}

pub fn cmd_extract(a: &ExtractArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let policy = match a.max_window {
        Some(0) => return Err(CliError::Data("--max-window must be at least 1".into())),
        Some(n) => WindowPolicy::Fixed(n),
        None => WindowPolicy::ShortFormRelative,
    };
    let docs = formats::read_documents(&a.inputs)?;
    let mut text = String::new();
    match a.nbest {
        Some(0) => return Err(CliError::Data("--nbest must be at least 1".into())),
        Some(k) => {
            for doc in &docs {
                for list in extract::nbest_for_document(doc, k, policy) {
                    text.push_str(&formats::nbest_line(&list));
                    text.push('\n');
                }
            }
        }
        None => {
            for (doc_id, pairs) in extract::extract_corpus(&docs, policy) {
                for p in &pairs {
                    text.push_str(&formats::pair_row(&doc_id, p)?);
                }
            }
        }
    }
    emit(a.output.as_deref(), &text, out)
}

pub fn cmd_index(a: &IndexArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut docs = formats::read_documents(&a.corpus)?;
    docs.retain(|d| {
        let keep = !d.text.is_empty();
        if !keep {
            warn(err, &format!("skipping empty document `{}`", d.id));
        }
        keep
    });
    let index_err = |source| CliError::Index {
        path: a.output.clone(),
        source,
    };
    let index = SuffixIndex::build(&docs, a.case_fold).map_err(index_err)?;
    index.save(&a.output).map_err(index_err)?;
    let _ = writeln!(
        out,
        "corpus size: {} bytes, documents: {}, suffixes: {}",
        index.corpus_len(),
        index.doc_count(),
        index.len()
    );
    Ok(())
}

fn load_index(path: &Path) -> Result<SuffixIndex, CliError> {
    SuffixIndex::load(path).map_err(|source| CliError::Index {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(model: &str) -> Result<ModelCoefficients, CliError> {
    if let Ok(id) = model.parse::<u32>() {
        return preset(id).map_err(|e| CliError::Data(format!("--model {model}: {e}")));
    }
    let path = Path::new(model);
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::parse(path, e.line(), e.to_string()))
}

pub fn cmd_rerank(
    a: &RerankArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let index = a.index.as_deref().map(load_index).transpose()?;
    if model.feature_set.uses_freq() && index.is_none() {
        warn(
            err,
            "model uses corpus frequency but no --index was given; frequency is treated as 0",
        );
    }
    let text = read_text(&a.nbest)?;
    let mut result = String::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            result.push('\n');
            continue;
        }
        let object: serde_json::Map<String, Value> =
            serde_json::from_str(line).map_err(|e| CliError::parse(&a.nbest, n, e.to_string()))?;
        let list = formats::parse_nbest_line(&a.nbest, n, line)?;
        let reranked = rerank::rerank(&list, &model, index.as_ref());
        result.push_str(&formats::augment_line(object, &reranked));
        result.push('\n');
    }
    emit(a.output.as_deref(), &result, out)
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let fs = FeatureSet::from_size(a.features).expect("clap restricts --features to 1..=3");
    let data = match &a.gold {
        Some(gold_path) => {
            let (gold, warnings) = formats::read_gold(gold_path)?;
            for w in warnings {
                warn(err, &w);
            }
            let lists = formats::read_nbest(&a.input)?;
            check_known(
                &lists.iter().map(|l| l.doc_id.as_str()).collect::<Vec<_>>(),
                &gold,
            )?;
            let index = a.index.as_deref().map(load_index).transpose()?;
            if fs.uses_freq() && index.is_none() {
                warn(
                    err,
                    "feature set 3 without --index: frequency is 0 for every candidate",
                );
            }
            rerank::label_instances(&lists, &gold, index.as_ref())
        }
        None => formats::read_instances(&a.input)?,
    };
    let positives = data.iter().filter(|i| i.label == 1).count();
    if !data.is_empty() && (positives == 0 || positives == data.len()) {
        return Err(CliError::Data(format!(
            "{}: degenerate training data: every label is {}",
            a.input.display(),
            u8::from(positives > 0)
        )));
    }
    let opts = TrainOptions {
        l2: a.l2,
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let fitted = train(&data, fs, &opts)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let c = &fitted.coefficients;
    let summary = format!(
        "feature set {}: beta0={:.6} beta1={:.6} beta2={:.6} beta3={:.6} ({} instances, {} iterations, gradient norm {:.3e})\n",
        fs.size(),
        c.beta0,
        c.beta1,
        c.beta2,
        c.beta3,
        data.len(),
        fitted.iterations,
        fitted.grad_norm
    );
    let json = serde_json::to_string_pretty(c).expect("model serializes") + "\n";
    match &a.output {
        Some(p) => {
            formats::write_text(p, &json)?;
            emit(None, &summary, out)
        }
        None => {
            let _ = err.write_all(summary.as_bytes());
            emit(None, &json, out)
        }
    }
}

fn check_known(ids: &[&str], gold: &GoldSet) -> Result<(), CliError> {
    let mut unknown: Vec<String> = ids
        .iter()
        .filter(|id| !gold.has_document(id))
        .map(|id| id.to_string())
        .collect();
    unknown.sort();
    unknown.dedup();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(
            eval::EvalError::UnknownDocuments {
                gold: gold.name.clone(),
                ids: unknown,
            }
            .to_string(),
        ))
    }
}

#[derive(Debug, Serialize)]
struct EvalJson {
    gold: String,
    input: String,
    gold_documents: usize,
    gold_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<RankHistogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    charmatch: Option<eval::CharmatchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<Option<eval::ConfidenceReport>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

enum System {
    Pairs(eval::Predictions),
    NBest(Vec<NBestList>),
    Reranked(Vec<RerankedList>),
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (gold, warnings) = formats::read_gold(&a.gold)?;
    for w in warnings {
        warn(err, &w);
    }
    let (input, system) = if let Some(p) = &a.predictions {
        (p, System::Pairs(formats::read_predictions(p)?))
    } else if let Some(p) = &a.reranked {
        (p, System::Reranked(formats::read_reranked(p)?))
    } else {
        let p = a.nbest.as_ref().expect("clap requires one input");
        (p, System::NBest(formats::read_nbest(p)?))
    };
    let ids: Vec<&str> = match &system {
        System::Pairs(p) => p.keys().map(String::as_str).collect(),
        System::NBest(l) => l.iter().map(|l| l.doc_id.as_str()).collect(),
        System::Reranked(r) => r.iter().map(|r| r.source.doc_id.as_str()).collect(),
    };
    check_known(&ids, &gold)?;

    let all = a.reports.contains(&ReportKind::All);
    let want = |k: ReportKind| all || a.reports.contains(&k);
    let unavailable = |k: &str, needs: &str| -> Result<String, CliError> {
        if all {
            Ok(format!("{k} report skipped: needs {needs}"))
        } else {
            Err(CliError::Data(format!("the {k} report needs {needs}")))
        }
    };

    let mut report = EvalJson {
        gold: a.gold.display().to_string(),
        input: input.display().to_string(),
        gold_documents: gold.doc_count(),
        gold_pairs: gold.pair_count(),
        f1: None,
        rank: None,
        charmatch: None,
        confidence: None,
        notes: Vec::new(),
    };
    let name = gold.name.as_str();
    let mut tables = String::new();

    if want(ReportKind::F1) {
        let preds = match &system {
            System::Pairs(p) => p.clone(),
            System::NBest(lists) => top_predictions(lists),
            System::Reranked(r) => eval::chosen_predictions(r),
        };
        let r = eval::evaluate(&preds, &gold).map_err(|e| CliError::Data(e.to_string()))?;
        tables.push_str(&report::f1_table(&[(name, &r)]));
        report.f1 = Some(r);
    }
    if want(ReportKind::Rank) {
        let lists: Option<Vec<NBestList>> = match &system {
            System::Pairs(_) => None,
            System::NBest(l) => Some(l.clone()),
            System::Reranked(r) => Some(r.iter().map(|r| r.source.clone()).collect()),
        };
        match lists {
            Some(lists) => {
                let h = eval::rank_histogram(&lists, &gold, a.k);
                push_table(&mut tables, &report::rank_table(&[(name, &h)]));
                report.rank = Some(h);
            }
            None => report
                .notes
                .push(unavailable("rank", "--nbest or --reranked")?),
        }
    }
    let reranked = match &system {
        System::Reranked(r) => Some(r),
        _ => None,
    };
    if want(ReportKind::Charmatch) {
        match reranked {
            Some(r) => match eval::charmatch_conditional(&eval::observations(r, &gold)) {
                Ok(c) => {
                    push_table(&mut tables, &report::charmatch_table(&[(name, &c)]));
                    report.charmatch = Some(c);
                }
                Err(e) => report.notes.push(format!("charmatch report: {e}")),
            },
            None => report.notes.push(unavailable("charmatch", "--reranked")?),
        }
    }
    if want(ReportKind::Confidence) {
        match reranked {
            Some(r) => match eval::confidence_summary(r, &gold) {
                Ok(c) => {
                    push_table(&mut tables, &report::confidence_table(&[(name, &c)]));
                    report.confidence = Some(Some(c));
                }
                Err(e) => {
                    report.notes.push(format!("confidence report: {e}"));
                    report.confidence = Some(None);
                }
            },
            None => report.notes.push(unavailable("confidence", "--reranked")?),
        }
    }
    for n in &report.notes {
        let _ = writeln!(err, "note: {n}");
    }

    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match a.json.as_deref() {
        Some("-") => emit(None, &json, out),
        Some(p) => {
            formats::write_text(Path::new(p), &json)?;
            emit(None, &tables, out)
        }
        None => emit(None, &tables, out),
    }
}

fn push_table(tables: &mut String, t: &str) {
    if !tables.is_empty() {
        tables.push('\n');
    }
    tables.push_str(t);
}

fn top_predictions(lists: &[NBestList]) -> eval::Predictions {
    let mut out = eval::Predictions::new();
    for l in lists {
        let entry = out.entry(l.doc_id.clone()).or_default();
        if let Some(c) = l.candidates.first() {
            entry.insert((l.sf.clone(), c.lf.clone()));
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct PresetJson {
    model: u32,
    benchmark: &'static str,
    #[serde(flatten)]
    coefficients: ModelCoefficients,
}

pub fn cmd_presets(out: &mut dyn Write) -> Result<(), CliError> {
    let rows: Vec<PresetJson> = (1..=12)
        .map(|id| PresetJson {
            model: id,
            benchmark: preset_benchmark(id).expect("ids 1..=12 exist"),
            coefficients: preset(id).expect("ids 1..=12 exist"),
        })
        .collect();
    let json = serde_json::to_string_pretty(&rows).expect("presets serialize") + "\n";
    emit(None, &json, out)
}
