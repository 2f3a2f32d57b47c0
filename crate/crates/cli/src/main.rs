use std::collections::BTreeSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use paraqa::alist::{
    load_cases, parse_cases, parse_question, recovery_experiment, BacktranslationParaphraser, IdentityParaphraser,
    LookupParaphraser, Paraphraser, TemplateSet, BUNDLED_CASES,
};
use paraqa::annosvc::{serve, Store};
use paraqa::corpus::{load_dataset, sample, Corpus, DatasetFormat, FieldMap, LoadOptions, QuestionType, RuleTable};
use paraqa::embeddings::{EmbeddingProvider, ProviderConfig};
use paraqa::errscan::{filter_rejected, scan, ScanConfig};
use paraqa::harness::{
    adequacy_points_csv, adequacy_vs_metric, aggregate_by_type, correlation_table, correlation_text, error_effect,
    metric_rows_to_jsonl, parse_adequacy_records, parse_metric_rows, score_candidates, Metric,
};
use paraqa::metrics::IbleuConfig;
use paraqa::paragen::{
    backtranslate_corpus, load_candidates, ppdb_load, ppdb_paraphrase, write_candidates, HttpTranslator, Relation,
    DEFAULT_MAX_IN_FLIGHT,
};

#[derive(Parser)]
#[command(name = "paraqa", version, about = "Evaluate question paraphrases for QA datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, inspect and sample datasets.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Detect dataset errors and report their frequencies.
    Scan {
        corpus: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the corpus without flagged items here (JSONL).
        #[arg(long)]
        filtered: Option<PathBuf>,
    },
    /// Score candidate paraphrases against a corpus.
    Score {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Weight of BLEU against the reference; values below 0.7 are worth trying.
        #[arg(long, default_value_t = 0.7)]
        alpha: f64,
        /// `file:<path>` or `http:<url>`; falls back to PARAQA_EMBED_URI.
        #[arg(long)]
        embeddings: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backtranslate every question through a translation service.
    Generate {
        #[arg(long)]
        corpus: PathBuf,
        /// Base URL of a service implementing POST /translate.
        #[arg(long)]
        service: String,
        #[arg(long, value_delimiter = ',', default_value = "de,fr,hi,ru,zh")]
        pivots: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_IN_FLIGHT)]
        max_in_flight: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query a PPDB flat file.
    #[command(subcommand)]
    Ppdb(PpdbCmd),
    /// Parse a question into an alist.
    Parse {
        question: String,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Run the alist recovery experiment.
    Recover {
        /// Case file (JSONL); the bundled cases are used when omitted.
        #[arg(long)]
        cases: Option<PathBuf>,
        /// identity, oracle, file:<jsonl>, or http:<url> (backtranslation).
        #[arg(long, default_value = "identity")]
        paraphraser: String,
        /// Pivot language for http paraphrasers.
        #[arg(long, default_value = "fr")]
        pivot: String,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build evaluation reports.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Human annotation service.
    #[command(subcommand)]
    Annotate(AnnotateCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Load a dataset and re-serialize it as canonical JSONL.
    Load {
        path: PathBuf,
        #[arg(long, default_value = "auto")]
        format: DatasetFormat,
        /// TOML or JSON field map.
        #[arg(long)]
        field_map: Option<PathBuf>,
        /// TOML question-type rule table.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Print per-type counts to stderr.
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a seeded sample of one question type.
    Sample {
        path: PathBuf,
        #[arg(long = "type")]
        qtype: QuestionType,
        #[arg(short, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PpdbCmd {
    Query {
        index: PathBuf,
        phrase: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        min_score: f64,
        /// Keep only these relations (comma separated); all by default.
        #[arg(long, value_delimiter = ',')]
        relations: Vec<Relation>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Ibleu,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Ibleu => Metric::Ibleu,
        }
    }
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Mean and std of one metric per system and question type.
    Table3 {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        rows: PathBuf,
        #[arg(long, value_enum, default_value = "cosine")]
        metric: MetricArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spearman correlation between adequacy and each metric.
    Table2 {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adequacy percentage against mean metric per system.
    Fig1 {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value = "cosine")]
        metric: MetricArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label frequencies on clean versus erroneous data points.
    Fig4 {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        error: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnnotateCmd {
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        data: PathBuf,
        /// Check uids against this corpus and show its questions.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory with the annotation UI.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corpus(CorpusCmd::Load {
            path,
            format,
            field_map,
            rules,
            stats,
            out,
        }) => {
            let mut opts = LoadOptions {
                format,
                ..Default::default()
            };
            if let Some(p) = &field_map {
                opts.fields = FieldMap::load(p)?;
            }
            if let Some(p) = &rules {
                opts.rules = RuleTable::load(p)?;
            }
            let corpus = load_dataset(&path, &opts)?;
            if stats {
                eprint!("{}", type_counts(&corpus));
            }
            let mut buf = Vec::new();
            corpus.write_jsonl(&mut buf, &opts.fields)?;
            emit(out.as_deref(), &String::from_utf8(buf)?)
        }
        Command::Corpus(CorpusCmd::Sample { path, qtype, n, seed }) => {
            let corpus = load_corpus(&path)?;
            let mut out = String::new();
            for dp in sample(&corpus, qtype, n, seed)? {
                out.push_str(&serde_json::to_string(&dp)?);
                out.push('\n');
            }
            emit(None, &out)
        }
        Command::Scan {
            corpus,
            report,
            filtered,
        } => {
            let corpus = load_corpus(&corpus)?;
            let rep = scan(&corpus, &ScanConfig::default());
            if let Some(p) = report {
                write_file(&p, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
            }
            if let Some(p) = filtered {
                filter_rejected(&corpus, &rep).save_jsonl(&p, &FieldMap::default())?;
            }
            emit(None, &rep.to_text_table())
        }
        Command::Score {
            corpus,
            candidates,
            alpha,
            embeddings,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let loaded = load_candidates(&candidates, Some(&corpus))?;
            if !loaded.unknown_uids.is_empty() {
                eprintln!("skipping {} candidates with unknown uids", loaded.unknown_uids.len());
            }
            let cfg = IbleuConfig::with_alpha(alpha)?;
            let provider: Option<Box<dyn EmbeddingProvider>> = match embeddings {
                Some(uri) => Some(ProviderConfig::parse(&uri)?.build()?),
                None => ProviderConfig::from_env().transpose()?.map(|c| c.build()).transpose()?,
            };
            let rows = score_candidates(&corpus, &loaded.candidates, &cfg, provider.as_deref())?;
            emit(out.as_deref(), &metric_rows_to_jsonl(&rows))
        }
        Command::Generate {
            corpus,
            service,
            pivots,
            max_in_flight,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let translator = HttpTranslator::with_pivots(&service, pivots.clone());
            let mut all = Vec::new();
            for pivot in &pivots {
                all.extend(backtranslate_corpus(&corpus, pivot, &translator, max_in_flight)?);
                eprintln!("en-{pivot}: {} candidates", corpus.len());
            }
            write_candidates(&out, &all)?;
            Ok(())
        }
        Command::Ppdb(PpdbCmd::Query {
            index,
            phrase,
            k,
            min_score,
            relations,
        }) => {
            let relations: BTreeSet<Relation> = if relations.is_empty() {
                Relation::ALL.into_iter().collect()
            } else {
                relations.into_iter().collect()
            };
            let idx = ppdb_load(&index, min_score, &relations)?;
            let mut out = String::new();
            for e in ppdb_paraphrase(&idx, &phrase, k) {
                out.push_str(&e.to_line());
                out.push('\n');
            }
            emit(None, &out)
        }
        Command::Parse { question, templates } => {
            let set = load_templates(templates.as_deref())?;
            match parse_question(&question, &set) {
                Ok(a) => emit(None, &(a.to_json() + "\n")),
                Err(e) => {
                    println!("{}", serde_json::to_string(&e)?);
                    bail!("{e}")
                }
            }
        }
        Command::Recover {
            cases,
            paraphraser,
            pivot,
            templates,
            out,
        } => {
            let cases = match &cases {
                Some(p) => load_cases(p)?,
                None => parse_cases(BUNDLED_CASES)?,
            };
            let set = load_templates(templates.as_deref())?;
            let para: Box<dyn Paraphraser> = match paraphraser.as_str() {
                "identity" => Box::new(IdentityParaphraser),
                "oracle" => Box::new(LookupParaphraser::oracle(&cases)),
                uri => {
                    if let Some(path) = uri.strip_prefix("file:") {
                        Box::new(LookupParaphraser::load(Path::new(path))?)
                    } else if let Some(url) = uri.strip_prefix("http:").filter(|u| !u.starts_with("//")) {
                        Box::new(BacktranslationParaphraser::new(HttpTranslator::new(url), pivot))
                    } else if uri.starts_with("http://") || uri.starts_with("https://") {
                        Box::new(BacktranslationParaphraser::new(HttpTranslator::new(uri), pivot))
                    } else {
                        bail!("unknown paraphraser '{uri}'")
                    }
                }
            };
            let report = recovery_experiment(&cases, para.as_ref(), &set)?;
            if let Some(p) = &out {
                write_file(p, &render_by_extension(p, report.to_json(), None, report.to_text()))?;
            }
            emit(None, &report.to_text())
        }
        Command::Report(cmd) => report(cmd),
        Command::Annotate(AnnotateCmd::Serve {
            port,
            host,
            data,
            corpus,
            static_dir,
        }) => {
            let corpus = corpus.map(|p| load_corpus(&p)).transpose()?.map(Arc::new);
            let store = Arc::new(Store::open(&data, corpus)?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(serve(store, addr, static_dir))?;
            Ok(())
        }
    }
}

fn report(cmd: ReportCmd) -> Result<()> {
    let (out, json, csv, text) = match cmd {
        ReportCmd::Table3 {
            corpus,
            rows,
            metric,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let rows = parse_metric_rows(&read(&rows)?)?;
            let r = aggregate_by_type(&rows, &corpus, metric.into())?;
            (out, r.to_json(), Some(r.to_csv()), r.to_text())
        }
        ReportCmd::Table2 {
            corpus,
            rows,
            labels,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let rows = parse_metric_rows(&read(&rows)?)?;
            let labels = parse_adequacy_records(&read(&labels)?)?;
            let cells = correlation_table(&labels, &rows, &corpus, &[Metric::Cosine, Metric::Ibleu])?;
            (
                out,
                serde_json::to_string_pretty(&cells)? + "\n",
                None,
                correlation_text(&cells),
            )
        }
        ReportCmd::Fig1 {
            rows,
            labels,
            metric,
            out,
        } => {
            let rows = parse_metric_rows(&read(&rows)?)?;
            let labels = parse_adequacy_records(&read(&labels)?)?;
            let points = adequacy_vs_metric(&labels, &rows, metric.into())?;
            let csv = adequacy_points_csv(&points);
            (
                out,
                serde_json::to_string_pretty(&points)? + "\n",
                Some(csv.clone()),
                csv,
            )
        }
        ReportCmd::Fig4 { clean, error, out } => {
            let clean = parse_adequacy_records(&read(&clean)?)?;
            let error = parse_adequacy_records(&read(&error)?)?;
            let e = error_effect(&clean, &error)?;
            (
                out,
                serde_json::to_string_pretty(&e)? + "\n",
                Some(e.to_csv()),
                e.to_text(),
            )
        }
    };
    match out {
        Some(p) => write_file(&p, &render_by_extension(&p, json, csv, text)),
        None => emit(None, &text),
    }
}

/// `.json` and `.csv` pick those renderings; anything else gets text.
fn render_by_extension(path: &Path, json: String, csv: Option<String>, text: String) -> String {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => json,
        Some("csv") => csv.unwrap_or(text),
        _ => text,
    }
}

fn type_counts(corpus: &Corpus) -> String {
    let mut out = format!("{} items\n", corpus.len());
    for (q, n) in corpus.counts() {
        out.push_str(&format!("{:<20} {n:>7}\n", q.as_str()));
    }
    out
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    load_dataset(path, &LoadOptions::default()).with_context(|| format!("loading {}", path.display()))
}

fn load_templates(path: Option<&Path>) -> Result<TemplateSet> {
    Ok(match path {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::bundled(),
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
