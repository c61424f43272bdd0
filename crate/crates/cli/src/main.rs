use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use artgen::benchmark::{coordination_check, derive_benchmark, load_gold_articles, load_outlines, Benchmark, ClusterGold, Qrels};
use artgen::clustering::{clamp_k, load_clusterings, true_k, write_clusterings};
use artgen::config::{ClusteringMethod, RunConfig};
use artgen::corpus::{ingest_corpus, load_queries};
use artgen::eval::{ari_on_intersection, evaluation_matrix, mean_average_precision, BootstrapParams, MetricReport};
use artgen::io::{json_pretty, jsonl_string, read_to_string, write_atomic};
use artgen::pipeline::{cluster_candidates, rerun_from_manifest, run_matrix, MatrixOutcome};
use artgen::retrieval::{build_index, load_run, write_run, Bm25Params, InvertedIndex, RetrievalMethod, DEFAULT_K};
use artgen::simmetric::{load_embeddings, train_qs_metric, QsMetricModel, QueryModel, TrainHyper};
use artgen::summarize::{assemble_article, ArticleMethod, GeneratedArticle, LengthPreset};
use artgen::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};

const CONFIG_HELP: &str = "\
Config file:
  TOML with top-level `key = value` lines only. Lists use [\"a\", \"b\"].
  Relative paths resolve against the directory of the file.

  corpus, benchmark, embeddings, manual_qrels, output   input and output paths
  dedup, k, bm25_k1, bm25_b                              corpus and retrieval
  retrieval = [\"bm25-title\", \"bm25-topic-expansion\", \"bm25-topic-aggregation\"]
  clustering = [\"sbert-euclid\", \"sbert-cosine\", \"qs3m-title\", \"qs3m-lead\", \"qs3m-mean\"]
  manual, baseline                                       manual row, significance baseline row
  summarizer (native|remote), summarizer_endpoint, embedding_endpoint,
  provider_timeout_secs, max_sentences, tau, length (short|long), gamma
  train_fraction, metric_epochs, metric_lr, bootstrap_replicates, alpha
  split_seed, metric_seed, louvain_seed, manual_seed, bootstrap_seed
  keep_going, jobs

Flags win over the file: --set key=value overrides any key, with the value
written as a TOML literal (bare words are read as strings). Paths given on
the command line resolve against the current directory.";

#[derive(Parser)]
#[command(name = "artgen", version, about = "Retrieve, cluster and summarize query-specific articles")]
struct Cli {
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and deduplicate a paragraph corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Keep paragraphs whose normalized text repeats an earlier one.
        #[arg(long)]
        no_dedup: bool,
    },
    /// Derive queries, qrels, cluster gold and gold articles from outlines.
    DeriveBenchmark {
        #[arg(long)]
        outlines: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_subtopics: usize,
        #[arg(long)]
        no_dedup: bool,
    },
    /// Build a BM25 index over a corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = Bm25Params::default().k1)]
        k1: f64,
        #[arg(long, default_value_t = Bm25Params::default().b)]
        b: f64,
        #[arg(long)]
        no_dedup: bool,
    },
    /// Rank paragraphs for every query and write a run file.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        /// Queries as JSON lines (e.g. queries.jsonl of a benchmark).
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value = "bm25-title")]
        method: RetrievalMethod,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the query-specific similarity metric.
    TrainMetric {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        query_model: QueryModel,
        /// Train only on these query ids, one per line.
        #[arg(long)]
        train_ids: Option<PathBuf>,
        #[arg(long, default_value_t = TrainHyper::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainHyper::default().lr)]
        lr: f64,
        #[arg(long, default_value_t = TrainHyper::default().seed)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Cluster each query's candidates into its number of subtopics.
    Cluster {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        method: ClusteringMethod,
        /// Trained metric, required by the qs3m methods.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Cluster the retrieved paragraphs of this run.
        #[arg(long, conflicts_with = "gold", required_unless_present = "gold")]
        run: Option<PathBuf>,
        /// Cluster the gold-labelled paragraphs instead of a run.
        #[arg(long)]
        gold: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Summarize clustered rankings into articles (JSON lines).
    Summarize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        /// Clustering method name recorded in the article metadata.
        #[arg(long, default_value = "external")]
        clustering_name: String,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        summary: SummaryArgs,
        #[arg(long)]
        no_dedup: bool,
    },
    /// Score runs, clusterings or articles.
    #[command(subcommand)]
    Evaluate(Evaluate),
    /// Run every retrieval x clustering combination plus the manual condition.
    #[command(after_long_help = CONFIG_HELP)]
    RunMatrix {
        #[arg(long, required_unless_present = "from_manifest")]
        config: Option<PathBuf>,
        /// Override one config key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Re-run the experiment recorded in a previous manifest.json.
        #[arg(long, conflicts_with = "config")]
        from_manifest: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        jobs: Option<usize>,
        /// Record per-query failures and continue.
        #[arg(long)]
        keep_going: bool,
    },
}

#[derive(Args)]
struct SummaryArgs {
    #[arg(long, default_value = "native", value_parser = ["native", "remote"])]
    summarizer: String,
    #[arg(long)]
    summarizer_endpoint: Option<String>,
    /// Compare summaries by remote embeddings instead of lexical overlap.
    #[arg(long)]
    embedding_endpoint: Option<String>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 2)]
    max_sentences: usize,
    #[arg(long, default_value_t = 0.35)]
    tau: f64,
    #[arg(long, default_value = "long")]
    length: LengthPreset,
    /// Louvain resolution; overrides the length preset.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 11)]
    seed: u64,
}

#[derive(Subcommand)]
enum Evaluate {
    /// Mean average precision of a run against title-level qrels.
    Map {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Adjusted Rand index of clusterings against cluster gold.
    Ari {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// ROUGE matrix with paired bootstrap marks against a baseline.
    Rouge {
        /// NAME=PATH of an articles file; repeatable.
        #[arg(long = "articles", value_name = "NAME=PATH", required = true)]
        articles: Vec<String>,
        #[arg(long)]
        gold: PathBuf,
        /// Baseline row name; defaults to the first --articles.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = BootstrapParams::default().replicates)]
        replicates: usize,
        #[arg(long, default_value_t = BootstrapParams::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = BootstrapParams::default().alpha)]
        alpha: f64,
        #[arg(long, default_value = "text", value_parser = ["text", "csv", "json"])]
        format: String,
    },
}

fn write(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn emit_report(report: &MetricReport, output: Option<&Path>) -> Result<()> {
    let json = json_pretty(report)? + "\n";
    match output {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    eprintln!("{} {:.4} over {} queries", report.metric, report.aggregate, report.per_query.len());
    Ok(())
}

fn load_index(path: &Path) -> Result<InvertedIndex> {
    InvertedIndex::from_json(&read_to_string(path)?).with_context(|| format!("reading {}", path.display()))
}

fn cmd_ingest(input: &Path, output: &Path, dedup: bool) -> Result<()> {
    let corpus = ingest_corpus(input, dedup)?;
    write(output, &corpus.to_jsonl()?)?;
    eprintln!("{} paragraphs, avgdl {:.2}", corpus.len(), corpus.avgdl());
    Ok(())
}

fn cmd_derive(outlines: &Path, corpus: &Path, output: &Path, min_subtopics: usize, dedup: bool) -> Result<()> {
    let corpus = ingest_corpus(corpus, dedup)?;
    let outlines = load_outlines(outlines)?;
    let bench = derive_benchmark(&outlines, &corpus, min_subtopics)?;
    let violations = coordination_check(
        &bench.queries,
        &bench.qrels,
        &bench.cluster_gold,
        &bench.gold_articles,
        Some(&corpus),
    );
    for v in &violations {
        log::warn!("coordination: {}", serde_json::to_string(v)?);
    }
    bench.write_dir(output)?;
    eprintln!(
        "{} queries, {} skipped, {} coordination violations",
        bench.queries.len(),
        bench.skipped.len(),
        violations.len()
    );
    Ok(())
}

fn cmd_retrieve(index: &Path, queries: &Path, method: RetrievalMethod, k: usize, output: &Path) -> Result<()> {
    let index = load_index(index)?;
    let queries = load_queries(queries)?;
    let rankings = queries
        .iter()
        .map(|q| method.retrieve(&index, q, k).map_err(|e| e.for_query(&q.id)))
        .collect::<artgen::Result<Vec<_>>>()?;
    write(output, &write_run(&rankings))?;
    eprintln!("{} rankings", rankings.len());
    Ok(())
}

fn cmd_train(
    benchmark: &Path,
    embeddings: &Path,
    model: QueryModel,
    train_ids: Option<&Path>,
    hyper: TrainHyper,
    output: &Path,
) -> Result<()> {
    let bench = Benchmark::load_dir(benchmark)?;
    let store = load_embeddings(embeddings)?;
    let queries = match train_ids {
        None => bench.queries.clone(),
        Some(p) => read_to_string(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|id| {
                bench
                    .query(id)
                    .cloned()
                    .ok_or_else(|| Error::data(format!("{}: unknown query {id}", p.display())))
            })
            .collect::<artgen::Result<Vec<_>>>()?,
    };
    let m = train_qs_metric(&store, &bench.cluster_gold, &queries, model, hyper)?;
    write(output, &(m.to_json()? + "\n"))?;
    eprintln!("trained {} metric on {} queries", model.tag(), queries.len());
    Ok(())
}

fn cmd_cluster(
    benchmark: &Path,
    embeddings: &Path,
    method: ClusteringMethod,
    model: Option<&Path>,
    run: Option<&Path>,
    output: &Path,
) -> Result<()> {
    let bench = Benchmark::load_dir(benchmark)?;
    let store = load_embeddings(embeddings)?;
    let model = match (method.query_model(), model) {
        (Some(_), None) => return Err(Error::invalid(format!("{method} needs --model")).into()),
        (Some(qm), Some(p)) => {
            let m = QsMetricModel::from_json(&read_to_string(p)?)?;
            if m.query_model != qm {
                return Err(Error::invalid(format!(
                    "{} holds a {} metric but {method} needs {}",
                    p.display(),
                    m.query_model.tag(),
                    qm.tag()
                ))
                .into());
            }
            Some(m)
        }
        (None, _) => None,
    };
    let candidates: Vec<(String, Vec<String>)> = match run {
        Some(p) => load_run(p)?
            .into_iter()
            .filter(|r| !r.is_empty())
            .map(|r| (r.query_id.clone(), r.ids().map(str::to_string).collect()))
            .collect(),
        None => bench
            .cluster_gold
            .queries()
            .map(|q| (q.to_string(), bench.cluster_gold.labels(q).unwrap().keys().cloned().collect()))
            .collect(),
    };
    let mut out = Vec::new();
    for (qid, ids) in &candidates {
        let query = bench
            .query(qid)
            .ok_or_else(|| Error::data(format!("query {qid} is not in the benchmark")))?;
        let k = true_k(qid, &bench.cluster_gold)?;
        let c = cluster_candidates(&store, method, model.as_ref(), query, ids, clamp_k(qid, k, ids.len()))
            .map_err(|e| e.for_query(qid))?;
        out.push(c);
    }
    write(output, &write_clusterings(&out))?;
    eprintln!("{} clusterings", out.len());
    Ok(())
}

fn summarize_config(args: &SummaryArgs) -> RunConfig {
    RunConfig {
        summarizer: args.summarizer.clone(),
        summarizer_endpoint: args.summarizer_endpoint.clone(),
        embedding_endpoint: args.embedding_endpoint.clone(),
        provider_timeout_secs: args.timeout_secs,
        max_sentences: args.max_sentences,
        tau: args.tau,
        length: args.length,
        gamma: args.gamma,
        louvain_seed: args.seed,
        ..RunConfig::default()
    }
}

fn cmd_summarize(
    corpus: &Path,
    run: &Path,
    clusters: &Path,
    clustering_name: &str,
    output: &Path,
    args: &SummaryArgs,
    dedup: bool,
) -> Result<()> {
    if args.max_sentences == 0 {
        return Err(Error::invalid("--max-sentences must be at least 1").into());
    }
    let config = summarize_config(args).summarize_config()?;
    let corpus = ingest_corpus(corpus, dedup)?;
    let clusterings: BTreeMap<String, _> = load_clusterings(clusters)?
        .into_iter()
        .map(|c| (c.query_id.clone(), c))
        .collect();
    let mut articles = Vec::new();
    for ranking in load_run(run)? {
        let meta = ArticleMethod {
            retrieval: ranking.method.clone(),
            clustering: clustering_name.to_string(),
            summarizer: config.summarizer.tag().to_string(),
            length_preset: config.length_preset.tag().to_string(),
            notes: Vec::new(),
        };
        let article = match clusterings.get(&ranking.query_id) {
            Some(c) => assemble_article(c, &ranking, &corpus, &config, meta).map_err(|e| e.for_query(&ranking.query_id))?,
            None => GeneratedArticle::empty(&ranking.query_id, meta, "no clustering"),
        };
        articles.push(article);
    }
    write(output, &jsonl_string(&articles)?)?;
    eprintln!("{} articles", articles.len());
    Ok(())
}

fn read_articles(path: &Path) -> Result<Vec<GeneratedArticle>> {
    Ok(artgen::io::read_jsonl(artgen::io::open(path)?, &path.display().to_string())?
        .into_iter()
        .map(|(_, a)| a)
        .collect())
}

fn cmd_evaluate(cmd: Evaluate) -> Result<()> {
    match cmd {
        Evaluate::Map { run, qrels, output } => {
            let rankings = load_run(&run)?;
            let qrels = Qrels::load_trec(&qrels)?;
            let mut ids: Vec<String> = rankings.iter().map(|r| r.query_id.clone()).collect();
            ids.extend(qrels.keys().filter(|k| k.subtopic.is_none()).map(|k| k.query.clone()));
            ids.sort();
            ids.dedup();
            emit_report(&mean_average_precision(&rankings, &qrels, &ids), output.as_deref())
        }
        Evaluate::Ari { clusters, gold, output } => {
            let gold = ClusterGold::load(&gold)?;
            let mut per_query = BTreeMap::new();
            let mut skipped = Vec::new();
            for c in load_clusterings(&clusters)? {
                match gold.labels(&c.query_id) {
                    Some(labels) => {
                        per_query.insert(c.query_id.clone(), ari_on_intersection(&c.assignment, labels)?);
                    }
                    None => skipped.push(c.query_id.clone()),
                }
            }
            emit_report(&MetricReport::new("ari", per_query, skipped), output.as_deref())
        }
        Evaluate::Rouge {
            articles,
            gold,
            baseline,
            replicates,
            seed,
            alpha,
            format,
        } => {
            let mut runs = Vec::new();
            for item in &articles {
                let (name, path) = item
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("--articles {item:?} is not NAME=PATH")))?;
                runs.push((name.to_string(), read_articles(Path::new(path))?));
            }
            let baseline = baseline.unwrap_or_else(|| runs[0].0.clone());
            let gold = load_gold_articles(&gold)?;
            let params = BootstrapParams { replicates, seed, alpha };
            let matrix = evaluation_matrix(&runs, &gold, &baseline, params)?;
            match format.as_str() {
                "csv" => print!("{}", matrix.to_csv()),
                "json" => println!("{}", json_pretty(&matrix)?),
                _ => print!("{}", matrix.to_text()),
            }
            Ok(())
        }
    }
}

fn summarize_outcome(outcome: &MatrixOutcome) {
    eprintln!(
        "{} train / {} test queries, {} rows, {} failures",
        outcome.train.len(),
        outcome.test.len(),
        outcome.matrix.rows.len(),
        outcome.failures.len()
    );
    print!("{}", outcome.matrix.to_text());
    eprintln!("outputs in {}", outcome.output.display());
}

fn cmd_run_matrix(
    config: Option<&Path>,
    overrides: &[String],
    from_manifest: Option<&Path>,
    output: Option<PathBuf>,
    jobs: Option<usize>,
    keep_going: bool,
) -> Result<()> {
    let cwd = std::env::current_dir().context("reading the current directory")?;
    if let Some(manifest) = from_manifest {
        if !overrides.is_empty() || keep_going {
            return Err(Error::invalid("--from-manifest reproduces a run and takes no overrides").into());
        }
        let output = output.ok_or_else(|| Error::invalid("--from-manifest needs --output"))?;
        let outcome = rerun_from_manifest(manifest, &cwd.join(output), jobs.unwrap_or(0))?;
        summarize_outcome(&outcome);
        return Ok(());
    }
    let mut overrides = overrides.to_vec();
    if let Some(o) = output {
        overrides.push(format!("output={}", toml_string(&o.display().to_string())));
    }
    if let Some(j) = jobs {
        overrides.push(format!("jobs={j}"));
    }
    if keep_going {
        overrides.push("keep_going=true".into());
    }
    let config = RunConfig::with_overrides(config, &overrides, &cwd)?;
    let outcome = run_matrix(&config)?;
    summarize_outcome(&outcome);
    if !outcome.failures.is_empty() {
        log::warn!("{} per-query failures recorded in failures.json", outcome.failures.len());
    }
    Ok(())
}

fn toml_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, output, no_dedup } => cmd_ingest(&input, &output, !no_dedup),
        Command::DeriveBenchmark {
            outlines,
            corpus,
            output,
            min_subtopics,
            no_dedup,
        } => cmd_derive(&outlines, &corpus, &output, min_subtopics, !no_dedup),
        Command::Index { corpus, output, k1, b, no_dedup } => {
            let corpus = ingest_corpus(&corpus, !no_dedup)?;
            let index = build_index(&corpus, Bm25Params { k1, b })?;
            write(&output, &index.to_json()?)?;
            eprintln!("{} documents indexed", index.num_docs());
            Ok(())
        }
        Command::Retrieve {
            index,
            queries,
            method,
            k,
            output,
        } => cmd_retrieve(&index, &queries, method, k, &output),
        Command::TrainMetric {
            benchmark,
            embeddings,
            query_model,
            train_ids,
            epochs,
            lr,
            seed,
            output,
        } => cmd_train(
            &benchmark,
            &embeddings,
            query_model,
            train_ids.as_deref(),
            TrainHyper { epochs, lr, seed },
            &output,
        ),
        Command::Cluster {
            benchmark,
            embeddings,
            method,
            model,
            run,
            gold: _,
            output,
        } => cmd_cluster(&benchmark, &embeddings, method, model.as_deref(), run.as_deref(), &output),
        Command::Summarize {
            corpus,
            run,
            clusters,
            clustering_name,
            output,
            summary,
            no_dedup,
        } => cmd_summarize(&corpus, &run, &clusters, &clustering_name, &output, &summary, !no_dedup),
        Command::Evaluate(e) => cmd_evaluate(e),
        Command::RunMatrix {
            config,
            overrides,
            from_manifest,
            output,
            jobs,
            keep_going,
        } => cmd_run_matrix(config.as_deref(), &overrides, from_manifest.as_deref(), output, jobs, keep_going),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|c| c.downcast_ref::<Error>())
        .map_or(2, |e| match e.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Provider => 3,
        })
}

/// The error chain on one line. Library errors already embed their causes,
/// so a cause is only appended when its text is not shown yet.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
