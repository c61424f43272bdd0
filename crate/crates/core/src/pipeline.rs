//! End-to-end runs: retrieve, cluster, summarize, and the full experiment
//! matrix with its component and system evaluations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{Benchmark, Qrels};
use crate::clustering::{clamp_k, hac_cluster, true_k, write_clusterings, Clustering};
use crate::config::{ClusteringMethod, RunConfig};
use crate::corpus::{ingest_corpus, Corpus, Query};
use crate::error::{Error, Result, StageExt};
use crate::eval::{ari_on_intersection, evaluation_matrix, mean_average_precision, EvaluationMatrix, MetricReport};
use crate::io;
use crate::retrieval::{build_index, write_run, InvertedIndex, Ranking, RetrievalMethod};
use crate::simmetric::{
    load_embeddings, qs_similarity, query_vector, train_qs_metric, EmbeddingStore, QsMetricModel,
    QueryModel, SimilarityKind, FEATURE_VERSION,
};
use crate::summarize::{assemble_article, ArticleMethod, GeneratedArticle, SummarizeConfig};

pub const MANUAL: &str = "manual";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Shared read-only state for per-query work.
pub struct Resources {
    pub corpus: Corpus,
    pub index: InvertedIndex,
    pub store: EmbeddingStore,
    pub benchmark: Benchmark,
    pub models: BTreeMap<QueryModel, QsMetricModel>,
    pub summarize: SummarizeConfig,
    pub k: usize,
}

impl Resources {
    fn model_for(&self, method: ClusteringMethod) -> Result<Option<&QsMetricModel>> {
        match method.query_model() {
            None => Ok(None),
            Some(qm) => self
                .models
                .get(&qm)
                .map(Some)
                .ok_or_else(|| Error::invalid(format!("{method} needs a trained {} metric", qm.tag()))),
        }
    }
}

/// Cluster `candidates` into `k` groups (clamped to the candidate count) with
/// the similarity of `method`. Component and system evaluation both go
/// through here.
pub fn cluster_candidates(
    store: &EmbeddingStore,
    method: ClusteringMethod,
    model: Option<&QsMetricModel>,
    query: &Query,
    candidates: &[String],
    k: usize,
) -> Result<Clustering> {
    if candidates.is_empty() {
        return Err(Error::data(format!("query {} has no candidates to cluster", query.id)));
    }
    let k = clamp_k(&query.id, k, candidates.len());
    match (method, model) {
        (ClusteringMethod::SbertEuclid, _) => hac_cluster(&query.id, candidates, k, |a, b| {
            SimilarityKind::Euclidean.apply(store.paragraph(a)?, store.paragraph(b)?)
        }),
        (ClusteringMethod::SbertCosine, _) => hac_cluster(&query.id, candidates, k, |a, b| {
            SimilarityKind::Cosine.apply(store.paragraph(a)?, store.paragraph(b)?)
        }),
        (_, Some(model)) => {
            // computed once per query, before any merge
            let q = query_vector(store, query, model.query_model, candidates)?;
            hac_cluster(&query.id, candidates, k, |a, b| {
                qs_similarity(model, store.paragraph(a)?, store.paragraph(b)?, &q)
            })
        }
        (m, None) => Err(Error::invalid(format!("{m} needs a trained metric"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRun {
    pub ranking: Ranking,
    pub clustering: Option<Clustering>,
    pub article: GeneratedArticle,
}

fn article_method(res: &Resources, retrieval: &str, clustering: &str) -> ArticleMethod {
    ArticleMethod {
        retrieval: retrieval.to_string(),
        clustering: clustering.to_string(),
        summarizer: res.summarize.summarizer.tag().to_string(),
        length_preset: res.summarize.length_preset.tag().to_string(),
        notes: Vec::new(),
    }
}

/// Cluster an existing ranking into the query's true number of subtopics and
/// summarize it.
pub fn run_on_ranking(res: &Resources, query: &Query, ranking: Ranking, method: ClusteringMethod) -> Result<QueryRun> {
    let meta = article_method(res, &ranking.method, method.tag());
    if ranking.is_empty() {
        return Ok(QueryRun {
            article: GeneratedArticle::empty(&query.id, meta, "empty retrieval"),
            ranking,
            clustering: None,
        });
    }
    let k = true_k(&query.id, &res.benchmark.cluster_gold).stage("cluster")?;
    let candidates: Vec<String> = ranking.ids().map(str::to_string).collect();
    let clustering = cluster_candidates(&res.store, method, res.model_for(method)?, query, &candidates, k)
        .stage("cluster")?;
    let mut article = assemble_article(&clustering, &ranking, &res.corpus, &res.summarize, meta).stage("summarize")?;
    if clustering.k < k {
        article
            .method
            .notes
            .push(format!("K clamped from {k} to {} candidates", clustering.k));
    }
    Ok(QueryRun {
        ranking,
        clustering: Some(clustering),
        article,
    })
}

/// Retrieve the top `k`, cluster into the true subtopic count, summarize.
pub fn run_pipeline(
    res: &Resources,
    query: &Query,
    retrieval: RetrievalMethod,
    clustering: ClusteringMethod,
) -> Result<QueryRun> {
    let ranking = retrieval.retrieve(&res.index, query, res.k).stage("retrieve")?;
    run_on_ranking(res, query, ranking, clustering)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Clusters from section-level judgments: each positively judged paragraph
/// joins its highest-graded section, with grade ties broken by a generator
/// seeded from `seed` and the query id. The ranking lists the paragraphs by
/// descending grade, then id. `None` when nothing is judged relevant.
pub fn manual_clusters(query_id: &str, manual: &Qrels, seed: u64) -> Result<Option<(Ranking, Clustering)>> {
    let mut judged: BTreeMap<&str, Vec<(&str, u32)>> = BTreeMap::new();
    for (section, grades) in manual.sections_of(query_id) {
        for (p, &g) in grades {
            if g > 0 {
                judged.entry(p.as_str()).or_default().push((section, g));
            }
        }
    }
    if judged.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(query_id));
    let mut section_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut best_grade: Vec<(String, f64)> = Vec::new();
    for (p, mut options) in judged {
        let top = options.iter().map(|o| o.1).max().expect("non-empty");
        options.retain(|o| o.1 == top);
        options.sort_unstable();
        let pick = if options.len() == 1 {
            options[0].0
        } else {
            options[rng.random_range(0..options.len())].0
        };
        section_of.insert(p, pick);
        best_grade.push((p.to_string(), f64::from(top)));
    }
    let n = best_grade.len();
    let ranking = Ranking::from_scores(query_id, MANUAL, best_grade, n);

    // cluster indices follow each section's smallest paragraph id
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut assignment = BTreeMap::new();
    for (p, s) in &section_of {
        let next = index.len();
        let c = *index.entry(s).or_insert(next);
        assignment.insert(p.to_string(), c);
    }
    let clustering = Clustering {
        query_id: query_id.to_string(),
        k: index.len(),
        assignment,
    };
    Ok(Some((ranking, clustering)))
}

/// Summarize the oracle clusters taken from section-level judgments.
pub fn run_manual(res: &Resources, query: &Query, manual: &Qrels, seed: u64) -> Result<QueryRun> {
    let meta = article_method(res, MANUAL, MANUAL);
    match manual_clusters(&query.id, manual, seed)? {
        None => Ok(QueryRun {
            ranking: Ranking::empty(&query.id, MANUAL),
            clustering: None,
            article: GeneratedArticle::empty(&query.id, meta, "no positive manual judgments"),
        }),
        Some((ranking, clustering)) => {
            let article = assemble_article(&clustering, &ranking, &res.corpus, &res.summarize, meta)
                .stage("summarize")?;
            Ok(QueryRun {
                ranking,
                clustering: Some(clustering),
                article,
            })
        }
    }
}

/// Deterministic split of query ids: sorted, shuffled with `seed`, and the
/// first `floor(fraction * n)` go to training. At least one query is kept
/// for testing.
pub fn split_queries(ids: &[String], fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut sorted = ids.to_vec();
    sorted.sort();
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * sorted.len() as f64).floor() as usize).min(sorted.len().saturating_sub(1));
    let test = sorted.split_off(n_train);
    let mut train = sorted;
    train.sort();
    let mut test = test;
    test.sort();
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFailure {
    pub row: String,
    pub query: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

pub fn versions() -> BTreeMap<String, String> {
    [
        ("artgen", env!("CARGO_PKG_VERSION")),
        ("qs-features", FEATURE_VERSION),
        ("tokenizer", "lowercase-alnum-v1"),
        ("rouge", "rouge-n-clipped-nostem-v1"),
        ("significance", "paired-bootstrap-v1"),
        ("summary-similarity", "tf-cosine-v1"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Files accumulated in memory, written under a staging directory at the end.
#[derive(Default)]
struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), contents.into());
    }

    fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut s = io::json_pretty(value)?;
        s.push('\n');
        self.add(name, s);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    pub output: PathBuf,
    pub matrix: EvaluationMatrix,
    pub map: Vec<MetricReport>,
    pub ari: Vec<MetricReport>,
    pub failures: Vec<QueryFailure>,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn simple_table(title: &str, rows: &[(String, f64)]) -> (String, String) {
    let mut csv = format!("method,{title}\n");
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
    let mut text = format!("{:<width$}  {title}\n", "method");
    text.push_str(&"-".repeat(width + 2 + title.len().max(6)));
    text.push('\n');
    let best = rows
        .iter()
        .enumerate()
        .fold(None, |b: Option<usize>, (i, r)| match b {
            Some(j) if rows[j].1 >= r.1 => Some(j),
            _ => Some(i),
        });
    for (i, (m, v)) in rows.iter().enumerate() {
        csv.push_str(&format!("{m},{v:.4}\n"));
        let v = if Some(i) == best { format!("**{v:.4}**") } else { format!("{v:.4}") };
        text.push_str(&format!("{m:<width$}  {v}\n"));
    }
    (csv, text)
}

fn articles_jsonl(runs: &[QueryRun]) -> Result<String> {
    let articles: Vec<&GeneratedArticle> = runs.iter().map(|r| &r.article).collect();
    io::jsonl_string(&articles)
}

/// Run every selected retrieval and clustering method on the test queries,
/// plus the manual condition, and write all outputs under `config.output`.
///
/// Work happens in a thread pool capped at `config.jobs`; outputs are
/// assembled in a fixed order, so any job count yields identical files. The
/// output directory is only replaced once everything succeeded.
pub fn run_matrix(config: &RunConfig) -> Result<MatrixOutcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let (outputs, mut outcome) = pool.install(|| matrix_outputs(config))?;
    publish(&config.output, &outputs)?;
    outcome.output = config.output.clone();
    Ok(outcome)
}

fn publish(output: &Path, outputs: &Outputs) -> Result<()> {
    if output.exists() {
        let empty = std::fs::read_dir(output).map_err(|e| Error::io(output, e))?.next().is_none();
        if !empty && !output.join(MANIFEST_FILE).exists() {
            return Err(Error::invalid(format!(
                "{} exists and is not a previous run directory; refusing to replace it",
                output.display()
            )));
        }
    }
    let mut staging = output.as_os_str().to_owned();
    staging.push(".partial");
    let staging = PathBuf::from(staging);
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let written = (|| {
        for (name, contents) in &outputs.files {
            let path = staging.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            io::write_atomic(&path, contents)?;
        }
        if output.exists() {
            std::fs::remove_dir_all(output).map_err(|e| Error::io(output, e))?;
        }
        std::fs::rename(&staging, output).map_err(|e| Error::io(output, e))
    })();
    if written.is_err() && staging.exists() {
        let _ = std::fs::remove_dir_all(&staging);
    }
    written
}

/// Load every input named by `config` and train the metrics needed by its
/// clustering methods on `train` queries.
pub fn load_resources(config: &RunConfig, train: Option<&[String]>) -> Result<(Resources, Option<Qrels>)> {
    let corpus = ingest_corpus(&config.corpus, config.dedup).stage("load")?;
    let benchmark = Benchmark::load_dir(&config.benchmark).stage("load")?;
    let store = load_embeddings(&config.embeddings).stage("load")?;
    let manual = match (&config.manual_qrels, config.manual) {
        (Some(p), true) => Some(Qrels::load_trec(p).stage("load")?),
        _ => None,
    };
    let index = build_index(&corpus, config.bm25()).stage("index")?;
    let mut models = BTreeMap::new();
    let needed: BTreeSet<QueryModel> = config
        .clustering_methods()?
        .into_iter()
        .filter_map(ClusteringMethod::query_model)
        .collect();
    if !needed.is_empty() {
        let train_ids: BTreeSet<&str> = match train {
            Some(ids) => ids.iter().map(String::as_str).collect(),
            None => benchmark.queries.iter().map(|q| q.id.as_str()).collect(),
        };
        let train_queries: Vec<Query> = benchmark
            .queries
            .iter()
            .filter(|q| train_ids.contains(q.id.as_str()))
            .cloned()
            .collect();
        for qm in needed {
            let m = train_qs_metric(&store, &benchmark.cluster_gold, &train_queries, qm, config.train_hyper())
                .stage("train-metric")?;
            models.insert(qm, m);
        }
    }
    Ok((
        Resources {
            corpus,
            index,
            store,
            benchmark,
            models,
            summarize: config.summarize_config()?,
            k: config.k,
        },
        manual,
    ))
}

fn matrix_outputs(config: &RunConfig) -> Result<(Outputs, MatrixOutcome)> {
    let retrievals = config.retrieval_methods()?;
    let clusterings = config.clustering_methods()?;
    let mut out = Outputs::default();

    let bench_ids: Vec<String> = Benchmark::load_dir(&config.benchmark)
        .stage("load")?
        .queries
        .iter()
        .map(|q| q.id.clone())
        .collect();
    let (train, test) = split_queries(&bench_ids, config.train_fraction, config.split_seed);
    let train_set: BTreeSet<&String> = train.iter().collect();
    assert!(test.iter().all(|q| !train_set.contains(q)), "train and test queries overlap");
    if test.is_empty() {
        return Err(Error::data("the benchmark has no queries to test on"));
    }
    out.json("split.json", &serde_json::json!({"train": train, "test": test}))?;

    let (res, manual) = load_resources(config, Some(&train))?;
    for (qm, m) in &res.models {
        out.add(format!("metrics/{}.json", qm.tag()), m.to_json()? + "\n");
    }
    let queries: Vec<&Query> = test
        .iter()
        .map(|id| res.benchmark.query(id).expect("split drawn from the benchmark"))
        .collect();
    let mut failures = Vec::new();
    let keep_going = config.keep_going;

    // per-query work; with keep-going a failure becomes a recorded empty result
    let settle = |row: &str, query: &Query, r: Result<QueryRun>, failures: &mut Vec<QueryFailure>| -> Result<QueryRun> {
        match r {
            Ok(run) => Ok(run),
            Err(e) if keep_going && e.kind() != crate::error::ErrorKind::Usage => {
                log::warn!("{row}: query {} failed: {e}", query.id);
                failures.push(QueryFailure {
                    row: row.to_string(),
                    query: query.id.clone(),
                    error: e.to_string(),
                });
                let meta = article_method(&res, row, row);
                Ok(QueryRun {
                    ranking: Ranking::empty(&query.id, row),
                    clustering: None,
                    article: GeneratedArticle::empty(&query.id, meta, &format!("failed: {e}")),
                })
            }
            Err(e) => Err(e.for_query(&query.id)),
        }
    };

    // retrieval
    let mut rankings: BTreeMap<RetrievalMethod, Vec<Ranking>> = BTreeMap::new();
    let mut map_reports = Vec::new();
    for &r in &retrievals {
        let results: Vec<Result<Ranking>> = queries
            .par_iter()
            .map(|q| r.retrieve(&res.index, q, res.k).stage("retrieve"))
            .collect();
        let mut runs = Vec::with_capacity(results.len());
        for (q, result) in queries.iter().zip(results) {
            let run = settle(r.tag(), q, result.map(|ranking| QueryRun {
                ranking,
                clustering: None,
                article: GeneratedArticle::empty(&q.id, article_method(&res, r.tag(), ""), ""),
            }), &mut failures)?;
            runs.push(run.ranking);
        }
        let report = mean_average_precision(&runs, &res.benchmark.qrels, &test);
        out.add(format!("runs/{}.run", r.tag()), write_run(&runs));
        out.json(format!("reports/map-{}.json", r.tag()), &report)?;
        map_reports.push(report);
        rankings.insert(r, runs);
    }

    // component clustering on the gold-relevant paragraphs
    let mut ari_reports = Vec::new();
    for &c in &clusterings {
        let results: Vec<Option<Result<(Clustering, f64)>>> = queries
            .par_iter()
            .map(|q| {
                let labels = res.benchmark.cluster_gold.labels(&q.id)?;
                let candidates: Vec<String> = labels.keys().cloned().collect();
                Some((|| {
                    let k = true_k(&q.id, &res.benchmark.cluster_gold)?;
                    let clustering = cluster_candidates(&res.store, c, res.model_for(c)?, q, &candidates, k)?;
                    let ari = ari_on_intersection(&clustering.assignment, labels)?;
                    Ok((clustering, ari))
                })()
                .stage("cluster"))
            })
            .collect();
        let mut per_query = BTreeMap::new();
        let mut skipped = Vec::new();
        let mut clusterings_out = Vec::new();
        for (q, result) in queries.iter().zip(results) {
            match result {
                None => skipped.push(q.id.clone()),
                Some(Ok((clustering, ari))) => {
                    per_query.insert(q.id.clone(), ari);
                    clusterings_out.push(clustering);
                }
                Some(Err(e)) if keep_going => {
                    failures.push(QueryFailure {
                        row: format!("ari/{}", c.tag()),
                        query: q.id.clone(),
                        error: e.to_string(),
                    });
                    skipped.push(q.id.clone());
                }
                Some(Err(e)) => return Err(e.for_query(&q.id)),
            }
        }
        let report = MetricReport::new("ari", per_query, skipped);
        out.add(format!("clusters/gold-{}.txt", c.tag()), write_clusterings(&clusterings_out));
        out.json(format!("reports/ari-{}.json", c.tag()), &report)?;
        ari_reports.push(report);
    }

    let map_rows: Vec<(String, f64)> = retrievals
        .iter()
        .zip(&map_reports)
        .map(|(r, rep)| (r.tag().to_string(), rep.aggregate))
        .collect();
    let ari_rows: Vec<(String, f64)> = clusterings
        .iter()
        .zip(&ari_reports)
        .map(|(c, rep)| (c.tag().to_string(), rep.aggregate))
        .collect();
    for (name, title, rows) in [("retrieval", "MAP", &map_rows), ("clustering", "ARI", &ari_rows)] {
        let (csv, text) = simple_table(title, rows);
        out.add(format!("tables/{name}.csv"), csv);
        out.add(format!("tables/{name}.txt"), text);
    }

    // system runs
    let mut matrix_runs: Vec<(String, Vec<GeneratedArticle>)> = Vec::new();
    let mut write_row = |row: &str, runs: &[QueryRun], out: &mut Outputs| -> Result<()> {
        out.add(format!("articles/{row}.jsonl"), articles_jsonl(runs)?);
        for r in runs {
            out.add(format!("articles/{row}/{}.txt", r.article.query_id), r.article.to_text() + "\n");
        }
        let clusterings: Vec<Clustering> = runs.iter().filter_map(|r| r.clustering.clone()).collect();
        out.add(format!("clusters/{row}.txt"), write_clusterings(&clusterings));
        matrix_runs.push((row.to_string(), runs.iter().map(|r| r.article.clone()).collect()));
        Ok(())
    };
    for &r in &retrievals {
        for &c in &clusterings {
            let row = format!("{}+{}", r.tag(), c.tag());
            let results: Vec<Result<QueryRun>> = queries
                .par_iter()
                .zip(&rankings[&r])
                .map(|(q, ranking)| run_on_ranking(&res, q, ranking.clone(), c))
                .collect();
            let mut runs = Vec::with_capacity(results.len());
            for (q, result) in queries.iter().zip(results) {
                runs.push(settle(&row, q, result, &mut failures)?);
            }
            write_row(&row, &runs, &mut out)?;
        }
    }
    if let Some(manual) = &manual {
        let results: Vec<Result<QueryRun>> = queries
            .par_iter()
            .map(|q| run_manual(&res, q, manual, config.manual_seed))
            .collect();
        let mut runs = Vec::with_capacity(results.len());
        for (q, result) in queries.iter().zip(results) {
            runs.push(settle(MANUAL, q, result, &mut failures)?);
        }
        out.add("runs/manual.run", write_run(&runs.iter().map(|r| r.ranking.clone()).collect::<Vec<_>>()));
        write_row(MANUAL, &runs, &mut out)?;
    }

    let baseline = match &config.baseline {
        Some(b) => b.clone(),
        None => {
            let best = |rows: &[(String, f64)]| {
                rows.iter()
                    .fold(None::<&(String, f64)>, |b, r| match b {
                        Some(x) if x.1 >= r.1 => Some(x),
                        _ => Some(r),
                    })
                    .map(|r| r.0.clone())
                    .expect("at least one method")
            };
            format!("{}+{}", best(&map_rows), best(&ari_rows))
        }
    };
    let matrix = evaluation_matrix(&matrix_runs, &res.benchmark.gold_articles, &baseline, config.bootstrap())
        .stage("evaluate")?;
    out.add("tables/matrix.csv", matrix.to_csv());
    out.add("tables/matrix.txt", matrix.to_text());
    out.json("tables/matrix.json", &matrix)?;
    if !failures.is_empty() {
        out.json("failures.json", &failures)?;
    }

    let seeds: BTreeMap<String, u64> = [
        ("split", config.split_seed),
        ("metric", config.metric_seed),
        ("louvain", config.louvain_seed),
        ("manual", config.manual_seed),
        ("bootstrap", config.bootstrap_seed),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut outputs: Vec<String> = out.files.keys().cloned().collect();
    outputs.push(MANIFEST_FILE.to_string());
    outputs.sort();
    let manifest = Manifest {
        config: config.clone(),
        seeds,
        versions: versions(),
        outputs,
    };
    out.json(MANIFEST_FILE, &manifest)?;

    Ok((
        out,
        MatrixOutcome {
            output: PathBuf::new(),
            matrix,
            map: map_reports,
            ari: ari_reports,
            failures,
            train,
            test,
        },
    ))
}

/// Re-run the experiment recorded in a manifest, writing to `output`.
pub fn rerun_from_manifest(manifest: &Path, output: &Path, jobs: usize) -> Result<MatrixOutcome> {
    let mut config = Manifest::load(manifest)?.config;
    config.output = output.to_path_buf();
    config.jobs = jobs;
    run_matrix(&config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::QrelKey;

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let ids: Vec<String> = (0..11).map(|i| format!("q{i}")).collect();
        let (train, test) = split_queries(&ids, 0.5, 3);
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 6);
        assert!(train.iter().all(|q| !test.contains(q)));
        assert_eq!(split_queries(&ids, 0.5, 3), (train, test));
        let (train, test) = split_queries(&ids[..1], 0.9, 3);
        assert!(train.is_empty());
        assert_eq!(test, ["q0"]);
    }

    fn manual_qrels(rows: &[(&str, &str, u32)]) -> Qrels {
        let mut q = Qrels::new();
        for &(section, p, g) in rows {
            q.insert(QrelKey::section("q", section), p, g).unwrap();
        }
        q
    }

    #[test]
    fn manual_prefers_higher_grade() {
        let q = manual_qrels(&[("a", "p", 2), ("b", "p", 1), ("b", "r", 1)]);
        let (ranking, c) = manual_clusters("q", &q, 1).unwrap().unwrap();
        // p goes to section a, r is only judged for b
        assert_eq!(c.assignment["p"], 0);
        assert_eq!(c.assignment["r"], 1);
        assert_eq!(c.k, 2);
        assert_eq!(ranking.ids().collect::<Vec<_>>(), ["p", "r"]);
    }

    #[test]
    fn manual_ties_are_seeded() {
        let q = manual_qrels(&[("a", "p", 1), ("b", "p", 1), ("a", "x", 1), ("b", "y", 1)]);
        let first = manual_clusters("q", &q, 42).unwrap().unwrap();
        for _ in 0..5 {
            assert_eq!(manual_clusters("q", &q, 42).unwrap().unwrap(), first);
        }
        // across seeds both outcomes occur
        let picks: BTreeSet<bool> = (0..64)
            .map(|s| {
                let (_, c) = manual_clusters("q", &q, s).unwrap().unwrap();
                c.assignment["p"] == c.assignment["x"]
            })
            .collect();
        assert_eq!(picks.len(), 2);
    }

    #[test]
    fn manual_single_section_and_no_judgments() {
        let q = manual_qrels(&[("a", "p", 1), ("a", "r", 3), ("a", "s", 0)]);
        let (ranking, c) = manual_clusters("q", &q, 1).unwrap().unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(ranking.ids().collect::<Vec<_>>(), ["r", "p"]);
        let none = manual_qrels(&[("a", "p", 0)]);
        assert!(manual_clusters("q", &none, 1).unwrap().is_none());
        assert!(manual_clusters("other", &q, 1).unwrap().is_none());
    }
}
