//! Embedding storage and pairwise document similarity.
//!
//! Two families are provided. Query-agnostic similarity compares paragraph
//! embeddings directly (cosine, or Euclidean distance mapped to `1/(1+d)`).
//! The query-specific metric scores a pair of paragraphs with a logistic model
//! over features that relate both paragraphs to a query vector, where the
//! query vector comes from the title, the lead, or the centroid of the
//! candidates.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::ClusterGold;
use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::io;

pub fn paragraph_key(id: &str) -> String {
    format!("p:{id}")
}

pub fn title_key(query_id: &str) -> String {
    format!("qt:{query_id}")
}

pub fn lead_key(query_id: &str) -> String {
    format!("ql:{query_id}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("embedding dimension must be >= 2, got {dim}")));
        }
        Ok(Self {
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::data(format!(
                "vector {id} has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::data(format!("vector {id} has non-finite values")));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::data(format!("duplicate embedding id {id}")));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn require(&self, id: &str) -> Result<&[f64]> {
        self.get(id)
            .ok_or_else(|| Error::data(format!("no embedding for {id}")))
    }

    pub fn paragraph(&self, id: &str) -> Result<&[f64]> {
        self.require(&paragraph_key(id))
    }

    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = io::numbered_lines(reader, source_name);
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let (line, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `dim <D>` header".into()))??;
        let dim = header
            .strip_prefix("dim ")
            .and_then(|d| d.trim().parse::<usize>().ok())
            .ok_or_else(|| parse_err(line, format!("bad header {header:?}")))?;
        let mut store = Self::new(dim).map_err(|e| parse_err(line, e.to_string()))?;
        for item in lines {
            let (line, text) = item?;
            let (id, values) = text
                .split_once('\t')
                .ok_or_else(|| parse_err(line, "expected `<id>\\t<values>`".into()))?;
            let vector = values
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(line, format!("row {id}: {e}")))?;
            store
                .insert(id, vector)
                .map_err(|e| parse_err(line, format!("row {id}: {e}")))?;
        }
        Ok(store)
    }

    /// Serialize in the file format with ids in ascending order.
    pub fn to_text(&self) -> String {
        let mut ids: Vec<&String> = self.vectors.keys().collect();
        ids.sort();
        let mut out = format!("dim {}\n", self.dim);
        for id in ids {
            out.push_str(id);
            out.push('\t');
            for (i, x) in self.vectors[id].iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{x}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::read(io::open(path)?, &path.display().to_string())
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::data(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        return Err(Error::data("cosine similarity of a zero-norm vector"));
    }
    Ok((dot(u, v) / denom).clamp(-1.0, 1.0))
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `1 / (1 + ‖u − v‖)`, in (0, 1].
pub fn euclidean_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    Ok(1.0 / (1.0 + euclidean_distance(u, v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Euclidean,
    Cosine,
}

impl SimilarityKind {
    pub fn apply(self, u: &[f64], v: &[f64]) -> Result<f64> {
        match self {
            SimilarityKind::Euclidean => euclidean_similarity(u, v),
            SimilarityKind::Cosine => cosine(u, v),
        }
    }
}

pub fn base_similarity(store: &EmbeddingStore, a: &str, b: &str, kind: SimilarityKind) -> Result<f64> {
    kind.apply(store.require(a)?, store.require(b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryModel {
    Title,
    Lead,
    Mean,
}

impl QueryModel {
    pub const ALL: [QueryModel; 3] = [QueryModel::Title, QueryModel::Lead, QueryModel::Mean];

    pub fn tag(self) -> &'static str {
        match self {
            QueryModel::Title => "title",
            QueryModel::Lead => "lead",
            QueryModel::Mean => "mean",
        }
    }
}

impl std::str::FromStr for QueryModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown query model {s:?}")))
    }
}

/// Query vector for `model`. For [`QueryModel::Mean`] this is the centroid of
/// the candidate paragraph vectors.
pub fn query_vector(
    store: &EmbeddingStore,
    query: &Query,
    model: QueryModel,
    candidates: &[String],
) -> Result<Vec<f64>> {
    match model {
        QueryModel::Title => Ok(store.require(&title_key(&query.id))?.to_vec()),
        QueryModel::Lead => Ok(store.require(&lead_key(&query.id))?.to_vec()),
        QueryModel::Mean => {
            if candidates.is_empty() {
                return Err(Error::data(format!(
                    "mean query model for {} needs at least one candidate",
                    query.id
                )));
            }
            let mut centroid = vec![0.0; store.dim()];
            for c in candidates {
                for (acc, x) in centroid.iter_mut().zip(store.paragraph(c)?) {
                    *acc += x;
                }
            }
            let n = candidates.len() as f64;
            centroid.iter_mut().for_each(|x| *x /= n);
            Ok(centroid)
        }
    }
}

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_VERSION: &str = "qs-features-v1";

/// Pair features relative to a query vector:
///
/// `[cos(u,v), max(cu, cv), min(cu, cv), |cu − cv|, 1/(1+‖u−v‖)]`
///
/// where `cu = cos(u,q)` and `cv = cos(v,q)`. Ordering the two query cosines
/// by value makes the vector identical under a swap of `u` and `v`.
pub fn qs_features(u: &[f64], v: &[f64], q: &[f64]) -> Result<[f64; FEATURE_COUNT]> {
    let cuv = cosine(u, v)?;
    let cu = cosine(u, q)?;
    let cv = cosine(v, q)?;
    Ok([
        cuv,
        cu.max(cv),
        cu.min(cv),
        (cu - cv).abs(),
        euclidean_similarity(u, v)?,
    ])
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic pair model over [`qs_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsMetricModel {
    pub query_model: QueryModel,
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub features: String,
}

impl QsMetricModel {
    /// Untrained model; predicts 0.5 for every pair.
    pub fn zero(query_model: QueryModel) -> Self {
        Self {
            query_model,
            weights: [0.0; FEATURE_COUNT],
            bias: 0.0,
            features: FEATURE_VERSION.to_string(),
        }
    }

    pub fn predict(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        sigmoid(self.logit(features))
    }

    fn logit(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        self.bias + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        io::json_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::data(format!("bad model file: {e}")))?;
        if m.features != FEATURE_VERSION {
            return Err(Error::data(format!(
                "model uses feature set {}, expected {FEATURE_VERSION}",
                m.features
            )));
        }
        if m.weights.iter().chain([&m.bias]).any(|w| !w.is_finite()) {
            return Err(Error::data("model has non-finite weights"));
        }
        Ok(m)
    }
}

pub fn qs_similarity(model: &QsMetricModel, u: &[f64], v: &[f64], q: &[f64]) -> Result<f64> {
    Ok(model.predict(&qs_features(u, v, q)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 0.05,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub query_id: String,
    pub a: String,
    pub b: String,
    pub features: [f64; FEATURE_COUNT],
    /// 1.0 when both paragraphs share a section label.
    pub label: f64,
}

/// All within-query pairs of gold-labelled paragraphs, with the majority class
/// downsampled to the minority size per query. Queries without both classes
/// contribute nothing.
pub fn training_pairs(
    store: &EmbeddingStore,
    gold: &ClusterGold,
    queries: &[Query],
    model: QueryModel,
    seed: u64,
) -> Result<Vec<PairExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for query in queries {
        let Some(labels) = gold.labels(&query.id) else {
            continue;
        };
        let ids: Vec<String> = labels.keys().cloned().collect();
        let q = query_vector(store, query, model, &ids)?;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let same = labels[&ids[i]] == labels[&ids[j]];
                let ex = PairExample {
                    query_id: query.id.clone(),
                    a: ids[i].clone(),
                    b: ids[j].clone(),
                    features: qs_features(store.paragraph(&ids[i])?, store.paragraph(&ids[j])?, &q)?,
                    label: if same { 1.0 } else { 0.0 },
                };
                if same {
                    pos.push(ex);
                } else {
                    neg.push(ex);
                }
            }
        }
        let n = pos.len().min(neg.len());
        for class in [&mut pos, &mut neg] {
            if class.len() > n {
                class.shuffle(&mut rng);
                class.truncate(n);
            }
        }
        out.append(&mut pos);
        out.append(&mut neg);
    }
    if !out.iter().any(|p| p.label == 1.0) || !out.iter().any(|p| p.label == 0.0) {
        return Err(Error::data(
            "no training pairs: need queries with at least two labelled sections",
        ));
    }
    Ok(out)
}

/// Mean log-loss of `model` over `pairs`.
pub fn log_loss(model: &QsMetricModel, pairs: &[PairExample]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|p| {
            // log(1 + e^-z) for the true class, computed stably
            let z = model.logit(&p.features);
            let margin = if p.label == 1.0 { z } else { -z };
            if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            }
        })
        .sum();
    total / pairs.len() as f64
}

/// Fraction of pairs where `predict ≥ 0.5` matches the label.
pub fn pair_accuracy(model: &QsMetricModel, pairs: &[PairExample]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|p| (model.predict(&p.features) >= 0.5) == (p.label == 1.0))
        .count();
    hits as f64 / pairs.len() as f64
}

/// Stochastic gradient descent on log-loss. Returns the model together with
/// the loss before training followed by the loss after every epoch.
pub fn fit_pairs(
    pairs: &[PairExample],
    model: QueryModel,
    hyper: TrainHyper,
) -> Result<(QsMetricModel, Vec<f64>)> {
    if !(hyper.lr > 0.0 && hyper.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be > 0, got {}", hyper.lr)));
    }
    let mut m = QsMetricModel::zero(model);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut losses = vec![log_loss(&m, pairs)];
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let p = &pairs[i];
            let g = m.predict(&p.features) - p.label;
            for (w, x) in m.weights.iter_mut().zip(&p.features) {
                *w -= hyper.lr * g * x;
            }
            m.bias -= hyper.lr * g;
        }
        losses.push(log_loss(&m, pairs));
    }
    Ok((m, losses))
}

pub fn train_qs_metric_traced(
    store: &EmbeddingStore,
    gold: &ClusterGold,
    queries: &[Query],
    model: QueryModel,
    hyper: TrainHyper,
) -> Result<(QsMetricModel, Vec<f64>)> {
    let pairs = training_pairs(store, gold, queries, model, hyper.seed)?;
    log::info!(
        "training {} metric on {} pairs from {} queries",
        model.tag(),
        pairs.len(),
        queries.len()
    );
    fit_pairs(&pairs, model, hyper)
}

pub fn train_qs_metric(
    store: &EmbeddingStore,
    gold: &ClusterGold,
    queries: &[Query],
    model: QueryModel,
    hyper: TrainHyper,
) -> Result<QsMetricModel> {
    train_qs_metric_traced(store, gold, queries, model, hyper).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn load_and_errors() {
        let s = EmbeddingStore::read("dim 3\np:a\t1 0 0\np:b\t0 1 0.5\n".as_bytes(), "e").unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.len(), 2);
        let err = EmbeddingStore::read("dim 3\np:a\t1 0\n".as_bytes(), "e").unwrap_err();
        assert!(err.to_string().contains("p:a"), "{err}");
        assert!(EmbeddingStore::read("dim 2\nx\t1 0\nx\t0 1\n".as_bytes(), "e").is_err());
        assert!(EmbeddingStore::read("dims 2\n".as_bytes(), "e").is_err());
        assert!(EmbeddingStore::read("dim 1\n".as_bytes(), "e").is_err());
        assert!(EmbeddingStore::read("dim 2\nx\t1 NaN\n".as_bytes(), "e").is_err());
        let back = EmbeddingStore::read(s.to_text().as_bytes(), "e").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn base_similarity_examples() {
        let mut s = EmbeddingStore::new(2).unwrap();
        s.insert("o", vec![0.0, 0.0]).unwrap();
        s.insert("v", vec![3.0, 4.0]).unwrap();
        s.insert("x", vec![1.0, 0.0]).unwrap();
        s.insert("y", vec![0.0, 1.0]).unwrap();
        assert_eq!(base_similarity(&s, "v", "v", SimilarityKind::Cosine).unwrap(), 1.0);
        assert_eq!(base_similarity(&s, "v", "v", SimilarityKind::Euclidean).unwrap(), 1.0);
        assert_eq!(base_similarity(&s, "x", "y", SimilarityKind::Cosine).unwrap(), 0.0);
        assert!((base_similarity(&s, "o", "v", SimilarityKind::Euclidean).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(base_similarity(&s, "o", "v", SimilarityKind::Cosine).is_err());
        assert!(base_similarity(&s, "x", "missing", SimilarityKind::Cosine).is_err());
    }

    fn query(id: &str) -> Query {
        Query {
            id: id.into(),
            title: "t".into(),
            lead: None,
            subtopics: vec![],
        }
    }

    #[test]
    fn query_vectors() {
        let mut s = EmbeddingStore::new(2).unwrap();
        s.insert("p:a", vec![1.0, 0.0]).unwrap();
        s.insert("p:b", vec![0.0, 1.0]).unwrap();
        s.insert("qt:q", vec![2.0, 2.0]).unwrap();
        let q = query("q");
        assert_eq!(query_vector(&s, &q, QueryModel::Mean, &["a".into()]).unwrap(), [1.0, 0.0]);
        assert_eq!(
            query_vector(&s, &q, QueryModel::Mean, &["a".into(), "b".into()]).unwrap(),
            [0.5, 0.5]
        );
        assert_eq!(query_vector(&s, &q, QueryModel::Title, &[]).unwrap(), [2.0, 2.0]);
        let err = query_vector(&s, &q, QueryModel::Lead, &[]).unwrap_err();
        assert!(err.to_string().contains("ql:q"));
        assert!(query_vector(&s, &q, QueryModel::Mean, &[]).is_err());
    }

    #[test]
    fn feature_examples() {
        let u = [1.0, 0.0];
        let v = [0.0, 1.0];
        assert_eq!(qs_features(&u, &u, &u).unwrap(), [1.0, 1.0, 1.0, 0.0, 1.0]);
        let f = qs_features(&u, &v, &u).unwrap();
        let expected = [0.0, 1.0, 0.0, 1.0, 1.0 / (1.0 + 2f64.sqrt())];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(qs_features(&u, &[0.0, 0.0], &u).is_err());
    }

    #[test]
    fn zero_model_is_half() {
        let m = QsMetricModel::zero(QueryModel::Mean);
        assert_eq!(qs_similarity(&m, &[1.0, 2.0], &[3.0, -1.0], &[0.5, 0.5]).unwrap(), 0.5);
    }

    /// Two well-separated blobs, one section each, for several queries.
    fn blob_fixture(seed: u64, queries: usize) -> (EmbeddingStore, ClusterGold, Vec<Query>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 4;
        let mut store = EmbeddingStore::new(dim).unwrap();
        let mut gold = ClusterGold::new();
        let mut qs = Vec::new();
        for qi in 0..queries {
            let qid = format!("q{qi}");
            for blob in 0..2 {
                for pi in 0..8 {
                    let pid = format!("{qid}-b{blob}-{pi}");
                    let mut v: Vec<f64> = (0..dim).map(|_| 0.15 * rng.sample::<f64, _>(StandardNormal)).collect();
                    v[blob] += 1.0;
                    v[2] += 0.3;
                    store.insert(paragraph_key(&pid), v).unwrap();
                    gold.insert(&qid, &pid, if blob == 0 { "a" } else { "b" });
                }
            }
            store.insert(title_key(&qid), vec![0.5, 0.5, 0.3, 0.0]).unwrap();
            qs.push(query(&qid));
        }
        (store, gold, qs)
    }

    #[test]
    fn training_separable_blobs() {
        let (store, gold, qs) = blob_fixture(5, 6);
        let (train, test) = qs.split_at(4);
        let hyper = TrainHyper::default();
        for model in [QueryModel::Mean, QueryModel::Title] {
            let (m, losses) = train_qs_metric_traced(&store, &gold, train, model, hyper).unwrap();
            assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
            let held_out = training_pairs(&store, &gold, test, model, 99).unwrap();
            assert!(pair_accuracy(&m, &held_out) >= 0.95);
            // intra-blob pair more similar than inter-blob pair
            let ids: Vec<String> = gold.labels("q4").unwrap().keys().cloned().collect();
            let q = query_vector(&store, &test[0], model, &ids).unwrap();
            let p = |id: &str| store.paragraph(id).unwrap().to_vec();
            let intra = qs_similarity(&m, &p("q4-b0-0"), &p("q4-b0-1"), &q).unwrap();
            let inter = qs_similarity(&m, &p("q4-b0-0"), &p("q4-b1-0"), &q).unwrap();
            assert!(intra > inter);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (store, gold, qs) = blob_fixture(8, 3);
        let a = train_qs_metric(&store, &gold, &qs, QueryModel::Mean, TrainHyper::default()).unwrap();
        let b = train_qs_metric(&store, &gold, &qs, QueryModel::Mean, TrainHyper::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(QsMetricModel::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn training_needs_both_classes() {
        let mut store = EmbeddingStore::new(2).unwrap();
        let mut gold = ClusterGold::new();
        for p in ["a", "b"] {
            store.insert(paragraph_key(p), vec![1.0, 0.5]).unwrap();
            gold.insert("q", p, "only");
        }
        let err = train_qs_metric(&store, &gold, &[query("q")], QueryModel::Mean, TrainHyper::default());
        assert!(err.is_err());
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3).prop_filter("non-zero", |v| norm(v) > 1e-6)
    }

    proptest! {
        #[test]
        fn similarities_symmetric(u in nonzero_vec(), v in nonzero_vec(), q in nonzero_vec(),
                                  w in prop::array::uniform5(-3.0f64..3.0), bias in -1.0f64..1.0,
                                  scale in 0.01f64..100.0) {
            prop_assert_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap());
            prop_assert_eq!(euclidean_similarity(&u, &v).unwrap(), euclidean_similarity(&v, &u).unwrap());
            let f = qs_features(&u, &v, &q).unwrap();
            prop_assert_eq!(f, qs_features(&v, &u, &q).unwrap());
            prop_assert!(f.iter().all(|x| x.is_finite()));
            let m = QsMetricModel { weights: w, bias, ..QsMetricModel::zero(QueryModel::Title) };
            let s = qs_similarity(&m, &u, &v, &q).unwrap();
            prop_assert_eq!(s, qs_similarity(&m, &v, &u, &q).unwrap());
            prop_assert!(s > 0.0 && s < 1.0);
            let scaled: Vec<f64> = u.iter().map(|x| x * scale).collect();
            prop_assert!((cosine(&scaled, &v).unwrap() - cosine(&u, &v).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn euclidean_similarity_decreasing(u in nonzero_vec(), d in 0.0f64..5.0, extra in 0.001f64..5.0) {
            let mut near = u.clone();
            near[0] += d;
            let mut far = u.clone();
            far[0] += d + extra;
            prop_assert!(euclidean_similarity(&u, &near).unwrap() > euclidean_similarity(&u, &far).unwrap());
        }
    }
}
