//! BM25 retrieval over an in-memory inverted index, plus reciprocal rank
//! aggregation of several rankings.
//!
//! Scoring follows the Lucene form without the `(k1 + 1)` numerator factor:
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(d, q) = Σ_{t in q} idf(t) · tf / (tf + k1 · (1 - b + b · dl / avgdl))
//! ```
//!
//! Every query token occurrence contributes, so a token repeated in the query
//! text counts once per occurrence.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, Query};
use crate::error::{Error, Result};
use crate::io;

pub const DEFAULT_K: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    /// Lucene defaults.
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::invalid(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Term postings over documents numbered in ascending paragraph-id order, so
/// a lower document number also means a lower id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    params: Bm25Params,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    avgdl: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

pub fn build_index(corpus: &Corpus, params: Bm25Params) -> Result<InvertedIndex> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::data("cannot index an empty corpus"));
    }
    let mut docs: Vec<_> = corpus.paragraphs().iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));

    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_ids = Vec::with_capacity(docs.len());
    let mut doc_lens = Vec::with_capacity(docs.len());
    for (doc, p) in docs.iter().enumerate() {
        let tokens = tokenize(&p.text);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting {
                doc: doc as u32,
                tf: count,
            });
        }
        doc_ids.push(p.id.clone());
        doc_lens.push(tokens.len() as u32);
    }
    let avgdl = doc_lens.iter().map(|&l| l as f64).sum::<f64>() / doc_lens.len() as f64;
    Ok(InvertedIndex {
        params,
        doc_ids,
        doc_lens,
        avgdl,
        postings,
    })
}

impl InvertedIndex {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_lens[doc as usize]
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.postings(term).len() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let index: Self =
            serde_json::from_str(s).map_err(|e| Error::data(format!("bad index snapshot: {e}")))?;
        index.params.validate()?;
        Ok(index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub paragraph_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub entries: Vec<RankedDoc>,
    pub method: String,
}

impl Ranking {
    /// Build from `(id, score)` pairs: sorts by descending score then
    /// ascending id, keeps the first `k`, assigns ranks from 1.
    pub fn from_scores(
        query_id: &str,
        method: &str,
        mut scored: Vec<(String, f64)>,
        k: usize,
    ) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ranking {
            query_id: query_id.to_string(),
            entries: scored
                .into_iter()
                .enumerate()
                .map(|(i, (paragraph_id, score))| RankedDoc {
                    paragraph_id,
                    score,
                    rank: i + 1,
                })
                .collect(),
            method: method.to_string(),
        }
    }

    pub fn empty(query_id: &str, method: &str) -> Self {
        Self::from_scores(query_id, method, Vec::new(), 0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.paragraph_id.as_str())
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.paragraph_id == id).map(|e| e.rank)
    }

    /// Scores non-increasing, ranks contiguous from 1, ids unique, length ≤ k.
    pub fn check_invariants(&self, k: usize) -> std::result::Result<(), String> {
        if self.entries.len() > k {
            return Err(format!("{} entries exceed k={k}", self.entries.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(format!("rank {} at position {}", e.rank, i + 1));
            }
            if !seen.insert(&e.paragraph_id) {
                return Err(format!("duplicate paragraph {}", e.paragraph_id));
            }
            if i > 0 && e.score > self.entries[i - 1].score {
                return Err(format!("score increases at rank {}", e.rank));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RetrievalMethod {
    #[serde(rename = "bm25-title")]
    Title,
    #[serde(rename = "bm25-topic-expansion")]
    TopicExpansion,
    #[serde(rename = "bm25-topic-aggregation")]
    TopicAggregation,
}

impl RetrievalMethod {
    pub const ALL: [RetrievalMethod; 3] = [
        RetrievalMethod::Title,
        RetrievalMethod::TopicExpansion,
        RetrievalMethod::TopicAggregation,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RetrievalMethod::Title => "bm25-title",
            RetrievalMethod::TopicExpansion => "bm25-topic-expansion",
            RetrievalMethod::TopicAggregation => "bm25-topic-aggregation",
        }
    }

    /// Whether the method reads the query's subtopic headings.
    pub fn uses_oracle_subtopics(self) -> bool {
        !matches!(self, RetrievalMethod::Title)
    }

    pub fn retrieve(self, index: &InvertedIndex, query: &Query, k: usize) -> Result<Ranking> {
        let mut ranking = match self {
            RetrievalMethod::Title => bm25_search(index, &query.title, k)?,
            RetrievalMethod::TopicExpansion => bm25_topic_expansion(index, query, k)?,
            RetrievalMethod::TopicAggregation => bm25_topic_aggregation(index, query, k)?,
        };
        ranking.query_id = query.id.clone();
        ranking.method = self.tag().to_string();
        Ok(ranking)
    }
}

impl std::str::FromStr for RetrievalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown retrieval method {s:?}")))
    }
}

impl std::fmt::Display for RetrievalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Plain BM25 over `query_text`. The returned ranking has an empty query id
/// and the `bm25-title` tag; callers that know better overwrite both.
pub fn bm25_search(index: &InvertedIndex, query_text: &str, k: usize) -> Result<Ranking> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let Bm25Params { k1, b } = index.params;
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for term in tokenize(query_text) {
        let postings = index.postings(&term);
        if postings.is_empty() {
            continue;
        }
        let idf = index.idf(&term);
        for p in postings {
            let tf = p.tf as f64;
            let norm = k1 * (1.0 - b + b * index.doc_len(p.doc) as f64 / index.avgdl);
            *acc.entry(p.doc).or_insert(0.0) += idf * tf / (tf + norm);
        }
    }
    let scored = acc
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(doc, s)| (index.doc_id(doc).to_string(), s))
        .collect();
    Ok(Ranking::from_scores(
        "",
        RetrievalMethod::Title.tag(),
        scored,
        k,
    ))
}

fn require_subtopics(query: &Query) -> Result<()> {
    if query.subtopics.is_empty() {
        return Err(Error::data(format!(
            "query {} has no subtopics; topic-based retrieval needs oracle subtopic headings",
            query.id
        )));
    }
    Ok(())
}

/// Query text used by topic expansion: the title followed by each distinct
/// subtopic heading once.
pub fn expansion_text(query: &Query) -> String {
    let mut parts = vec![query.title.as_str()];
    for h in &query.subtopics {
        if !parts[1..].contains(&h.as_str()) {
            parts.push(h);
        }
    }
    parts.join(" ")
}

pub fn bm25_topic_expansion(index: &InvertedIndex, query: &Query, k: usize) -> Result<Ranking> {
    require_subtopics(query)?;
    let mut r = bm25_search(index, &expansion_text(query), k)?;
    r.query_id = query.id.clone();
    r.method = RetrievalMethod::TopicExpansion.tag().to_string();
    Ok(r)
}

/// Reciprocal rank aggregation: `score(d) = Σ_R 1 / rank_R(d)` over the
/// rankings that contain `d`, with no additive offset.
pub fn rrf_aggregate(rankings: &[Ranking], k: usize, method: &str) -> Result<Ranking> {
    let first = rankings
        .first()
        .ok_or_else(|| Error::invalid("rank aggregation needs at least one ranking"))?;
    if let Some(other) = rankings.iter().find(|r| r.query_id != first.query_id) {
        return Err(Error::invalid(format!(
            "cannot aggregate rankings of different queries ({} vs {})",
            first.query_id, other.query_id
        )));
    }
    // Exact sums: distinct rank multisets can share a value (1/4 + 1/12 = 1/3)
    // that floating point would split.
    let mut acc: HashMap<&str, BigRational> = HashMap::new();
    for r in rankings {
        for e in &r.entries {
            if e.rank == 0 {
                return Err(Error::data(format!("rank 0 in ranking for {}", r.query_id)));
            }
            let term = BigRational::new(BigInt::one(), BigInt::from(e.rank));
            *acc.entry(e.paragraph_id.as_str()).or_insert_with(BigRational::zero) += term;
        }
    }
    let mut scored: Vec<(&str, BigRational)> = acc.into_iter().collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(k);
    Ok(Ranking {
        query_id: first.query_id.clone(),
        entries: scored
            .into_iter()
            .enumerate()
            .map(|(i, (id, s))| RankedDoc {
                paragraph_id: id.to_string(),
                score: s.to_f64().unwrap_or(0.0),
                rank: i + 1,
            })
            .collect(),
        method: method.to_string(),
    })
}

pub fn bm25_topic_aggregation(index: &InvertedIndex, query: &Query, k: usize) -> Result<Ranking> {
    require_subtopics(query)?;
    let per_topic = query
        .subtopics
        .iter()
        .map(|h| {
            let mut r = bm25_search(index, &format!("{} {}", query.title, h), k)?;
            r.query_id = query.id.clone();
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    rrf_aggregate(&per_topic, k, RetrievalMethod::TopicAggregation.tag())
}

/// `<query-id> Q0 <paragraph-id> <rank> <score> <method-tag>` per entry.
pub fn write_run(rankings: &[Ranking]) -> String {
    let mut out = String::new();
    for r in rankings {
        for e in &r.entries {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                r.query_id, e.paragraph_id, e.rank, e.score, r.method
            );
        }
    }
    out
}

/// Parse a run file; rankings come back in first-appearance order of their
/// query ids, entries sorted by rank.
pub fn read_run<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Ranking>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_query: HashMap<String, Ranking> = HashMap::new();
    for item in io::numbered_lines(reader, source_name) {
        let (line, text) = item?;
        let err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let rank: usize = f[3].parse().map_err(|_| err(format!("bad rank {:?}", f[3])))?;
        let score: f64 = f[4].parse().map_err(|_| err(format!("bad score {:?}", f[4])))?;
        let r = by_query.entry(f[0].to_string()).or_insert_with(|| {
            order.push(f[0].to_string());
            Ranking {
                query_id: f[0].to_string(),
                entries: Vec::new(),
                method: f[5].to_string(),
            }
        });
        r.entries.push(RankedDoc {
            paragraph_id: f[2].to_string(),
            score,
            rank,
        });
    }
    order
        .into_iter()
        .map(|q| {
            let mut r = by_query.remove(&q).expect("recorded");
            r.entries.sort_by_key(|e| e.rank);
            r.check_invariants(usize::MAX)
                .map_err(|m| Error::data(format!("run for query {q}: {m}")))?;
            Ok(r)
        })
        .collect()
}

pub fn load_run(path: &Path) -> Result<Vec<Ranking>> {
    read_run(io::open(path)?, &path.display().to_string())
}
