//! Cluster-to-section summarization with redundancy removal and provenance.
//!
//! Each candidate paragraph gets a short preliminary summary. Within a
//! cluster, summaries whose pairwise similarity reaches `tau` are linked and
//! Louvain communities of that graph become redundancy sets. Every set is
//! reduced to one representative, and representatives are chained starting
//! from the largest set, always continuing with the most similar remaining one.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::corpus::{tokenize, Corpus, Paragraph};
use crate::error::{Error, Result};
use crate::louvain::{communities, louvain, Graph};
use crate::provider::{RemoteEmbedder, RemoteSummarizer};
use crate::retrieval::Ranking;
use crate::simmetric::cosine;

pub const DEFAULT_MAX_SENTENCES: usize = 2;
pub const DEFAULT_TAU: f64 = 0.35;

#[derive(Debug, Clone)]
pub enum Summarizer {
    /// Leading sentences of the input.
    Native,
    Remote(RemoteSummarizer),
}

impl Summarizer {
    pub fn tag(&self) -> &'static str {
        match self {
            Summarizer::Native => "native-lead",
            Summarizer::Remote(_) => "remote",
        }
    }

    pub fn summarize(&self, text: &str, max_sentences: usize) -> Result<String> {
        match self {
            Summarizer::Native => Ok(lead_sentences(text, max_sentences)),
            Summarizer::Remote(r) => r.summarize(text, max_sentences),
        }
    }
}

/// Pairwise similarity between summary texts.
#[derive(Debug, Clone)]
pub enum SummarySimilarity {
    /// Cosine over token-frequency vectors.
    Lexical,
    /// Cosine over vectors from the embedding service.
    Remote(RemoteEmbedder),
}

impl SummarySimilarity {
    pub fn tag(&self) -> &'static str {
        match self {
            SummarySimilarity::Lexical => "lexical-cosine",
            SummarySimilarity::Remote(_) => "remote-cosine",
        }
    }

    /// Symmetric matrix with a unit diagonal.
    pub fn matrix(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let n = texts.len();
        let mut m = vec![vec![1.0; n]; n];
        match self {
            SummarySimilarity::Lexical => {
                let tf: Vec<BTreeMap<String, f64>> = texts.iter().map(|t| term_frequencies(t)).collect();
                for i in 0..n {
                    for j in i + 1..n {
                        let s = tf_cosine(&tf[i], &tf[j]);
                        m[i][j] = s;
                        m[j][i] = s;
                    }
                }
            }
            SummarySimilarity::Remote(e) => {
                let vecs = e.embed(texts)?;
                for i in 0..n {
                    for j in i + 1..n {
                        let s = cosine(&vecs[i], &vecs[j]).map_err(|err| Error::Provider(err.to_string()))?;
                        m[i][j] = s;
                        m[j][i] = s;
                    }
                }
            }
        }
        Ok(m)
    }
}

fn term_frequencies(text: &str) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for t in tokenize(text) {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf
}

// BTreeMap keeps the summation order, and so the result, reproducible.
fn tf_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(t, x)| large.get(t).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Cosine of token-frequency vectors; 0 when either text has no tokens.
pub fn lexical_cosine(a: &str, b: &str) -> f64 {
    tf_cosine(&term_frequencies(a), &term_frequencies(b))
}

/// Split after `.`, `!` or `?` when followed by whitespace. Abbreviations such
/// as "Dr." end a sentence under this rule.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            if let Some(&(j, next)) = chars.peek() {
                if next.is_whitespace() {
                    let s = text[start..j].trim();
                    if !s.is_empty() {
                        out.push(s);
                    }
                    start = j;
                }
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

pub fn lead_sentences(text: &str, max_sentences: usize) -> String {
    split_sentences(text)
        .into_iter()
        .take(max_sentences)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreliminarySummary {
    pub source: String,
    /// 1-based retrieval rank of the source paragraph.
    pub rank: usize,
    pub text: String,
}

pub fn preliminary_summarize(
    paragraph: &Paragraph,
    rank: usize,
    summarizer: &Summarizer,
    max_sentences: usize,
) -> Result<PreliminarySummary> {
    if max_sentences == 0 {
        return Err(Error::invalid("max_sentences must be at least 1"));
    }
    let text = summarizer
        .summarize(&paragraph.text, max_sentences)
        .map_err(|e| match e {
            Error::Provider(m) => Error::Provider(format!("paragraph {}: {m}", paragraph.id)),
            other => other,
        })?;
    if text.trim().is_empty() {
        return Err(Error::data(format!("empty summary for paragraph {}", paragraph.id)));
    }
    Ok(PreliminarySummary {
        source: paragraph.id.clone(),
        rank,
        text,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancySet {
    /// Members in ascending retrieval rank.
    pub members: Vec<PreliminarySummary>,
    pub representative: String,
    pub provenance: Vec<String>,
}

impl RedundancySet {
    pub fn new(mut members: Vec<PreliminarySummary>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("a redundancy set needs at least one member"));
        }
        members.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.source.cmp(&b.source)));
        Ok(Self {
            representative: members[0].text.clone(),
            provenance: members.iter().map(|m| m.source.clone()).collect(),
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn min_source(&self) -> &str {
        self.provenance.iter().min().map(String::as_str).unwrap_or("")
    }
}

/// Partition `summaries` into Louvain communities of the graph that links
/// pairs with `sims[i][j] >= tau`. Sets come out ordered by their first
/// member's position in `summaries`.
pub fn redundancy_sets(
    summaries: &[PreliminarySummary],
    sims: &[Vec<f64>],
    tau: f64,
    gamma: f64,
    seed: u64,
) -> Result<Vec<RedundancySet>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::invalid(format!("tau must be non-negative, got {tau}")));
    }
    let n = summaries.len();
    if sims.len() != n || sims.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("similarity matrix does not match the summaries"));
    }
    let mut graph = Graph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let s = sims[i][j];
            if !s.is_finite() {
                return Err(Error::data(format!(
                    "non-finite similarity between summaries of {} and {}",
                    summaries[i].source, summaries[j].source
                )));
            }
            if s >= tau && s > 0.0 {
                graph.add_edge(i, j, s)?;
            }
        }
    }
    let labels = louvain(&graph, gamma, seed)?;
    communities(&labels)
        .into_iter()
        .map(|c| RedundancySet::new(c.into_iter().map(|i| summaries[i].clone()).collect()))
        .collect()
}

/// Index of the member with the highest mean similarity to the others;
/// ties go to the smallest id.
pub fn medoid(ids: &[&str], sims: &[Vec<f64>]) -> usize {
    let n = ids.len();
    let score = |i: usize| -> f64 {
        if n == 1 {
            return 0.0;
        }
        (0..n).filter(|&j| j != i).map(|j| sims[i][j]).sum::<f64>() / (n - 1) as f64
    };
    (0..n)
        .max_by(|&a, &b| {
            score(a)
                .partial_cmp(&score(b))
                .unwrap_or(Ordering::Equal)
                .then_with(|| ids[b].cmp(ids[a]))
        })
        .expect("non-empty set")
}

/// Native: the medoid member's text. Remote: a summary of all member texts
/// concatenated in retrieval-rank order.
pub fn consolidate_set(
    mut set: RedundancySet,
    summarizer: &Summarizer,
    similarity: &SummarySimilarity,
    max_sentences: usize,
) -> Result<RedundancySet> {
    set.representative = match summarizer {
        Summarizer::Native => {
            if set.members.len() == 1 {
                set.members[0].text.clone()
            } else {
                let texts: Vec<&str> = set.members.iter().map(|m| m.text.as_str()).collect();
                let ids: Vec<&str> = set.members.iter().map(|m| m.source.as_str()).collect();
                let sims = similarity.matrix(&texts)?;
                set.members[medoid(&ids, &sims)].text.clone()
            }
        }
        Summarizer::Remote(_) => {
            let joined = set
                .members
                .iter()
                .map(|m| m.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            summarizer.summarize(&joined, max_sentences)?
        }
    };
    Ok(set)
}

/// Largest set first (ties: smallest min source id), then repeatedly the
/// unplaced set whose representative is most similar to the last placed one.
pub fn order_by_similarity(sets: Vec<RedundancySet>, sims: &[Vec<f64>]) -> Vec<RedundancySet> {
    let n = sets.len();
    if n == 0 {
        return sets;
    }
    let first = (0..n)
        .min_by(|&a, &b| {
            sets[b]
                .len()
                .cmp(&sets[a].len())
                .then_with(|| sets[a].min_source().cmp(sets[b].min_source()))
        })
        .expect("non-empty");
    let mut placed = vec![first];
    let mut remaining: BTreeSet<usize> = (0..n).filter(|&i| i != first).collect();
    while !remaining.is_empty() {
        let last = *placed.last().expect("placed");
        let next = *remaining
            .iter()
            .min_by(|&&a, &&b| {
                sims[last][b]
                    .partial_cmp(&sims[last][a])
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| sets[a].min_source().cmp(sets[b].min_source()))
            })
            .expect("non-empty");
        remaining.remove(&next);
        placed.push(next);
    }
    let mut slots: Vec<Option<RedundancySet>> = sets.into_iter().map(Some).collect();
    placed.into_iter().map(|i| slots[i].take().expect("placed once")).collect()
}

pub fn order_section(sets: Vec<RedundancySet>, similarity: &SummarySimilarity) -> Result<Vec<RedundancySet>> {
    let texts: Vec<&str> = sets.iter().map(|s| s.representative.as_str()).collect();
    let sims = similarity.matrix(&texts)?;
    Ok(order_by_similarity(sets, &sims))
}

/// Louvain resolution presets controlling how aggressively redundancy is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthPreset {
    Short,
    Long,
}

impl LengthPreset {
    pub fn gamma(self) -> f64 {
        match self {
            LengthPreset::Short => 0.25,
            LengthPreset::Long => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            LengthPreset::Short => "short",
            LengthPreset::Long => "long",
        }
    }
}

impl std::str::FromStr for LengthPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(LengthPreset::Short),
            "long" => Ok(LengthPreset::Long),
            _ => Err(Error::invalid(format!("unknown length preset {s:?} (short|long)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SummarizeConfig {
    pub summarizer: Summarizer,
    pub similarity: SummarySimilarity,
    pub max_sentences: usize,
    pub tau: f64,
    pub length_preset: LengthPreset,
    /// Overrides the preset's resolution when set.
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl Default for SummarizeConfig {
    fn default() -> Self {
        Self {
            summarizer: Summarizer::Native,
            similarity: SummarySimilarity::Lexical,
            max_sentences: DEFAULT_MAX_SENTENCES,
            tau: DEFAULT_TAU,
            length_preset: LengthPreset::Long,
            gamma: None,
            seed: 11,
        }
    }
}

impl SummarizeConfig {
    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(self.length_preset.gamma())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSummary {
    pub text: String,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMethod {
    pub retrieval: String,
    pub clustering: String,
    pub summarizer: String,
    pub length_preset: String,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedArticle {
    pub query_id: String,
    pub method: ArticleMethod,
    pub sections: Vec<Vec<SectionSummary>>,
}

impl GeneratedArticle {
    pub fn empty(query_id: &str, mut method: ArticleMethod, note: &str) -> Self {
        method.notes.push(note.to_string());
        Self {
            query_id: query_id.to_string(),
            method,
            sections: Vec::new(),
        }
    }

    /// Summaries one per line, sections separated by a blank line.
    pub fn to_text(&self) -> String {
        self.sections
            .iter()
            .map(|s| s.iter().map(|x| x.text.as_str()).collect::<Vec<_>>().join("\n"))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn provenance_ids(&self) -> BTreeSet<&str> {
        self.sections
            .iter()
            .flatten()
            .flat_map(|s| s.provenance.iter().map(String::as_str))
            .collect()
    }

    pub fn summary_count(&self) -> usize {
        self.sections.iter().map(Vec::len).sum()
    }
}

fn summarize_cluster(
    members: &[(usize, &Paragraph)],
    config: &SummarizeConfig,
) -> Result<Vec<SectionSummary>> {
    let summaries = members
        .iter()
        .map(|&(rank, p)| preliminary_summarize(p, rank, &config.summarizer, config.max_sentences))
        .collect::<Result<Vec<_>>>()?;
    let texts: Vec<&str> = summaries.iter().map(|s| s.text.as_str()).collect();
    let sims = config.similarity.matrix(&texts)?;
    let sets = redundancy_sets(&summaries, &sims, config.tau, config.gamma(), config.seed)?
        .into_iter()
        .map(|s| consolidate_set(s, &config.summarizer, &config.similarity, config.max_sentences))
        .collect::<Result<Vec<_>>>()?;
    Ok(order_section(sets, &config.similarity)?
        .into_iter()
        .map(|s| SectionSummary {
            text: s.representative,
            provenance: s.provenance,
        })
        .collect())
}

/// One section per cluster, sections ordered by each cluster's best retrieval
/// rank. Clusters are summarized in parallel and joined by cluster index.
pub fn assemble_article(
    clustering: &Clustering,
    ranking: &Ranking,
    corpus: &Corpus,
    config: &SummarizeConfig,
    method: ArticleMethod,
) -> Result<GeneratedArticle> {
    let ranked: BTreeSet<&str> = ranking.ids().collect();
    let clustered: BTreeSet<&str> = clustering.assignment.keys().map(String::as_str).collect();
    if ranked != clustered {
        return Err(Error::invalid(format!(
            "clustering for {} does not cover exactly the ranked paragraphs",
            clustering.query_id
        )));
    }
    let mut clusters: BTreeMap<usize, Vec<(usize, &Paragraph)>> = BTreeMap::new();
    for entry in &ranking.entries {
        let p = corpus
            .get(&entry.paragraph_id)
            .ok_or_else(|| Error::data(format!("paragraph {} not in corpus", entry.paragraph_id)))?;
        clusters
            .entry(clustering.assignment[&entry.paragraph_id])
            .or_default()
            .push((entry.rank, p));
    }
    let mut order: Vec<(usize, usize)> = clusters
        .iter()
        .map(|(&c, members)| (members.iter().map(|m| m.0).min().unwrap_or(usize::MAX), c))
        .collect();
    order.sort_unstable();
    let sections = order
        .par_iter()
        .map(|(_, c)| summarize_cluster(&clusters[c], config))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedArticle {
        query_id: clustering.query_id.clone(),
        method,
        sections,
    })
}
