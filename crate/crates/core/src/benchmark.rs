//! Task-coordinated benchmark derivation from structured article outlines.
//!
//! One outline (a page title, an optional lead and a list of sections holding
//! paragraph ids) yields four artifacts that agree with each other:
//!
//! * a query whose subtopics are the section headings,
//! * title-level qrels marking every paragraph of the page relevant,
//! * cluster gold labelling each paragraph with its top-level section,
//! * a gold article made of the lead and the page's paragraph texts.
//!
//! [`coordination_check`] verifies the agreement after the fact, so hand-edited
//! artifacts can be validated too.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Query};
use crate::error::{Error, Result};
use crate::io;

/// Subtopic slug: lowercased heading with every non-alphanumeric character
/// replaced by `-`.
pub fn slug(heading: &str) -> String {
    heading
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '-' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineSection {
    pub heading: String,
    #[serde(default)]
    pub paragraph_ids: Vec<String>,
    /// Nested sections; their paragraphs are attributed to the enclosing
    /// top-level section.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsections: Vec<OutlineSection>,
}

impl OutlineSection {
    fn collect_ids<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.extend(self.paragraph_ids.iter().map(String::as_str));
        for s in &self.subsections {
            s.collect_ids(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleOutline {
    pub page_id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<String>,
    pub sections: Vec<OutlineSection>,
}

pub fn read_outlines<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<ArticleOutline>> {
    Ok(io::read_jsonl(reader, source_name)?
        .into_iter()
        .map(|(_, o)| o)
        .collect())
}

pub fn load_outlines(path: &Path) -> Result<Vec<ArticleOutline>> {
    read_outlines(io::open(path)?, &path.display().to_string())
}

/// Key of a qrels group: a query, optionally narrowed to one subtopic slug.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QrelKey {
    pub query: String,
    pub subtopic: Option<String>,
}

impl QrelKey {
    pub fn title(query: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            subtopic: None,
        }
    }

    pub fn section(query: impl Into<String>, subtopic: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            subtopic: Some(subtopic.into()),
        }
    }

    /// Render as `query` or `query/slug`.
    pub fn render(&self) -> String {
        match &self.subtopic {
            Some(s) => format!("{}/{}", self.query, s),
            None => self.query.clone(),
        }
    }

    /// Inverse of [`QrelKey::render`]. Slugs never contain `/`, so the split
    /// happens at the last one.
    pub fn parse(s: &str) -> Self {
        match s.rsplit_once('/') {
            Some((q, sub)) if !q.is_empty() && !sub.is_empty() => Self::section(q, sub),
            _ => Self::title(s),
        }
    }
}

/// Graded relevance judgments in TREC layout.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    entries: BTreeMap<QrelKey, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: QrelKey, paragraph: impl Into<String>, grade: u32) -> Result<()> {
        let paragraph = paragraph.into();
        let group = self.entries.entry(key.clone()).or_default();
        if group.contains_key(&paragraph) {
            return Err(Error::data(format!(
                "duplicate judgment for {} {}",
                key.render(),
                paragraph
            )));
        }
        group.insert(paragraph, grade);
        Ok(())
    }

    pub fn remove(&mut self, key: &QrelKey, paragraph: &str) -> Option<u32> {
        self.entries.get_mut(key)?.remove(paragraph)
    }

    pub fn grades(&self, key: &QrelKey) -> Option<&BTreeMap<String, u32>> {
        self.entries.get(key)
    }

    pub fn grade(&self, key: &QrelKey, paragraph: &str) -> u32 {
        self.entries
            .get(key)
            .and_then(|g| g.get(paragraph))
            .copied()
            .unwrap_or(0)
    }

    /// Paragraphs with grade > 0 under `key`.
    pub fn relevant(&self, key: &QrelKey) -> BTreeSet<String> {
        self.entries
            .get(key)
            .map(|g| {
                g.iter()
                    .filter(|(_, &grade)| grade > 0)
                    .map(|(p, _)| p.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn keys(&self) -> impl Iterator<Item = &QrelKey> {
        self.entries.keys()
    }

    /// Section-level groups of one query, in slug order.
    pub fn sections_of<'a>(
        &'a self,
        query: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a BTreeMap<String, u32>)> + 'a {
        self.entries.iter().filter_map(move |(k, g)| match &k.subtopic {
            Some(s) if k.query == query => Some((s.as_str(), g)),
            _ => None,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `<query-or-query/slug> 0 <paragraph-id> <grade>` per line.
    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (key, group) in &self.entries {
            let k = key.render();
            for (p, g) in group {
                let _ = writeln!(out, "{k} 0 {p} {g}");
            }
        }
        out
    }

    pub fn read_trec<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut qrels = Qrels::new();
        for item in io::numbered_lines(reader, source_name) {
            let (line, text) = item?;
            let err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message,
            };
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let grade: i64 = fields[3]
                .parse()
                .map_err(|_| err(format!("bad grade {:?}", fields[3])))?;
            let grade = u32::try_from(grade).map_err(|_| err(format!("negative grade {grade}")))?;
            qrels
                .insert(QrelKey::parse(fields[0]), fields[2], grade)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(qrels)
    }

    pub fn load_trec(path: &Path) -> Result<Self> {
        Self::read_trec(io::open(path)?, &path.display().to_string())
    }
}

/// Per-query map from paragraph id to its section slug.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterGold {
    labels: BTreeMap<String, BTreeMap<String, String>>,
}

impl ClusterGold {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, paragraph: &str, label: &str) {
        self.labels
            .entry(query.to_string())
            .or_default()
            .insert(paragraph.to_string(), label.to_string());
    }

    pub fn labels(&self, query: &str) -> Option<&BTreeMap<String, String>> {
        self.labels.get(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn label_set(&self, query: &str) -> BTreeSet<&str> {
        self.labels
            .get(query)
            .map(|m| m.values().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (q, m) in &self.labels {
            for (p, l) in m {
                let _ = writeln!(out, "{q} {p} {l}");
            }
        }
        out
    }

    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut gold = ClusterGold::new();
        for item in io::numbered_lines(reader, source_name) {
            let (line, text) = item?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            gold.insert(fields[0], fields[1], fields[2]);
        }
        Ok(gold)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(io::open(path)?, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldArticle {
    pub query_id: String,
    pub text: String,
}

pub fn load_gold_articles(path: &Path) -> Result<Vec<GoldArticle>> {
    Ok(io::read_jsonl(io::open(path)?, &path.display().to_string())?
        .into_iter()
        .map(|(_, g)| g)
        .collect())
}

/// Everything derived from one outline set.
#[derive(Debug, Clone, Default)]
pub struct Benchmark {
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub cluster_gold: ClusterGold,
    pub gold_articles: Vec<GoldArticle>,
    /// Page ids dropped for having fewer than `min_subtopics` non-empty sections.
    pub skipped: Vec<String>,
}

impl Benchmark {
    pub fn gold_article(&self, query: &str) -> Option<&GoldArticle> {
        self.gold_articles.iter().find(|g| g.query_id == query)
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }
}

pub const QUERIES_FILE: &str = "queries.jsonl";
pub const QRELS_FILE: &str = "qrels.txt";
pub const CLUSTERS_FILE: &str = "clusters.txt";
pub const GOLD_FILE: &str = "gold.jsonl";
pub const SKIPPED_FILE: &str = "skipped.txt";

impl Benchmark {
    /// Write the benchmark as five files under `dir`, creating it if needed.
    /// Returns the written file names.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let skipped: String = self.skipped.iter().map(|s| format!("{s}\n")).collect();
        let files = [
            (QUERIES_FILE, io::jsonl_string(&self.queries)?),
            (QRELS_FILE, self.qrels.to_trec()),
            (CLUSTERS_FILE, self.cluster_gold.to_lines()),
            (GOLD_FILE, io::jsonl_string(&self.gold_articles)?),
            (SKIPPED_FILE, skipped),
        ];
        for (name, contents) in &files {
            io::write_atomic(&dir.join(name), contents.as_bytes())?;
        }
        Ok(files.iter().map(|(n, _)| n.to_string()).collect())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let skipped_path = dir.join(SKIPPED_FILE);
        let skipped = if skipped_path.exists() {
            io::read_to_string(&skipped_path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string)
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            queries: crate::corpus::load_queries(&dir.join(QUERIES_FILE))?,
            qrels: Qrels::load_trec(&dir.join(QRELS_FILE))?,
            cluster_gold: ClusterGold::load(&dir.join(CLUSTERS_FILE))?,
            gold_articles: load_gold_articles(&dir.join(GOLD_FILE))?,
            skipped,
        })
    }
}

struct FlatSection<'a> {
    heading: &'a str,
    paragraphs: Vec<&'a str>,
}

fn flatten(outline: &ArticleOutline) -> Result<Vec<FlatSection<'_>>> {
    let mut headings = HashSet::new();
    let mut slugs = HashSet::new();
    let mut placed = HashSet::new();
    let mut sections = Vec::new();
    for s in &outline.sections {
        if !headings.insert(s.heading.as_str()) || !slugs.insert(slug(&s.heading)) {
            return Err(Error::data(format!(
                "page {}: section heading {:?} is not unique",
                outline.page_id, s.heading
            )));
        }
        let mut ids = Vec::new();
        s.collect_ids(&mut ids);
        // a paragraph listed twice on a page belongs to its first section
        ids.retain(|id| placed.insert(*id));
        sections.push(FlatSection {
            heading: &s.heading,
            paragraphs: ids,
        });
    }
    Ok(sections)
}

/// Derive queries, title-level qrels, cluster gold and gold articles.
///
/// Outlines with fewer than `min_subtopics` non-empty top-level sections are
/// skipped and listed in [`Benchmark::skipped`].
pub fn derive_benchmark(
    outlines: &[ArticleOutline],
    corpus: &Corpus,
    min_subtopics: usize,
) -> Result<Benchmark> {
    if min_subtopics < 1 {
        return Err(Error::invalid("min_subtopics must be at least 1"));
    }
    let mut bench = Benchmark::default();
    let mut page_ids = HashSet::new();
    for outline in outlines {
        if !page_ids.insert(outline.page_id.as_str()) {
            return Err(Error::data(format!("duplicate page id {}", outline.page_id)));
        }
        let sections = flatten(outline)?;
        for id in sections.iter().flat_map(|s| &s.paragraphs) {
            if !corpus.contains(id) {
                return Err(Error::data(format!(
                    "page {}: paragraph {id} not found in corpus",
                    outline.page_id
                )));
            }
        }
        let non_empty: Vec<&FlatSection> =
            sections.iter().filter(|s| !s.paragraphs.is_empty()).collect();
        if non_empty.len() < min_subtopics {
            log::info!(
                "skipping page {}: {} non-empty sections",
                outline.page_id,
                non_empty.len()
            );
            bench.skipped.push(outline.page_id.clone());
            continue;
        }

        let qid = outline.page_id.as_str();
        let mut text_parts: Vec<&str> = Vec::new();
        if let Some(lead) = outline.lead.as_deref().filter(|l| !l.trim().is_empty()) {
            text_parts.push(lead);
        }
        for s in &non_empty {
            let label = slug(s.heading);
            for &pid in &s.paragraphs {
                bench.qrels.insert(QrelKey::title(qid), pid, 1)?;
                bench.cluster_gold.insert(qid, pid, &label);
                text_parts.push(&corpus.get(pid).expect("resolved above").text);
            }
        }
        bench.queries.push(Query {
            id: qid.to_string(),
            title: outline.title.clone(),
            lead: outline.lead.clone(),
            subtopics: non_empty.iter().map(|s| s.heading.to_string()).collect(),
        });
        bench.gold_articles.push(GoldArticle {
            query_id: qid.to_string(),
            text: text_parts.join("\n\n"),
        });
    }
    Ok(bench)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// A clustered paragraph is not judged relevant for its query.
    ClusteredNotRelevant { query: String, paragraph: String },
    /// A cluster label is not one of the query's subtopics.
    UnknownLabel { query: String, label: String },
    /// No gold article exists for a clustered query.
    MissingGoldArticle { query: String },
    /// None of a label's paragraphs appears in the gold article text.
    LabelNotInGold { query: String, label: String },
}

/// Check that clustered paragraphs are relevant and that every cluster is
/// represented in the gold article. With a corpus at hand, representation is
/// checked on the text itself; otherwise via the query's subtopic list.
pub fn coordination_check(
    queries: &[Query],
    qrels: &Qrels,
    cluster_gold: &ClusterGold,
    gold_articles: &[GoldArticle],
    corpus: Option<&Corpus>,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (qid, labels) in &cluster_gold.labels {
        let relevant = qrels.relevant(&QrelKey::title(qid.as_str()));
        for pid in labels.keys() {
            if !relevant.contains(pid) {
                violations.push(Violation::ClusteredNotRelevant {
                    query: qid.clone(),
                    paragraph: pid.clone(),
                });
            }
        }

        let known: HashSet<String> = queries
            .iter()
            .find(|q| &q.id == qid)
            .map(|q| q.subtopics.iter().map(|s| slug(s)).collect())
            .unwrap_or_default();
        let gold = gold_articles.iter().find(|g| &g.query_id == qid);
        if gold.is_none() {
            violations.push(Violation::MissingGoldArticle { query: qid.clone() });
        }
        for label in cluster_gold.label_set(qid) {
            if !known.contains(label) {
                violations.push(Violation::UnknownLabel {
                    query: qid.clone(),
                    label: label.to_string(),
                });
                continue;
            }
            if let (Some(corpus), Some(gold)) = (corpus, gold) {
                let shown = labels
                    .iter()
                    .filter(|(_, l)| l.as_str() == label)
                    .filter_map(|(p, _)| corpus.get(p))
                    .any(|p| gold.text.contains(p.text.as_str()));
                if !shown {
                    violations.push(Violation::LabelNotInGold {
                        query: qid.clone(),
                        label: label.to_string(),
                    });
                }
            }
        }
    }
    violations
}
