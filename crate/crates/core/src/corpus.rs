//! Paragraph corpus and query set.
//!
//! Both files are line-oriented JSON: one flat object per line. The corpus is
//! immutable once built and can be shared across worker threads.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Lowercase `text` and split it on every maximal run of non-alphanumeric
/// characters. The same tokenizer feeds BM25 and ROUGE; there is no stemming
/// and no stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Dedup key: lowercase with whitespace runs collapsed to one space.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<String>,
    #[serde(default)]
    pub subtopics: Vec<String>,
}

impl Query {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty query id".into());
        }
        if self.title.trim().is_empty() {
            return Err(format!("query {} has an empty title", self.id));
        }
        let mut seen = HashSet::new();
        for s in &self.subtopics {
            if !seen.insert(s.as_str()) {
                return Err(format!("query {} repeats subtopic {s:?}", self.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    paragraphs: Vec<Paragraph>,
    by_id: HashMap<String, usize>,
    avgdl: f64,
}

impl Corpus {
    /// Build a corpus from in-memory paragraphs, enforcing the id and text
    /// invariants. With `dedup`, later paragraphs whose normalized text repeats
    /// an earlier one are dropped.
    pub fn from_paragraphs(paragraphs: Vec<Paragraph>, dedup: bool) -> Result<Self> {
        let mut builder = CorpusBuilder::new(dedup);
        for p in paragraphs {
            builder.push(p).map_err(Error::Data)?;
        }
        Ok(builder.finish())
    }

    pub fn from_reader<R: BufRead>(reader: R, source_name: &str, dedup: bool) -> Result<Self> {
        let mut builder = CorpusBuilder::new(dedup);
        for (line, p) in io::read_jsonl::<Paragraph, _>(reader, source_name)? {
            builder.push(p).map_err(|message| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message,
            })?;
        }
        Ok(builder.finish())
    }

    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    /// Mean token length of the paragraphs, 0 for an empty corpus.
    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn paragraphs(&self) -> &[Paragraph] {
        &self.paragraphs
    }

    pub fn get(&self, id: &str) -> Option<&Paragraph> {
        self.by_id.get(id).map(|&i| &self.paragraphs[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        io::jsonl_string(&self.paragraphs)
    }
}

struct CorpusBuilder {
    dedup: bool,
    paragraphs: Vec<Paragraph>,
    by_id: HashMap<String, usize>,
    seen_text: HashSet<String>,
    total_tokens: usize,
}

impl CorpusBuilder {
    fn new(dedup: bool) -> Self {
        Self {
            dedup,
            paragraphs: Vec::new(),
            by_id: HashMap::new(),
            seen_text: HashSet::new(),
            total_tokens: 0,
        }
    }

    fn push(&mut self, p: Paragraph) -> std::result::Result<(), String> {
        if p.id.is_empty() {
            return Err("empty paragraph id".into());
        }
        if p.text.trim().is_empty() {
            return Err(format!("paragraph {} has empty text", p.id));
        }
        if self.by_id.contains_key(&p.id) {
            return Err(format!("duplicate paragraph id {}", p.id));
        }
        if self.dedup && !self.seen_text.insert(normalize_text(&p.text)) {
            log::debug!("dropping duplicate text of paragraph {}", p.id);
            return Ok(());
        }
        self.total_tokens += tokenize(&p.text).len();
        self.by_id.insert(p.id.clone(), self.paragraphs.len());
        self.paragraphs.push(p);
        Ok(())
    }

    fn finish(self) -> Corpus {
        let avgdl = if self.paragraphs.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.paragraphs.len() as f64
        };
        Corpus {
            paragraphs: self.paragraphs,
            by_id: self.by_id,
            avgdl,
        }
    }
}

pub fn ingest_corpus(path: &Path, dedup: bool) -> Result<Corpus> {
    Corpus::from_reader(io::open(path)?, &path.display().to_string(), dedup)
}

pub fn read_queries<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Query>> {
    let mut ids = HashSet::new();
    let mut queries = Vec::new();
    for (line, q) in io::read_jsonl::<Query, _>(reader, source_name)? {
        let err = |message| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        q.validate().map_err(err)?;
        if !ids.insert(q.id.clone()) {
            return Err(err(format!("duplicate query id {}", q.id)));
        }
        queries.push(q);
    }
    Ok(queries)
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    read_queries(io::open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lines(recs: &[(&str, &str)]) -> String {
        recs.iter()
            .map(|(id, text)| serde_json::json!({"id": id, "text": text}).to_string() + "\n")
            .collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat, sat."), ["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("C3-PO!"), ["c3", "po"]);
        assert_eq!(tokenize("  Über\tcafé  "), ["über", "café"]);
    }

    #[test]
    fn ingest_distinct() {
        let data = lines(&[("p1", "alpha"), ("p2", "beta"), ("p3", "gamma delta")]);
        let c = Corpus::from_reader(data.as_bytes(), "mem", true).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.paragraphs()[2].id, "p3");
        assert!((c.avgdl() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ingest_dedup_keeps_first() {
        let data = lines(&[("p1", "Same  Text"), ("p2", "other"), ("p3", "same text")]);
        let c = Corpus::from_reader(data.as_bytes(), "mem", true).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.contains("p1"));
        assert!(!c.contains("p3"));
        let c = Corpus::from_reader(data.as_bytes(), "mem", false).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn ingest_rejects_empty_text_with_line() {
        let data = lines(&[("p1", "alpha"), ("p2", "   ")]);
        let err = Corpus::from_reader(data.as_bytes(), "mem", false).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ingest_rejects_duplicate_id_and_garbage() {
        let data = lines(&[("p1", "alpha"), ("p1", "beta")]);
        assert!(Corpus::from_reader(data.as_bytes(), "mem", false).is_err());
        let err = Corpus::from_reader("{\"id\":\"a\",\"text\":\"x\"}\nnot json\n".as_bytes(), "f", false)
            .unwrap_err();
        assert!(err.to_string().starts_with("f:2:"), "{err}");
    }

    #[test]
    fn queries_parse_optional_fields() {
        let data = r#"{"id":"q1","title":"Natural resources","lead":"desc","subtopics":["Depletion","Protection"]}
{"id":"q2","title":"Coffee"}
"#;
        let qs = read_queries(data.as_bytes(), "q").unwrap();
        assert_eq!(qs[0].subtopics.len(), 2);
        assert_eq!(qs[1].lead, None);
        assert!(qs[1].subtopics.is_empty());
        let dup = r#"{"id":"q1","title":"x","subtopics":["a","a"]}"#;
        assert!(read_queries(dup.as_bytes(), "q").is_err());
    }

    proptest! {
        #[test]
        fn tokenize_join_idempotent(text in "\\PC{0,60}") {
            let toks = tokenize(&text);
            prop_assert_eq!(tokenize(&toks.join(" ")), toks);
        }

        #[test]
        fn dedup_leaves_no_equal_pairs(texts in prop::collection::vec("[aAbB ]{1,6}", 1..25)) {
            let paras = texts
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.trim().is_empty())
                .map(|(i, t)| Paragraph { id: format!("p{i}"), text: t.clone() })
                .collect::<Vec<_>>();
            let c = Corpus::from_paragraphs(paras.clone(), true).unwrap();
            let ps = c.paragraphs();
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    prop_assert_ne!(normalize_text(&ps[i].text), normalize_text(&ps[j].text));
                }
            }
            // deterministic
            let again = Corpus::from_paragraphs(paras, true).unwrap();
            prop_assert_eq!(again.paragraphs(), c.paragraphs());
        }
    }
}
