//! Retrieval, clustering and summary metrics plus paired significance testing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{GoldArticle, QrelKey, Qrels};
use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::retrieval::Ranking;
use crate::summarize::GeneratedArticle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub aggregate: f64,
    pub per_query: BTreeMap<String, f64>,
    pub skipped: Vec<String>,
}

impl MetricReport {
    /// Aggregate is the mean of `per_query`, or 0 when nothing was evaluated.
    pub fn new(metric: &str, per_query: BTreeMap<String, f64>, skipped: Vec<String>) -> Self {
        let aggregate = if per_query.is_empty() {
            0.0
        } else {
            per_query.values().sum::<f64>() / per_query.len() as f64
        };
        Self {
            metric: metric.to_string(),
            aggregate,
            per_query,
            skipped,
        }
    }
}

/// Mean over relevant documents of precision at the rank where each is
/// retrieved; relevant documents never retrieved contribute 0.
pub fn average_precision<'a>(ranked: impl IntoIterator<Item = &'a str>, relevant: &BTreeSet<String>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.into_iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// MAP over `query_ids` against title-level qrels. Queries without relevant
/// paragraphs are skipped; a missing ranking counts as AP 0.
pub fn mean_average_precision(rankings: &[Ranking], qrels: &Qrels, query_ids: &[String]) -> MetricReport {
    let by_query: HashMap<&str, &Ranking> = rankings.iter().map(|r| (r.query_id.as_str(), r)).collect();
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();
    for q in query_ids {
        let relevant = qrels.relevant(&QrelKey::title(q.as_str()));
        if relevant.is_empty() {
            skipped.push(q.clone());
            continue;
        }
        let ap = by_query
            .get(q.as_str())
            .map_or(0.0, |r| average_precision(r.ids(), &relevant));
        per_query.insert(q.clone(), ap);
    }
    MetricReport::new("map", per_query, skipped)
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Pair-counting adjusted Rand index of two aligned labelings.
///
/// Identical partitions score exactly 1 (including single-item and
/// single-cluster cases); otherwise a zero denominator scores 0.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "labelings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("cannot compare empty labelings"));
    }
    let mut table: BTreeMap<(&A, &B), u64> = BTreeMap::new();
    let mut rows: BTreeMap<&A, u64> = BTreeMap::new();
    let mut cols: BTreeMap<&B, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    if table.len() == rows.len() && table.len() == cols.len() {
        return Ok(1.0);
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| choose2(n)).sum();
    let expected = sum_a * sum_b / choose2(a.len() as u64);
    let max = (sum_a + sum_b) / 2.0;
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((index - expected) / denom)
}

/// ARI over the items labeled in both maps.
pub fn ari_on_intersection<A: Ord, B: Ord>(
    system: &BTreeMap<String, A>,
    gold: &BTreeMap<String, B>,
) -> Result<f64> {
    let (a, b): (Vec<&A>, Vec<&B>) = system
        .iter()
        .filter_map(|(id, x)| gold.get(id).map(|y| (x, y)))
        .unzip();
    if a.is_empty() {
        return Err(Error::data("no items labeled by both the system and the gold"));
    }
    adjusted_rand_index(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(matched: usize, candidate: usize, reference: usize) -> Self {
        let precision = if candidate == 0 { 0.0 } else { matched as f64 / candidate as f64 };
        let recall = if reference == 0 { 0.0 } else { matched as f64 / reference as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap of `candidate` against `reference`, for n of 1 or 2.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<RougeScore> {
    if !(1..=2).contains(&n) {
        return Err(Error::invalid(format!("ROUGE-{n} is not supported (1 or 2)")));
    }
    let c_tokens = tokenize(candidate);
    let r_tokens = tokenize(reference);
    let c = ngram_counts(&c_tokens, n);
    let r = ngram_counts(&r_tokens, n);
    let matched: usize = c.iter().map(|(g, &x)| x.min(r.get(g).copied().unwrap_or(0))).sum();
    Ok(RougeScore::from_counts(
        matched,
        c.values().sum(),
        r.values().sum(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        Self {
            replicates: 10_000,
            seed: 7,
            alpha: 0.05,
        }
    }
}

pub const MIN_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub p_value: f64,
    pub mean_difference: f64,
    pub direction: Direction,
    pub significant: bool,
}

/// Two-sided paired bootstrap on per-query differences `a - b`.
///
/// Queries are resampled with replacement; p is twice the fraction of
/// resampled mean differences on the other side of zero from the observed
/// mean (ties with zero count as crossing), capped at 1. Replicate `r` draws
/// from stream `r` of a generator seeded with `params.seed`, so the result
/// does not depend on thread scheduling.
pub fn paired_significance(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
    params: BootstrapParams,
) -> Result<Significance> {
    if !a.keys().eq(b.keys()) {
        return Err(Error::invalid("paired samples cover different query sets"));
    }
    if params.replicates < MIN_REPLICATES {
        return Err(Error::invalid(format!(
            "at least {MIN_REPLICATES} bootstrap replicates are required, got {}",
            params.replicates
        )));
    }
    let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean = if n == 0 { 0.0 } else { diffs.iter().sum::<f64>() / n as f64 };
    if n == 0 || diffs.iter().all(|&d| d == 0.0) || mean == 0.0 {
        return Ok(Significance {
            p_value: 1.0,
            mean_difference: mean,
            direction: Direction::None,
            significant: false,
        });
    }
    let positive = mean > 0.0;
    let crossing: usize = (0..params.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(r as u64);
            let total: f64 = (0..n).map(|_| diffs[rng.random_range(0..n)]).sum();
            let m = total / n as f64;
            usize::from(if positive { m <= 0.0 } else { m >= 0.0 })
        })
        .sum();
    let p_value = (2.0 * crossing as f64 / params.replicates as f64).min(1.0);
    Ok(Significance {
        p_value,
        mean_difference: mean,
        direction: if positive { Direction::Positive } else { Direction::Negative },
        significant: p_value < params.alpha,
    })
}

pub const ROUGE_COLUMNS: [&str; 6] = ["R1-P", "R1-R", "R1-F", "R2-P", "R2-R", "R2-F"];

/// Per-query ROUGE-1/2 precision, recall and F1 for every article, one map
/// per entry of [`ROUGE_COLUMNS`].
pub fn rouge_per_query(articles: &[GeneratedArticle], gold: &[GoldArticle]) -> Result<Vec<BTreeMap<String, f64>>> {
    let gold: HashMap<&str, &str> = gold.iter().map(|g| (g.query_id.as_str(), g.text.as_str())).collect();
    let mut cols = vec![BTreeMap::new(); ROUGE_COLUMNS.len()];
    for a in articles {
        let reference = gold
            .get(a.query_id.as_str())
            .ok_or_else(|| Error::data(format!("no gold article for query {}", a.query_id)))?;
        let text = a.to_text();
        for (n, base) in [(1, 0), (2, 3)] {
            let s = rouge_n(&text, reference, n)?;
            cols[base].insert(a.query_id.clone(), s.precision);
            cols[base + 1].insert(a.query_id.clone(), s.recall);
            cols[base + 2].insert(a.query_id.clone(), s.f1);
        }
    }
    Ok(cols)
}

pub fn rouge_reports(articles: &[GeneratedArticle], gold: &[GoldArticle]) -> Result<Vec<MetricReport>> {
    Ok(rouge_per_query(articles, gold)?
        .into_iter()
        .zip(ROUGE_COLUMNS)
        .map(|(per_query, name)| MetricReport::new(&name.to_lowercase(), per_query, Vec::new()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    None,
    Up,
    Down,
}

impl Mark {
    pub fn symbol(self) -> &'static str {
        match self {
            Mark::None => "",
            Mark::Up => "▲",
            Mark::Down => "▼",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub mark: Mark,
    pub p_value: Option<f64>,
    pub bold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub method: String,
    pub baseline: bool,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMatrix {
    pub columns: Vec<String>,
    pub baseline: String,
    pub significance: BootstrapParams,
    pub rows: Vec<MatrixRow>,
}

/// ROUGE matrix over labeled article sets. Every non-baseline cell is tested
/// against the baseline row and marked when `p < alpha`; the largest value in
/// each column is bolded on its first occurrence.
pub fn evaluation_matrix(
    runs: &[(String, Vec<GeneratedArticle>)],
    gold: &[GoldArticle],
    baseline: &str,
    params: BootstrapParams,
) -> Result<EvaluationMatrix> {
    if params.replicates < MIN_REPLICATES {
        return Err(Error::invalid(format!(
            "at least {MIN_REPLICATES} bootstrap replicates are required, got {}",
            params.replicates
        )));
    }
    let per_run = runs
        .iter()
        .map(|(_, articles)| rouge_per_query(articles, gold))
        .collect::<Result<Vec<_>>>()?;
    let base = runs
        .iter()
        .position(|(m, _)| m == baseline)
        .ok_or_else(|| Error::invalid(format!("baseline {baseline} is not among the evaluated methods")))?;
    let mut rows = Vec::with_capacity(runs.len());
    for (i, (method, _)) in runs.iter().enumerate() {
        let mut cells = Vec::with_capacity(ROUGE_COLUMNS.len());
        for c in 0..ROUGE_COLUMNS.len() {
            let values = &per_run[i][c];
            let value = if values.is_empty() {
                0.0
            } else {
                values.values().sum::<f64>() / values.len() as f64
            };
            let (mark, p_value) = if i == base {
                (Mark::None, None)
            } else {
                let s = paired_significance(values, &per_run[base][c], params)
                    .map_err(|e| Error::data(format!("{method} vs {baseline}: {e}")))?;
                let mark = match (s.significant, s.direction) {
                    (true, Direction::Positive) => Mark::Up,
                    (true, Direction::Negative) => Mark::Down,
                    _ => Mark::None,
                };
                (mark, Some(s.p_value))
            };
            cells.push(Cell {
                value,
                mark,
                p_value,
                bold: false,
            });
        }
        rows.push(MatrixRow {
            method: method.clone(),
            baseline: i == base,
            cells,
        });
    }
    for c in 0..ROUGE_COLUMNS.len() {
        let mut best: Option<usize> = None;
        for (i, row) in rows.iter().enumerate() {
            if best.is_none_or(|b| row.cells[c].value > rows[b].cells[c].value) {
                best = Some(i);
            }
        }
        if let Some(b) = best {
            rows[b].cells[c].bold = true;
        }
    }
    Ok(EvaluationMatrix {
        columns: ROUGE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        baseline: baseline.to_string(),
        significance: params,
        rows,
    })
}

impl EvaluationMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,baseline");
        for c in &self.columns {
            let _ = write!(out, ",{c},{c} mark,{c} max");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.method, row.baseline);
            for cell in &row.cells {
                let mark = match cell.mark {
                    Mark::None => "",
                    Mark::Up => "up",
                    Mark::Down => "down",
                };
                let _ = write!(out, ",{:.4},{mark},{}", cell.value, cell.bold);
            }
            out.push('\n');
        }
        out
    }

    /// Method rows and metric columns; `*` marks the baseline, `**x**` the
    /// column maximum, and ▲/▼ significant changes against the baseline.
    pub fn to_text(&self) -> String {
        let header: Vec<String> = std::iter::once("method".to_string())
            .chain(self.columns.iter().cloned())
            .collect();
        let mut table = vec![header];
        for row in &self.rows {
            let mut line = vec![if row.baseline {
                format!("{} ★", row.method)
            } else {
                row.method.clone()
            }];
            for cell in &row.cells {
                let v = format!("{:.4}", cell.value);
                let v = if cell.bold { format!("**{v}**") } else { v };
                line.push(format!("{}{}", cell.mark.symbol(), v));
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in table.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    let pad = widths[c] - s.chars().count();
                    if c == 0 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summarize::{ArticleMethod, SectionSummary};
    use proptest::prelude::*;
    use rand::Rng;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(["a", "b"], &set(&["a", "b"])), 1.0);
        let ap = average_precision(["d1", "d2", "d3"], &set(&["d1", "d3"]));
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(average_precision(["x", "y"], &set(&["a"])), 0.0);
        // unretrieved relevant docs count against recall
        assert_eq!(average_precision(["a"], &set(&["a", "b"])), 0.5);
    }

    #[test]
    fn map_skips_unjudged_queries() {
        let mut qrels = Qrels::new();
        qrels.insert(QrelKey::title("q1"), "a", 1).unwrap();
        qrels.insert(QrelKey::title("q2"), "b", 0).unwrap();
        let run = vec![Ranking::from_scores("q1", "m", vec![("a".into(), 1.0)], 5)];
        let r = mean_average_precision(&run, &qrels, &["q1".into(), "q2".into(), "q3".into()]);
        assert_eq!(r.per_query.len(), 1);
        assert_eq!(r.skipped, ["q2", "q3"]);
        assert_eq!(r.aggregate, 1.0);
    }

    /// ARI from explicit pair enumeration.
    fn ari_by_pairs(a: &[u32], b: &[u32]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                pairs += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / pairs;
        let max = (only_a + only_b) / 2.0;
        if max == expected {
            0.0
        } else {
            (both - expected) / (max - expected)
        }
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[5, 5, 9, 9]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 2, 3], &[0, 0, 0]).unwrap(), 0.0);
        let v = adjusted_rand_index(&[1, 1, 2, 2], &[1, 1, 1, 2]).unwrap();
        assert!((v - ari_by_pairs(&[1, 1, 2, 2], &[1, 1, 1, 2])).abs() < 1e-12);
        // both-one pair, index 1, sums 2 and 3, expected 1, max 2.5 -> 0
        assert!(v.abs() < 1e-12);
        assert_eq!(adjusted_rand_index(&[0, 0], &[1, 1]).unwrap(), 1.0);
        assert!(adjusted_rand_index::<u8, u8>(&[], &[]).is_err());
        assert!(adjusted_rand_index(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn ari_intersection() {
        let sys: BTreeMap<String, usize> = [("a".into(), 0), ("b".into(), 0), ("x".into(), 1)].into();
        let gold: BTreeMap<String, String> = [("a".into(), "s".into()), ("b".into(), "s".into())].into();
        assert_eq!(ari_on_intersection(&sys, &gold).unwrap(), 1.0);
        let none: BTreeMap<String, String> = [("z".into(), "s".into())].into();
        assert!(ari_on_intersection(&sys, &none).is_err());
    }

    #[test]
    fn rouge_examples() {
        let s = rouge_n("the cat sat", "the cat", 1).unwrap();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 0.8).abs() < 1e-12);
        let same = rouge_n("a b c", "a b c", 2).unwrap();
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        let none = rouge_n("a b", "c d", 1).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        let empty = rouge_n("", "a", 2).unwrap();
        assert_eq!(empty.f1, 0.0);
        // clipping: candidate repeats "the" three times, reference has it once
        let clipped = rouge_n("the the the", "the cat", 1).unwrap();
        assert!((clipped.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!(rouge_n("a", "a", 3).is_err());
    }

    fn qmap(values: &[f64]) -> BTreeMap<String, f64> {
        values.iter().enumerate().map(|(i, &v)| (format!("q{i:02}"), v)).collect()
    }

    #[test]
    fn significance_examples() {
        let a = qmap(&[0.1, 0.5, 0.3]);
        let s = paired_significance(&a, &a, BootstrapParams::default()).unwrap();
        assert_eq!(s.p_value, 1.0);
        assert!(!s.significant);
        let base: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin().abs() * 0.5).collect();
        let better: Vec<f64> = base.iter().map(|x| x + 0.1).collect();
        let s = paired_significance(&qmap(&better), &qmap(&base), BootstrapParams::default()).unwrap();
        assert!(s.p_value < 0.05);
        assert_eq!(s.direction, Direction::Positive);
        let s = paired_significance(&qmap(&base), &qmap(&better), BootstrapParams::default()).unwrap();
        assert_eq!(s.direction, Direction::Negative);
        assert!(paired_significance(&qmap(&[1.0]), &qmap(&[1.0, 2.0]), BootstrapParams::default()).is_err());
        let few = BootstrapParams { replicates: 10, ..Default::default() };
        assert!(paired_significance(&a, &a, few).is_err());
    }

    #[test]
    fn significance_is_deterministic() {
        let a = qmap(&[0.1, 0.5, 0.3, 0.2, 0.9]);
        let b = qmap(&[0.2, 0.4, 0.1, 0.2, 0.5]);
        let p = BootstrapParams::default();
        assert_eq!(paired_significance(&a, &b, p).unwrap(), paired_significance(&a, &b, p).unwrap());
    }

    fn article(q: &str, text: &str) -> GeneratedArticle {
        GeneratedArticle {
            query_id: q.into(),
            method: ArticleMethod {
                retrieval: "r".into(),
                clustering: "c".into(),
                summarizer: "s".into(),
                length_preset: "long".into(),
                notes: vec![],
            },
            sections: vec![vec![SectionSummary {
                text: text.into(),
                provenance: vec!["p".into()],
            }]],
        }
    }

    fn gold(n: usize) -> Vec<GoldArticle> {
        (0..n)
            .map(|i| GoldArticle {
                query_id: format!("q{i}"),
                text: format!("alpha beta gamma delta w{i}"),
            })
            .collect()
    }

    #[test]
    fn matrix_marks() {
        let g = gold(30);
        let weak: Vec<_> = (0..30).map(|i| article(&format!("q{i}"), "alpha zeta")).collect();
        let strong: Vec<_> = (0..30)
            .map(|i| article(&format!("q{i}"), &format!("alpha beta gamma w{i}")))
            .collect();
        let runs = vec![("weak".to_string(), weak.clone()), ("strong".to_string(), strong)];
        let m = evaluation_matrix(&runs, &g, "weak", BootstrapParams::default()).unwrap();
        assert!(m.rows[0].cells.iter().all(|c| c.mark == Mark::None));
        assert!(m.rows[1].cells.iter().all(|c| c.mark == Mark::Up));
        assert!(m.rows[1].cells.iter().all(|c| c.bold));
        assert!(m.to_text().contains("weak ★"));
        assert_eq!(m.to_csv().lines().count(), 3);

        let alone = evaluation_matrix(&runs[..1], &g, "weak", BootstrapParams::default()).unwrap();
        assert!(alone.rows[0].cells.iter().all(|c| c.mark == Mark::None && c.bold));
        assert!(evaluation_matrix(&runs, &g[..3], "weak", BootstrapParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn ari_matches_pairs_and_relabeling(
            a in prop::collection::vec(0u32..4, 2..25),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<u32> = a.iter().map(|_| rng.random_range(0..3)).collect();
            let fast = adjusted_rand_index(&a, &b).unwrap();
            let identical = adjusted_rand_index(&a, &a).unwrap();
            prop_assert_eq!(identical, 1.0);
            prop_assert!(fast <= 1.0 + 1e-12);
            let mut perm: Vec<u32> = (0..4).collect();
            perm.shuffle(&mut rng);
            let relabeled: Vec<u32> = a.iter().map(|&x| perm[x as usize]).collect();
            prop_assert_eq!(adjusted_rand_index(&relabeled, &b).unwrap(), fast);
            let slow = ari_by_pairs(&a, &b);
            let same_partition = adjusted_rand_index(&a, &b).unwrap() == 1.0;
            if !same_partition {
                prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
            }
        }

        #[test]
        fn rouge_swap_and_harmonic_mean(c in "[abc ]{0,20}", r in "[abc ]{0,20}", n in 1usize..3) {
            let x = rouge_n(&c, &r, n).unwrap();
            let y = rouge_n(&r, &c, n).unwrap();
            prop_assert_eq!(x.precision, y.recall);
            prop_assert_eq!(x.recall, y.precision);
            for v in [x.precision, x.recall, x.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if x.precision + x.recall > 0.0 {
                prop_assert!((x.f1 - 2.0 * x.precision * x.recall / (x.precision + x.recall)).abs() < 1e-12);
            }
        }

        #[test]
        fn ap_in_unit_interval(ranked in prop::collection::vec(0u8..20, 0..15), rel in prop::collection::btree_set(0u8..20, 1..8)) {
            let mut seen = BTreeSet::new();
            let ids: Vec<String> = ranked.into_iter().filter(|x| seen.insert(*x)).map(|x| x.to_string()).collect();
            let rel: BTreeSet<String> = rel.into_iter().map(|x| x.to_string()).collect();
            let ap = average_precision(ids.iter().map(String::as_str), &rel);
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }
}
