//! Average-linkage agglomerative clustering into a fixed number of clusters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmark::ClusterGold;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub query_id: String,
    pub k: usize,
    /// Paragraph id to cluster index in `[0, k)`.
    pub assignment: BTreeMap<String, usize>,
}

impl Clustering {
    /// Members per cluster index, each list in ascending id order.
    pub fn clusters(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.k];
        for (p, &c) in &self.assignment {
            out[c].push(p.clone());
        }
        out
    }

    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let clusters = self.clusters();
        if let Some(i) = clusters.iter().position(Vec::is_empty) {
            return Err(format!("cluster {i} is empty"));
        }
        Ok(())
    }
}

/// Number of distinct gold labels for `query_id`.
pub fn true_k(query_id: &str, gold: &ClusterGold) -> Result<usize> {
    gold.labels(query_id)
        .map(|_| gold.label_set(query_id).len())
        .ok_or_else(|| Error::data(format!("query {query_id} has no cluster gold")))
}

/// `k` clamped to the number of candidates; logs when clamping happens.
pub fn clamp_k(query_id: &str, k: usize, candidates: usize) -> usize {
    if k > candidates {
        log::warn!("query {query_id}: clamping K from {k} to {candidates} candidates");
        candidates
    } else {
        k
    }
}

/// Merge singletons until `k` clusters remain, always joining the pair with
/// the highest average pairwise similarity.
///
/// Ties go to the pair whose (smaller min-id, larger min-id) is
/// lexicographically smallest, and output cluster indices are assigned in
/// ascending order of each cluster's smallest member id. Both rules depend
/// only on ids, so a permuted candidate list yields the same assignment.
///
/// `sim` is called once per unordered pair, always with the smaller id first.
pub fn hac_cluster<F>(query_id: &str, candidates: &[String], k: usize, mut sim: F) -> Result<Clustering>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    let n = candidates.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "K={k} must be between 1 and the candidate count {n}"
        )));
    }
    let mut ids: Vec<&str> = candidates.iter().map(String::as_str).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate candidates for query {query_id}")));
    }

    // sums[i][j]: total similarity between members of clusters i and j
    let mut sums = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = sim(ids[i], ids[j])?;
            if !s.is_finite() {
                return Err(Error::data(format!(
                    "non-finite similarity between {} and {}",
                    ids[i], ids[j]
                )));
            }
            sums[i][j] = s;
            sums[j][i] = s;
        }
    }

    // Because ids are sorted, a cluster's slot index is its min member's index,
    // and comparing slots compares min ids.
    let mut size = vec![1usize; n];
    let mut alive: Vec<usize> = (0..n).collect();
    let mut owner: Vec<usize> = (0..n).collect();
    while alive.len() > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in alive.iter().enumerate() {
            for &b in &alive[ai + 1..] {
                let avg = sums[a][b] / (size[a] * size[b]) as f64;
                if best.is_none_or(|(s, _, _)| avg > s) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (_, keep, gone) = best.expect("at least two clusters alive");
        for &x in &alive {
            if x != keep && x != gone {
                let s = sums[keep][x] + sums[gone][x];
                sums[keep][x] = s;
                sums[x][keep] = s;
            }
        }
        size[keep] += size[gone];
        for o in owner.iter_mut() {
            if *o == gone {
                *o = keep;
            }
        }
        alive.retain(|&x| x != gone);
    }

    let index: BTreeMap<usize, usize> = alive.iter().enumerate().map(|(i, &slot)| (slot, i)).collect();
    let assignment = ids
        .iter()
        .zip(&owner)
        .map(|(id, slot)| (id.to_string(), index[slot]))
        .collect();
    Ok(Clustering {
        query_id: query_id.to_string(),
        k,
        assignment,
    })
}

/// `<query-id> <paragraph-id> <cluster-index>` lines.
pub fn write_clusterings(clusterings: &[Clustering]) -> String {
    let mut out = String::new();
    for c in clusterings {
        for (p, i) in &c.assignment {
            let _ = writeln!(out, "{} {} {}", c.query_id, p, i);
        }
    }
    out
}

pub fn read_clusterings<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Clustering>> {
    let mut order = Vec::new();
    let mut by_query: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for item in io::numbered_lines(reader, source_name) {
        let (line, text) = item?;
        let err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", f.len())));
        }
        let idx: usize = f[2].parse().map_err(|_| err(format!("bad cluster index {:?}", f[2])))?;
        if !by_query.contains_key(f[0]) {
            order.push(f[0].to_string());
        }
        by_query.entry(f[0].to_string()).or_default().insert(f[1].to_string(), idx);
    }
    order
        .into_iter()
        .map(|q| {
            let assignment = by_query.remove(&q).expect("recorded");
            let k = assignment.values().max().map_or(0, |m| m + 1);
            let c = Clustering {
                query_id: q.clone(),
                k,
                assignment,
            };
            c.check_invariants()
                .map_err(|m| Error::data(format!("clustering for {q}: {m}")))?;
            Ok(c)
        })
        .collect()
}

pub fn load_clusterings(path: &Path) -> Result<Vec<Clustering>> {
    read_clusterings(io::open(path)?, &path.display().to_string())
}
