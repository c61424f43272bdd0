//! Experiment configuration.
//!
//! The file format is TOML restricted to top-level `key = value` lines, with
//! lists written as `["a", "b"]`. Relative paths resolve against the directory
//! of the file they appear in.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BootstrapParams;
use crate::io;
use crate::provider::{RemoteEmbedder, RemoteSummarizer};
use crate::retrieval::{Bm25Params, RetrievalMethod, DEFAULT_K};
use crate::simmetric::{QueryModel, TrainHyper};
use crate::summarize::{LengthPreset, SummarizeConfig, Summarizer, SummarySimilarity, DEFAULT_MAX_SENTENCES, DEFAULT_TAU};

/// Pairwise similarity used to cluster candidate paragraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClusteringMethod {
    SbertEuclid,
    SbertCosine,
    Qs3mTitle,
    Qs3mLead,
    Qs3mMean,
}

impl ClusteringMethod {
    pub const ALL: [ClusteringMethod; 5] = [
        ClusteringMethod::SbertEuclid,
        ClusteringMethod::SbertCosine,
        ClusteringMethod::Qs3mTitle,
        ClusteringMethod::Qs3mLead,
        ClusteringMethod::Qs3mMean,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ClusteringMethod::SbertEuclid => "sbert-euclid",
            ClusteringMethod::SbertCosine => "sbert-cosine",
            ClusteringMethod::Qs3mTitle => "qs3m-title",
            ClusteringMethod::Qs3mLead => "qs3m-lead",
            ClusteringMethod::Qs3mMean => "qs3m-mean",
        }
    }

    /// The query model of a trained query-specific metric, if any.
    pub fn query_model(self) -> Option<QueryModel> {
        match self {
            ClusteringMethod::SbertEuclid | ClusteringMethod::SbertCosine => None,
            ClusteringMethod::Qs3mTitle => Some(QueryModel::Title),
            ClusteringMethod::Qs3mLead => Some(QueryModel::Lead),
            ClusteringMethod::Qs3mMean => Some(QueryModel::Mean),
        }
    }
}

impl FromStr for ClusteringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown clustering method {s:?}")))
    }
}

impl std::fmt::Display for ClusteringMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Paragraph corpus (JSON lines).
    pub corpus: PathBuf,
    pub dedup: bool,
    /// Directory written by `derive-benchmark`.
    pub benchmark: PathBuf,
    pub embeddings: PathBuf,
    /// Section-level graded judgments for the manual condition.
    pub manual_qrels: Option<PathBuf>,
    /// Not recorded in the manifest, so a re-run elsewhere reproduces it.
    #[serde(skip_serializing)]
    pub output: PathBuf,

    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub retrieval: Vec<String>,
    pub clustering: Vec<String>,
    pub manual: bool,
    /// `"<retrieval>+<clustering>"` row used as the significance baseline.
    /// Defaults to the best-MAP retrieval combined with the best-ARI clustering.
    pub baseline: Option<String>,

    pub summarizer: String,
    pub summarizer_endpoint: Option<String>,
    pub embedding_endpoint: Option<String>,
    pub provider_timeout_secs: u64,
    pub max_sentences: usize,
    pub tau: f64,
    pub length: LengthPreset,
    pub gamma: Option<f64>,

    pub train_fraction: f64,
    pub metric_epochs: usize,
    pub metric_lr: f64,
    pub bootstrap_replicates: usize,
    pub alpha: f64,

    pub split_seed: u64,
    pub metric_seed: u64,
    pub louvain_seed: u64,
    pub manual_seed: u64,
    pub bootstrap_seed: u64,

    pub keep_going: bool,
    /// Worker threads; 0 uses every core. Has no effect on outputs.
    #[serde(skip_serializing)]
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hyper = TrainHyper::default();
        let boot = BootstrapParams::default();
        Self {
            corpus: PathBuf::new(),
            dedup: true,
            benchmark: PathBuf::new(),
            embeddings: PathBuf::new(),
            manual_qrels: None,
            output: PathBuf::new(),
            k: DEFAULT_K,
            bm25_k1: Bm25Params::default().k1,
            bm25_b: Bm25Params::default().b,
            retrieval: RetrievalMethod::ALL.iter().map(|m| m.tag().to_string()).collect(),
            clustering: ClusteringMethod::ALL.iter().map(|m| m.tag().to_string()).collect(),
            manual: true,
            baseline: None,
            summarizer: "native".into(),
            summarizer_endpoint: None,
            embedding_endpoint: None,
            provider_timeout_secs: 60,
            max_sentences: DEFAULT_MAX_SENTENCES,
            tau: DEFAULT_TAU,
            length: LengthPreset::Long,
            gamma: None,
            train_fraction: 0.5,
            metric_epochs: hyper.epochs,
            metric_lr: hyper.lr,
            bootstrap_replicates: boot.replicates,
            alpha: boot.alpha,
            split_seed: 1,
            metric_seed: hyper.seed,
            louvain_seed: 11,
            manual_seed: 5,
            bootstrap_seed: boot.seed,
            keep_going: false,
            jobs: 0,
        }
    }
}

const PATH_KEYS: [&str; 5] = ["corpus", "benchmark", "embeddings", "manual_qrels", "output"];

fn absolute(base: &Path, p: &Path) -> Result<PathBuf> {
    if p.as_os_str().is_empty() {
        return Ok(PathBuf::new());
    }
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::path::absolute(&joined).map_err(|e| Error::io(joined, e))
}

impl RunConfig {
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1)),
            message: e.message().to_string(),
        })
    }

    /// Parse a config file and make its paths absolute relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::from_toml(&io::read_to_string(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base)?;
        Ok(c)
    }

    /// Combine an optional config file with `key=value` overrides, later
    /// overrides winning. Values are TOML literals; anything that does not
    /// parse as one is taken as a string. Paths from the file resolve against
    /// its directory, paths given as overrides against `cwd`.
    pub fn with_overrides(file: Option<&Path>, overrides: &[String], cwd: &Path) -> Result<Self> {
        let (mut table, base) = match file {
            Some(path) => {
                let text = io::read_to_string(path)?;
                // parse once as a config so errors carry line numbers
                Self::from_toml(&text, &path.display().to_string())?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
                (table, path.parent().unwrap_or(Path::new(".")).to_path_buf())
            }
            None => (toml::Table::new(), cwd.to_path_buf()),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override {item:?} is not key=value")))?;
            let key = key.trim();
            let raw = raw.trim();
            let mut value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            if PATH_KEYS.contains(&key) {
                if let toml::Value::String(p) = &value {
                    value = toml::Value::String(absolute(cwd, Path::new(p))?.display().to_string());
                }
            }
            table.insert(key.to_string(), value);
        }
        let mut config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("config: {}", e.message())))?;
        config.resolve_paths(&base)?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        self.corpus = absolute(base, &self.corpus)?;
        self.benchmark = absolute(base, &self.benchmark)?;
        self.embeddings = absolute(base, &self.embeddings)?;
        self.output = absolute(base, &self.output)?;
        if let Some(m) = &self.manual_qrels {
            self.manual_qrels = Some(absolute(base, m)?);
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("cannot render config: {e}")))
    }

    pub fn retrieval_methods(&self) -> Result<Vec<RetrievalMethod>> {
        parse_list(&self.retrieval, "retrieval")
    }

    pub fn clustering_methods(&self) -> Result<Vec<ClusteringMethod>> {
        parse_list(&self.clustering, "clustering")
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn train_hyper(&self) -> TrainHyper {
        TrainHyper {
            epochs: self.metric_epochs,
            lr: self.metric_lr,
            seed: self.metric_seed,
        }
    }

    pub fn bootstrap(&self) -> BootstrapParams {
        BootstrapParams {
            replicates: self.bootstrap_replicates,
            seed: self.bootstrap_seed,
            alpha: self.alpha,
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs(self.provider_timeout_secs)
    }

    pub fn summarize_config(&self) -> Result<SummarizeConfig> {
        let summarizer = match self.summarizer.as_str() {
            "native" => Summarizer::Native,
            "remote" => {
                let url = self
                    .summarizer_endpoint
                    .as_deref()
                    .ok_or_else(|| Error::invalid("summarizer = \"remote\" needs summarizer_endpoint"))?;
                Summarizer::Remote(RemoteSummarizer::new(url, self.timeout()))
            }
            other => return Err(Error::invalid(format!("unknown summarizer {other:?} (native|remote)"))),
        };
        let similarity = match &self.embedding_endpoint {
            Some(url) => SummarySimilarity::Remote(RemoteEmbedder::new(url, self.timeout())),
            None => SummarySimilarity::Lexical,
        };
        Ok(SummarizeConfig {
            summarizer,
            similarity,
            max_sentences: self.max_sentences,
            tau: self.tau,
            length_preset: self.length,
            gamma: self.gamma,
            seed: self.louvain_seed,
        })
    }

    /// Check every field that can be checked without touching the inputs.
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("corpus", &self.corpus),
            ("benchmark", &self.benchmark),
            ("embeddings", &self.embeddings),
            ("output", &self.output),
        ] {
            if p.as_os_str().is_empty() {
                return Err(Error::invalid(format!("{name} path is not set")));
            }
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.bm25().validate()?;
        if self.retrieval_methods()?.is_empty() || self.clustering_methods()?.is_empty() {
            return Err(Error::invalid("at least one retrieval and one clustering method are required"));
        }
        if !(0.0..1.0).contains(&self.train_fraction) {
            return Err(Error::invalid(format!(
                "train_fraction must be in [0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.max_sentences == 0 {
            return Err(Error::invalid("max_sentences must be at least 1"));
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(Error::invalid("tau must be non-negative"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid("gamma must be positive"));
            }
        }
        if self.bootstrap_replicates < crate::eval::MIN_REPLICATES {
            return Err(Error::invalid(format!(
                "bootstrap_replicates must be at least {}",
                crate::eval::MIN_REPLICATES
            )));
        }
        self.summarize_config()?;
        Ok(())
    }
}

fn parse_list<T: FromStr<Err = Error> + PartialEq>(items: &[String], what: &str) -> Result<Vec<T>> {
    let mut out: Vec<T> = Vec::new();
    for s in items {
        let m: T = s.parse()?;
        if out.contains(&m) {
            return Err(Error::invalid(format!("{what} method {s} listed twice")));
        }
        out.push(m);
    }
    Ok(out)
}
