use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{build_corpus, frequency_filter, read_documents, TimeBucketedCorpus, Vocabulary, WindowSplit};
use crate::embeddings::{load_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::evolve::GAConfig;
use crate::objective::{read_target_csv, standardize_target, PenaltyConfig, TargetSeries};
use crate::synthlab::SynthParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub corpus: Option<PathBuf>,
    /// Without a vocabulary file every corpus token is used.
    pub vocabulary: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

/// Last training and last validation bucket labels; later buckets are test.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitLabels {
    pub train_end: String,
    pub validation_end: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBounds {
    pub min_doc_frac: f64,
    pub max_doc_frac: f64,
}

/// Everything a run reads, from one TOML file. Relative paths resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    pub split: Option<SplitLabels>,
    pub filter: Option<FilterBounds>,
    pub penalty: PenaltyConfig,
    pub ga: GAConfig,
    pub k: Vec<usize>,
    pub output: Option<PathBuf>,
    pub synth: SynthParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataPaths::default(),
            split: None,
            filter: None,
            penalty: PenaltyConfig::default(),
            ga: GAConfig::default(),
            k: vec![1, 2, 3],
            output: None,
            synth: SynthParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_against(base);
        }
        Ok(cfg)
    }

    fn resolve_against(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [&mut d.corpus, &mut d.vocabulary, &mut d.target, &mut d.embeddings, &mut self.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() {
            return Err(Error::InvalidConfig("k list is empty".into()));
        }
        for &k in &self.k {
            self.ga.validate(k)?;
        }
        self.penalty.validate()
    }

    fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::InvalidConfig(format!("data.{what} is not set")))
    }
}

/// Corpus, target and optional embeddings named by a [`RunConfig`].
pub struct Dataset {
    pub corpus: TimeBucketedCorpus,
    pub target: TargetSeries,
    pub embeddings: Option<EmbeddingTable>,
    /// Corpus tokens missing from the vocabulary file.
    pub ignored_tokens: usize,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let corpus_path = RunConfig::require(&cfg.data.corpus, "corpus")?;
        let target_path = RunConfig::require(&cfg.data.target, "target")?;
        let split = cfg
            .split
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("[split] section is missing".into()))?;
        for p in [Some(corpus_path), Some(target_path), cfg.data.vocabulary.as_deref(), cfg.data.embeddings.as_deref()]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
            }
        }

        let docs = read_documents(corpus_path)?;
        let vocab = match &cfg.data.vocabulary {
            Some(p) => Vocabulary::read(p)?,
            None => {
                let mut all: Vec<&str> = docs.iter().flat_map(|(_, t)| t.iter().map(String::as_str)).collect();
                all.sort_unstable();
                all.dedup();
                Vocabulary::new(all)?
            }
        };
        let (mut corpus, ignored_tokens) = build_corpus(docs, vocab)?;
        if let Some(f) = cfg.filter {
            corpus = corpus.project(&frequency_filter(&corpus, f.min_doc_frac, f.max_doc_frac)?)?;
        }
        let split = WindowSplit::from_labels(corpus.labels(), &split.train_end, &split.validation_end)?;
        let raw = read_target_csv(target_path, corpus.labels())?;
        let target = standardize_target(raw, split)?;
        let embeddings = match &cfg.data.embeddings {
            Some(p) => Some(load_embeddings(p)?.table),
            None => None,
        };
        Ok(Self {
            corpus,
            target,
            embeddings,
            ignored_tokens,
        })
    }
}
