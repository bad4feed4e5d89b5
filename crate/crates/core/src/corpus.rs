//! Pre-tokenized documents grouped into ordered time buckets.
//!
//! Documents are stored twice: as per-document token counts and as per-token
//! posting lists of document indices. Both views are built from the same
//! input in one pass and never mutated afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postings::PostingIndex;

pub type TokenId = u32;

/// Ordered token list with n-gram component links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, TokenId>,
    components: Vec<Vec<TokenId>>,
    parents: Vec<Vec<TokenId>>,
}

impl Vocabulary {
    /// Builds a vocabulary from plain tokens. A token containing `_` whose
    /// underscore-separated parts are all vocabulary tokens is linked to them
    /// as an n-gram.
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let entries = tokens.into_iter().map(|t| (t.into(), Vec::new())).collect();
        Self::with_components(entries)
    }

    /// Builds a vocabulary from `(token, components)` entries. An empty
    /// component list falls back to underscore splitting as in [`Vocabulary::new`].
    pub fn with_components(entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut id_of = HashMap::with_capacity(entries.len());
        for (i, (tok, _)) in entries.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidVocabulary(format!("empty token at position {i}")));
            }
            if id_of.insert(tok.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate token {tok:?}")));
            }
        }

        let mut components = Vec::with_capacity(entries.len());
        for (tok, comps) in &entries {
            let comps: Vec<TokenId> = if comps.is_empty() {
                let parts: Vec<&str> = tok.split('_').collect();
                if parts.len() > 1 && parts.iter().all(|p| id_of.contains_key(*p)) {
                    parts.iter().map(|p| id_of[*p]).collect()
                } else {
                    Vec::new()
                }
            } else {
                if comps.join("_") != *tok {
                    return Err(Error::InvalidVocabulary(format!(
                        "n-gram {tok:?} does not equal its components {comps:?} joined by '_'"
                    )));
                }
                comps
                    .iter()
                    .map(|c| {
                        id_of.get(c).copied().ok_or_else(|| {
                            Error::InvalidVocabulary(format!("component {c:?} of {tok:?} not in vocabulary"))
                        })
                    })
                    .collect::<Result<_>>()?
            };
            components.push(comps);
        }

        let tokens = entries.into_iter().map(|(t, _)| t).collect();
        Ok(Self::assemble(tokens, id_of, components))
    }

    fn assemble(tokens: Vec<String>, id_of: HashMap<String, TokenId>, components: Vec<Vec<TokenId>>) -> Self {
        let mut parents = vec![Vec::new(); tokens.len()];
        for (g, comps) in components.iter().enumerate() {
            for &c in comps {
                parents[c as usize].push(g as TokenId);
            }
        }
        for p in &mut parents {
            p.sort_unstable();
            p.dedup();
        }
        Self {
            tokens,
            id_of,
            components,
            parents,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.id_of.get(token).copied()
    }

    pub fn components(&self, id: TokenId) -> &[TokenId] {
        &self.components[id as usize]
    }

    pub fn is_ngram(&self, id: TokenId) -> bool {
        !self.components[id as usize].is_empty()
    }

    /// N-grams that list `id` among their components, sorted by id.
    pub fn ngram_parents(&self, id: TokenId) -> &[TokenId] {
        &self.parents[id as usize]
    }

    /// Reads a vocabulary file: one token per line, optionally followed by a
    /// tab and a tab- or space-separated component list.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.splitn(2, '\t');
            let tok = fields.next().unwrap_or_default().trim().to_string();
            if tok.contains(char::is_whitespace) {
                return Err(Error::parse(path, lineno + 1, "token contains whitespace"));
            }
            let comps = fields
                .next()
                .map(|rest| rest.split(['\t', ' ']).filter(|s| !s.is_empty()).map(str::to_string).collect())
                .unwrap_or_default();
            entries.push((tok, comps));
        }
        Self::with_components(entries).map_err(|e| match e {
            Error::InvalidVocabulary(msg) => Error::parse(path, 0, msg),
            other => other,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (i, tok) in self.tokens.iter().enumerate() {
            let comps = &self.components[i];
            let res = if comps.is_empty() {
                writeln!(w, "{tok}")
            } else {
                let parts: Vec<&str> = comps.iter().map(|&c| self.token(c)).collect();
                writeln!(w, "{tok}\t{}", parts.join("\t"))
            };
            res.map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One document: strictly positive counts keyed by token id, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub bucket: usize,
    counts: Vec<(TokenId, u32)>,
}

impl Document {
    pub fn new(bucket: usize, counts: impl IntoIterator<Item = (TokenId, u32)>) -> Self {
        let mut merged: BTreeMap<TokenId, u32> = BTreeMap::new();
        for (tok, c) in counts {
            if c > 0 {
                *merged.entry(tok).or_default() += c;
            }
        }
        Self {
            bucket,
            counts: merged.into_iter().collect(),
        }
    }

    pub fn counts(&self) -> &[(TokenId, u32)] {
        &self.counts
    }

    pub fn count(&self, tok: TokenId) -> u32 {
        self.counts
            .binary_search_by_key(&tok, |&(t, _)| t)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn contains(&self, tok: TokenId) -> bool {
        self.count(tok) > 0
    }
}

/// Documents in ordered buckets with per-token posting lists.
#[derive(Debug, Clone)]
pub struct TimeBucketedCorpus {
    vocab: Vocabulary,
    labels: Vec<String>,
    docs: Vec<Document>,
    // docs[offsets[t]..offsets[t + 1]] belong to bucket t
    offsets: Vec<usize>,
    // global document indices, ascending
    postings: Vec<Vec<u32>>,
    index: PostingIndex,
}

/// Ingests `(bucket label, tokens)` records. Tokens missing from `vocab` are
/// dropped; the second tuple element counts them.
pub fn build_corpus<L, T, S>(docs: L, vocab: Vocabulary) -> Result<(TimeBucketedCorpus, usize)>
where
    L: IntoIterator<Item = (String, T)>,
    T: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut ignored = 0usize;
    let mut raw: Vec<(String, Vec<(TokenId, u32)>)> = Vec::new();
    for (label, toks) in docs {
        let mut counts = Vec::new();
        for t in toks {
            match vocab.id(t.as_ref()) {
                Some(id) => counts.push((id, 1)),
                None => ignored += 1,
            }
        }
        raw.push((label, counts));
    }
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut labels: Vec<String> = raw.iter().map(|(l, _)| l.clone()).collect();
    labels.sort();
    labels.dedup();
    let bucket_of: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let docs: Vec<Document> = raw
        .iter()
        .map(|(l, counts)| Document::new(bucket_of[l.as_str()], counts.iter().copied()))
        .collect();
    let corpus = TimeBucketedCorpus::from_documents(vocab, labels.clone(), docs)?;
    Ok((corpus, ignored))
}

impl TimeBucketedCorpus {
    /// Assembles a corpus from id-level documents. Labels must be strictly
    /// increasing; documents keep their relative order within a bucket.
    pub fn from_documents(vocab: Vocabulary, labels: Vec<String>, mut docs: Vec<Document>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("bucket labels must be strictly increasing".into()));
        }
        for d in &docs {
            if d.bucket >= labels.len() {
                return Err(Error::InvalidConfig(format!("document bucket {} out of range", d.bucket)));
            }
            if let Some(&(t, _)) = d.counts.iter().find(|(t, _)| *t as usize >= vocab.len()) {
                return Err(Error::InvalidConfig(format!("token id {t} out of range")));
            }
        }
        docs.sort_by_key(|d| d.bucket);

        let mut offsets = vec![0usize; labels.len() + 1];
        for d in &docs {
            offsets[d.bucket + 1] += 1;
        }
        for t in 0..labels.len() {
            offsets[t + 1] += offsets[t];
        }

        let mut postings = vec![Vec::new(); vocab.len()];
        for (n, d) in docs.iter().enumerate() {
            for &(tok, _) in &d.counts {
                postings[tok as usize].push(n as u32);
            }
        }
        let index = PostingIndex::build(&offsets, &postings);

        Ok(Self {
            vocab,
            labels,
            docs,
            offsets,
            postings,
            index,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_buckets(&self) -> usize {
        self.labels.len()
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn bucket_size(&self, t: usize) -> usize {
        self.offsets[t + 1] - self.offsets[t]
    }

    pub fn bucket_docs(&self, t: usize) -> &[Document] {
        &self.docs[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    /// Bucket-local indices of the documents at `t` containing `tok`.
    pub fn postings(&self, t: usize, tok: TokenId) -> impl Iterator<Item = usize> + '_ {
        let list = &self.postings[tok as usize];
        let (lo, hi) = (self.offsets[t] as u32, self.offsets[t + 1] as u32);
        let start = list.partition_point(|&n| n < lo);
        let end = list.partition_point(|&n| n < hi);
        list[start..end].iter().map(move |&n| (n - lo) as usize)
    }

    /// Number of documents, over all buckets, containing `tok`.
    pub fn document_frequency(&self, tok: TokenId) -> usize {
        self.postings[tok as usize].len()
    }

    pub(crate) fn index(&self) -> &PostingIndex {
        &self.index
    }

    /// Re-expresses the corpus over a filtered sub-vocabulary; tokens outside
    /// it disappear from every document.
    pub fn project(&self, filtered: &FilteredVocabulary) -> Result<Self> {
        let mut new_id = vec![None; self.vocab.len()];
        for (i, &orig) in filtered.original_ids.iter().enumerate() {
            new_id[orig as usize] = Some(i as TokenId);
        }
        let docs = self
            .docs
            .iter()
            .map(|d| {
                Document::new(
                    d.bucket,
                    d.counts.iter().filter_map(|&(t, c)| new_id[t as usize].map(|n| (n, c))),
                )
            })
            .collect();
        Self::from_documents(filtered.vocab.clone(), self.labels.clone(), docs)
    }
}

/// Sub-vocabulary with the original id of every retained token.
#[derive(Debug, Clone)]
pub struct FilteredVocabulary {
    pub vocab: Vocabulary,
    pub original_ids: Vec<TokenId>,
}

/// Keeps tokens whose corpus-wide document frequency lies in `[min_frac, max_frac]`.
pub fn frequency_filter(corpus: &TimeBucketedCorpus, min_frac: f64, max_frac: f64) -> Result<FilteredVocabulary> {
    if !(0.0..=1.0).contains(&min_frac) || !(0.0..=1.0).contains(&max_frac) || min_frac >= max_frac {
        return Err(Error::InvalidConfig(format!(
            "frequency bounds must satisfy 0 <= min < max <= 1, got ({min_frac}, {max_frac})"
        )));
    }
    let n = corpus.num_docs() as f64;
    let vocab = corpus.vocab();
    let original_ids: Vec<TokenId> = (0..vocab.len() as TokenId)
        .filter(|&v| {
            let f = corpus.document_frequency(v) as f64 / n;
            f >= min_frac && f <= max_frac
        })
        .collect();
    if original_ids.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut new_id = vec![None; vocab.len()];
    for (i, &v) in original_ids.iter().enumerate() {
        new_id[v as usize] = Some(i as TokenId);
    }
    let tokens: Vec<String> = original_ids.iter().map(|&v| vocab.token(v).to_string()).collect();
    let id_of = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
    // an n-gram that lost a component becomes a plain token
    let components = original_ids
        .iter()
        .map(|&v| {
            vocab
                .components(v)
                .iter()
                .map(|&c| new_id[c as usize])
                .collect::<Option<Vec<_>>>()
                .unwrap_or_default()
        })
        .collect();
    let filtered = Vocabulary::assemble(tokens, id_of, components);
    Ok(FilteredVocabulary {
        vocab: filtered,
        original_ids,
    })
}

/// Contiguous train / validation / test bucket ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSplit {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl WindowSplit {
    pub fn new(train: Range<usize>, validation: Range<usize>, test: Range<usize>) -> Result<Self> {
        if train.is_empty() || validation.is_empty() {
            return Err(Error::InvalidSplit("train and validation windows must be non-empty".into()));
        }
        if train.end != validation.start || validation.end != test.start || test.start > test.end {
            return Err(Error::InvalidSplit(format!(
                "windows must be contiguous and ordered, got {train:?} {validation:?} {test:?}"
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    /// Splits `num_buckets` buckets into the first `n_train`, the next
    /// `n_validation`, and the rest.
    pub fn from_counts(num_buckets: usize, n_train: usize, n_validation: usize) -> Result<Self> {
        if n_train + n_validation > num_buckets {
            return Err(Error::InvalidSplit(format!(
                "{n_train} + {n_validation} buckets requested, corpus has {num_buckets}"
            )));
        }
        Self::new(0..n_train, n_train..n_train + n_validation, n_train + n_validation..num_buckets)
    }

    /// Training runs through `train_end`, validation through `validation_end`
    /// (both inclusive labels); the remainder is test.
    pub fn from_labels(labels: &[String], train_end: &str, validation_end: &str) -> Result<Self> {
        let pos = |l: &str| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::InvalidSplit(format!("bucket label {l:?} not in corpus")))
        };
        let t = pos(train_end)? + 1;
        let v = pos(validation_end)? + 1;
        if v <= t {
            return Err(Error::InvalidSplit("validation_end must follow train_end".into()));
        }
        Self::new(0..t, t..v, v..labels.len())
    }

    pub fn num_buckets(&self) -> usize {
        self.test.end
    }

    pub fn train_and_validation(&self) -> Range<usize> {
        self.train.start..self.validation.end
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DocRecord {
    bucket: String,
    tokens: Vec<String>,
}

/// Reads newline-delimited `{"bucket": ..., "tokens": [...]}` records.
pub fn read_documents(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<String>)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        out.push((rec.bucket, rec.tokens));
    }
    Ok(out)
}

/// Writes every document of `corpus` as one record, tokens repeated by count.
pub fn write_documents(corpus: &TimeBucketedCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in corpus.documents() {
        let mut tokens = Vec::new();
        for &(t, c) in d.counts() {
            for _ in 0..c {
                tokens.push(corpus.vocab().token(t).to_string());
            }
        }
        let rec = DocRecord {
            bucket: corpus.labels()[d.bucket].clone(),
            tokens,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
