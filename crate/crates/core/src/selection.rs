//! Selection matrices and the attention and content transforms.
//!
//! A document is selected when it contains at least one active token in
//! every non-empty dimension of the matrix. Empty dimensions never constrain
//! selection; a matrix whose dimensions are all empty is rejected.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TimeBucketedCorpus, TokenId, Vocabulary};
use crate::error::{Error, Result};

/// Per-dimension sets of active token ids over a vocabulary of `vocab_size`.
///
/// Each dimension is kept sorted and duplicate-free, so structural equality
/// and hashing coincide with set equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectionMatrix {
    dims: Vec<Vec<TokenId>>,
    vocab_size: usize,
}

impl SelectionMatrix {
    pub fn new(dims: Vec<Vec<TokenId>>, vocab_size: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidMatrix("at least one dimension required".into()));
        }
        let dims: Vec<Vec<TokenId>> = dims
            .into_iter()
            .map(|d| d.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        if let Some(bad) = dims.iter().flatten().find(|&&t| t as usize >= vocab_size) {
            return Err(Error::InvalidMatrix(format!("token id {bad} outside vocabulary of {vocab_size}")));
        }
        Ok(Self { dims, vocab_size })
    }

    /// Resolves token strings against `vocab`, reporting every unknown token.
    pub fn from_tokens<S: AsRef<str>>(vocab: &Vocabulary, dims: &[Vec<S>]) -> Result<Self> {
        let mut unknown = Vec::new();
        let ids = dims
            .iter()
            .map(|d| {
                d.iter()
                    .filter_map(|t| {
                        let id = vocab.id(t.as_ref());
                        if id.is_none() {
                            unknown.push(t.as_ref().to_string());
                        }
                        id
                    })
                    .collect()
            })
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownTokens(unknown));
        }
        Self::new(ids, vocab.len())
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dims(&self) -> &[Vec<TokenId>] {
        &self.dims
    }

    pub fn dim(&self, k: usize) -> &[TokenId] {
        &self.dims[k]
    }

    pub fn active_count(&self) -> usize {
        self.dims.iter().map(Vec::len).sum()
    }

    pub fn dim_counts(&self) -> Vec<usize> {
        self.dims.iter().map(Vec::len).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.dims.iter().all(Vec::is_empty)
    }

    pub fn all_dims_non_empty(&self) -> bool {
        self.dims.iter().all(|d| !d.is_empty())
    }

    pub fn contains(&self, k: usize, tok: TokenId) -> bool {
        self.dims[k].binary_search(&tok).is_ok()
    }

    /// Number of dimensions in which `tok` is active (the row sum of the matrix).
    pub fn row_count(&self, tok: TokenId) -> usize {
        self.dims.iter().filter(|d| d.binary_search(&tok).is_ok()).count()
    }

    pub fn is_active(&self, tok: TokenId) -> bool {
        self.row_count(tok) > 0
    }

    /// Active `(dimension, token)` slots in dimension order.
    pub fn slots(&self) -> Vec<(usize, TokenId)> {
        self.dims
            .iter()
            .enumerate()
            .flat_map(|(k, d)| d.iter().map(move |&t| (k, t)))
            .collect()
    }

    /// Distinct active token ids, ascending.
    pub fn active_tokens(&self) -> Vec<TokenId> {
        self.dims.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Copy keeping only the slots whose flag is set, in [`SelectionMatrix::slots`] order.
    pub fn retain_slots(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut dims = vec![Vec::new(); self.k()];
        for (i, (k, t)) in self.slots().into_iter().enumerate() {
            if keep(i) {
                dims[k].push(t);
            }
        }
        Self {
            dims,
            vocab_size: self.vocab_size,
        }
    }

    pub(crate) fn insert(&mut self, k: usize, tok: TokenId) -> bool {
        match self.dims[k].binary_search(&tok) {
            Ok(_) => false,
            Err(pos) => {
                self.dims[k].insert(pos, tok);
                true
            }
        }
    }

    pub(crate) fn remove(&mut self, k: usize, tok: TokenId) -> bool {
        match self.dims[k].binary_search(&tok) {
            Ok(pos) => {
                self.dims[k].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Replaces `old` by `new` in dimension `k`. Fails without change when
    /// `old` is absent or `new` already active there.
    pub(crate) fn replace(&mut self, k: usize, old: TokenId, new: TokenId) -> bool {
        if old == new || !self.contains(k, old) || self.contains(k, new) {
            return false;
        }
        self.remove(k, old);
        self.insert(k, new);
        true
    }

    /// Equality up to a reordering of dimensions.
    pub fn same_up_to_permutation(&self, other: &Self) -> bool {
        let mut a = self.dims.clone();
        let mut b = other.dims.clone();
        a.sort();
        b.sort();
        a == b
    }

    pub fn to_record(&self, vocab: &Vocabulary) -> MatrixRecord {
        MatrixRecord {
            dims: self
                .dims
                .iter()
                .map(|d| d.iter().map(|&t| vocab.token(t).to_string()).collect())
                .collect(),
        }
    }

    pub fn read(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rec: MatrixRecord = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        Self::from_tokens(vocab, &rec.dims)
    }

    pub fn write(&self, path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(&self.to_record(vocab))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk matrix form: token strings per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub dims: Vec<Vec<String>>,
}

/// Selection indicator of one document.
pub fn is_selected(omega: &SelectionMatrix, doc: &Document) -> Result<bool> {
    if omega.is_degenerate() {
        return Err(Error::DegenerateMatrix);
    }
    Ok(omega
        .dims()
        .iter()
        .filter(|d| !d.is_empty())
        .all(|d| d.iter().any(|&t| doc.contains(t))))
}

fn sorted_union(lists: impl Iterator<Item = Vec<usize>>) -> Vec<usize> {
    let mut all: Vec<usize> = lists.flatten().collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn selected_in_bucket(omega: &SelectionMatrix, corpus: &TimeBucketedCorpus, t: usize) -> Result<Vec<usize>> {
    if omega.is_degenerate() {
        return Err(Error::DegenerateMatrix);
    }
    let mut acc: Option<Vec<usize>> = None;
    for dim in omega.dims().iter().filter(|d| !d.is_empty()) {
        let hits = sorted_union(dim.iter().map(|&v| corpus.postings(t, v).collect()));
        acc = Some(match acc {
            None => hits,
            Some(prev) => prev.into_iter().filter(|n| hits.binary_search(n).is_ok()).collect(),
        });
    }
    Ok(acc.unwrap_or_default())
}

/// Fraction of bucket `t`'s documents selected by `omega`.
pub fn attention(omega: &SelectionMatrix, corpus: &TimeBucketedCorpus, t: usize) -> Result<f64> {
    let n = corpus.bucket_size(t);
    if n == 0 {
        return Err(Error::EmptyBucket(t));
    }
    Ok(selected_in_bucket(omega, corpus, t)?.len() as f64 / n as f64)
}

/// Attention value per bucket, aligned with the bucket labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSeries {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

/// Attention in every bucket, computed from the bitset index.
pub fn attention_series(omega: &SelectionMatrix, corpus: &TimeBucketedCorpus) -> Result<AttentionSeries> {
    Ok(AttentionSeries {
        values: attention_values(omega, corpus)?,
        labels: corpus.labels().to_vec(),
    })
}

pub(crate) fn attention_values(omega: &SelectionMatrix, corpus: &TimeBucketedCorpus) -> Result<Vec<f64>> {
    if let Some(t) = (0..corpus.num_buckets()).find(|&t| corpus.bucket_size(t) == 0) {
        return Err(Error::EmptyBucket(t));
    }
    let counts = corpus.index().selected_counts(omega.dims()).ok_or(Error::DegenerateMatrix)?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(t, &c)| c as f64 / corpus.bucket_size(t) as f64)
        .collect())
}

/// Token weights for content scoring; absent tokens weigh zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContentWeights {
    zeta: HashMap<TokenId, f64>,
}

impl ContentWeights {
    pub fn new(zeta: HashMap<TokenId, f64>) -> Result<Self> {
        if zeta.values().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("content weights must be finite".into()));
        }
        Ok(Self { zeta })
    }

    pub fn weight(&self, tok: TokenId) -> f64 {
        self.zeta.get(&tok).copied().unwrap_or(0.0)
    }
}

/// Mean weighted token-count score over the documents selected in bucket `t`.
pub fn content_score(
    omega: &SelectionMatrix,
    corpus: &TimeBucketedCorpus,
    t: usize,
    zeta: &ContentWeights,
) -> Result<f64> {
    let selected = selected_in_bucket(omega, corpus, t)?;
    if selected.is_empty() {
        return Err(Error::NoSelectedDocuments(t));
    }
    let docs = corpus.bucket_docs(t);
    let total: f64 = selected
        .iter()
        .map(|&n| docs[n].counts().iter().map(|&(v, c)| c as f64 * zeta.weight(v)).sum::<f64>())
        .sum();
    Ok(total / selected.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_corpus;

    fn epu() -> (Vocabulary, SelectionMatrix) {
        let vocab = Vocabulary::new([
            "economic",
            "economy",
            "congress",
            "deficit",
            "federal",
            "reserve",
            "federal_reserve",
            "legislation",
            "regulation",
            "white",
            "house",
            "white_house",
            "uncertain",
            "uncertainty",
            "stock",
        ])
        .unwrap();
        let omega = SelectionMatrix::from_tokens(
            &vocab,
            &[
                vec!["economic", "economy"],
                vec!["congress", "deficit", "federal_reserve", "legislation", "regulation", "white_house"],
                vec!["uncertain", "uncertainty"],
            ],
        )
        .unwrap();
        (vocab, omega)
    }

    fn doc(vocab: &Vocabulary, toks: &[&str]) -> Document {
        Document::new(0, toks.iter().map(|t| (vocab.id(t).unwrap(), 1)))
    }

    #[test]
    fn epu_worked_examples() {
        let (vocab, omega) = epu();
        assert_eq!(omega.dim_counts(), vec![2, 6, 2]);
        assert!(is_selected(&omega, &doc(&vocab, &["economic", "congress", "uncertainty"])).unwrap());
        assert!(!is_selected(&omega, &doc(&vocab, &["economic", "economic", "congress"])).unwrap());
    }

    #[test]
    fn single_dimension_miss() {
        let (vocab, _) = epu();
        let omega = SelectionMatrix::from_tokens(&vocab, &[vec!["stock"]]).unwrap();
        assert!(!is_selected(&omega, &doc(&vocab, &["economic"])).unwrap());
    }

    #[test]
    fn empty_dimension_is_neutral() {
        let (vocab, _) = epu();
        let omega = SelectionMatrix::from_tokens(&vocab, &[vec!["stock"], vec![]]).unwrap();
        assert!(is_selected(&omega, &doc(&vocab, &["stock"])).unwrap());
        let none = SelectionMatrix::new(vec![vec![], vec![]], vocab.len()).unwrap();
        assert!(matches!(is_selected(&none, &doc(&vocab, &["stock"])), Err(Error::DegenerateMatrix)));
    }

    #[test]
    fn unknown_tokens_listed() {
        let (vocab, _) = epu();
        let err = SelectionMatrix::from_tokens(&vocab, &[vec!["economic", "foo"], vec!["bar"]]).unwrap_err();
        match err {
            Error::UnknownTokens(t) => assert_eq!(t, vec!["foo".to_string(), "bar".to_string()]),
            e => panic!("unexpected {e:?}"),
        }
    }

    // Hand-listed five-document fixture over two buckets:
    //   2000-01: {economic, congress, uncertainty} sel
    //            {economy, deficit}                 no uncertainty dim
    //            {uncertain, white_house, economy}  sel
    //   2000-02: {economic}                         no
    //            {economy, legislation, uncertain}  sel
    // expected attention [2/3, 1/2]
    #[test]
    fn epu_fixture_attention() {
        let (vocab, omega) = epu();
        let docs = vec![
            ("2000-01".to_string(), vec!["economic", "congress", "uncertainty"]),
            ("2000-01".to_string(), vec!["economy", "deficit"]),
            ("2000-01".to_string(), vec!["uncertain", "white_house", "economy"]),
            ("2000-02".to_string(), vec!["economic"]),
            ("2000-02".to_string(), vec!["economy", "legislation", "uncertain"]),
        ];
        let (corpus, _) = build_corpus(docs, vocab).unwrap();
        let s = attention_series(&omega, &corpus).unwrap();
        assert_eq!(s.values, vec![2.0 / 3.0, 0.5]);
        assert_eq!(attention(&omega, &corpus, 0).unwrap(), 2.0 / 3.0);
        assert_eq!(attention(&omega, &corpus, 1).unwrap(), 0.5);
    }

    #[test]
    fn attention_extremes() {
        let vocab = Vocabulary::new(["a", "b", "c"]).unwrap();
        let docs = vec![
            ("1".to_string(), vec!["a"]),
            ("1".to_string(), vec!["a", "b"]),
            ("2".to_string(), vec!["a"]),
            ("3".to_string(), vec!["a", "c"]),
        ];
        let (corpus, _) = build_corpus(docs, vocab).unwrap();
        let all = SelectionMatrix::new(vec![vec![0]], 3).unwrap();
        assert_eq!(attention_series(&all, &corpus).unwrap().values, vec![1.0, 1.0, 1.0]);
        let none = SelectionMatrix::new(vec![vec![0], vec![1], vec![2]], 3).unwrap();
        assert_eq!(attention(&none, &corpus, 0).unwrap(), 0.0);
    }

    #[test]
    fn content_scores() {
        let vocab = Vocabulary::new(["a", "b"]).unwrap();
        let corpus = TimeBucketedCorpus::from_documents(
            vocab,
            vec!["t".into()],
            vec![Document::new(0, [(0, 2)]), Document::new(0, [(1, 1)])],
        )
        .unwrap();
        let omega = SelectionMatrix::new(vec![vec![0]], 2).unwrap();
        let zeta = ContentWeights::new([(0, 0.5)].into_iter().collect()).unwrap();
        assert_eq!(content_score(&omega, &corpus, 0, &zeta).unwrap(), 1.0);
        assert_eq!(content_score(&omega, &corpus, 0, &ContentWeights::default()).unwrap(), 0.0);
        let nobody = SelectionMatrix::new(vec![vec![0], vec![1]], 2).unwrap();
        assert!(matches!(
            content_score(&nobody, &corpus, 0, &zeta),
            Err(Error::NoSelectedDocuments(0))
        ));
    }

    #[test]
    fn matrix_canonical_form() {
        let a = SelectionMatrix::new(vec![vec![3, 1, 1], vec![2]], 5).unwrap();
        assert_eq!(a.dims(), &[vec![1, 3], vec![2]]);
        let b = SelectionMatrix::new(vec![vec![2], vec![1, 3]], 5).unwrap();
        assert!(a.same_up_to_permutation(&b));
        assert_ne!(a, b);
        assert!(SelectionMatrix::new(vec![vec![5]], 5).is_err());
        assert_eq!(a.row_count(1), 1);
        let pruned = a.retain_slots(|i| i != 0);
        assert_eq!(pruned.dims(), &[vec![3], vec![2]]);
    }
}
