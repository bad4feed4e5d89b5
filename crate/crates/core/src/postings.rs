//! Bucket-aligned bitset index used for selection counting.
//!
//! Each bucket occupies a whole number of 64-bit words so a per-bucket count
//! is a popcount over a word range. A token is stored dense when its bitset
//! is no larger than its posting list would be as `u32` slots, sparse
//! otherwise.

use crate::corpus::TokenId;

#[derive(Debug, Clone)]
enum TokenBits {
    Dense(Box<[u64]>),
    Sparse(Box<[u32]>),
}

#[derive(Debug, Clone)]
pub(crate) struct PostingIndex {
    word_offsets: Vec<usize>,
    tokens: Vec<TokenBits>,
}

impl PostingIndex {
    /// `doc_offsets[t]..doc_offsets[t + 1]` are the global document indices of
    /// bucket `t`; `postings[v]` lists the global indices containing `v`.
    pub(crate) fn build(doc_offsets: &[usize], postings: &[Vec<u32>]) -> Self {
        let buckets = doc_offsets.len() - 1;
        let mut word_offsets = Vec::with_capacity(buckets + 1);
        word_offsets.push(0);
        for t in 0..buckets {
            let n = doc_offsets[t + 1] - doc_offsets[t];
            word_offsets.push(word_offsets[t] + n.div_ceil(64));
        }
        let total_words = word_offsets[buckets];

        let tokens = postings
            .iter()
            .map(|list| {
                let mut slots = Vec::with_capacity(list.len());
                let mut t = 0;
                for &n in list {
                    let n = n as usize;
                    while n >= doc_offsets[t + 1] {
                        t += 1;
                    }
                    slots.push((word_offsets[t] * 64 + (n - doc_offsets[t])) as u32);
                }
                if slots.len() >= 2 * total_words {
                    let mut bits = vec![0u64; total_words];
                    for s in slots {
                        bits[s as usize / 64] |= 1 << (s % 64);
                    }
                    TokenBits::Dense(bits.into_boxed_slice())
                } else {
                    TokenBits::Sparse(slots.into_boxed_slice())
                }
            })
            .collect();

        Self { word_offsets, tokens }
    }

    fn total_words(&self) -> usize {
        *self.word_offsets.last().unwrap()
    }

    fn union_into(&self, dim: &[TokenId], out: &mut [u64]) {
        out.fill(0);
        for &tok in dim {
            match &self.tokens[tok as usize] {
                TokenBits::Dense(bits) => {
                    for (o, b) in out.iter_mut().zip(bits.iter()) {
                        *o |= *b;
                    }
                }
                TokenBits::Sparse(slots) => {
                    for &s in slots.iter() {
                        out[s as usize / 64] |= 1 << (s % 64);
                    }
                }
            }
        }
    }

    /// Per-bucket number of documents hitting every non-empty dimension.
    /// Returns `None` when all dimensions are empty.
    pub(crate) fn selected_counts(&self, dims: &[Vec<TokenId>]) -> Option<Vec<u32>> {
        let words = self.total_words();
        let mut acc: Option<Vec<u64>> = None;
        let mut scratch = vec![0u64; words];
        for dim in dims.iter().filter(|d| !d.is_empty()) {
            match acc.as_mut() {
                None => {
                    let mut first = vec![0u64; words];
                    self.union_into(dim, &mut first);
                    acc = Some(first);
                }
                Some(a) => {
                    self.union_into(dim, &mut scratch);
                    for (x, s) in a.iter_mut().zip(&scratch) {
                        *x &= *s;
                    }
                }
            }
        }
        let acc = acc?;
        Some(
            self.word_offsets
                .windows(2)
                .map(|w| acc[w[0]..w[1]].iter().map(|x| x.count_ones()).sum())
                .collect(),
        )
    }
}
