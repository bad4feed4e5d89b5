//! Synthetic corpora with a known selection matrix, and an exhaustive
//! search oracle for small instances.
//!
//! Planted tokens follow frequency paths driven by one latent series per
//! dimension, so the planted attention moves over time and a search that
//! finds the right tokens can fit the target exactly. Distractors have
//! constant frequencies. An n-gram occurrence always brings its components
//! along, which keeps n-gram postings inside component postings.

use std::fs;
use std::path::Path;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_documents, Document, TimeBucketedCorpus, TokenId, Vocabulary, WindowSplit};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::objective::{score_matrix, standardize_target, write_target_csv, FitnessRecord, PenaltyConfig, TargetSeries};
use crate::rng::{substream, Stream};
use crate::selection::{MatrixRecord, SelectionMatrix};

const MAX_ATTEMPTS: usize = 10;

/// Largest number of matrices [`brute_force_optimum`] will score.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenFrequencies {
    /// Range of the per-bucket probability that a document hits a planted
    /// dimension at all, before drift.
    pub dim_hit_min: f64,
    pub dim_hit_max: f64,
    pub distractor_min: f64,
    pub distractor_max: f64,
    pub ngram_min: f64,
    pub ngram_max: f64,
    /// Log-scale amplitude of planted frequency movements.
    pub drift: f64,
    /// Share of a planted token's movement explained by its dimension's latent.
    pub latent_share: f64,
    /// AR(1) coefficient of the latent and token series.
    pub persistence: f64,
    /// Zipf exponent spreading a dimension's hit probability over its tokens;
    /// 0 gives every token the same base frequency.
    pub skew: f64,
}

impl Default for TokenFrequencies {
    fn default() -> Self {
        Self {
            dim_hit_min: 0.5,
            dim_hit_max: 0.7,
            distractor_min: 0.02,
            distractor_max: 0.25,
            ngram_min: 0.01,
            ngram_max: 0.05,
            drift: 0.6,
            latent_share: 0.9,
            persistence: 0.7,
            skew: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Vocabulary size including n-grams.
    pub vocab_size: usize,
    pub k: usize,
    pub active_per_dim: Vec<usize>,
    pub buckets: usize,
    pub train_buckets: usize,
    pub validation_buckets: usize,
    pub docs_per_bucket: usize,
    pub token_freqs: TokenFrequencies,
    /// Target noise in units of the planted attention's training sd.
    pub noise_sigma: f64,
    /// Make one token of the largest planted dimension a bigram.
    pub planted_ngram: bool,
    pub distractor_ngrams: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            vocab_size: 300,
            k: 3,
            active_per_dim: vec![2, 6, 2],
            buckets: 120,
            train_buckets: 60,
            validation_buckets: 30,
            docs_per_bucket: 1000,
            token_freqs: TokenFrequencies::default(),
            noise_sigma: 0.0,
            planted_ngram: true,
            distractor_ngrams: 40,
            seed: 0,
        }
    }
}

impl SynthParams {
    fn ngram_count(&self) -> usize {
        self.distractor_ngrams + usize::from(self.planted_ngram)
    }

    fn planted_plain(&self) -> usize {
        self.active_per_dim.iter().sum::<usize>() - usize::from(self.planted_ngram)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 || self.active_per_dim.len() != self.k {
            return bad(format!(
                "active_per_dim has {} entries for K = {}",
                self.active_per_dim.len(),
                self.k
            ));
        }
        if self.active_per_dim.contains(&0) {
            return bad("every planted dimension needs an active token".into());
        }
        let widest = *self.active_per_dim.iter().max().unwrap();
        if self.vocab_size < self.k * widest {
            return bad(format!("vocab_size {} is below K * max(active_per_dim)", self.vocab_size));
        }
        if self.planted_ngram && widest < 2 {
            return bad("a planted n-gram needs a dimension with two or more tokens".into());
        }
        // planted tokens, two components for the planted n-gram, two distractors
        let plain_needed = self.planted_plain() + 2 * usize::from(self.planted_ngram) + 2;
        if self.vocab_size < self.ngram_count() + plain_needed {
            return bad(format!(
                "vocab_size {} leaves too few plain tokens for {} n-grams",
                self.vocab_size,
                self.ngram_count()
            ));
        }
        if self.docs_per_bucket < 20 {
            return bad(format!("docs_per_bucket must be >= 20, got {}", self.docs_per_bucket));
        }
        WindowSplit::from_counts(self.buckets, self.train_buckets, self.validation_buckets)?;
        let f = &self.token_freqs;
        if !(0.0 < f.dim_hit_min && f.dim_hit_min <= f.dim_hit_max && f.dim_hit_max <= 1.0) {
            return bad(format!("planted hit range [{}, {}] must lie inside (0, 1]", f.dim_hit_min, f.dim_hit_max));
        }
        for (lo, hi) in [
            (f.distractor_min, f.distractor_max),
            (f.ngram_min, f.ngram_max),
        ] {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return bad(format!("frequency range [{lo}, {hi}] must lie inside (0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&f.latent_share) || !(0.0..1.0).contains(&f.persistence) || f.drift.is_nan() || f.drift < 0.0 {
            return bad("latent_share in [0,1], persistence in [0,1), drift >= 0 required".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub corpus: TimeBucketedCorpus,
    pub planted: SelectionMatrix,
    pub target: TargetSeries,
    pub embeddings: EmbeddingTable,
    /// Planted attention as counted while generating documents.
    pub attention: Vec<f64>,
    pub params: SynthParams,
    /// Generation attempts used, counting the successful one.
    pub attempts: usize,
}

/// Parameters and layout facts written next to an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub params: SynthParams,
    pub attempts: usize,
    pub train_end: String,
    pub validation_end: String,
    pub planted: MatrixRecord,
}

impl PlantedInstance {
    pub fn split(&self) -> &WindowSplit {
        &self.target.split
    }

    pub fn manifest(&self) -> InstanceManifest {
        let labels = self.corpus.labels();
        InstanceManifest {
            params: self.params.clone(),
            attempts: self.attempts,
            train_end: labels[self.split().train.end - 1].clone(),
            validation_end: labels[self.split().validation.end - 1].clone(),
            planted: self.planted.to_record(self.corpus.vocab()),
        }
    }

    /// Writes `corpus.jsonl`, `vocab.txt`, `target.csv`, `embeddings.txt`,
    /// `planted.json` and `manifest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_documents(&self.corpus, dir.join("corpus.jsonl"))?;
        self.corpus.vocab().write(dir.join("vocab.txt"))?;
        write_target_csv(dir.join("target.csv"), self.corpus.labels(), &self.target.raw)?;
        self.embeddings.write(dir.join("embeddings.txt"))?;
        self.planted.write(dir.join("planted.json"), self.corpus.vocab())?;
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest())?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn ar1(n: usize, rho: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = (1.0 - rho * rho).sqrt();
    let mut x: f64 = StandardNormal.sample(rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        let e: f64 = StandardNormal.sample(rng);
        x = rho * x + scale * e;
    }
    out
}

fn bucket_label(t: usize) -> String {
    format!("{:04}-{:02}", 2000 + t / 12, t % 12 + 1)
}

struct Layout {
    vocab: Vocabulary,
    planted: SelectionMatrix,
    // dimension and within-dimension rank of each planted token, including
    // the planted n-gram
    planted_dim: Vec<Option<(usize, usize)>>,
    // planted n-gram components with the dimension they lean towards
    leaning: Vec<Option<usize>>,
    plain: usize,
}

fn layout(p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<Layout> {
    let plain = p.vocab_size - p.ngram_count();
    let mut ids: Vec<TokenId> = (0..plain as TokenId).collect();
    ids.shuffle(rng);
    let mut next = ids.into_iter();

    let widest = (0..p.k).max_by_key(|&d| (p.active_per_dim[d], std::cmp::Reverse(d))).unwrap();
    let mut dims: Vec<Vec<TokenId>> = vec![Vec::new(); p.k];
    let mut planted_dim = vec![None; p.vocab_size];
    let mut leaning = vec![None; p.vocab_size];
    for (d, &n) in p.active_per_dim.iter().enumerate() {
        let plain_here = n - usize::from(p.planted_ngram && d == widest);
        for r in 0..plain_here {
            let t = next.next().unwrap();
            dims[d].push(t);
            planted_dim[t as usize] = Some((d, r));
        }
    }

    let mut names: Vec<String> = (0..plain).map(|i| format!("w{i:04}")).collect();
    let mut seen = std::collections::HashSet::new();
    if p.planted_ngram {
        let (a, b) = (next.next().unwrap(), next.next().unwrap());
        leaning[a as usize] = Some(widest);
        leaning[b as usize] = Some(widest);
        let id = names.len() as TokenId;
        names.push(format!("{}_{}", names[a as usize], names[b as usize]));
        seen.insert((a, b));
        planted_dim[id as usize] = Some((widest, dims[widest].len()));
        dims[widest].push(id);
    }
    let distractors: Vec<TokenId> = next.collect();
    let planted_plain: Vec<TokenId> = dims.iter().flatten().copied().filter(|&t| (t as usize) < plain).collect();
    while names.len() < p.vocab_size {
        let first = if rng.gen_bool(0.5) {
            planted_plain[rng.gen_range(0..planted_plain.len())]
        } else {
            distractors[rng.gen_range(0..distractors.len())]
        };
        let second = distractors[rng.gen_range(0..distractors.len())];
        if first == second || !seen.insert((first, second)) {
            continue;
        }
        names.push(format!("{}_{}", names[first as usize], names[second as usize]));
    }
    let vocab = Vocabulary::new(names)?;
    let planted = SelectionMatrix::new(dims, p.vocab_size)?;
    Ok(Layout {
        vocab,
        planted,
        planted_dim,
        leaning,
        plain,
    })
}

fn embeddings(p: &SynthParams, l: &Layout) -> Result<EmbeddingTable> {
    let dim = p.k + l.plain;
    let mut table = EmbeddingTable::new(dim);
    for v in 0..l.plain {
        let mut x = vec![0.0; dim];
        match (l.planted_dim[v], l.leaning[v]) {
            (Some((d, _)), _) => {
                x[d] = 1.0;
                x[p.k + v] = 0.1;
            }
            (None, Some(d)) => {
                x[d] = 0.5;
                x[p.k + v] = 1.0;
            }
            (None, None) => x[p.k + v] = 1.0,
        }
        table.insert(l.vocab.token(v as TokenId), x)?;
    }
    Ok(table)
}

/// Base frequencies of `n` tokens, Zipf-weighted by rank, whose union is
/// hit with probability `hit`.
fn token_bases(n: usize, hit: f64, skew: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).powf(-skew)).collect();
    let at = |c: f64| w.iter().map(|&x| (c * x).min(1.0)).collect::<Vec<_>>();
    let union = |ps: &[f64]| 1.0 - ps.iter().map(|p| 1.0 - p).product::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0 / w[n - 1]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if union(&at(mid)) < hit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// Per-bucket occurrence probability of every token.
fn frequencies(p: &SynthParams, l: &Layout, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let f = &p.token_freqs;
    let latents: Vec<Vec<f64>> = (0..p.k).map(|_| ar1(p.buckets, f.persistence, rng)).collect();
    let bases: Vec<Vec<f64>> = p
        .active_per_dim
        .iter()
        .map(|&n| token_bases(n, rng.gen_range(f.dim_hit_min..=f.dim_hit_max), f.skew))
        .collect();
    let (ws, wt) = (f.latent_share.sqrt(), (1.0 - f.latent_share).sqrt());
    (0..p.vocab_size)
        .map(|v| match l.planted_dim[v] {
            Some((d, r)) => {
                let base = bases[d][r];
                let own = ar1(p.buckets, f.persistence, rng);
                (0..p.buckets)
                    .map(|t| {
                        let s = ws * latents[d][t] + wt * own[t];
                        (base * (f.drift * s - f.drift * f.drift / 2.0).exp()).clamp(1e-4, 1.0)
                    })
                    .collect()
            }
            None if l.vocab.is_ngram(v as TokenId) => vec![rng.gen_range(f.ngram_min..=f.ngram_max); p.buckets],
            None => vec![rng.gen_range(f.distractor_min..=f.distractor_max); p.buckets],
        })
        .collect()
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

fn attempt(p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<Option<PlantedInstance>> {
    let l = layout(p, rng)?;
    let probs = frequencies(p, &l, rng);
    let ngrams: Vec<TokenId> = (0..p.vocab_size as TokenId).filter(|&v| l.vocab.is_ngram(v)).collect();

    let mut docs = Vec::with_capacity(p.buckets * p.docs_per_bucket);
    let mut attention = Vec::with_capacity(p.buckets);
    let mut counts = vec![0u32; p.vocab_size];
    for t in 0..p.buckets {
        let mut selected = 0usize;
        for _ in 0..p.docs_per_bucket {
            counts.fill(0);
            for (c, pv) in counts.iter_mut().zip(&probs) {
                if rng.gen::<f64>() < pv[t] {
                    *c = rng.gen_range(1..=3);
                }
            }
            for &g in &ngrams {
                if counts[g as usize] > 0 {
                    for &c in l.vocab.components(g) {
                        counts[c as usize] = counts[c as usize].max(counts[g as usize]);
                    }
                }
            }
            let hit = l.planted.dims().iter().all(|d| d.iter().any(|&v| counts[v as usize] > 0));
            selected += usize::from(hit);
            docs.push(Document::new(
                t,
                counts.iter().enumerate().map(|(v, &c)| (v as TokenId, c)),
            ));
        }
        attention.push(selected as f64 / p.docs_per_bucket as f64);
    }

    let split = WindowSplit::from_counts(p.buckets, p.train_buckets, p.validation_buckets)?;
    let scale = sd(&attention[split.train.clone()]);
    if scale == 0.0 || sd(&attention[split.validation.clone()]) == 0.0 {
        return Ok(None);
    }
    let raw: Vec<f64> = attention
        .iter()
        .map(|&a| {
            if p.noise_sigma == 0.0 {
                a
            } else {
                let e: f64 = StandardNormal.sample(rng);
                a + p.noise_sigma * scale * e
            }
        })
        .collect();
    let target = standardize_target(raw, split)?;
    let labels = (0..p.buckets).map(bucket_label).collect();
    let embeddings = embeddings(p, &l)?;
    let corpus = TimeBucketedCorpus::from_documents(l.vocab, labels, docs)?;
    Ok(Some(PlantedInstance {
        corpus,
        planted: l.planted,
        target,
        embeddings,
        attention,
        params: p.clone(),
        attempts: 0,
    }))
}

/// Draws a corpus and target from `params`. Attempts whose planted attention
/// is constant on the training or validation window are redrawn.
pub fn generate_planted_instance(params: &SynthParams) -> Result<PlantedInstance> {
    params.validate()?;
    for a in 0..MAX_ATTEMPTS {
        let mut rng = substream(params.seed, a as u64, 0, Stream::Synth, 0);
        if let Some(mut inst) = attempt(params, &mut rng)? {
            inst.attempts = a + 1;
            return Ok(inst);
        }
    }
    Err(Error::FlatPlantedSignal(MAX_ATTEMPTS))
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Matrices with `k` non-empty dimensions and at most `max_active` slots.
pub fn enumeration_size(v: usize, k: usize, max_active: usize) -> u128 {
    // ways[j] = number of ways to fill the dimensions seen so far with j slots
    let mut ways = vec![0u128; max_active + 1];
    ways[0] = 1;
    for _ in 0..k {
        let mut next = vec![0u128; max_active + 1];
        for (used, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for n in 1..=(max_active - used).min(v) {
                next[used + n] = next[used + n].saturating_add(w.saturating_mul(binomial(v, n)));
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &w| a.saturating_add(w))
}

fn rank(a: &(SelectionMatrix, FitnessRecord), b: &(SelectionMatrix, FitnessRecord)) -> std::cmp::Ordering {
    a.1.objective_train
        .total_cmp(&b.1.objective_train)
        .then(a.0.active_count().cmp(&b.0.active_count()))
        .then(a.0.cmp(&b.0))
}

fn fill(
    dims: &mut Vec<Vec<TokenId>>,
    k: usize,
    budget: usize,
    v: usize,
    visit: &mut dyn FnMut(&[Vec<TokenId>]) -> Result<()>,
) -> Result<()> {
    if dims.len() == k {
        return visit(dims);
    }
    let left = k - dims.len() - 1;
    for n in 1..=budget.saturating_sub(left).min(v) {
        for combo in (0..v as TokenId).combinations(n) {
            dims.push(combo);
            fill(dims, k, budget - n, v, visit)?;
            dims.pop();
        }
    }
    Ok(())
}

/// Exact minimizer of the training objective over every matrix with `k`
/// non-empty dimensions and at most `max_active` active slots. Ties go to
/// fewer active tokens, then to the lexicographically smaller matrix.
pub fn brute_force_optimum(
    corpus: &TimeBucketedCorpus,
    target: &TargetSeries,
    pcfg: &PenaltyConfig,
    k: usize,
    max_active: usize,
) -> Result<(SelectionMatrix, FitnessRecord)> {
    let v = corpus.vocab().len();
    if k == 0 || max_active < k {
        return Err(Error::InvalidConfig(format!("cannot fill {k} dimensions with {max_active} tokens")));
    }
    let count = enumeration_size(v, k, max_active);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardExceeded {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    // the first dimension is split across workers
    let firsts: Vec<Vec<TokenId>> = (1..=(max_active - (k - 1)).min(v))
        .flat_map(|n| (0..v as TokenId).combinations(n))
        .collect();
    firsts
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(SelectionMatrix, FitnessRecord)> = None;
            let mut dims = vec![first.clone()];
            fill(&mut dims, k, max_active - first.len(), v, &mut |d| {
                let m = SelectionMatrix::new(d.to_vec(), v)?;
                let f = score_matrix(&m, corpus, target, pcfg)?;
                let cand = (m, f);
                if best.as_ref().is_none_or(|b| rank(&cand, b).is_lt()) {
                    best = Some(cand);
                }
                Ok(())
            })?;
            Ok::<_, Error>(best)
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (Some(a), Some(b)) => Some(if rank(&b, &a).is_lt() { b } else { a }),
                    (a, b) => a.or(b),
                })
            },
        )?
        .ok_or(Error::DegenerateMatrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthParams {
        SynthParams {
            vocab_size: 20,
            k: 2,
            active_per_dim: vec![1, 2],
            buckets: 30,
            train_buckets: 15,
            validation_buckets: 8,
            docs_per_bucket: 60,
            planted_ngram: false,
            distractor_ngrams: 3,
            ..SynthParams::default()
        }
    }

    #[test]
    fn enumeration_counts() {
        // V=4, K=2, max 3: (1,1) 16 + (1,2) 24 + (2,1) 24
        assert_eq!(enumeration_size(4, 2, 3), 64);
        assert_eq!(enumeration_size(15, 2, 3), 225 + 2 * 15 * 105);
        assert_eq!(enumeration_size(5, 1, 5), 31);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_planted_instance(&small()).unwrap();
        let b = generate_planted_instance(&small()).unwrap();
        assert_eq!(a.corpus.documents(), b.corpus.documents());
        assert_eq!(a.target, b.target);
        assert_eq!(a.planted, b.planted);
    }

    #[test]
    fn noiseless_target_is_planted_attention() {
        let inst = generate_planted_instance(&small()).unwrap();
        assert_eq!(inst.target.raw, inst.attention);
        assert_eq!(inst.planted.dim_counts(), vec![1, 2]);
    }

    #[test]
    fn bad_params_rejected() {
        let p = SynthParams {
            docs_per_bucket: 10,
            ..small()
        };
        assert!(matches!(generate_planted_instance(&p), Err(Error::InvalidConfig(_))));
        let p = SynthParams {
            active_per_dim: vec![1],
            ..small()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn flat_signal_reported() {
        let mut p = small();
        // every document hits every planted dimension
        p.token_freqs.drift = 0.0;
        p.token_freqs.dim_hit_min = 1.0;
        p.token_freqs.dim_hit_max = 1.0;
        match generate_planted_instance(&p) {
            Err(Error::FlatPlantedSignal(10)) => {}
            other => panic!("unexpected {:?}", other.map(|i| i.attention)),
        }
    }

    #[test]
    fn guard_trips() {
        let inst = generate_planted_instance(&small()).unwrap();
        let err = brute_force_optimum(&inst.corpus, &inst.target, &PenaltyConfig::default(), 3, 12).unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { .. }));
    }
}
