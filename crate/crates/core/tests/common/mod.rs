#![allow(dead_code)]

use optidx::synthlab::{generate_planted_instance, PlantedInstance, SynthParams};
use optidx::{Document, SelectionMatrix, TimeBucketedCorpus, TokenId, Vocabulary};
use rand::seq::index::sample;
use rand::Rng;

/// Random valid matrix: every dimension non-empty, tokens distinct.
pub fn random_matrix<R: Rng>(rng: &mut R, v: usize, k: usize, max_per_dim: usize) -> SelectionMatrix {
    let counts: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=max_per_dim)).collect();
    let total: usize = counts.iter().sum();
    let mut toks = sample(rng, v, total).into_iter();
    let dims = counts
        .iter()
        .map(|&c| (&mut toks).take(c).map(|t| t as TokenId).collect())
        .collect();
    SelectionMatrix::new(dims, v).unwrap()
}

/// Plain vocabulary `t00..` with no n-grams.
pub fn plain_vocab(v: usize) -> Vocabulary {
    Vocabulary::new((0..v).map(|i| format!("t{i:02}"))).unwrap()
}

/// Corpus of `docs` random documents per bucket with token sets listed
/// alongside, so tests can check against the raw lists.
pub fn random_corpus<R: Rng>(rng: &mut R, v: usize, buckets: usize, docs: usize, density: f64) -> (TimeBucketedCorpus, Vec<Vec<Vec<TokenId>>>) {
    let mut raw = vec![Vec::new(); buckets];
    let mut all = Vec::new();
    for (b, bucket) in raw.iter_mut().enumerate() {
        for _ in 0..docs {
            let toks: Vec<TokenId> = (0..v as TokenId).filter(|_| rng.gen_bool(density)).collect();
            all.push(Document::new(b, toks.iter().map(|&t| (t, 1))));
            bucket.push(toks);
        }
    }
    let labels = (0..buckets).map(|b| format!("b{b:03}")).collect();
    (TimeBucketedCorpus::from_documents(plain_vocab(v), labels, all).unwrap(), raw)
}

/// Small planted instance that generates in milliseconds.
pub fn small_params(seed: u64) -> SynthParams {
    SynthParams {
        vocab_size: 40,
        k: 2,
        active_per_dim: vec![1, 3],
        buckets: 48,
        train_buckets: 24,
        validation_buckets: 12,
        docs_per_bucket: 150,
        distractor_ngrams: 4,
        seed,
        ..SynthParams::default()
    }
}

pub fn small_instance(seed: u64) -> PlantedInstance {
    generate_planted_instance(&small_params(seed)).unwrap()
}

/// Plain tokens `t00..` plus `ngrams` bigrams over random component pairs.
pub fn vocab_with_ngrams<R: Rng>(rng: &mut R, plain: usize, ngrams: usize) -> Vocabulary {
    let mut toks: Vec<String> = (0..plain).map(|i| format!("t{i:02}")).collect();
    while toks.len() < plain + ngrams {
        let (a, b) = (rng.gen_range(0..plain), rng.gen_range(0..plain));
        let g = format!("t{a:02}_t{b:02}");
        if a != b && !toks.contains(&g) {
            toks.push(g);
        }
    }
    Vocabulary::new(toks).unwrap()
}

/// Every dimension non-empty and sorted without repeats, ids in range.
pub fn check_valid(m: &SelectionMatrix) -> Result<(), String> {
    if !m.all_dims_non_empty() {
        return Err(format!("empty dimension in {:?}", m.dims()));
    }
    for d in m.dims() {
        if d.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("unsorted or repeated tokens in {d:?}"));
        }
        if d.iter().any(|&t| t as usize >= m.vocab_size()) {
            return Err(format!("token out of range in {d:?}"));
        }
    }
    Ok(())
}

fn slot_diff(a: &SelectionMatrix, b: &SelectionMatrix) -> Vec<(usize, Vec<TokenId>, Vec<TokenId>)> {
    (0..a.k())
        .filter_map(|d| {
            let gone: Vec<TokenId> = a.dim(d).iter().copied().filter(|t| !b.contains(d, *t)).collect();
            let new: Vec<TokenId> = b.dim(d).iter().copied().filter(|t| !a.contains(d, *t)).collect();
            (!gone.is_empty() || !new.is_empty()).then_some((d, gone, new))
        })
        .collect()
}

/// Children keep their parent's per-dimension counts and differ from it in
/// at most one slot, whose new token comes from the other parent.
pub fn check_crossover(p1: &SelectionMatrix, p2: &SelectionMatrix, c1: &SelectionMatrix, c2: &SelectionMatrix) -> Result<(), String> {
    for (p, other, c) in [(p1, p2, c1), (p2, p1, c2)] {
        check_valid(c)?;
        if c.dim_counts() != p.dim_counts() {
            return Err(format!("counts {:?} -> {:?}", p.dim_counts(), c.dim_counts()));
        }
        let diff = slot_diff(p, c);
        match diff.as_slice() {
            [] => {}
            [(_, gone, new)] if gone.len() == 1 && new.len() == 1 => {
                if !other.is_active(new[0]) || !c.is_active(new[0]) {
                    return Err(format!("token {} did not come from the other parent", new[0]));
                }
            }
            _ => return Err(format!("crossover changed more than one slot: {diff:?}")),
        }
    }
    if (c1 == p1) != (c2 == p2) {
        return Err("only one child changed".into());
    }
    Ok(())
}

/// Total count kept; either unchanged or one token moved out of a
/// dimension that held at least two.
pub fn check_switch(p: &SelectionMatrix, c: &SelectionMatrix) -> Result<(), String> {
    check_valid(c)?;
    if c.active_count() != p.active_count() {
        return Err("switch changed the total active count".into());
    }
    let diff = slot_diff(p, c);
    match diff.as_slice() {
        [] => Ok(()),
        [(d1, g1, n1), (d2, g2, n2)] => {
            let (from, to, tok) = match (g1.as_slice(), n1.as_slice(), g2.as_slice(), n2.as_slice()) {
                ([t], [], [], [u]) if t == u => (*d1, *d2, *t),
                ([], [u], [t], []) if t == u => (*d2, *d1, *t),
                _ => return Err(format!("not a single move: {diff:?}")),
            };
            if p.dim(from).len() < 2 {
                return Err(format!("moved {tok} out of sole-occupied dimension {from}"));
            }
            if p.contains(to, tok) {
                return Err("moved into a dimension already holding the token".into());
            }
            Ok(())
        }
        _ => Err(format!("switch changed {diff:?}")),
    }
}

/// Per-dimension counts kept; either unchanged or one token replaced in
/// place by one of its n-gram parents.
pub fn check_ngram(p: &SelectionMatrix, c: &SelectionMatrix, vocab: &Vocabulary) -> Result<(), String> {
    check_valid(c)?;
    if c.dim_counts() != p.dim_counts() {
        return Err("n-gram mutation changed dimension counts".into());
    }
    match slot_diff(p, c).as_slice() {
        [] => Ok(()),
        [(_, gone, new)] if gone.len() == 1 && new.len() == 1 => {
            if vocab.ngram_parents(gone[0]).contains(&new[0]) && vocab.components(new[0]).contains(&gone[0]) {
                Ok(())
            } else {
                Err(format!("{} is not an n-gram containing {}", new[0], gone[0]))
            }
        }
        d => Err(format!("n-gram mutation changed {d:?}")),
    }
}

/// Per-dimension counts kept; exactly one slot replaced by a pool token
/// that was inactive everywhere, or unchanged when none is available.
pub fn check_transform(p: &SelectionMatrix, c: &SelectionMatrix, pool: &[TokenId]) -> Result<(), String> {
    check_valid(c)?;
    if c.dim_counts() != p.dim_counts() {
        return Err("transform changed dimension counts".into());
    }
    let fresh = pool.iter().any(|&t| !p.is_active(t));
    match slot_diff(p, c).as_slice() {
        [] if !fresh => Ok(()),
        [] => Err("transform left the matrix unchanged with fresh tokens available".into()),
        [(_, gone, new)] if gone.len() == 1 && new.len() == 1 => {
            if p.is_active(new[0]) || !pool.contains(&new[0]) {
                Err(format!("token {} was already active or outside the pool", new[0]))
            } else {
                Ok(())
            }
        }
        d => Err(format!("transform changed {d:?}")),
    }
}
