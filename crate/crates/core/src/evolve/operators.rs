//! Crossover and mutation operators over selection matrices.
//!
//! Every operator acts on active slots only and leaves the total number of
//! active tokens unchanged. Crossover, n-gram and transform also keep the
//! per-dimension counts; switch moves one token between dimensions but never
//! empties one.

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::{TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::selection::SelectionMatrix;

const CROSSOVER_ATTEMPTS: usize = 10;

/// A member with `count` distinct tokens drawn from `pool`: one per
/// dimension, extras spread over uniformly random dimensions.
pub fn sample_member<R: Rng + ?Sized>(
    pool: &[TokenId],
    vocab_size: usize,
    k: usize,
    count: usize,
    rng: &mut R,
) -> Result<SelectionMatrix> {
    if k == 0 || count < k {
        return Err(Error::InvalidConfig(format!("cannot place {count} tokens in {k} dimensions")));
    }
    if pool.len() < count {
        return Err(Error::InvalidConfig(format!(
            "vocabulary of {} tokens cannot supply {count} distinct tokens",
            pool.len()
        )));
    }
    let mut dims = vec![Vec::new(); k];
    for (i, idx) in sample(rng, pool.len(), count).into_iter().enumerate() {
        let d = if i < k { i } else { rng.gen_range(0..k) };
        dims[d].push(pool[idx]);
    }
    SelectionMatrix::new(dims, vocab_size)
}

/// `member` topped up to `count` active tokens with distinct `pool` tokens it
/// does not already use, each in a uniformly random dimension.
pub fn grow_member<R: Rng + ?Sized>(
    member: &SelectionMatrix,
    pool: &[TokenId],
    count: usize,
    rng: &mut R,
) -> Result<SelectionMatrix> {
    let mut m = member.clone();
    let need = count.saturating_sub(m.active_count());
    let fresh: Vec<TokenId> = pool.iter().copied().filter(|&t| !m.is_active(t)).collect();
    if fresh.len() < need {
        return Err(Error::InvalidConfig(format!(
            "pool has {} unused tokens, {need} needed",
            fresh.len()
        )));
    }
    for idx in sample(rng, fresh.len(), need) {
        let d = rng.gen_range(0..m.k());
        m.insert(d, fresh[idx]);
    }
    Ok(m)
}

/// `q` members with one distinct token per dimension.
pub fn init_population<R: Rng + ?Sized>(
    pool: &[TokenId],
    vocab_size: usize,
    k: usize,
    q: usize,
    rng: &mut R,
) -> Result<Vec<SelectionMatrix>> {
    if pool.len() < k {
        return Err(Error::InvalidConfig(format!(
            "vocabulary of {} tokens is smaller than K = {k}",
            pool.len()
        )));
    }
    (0..q).map(|_| sample_member(pool, vocab_size, k, k, rng)).collect()
}

fn pick_slot<R: Rng + ?Sized>(m: &SelectionMatrix, rng: &mut R) -> Option<(usize, TokenId)> {
    let slots = m.slots();
    if slots.is_empty() {
        None
    } else {
        Some(slots[rng.gen_range(0..slots.len())])
    }
}

/// Exchanges one active token between two parents, each incoming token taking
/// the dimension of the token it replaces. A draw whose incoming token is
/// already active in the recipient is redrawn; after ten failed draws the
/// parents are returned unchanged.
pub fn token_crossover<R: Rng + ?Sized>(
    p1: &SelectionMatrix,
    p2: &SelectionMatrix,
    rng: &mut R,
) -> (SelectionMatrix, SelectionMatrix) {
    for _ in 0..CROSSOVER_ATTEMPTS {
        let (Some((k1, t1)), Some((k2, t2))) = (pick_slot(p1, rng), pick_slot(p2, rng)) else {
            break;
        };
        if p1.is_active(t2) || p2.is_active(t1) {
            continue;
        }
        let mut c1 = p1.clone();
        let mut c2 = p2.clone();
        c1.replace(k1, t1, t2);
        c2.replace(k2, t2, t1);
        return (c1, c2);
    }
    (p1.clone(), p2.clone())
}

/// Moves one token out of a dimension holding at least two into another
/// dimension where it is not yet active.
pub fn switch_mutation<R: Rng + ?Sized>(omega: &SelectionMatrix, rng: &mut R) -> SelectionMatrix {
    let k = omega.k();
    let targets = |from: usize, t: TokenId| -> Vec<usize> { (0..k).filter(|&j| j != from && !omega.contains(j, t)).collect() };
    let eligible: Vec<(usize, TokenId)> = omega
        .slots()
        .into_iter()
        .filter(|&(d, t)| omega.dim(d).len() >= 2 && !targets(d, t).is_empty())
        .collect();
    if eligible.is_empty() {
        return omega.clone();
    }
    let (from, t) = eligible[rng.gen_range(0..eligible.len())];
    let dests = targets(from, t);
    let to = dests[rng.gen_range(0..dests.len())];
    let mut out = omega.clone();
    out.remove(from, t);
    out.insert(to, t);
    out
}

/// Replaces an active token that is a component of some n-gram by one of
/// those n-grams, in place.
pub fn ngram_mutation<R: Rng + ?Sized>(omega: &SelectionMatrix, vocab: &Vocabulary, rng: &mut R) -> SelectionMatrix {
    let eligible: Vec<(usize, TokenId)> = omega
        .slots()
        .into_iter()
        .filter(|&(_, t)| !vocab.ngram_parents(t).is_empty())
        .collect();
    if eligible.is_empty() {
        return omega.clone();
    }
    let (d, t) = eligible[rng.gen_range(0..eligible.len())];
    let parents = vocab.ngram_parents(t);
    let g = parents[rng.gen_range(0..parents.len())];
    let mut out = omega.clone();
    out.replace(d, t, g);
    out
}

/// Replaces one active token by a `pool` token that is inactive everywhere
/// in `omega`.
pub fn transform_mutation<R: Rng + ?Sized>(omega: &SelectionMatrix, pool: &[TokenId], rng: &mut R) -> SelectionMatrix {
    let fresh: Vec<TokenId> = pool.iter().copied().filter(|&t| !omega.is_active(t)).collect();
    let Some((d, t)) = pick_slot(omega, rng) else {
        return omega.clone();
    };
    if fresh.is_empty() {
        return omega.clone();
    }
    let new = fresh[rng.gen_range(0..fresh.len())];
    let mut out = omega.clone();
    out.replace(d, t, new);
    out
}
