//! Genetic search over selection matrices.
//!
//! A calibration runs epochs at a growing active-token budget. Each epoch
//! runs `H` iterations of evaluate, elitism, tournament, crossover and
//! mutation; the per-iteration best with the lowest validation objective
//! wins the epoch and seeds the next one, whose vocabulary is narrowed to
//! tokens whose embeddings lie near the winner's dimensions. The last winner
//! is then pruned by exhaustive deactivation.

mod calibrate;
pub mod operators;
mod prune;

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{TimeBucketedCorpus, TokenId};
use crate::error::{Error, Result};
use crate::objective::{score_matrix, FitnessRecord, PenaltyConfig, TargetSeries};
use crate::rng::{substream, Stream};
use crate::selection::SelectionMatrix;

pub use calibrate::{
    refine_vocabulary, run_calibration, BestSolutionLog, CalibrationResult, CalibrationState, Calibrator, EpochWinner,
    IterationBest, TokenVectors,
};
pub use operators::{grow_member, init_population, ngram_mutation, sample_member, switch_mutation, token_crossover, transform_mutation};
pub use prune::{prune, PruneOutcome, MAX_PRUNE_ACTIVE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GAConfig {
    pub population_size: usize,
    pub iterations_per_epoch: usize,
    pub max_active_tokens: usize,
    pub elite_fraction: f64,
    pub switch_prob: f64,
    pub ngram_prob: f64,
    pub tournament_size: usize,
    pub similarity_threshold: f64,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population_size: 300,
            iterations_per_epoch: 200,
            max_active_tokens: 15,
            elite_fraction: 0.05,
            switch_prob: 0.05,
            ngram_prob: 0.05,
            tournament_size: 3,
            similarity_threshold: 0.2,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.population_size < 10 {
            return bad(format!("population_size must be >= 10, got {}", self.population_size));
        }
        if self.iterations_per_epoch < 1 {
            return bad("iterations_per_epoch must be >= 1".into());
        }
        if k == 0 {
            return bad("K must be >= 1".into());
        }
        if self.max_active_tokens < k {
            return bad(format!("max_active_tokens {} is below K = {k}", self.max_active_tokens));
        }
        if self.tournament_size < 1 {
            return bad("tournament_size must be >= 1".into());
        }
        for (name, p) in [
            ("elite_fraction", self.elite_fraction),
            ("switch_prob", self.switch_prob),
            ("ngram_prob", self.ngram_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !self.similarity_threshold.is_finite() {
            return bad("similarity_threshold must be finite".into());
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.population_size as f64).ceil() as usize
    }
}

/// Memoized fitness of matrices against one corpus and target.
///
/// Fitness is a pure function of the matrix, so a cached record is identical
/// to a recomputed one. Uncached members of a batch are scored in parallel on
/// the current rayon pool.
pub struct Evaluator<'a> {
    corpus: &'a TimeBucketedCorpus,
    target: &'a TargetSeries,
    pcfg: PenaltyConfig,
    cache: HashMap<SelectionMatrix, FitnessRecord>,
    computed: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(corpus: &'a TimeBucketedCorpus, target: &'a TargetSeries, pcfg: PenaltyConfig) -> Self {
        Self {
            corpus,
            target,
            pcfg,
            cache: HashMap::new(),
            computed: 0,
        }
    }

    pub fn corpus(&self) -> &'a TimeBucketedCorpus {
        self.corpus
    }

    pub fn target(&self) -> &'a TargetSeries {
        self.target
    }

    pub fn penalties(&self) -> &PenaltyConfig {
        &self.pcfg
    }

    /// Number of fitness computations that missed the cache.
    pub fn computed(&self) -> usize {
        self.computed
    }

    pub fn evaluate(&mut self, members: &[SelectionMatrix]) -> Result<Vec<FitnessRecord>> {
        let mut seen = HashSet::new();
        let missing: Vec<&SelectionMatrix> = members
            .iter()
            .filter(|m| !self.cache.contains_key(*m) && seen.insert(*m))
            .collect();
        let (corpus, target, pcfg) = (self.corpus, self.target, &self.pcfg);
        let fresh: Vec<FitnessRecord> = missing
            .par_iter()
            .map(|m| score_matrix(m, corpus, target, pcfg))
            .collect::<Result<_>>()?;
        self.computed += fresh.len();
        for (m, f) in missing.into_iter().zip(fresh) {
            self.cache.insert(m.clone(), f);
        }
        Ok(members.iter().map(|m| self.cache[m]).collect())
    }

    pub fn evaluate_one(&mut self, member: &SelectionMatrix) -> Result<FitnessRecord> {
        Ok(self.evaluate(std::slice::from_ref(member))?[0])
    }
}

/// Members of one iteration and the tokens transform mutation may draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<SelectionMatrix>,
    pub epoch: usize,
    pub pool: Vec<TokenId>,
}

/// Index of the lowest training objective among `size` members drawn
/// uniformly with replacement; the earliest draw wins ties.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[FitnessRecord], size: usize, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c].objective_train < fitness[best].objective_train {
            best = c;
        }
    }
    best
}

/// Fraction of distinct matrices in `members`.
pub fn unique_ratio(members: &[SelectionMatrix]) -> f64 {
    let distinct: HashSet<&SelectionMatrix> = members.iter().collect();
    distinct.len() as f64 / members.len() as f64
}

/// Keys the random substreams of one iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationKey {
    pub seed: u64,
    pub epoch: u64,
    pub iteration: u64,
}

impl IterationKey {
    fn rng(&self, stream: Stream, index: u64) -> rand_chacha::ChaCha8Rng {
        substream(self.seed, self.epoch, self.iteration, stream, index)
    }
}

/// One GA iteration. Returns the next members and the best current member
/// (lowest training objective, earliest index on ties) with its fitness.
pub fn run_iteration(
    population: &Population,
    eval: &mut Evaluator<'_>,
    cfg: &GAConfig,
    key: IterationKey,
) -> Result<(Vec<SelectionMatrix>, IterationBest)> {
    let members = &population.members;
    let q = members.len();
    let vocab = eval.corpus().vocab();
    let fitness = eval.evaluate(members)?;

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| fitness[a].objective_train.total_cmp(&fitness[b].objective_train).then(a.cmp(&b)));
    let n_elite = cfg.elite_count().min(q);
    let elites: Vec<SelectionMatrix> = order[..n_elite].iter().map(|&i| members[i].clone()).collect();
    let best = IterationBest {
        epoch: population.epoch,
        iteration: key.iteration as usize,
        matrix: members[order[0]].clone(),
        fitness: fitness[order[0]],
    };

    let mut rng = key.rng(Stream::Tournament, 0);
    let mut interim: Vec<SelectionMatrix> = (0..q)
        .map(|_| members[tournament_select(&fitness, cfg.tournament_size, &mut rng)].clone())
        .collect();

    let s = unique_ratio(&interim);

    let mut pairing: Vec<usize> = (0..q).collect();
    pairing.shuffle(&mut key.rng(Stream::CrossoverPairing, 0));
    for (p, pair) in pairing.chunks_exact(2).enumerate() {
        let mut rng = key.rng(Stream::Crossover, p as u64);
        if rng.gen::<f64>() < s {
            let (c1, c2) = token_crossover(&interim[pair[0]], &interim[pair[1]], &mut rng);
            interim[pair[0]] = c1;
            interim[pair[1]] = c2;
        }
    }

    for (i, m) in interim.iter_mut().enumerate() {
        let mut rng = key.rng(Stream::Switch, i as u64);
        if rng.gen::<f64>() < cfg.switch_prob {
            *m = switch_mutation(m, &mut rng);
        }
        let mut rng = key.rng(Stream::NGram, i as u64);
        if rng.gen::<f64>() < cfg.ngram_prob {
            *m = ngram_mutation(m, vocab, &mut rng);
        }
        let mut rng = key.rng(Stream::Transform, i as u64);
        if rng.gen::<f64>() < 1.0 - s {
            *m = transform_mutation(m, &population.pool, &mut rng);
        }
    }

    let slots = rand::seq::index::sample(&mut key.rng(Stream::Elite, 0), q, n_elite);
    for (slot, elite) in slots.into_iter().zip(elites) {
        interim[slot] = elite;
    }

    Ok((interim, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(obj: f64) -> FitnessRecord {
        FitnessRecord {
            alpha: 0.0,
            beta: 0.0,
            overlap: 0,
            objective_train: obj,
            objective_validation: obj,
            rmse_train: 0.0,
            rmse_validation: 0.0,
            rmse_test: None,
        }
    }

    #[test]
    fn tournament_prefers_strict_best() {
        let fit = vec![rec(1.0), rec(0.5), rec(2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // with size = population, the best is almost always sampled
        let wins = (0..1000).filter(|_| tournament_select(&fit, 50, &mut rng) == 1).count();
        assert_eq!(wins, 1000);
    }

    #[test]
    fn tournament_equal_fitness_any_member() {
        let fit = vec![rec(1.0); 5];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = [0usize; 5];
        for _ in 0..5000 {
            hits[tournament_select(&fit, 3, &mut rng)] += 1;
        }
        assert!(hits.iter().all(|&h| h > 800));
    }

    #[test]
    fn config_bounds() {
        let cfg = GAConfig::default();
        assert!(cfg.validate(3).is_ok());
        assert_eq!(cfg.elite_count(), 15);
        assert!(GAConfig { population_size: 9, ..cfg.clone() }.validate(3).is_err());
        assert!(GAConfig { max_active_tokens: 2, ..cfg.clone() }.validate(3).is_err());
        assert!(GAConfig { switch_prob: 1.5, ..cfg }.validate(3).is_err());
    }

    #[test]
    fn unique_ratio_counts_structural_duplicates() {
        let a = SelectionMatrix::new(vec![vec![0], vec![1]], 3).unwrap();
        let b = SelectionMatrix::new(vec![vec![1], vec![0]], 3).unwrap();
        assert_eq!(unique_ratio(&[a.clone(), a.clone(), b, a]), 0.5);
    }
}
