use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{grow_member, init_population, run_iteration, Evaluator, GAConfig, IterationKey, Population};
use crate::corpus::{TimeBucketedCorpus, TokenId, Vocabulary};
use crate::embeddings::{collocation_vector, cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::objective::{FitnessRecord, PenaltyConfig, TargetSeries};
use crate::rng::{substream, Stream};
use crate::selection::SelectionMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationBest {
    pub epoch: usize,
    pub iteration: usize,
    pub matrix: SelectionMatrix,
    pub fitness: FitnessRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochWinner {
    pub epoch: usize,
    /// Active-token count members start this epoch with.
    pub budget: usize,
    /// Number of tokens transform mutation could draw from.
    pub vocab_size: usize,
    pub matrix: SelectionMatrix,
    pub fitness: FitnessRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BestSolutionLog {
    pub iterations: Vec<IterationBest>,
    pub epochs: Vec<EpochWinner>,
}

/// Embedding of every vocabulary token, `None` when unknown or zero.
#[derive(Debug, Clone)]
pub struct TokenVectors {
    vectors: Vec<Option<Vec<f64>>>,
}

impl TokenVectors {
    pub fn new(vocab: &Vocabulary, table: &EmbeddingTable) -> Self {
        let vectors = vocab
            .tokens()
            .iter()
            .map(|t| collocation_vector(table, t).filter(|v| v.iter().any(|&x| x != 0.0)))
            .collect();
        Self { vectors }
    }

    fn centroid(&self, dim: &[TokenId]) -> Option<Vec<f64>> {
        let known: Vec<&Vec<f64>> = dim.iter().filter_map(|&t| self.vectors[t as usize].as_ref()).collect();
        let first = known.first()?;
        let mut c = vec![0.0; first.len()];
        for v in &known {
            for (a, b) in c.iter_mut().zip(v.iter()) {
                *a += b;
            }
        }
        let n = known.len() as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c.iter().any(|&x| x != 0.0).then_some(c)
    }

    /// Highest cosine of each token to any dimension centroid of `best`.
    fn similarity(&self, best: &SelectionMatrix) -> Vec<Option<f64>> {
        let centroids: Vec<Vec<f64>> = best.dims().iter().filter_map(|d| self.centroid(d)).collect();
        self.vectors
            .iter()
            .map(|v| {
                let v = v.as_ref()?;
                centroids
                    .iter()
                    .filter_map(|c| cosine(c, v).ok())
                    .max_by(f64::total_cmp)
            })
            .collect()
    }

    fn refine(&self, best: &SelectionMatrix, threshold: f64) -> Result<Vec<TokenId>> {
        let sim = self.similarity(best);
        let mut keep: Vec<TokenId> = (0..sim.len() as TokenId)
            .filter(|&t| sim[t as usize].is_some_and(|s| s > threshold) || best.is_active(t))
            .collect();
        keep.dedup();
        if keep.len() < best.k() {
            return Err(Error::RefinementCollapsed {
                size: keep.len(),
                k: best.k(),
            });
        }
        Ok(keep)
    }

    /// Grows `pool` to `min_len` tokens with the most similar remaining ones.
    fn top_up(&self, best: &SelectionMatrix, mut pool: Vec<TokenId>, min_len: usize) -> Vec<TokenId> {
        if pool.len() >= min_len {
            return pool;
        }
        let sim = self.similarity(best);
        let mut rest: Vec<TokenId> = (0..sim.len() as TokenId).filter(|t| pool.binary_search(t).is_err()).collect();
        rest.sort_by(|&a, &b| {
            let (sa, sb) = (sim[a as usize].unwrap_or(f64::NEG_INFINITY), sim[b as usize].unwrap_or(f64::NEG_INFINITY));
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        let need = min_len - pool.len();
        pool.extend(rest.into_iter().take(need));
        pool.sort_unstable();
        pool
    }
}

/// Tokens of `vocab` whose embedding has cosine above `threshold` with the
/// mean embedding of some dimension of `best`, plus all of `best`'s tokens.
pub fn refine_vocabulary(
    best: &SelectionMatrix,
    embeddings: &EmbeddingTable,
    vocab: &Vocabulary,
    threshold: f64,
) -> Result<Vec<TokenId>> {
    TokenVectors::new(vocab, embeddings).refine(best, threshold)
}

/// Resumable progress of one calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub k: usize,
    pub config: GAConfig,
    pub penalties: PenaltyConfig,
    pub completed_epochs: usize,
    /// Active-token count of the non-incumbent members of the next epoch.
    pub budget: usize,
    pub population: Population,
    pub log: BestSolutionLog,
}

impl CalibrationState {
    pub fn is_done(&self) -> bool {
        self.completed_epochs > 0 && self.log.epochs.last().is_some_and(|e| e.budget >= self.config.max_active_tokens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    /// Winner of the last epoch.
    pub interim: SelectionMatrix,
    pub interim_fitness: FitnessRecord,
    pub log: BestSolutionLog,
    /// Fitness computations that missed the cache.
    pub evaluations: usize,
}

pub struct Calibrator<'a> {
    corpus: &'a TimeBucketedCorpus,
    target: &'a TargetSeries,
    vectors: Option<TokenVectors>,
    cfg: GAConfig,
    pcfg: PenaltyConfig,
    k: usize,
}

impl<'a> Calibrator<'a> {
    /// Without embeddings the vocabulary is never narrowed.
    pub fn new(
        corpus: &'a TimeBucketedCorpus,
        target: &'a TargetSeries,
        embeddings: Option<&EmbeddingTable>,
        k: usize,
        cfg: GAConfig,
        pcfg: PenaltyConfig,
    ) -> Result<Self> {
        cfg.validate(k)?;
        pcfg.validate()?;
        if target.split.num_buckets() != corpus.num_buckets() {
            return Err(Error::InvalidSplit(format!(
                "target covers {} buckets, corpus has {}",
                target.split.num_buckets(),
                corpus.num_buckets()
            )));
        }
        if corpus.vocab().len() < cfg.max_active_tokens {
            return Err(Error::InvalidConfig(format!(
                "vocabulary of {} tokens cannot hold {} active tokens",
                corpus.vocab().len(),
                cfg.max_active_tokens
            )));
        }
        Ok(Self {
            corpus,
            target,
            vectors: embeddings.map(|e| TokenVectors::new(corpus.vocab(), e)),
            cfg,
            pcfg,
            k,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.seed ^ ((self.k as u64) << 48)
    }

    pub fn initial_state(&self) -> Result<CalibrationState> {
        let pool: Vec<TokenId> = (0..self.corpus.vocab().len() as TokenId).collect();
        let mut rng = substream(self.seed(), 1, 0, Stream::Init, 0);
        let members = init_population(&pool, pool.len(), self.k, self.cfg.population_size, &mut rng)?;
        Ok(CalibrationState {
            k: self.k,
            config: self.cfg.clone(),
            penalties: self.pcfg,
            completed_epochs: 0,
            budget: self.k,
            population: Population {
                members,
                epoch: 1,
                pool,
            },
            log: BestSolutionLog::default(),
        })
    }

    /// Runs the next epoch of `state` and prepares the population after it.
    ///
    /// The next population keeps the final members of this epoch, each grown
    /// by one token (or more, for members that shrank) from the refined pool.
    /// Growing rather than resampling lets the lineages that found part of the
    /// signal carry it forward; resampled members lose to the incumbent and
    /// die out within a few iterations. The epoch winner replaces one member.
    pub fn run_epoch(&self, state: &mut CalibrationState, eval: &mut Evaluator<'_>) -> Result<()> {
        if state.k != self.k || state.config != self.cfg || state.penalties != self.pcfg {
            return Err(Error::InvalidConfig("checkpoint was written with a different configuration".into()));
        }
        let epoch = state.completed_epochs + 1;
        let seed = self.seed();
        let mut pop = state.population.clone();
        let mut bests = Vec::with_capacity(self.cfg.iterations_per_epoch);
        for it in 0..self.cfg.iterations_per_epoch {
            let key = IterationKey {
                seed,
                epoch: epoch as u64,
                iteration: it as u64,
            };
            let (next, best) = run_iteration(&pop, eval, &self.cfg, key)?;
            pop.members = next;
            bests.push(best);
        }
        let winner = bests
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| {
                a.fitness
                    .objective_validation
                    .total_cmp(&b.fitness.objective_validation)
                    .then(i.cmp(j))
            })
            .map(|(_, b)| b.clone())
            .expect("at least one iteration");
        state.log.epochs.push(EpochWinner {
            epoch,
            budget: state.budget,
            vocab_size: pop.pool.len(),
            matrix: winner.matrix.clone(),
            fitness: winner.fitness,
        });
        state.log.iterations.extend(bests);
        state.completed_epochs = epoch;
        if state.budget >= self.cfg.max_active_tokens {
            state.population = pop;
            return Ok(());
        }

        let budget = state.budget + 1;
        let pool = match &self.vectors {
            Some(v) => {
                let refined = v.refine(&winner.matrix, self.cfg.similarity_threshold)?;
                v.top_up(&winner.matrix, refined, budget + 1)
            }
            None => pop.pool.clone(),
        };
        let next_epoch = epoch as u64 + 1;
        let mut members = pop
            .members
            .iter()
            .enumerate()
            .map(|(q, m)| {
                let mut rng = substream(seed, next_epoch, 0, Stream::Init, q as u64);
                grow_member(m, &pool, budget, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let slot = {
            use rand::Rng;
            substream(seed, next_epoch, 0, Stream::Incumbent, 0).gen_range(0..members.len())
        };
        members[slot] = winner.matrix;
        state.budget = budget;
        state.population = Population {
            members,
            epoch: epoch + 1,
            pool,
        };
        Ok(())
    }

    /// Runs the remaining epochs of `state`, calling `on_epoch` after each.
    pub fn run_from(
        &self,
        mut state: CalibrationState,
        mut on_epoch: impl FnMut(&CalibrationState) -> Result<()>,
    ) -> Result<CalibrationResult> {
        let mut eval = Evaluator::new(self.corpus, self.target, self.pcfg);
        while !state.is_done() {
            self.run_epoch(&mut state, &mut eval)?;
            on_epoch(&state)?;
        }
        let last = state.log.epochs.last().expect("finished calibration has epochs");
        Ok(CalibrationResult {
            interim: last.matrix.clone(),
            interim_fitness: last.fitness,
            log: state.log,
            evaluations: eval.computed(),
        })
    }

    pub fn run(&self) -> Result<CalibrationResult> {
        self.run_from(self.initial_state()?, |_| Ok(()))
    }
}

/// Epochs from `k` active tokens up to `cfg.max_active_tokens`.
pub fn run_calibration(
    corpus: &TimeBucketedCorpus,
    target: &TargetSeries,
    embeddings: Option<&EmbeddingTable>,
    k: usize,
    cfg: GAConfig,
    pcfg: PenaltyConfig,
) -> Result<CalibrationResult> {
    Calibrator::new(corpus, target, embeddings, k, cfg, pcfg)?.run()
}
