use std::cmp::Ordering;

use rayon::prelude::*;

use crate::corpus::TimeBucketedCorpus;
use crate::error::{Error, Result};
use crate::objective::{score_matrix, FitnessRecord, PenaltyConfig, TargetSeries};
use crate::selection::SelectionMatrix;

/// Largest active count whose deactivation subsets are enumerated.
pub const MAX_PRUNE_ACTIVE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub matrix: SelectionMatrix,
    pub fitness: FitnessRecord,
    /// Subsets considered, `2^A` including the empty one.
    pub candidates: usize,
}

fn better(a: &(SelectionMatrix, FitnessRecord), b: &(SelectionMatrix, FitnessRecord)) -> Ordering {
    a.1.objective_validation
        .total_cmp(&b.1.objective_validation)
        .then(a.0.active_count().cmp(&b.0.active_count()))
        .then(a.0.cmp(&b.0))
}

/// Best subset of `interim`'s active slots by validation objective; ties go
/// to fewer active tokens, then to the lexicographically smaller matrix.
pub fn prune(
    interim: &SelectionMatrix,
    corpus: &TimeBucketedCorpus,
    target: &TargetSeries,
    pcfg: &PenaltyConfig,
) -> Result<PruneOutcome> {
    let a = interim.active_count();
    if a > MAX_PRUNE_ACTIVE {
        return Err(Error::PruningSpaceTooLarge(a));
    }
    let candidates = 1usize << a;
    let best = (1..candidates as u64)
        .into_par_iter()
        .filter_map(|mask| {
            let m = interim.retain_slots(|i| mask >> i & 1 == 1);
            if m.is_degenerate() {
                return None;
            }
            Some(score_matrix(&m, corpus, target, pcfg).map(|f| (m, f)))
        })
        .try_reduce_with(|x, y| Ok(if better(&y, &x).is_lt() { y } else { x }))
        .ok_or(Error::DegenerateMatrix)??;
    Ok(PruneOutcome {
        matrix: best.0,
        fitness: best.1,
        candidates,
    })
}
