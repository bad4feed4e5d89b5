//! Exhaustive search on a vocabulary small enough to enumerate, next to the
//! genetic calibration on the same instance.
//!
//!     cargo run --release --example brute_force_oracle -- [seed]

use optidx::evolve::{run_calibration, GAConfig};
use optidx::synthlab::{brute_force_optimum, enumeration_size, generate_planted_instance, SynthParams};
use optidx::PenaltyConfig;

fn main() -> optidx::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let params = SynthParams {
        vocab_size: 10,
        k: 2,
        active_per_dim: vec![1, 2],
        buckets: 40,
        train_buckets: 20,
        validation_buckets: 10,
        docs_per_bucket: 120,
        planted_ngram: false,
        distractor_ngrams: 1,
        seed,
        ..SynthParams::default()
    };
    let inst = generate_planted_instance(&params)?;
    let vocab = inst.corpus.vocab();
    let pcfg = PenaltyConfig::default();
    let max_active = 4;

    println!(
        "V={} K=2 up to {max_active} active: {} matrices",
        vocab.len(),
        enumeration_size(vocab.len(), 2, max_active)
    );
    let (exact, f) = brute_force_optimum(&inst.corpus, &inst.target, &pcfg, 2, max_active)?;
    println!("oracle:  {:?}  train objective {:.3e}", exact.to_record(vocab).dims, f.objective_train);

    let cfg = GAConfig {
        population_size: 40,
        iterations_per_epoch: 30,
        max_active_tokens: max_active,
        seed,
        ..GAConfig::default()
    };
    // no embeddings, so the GA searches the same space as the oracle
    let res = run_calibration(&inst.corpus, &inst.target, None, 2, cfg, pcfg)?;
    let best = res
        .log
        .epochs
        .iter()
        .min_by(|a, b| a.fitness.objective_train.total_cmp(&b.fitness.objective_train))
        .expect("at least one epoch");
    println!(
        "GA:      {:?}  train objective {:.3e}  ({} evaluations)",
        best.matrix.to_record(vocab).dims,
        best.fitness.objective_train,
        res.evaluations
    );
    println!("planted: {:?}", inst.planted.to_record(vocab).dims);
    Ok(())
}
