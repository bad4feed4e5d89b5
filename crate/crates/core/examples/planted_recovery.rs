//! Plants a three-dimensional matrix in a synthetic corpus, runs the full
//! calibration plus pruning, and checks whether the planted matrix comes back.
//!
//!     cargo run --release --example planted_recovery -- [seed] [K]

use std::time::Instant;

use optidx::evolve::{prune, run_calibration, GAConfig};
use optidx::synthlab::{generate_planted_instance, SynthParams};
use optidx::PenaltyConfig;

fn main() -> optidx::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let k: usize = args.next().map_or(3, |s| s.parse().expect("K"));

    let inst = generate_planted_instance(&SynthParams {
        seed,
        ..SynthParams::default()
    })?;
    let vocab = inst.corpus.vocab();
    println!("planted: {:?}", inst.planted.to_record(vocab).dims);

    let cfg = GAConfig {
        population_size: 150,
        iterations_per_epoch: 150,
        max_active_tokens: 12,
        seed,
        ..GAConfig::default()
    };
    let pcfg = PenaltyConfig::default();
    let start = Instant::now();
    let res = run_calibration(&inst.corpus, &inst.target, Some(&inst.embeddings), k, cfg, pcfg)?;
    for e in &res.log.epochs {
        println!(
            "epoch {:>2}  active {:>2}  pool {:>3}  rmse x100 train {:6.2} val {:6.2}",
            e.epoch,
            e.matrix.active_count(),
            e.vocab_size,
            100.0 * e.fitness.rmse_train,
            100.0 * e.fitness.rmse_validation
        );
        println!("          {:?}", e.matrix.to_record(vocab).dims);
    }
    let pruned = prune(&res.interim, &inst.corpus, &inst.target, &pcfg)?;
    println!("pruned over {} candidates: {:?}", pruned.candidates, pruned.matrix.to_record(vocab).dims);
    println!(
        "recovered: {}  test rmse: {:?}  evaluations: {}  time: {:.1?}",
        pruned.matrix.same_up_to_permutation(&inst.planted),
        pruned.fitness.rmse_test,
        res.evaluations,
        start.elapsed()
    );
    Ok(())
}
