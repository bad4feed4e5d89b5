//! The full optimize command as a library call: calibrate and prune for
//! each K, then pick K by the combined train+validation objective.
//!
//!     cargo run --release --example k_sweep

use optidx::cli::{optimize, Dataset, RunConfig};
use optidx::evolve::GAConfig;
use optidx::synthlab::{generate_planted_instance, SynthParams};

fn main() -> optidx::Result<()> {
    let synth = SynthParams {
        vocab_size: 60,
        active_per_dim: vec![1, 2, 1],
        docs_per_bucket: 400,
        distractor_ngrams: 8,
        ..SynthParams::default()
    };
    let inst = generate_planted_instance(&synth)?;
    let cfg = RunConfig {
        k: vec![1, 2, 3, 4],
        ga: GAConfig {
            population_size: 60,
            iterations_per_epoch: 40,
            max_active_tokens: 6,
            ..GAConfig::default()
        },
        ..RunConfig::default()
    };
    let planted = inst.planted.clone();
    let data = Dataset {
        corpus: inst.corpus,
        target: inst.target,
        embeddings: Some(inst.embeddings),
        ignored_tokens: 0,
    };
    let out = std::env::temp_dir().join("optidx_k_sweep");
    std::fs::create_dir_all(&out).expect("temp dir");

    let (entries, best) = optimize(&cfg, &data, &out, false)?;
    let vocab = data.corpus.vocab();
    println!("planted: {:?}", planted.to_record(vocab).dims);
    for (i, e) in entries.iter().enumerate() {
        println!(
            "K={} combined objective {:.4e}{}  {:?}",
            e.k,
            e.combined_objective,
            if i == best { "  <- chosen" } else { "" },
            e.matrix.to_record(vocab).dims
        );
    }
    Ok(())
}
