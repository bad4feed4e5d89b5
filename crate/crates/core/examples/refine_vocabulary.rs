//! Embedding-based vocabulary refinement around a matrix: which tokens
//! survive at several similarity thresholds.
//!
//!     cargo run --release --example refine_vocabulary

use optidx::evolve::refine_vocabulary;
use optidx::synthlab::{generate_planted_instance, SynthParams};

fn main() -> optidx::Result<()> {
    let inst = generate_planted_instance(&SynthParams::default())?;
    let vocab = inst.corpus.vocab();
    // one planted token per dimension stands in for a partial solution
    let seed_matrix = inst.planted.retain_slots(|i| [0, 2, 8].contains(&i));
    println!("planted: {:?}", inst.planted.to_record(vocab).dims);
    println!("start:   {:?}", seed_matrix.to_record(vocab).dims);

    let planted = inst.planted.active_tokens();
    for thr in [0.0, 0.2, 0.4, 0.6] {
        let pool = refine_vocabulary(&seed_matrix, &inst.embeddings, vocab, thr)?;
        let kept = planted.iter().filter(|t| pool.binary_search(t).is_ok()).count();
        println!(
            "threshold {thr:.1}: {:>3} of {} tokens kept, planted {kept}/{}",
            pool.len(),
            vocab.len(),
            planted.len()
        );
    }
    Ok(())
}
