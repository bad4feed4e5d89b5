//! Pruning an over-full interim matrix. The planted matrix is padded with
//! distractor tokens and every deactivation subset is scored on validation.
//!
//!     cargo run --release --example prune_interim -- [extra tokens]

use optidx::evolve::prune;
use optidx::synthlab::{generate_planted_instance, SynthParams};
use optidx::{score_matrix, PenaltyConfig, SelectionMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> optidx::Result<()> {
    let extra: usize = std::env::args().nth(1).map_or(4, |s| s.parse().expect("extra token count"));
    let inst = generate_planted_instance(&SynthParams::default())?;
    let vocab = inst.corpus.vocab();
    let pcfg = PenaltyConfig::default();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut dims = inst.planted.dims().to_vec();
    let mut unused: Vec<_> = (0..vocab.len() as u32).filter(|&t| !inst.planted.is_active(t)).collect();
    unused.shuffle(&mut rng);
    for &t in unused.iter().take(extra) {
        let k = rng.gen_range(0..dims.len());
        dims[k].push(t);
    }
    let interim = SelectionMatrix::new(dims, vocab.len())?;
    let before = score_matrix(&interim, &inst.corpus, &inst.target, &pcfg)?;
    println!("interim ({} active): {:?}", interim.active_count(), interim.to_record(vocab).dims);
    println!("  validation rmse x100 {:.2}", 100.0 * before.rmse_validation);

    let out = prune(&interim, &inst.corpus, &inst.target, &pcfg)?;
    println!("pruned over {} candidates: {:?}", out.candidates, out.matrix.to_record(vocab).dims);
    println!("  validation rmse x100 {:.2}", 100.0 * out.fitness.rmse_validation);
    println!("  planted matrix kept: {}", out.matrix.same_up_to_permutation(&inst.planted));
    Ok(())
}
