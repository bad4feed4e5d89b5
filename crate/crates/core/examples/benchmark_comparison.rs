//! Per-window RMSE of a candidate against a benchmark matrix, and the
//! cumulative squared-error difference through time.
//!
//!     cargo run --release --example benchmark_comparison

use optidx::cli::{squared_error_paths, Dataset};
use optidx::synthlab::{generate_planted_instance, SynthParams};
use optidx::{score_matrix, PenaltyConfig};

fn main() -> optidx::Result<()> {
    let inst = generate_planted_instance(&SynthParams {
        noise_sigma: 0.3,
        ..SynthParams::default()
    })?;
    let pcfg = PenaltyConfig::default();
    // the benchmark misses half of the middle dimension
    let benchmark = inst.planted.retain_slots(|i| !(2..5).contains(&i));
    let candidate = inst.planted.clone();
    let data = Dataset {
        corpus: inst.corpus,
        target: inst.target,
        embeddings: None,
        ignored_tokens: 0,
    };
    let vocab = data.corpus.vocab();

    for (name, m) in [("benchmark", &benchmark), ("candidate", &candidate)] {
        let f = score_matrix(m, &data.corpus, &data.target, &pcfg)?;
        println!(
            "{name}: rmse x100 train {:.2} val {:.2} test {:.2}  {:?}",
            100.0 * f.rmse_train,
            100.0 * f.rmse_validation,
            100.0 * f.rmse_test.unwrap_or(f64::NAN),
            m.to_record(vocab).dims
        );
    }

    let labels = data.corpus.labels();
    let mut cum = 0.0;
    for (t, b, c) in squared_error_paths(&candidate, &benchmark, &data, &pcfg)? {
        cum += b - c;
        if t % 12 == 0 {
            println!("{}  cumulative benchmark minus candidate {cum:8.3}", labels[t]);
        }
    }
    Ok(())
}
