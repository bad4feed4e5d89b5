//! The EPU selection matrix applied to a hand-made corpus: which documents
//! it selects, the monthly attention index, and a content score.
//!
//!     cargo run --example epu_attention

use std::collections::HashMap;

use optidx::selection::{content_score, ContentWeights};
use optidx::{attention_series, build_corpus, is_selected, SelectionMatrix, Vocabulary};

fn main() -> optidx::Result<()> {
    let vocab = Vocabulary::new([
        "economic",
        "economy",
        "congress",
        "deficit",
        "federal",
        "reserve",
        "federal_reserve",
        "legislation",
        "regulation",
        "white",
        "house",
        "white_house",
        "uncertain",
        "uncertainty",
        "stock",
        "risk",
    ])?;
    let epu = SelectionMatrix::from_tokens(
        &vocab,
        &[
            vec!["economic", "economy"],
            vec!["congress", "deficit", "federal_reserve", "legislation", "regulation", "white_house"],
            vec!["uncertain", "uncertainty"],
        ],
    )?;
    println!("active tokens per dimension: {:?}", epu.dim_counts());

    let docs = [
        ("2008-09", vec!["economic", "congress", "uncertainty"]),
        ("2008-09", vec!["economic", "economic", "congress"]),
        ("2008-09", vec!["stock", "risk", "uncertain"]),
        ("2008-09", vec!["economy", "federal", "reserve", "federal_reserve", "uncertain"]),
        ("2008-10", vec!["economy", "white", "house", "white_house", "uncertainty", "uncertainty"]),
        ("2008-10", vec!["stock", "economy"]),
        ("2008-10", vec!["white", "house", "economic", "risk"]),
    ];
    let (corpus, _) = build_corpus(docs.iter().map(|(b, t)| (b.to_string(), t.clone())), vocab.clone())?;

    for (t, label) in corpus.labels().iter().enumerate() {
        for doc in corpus.bucket_docs(t) {
            let words: Vec<&str> = doc.counts().iter().map(|&(id, _)| vocab.token(id)).collect();
            println!("{label}  {:<5}  {}", is_selected(&epu, doc)?, words.join(" "));
        }
    }

    let att = attention_series(&epu, &corpus)?;
    for (label, a) in att.labels.iter().zip(&att.values) {
        println!("attention {label}: {a:.3}");
    }

    // "uncertainty" counts double, "risk" counts against
    let zeta = ContentWeights::new(HashMap::from([
        (vocab.id("uncertainty").unwrap(), 2.0),
        (vocab.id("uncertain").unwrap(), 1.0),
        (vocab.id("risk").unwrap(), -1.0),
    ]))?;
    for t in 0..corpus.num_buckets() {
        println!("content {}: {:.3}", corpus.labels()[t], content_score(&epu, &corpus, t, &zeta)?);
    }
    Ok(())
}
