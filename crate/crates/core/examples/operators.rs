//! The four variation operators on the matrices used to illustrate them:
//! token crossover, switch, n-gram and transform mutation.
//!
//!     cargo run --example operators

use optidx::evolve::{ngram_mutation, switch_mutation, token_crossover, transform_mutation};
use optidx::{SelectionMatrix, TokenId, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(vocab: &Vocabulary, label: &str, m: &SelectionMatrix) {
    let dims: Vec<String> = m.to_record(vocab).dims.iter().map(|d| d.join(" ")).collect();
    println!("  {label:<8} [{}]", dims.join(" | "));
}

fn main() -> optidx::Result<()> {
    let vocab = Vocabulary::new([
        "economic",
        "economy",
        "legislation",
        "congress",
        "white",
        "house",
        "white_house",
        "risk",
        "uncertainty",
        "financial",
        "crisis",
        "financial_crisis",
        "policy",
        "deficit",
    ])?;
    let m = |dims: &[&[&str]]| {
        let dims: Vec<Vec<&str>> = dims.iter().map(|d| d.to_vec()).collect();
        SelectionMatrix::from_tokens(&vocab, &dims)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    println!("token crossover");
    let p1 = m(&[&["economic"], &["legislation", "congress"], &["house", "risk"]])?;
    let p2 = m(&[&["economy"], &["financial_crisis", "congress"], &["house", "risk"]])?;
    let (c1, c2) = token_crossover(&p1, &p2, &mut rng);
    for (l, x) in [("parent 1", &p1), ("parent 2", &p2), ("child 1", &c1), ("child 2", &c2)] {
        show(&vocab, l, x);
    }

    println!("switch mutation");
    let p = m(&[&["economy"], &["economic", "congress"], &["house", "risk"]])?;
    show(&vocab, "parent", &p);
    show(&vocab, "child", &switch_mutation(&p, &mut rng));
    let sole = m(&[&["economy"], &["congress"], &["risk"]])?;
    show(&vocab, "sole", &switch_mutation(&sole, &mut rng));

    println!("n-gram mutation");
    let p = m(&[&["economy", "economic"], &["congress"], &["house", "risk"]])?;
    show(&vocab, "parent", &p);
    show(&vocab, "child", &ngram_mutation(&p, &vocab, &mut rng));

    println!("transform mutation");
    let p = m(&[&["economy", "economic"], &["congress"], &["white_house", "risk"]])?;
    let pool: Vec<TokenId> = (0..vocab.len() as TokenId).collect();
    show(&vocab, "parent", &p);
    for _ in 0..3 {
        show(&vocab, "child", &transform_mutation(&p, &pool, &mut rng));
    }
    Ok(())
}
