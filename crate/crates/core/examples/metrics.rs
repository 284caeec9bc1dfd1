//! Caption metrics on hand-checkable cases, then a small corpus scored into
//! the B-1 B-2 B-3 B-4 C R table.
//!
//! ```text
//! cargo run --release --example metrics
//! ```

use cha::metrics::{bleu, cider, rouge_l, Corpus, EvalReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let one = |c: &str, r: &str| Corpus::from_text(&[c], &[vec![r]]);
    println!("B-1 'the the the' vs 'the cat'   = {:.6} (clipped 1/3)", bleu(&one("the the the", "the cat")?, 1)[0]);
    println!("B-1 'a b' vs 'a b c d'           = {:.6} (brevity e^-1)", bleu(&one("a b", "a b c d")?, 1)[0]);
    println!("ROUGE-L 'a b c d' vs 'a c d'     = {:.6}", rouge_l(&one("a b c d", "a c d")?));

    let refs = vec![
        vec!["a building is near a pond", "there is one building in the scene"],
        vec!["two trees on a grassland", "there are two trees in the scene"],
        vec!["a road crosses the desert", "a single road on a desert"],
    ];
    let candidates = ["a building is near a pond", "there are two trees", "a single road on a grassland"];
    let corpus = Corpus::from_text(&candidates, &refs)?;
    println!("\ncorpus CIDEr = {:.4}", cider(&corpus));
    let ids = ["img00000", "img00001", "img00002"];
    let report = EvalReport::compute("demo", &ids, &candidates, &refs)?;
    print!("{}", report.table());
    Ok(())
}
