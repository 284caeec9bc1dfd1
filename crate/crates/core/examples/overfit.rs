//! Memorizes the first caption of eight synthetic scenes (seed 7), then
//! reports the final training loss, greedy exact matches and train-split
//! BLEU-4. Takes about a minute and a half on one core.
//!
//! ```text
//! cargo run --release --example overfit [epochs]
//! ```

use std::time::Instant;

use cha::dataset::{build_vocabulary, generate_scene};
use cha::decoder::{greedy_decode, Features};
use cha::metrics::{bleu, Corpus};
use cha::train::{prepare_examples, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    let samples: Vec<_> = (0..8).map(|i| generate_scene(7, i)).collect();
    let vocab = build_vocabulary(&samples);
    let config = TrainConfig {
        epochs,
        ..TrainConfig::memorization()
    };
    let examples = prepare_examples(&samples, &vocab, &config)?;

    let start = Instant::now();
    let outcome = train(&config, &vocab, &examples, &[], |row| {
        if row.epoch % 25 == 0 || row.epoch == 1 {
            println!("epoch {:>4}  loss {:.5}", row.epoch, row.train_loss);
        }
    })?;
    let elapsed = start.elapsed();

    let params = &outcome.last.params;
    let mut exact = 0;
    let mut candidates = Vec::new();
    for (s, e) in samples.iter().zip(&examples) {
        let text = vocab.decode(&greedy_decode(params, Features::Raw(&e.features), config.max_len)?);
        let gold = vocab.decode(&vocab.encode(&s.captions[0]));
        exact += usize::from(text == gold);
        println!("{}: {text:<45} | {gold}", s.image_id);
        candidates.push(text);
    }
    let refs: Vec<Vec<String>> = samples.iter().map(|s| s.captions.to_vec()).collect();
    let b4 = bleu(&Corpus::from_text(&candidates, &refs)?, 4)[3];
    let final_loss = outcome.log.last().map_or(f64::NAN, |r| r.train_loss);
    println!("final loss {final_loss:.5}  exact {exact}/8  B-4 {b4:.4}  in {:.1}s", elapsed.as_secs_f64());
    Ok(())
}
