//! Trains a small decoder on a few synthetic scenes, captions one of them
//! and prints the attention weights over the 2n+1 object / patch / global
//! slots at every step, with their sum.
//!
//! ```text
//! cargo run --release --example attention [out.json]
//! ```

use cha::dataset::{build_vocabulary, generate_scene};
use cha::decoder::{attention_trace, greedy_decode, write_attention_dump, Features};
use cha::train::{prepare_examples, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: Vec<_> = (0..4).map(|i| generate_scene(3, i)).collect();
    let vocab = build_vocabulary(&samples);
    let config = TrainConfig {
        d: 32,
        hidden: 32,
        attention: 16,
        output: 32,
        lr: 3e-3,
        epochs: 40,
        captions_per_image: 1,
        ..TrainConfig::default()
    };
    let examples = prepare_examples(&samples, &vocab, &config)?;
    let params = train(&config, &vocab, &examples, &[], |_| {})?.last.params;

    let sample = &samples[0];
    let features = Features::Raw(&examples[0].features);
    let tokens = greedy_decode(&params, features, config.max_len)?;
    let records = attention_trace(&params, features, &tokens, config.max_len, &vocab)?;

    println!("{}: {} objects, trained caption {:?}", sample.image_id, sample.scene.objects.len(), sample.captions[0]);
    println!("{:>3} {:<10} {}", "t", "word", records[0].slot_labels.join("   "));
    for r in &records {
        let weights: Vec<String> = r.alpha.iter().map(|a| format!("{a:.3}")).collect();
        let sum: f64 = r.alpha.iter().sum();
        println!("{:>3} {:<10} {}   sum {sum:.12}", r.t, r.token, weights.join("  "));
    }
    if let Some(path) = std::env::args().nth(1) {
        write_attention_dump(path.as_ref(), &records)?;
        println!("wrote {path}");
    }
    Ok(())
}
