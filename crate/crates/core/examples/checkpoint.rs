//! Trains a small decoder for a few epochs, saves a checkpoint, reloads it
//! and confirms that captions decoded from both copies are identical.
//!
//! ```text
//! cargo run --release --example checkpoint
//! ```

use cha::dataset::{build_vocabulary, generate_scene};
use cha::train::{caption_example, load_checkpoint, prepare_examples, save_checkpoint, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: Vec<_> = (0..12).map(|i| generate_scene(11, i)).collect();
    let vocab = build_vocabulary(&samples[..10]);
    let config = TrainConfig {
        d: 16,
        hidden: 16,
        attention: 8,
        output: 16,
        epochs: 4,
        seed: 11,
        ..TrainConfig::default()
    };
    let examples = prepare_examples(&samples, &vocab, &config)?;
    let (train_set, val_set) = examples.split_at(10);
    let outcome = train(&config, &vocab, train_set, val_set, |row| {
        println!("epoch {}  loss {:.4}  val B-4 {:.4}", row.epoch, row.train_loss, row.val_bleu4.unwrap_or(0.0));
    })?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.chac");
    save_checkpoint(&outcome.best, &path)?;
    let bytes = std::fs::metadata(&path)?.len();
    let loaded = load_checkpoint(&path)?;
    println!("saved epoch {} ({bytes} bytes), reloaded: identical = {}", loaded.epoch, loaded == outcome.best);
    for e in val_set {
        let before = caption_example(&outcome.best, e, config.beam)?;
        let after = caption_example(&loaded, e, config.beam)?;
        println!("{}: {after:?} (same: {})", e.image_id, before == after);
    }
    Ok(())
}
