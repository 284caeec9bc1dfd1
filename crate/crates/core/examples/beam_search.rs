//! Greedy versus length-normalized beam search.
//!
//! First on a three-word table model built so that greedy's locally best
//! first word leads to a worse sentence, where beam 2 recovers the best one;
//! then on seeded random decoders, where beam 1 reproduces greedy exactly.
//!
//! ```text
//! cargo run --release --example beam_search
//! ```

use std::collections::HashMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cha::dataset::{build_vocabulary, generate_scene};
use cha::decoder::{
    beam_decode, beam_search, greedy_decode, greedy_search, sequence_log_prob, Decoder, DecoderParams, Features,
    SearchError, StepModel, END,
};
use cha::features::RawFeatures;
use cha::train::TrainConfig;

/// Next-word distributions over `{<end>, a, b}` looked up by prefix.
struct Table(HashMap<Vec<usize>, [f64; 3]>);

impl StepModel for Table {
    type State = Vec<usize>;
    type Error = SearchError;

    fn end_token(&self) -> usize {
        0
    }
    fn initial(&mut self) -> Result<Vec<usize>, SearchError> {
        Ok(Vec::new())
    }
    fn log_probs(&mut self, state: &Vec<usize>) -> Result<(Vec<f64>, Vec<usize>), SearchError> {
        let p = self.0.get(state).copied().unwrap_or([1.0 / 3.0; 3]);
        Ok((p.iter().map(|x| x.ln()).collect(), state.clone()))
    }
    fn advance(&self, mut state: Vec<usize>, token: usize) -> Vec<usize> {
        state.push(token);
        state
    }
}

fn show(tokens: &[usize]) -> String {
    tokens.iter().map(|&t| ["<end>", "a", "b"][t]).collect::<Vec<_>>().join(" ")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut table = Table(HashMap::from([
        (vec![], [0.0, 0.6, 0.4]),
        (vec![1], [0.30, 0.35, 0.35]),
        (vec![2], [0.90, 0.05, 0.05]),
        (vec![1, 1], [0.98, 0.01, 0.01]),
    ]));
    let greedy = greedy_search(&mut table, 3)?;
    let beam = beam_search(&mut table, 2, 3)?;
    println!("table model:");
    println!("  greedy  {:>8.4}  {}", greedy.normalized(), show(&greedy.tokens));
    println!("  beam 2  {:>8.4}  {}", beam.normalized(), show(&beam.tokens));

    let samples: Vec<_> = (0..4).map(|i| generate_scene(5, i)).collect();
    let vocab = build_vocabulary(&samples);
    let config = TrainConfig {
        d: 8,
        hidden: 8,
        attention: 8,
        output: 8,
        max_len: 8,
        ..TrainConfig::default()
    };
    for (seed, s) in samples.iter().enumerate() {
        let params = DecoderParams::init(config.dims(vocab.len()), &mut ChaCha8Rng::seed_from_u64(seed as u64));
        let raw = RawFeatures::extract(&s.raster, &s.scene.boxes(), config.n, config.k)?;
        let features = Features::Raw(&raw);
        println!("random decoder {seed}, scene {}:", s.image_id);
        let greedy = greedy_decode(&params, features, config.max_len)?;
        for (label, tokens) in [
            ("greedy", greedy.clone()),
            ("beam 1", beam_decode(&params, features, 1, config.max_len)?),
            ("beam 3", beam_decode(&params, features, 3, config.max_len)?),
        ] {
            // Score the emitted sequence including its closing <end>, if any.
            let mut emitted = tokens.clone();
            if emitted.len() < config.max_len {
                emitted.push(END);
            }
            let lp = sequence_log_prob(&mut Decoder::new(&params, features)?, &emitted)?;
            println!("  {label:<7} {:>8.4}  {}", lp / emitted.len() as f64, vocab.decode(&tokens));
        }
    }
    Ok(())
}
