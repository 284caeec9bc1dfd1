use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn dims(lstm_input: LstmInput) -> DecoderDims {
    DecoderDims {
        feature: 3,
        hidden: 4,
        attention: 5,
        output: 6,
        vocab: 8,
        lstm_input,
    }
}

fn stack(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureStack {
    let data = (0..(2 * n + 1) * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureStack::from_tensor(&Tensor::matrix(2 * n + 1, d, data).unwrap()).unwrap()
}

/// `out_b` saturates the hidden layer and `out_u` routes it all to `<end>`.
fn always_end(d: DecoderDims) -> DecoderParams {
    let mut p = DecoderParams::zeros(d);
    p.get_mut("out_b").unwrap().data_mut().fill(50.0);
    let u = p.get_mut("out_u").unwrap();
    for r in 0..d.output {
        u.data_mut()[r * d.vocab + END] = 100.0;
    }
    p
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn step_composes_the_component_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for mode in [LstmInput::ContextPlusEmbedding, LstmInput::ContextOnly] {
        let params = DecoderParams::init(dims(mode), &mut rng);
        let f = stack(&mut rng, 2, 3);
        let mut state = init_state(&f, 4).unwrap();
        for token in [START, 5, 6] {
            state.prev_token = token;
            let out = step(&state, Features::Stack(&f), &params).unwrap();

            let (h, c) = lstm_step(&state, &params).unwrap();
            let e = params.get("embedding").unwrap().row_slice(token).to_vec();
            let alpha = attention_weights(&attention_scores(&f, &h, &e, &params).unwrap()).unwrap();
            let context = context_vector(&f, &alpha).unwrap();
            let probs = word_distribution(&context, &h, &params).unwrap();

            assert!(close(&out.state.h, &h) && close(&out.state.c, &c));
            assert!(close(&out.state.alpha, &alpha) && close(&out.state.context, &context));
            assert!(close(&out.probs, &probs));
            let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
            assert!(close(&out.log_probs, &logs));
            state = out.state;
        }
    }
}

#[test]
fn session_matches_one_shot_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = DecoderParams::init(dims(LstmInput::ContextPlusEmbedding), &mut rng);
    let f = stack(&mut rng, 3, 3);
    let mut dec = Decoder::new(&params, Features::Stack(&f)).unwrap();
    let mut state = dec.init_state().unwrap();
    assert_eq!(state, init_state(&f, 4).unwrap());
    for token in [4, 7, 5] {
        let a = dec.step(&state).unwrap();
        let b = step(&state, Features::Stack(&f), &params).unwrap();
        assert_eq!(a, b);
        state = dec.advance(a.state, token);
    }
    assert_eq!(dec.feature_matrix(), &f.to_tensor());
}

#[test]
fn init_state_is_uniform_with_mean_context() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = stack(&mut rng, 5, 4);
    let s = init_state(&f, 6).unwrap();
    assert_eq!(s.alpha, vec![1.0 / 11.0; 11]);
    let t = f.to_tensor();
    for j in 0..4 {
        let mean = (0..11).map(|i| t.at(i, j)).sum::<f64>() / 11.0;
        assert!((s.context[j] - mean).abs() < 1e-12);
    }
    assert_eq!((s.h, s.c, s.prev_token), (vec![0.0; 6], vec![0.0; 6], START));
}

#[test]
fn certain_end_gives_an_empty_caption() {
    let d = dims(LstmInput::ContextPlusEmbedding);
    let params = always_end(d);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = stack(&mut rng, 2, 3);
    assert!(greedy_decode(&params, Features::Stack(&f), 10).unwrap().is_empty());
    assert!(beam_decode(&params, Features::Stack(&f), 2, 10).unwrap().is_empty());
}

#[test]
fn mismatched_feature_width_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = DecoderParams::init(dims(LstmInput::ContextOnly), &mut rng);
    let f = stack(&mut rng, 2, 5);
    assert!(Decoder::new(&params, Features::Stack(&f)).is_err());
    let state = init_state(&f, 4).unwrap();
    assert!(matches!(lstm_step(&state, &params), Err(DecoderError::Dim { what: "context", .. })));
}

#[test]
fn attention_trace_records_every_decoding_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = DecoderParams::init(dims(LstmInput::ContextPlusEmbedding), &mut rng);
    let f = stack(&mut rng, 2, 3);
    let vocab = Vocabulary::from_words(["a", "b", "c", "d"].map(String::from));
    let features = Features::Stack(&f);

    let finished = attention_trace(&params, features, &[4, 5], 6, &vocab).unwrap();
    assert_eq!(finished.len(), 3);
    assert_eq!(finished[2].token, "<end>");
    let cut = attention_trace(&params, features, &[4, 5, 6], 3, &vocab).unwrap();
    assert_eq!(cut.len(), 3);
    assert_eq!(cut.iter().map(|r| r.token.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    for r in finished.iter().chain(&cut) {
        assert_eq!(r.alpha.len(), 5);
        assert_eq!(r.slot_labels, ["obj1", "obj2", "patch1", "patch2", "global"]);
        assert!((r.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    // The trace replays the same steps the decoder takes.
    let mut dec = Decoder::new(&params, features).unwrap();
    let s0 = dec.init_state().unwrap();
    assert_eq!(dec.step(&s0).unwrap().state.alpha, finished[0].alpha);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("att.json");
    write_attention_dump(&path, &finished).unwrap();
    let back: Vec<AttentionRecord> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, finished);
}
