//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Built without the libtest harness so the lines always print.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cha::autograd::gradcheck::check_ops;
use cha::autograd::Tensor;
use cha::dataset::{build_vocabulary, generate_scene};
use cha::decoder::{
    attention_scores, attention_weights, beam_decode, beam_search, context_vector, greedy_decode, greedy_search,
    init_state, sequence_log_prob, Decoder, DecoderDims, DecoderParams, Features, LstmInput, SearchError, StepModel,
};
use cha::features::{expand_patch, BoundingBox, FeatureStack};
use cha::metrics::{bleu, cider, rouge_l, tokenize, Corpus};
use cha::train::gradcheck::check_decoder;
use cha::train::{
    caption_example, load_checkpoint, prepare_examples, save_checkpoint, train, write_log_csv, TrainConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_stack(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureStack {
    let data = (0..(2 * n + 1) * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    FeatureStack::from_tensor(&Tensor::matrix(2 * n + 1, d, data).unwrap()).unwrap()
}

fn random_dims(rng: &mut ChaCha8Rng, d: usize) -> DecoderDims {
    DecoderDims {
        feature: d,
        hidden: rng.gen_range(2..9),
        attention: rng.gen_range(2..9),
        output: rng.gen_range(2..9),
        vocab: rng.gen_range(5..12),
        lstm_input: if rng.gen_bool(0.5) {
            LstmInput::ContextPlusEmbedding
        } else {
            LstmInput::ContextOnly
        },
    }
}

/// Random decoder with weights stretched so its distributions are peaked
/// and its decodes varied.
fn sharp_params(dims: DecoderDims, rng: &mut ChaCha8Rng, gain: f64) -> DecoderParams {
    let mut p = DecoderParams::init(dims, rng);
    for a in p.arrays_mut() {
        a.data_mut().iter_mut().for_each(|x| *x *= gain);
    }
    p
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut outcomes = check_ops(6, 2024).map_err(|e| e.to_string())?;
    outcomes.extend(check_decoder(6, 2024).map_err(|e| e.to_string())?);
    let secs = start.elapsed().as_secs_f64();
    let cases: usize = outcomes.iter().map(|o| o.trials).sum();
    let worst = outcomes.iter().map(|o| o.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name.clone()).collect();
    ensure(
        failed.is_empty() && cases >= 100 && secs < 30.0,
        format!(
            "{cases} cases over {} checks, worst relative error {worst:.2e} (< 1e-4), {secs:.2}s (< 30s){}",
            outcomes.len(),
            if failed.is_empty() { String::new() } else { format!(", failed: {failed:?}") }
        ),
    )
}

fn attention_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut steps, mut worst_sum, mut worst_bound, mut negative) = (0, 0.0f64, f64::NEG_INFINITY, false);
    while steps < 1000 {
        let d = rng.gen_range(2..7);
        let n = rng.gen_range(1..6);
        let dims = random_dims(&mut rng, d);
        let params = sharp_params(dims, &mut rng, 2.0);
        let stack = random_stack(&mut rng, n, d);
        let f = stack.to_tensor();
        let mut dec = Decoder::new(&params, Features::Stack(&stack)).map_err(|e| e.to_string())?;
        let mut state = dec.init_state().map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let out = dec.step(&state).map_err(|e| e.to_string())?;
            let alpha = &out.state.alpha;
            negative |= alpha.iter().any(|&a| a < 0.0);
            worst_sum = worst_sum.max((alpha.iter().sum::<f64>() - 1.0).abs());
            for j in 0..d {
                let col: Vec<f64> = (0..f.rows()).map(|i| f.at(i, j)).collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let c = out.state.context[j];
                worst_bound = worst_bound.max(lo - c).max(c - hi);
            }
            state = out.state;
            state.prev_token = rng.gen_range(0..dims.vocab);
            steps += 1;
        }
    }

    // Permuting the slots permutes the weights and leaves the context alone.
    let mut worst_perm: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.gen_range(2..7);
        let n = rng.gen_range(1..6);
        let dims = random_dims(&mut rng, d);
        let params = sharp_params(dims, &mut rng, 2.0);
        let stack = random_stack(&mut rng, n, d);
        let f = stack.to_tensor();
        let mut perm: Vec<usize> = (0..f.rows()).collect();
        perm.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| f.row_slice(i).to_vec()).collect();
        let permuted = FeatureStack::from_tensor(&Tensor::from_rows(&rows).unwrap()).unwrap();
        let h: Vec<f64> = (0..dims.hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let run = |s: &FeatureStack| -> Result<(Vec<f64>, Vec<f64>), String> {
            let alpha = attention_weights(&attention_scores(s, &h, &e, &params).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let c = context_vector(s, &alpha).map_err(|e| e.to_string())?;
            Ok((alpha, c))
        };
        let (a0, c0) = run(&stack)?;
        let (a1, c1) = run(&permuted)?;
        for (k, &i) in perm.iter().enumerate() {
            worst_perm = worst_perm.max((a1[k] - a0[i]).abs());
        }
        for (x, y) in c0.iter().zip(&c1) {
            worst_perm = worst_perm.max((x - y).abs());
        }
    }
    ensure(
        !negative && worst_sum < 1e-9 && worst_bound <= 1e-12 && worst_perm <= 1e-12,
        format!(
            "{steps} steps: alpha >= 0 {}, max |sum-1| {worst_sum:.1e}, max bound excess {:.1e}; \
             200 slot permutations: max deviation {worst_perm:.1e}",
            !negative,
            worst_bound.max(0.0)
        ),
    )
}

fn initial_state_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_c0: f64 = 0.0;
    let mut sizes = HashSet::new();
    let mut uniform = true;
    for _ in 0..100 {
        let d = rng.gen_range(1..9);
        let stack = random_stack(&mut rng, 5, d);
        let state = init_state(&stack, 4).map_err(|e| e.to_string())?;
        sizes.insert(state.alpha.len());
        uniform &= state.alpha.iter().all(|&a| a == 1.0 / 11.0);
        let f = stack.to_tensor();
        for j in 0..d {
            let mean = (0..11).map(|i| f.at(i, j)).sum::<f64>() / 11.0;
            worst_c0 = worst_c0.max((state.context[j] - mean).abs());
        }
    }
    let mut worst_shift: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..15);
        let s: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let c = rng.gen_range(-50.0..50.0);
        let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
        let (a, b) = (attention_weights(&s).unwrap(), attention_weights(&shifted).unwrap());
        worst_shift = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst_shift, f64::max);
    }
    ensure(
        sizes == HashSet::from([11]) && uniform && worst_c0 <= 1e-12 && worst_shift <= 1e-12,
        format!(
            "n=5: alpha_0 size {sizes:?}, uniform 1/11 {uniform}, max |C_0 - row mean| {worst_c0:.1e}; \
             softmax shift max deviation {worst_shift:.1e}"
        ),
    )
}

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

fn decoding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut identical, mut distinct) = (0, HashSet::new());
    for _ in 0..100 {
        let d = rng.gen_range(2..7);
        let n = rng.gen_range(1..6);
        let dims = random_dims(&mut rng, d);
        let params = sharp_params(dims, &mut rng, 3.0);
        let stack = random_stack(&mut rng, n, d);
        let f = Features::Stack(&stack);
        let g = greedy_decode(&params, f, 12).map_err(|e| e.to_string())?;
        let b = beam_decode(&params, f, 1, 12).map_err(|e| e.to_string())?;
        identical += usize::from(g == b);
        distinct.insert(g);
    }

    // Greedy takes `a` (0.6) into a flat continuation; `b <end>` has the
    // best per-token log-probability.
    let mut table = Table(HashMap::from([
        (vec![], [0.0, 0.6, 0.4]),
        (vec![1], [0.30, 0.35, 0.35]),
        (vec![2], [0.90, 0.05, 0.05]),
        (vec![1, 1], [0.98, 0.01, 0.01]),
    ]));
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut frontier = vec![Vec::new()];
    for len in 1..=3 {
        let mut next = Vec::new();
        for prefix in &frontier {
            for tok in 0..3 {
                let mut s: Vec<usize> = prefix.clone();
                s.push(tok);
                if tok == 0 || len == 3 {
                    candidates.push(s);
                } else {
                    next.push(s);
                }
            }
        }
        frontier = next;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in candidates {
        let score = sequence_log_prob(&mut table, &s).unwrap() / s.len() as f64;
        let better = match &best {
            None => true,
            Some((b, bs)) => score > *b || (score == *b && s < *bs),
        };
        if better {
            best = Some((score, s));
        }
    }
    let best = best.unwrap().1;
    let beam = beam_search(&mut table, 2, 3).map_err(|e| e.to_string())?.tokens;
    let greedy = greedy_search(&mut table, 3).map_err(|e| e.to_string())?.tokens;
    ensure(
        identical == 100 && beam == best && greedy != best,
        format!(
            "beam 1 == greedy on {identical}/100 random models ({} distinct captions); \
             |V|=3 case: brute force {best:?}, beam 2 {beam:?}, greedy {greedy:?}",
            distinct.len()
        ),
    )
}

/// Direct-summation CIDEr: explicit gram lists, document frequencies over
/// image reference sets, unit-normalized TF-IDF dot products.
fn brute_force_cider(cands: &[String], refs: &[Vec<String>]) -> f64 {
    let grams = |s: &str, n: usize| -> Vec<String> {
        let t = tokenize(s);
        if t.len() < n {
            return Vec::new();
        }
        (0..=t.len() - n).map(|i| t[i..i + n].join(" ")).collect()
    };
    let big_n = cands.len() as f64;
    let mut total = 0.0;
    for (i, cand) in cands.iter().enumerate() {
        let mut per_n = 0.0;
        for n in 1..=4 {
            let idf = |g: &String| -> f64 {
                let df = refs.iter().filter(|rs| rs.iter().any(|r| grams(r, n).contains(g))).count();
                big_n.ln() - (df.max(1) as f64).ln()
            };
            let vector = |s: &str| -> Vec<(String, f64)> {
                let gs = grams(s, n);
                let mut uniq: Vec<String> = gs.clone();
                uniq.sort();
                uniq.dedup();
                uniq.into_iter()
                    .map(|g| {
                        let tf = gs.iter().filter(|x| **x == g).count() as f64;
                        let w = tf * idf(&g);
                        (g, w)
                    })
                    .collect()
            };
            let c = vector(cand);
            let mut sum = 0.0;
            for r in &refs[i] {
                let rv = vector(r);
                let dot: f64 = c
                    .iter()
                    .map(|(g, w)| w * rv.iter().find(|(h, _)| h == g).map_or(0.0, |x| x.1))
                    .sum();
                let nc = c.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
                let nr = rv.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
                sum += if nc > 0.0 && nr > 0.0 { dot / (nc * nr) } else { 0.0 };
            }
            per_n += sum / refs[i].len() as f64;
        }
        total += 10.0 * per_n / 4.0;
    }
    total / big_n
}

fn metric_oracles() -> Outcome {
    let one = |c: &str, r: &str| Corpus::from_text(&[c], &[vec![r]]).unwrap();
    let b_clip = bleu(&one("the the the", "the cat"), 1)[0];
    let b_bp = bleu(&one("a b", "a b c d"), 1)[0];
    let r = rouge_l(&one("a b c d", "a c d"));
    // (1 + β²)·P·R / (R + β²·P) with β = 1.2, P = 3/4, R = 1.
    let r_hand = 2.44 * 0.75 / (1.0 + 1.44 * 0.75);

    let words = ["a", "the", "pond", "tree", "road", "near", "on", "two", "field", "desert"];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        let len = rng.gen_range(1..8);
        (0..len).map(|_| *words.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
    };
    let mut worst_cider: f64 = 0.0;
    for _ in 0..20 {
        let images = rng.gen_range(2..6);
        let refs: Vec<Vec<String>> = (0..images)
            .map(|_| (0..rng.gen_range(1..6)).map(|_| sentence(&mut rng)).collect())
            .collect();
        let cands: Vec<String> = (0..images).map(|_| sentence(&mut rng)).collect();
        let fast = cider(&Corpus::from_text(&cands, &refs).map_err(|e| e.to_string())?);
        worst_cider = worst_cider.max((fast - brute_force_cider(&cands, &refs)).abs());
    }

    let refs: Vec<Vec<String>> = (0..6)
        .map(|i| {
            let s = generate_scene(3, i);
            s.captions.to_vec()
        })
        .collect();
    let copies: Vec<String> = refs.iter().map(|r| r[0].clone()).collect();
    let identical = bleu(&Corpus::from_text(&copies, &refs).map_err(|e| e.to_string())?, 4);

    ensure(
        (b_clip - 1.0 / 3.0).abs() < 1e-5
            && (b_bp - (-1.0f64).exp()).abs() < 1e-5
            && (r - r_hand).abs() < 1e-4
            && worst_cider <= 1e-9
            && identical.iter().all(|&b| b == 1.0),
        format!(
            "B-1 clip {b_clip:.6} (1/3), B-1 brevity {b_bp:.6} (e^-1), ROUGE-L {r:.6} (hand {r_hand:.6}), \
             CIDEr vs brute force max diff {worst_cider:.1e} on 20 corpora, identical B-1..4 {identical:?}"
        ),
    )
}

fn learnability() -> Outcome {
    let samples: Vec<_> = (0..8).map(|i| generate_scene(7, i)).collect();
    let vocab = build_vocabulary(&samples);
    let config = TrainConfig::memorization();
    let examples = prepare_examples(&samples, &vocab, &config).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let outcome = train(&config, &vocab, &examples, &[], |_| {}).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let params = &outcome.last.params;
    let final_loss = outcome.log.last().map_or(f64::NAN, |r| r.train_loss);

    let mut exact = 0;
    let mut beam_exact = 0;
    let mut candidates = Vec::new();
    for (s, e) in samples.iter().zip(&examples) {
        let gold = vocab.encode(&s.captions[0]);
        let g = greedy_decode(params, Features::Raw(&e.features), config.max_len).map_err(|e| e.to_string())?;
        let b = beam_decode(params, Features::Raw(&e.features), config.beam, config.max_len)
            .map_err(|e| e.to_string())?;
        exact += usize::from(g == gold);
        beam_exact += usize::from(b == gold);
        candidates.push(vocab.decode(&g));
    }
    let refs: Vec<Vec<String>> = samples.iter().map(|s| s.captions.to_vec()).collect();
    let b4 = bleu(&Corpus::from_text(&candidates, &refs).map_err(|e| e.to_string())?, 4)[3];
    ensure(
        final_loss < 0.05 && exact >= 7 && b4 >= 0.9 && secs < 300.0,
        format!(
            "8 scenes, {} epochs, lr {:?}, k {:?}, n {}: final loss {final_loss:.5} (< 0.05), greedy exact {exact}/8 \
             (>= 7), beam {} exact {beam_exact}/8, train B-4 {b4:.4} (>= 0.9), {secs:.1}s (< 300s)",
            config.epochs, config.lr, config.k, config.n, config.beam
        ),
    )
}

fn determinism_and_persistence() -> Outcome {
    let samples: Vec<_> = (0..12).map(|i| generate_scene(21, i)).collect();
    let vocab = build_vocabulary(&samples[..9]);
    let config = TrainConfig {
        d: 12,
        hidden: 10,
        attention: 6,
        output: 10,
        epochs: 3,
        seed: 21,
        ..TrainConfig::default()
    };
    let examples = prepare_examples(&samples, &vocab, &config).map_err(|e| e.to_string())?;
    let (train_set, val_set) = examples.split_at(9);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    let mut outcomes = Vec::new();
    for run in 0..2 {
        let out = train(&config, &vocab, train_set, val_set, |_| {}).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.csv"));
        write_log_csv(&path, &out.log).map_err(|e| e.to_string())?;
        csv.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        outcomes.push(out);
    }
    let same_csv = csv[0] == csv[1];

    let ckpt_path = dir.path().join("model.chac");
    save_checkpoint(&outcomes[0].best, &ckpt_path).map_err(|e| e.to_string())?;
    let loaded = load_checkpoint(&ckpt_path).map_err(|e| e.to_string())?;
    let mut same_decodes = 0;
    for e in &examples {
        for beam in [1, 2, 3] {
            let a = caption_example(&outcomes[0].best, e, beam).map_err(|e| e.to_string())?;
            let b = caption_example(&loaded, e, beam).map_err(|e| e.to_string())?;
            same_decodes += usize::from(a.as_bytes() == b.as_bytes());
        }
    }
    let total = examples.len() * 3;
    ensure(
        same_csv && same_decodes == total && loaded == outcomes[0].best,
        format!(
            "two seeded runs: CSV logs identical {same_csv} ({} bytes); checkpoint round trip: state identical {}, \
             decodes identical {same_decodes}/{total}",
            csv[0].len(),
            loaded == outcomes[0].best
        ),
    )
}

fn patch_geometry() -> Outcome {
    let interior = expand_patch(&BoundingBox::new(128.0, 128.0, 40.0, 20.0).unwrap(), 2.0, 256, 256)
        .map_err(|e| e.to_string())?;
    let corner = expand_patch(&BoundingBox::new(10.0, 10.0, 40.0, 40.0).unwrap(), 2.0, 256, 256)
        .map_err(|e| e.to_string())?;
    let as_tuple = |b: BoundingBox| (b.cx, b.cy, b.w, b.h);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity = 0;
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(16..512u32), rng.gen_range(16..512u32));
        let bw = rng.gen_range(1.0..w as f64 / 2.0);
        let bh = rng.gen_range(1.0..h as f64 / 2.0);
        let cx = rng.gen_range(bw / 2.0..w as f64 - bw / 2.0);
        let cy = rng.gen_range(bh / 2.0..h as f64 - bh / 2.0);
        let b = BoundingBox::new(cx, cy, bw, bh).unwrap();
        identity += usize::from(expand_patch(&b, 1.0, w, h).map_err(|e| e.to_string())? == b);
    }
    ensure(
        as_tuple(interior) == (128.0, 128.0, 80.0, 40.0) && as_tuple(corner) == (25.0, 25.0, 50.0, 50.0) && identity == 1000,
        format!(
            "interior {:?} (128,128,80,40), corner {:?} (25,25,50,50), k=1 identity {identity}/1000",
            as_tuple(interior),
            as_tuple(corner)
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient suite", gradient_suite),
        ("attention invariants", attention_invariants),
        ("initial state and softmax fidelity", initial_state_fidelity),
        ("decoding", decoding),
        ("metric oracles", metric_oracles),
        ("learnability", learnability),
        ("determinism and persistence", determinism_and_persistence),
        ("patch geometry", patch_geometry),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {name}: {detail}");
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
