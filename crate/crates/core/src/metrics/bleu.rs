use std::collections::HashMap;

use super::{ngram_counts, Corpus};

/// Reference length closest to `len`; the shorter one on ties.
fn closest_ref_len(len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

/// Clipped matches and total candidate `n`-grams for one image.
fn clipped(candidate: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Corpus BLEU-1..`n_max`.
///
/// Matches and candidate `n`-gram totals are pooled over the corpus before
/// dividing. No smoothing: an order with zero matches (or no candidate
/// `n`-grams at all) sets that order and every higher one to 0. The brevity
/// penalty compares the total candidate length `c` with the summed closest
/// reference lengths `r`: `BP = 1` if `c ≥ r`, else `exp(1 − r/c)`.
pub fn bleu(corpus: &Corpus, n_max: usize) -> Vec<f64> {
    let mut matched = vec![0usize; n_max];
    let mut total = vec![0usize; n_max];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refs) in corpus.candidates().iter().zip(corpus.references()) {
        c += cand.len();
        r += closest_ref_len(cand.len(), refs);
        for n in 1..=n_max {
            let (m, t) = clipped(cand, refs, n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }
    let bp = if c == 0 {
        0.0
    } else if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    let mut scores = Vec::with_capacity(n_max);
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 1..=n_max {
        if matched[n - 1] == 0 || total[n - 1] == 0 {
            zero = true;
        } else {
            log_sum += (matched[n - 1] as f64 / total[n - 1] as f64).ln();
        }
        scores.push(if zero || bp == 0.0 {
            0.0
        } else {
            bp * (log_sum / n as f64).exp()
        });
    }
    scores
}

/// BLEU-1..`n_max` of image `i` scored on its own.
pub fn sentence_bleu(corpus: &Corpus, i: usize, n_max: usize) -> Vec<f64> {
    bleu(&corpus.image(i), n_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(c: &[&str], r: &[&[&str]]) -> Corpus {
        let refs: Vec<Vec<&str>> = r.iter().map(|x| x.to_vec()).collect();
        Corpus::from_text(c, &refs).unwrap()
    }

    #[test]
    fn clipping_limits_repeated_words() {
        let b = bleu(&corpus(&["the the the"], &[&["the cat"]]), 1);
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_for_short_candidates() {
        let b = bleu(&corpus(&["a b"], &[&["a b c d"]]), 1);
        assert!((b[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn identical_captions_score_one() {
        let c = corpus(
            &["a red car on the road", "two trees near a pond"],
            &[&["x y", "a red car on the road"], &["two trees near a pond"]],
        );
        assert_eq!(bleu(&c, 4), vec![1.0; 4]);
    }

    #[test]
    fn closest_reference_prefers_shorter_on_ties() {
        let refs: Vec<Vec<String>> = ["a b", "a b c d"]
            .iter()
            .map(|s| super::super::tokenize(s))
            .collect();
        assert_eq!(closest_ref_len(3, &refs), 2);
    }

    #[test]
    fn zero_precision_zeroes_higher_orders() {
        let b = bleu(&corpus(&["a b c"], &[&["a c b"]]), 4);
        assert!(b[0] > 0.0);
        assert_eq!(&b[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        assert_eq!(bleu(&corpus(&[""], &[&["a b"]]), 4), vec![0.0; 4]);
    }
}
