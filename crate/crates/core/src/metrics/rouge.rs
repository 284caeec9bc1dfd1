use super::Corpus;

/// Recall weight of the ROUGE-L F-measure.
pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_measure(candidate: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Per image: the best F-measure over its references.
pub fn rouge_l_per_image(corpus: &Corpus) -> Vec<f64> {
    corpus
        .candidates()
        .iter()
        .zip(corpus.references())
        .map(|(c, refs)| refs.iter().map(|r| f_measure(c, r)).fold(0.0, f64::max))
        .collect()
}

/// Mean of [`rouge_l_per_image`].
pub fn rouge_l(corpus: &Corpus) -> f64 {
    let per = rouge_l_per_image(corpus);
    per.iter().sum::<f64>() / per.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(c: &str, r: &[&str]) -> f64 {
        rouge_l(&Corpus::from_text(&[c], &[r.to_vec()]).unwrap())
    }

    #[test]
    fn hand_case() {
        // P = 3/4, R = 1.
        let expected = 2.44 * 0.75 / (1.0 + 1.44 * 0.75);
        assert!((one("a b c d", &["a c d"]) - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_and_disjoint() {
        assert_eq!(one("a b c", &["a b c"]), 1.0);
        assert_eq!(one("a b c", &["x y"]), 0.0);
        assert_eq!(one("", &["x y"]), 0.0);
    }

    #[test]
    fn best_reference_wins_and_duplicates_do_not_matter() {
        let a = one("a b c", &["a x c", "a b c"]);
        let b = one("a b c", &["a x c", "a b c", "a b c"]);
        assert_eq!(a, 1.0);
        assert_eq!(a, b);
    }
}
