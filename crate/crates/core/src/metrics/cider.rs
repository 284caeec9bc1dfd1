use std::collections::{HashMap, HashSet};

use super::{ngram_counts, Corpus};

const CIDER_N: usize = 4;
const CIDER_SCALE: f64 = 10.0;

/// Document frequency of every reference `n`-gram: the number of images
/// whose reference set contains it.
fn document_frequency(corpus: &Corpus, n: usize) -> HashMap<&[String], usize> {
    let mut df = HashMap::new();
    for refs in corpus.references() {
        let seen: HashSet<&[String]> = refs.iter().flat_map(|r| ngram_counts(r, n).into_keys()).collect();
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    df
}

/// TF-IDF vector; grams missing from the references get the maximal weight
/// `ln N`, as if they had a document frequency of one.
fn tfidf<'a>(tokens: &'a [String], n: usize, df: &HashMap<&[String], usize>, log_n: f64) -> HashMap<&'a [String], f64> {
    ngram_counts(tokens, n)
        .into_iter()
        .map(|(g, tf)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, tf as f64 * (log_n - d.ln()))
        })
        .collect()
}

fn cosine(a: &HashMap<&[String], f64>, b: &HashMap<&[String], f64>) -> f64 {
    let norm = |v: &HashMap<&[String], f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().map(|(g, x)| x * b.get(g).copied().unwrap_or(0.0)).sum();
    dot / (na * nb)
}

/// Per image: ten times the mean over `n = 1..4` of the mean cosine
/// similarity between the candidate's and each reference's TF-IDF vectors.
/// IDF is `ln(N / df)` over the `N` images of the corpus.
pub fn cider_per_image(corpus: &Corpus) -> Vec<f64> {
    let log_n = (corpus.len() as f64).ln();
    let dfs: Vec<_> = (1..=CIDER_N).map(|n| document_frequency(corpus, n)).collect();
    corpus
        .candidates()
        .iter()
        .zip(corpus.references())
        .map(|(cand, refs)| {
            let mut total = 0.0;
            for (n, df) in (1..=CIDER_N).zip(&dfs) {
                let c = tfidf(cand, n, df, log_n);
                let sum: f64 = refs.iter().map(|r| cosine(&c, &tfidf(r, n, df, log_n))).sum();
                total += sum / refs.len() as f64;
            }
            CIDER_SCALE * total / CIDER_N as f64
        })
        .collect()
}

/// Mean of [`cider_per_image`].
pub fn cider(corpus: &Corpus) -> f64 {
    let per = cider_per_image(corpus);
    per.iter().sum::<f64>() / per.len() as f64
}
