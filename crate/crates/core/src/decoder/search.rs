//! Greedy and beam decoding over any step-wise token model.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error("maximum caption length must be at least 1")]
    ZeroLength,
}

/// A left-to-right token model.
///
/// `log_probs` scores the next token from a state; `advance` records the
/// chosen token in the state returned alongside those scores.
pub trait StepModel {
    type State: Clone;
    type Error: From<SearchError>;

    fn end_token(&self) -> usize;
    fn initial(&mut self) -> Result<Self::State, Self::Error>;
    fn log_probs(&mut self, state: &Self::State) -> Result<(Vec<f64>, Self::State), Self::Error>;
    fn advance(&self, state: Self::State, token: usize) -> Self::State;
}

/// A partial or complete output sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<S> {
    /// Emitted tokens, including the final `<end>` when `finished`.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: S,
    pub finished: bool,
}

impl<S> Hypothesis<S> {
    /// Cumulative log-probability divided by the emitted-token count.
    pub fn normalized(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.log_prob / self.tokens.len() as f64
        }
    }

    /// Tokens with a trailing `end` removed.
    pub fn surface(&self, end: usize) -> Vec<usize> {
        let mut t = self.tokens.clone();
        if t.last() == Some(&end) {
            t.pop();
        }
        t
    }
}

fn check(beam: usize, max_len: usize) -> Result<(), SearchError> {
    if beam == 0 {
        return Err(SearchError::ZeroBeam);
    }
    if max_len == 0 {
        return Err(SearchError::ZeroLength);
    }
    Ok(())
}

/// Highest-scoring token; the lowest index wins ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Picks the most likely token at every step until `<end>` or `max_len`
/// emitted tokens.
pub fn greedy_search<M: StepModel>(model: &mut M, max_len: usize) -> Result<Hypothesis<M::State>, M::Error> {
    check(1, max_len)?;
    let end = model.end_token();
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.initial()?,
        finished: false,
    };
    while hyp.tokens.len() < max_len {
        let (scores, next) = model.log_probs(&hyp.state)?;
        let token = argmax(&scores);
        hyp.log_prob += scores[token];
        hyp.tokens.push(token);
        hyp.state = model.advance(next, token);
        if token == end {
            hyp.finished = true;
            break;
        }
    }
    Ok(hyp)
}

/// Descending score, then the lexicographically smaller sequence first.
fn rank(a_score: f64, a_tokens: &[usize], b_score: f64, b_tokens: &[usize]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_tokens.cmp(b_tokens))
}

/// Beam search with length normalization.
///
/// Each round expands every live hypothesis by every token and keeps the
/// `beam` best expansions by cumulative log-probability. Expansions ending
/// in `<end>` leave the beam for a pool of finished hypotheses; the search
/// stops once nothing is live or `max_len` tokens have been emitted, in
/// which case the unfinished survivors join the pool. The winner is the
/// pool member with the highest log-probability per emitted token. Ties at
/// every stage go to the lexicographically smaller token sequence.
pub fn beam_search<M: StepModel>(
    model: &mut M,
    beam: usize,
    max_len: usize,
) -> Result<Hypothesis<M::State>, M::Error> {
    check(beam, max_len)?;
    let end = model.end_token();
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.initial()?,
        finished: false,
    }];
    let mut pool = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut expanded = Vec::with_capacity(live.len());
        for hyp in &live {
            expanded.push(model.log_probs(&hyp.state)?);
        }
        // (parent, token, cumulative log-probability)
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
        for (p, (scores, _)) in expanded.iter().enumerate() {
            let base = live[p].log_prob;
            candidates.extend(scores.iter().enumerate().map(|(tok, &s)| (p, tok, base + s)));
        }
        candidates.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| live[a.0].tokens.cmp(&live[b.0].tokens))
                .then_with(|| a.1.cmp(&b.1))
        });
        candidates.truncate(beam);

        let mut next_live = Vec::with_capacity(beam);
        for (p, token, log_prob) in candidates {
            let mut tokens = live[p].tokens.clone();
            tokens.push(token);
            let state = model.advance(expanded[p].1.clone(), token);
            let hyp = Hypothesis {
                tokens,
                log_prob,
                state,
                finished: token == end,
            };
            if hyp.finished {
                pool.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }
    pool.extend(live);

    pool.sort_by(|a, b| rank(a.normalized(), &a.tokens, b.normalized(), &b.tokens));
    Ok(pool.swap_remove(0))
}

/// Cumulative log-probability of `tokens` under `model`, starting from its
/// initial state.
pub fn sequence_log_prob<M: StepModel>(model: &mut M, tokens: &[usize]) -> Result<f64, M::Error> {
    let mut state = model.initial()?;
    let mut total = 0.0;
    for &tok in tokens {
        let (scores, next) = model.log_probs(&state)?;
        total += scores[tok];
        state = model.advance(next, tok);
    }
    Ok(total)
}
