//! Greedy and beam decoding over any autoregressive step model.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{Token, EOS};

/// An autoregressive model seen one step at a time.
pub trait StepModel {
    type State: Clone;

    /// State before the first response token.
    fn start(&self) -> Self::State;

    /// Log-probabilities over the whole vocabulary for the next token.
    fn next_log_probs(&self, state: &Self::State) -> Vec<f64>;

    fn advance(&self, state: &Self::State, token: Token) -> Self::State;
}

/// A decoded response. `tokens` ends with EOS unless `truncated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub tokens: Vec<Token>,
    pub log_prob: f64,
    pub truncated: bool,
}

impl Decoded {
    pub fn body(&self) -> &[Token] {
        crate::vocab::strip_eos(&self.tokens)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Takes the most probable token at every step (lowest id on ties) until
/// EOS or `max_len` tokens.
pub fn greedy<M: StepModel>(model: &M, max_len: usize) -> Decoded {
    let mut state = model.start();
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    while tokens.len() < max_len {
        let lp = model.next_log_probs(&state);
        let t = argmax(&lp);
        log_prob += lp[t];
        tokens.push(t as Token);
        if t as Token == EOS {
            return Decoded {
                tokens,
                log_prob,
                truncated: false,
            };
        }
        state = model.advance(&state, t as Token);
    }
    Decoded {
        tokens,
        log_prob,
        truncated: true,
    }
}

/// Ranking used everywhere in search: higher log-probability first, then
/// lexicographically smaller token sequence.
fn rank(a_score: f64, a_seq: &[Token], b_score: f64, b_seq: &[Token]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_seq.cmp(b_seq))
}

/// Length-capped beam search returning up to `beam` finished hypotheses,
/// best first.
///
/// At each step every live prefix is extended by every token and the best
/// `beam` extensions are kept; extensions ending in EOS or reaching
/// `max_len` leave the beam as finished hypotheses.
pub fn beam<M: StepModel>(model: &M, beam: usize, max_len: usize) -> Result<Vec<Decoded>> {
    if beam < 1 {
        return Err(Error::Parameter("beam width must be at least 1".into()));
    }
    let mut live: Vec<(f64, Vec<Token>, M::State)> = vec![(0.0, Vec::new(), model.start())];
    let mut finished: Vec<(f64, Vec<Token>, bool)> = Vec::new();
    while !live.is_empty() {
        let mut pool: Vec<(f64, Vec<Token>, usize)> = Vec::new();
        for (i, (score, prefix, state)) in live.iter().enumerate() {
            let lp = model.next_log_probs(state);
            for (t, l) in lp.iter().enumerate() {
                let mut seq = prefix.clone();
                seq.push(t as Token);
                pool.push((score + l, seq, i));
            }
        }
        pool.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
        pool.truncate(beam);
        let mut next = Vec::new();
        for (score, seq, parent) in pool {
            let last = *seq.last().expect("non-empty extension");
            if last == EOS {
                finished.push((score, seq, false));
            } else if seq.len() >= max_len {
                finished.push((score, seq, true));
            } else {
                let state = model.advance(&live[parent].2, last);
                next.push((score, seq, state));
            }
        }
        live = next;
    }
    let mut ranked: Vec<_> = finished;
    ranked.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
    ranked.truncate(beam);
    Ok(ranked
        .into_iter()
        .map(|(log_prob, tokens, truncated)| Decoded {
            tokens,
            log_prob,
            truncated,
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod toy {
    use super::*;

    /// Next-token distribution depends only on the position.
    pub struct PositionModel {
        pub table: Vec<Vec<f64>>,
    }

    impl StepModel for PositionModel {
        type State = usize;

        fn start(&self) -> usize {
            0
        }

        fn next_log_probs(&self, pos: &usize) -> Vec<f64> {
            self.table[(*pos).min(self.table.len() - 1)].clone()
        }

        fn advance(&self, pos: &usize, _token: Token) -> usize {
            pos + 1
        }
    }

    /// Every sequence of at most `max_len` tokens with EOS only in final
    /// position, or reaching `max_len` without EOS.
    pub fn enumerate<M: StepModel>(model: &M, max_len: usize) -> Vec<(f64, Vec<Token>)> {
        let mut out = Vec::new();
        let mut stack = vec![(0.0, Vec::new(), model.start())];
        while let Some((score, prefix, state)) = stack.pop() {
            let lp = model.next_log_probs(&state);
            for (t, l) in lp.iter().enumerate() {
                let mut seq: Vec<Token> = prefix.clone();
                seq.push(t as Token);
                let s = score + l;
                if t as Token == EOS || seq.len() == max_len {
                    out.push((s, seq));
                } else {
                    let next = model.advance(&state, t as Token);
                    stack.push((s, seq, next));
                }
            }
        }
        out.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::toy::*;
    use super::*;
    use crate::linalg::log_softmax;

    /// Three steps; EOS is only possible at the last one, so every complete
    /// sequence has length 3 and beam search is exact for position-only
    /// models.
    fn toy() -> PositionModel {
        let ninf = f64::NEG_INFINITY;
        let mut table = vec![
            vec![-3.0, -4.0, ninf, 1.2, 0.9, 0.95],
            vec![-2.0, -5.0, ninf, 0.2, 1.1, 1.05],
            vec![-1.0, -2.0, 0.1, 0.6, 0.5, -0.3],
        ];
        for row in &mut table {
            log_softmax(row);
        }
        PositionModel { table }
    }

    #[test]
    fn beam_matches_exhaustive_enumeration() {
        let model = toy();
        let all = enumerate(&model, 3);
        let top = beam(&model, 3, 3).unwrap();
        assert_eq!(top.len(), 3);
        for (got, (score, seq)) in top.iter().zip(&all) {
            assert_eq!(&got.tokens, seq);
            assert!((got.log_prob - score).abs() < 1e-12);
        }
    }

    #[test]
    fn width_one_is_greedy() {
        let model = toy();
        let g = greedy(&model, 3);
        let b = beam(&model, 1, 3).unwrap();
        assert_eq!(b, vec![g]);
    }

    #[test]
    fn forced_eos_gives_empty_body() {
        let model = PositionModel {
            table: vec![vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]],
        };
        let d = greedy(&model, 5);
        assert_eq!(d.tokens, vec![EOS]);
        assert!(d.body().is_empty());
        assert!(!d.truncated);
    }

    #[test]
    fn truncation_is_flagged() {
        let mut row = vec![0.0, 0.0, -10.0, 5.0];
        log_softmax(&mut row);
        let model = PositionModel { table: vec![row] };
        let d = greedy(&model, 4);
        assert_eq!(d.tokens, vec![3, 3, 3, 3]);
        assert!(d.truncated);
    }

    #[test]
    fn zero_width_is_rejected() {
        assert!(matches!(beam(&toy(), 0, 3), Err(Error::Parameter(_))));
    }
}
