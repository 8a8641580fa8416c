use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::log_softmax;
use crate::vocab::Token;

/// `P(z = k | c)`: uniform, a fixed distribution, or a bag-of-words softmax
/// over the context tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorModel {
    Uniform {
        n_decoders: usize,
    },
    Fixed {
        probs: Vec<f64>,
    },
    Learned {
        n_decoders: usize,
        vocab_size: usize,
        lr: f64,
        /// `vocab_size x n_decoders`.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

impl PriorModel {
    pub fn uniform(n_decoders: usize) -> Self {
        PriorModel::Uniform { n_decoders }
    }

    pub fn fixed(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter("fixed prior must be a strictly positive distribution".into()));
        }
        Ok(PriorModel::Fixed { probs })
    }

    /// Starts uniform: all weights zero.
    pub fn learned(n_decoders: usize, vocab_size: usize, lr: f64) -> Self {
        PriorModel::Learned {
            n_decoders,
            vocab_size,
            lr,
            weights: vec![0.0; vocab_size * n_decoders],
            bias: vec![0.0; n_decoders],
        }
    }

    pub fn n_decoders(&self) -> usize {
        match self {
            PriorModel::Uniform { n_decoders } | PriorModel::Learned { n_decoders, .. } => *n_decoders,
            PriorModel::Fixed { probs } => probs.len(),
        }
    }

    fn logits(weights: &[f64], bias: &[f64], k: usize, context: &[Token]) -> Vec<f64> {
        let mut z = bias.to_vec();
        if !context.is_empty() {
            let inv = 1.0 / context.len() as f64;
            for &t in context {
                let row = &weights[t as usize * k..(t as usize + 1) * k];
                for (zi, w) in z.iter_mut().zip(row) {
                    *zi += inv * w;
                }
            }
        }
        z
    }

    pub fn log_probs(&self, context: &[Token]) -> Vec<f64> {
        match self {
            PriorModel::Uniform { n_decoders } => vec![-(*n_decoders as f64).ln(); *n_decoders],
            PriorModel::Fixed { probs } => probs.iter().map(|p| p.ln()).collect(),
            PriorModel::Learned {
                n_decoders,
                weights,
                bias,
                ..
            } => {
                let mut z = Self::logits(weights, bias, *n_decoders, context);
                log_softmax(&mut z);
                z
            }
        }
    }

    pub fn probs(&self, context: &[Token]) -> Vec<f64> {
        self.log_probs(context).into_iter().map(f64::exp).collect()
    }

    /// One cross-entropy ascent step toward `target` (a distribution over
    /// decoders). Only the learned prior has parameters.
    pub fn update(&mut self, context: &[Token], target: &[f64]) -> Result<()> {
        if let PriorModel::Learned {
            n_decoders,
            vocab_size,
            lr,
            weights,
            bias,
        } = self
        {
            let k = *n_decoders;
            if target.len() != k {
                return Err(Error::Dimension(format!("prior target has {} entries, expected {k}", target.len())));
            }
            if let Some(&t) = context.iter().find(|&&t| t as usize >= *vocab_size) {
                return Err(Error::Domain(format!("token {t} outside prior vocabulary")));
            }
            let mut z = Self::logits(weights, bias, k, context);
            log_softmax(&mut z);
            let dz: Vec<f64> = target.iter().zip(&z).map(|(y, l)| y - l.exp()).collect();
            for (b, d) in bias.iter_mut().zip(&dz) {
                *b += *lr * d;
            }
            if !context.is_empty() {
                let step = *lr / context.len() as f64;
                for &t in context {
                    let row = &mut weights[t as usize * k..(t as usize + 1) * k];
                    for (w, d) in row.iter_mut().zip(&dz) {
                        *w += step * d;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priors_are_distributions() {
        for prior in [
            PriorModel::uniform(4),
            PriorModel::fixed(vec![0.5, 0.25, 0.25]).unwrap(),
            PriorModel::learned(3, 10, 0.5),
        ] {
            let p = prior.probs(&[3, 4, 4]);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn learned_prior_moves_toward_target() {
        let mut prior = PriorModel::learned(3, 10, 0.5);
        let ctx = [5, 6];
        for _ in 0..50 {
            prior.update(&ctx, &[0.0, 1.0, 0.0]).unwrap();
            let p = prior.probs(&ctx);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let p = prior.probs(&ctx);
        assert!(p[1] > 0.9, "{p:?}");
    }

    #[test]
    fn bad_fixed_prior() {
        assert!(PriorModel::fixed(vec![0.5, 0.4]).is_err());
        assert!(PriorModel::fixed(vec![1.0, 0.0]).is_err());
    }
}
