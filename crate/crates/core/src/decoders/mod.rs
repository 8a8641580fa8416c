//! K conditional response models behind one interface: a tabular family
//! with a closed-form M-step and a small neural family whose decoders differ
//! only by adapter layers.

pub mod adapter;
pub mod neural;
pub mod search;
pub mod tabular;

use serde::{Deserialize, Serialize};

pub use adapter::{Activation, AdapterLayer};
pub use neural::{AdapterInit, NeuralBank, NeuralConfig};
pub use search::{Decoded, StepModel};
pub use tabular::{TabularBank, TabularConfig, TemplateCounts};

use crate::error::{Error, Result};
use crate::synthdata::CorpusModel;
use crate::vocab::{Sample, Token, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Tabular(TabularConfig),
    Neural(NeuralConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Neural(NeuralConfig::default())
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Tabular(c) => c.validate(),
            ModelConfig::Neural(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DecoderBank {
    Tabular(TabularBank),
    Neural(NeuralBank),
}

impl DecoderBank {
    /// Builds a fresh bank for a corpus. The tabular family takes the
    /// corpus templates as its template sets.
    pub fn new(config: &ModelConfig, corpus: &CorpusModel, n_decoders: usize, seed: u64) -> Result<Self> {
        match config {
            ModelConfig::Tabular(c) => Ok(DecoderBank::Tabular(TabularBank::new(
                corpus.vocab(),
                corpus.contexts().to_vec(),
                (0..corpus.n_contexts()).map(|i| corpus.templates(i).to_vec()).collect(),
                n_decoders,
                corpus.noise_rate(),
                c.clone(),
                seed,
            )?)),
            ModelConfig::Neural(c) => Ok(DecoderBank::Neural(NeuralBank::new(
                corpus.vocab(),
                n_decoders,
                c.clone(),
                seed,
            )?)),
        }
    }

    pub fn n_decoders(&self) -> usize {
        match self {
            DecoderBank::Tabular(b) => b.n_decoders(),
            DecoderBank::Neural(b) => b.n_decoders(),
        }
    }

    pub fn vocab(&self) -> Vocab {
        match self {
            DecoderBank::Tabular(b) => b.vocab(),
            DecoderBank::Neural(b) => b.vocab(),
        }
    }

    pub fn is_neural(&self) -> bool {
        matches!(self, DecoderBank::Neural(_))
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k >= self.n_decoders() {
            return Err(Error::Parameter(format!(
                "decoder {k} out of range for {} decoders",
                self.n_decoders()
            )));
        }
        Ok(())
    }

    /// `log P(r | z = k, c)` without dropout.
    pub fn log_prob(&self, k: usize, sample: &Sample) -> Result<f64> {
        match self {
            DecoderBank::Tabular(b) => b.log_prob(k, sample),
            DecoderBank::Neural(b) => b.log_prob(k, sample, None),
        }
    }

    /// `log P(r | z = k, c)` for every `k`. `dropout` seeds a mask for the
    /// neural family and is ignored by the tabular one.
    pub fn log_prob_all(&self, sample: &Sample, dropout: Option<u64>) -> Result<Vec<f64>> {
        match self {
            DecoderBank::Tabular(b) => b.log_prob_all(sample),
            DecoderBank::Neural(b) => b.log_prob_all(sample, dropout),
        }
    }

    pub fn greedy_decode(&self, k: usize, context: &[Token]) -> Result<Decoded> {
        self.check_k(k)?;
        match self {
            DecoderBank::Tabular(b) => b.greedy_decode(k, context),
            DecoderBank::Neural(b) => Ok(b.greedy_decode(k, context)),
        }
    }

    pub fn beam_decode(&self, k: usize, context: &[Token], beam: usize) -> Result<Vec<Decoded>> {
        self.check_k(k)?;
        match self {
            DecoderBank::Tabular(b) => b.beam_decode(k, context, beam),
            DecoderBank::Neural(b) => b.beam_decode(k, context, beam),
        }
    }

    pub fn as_neural(&self) -> Option<&NeuralBank> {
        match self {
            DecoderBank::Neural(b) => Some(b),
            DecoderBank::Tabular(_) => None,
        }
    }

    pub fn as_tabular(&self) -> Option<&TabularBank> {
        match self {
            DecoderBank::Tabular(b) => Some(b),
            DecoderBank::Neural(_) => None,
        }
    }

    pub fn as_neural_mut(&mut self) -> Option<&mut NeuralBank> {
        match self {
            DecoderBank::Neural(b) => Some(b),
            DecoderBank::Tabular(_) => None,
        }
    }

    pub fn as_tabular_mut(&mut self) -> Option<&mut TabularBank> {
        match self {
            DecoderBank::Tabular(b) => Some(b),
            DecoderBank::Neural(_) => None,
        }
    }
}
