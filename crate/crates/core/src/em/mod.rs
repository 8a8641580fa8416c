//! Expectation-maximization over a decoder bank: Soft-EM, Hard-EM,
//! EqHard-EM (balanced hard assignment) and the two EqRandom baselines.

pub mod checkpoint;
mod estep;
mod log;
mod prior;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, RngState};
pub use estep::{
    argmax, estep_eqhard, estep_eqrandom, estep_hard, estep_soft, fixed_label, posterior, EqRandomMode,
    PosteriorMatrix,
};
pub use log::{IterRecord, TimingBreakdown, TrainLog};
pub use prior::PriorModel;
pub use train::{fit, infer, mega_batches, mstep, pretrain, train, train_with, EStepOutput, MStepContext, Trained};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "SoftEM")]
    SoftEm,
    #[serde(rename = "HardEM")]
    HardEm,
    #[serde(rename = "EqHardEM")]
    EqHardEm,
    #[serde(rename = "EqRandomFixed")]
    EqRandomFixed,
    #[serde(rename = "EqRandomDynamic")]
    EqRandomDynamic,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::SoftEm,
        Variant::HardEm,
        Variant::EqHardEm,
        Variant::EqRandomFixed,
        Variant::EqRandomDynamic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SoftEm => "SoftEM",
            Variant::HardEm => "HardEM",
            Variant::EqHardEm => "EqHardEM",
            Variant::EqRandomFixed => "EqRandomFixed",
            Variant::EqRandomDynamic => "EqRandomDynamic",
        }
    }

    pub fn is_balanced(self) -> bool {
        matches!(
            self,
            Variant::EqHardEm | Variant::EqRandomFixed | Variant::EqRandomDynamic
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[default]
    Uniform,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSource {
    /// `C = -Q`.
    #[default]
    Posterior,
    /// `C = -log P(r | z, c)`.
    LogLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub n_decoders: usize,
    /// Mega-batch size `N`.
    pub estep_batch: usize,
    /// `N / K`; when given it must agree with `estep_batch / n_decoders`.
    pub per_decoder: Option<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub prior: PriorKind,
    pub prior_lr: f64,
    /// Score E-step likelihoods with dropout active.
    pub estep_dropout: bool,
    pub cost_source: CostSource,
    /// Stage-one epochs of shared cross-entropy training (neural only).
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    /// Keep updating shared parameters during EM instead of freezing them.
    pub train_shared: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::EqHardEm,
            n_decoders: 10,
            estep_batch: 640,
            per_decoder: None,
            lr: 0.05,
            epochs: 1,
            seed: 0,
            prior: PriorKind::Uniform,
            prior_lr: 0.1,
            estep_dropout: false,
            cost_source: CostSource::Posterior,
            pretrain_epochs: 5,
            pretrain_lr: 0.05,
            train_shared: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_decoders == 0 {
            return Err(Error::Parameter("n_decoders must be at least 1".into()));
        }
        if self.estep_batch == 0 || self.estep_batch % self.n_decoders != 0 {
            return Err(Error::Quota {
                n_samples: self.estep_batch,
                n_decoders: self.n_decoders,
            });
        }
        if let Some(q) = self.per_decoder {
            if q * self.n_decoders != self.estep_batch {
                return Err(Error::Parameter(format!(
                    "estep_batch {} != per_decoder {q} x n_decoders {}",
                    self.estep_batch, self.n_decoders
                )));
            }
        }
        for (name, v) in [("lr", self.lr), ("prior_lr", self.prior_lr), ("pretrain_lr", self.pretrain_lr)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn quota(&self) -> usize {
        self.estep_batch / self.n_decoders
    }

    pub fn initial_prior(&self, vocab_size: usize) -> PriorModel {
        match self.prior {
            PriorKind::Uniform => PriorModel::uniform(self.n_decoders),
            PriorKind::Learned => PriorModel::learned(self.n_decoders, vocab_size, self.prior_lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert_eq!(TrainConfig::default().quota(), 64);
        let bad = TrainConfig {
            estep_batch: 10,
            n_decoders: 4,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Quota { .. })));
        let bad = TrainConfig {
            per_decoder: Some(32),
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
    }
}
