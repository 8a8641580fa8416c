use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PriorModel, TrainConfig};
use crate::decoders::DecoderBank;
use crate::error::{Error, Result};
use crate::vocab::Vocab;

pub const CHECKPOINT_FORMAT: &str = "eqhard-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Every random stream is derived from the base seed and the iteration
/// counters, so these three numbers are the complete generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub epochs_done: u64,
    pub iterations_done: u64,
}

/// Self-describing JSON blob. Floats are written in shortest round-trip
/// form, so loading restores every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub vocab: Vocab,
    pub train: TrainConfig,
    pub bank: DecoderBank,
    pub prior: PriorModel,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn new(train: TrainConfig, bank: DecoderBank, prior: PriorModel, rng: RngState) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            vocab: bank.vocab(),
            train,
            bank,
            prior,
            rng,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Compatibility(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.vocab != ck.bank.vocab() {
            return Err(Error::Compatibility("checkpoint vocab disagrees with its bank".into()));
        }
        Ok(ck)
    }

    /// Writes to a sibling temporary file and renames it into place, so an
    /// interrupted save never replaces a good checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_json()?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
