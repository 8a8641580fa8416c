//! End-to-end glue: build and train a bank on a labeled corpus, decode one
//! response set per test context, and score it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decoders::{DecoderBank, ModelConfig};
use crate::em::{fit, TrainConfig, TrainLog, Trained};
use crate::error::{Error, Result};
use crate::metrics::{assignment_stats, evaluate, EvalConfig, MetricsReport, ResponseSet};
use crate::synthdata::{LabeledCorpus, LabeledSample};
use crate::vocab::{Sample, Token};

/// How a bank turns one context into a hypothesis set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Decoding {
    /// One greedy output per decoder.
    #[default]
    Greedy,
    /// The `width` best beam outputs of decoder 0.
    Beam { width: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextGroup {
    pub context_id: usize,
    pub context: Vec<Token>,
    /// Response bodies without EOS.
    pub references: Vec<Vec<Token>>,
}

/// Test samples grouped by context, in context-id order.
pub fn group_by_context(samples: &[LabeledSample]) -> Vec<ContextGroup> {
    let mut groups: BTreeMap<usize, ContextGroup> = BTreeMap::new();
    for s in samples {
        let g = groups.entry(s.context_id).or_insert_with(|| ContextGroup {
            context_id: s.context_id,
            context: s.context.clone(),
            references: Vec::new(),
        });
        g.references.push(crate::vocab::strip_eos(&s.response).to_vec());
    }
    groups.into_values().collect()
}

pub fn hypotheses(bank: &DecoderBank, context: &[Token], decoding: Decoding) -> Result<Vec<Vec<Token>>> {
    match decoding {
        Decoding::Greedy => (0..bank.n_decoders())
            .map(|k| bank.greedy_decode(k, context).map(|d| d.body().to_vec()))
            .collect(),
        Decoding::Beam { width } => Ok(bank
            .beam_decode(0, context, width)?
            .into_iter()
            .map(|d| d.body().to_vec())
            .collect()),
    }
}

pub fn response_sets(bank: &DecoderBank, groups: &[ContextGroup], decoding: Decoding) -> Result<Vec<ResponseSet<Token>>> {
    groups
        .iter()
        .map(|g| Ok(ResponseSet::new(hypotheses(bank, &g.context, decoding)?, g.references.clone())))
        .collect()
}

/// Scores `bank` on `samples` (normally the test split of `corpus`), with
/// the corpus templates as planted modes and, when a log is given, the
/// assignment statistics.
pub fn evaluate_bank(
    bank: &DecoderBank,
    corpus: &LabeledCorpus,
    samples: &[LabeledSample],
    decoding: Decoding,
    config: &EvalConfig,
    log: Option<&TrainLog>,
) -> Result<MetricsReport> {
    if bank.vocab() != corpus.vocab() {
        return Err(Error::Compatibility(format!(
            "bank vocabulary {} does not match corpus vocabulary {}",
            bank.vocab().size(),
            corpus.vocab().size()
        )));
    }
    let groups = group_by_context(samples);
    let sets = response_sets(bank, &groups, decoding)?;
    let modes: Vec<Vec<Vec<Token>>> = groups.iter().map(|g| corpus.templates(g.context_id).to_vec()).collect();
    let mut report = evaluate(&sets, Some(&modes), config)?;
    if let Some(log) = log.filter(|l| !l.is_empty()) {
        report.assignment = Some(assignment_stats(log)?);
    }
    Ok(report)
}

pub fn train_samples(corpus: &LabeledCorpus) -> Vec<Sample> {
    corpus.train.iter().map(LabeledSample::sample).collect()
}

/// Fresh bank seeded from `train.seed`, then both training stages.
pub fn train_on(corpus: &LabeledCorpus, model: &ModelConfig, train: &TrainConfig) -> Result<Trained> {
    model.validate()?;
    let bank = DecoderBank::new(model, &corpus.model, train.n_decoders, train.seed)?;
    fit(train, &train_samples(corpus), bank)
}
