use std::time::Instant;

use rand::seq::SliceRandom;

use super::estep::{estep_eqhard, estep_eqrandom, estep_hard, fixed_label, posterior, EqRandomMode, PosteriorMatrix};
use super::log::{IterRecord, TrainLog};
use super::prior::PriorModel;
use super::{RngState, TrainConfig, Variant};
use crate::assignment::AssignmentMatrix;
use crate::decoders::{Decoded, DecoderBank};
use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, neumaier_sum};
use crate::seed;
use crate::vocab::{Sample, Token};

/// What the M-step consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum EStepOutput {
    Soft(PosteriorMatrix),
    Hard(AssignmentMatrix),
}

impl EStepOutput {
    pub fn weight(&self, n: usize, k: usize) -> f64 {
        match self {
            EStepOutput::Soft(q) => q.get(n, k),
            EStepOutput::Hard(a) => f64::from(u8::from(a.decoder_of(n) == k)),
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            EStepOutput::Soft(q) => q.n_samples(),
            EStepOutput::Hard(a) => a.n_samples(),
        }
    }

    pub fn n_decoders(&self) -> usize {
        match self {
            EStepOutput::Soft(q) => q.n_decoders(),
            EStepOutput::Hard(a) => a.n_decoders(),
        }
    }

    pub fn counts(&self) -> Vec<f64> {
        match self {
            EStepOutput::Soft(q) => q.column_sums(),
            EStepOutput::Hard(a) => a.counts().into_iter().map(|c| c as f64).collect(),
        }
    }

    fn target(&self, n: usize) -> Vec<f64> {
        (0..self.n_decoders()).map(|k| self.weight(n, k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStepContext {
    pub lr: f64,
    pub seed: u64,
    pub iter: u64,
    pub train_shared: bool,
}

const ESTEP_MASK: u64 = 0;
const MSTEP_MASK: u64 = 1;

fn mask_seed(seed_value: u64, iter: u64, id: usize, phase: u64) -> u64 {
    seed::derive(seed_value, &[seed::DROPOUT, iter, id as u64, phase])
}

/// Neural family: one weighted gradient step per (sample, decoder) with
/// non-zero weight, samples in batch order. Tabular family: weighted
/// template counts followed by the closed-form update. Returns the number
/// of (sample, decoder) updates.
pub fn mstep(
    bank: &mut DecoderBank,
    dataset: &[Sample],
    batch: &[usize],
    weights: &EStepOutput,
    ctx: &MStepContext,
) -> Result<usize> {
    if weights.n_samples() != batch.len() || weights.n_decoders() != bank.n_decoders() {
        return Err(Error::Dimension("M-step weights do not match the batch".into()));
    }
    let k_total = bank.n_decoders();
    let mut steps = 0;
    match bank {
        DecoderBank::Neural(nb) => {
            for (n, &id) in batch.iter().enumerate() {
                let mask = Some(mask_seed(ctx.seed, ctx.iter, id, MSTEP_MASK));
                for k in 0..k_total {
                    let w = weights.weight(n, k);
                    if w > 0.0 {
                        nb.grad_step(k, &dataset[id], w, ctx.lr, mask, ctx.train_shared)?;
                        steps += 1;
                    }
                }
            }
        }
        DecoderBank::Tabular(tb) => {
            let mut counts = tb.zero_counts();
            for (n, &id) in batch.iter().enumerate() {
                for k in 0..k_total {
                    let w = weights.weight(n, k);
                    if w > 0.0 {
                        tb.accumulate(&mut counts, k, &dataset[id], w)?;
                        steps += 1;
                    }
                }
            }
            tb.mstep(&counts)?;
        }
    }
    Ok(steps)
}

/// Stage one: cross-entropy training of the shared network without
/// adapters. A no-op for the tabular family. Returns the mean
/// log-likelihood per sample of each epoch.
pub fn pretrain(bank: &mut DecoderBank, dataset: &[Sample], config: &TrainConfig) -> Result<Vec<f64>> {
    let Some(nb) = bank.as_neural_mut() else {
        return Ok(Vec::new());
    };
    let mut history = Vec::with_capacity(config.pretrain_epochs);
    for epoch in 0..config.pretrain_epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut seed::rng(config.seed, &[seed::PRETRAIN, epoch as u64]));
        let mut total = Vec::with_capacity(order.len());
        for id in order {
            let mask = Some(seed::derive(config.seed, &[seed::PRETRAIN, epoch as u64, id as u64]));
            total.push(nb.shared_step(&dataset[id], config.pretrain_lr, mask)?);
        }
        history.push(neumaier_sum(total) / dataset.len().max(1) as f64);
    }
    Ok(history)
}

/// Mega-batches for one epoch: sequential slices of a seeded shuffle, last
/// partial slice dropped. EqRandom-Fixed instead draws `N/K` samples from
/// each pre-assigned group per batch so the quota holds with fixed labels.
pub fn mega_batches(config: &TrainConfig, n_data: usize, epoch: usize) -> Result<Vec<Vec<usize>>> {
    let n = config.estep_batch;
    let k = config.n_decoders;
    let mut rng = seed::rng(config.seed, &[seed::EPOCH, epoch as u64]);
    let batches = if config.variant == Variant::EqRandomFixed {
        let q = config.quota();
        let mut groups = vec![Vec::new(); k];
        for id in 0..n_data {
            groups[fixed_label(id, k, config.seed)].push(id);
        }
        for g in &mut groups {
            g.shuffle(&mut rng);
        }
        let n_batches = groups.iter().map(Vec::len).min().unwrap_or(0) / q;
        (0..n_batches)
            .map(|b| {
                let mut batch: Vec<usize> = groups.iter().flat_map(|g| g[b * q..(b + 1) * q].iter().copied()).collect();
                batch.shuffle(&mut rng);
                batch
            })
            .collect::<Vec<_>>()
    } else {
        let mut order: Vec<usize> = (0..n_data).collect();
        order.shuffle(&mut rng);
        order.chunks_exact(n).map(<[usize]>::to_vec).collect()
    };
    if batches.is_empty() {
        return Err(Error::Size(format!(
            "dataset of {n_data} samples yields no full mega-batch of {n}"
        )));
    }
    Ok(batches)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub bank: DecoderBank,
    pub prior: PriorModel,
    pub log: TrainLog,
    pub rng: RngState,
}

/// Stage two: EM over the decoders. See [`train_with`].
pub fn train(config: &TrainConfig, dataset: &[Sample], bank: DecoderBank) -> Result<Trained> {
    let prior = config.initial_prior(bank.vocab().size());
    train_with(config, dataset, bank, prior, |_| Ok(()))
}

/// Both stages: shared pretraining (neural family) then EM.
pub fn fit(config: &TrainConfig, dataset: &[Sample], mut bank: DecoderBank) -> Result<Trained> {
    pretrain(&mut bank, dataset, config)?;
    train(config, dataset, bank)
}

/// Runs `config.epochs` epochs of mega-batch EM. Each iteration scores all
/// decoders, runs the configured E-step, then the M-step, then (for a
/// learned prior) one prior update per sample. `on_epoch` sees the state
/// after every completed epoch.
pub fn train_with<F>(
    config: &TrainConfig,
    dataset: &[Sample],
    mut bank: DecoderBank,
    mut prior: PriorModel,
    mut on_epoch: F,
) -> Result<Trained>
where
    F: FnMut(&Trained) -> Result<()>,
{
    config.validate()?;
    let k = config.n_decoders;
    if bank.n_decoders() != k {
        return Err(Error::Parameter(format!(
            "bank has {} decoders, config expects {k}",
            bank.n_decoders()
        )));
    }
    if prior.n_decoders() != k {
        return Err(Error::Parameter("prior size does not match n_decoders".into()));
    }
    if dataset.len() < config.estep_batch {
        return Err(Error::Size(format!(
            "dataset of {} samples is smaller than the mega-batch {}",
            dataset.len(),
            config.estep_batch
        )));
    }
    let log_k = (k as f64).ln();
    let mut log = TrainLog::new();
    let mut iter: u64 = 0;
    for epoch in 0..config.epochs {
        for batch in mega_batches(config, dataset.len(), epoch)? {
            let t_start = Instant::now();
            let mut loglik = Vec::with_capacity(batch.len());
            for &id in &batch {
                let mask = config
                    .estep_dropout
                    .then(|| mask_seed(config.seed, iter, id, ESTEP_MASK));
                loglik.push(bank.log_prob_all(&dataset[id], mask)?);
            }
            let mll = neumaier_sum(loglik.iter().map(|row| log_sum_exp(row) - log_k));
            let contexts: Vec<&[Token]> = batch.iter().map(|&id| dataset[id].context.as_slice()).collect();
            let q = posterior(&loglik, &prior, &contexts)?;
            let mut t_hungarian_ms = 0.0;
            let weights = match config.variant {
                Variant::SoftEm => EStepOutput::Soft(q),
                Variant::HardEm => EStepOutput::Hard(estep_hard(&q)),
                Variant::EqHardEm => {
                    let t = Instant::now();
                    let a = estep_eqhard(&q, config.cost_source, Some(&loglik))?;
                    t_hungarian_ms = t.elapsed().as_secs_f64() * 1e3;
                    EStepOutput::Hard(a)
                }
                Variant::EqRandomFixed => {
                    EStepOutput::Hard(estep_eqrandom(k, EqRandomMode::Fixed, config.seed, &batch, iter)?)
                }
                Variant::EqRandomDynamic => {
                    EStepOutput::Hard(estep_eqrandom(k, EqRandomMode::Dynamic, config.seed, &batch, iter)?)
                }
            };
            let t_estep_ms = t_start.elapsed().as_secs_f64() * 1e3;

            let t_m = Instant::now();
            let ctx = MStepContext {
                lr: config.lr,
                seed: config.seed,
                iter,
                train_shared: config.train_shared,
            };
            mstep(&mut bank, dataset, &batch, &weights, &ctx)?;
            if matches!(prior, PriorModel::Learned { .. }) {
                for (n, ctx) in contexts.iter().enumerate() {
                    prior.update(ctx, &weights.target(n))?;
                }
            }
            let t_mstep_ms = t_m.elapsed().as_secs_f64() * 1e3;

            log.push(IterRecord {
                iter: iter as usize,
                variant: config.variant,
                mll,
                counts: weights.counts(),
                t_estep_ms,
                t_hungarian_ms,
                t_mstep_ms,
            });
            iter += 1;
        }
        let snapshot = Trained {
            bank,
            prior,
            log,
            rng: RngState {
                seed: config.seed,
                epochs_done: epoch as u64 + 1,
                iterations_done: iter,
            },
        };
        on_epoch(&snapshot)?;
        Trained { bank, prior, log, .. } = snapshot;
    }
    Ok(Trained {
        bank,
        prior,
        log,
        rng: RngState {
            seed: config.seed,
            epochs_done: config.epochs as u64,
            iterations_done: iter,
        },
    })
}

/// Greedy output of every decoder for every context, in decoder order.
pub fn infer<C: AsRef<[Token]>>(bank: &DecoderBank, contexts: &[C]) -> Result<Vec<Vec<Decoded>>> {
    contexts
        .iter()
        .map(|c| {
            (0..bank.n_decoders())
                .map(|k| bank.greedy_decode(k, c.as_ref()))
                .collect()
        })
        .collect()
}
