//! A tiny recurrent decoder family sharing everything except one adapter
//! per decoder.
//!
//! ```text
//! m   = mean of context embeddings
//! h_0 = tanh(W_enc m + b_enc)
//! h_t = tanh(W_in e(y_{t-1}) + W_rec h_{t-1} + b_h)      y_0 = BOS
//! g_t = dropout(h_t)
//! a_t = Adapter_k(g_t)                                    (identity without adapters)
//! P(y_t | ...) = softmax(W_out a_t + b_out)
//! ```
//!
//! The adapter sits after the recurrent layer and does not feed back into
//! the recurrence, so `h_t` is shared by all decoders for a given sample.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adapter::{Activation, AdapterGrad, AdapterLayer, AdapterTrace};
use super::search::{self, Decoded, StepModel};
use crate::error::{Error, Result};
use crate::linalg::{add_outer, axpy, log_softmax, matvec, matvec_t_add, norm_sq};
use crate::seed;
use crate::vocab::{Sample, Token, Vocab, BOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterInit {
    /// `W1 = 0` and one `W2` shared by every decoder.
    Tied,
    /// `W1 = 0` and an independent small `W2` per decoder.
    #[default]
    ZeroOut,
    /// Independent random `W1` and `W2` per decoder.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub hidden: usize,
    pub adapter_inner: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub max_context_len: usize,
    pub max_response_len: usize,
    pub adapter_init: AdapterInit,
    /// Half-width multiplier for `AdapterInit::Random`.
    pub random_init_scale: f64,
    /// Gradient norm cap per step; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            adapter_inner: 8,
            activation: Activation::Relu,
            dropout: 0.1,
            max_context_len: 16,
            max_response_len: 16,
            adapter_init: AdapterInit::ZeroOut,
            random_init_scale: 1.0,
            clip_norm: Some(5.0),
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.adapter_inner == 0 || self.adapter_inner >= self.hidden {
            return Err(Error::Parameter(format!(
                "need 0 < adapter_inner < hidden, got {} and {}",
                self.adapter_inner, self.hidden
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.max_context_len == 0 || self.max_response_len == 0 {
            return Err(Error::Parameter("length caps must be positive".into()));
        }
        if !(self.random_init_scale >= 0.0 && self.random_init_scale.is_finite()) {
            return Err(Error::Parameter("random_init_scale must be finite and non-negative".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Parameter(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Parameters shared by every decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedParams {
    pub emb: Vec<f64>,
    pub w_enc: Vec<f64>,
    pub b_enc: Vec<f64>,
    pub w_in: Vec<f64>,
    pub w_rec: Vec<f64>,
    pub b_h: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

pub const SHARED_TENSORS: [&str; 8] = ["emb", "w_enc", "b_enc", "w_in", "w_rec", "b_h", "w_out", "b_out"];

impl SharedParams {
    pub fn zeros(vocab: usize, d: usize) -> Self {
        Self {
            emb: vec![0.0; vocab * d],
            w_enc: vec![0.0; d * d],
            b_enc: vec![0.0; d],
            w_in: vec![0.0; d * d],
            w_rec: vec![0.0; d * d],
            b_h: vec![0.0; d],
            w_out: vec![0.0; vocab * d],
            b_out: vec![0.0; vocab],
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.emb, &self.w_enc, &self.b_enc, &self.w_in, &self.w_rec, &self.b_h, &self.w_out, &self.b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.emb,
            &mut self.w_enc,
            &mut self.b_enc,
            &mut self.w_in,
            &mut self.w_rec,
            &mut self.b_h,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }
}

/// Gradient of `log P(r | c)` for one decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralGrad {
    pub shared: Option<SharedParams>,
    pub adapter: Option<AdapterGrad>,
}

impl NeuralGrad {
    fn norm_sq(&self) -> f64 {
        let mut total = 0.0;
        if let Some(s) = &self.shared {
            total += s.tensors().iter().map(|t| norm_sq(t)).sum::<f64>();
        }
        if let Some(a) = &self.adapter {
            total += norm_sq(&a.w1) + norm_sq(&a.w2);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralBank {
    vocab: Vocab,
    config: NeuralConfig,
    shared: SharedParams,
    adapters: Vec<AdapterLayer>,
}

fn fill_uniform(rng: &mut ChaCha8Rng, xs: &mut [f64], half_width: f64) {
    for x in xs {
        *x = if half_width > 0.0 {
            rng.gen_range(-half_width..half_width)
        } else {
            0.0
        };
    }
}

/// Forward values shared by every decoder for one sample.
struct Trunk {
    context: Vec<Token>,
    mean: Vec<f64>,
    /// `h[0..=T]`.
    h: Vec<Vec<f64>>,
    /// Dropped-out states `g[t-1]` for `t = 1..=T`.
    g: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
}

impl NeuralBank {
    pub fn new(vocab: Vocab, n_decoders: usize, config: NeuralConfig, seed_value: u64) -> Result<Self> {
        config.validate()?;
        if n_decoders == 0 {
            return Err(Error::Parameter("need at least one decoder".into()));
        }
        let (v, d, di) = (vocab.size(), config.hidden, config.adapter_inner);
        let mut shared = SharedParams::zeros(v, d);
        let mut rng = seed::rng(seed_value, &[seed::SHARED_INIT]);
        let s = 1.0 / (d as f64).sqrt();
        fill_uniform(&mut rng, &mut shared.emb, 1.0);
        fill_uniform(&mut rng, &mut shared.w_enc, s);
        fill_uniform(&mut rng, &mut shared.w_in, s);
        fill_uniform(&mut rng, &mut shared.w_rec, s);
        fill_uniform(&mut rng, &mut shared.w_out, s);

        let small = 0.1 / (d as f64).sqrt();
        let mut adapters = Vec::with_capacity(n_decoders);
        for k in 0..n_decoders {
            let mut w1 = vec![0.0; d * di];
            let mut w2 = vec![0.0; di * d];
            match config.adapter_init {
                AdapterInit::Tied => {
                    fill_uniform(&mut seed::rng(seed_value, &[seed::ADAPTER_INIT]), &mut w2, small);
                }
                AdapterInit::ZeroOut => {
                    fill_uniform(&mut seed::rng(seed_value, &[seed::ADAPTER_INIT, k as u64]), &mut w2, small);
                }
                AdapterInit::Random => {
                    let mut rng = seed::rng(seed_value, &[seed::ADAPTER_INIT, k as u64]);
                    let scale = config.random_init_scale;
                    fill_uniform(&mut rng, &mut w1, scale / (di as f64).sqrt());
                    fill_uniform(&mut rng, &mut w2, scale / (d as f64).sqrt());
                }
            }
            adapters.push(AdapterLayer::new(d, di, w1, w2, config.activation)?);
        }
        Ok(Self {
            vocab,
            config,
            shared,
            adapters,
        })
    }

    /// Assembles a bank from explicit parameters.
    pub fn from_parts(
        vocab: Vocab,
        config: NeuralConfig,
        shared: SharedParams,
        adapters: Vec<AdapterLayer>,
    ) -> Result<Self> {
        config.validate()?;
        let (v, d) = (vocab.size(), config.hidden);
        let expected = SharedParams::zeros(v, d);
        for ((name, got), want) in SHARED_TENSORS.iter().zip(shared.tensors()).zip(expected.tensors()) {
            if got.len() != want.len() {
                return Err(Error::Dimension(format!(
                    "shared tensor {name} has {} entries, expected {}",
                    got.len(),
                    want.len()
                )));
            }
        }
        if adapters.is_empty() {
            return Err(Error::Parameter("need at least one decoder".into()));
        }
        for a in &adapters {
            if a.dim() != d || a.inner_dim() != config.adapter_inner {
                return Err(Error::Dimension("adapter shape does not match the config".into()));
            }
        }
        Ok(Self {
            vocab,
            config,
            shared,
            adapters,
        })
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn n_decoders(&self) -> usize {
        self.adapters.len()
    }

    pub fn shared(&self) -> &SharedParams {
        &self.shared
    }

    pub fn shared_mut(&mut self) -> &mut SharedParams {
        &mut self.shared
    }

    pub fn adapter(&self, k: usize) -> &AdapterLayer {
        &self.adapters[k]
    }

    pub fn adapter_mut(&mut self, k: usize) -> &mut AdapterLayer {
        &mut self.adapters[k]
    }

    fn d(&self) -> usize {
        self.config.hidden
    }

    fn check(&self, k: Option<usize>, sample: &Sample) -> Result<()> {
        if let Some(k) = k {
            if k >= self.adapters.len() {
                return Err(Error::Parameter(format!(
                    "decoder {k} out of range for {} decoders",
                    self.adapters.len()
                )));
            }
        }
        sample.validate(&self.vocab)
    }

    fn context_window<'a>(&self, context: &'a [Token]) -> &'a [Token] {
        let cap = self.config.max_context_len;
        &context[context.len().saturating_sub(cap)..]
    }

    fn initial_state(&self, context: &[Token]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d();
        let mut mean = vec![0.0; d];
        if !context.is_empty() {
            for &c in context {
                let row = &self.shared.emb[c as usize * d..(c as usize + 1) * d];
                axpy(1.0, row, &mut mean);
            }
            let inv = 1.0 / context.len() as f64;
            for m in &mut mean {
                *m *= inv;
            }
        }
        let mut h0 = vec![0.0; d];
        matvec(&self.shared.w_enc, d, d, &mean, &mut h0);
        for (h, b) in h0.iter_mut().zip(&self.shared.b_enc) {
            *h = (*h + b).tanh();
        }
        (mean, h0)
    }

    fn recur(&self, h_prev: &[f64], input: Token) -> Vec<f64> {
        let d = self.d();
        let x = &self.shared.emb[input as usize * d..(input as usize + 1) * d];
        let mut h = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        matvec(&self.shared.w_in, d, d, x, &mut h);
        matvec(&self.shared.w_rec, d, d, h_prev, &mut tmp);
        for ((hi, ti), bi) in h.iter_mut().zip(&tmp).zip(&self.shared.b_h) {
            *hi = (*hi + ti + bi).tanh();
        }
        h
    }

    fn masks(&self, steps: usize, dropout: Option<u64>) -> Option<Vec<Vec<f64>>> {
        let p = self.config.dropout;
        let mask_seed = dropout?;
        if p == 0.0 {
            return None;
        }
        let mut rng = seed::rng(mask_seed, &[seed::DROPOUT]);
        let keep = 1.0 / (1.0 - p);
        Some(
            (0..steps)
                .map(|_| {
                    (0..self.d())
                        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                        .collect()
                })
                .collect(),
        )
    }

    fn trunk(&self, context: &[Token], response: &[Token], dropout: Option<u64>) -> Trunk {
        let context = self.context_window(context).to_vec();
        let (mean, h0) = self.initial_state(&context);
        let steps = response.len();
        let masks = self.masks(steps, dropout);
        let mut h = Vec::with_capacity(steps + 1);
        h.push(h0);
        let mut g = Vec::with_capacity(steps);
        for t in 0..steps {
            let input = if t == 0 { BOS } else { response[t - 1] };
            let ht = self.recur(&h[t], input);
            let gt = match &masks {
                Some(m) => ht.iter().zip(&m[t]).map(|(a, b)| a * b).collect(),
                None => ht.clone(),
            };
            h.push(ht);
            g.push(gt);
        }
        Trunk {
            context,
            mean,
            h,
            g,
            masks,
        }
    }

    /// Next-token log-probabilities from a (dropped-out) hidden state.
    fn head(&self, k: Option<usize>, g: &[f64], trace: &mut AdapterTrace, a: &mut Vec<f64>) -> Vec<f64> {
        let (v, d) = (self.vocab.size(), self.d());
        a.resize(d, 0.0);
        match k {
            Some(k) => self.adapters[k].forward_into(g, a, trace),
            None => a.copy_from_slice(g),
        }
        let mut z = vec![0.0; v];
        matvec(&self.shared.w_out, v, d, a, &mut z);
        for (zi, b) in z.iter_mut().zip(&self.shared.b_out) {
            *zi += b;
        }
        log_softmax(&mut z);
        z
    }

    fn score(&self, k: Option<usize>, trunk: &Trunk, response: &[Token]) -> f64 {
        let mut trace = AdapterTrace::default();
        let mut a = Vec::new();
        let mut total = 0.0;
        for (t, &y) in response.iter().enumerate() {
            total += self.head(k, &trunk.g[t], &mut trace, &mut a)[y as usize];
        }
        total
    }

    /// `log P(r | z = k, c)`. `dropout` seeds a mask; `None` evaluates
    /// without dropout.
    pub fn log_prob(&self, k: usize, sample: &Sample, dropout: Option<u64>) -> Result<f64> {
        self.check(Some(k), sample)?;
        let trunk = self.trunk(&sample.context, &sample.response, dropout);
        Ok(self.score(Some(k), &trunk, &sample.response))
    }

    /// `log P(r | z = k, c)` for every decoder, sharing the recurrent pass.
    pub fn log_prob_all(&self, sample: &Sample, dropout: Option<u64>) -> Result<Vec<f64>> {
        self.check(None, sample)?;
        let trunk = self.trunk(&sample.context, &sample.response, dropout);
        Ok((0..self.n_decoders())
            .map(|k| self.score(Some(k), &trunk, &sample.response))
            .collect())
    }

    /// Log-likelihood of the shared network alone (no adapter).
    pub fn log_prob_shared(&self, sample: &Sample, dropout: Option<u64>) -> Result<f64> {
        self.check(None, sample)?;
        let trunk = self.trunk(&sample.context, &sample.response, dropout);
        Ok(self.score(None, &trunk, &sample.response))
    }

    /// Gradient of `log P(r | c)` through decoder `k` (or no adapter).
    /// Shared gradients are computed only when `with_shared` is set.
    pub fn gradient(
        &self,
        k: Option<usize>,
        sample: &Sample,
        dropout: Option<u64>,
        with_shared: bool,
    ) -> Result<(f64, NeuralGrad)> {
        self.check(k, sample)?;
        let (v, d) = (self.vocab.size(), self.d());
        let response = &sample.response;
        let trunk = self.trunk(&sample.context, response, dropout);
        let steps = response.len();
        let mut shared_grad = with_shared.then(|| SharedParams::zeros(v, d));
        let mut adapter_grad = k.map(|k| self.adapters[k].zero_grad());
        // Gradient reaching each h_t from the output layer.
        let mut dh_out = vec![vec![0.0; d]; steps];
        let mut total = 0.0;
        let mut trace = AdapterTrace::default();
        let mut a = Vec::new();
        for t in 0..steps {
            let g = &trunk.g[t];
            let lp = self.head(k, g, &mut trace, &mut a);
            let y = response[t] as usize;
            total += lp[y];
            let mut dz: Vec<f64> = lp.iter().map(|l| -l.exp()).collect();
            dz[y] += 1.0;
            if let Some(sg) = shared_grad.as_mut() {
                add_outer(&mut sg.w_out, &dz, &a);
                axpy(1.0, &dz, &mut sg.b_out);
            }
            let mut da = vec![0.0; d];
            matvec_t_add(&self.shared.w_out, v, d, &dz, &mut da);
            let mut dg = vec![0.0; d];
            match (k, adapter_grad.as_mut()) {
                (Some(k), Some(ag)) => self.adapters[k].backward(g, &trace, &da, ag, &mut dg),
                _ => dg.copy_from_slice(&da),
            }
            if let Some(m) = &trunk.masks {
                for (x, mi) in dg.iter_mut().zip(&m[t]) {
                    *x *= mi;
                }
            }
            dh_out[t] = dg;
        }

        if let Some(sg) = shared_grad.as_mut() {
            let mut carry = vec![0.0; d];
            for t in (0..steps).rev() {
                let h = &trunk.h[t + 1];
                let dpre: Vec<f64> = dh_out[t]
                    .iter()
                    .zip(&carry)
                    .zip(h)
                    .map(|((a, b), hi)| (a + b) * (1.0 - hi * hi))
                    .collect();
                let input = if t == 0 { BOS } else { response[t - 1] } as usize;
                let x = &self.shared.emb[input * d..(input + 1) * d];
                add_outer(&mut sg.w_in, &dpre, x);
                add_outer(&mut sg.w_rec, &dpre, &trunk.h[t]);
                axpy(1.0, &dpre, &mut sg.b_h);
                matvec_t_add(&self.shared.w_in, d, d, &dpre, &mut sg.emb[input * d..(input + 1) * d]);
                carry = vec![0.0; d];
                matvec_t_add(&self.shared.w_rec, d, d, &dpre, &mut carry);
            }
            let h0 = &trunk.h[0];
            let dpre0: Vec<f64> = carry.iter().zip(h0).map(|(c, h)| c * (1.0 - h * h)).collect();
            add_outer(&mut sg.w_enc, &dpre0, &trunk.mean);
            axpy(1.0, &dpre0, &mut sg.b_enc);
            if !trunk.context.is_empty() {
                let mut dm = vec![0.0; d];
                matvec_t_add(&self.shared.w_enc, d, d, &dpre0, &mut dm);
                let inv = 1.0 / trunk.context.len() as f64;
                for &c in &trunk.context {
                    axpy(inv, &dm, &mut sg.emb[c as usize * d..(c as usize + 1) * d]);
                }
            }
        }
        Ok((
            total,
            NeuralGrad {
                shared: shared_grad,
                adapter: adapter_grad,
            },
        ))
    }

    fn apply(&mut self, k: Option<usize>, grad: &NeuralGrad, step: f64) {
        if let Some(sg) = &grad.shared {
            for (p, g) in self.shared.tensors_mut().into_iter().zip(sg.tensors()) {
                axpy(step, g, p);
            }
        }
        if let (Some(k), Some(ag)) = (k, &grad.adapter) {
            let layer = &mut self.adapters[k];
            axpy(step, &ag.w1, &mut layer.w1);
            axpy(step, &ag.w2, &mut layer.w2);
        }
    }

    fn ascend(&mut self, k: Option<usize>, sample: &Sample, weight: f64, lr: f64, dropout: Option<u64>, shared: bool) -> Result<f64> {
        let (lp, grad) = self.gradient(k, sample, dropout, shared)?;
        let sq = grad.norm_sq();
        if !sq.is_finite() || !lp.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient (log-likelihood {lp}, squared gradient norm {sq}) for decoder {k:?}"
            )));
        }
        let mut step = weight * lr;
        if let Some(cap) = self.config.clip_norm {
            let norm = weight * sq.sqrt();
            if norm > cap {
                step *= cap / norm;
            }
        }
        self.apply(k, &grad, step);
        Ok(lp)
    }

    /// One ascent step on `weight * log P(r | z = k, c)`. Updates decoder
    /// `k`'s adapter, and the shared parameters when `train_shared` is set.
    pub fn grad_step(
        &mut self,
        k: usize,
        sample: &Sample,
        weight: f64,
        lr: f64,
        dropout: Option<u64>,
        train_shared: bool,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Parameter(format!("step weight must be in [0, 1], got {weight}")));
        }
        if weight == 0.0 || lr == 0.0 {
            return self.check(Some(k), sample);
        }
        self.ascend(Some(k), sample, weight, lr, dropout, train_shared).map(|_| ())
    }

    /// Cross-entropy step on the shared network without adapters.
    pub fn shared_step(&mut self, sample: &Sample, lr: f64, dropout: Option<u64>) -> Result<f64> {
        self.ascend(None, sample, 1.0, lr, dropout, true)
    }

    pub fn greedy_decode(&self, k: usize, context: &[Token]) -> Decoded {
        search::greedy(&self.stepper(k, context), self.config.max_response_len)
    }

    pub fn beam_decode(&self, k: usize, context: &[Token], beam: usize) -> Result<Vec<Decoded>> {
        search::beam(&self.stepper(k, context), beam, self.config.max_response_len)
    }

    fn stepper(&self, k: usize, context: &[Token]) -> Stepper<'_> {
        assert!(k < self.n_decoders(), "decoder {k} out of range");
        let (_, h0) = self.initial_state(self.context_window(context));
        Stepper { bank: self, k, h0 }
    }

    /// Per-step next-token distributions along `response` for decoder `k`,
    /// without dropout.
    pub fn step_distributions(&self, k: usize, sample: &Sample) -> Result<Vec<Vec<f64>>> {
        self.check(Some(k), sample)?;
        let trunk = self.trunk(&sample.context, &sample.response, None);
        let mut trace = AdapterTrace::default();
        let mut a = Vec::new();
        Ok(trunk
            .g
            .iter()
            .map(|g| self.head(Some(k), g, &mut trace, &mut a).iter().map(|l| l.exp()).collect())
            .collect())
    }
}

struct Stepper<'a> {
    bank: &'a NeuralBank,
    k: usize,
    h0: Vec<f64>,
}

impl StepModel for Stepper<'_> {
    /// Hidden state after consuming the previous token.
    type State = Vec<f64>;

    fn start(&self) -> Vec<f64> {
        self.bank.recur(&self.h0, BOS)
    }

    fn next_log_probs(&self, h: &Vec<f64>) -> Vec<f64> {
        self.bank
            .head(Some(self.k), h, &mut AdapterTrace::default(), &mut Vec::new())
    }

    fn advance(&self, h: &Vec<f64>, token: Token) -> Vec<f64> {
        self.bank.recur(h, token)
    }
}
