//! Exactly solvable decoders: per decoder and context, a categorical
//! distribution over a fixed template set, observed through a token
//! substitution channel.
//!
//! `P(r | z = k, c) = Σ_t π[k][c][t] · P_ε(r | t)`. With `ε = 0` the channel
//! is the identity and `log_prob` is the log table entry of the matching
//! template.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::search::Decoded;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::seed;
use crate::synthdata::SubstitutionChannel;
use crate::vocab::{format_tokens, strip_eos, Sample, Token, Vocab, EOS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    /// Laplace smoothing added to every count.
    pub alpha: f64,
    /// Channel substitution rate; `None` uses the corpus noise rate.
    pub channel_noise: Option<f64>,
    /// Initial rows are `1 + U(-init_jitter, init_jitter)`, normalized.
    pub init_jitter: f64,
    pub max_response_len: usize,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            channel_noise: None,
            init_jitter: 0.5,
            max_response_len: 16,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if let Some(e) = self.channel_noise {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::Parameter(format!("channel_noise must be in [0, 1), got {e}")));
            }
        }
        if !(0.0..1.0).contains(&self.init_jitter) {
            return Err(Error::Parameter(format!("init_jitter must be in [0, 1), got {}", self.init_jitter)));
        }
        if self.max_response_len == 0 {
            return Err(Error::Parameter("max_response_len must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted template counts indexed `[k][context id][template]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateCounts {
    counts: Vec<Vec<Vec<f64>>>,
}

impl TemplateCounts {
    pub fn add(&mut self, k: usize, context_id: usize, template: usize, weight: f64) {
        self.counts[k][context_id][template] += weight;
    }

    pub fn get(&self, k: usize, context_id: usize, template: usize) -> f64 {
        self.counts[k][context_id][template]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TabularBankData")]
pub struct TabularBank {
    vocab: Vocab,
    config: TabularConfig,
    channel: SubstitutionChannel,
    contexts: Vec<Vec<Token>>,
    templates: Vec<Vec<Vec<Token>>>,
    /// `[k][context id][template]`, each row a distribution.
    tables: Vec<Vec<Vec<f64>>>,
    #[serde(skip)]
    index: HashMap<Vec<Token>, usize>,
}

#[derive(Deserialize)]
struct TabularBankData {
    vocab: Vocab,
    config: TabularConfig,
    channel: SubstitutionChannel,
    contexts: Vec<Vec<Token>>,
    templates: Vec<Vec<Vec<Token>>>,
    tables: Vec<Vec<Vec<f64>>>,
}

impl From<TabularBankData> for TabularBank {
    fn from(d: TabularBankData) -> Self {
        let mut bank = Self {
            vocab: d.vocab,
            config: d.config,
            channel: d.channel,
            contexts: d.contexts,
            templates: d.templates,
            tables: d.tables,
            index: HashMap::new(),
        };
        bank.rebuild_index();
        bank
    }
}

impl TabularBank {
    /// `templates[c]` is the template set of context `c`; bodies exclude EOS.
    pub fn new(
        vocab: Vocab,
        contexts: Vec<Vec<Token>>,
        templates: Vec<Vec<Vec<Token>>>,
        n_decoders: usize,
        channel_noise: f64,
        config: TabularConfig,
        seed_value: u64,
    ) -> Result<Self> {
        config.validate()?;
        if n_decoders == 0 {
            return Err(Error::Parameter("need at least one decoder".into()));
        }
        if contexts.len() != templates.len() {
            return Err(Error::Dimension(format!(
                "{} contexts but {} template sets",
                contexts.len(),
                templates.len()
            )));
        }
        if templates.iter().any(Vec::is_empty) {
            return Err(Error::Parameter("every context needs at least one template".into()));
        }
        let noise = config.channel_noise.unwrap_or(channel_noise);
        let mut tables = Vec::with_capacity(n_decoders);
        for k in 0..n_decoders {
            let mut rng = seed::rng(seed_value, &[seed::TABLE_INIT, k as u64]);
            let rows = templates
                .iter()
                .map(|ts| {
                    let raw: Vec<f64> = ts
                        .iter()
                        .map(|_| {
                            if config.init_jitter > 0.0 {
                                1.0 + rng.gen_range(-config.init_jitter..config.init_jitter)
                            } else {
                                1.0
                            }
                        })
                        .collect();
                    let z: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / z).collect()
                })
                .collect();
            tables.push(rows);
        }
        let mut bank = Self {
            vocab,
            config,
            channel: SubstitutionChannel::new(noise, vocab.n_words()),
            contexts,
            templates,
            tables,
            index: HashMap::new(),
        };
        bank.rebuild_index();
        Ok(bank)
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .contexts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn config(&self) -> &TabularConfig {
        &self.config
    }

    pub fn n_decoders(&self) -> usize {
        self.tables.len()
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn templates(&self, context_id: usize) -> &[Vec<Token>] {
        &self.templates[context_id]
    }

    pub fn table(&self, k: usize, context_id: usize) -> &[f64] {
        &self.tables[k][context_id]
    }

    pub fn set_table(&mut self, k: usize, context_id: usize, row: Vec<f64>) -> Result<()> {
        if row.len() != self.templates[context_id].len() {
            return Err(Error::Dimension(format!(
                "row of length {} for {} templates",
                row.len(),
                self.templates[context_id].len()
            )));
        }
        self.tables[k][context_id] = row;
        Ok(())
    }

    pub fn context_id(&self, context: &[Token]) -> Result<usize> {
        self.index
            .get(context)
            .copied()
            .ok_or_else(|| Error::Domain(format!("unknown context id for [{}]", format_tokens(context))))
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

    /// `log P_ε(r | t)` for every template of the context.
    fn channel_terms(&self, context_id: usize, response: &[Token]) -> Result<Vec<f64>> {
        let body = strip_eos(response);
        let terms: Vec<f64> = self.templates[context_id]
            .iter()
            .map(|t| self.channel.log_likelihood(body, t))
            .collect();
        if terms.iter().all(|t| *t == f64::NEG_INFINITY) {
            return Err(Error::Domain(format!(
                "response [{}] is outside the template support",
                format_tokens(response)
            )));
        }
        Ok(terms)
    }

    fn mix(&self, k: usize, context_id: usize, terms: &[f64]) -> f64 {
        let joint: Vec<f64> = self.tables[k][context_id]
            .iter()
            .zip(terms)
            .map(|(p, l)| p.ln() + l)
            .collect();
        log_sum_exp(&joint).min(0.0)
    }

    pub fn log_prob(&self, k: usize, sample: &Sample) -> Result<f64> {
        self.check_k(k)?;
        sample.validate(&self.vocab)?;
        let c = self.context_id(&sample.context)?;
        let terms = self.channel_terms(c, &sample.response)?;
        Ok(self.mix(k, c, &terms))
    }

    pub fn log_prob_all(&self, sample: &Sample) -> Result<Vec<f64>> {
        sample.validate(&self.vocab)?;
        let c = self.context_id(&sample.context)?;
        let terms = self.channel_terms(c, &sample.response)?;
        Ok((0..self.n_decoders()).map(|k| self.mix(k, c, &terms)).collect())
    }

    /// `P(t | z = k, c, r)` over the context's templates.
    pub fn template_posterior(&self, k: usize, sample: &Sample) -> Result<(usize, Vec<f64>)> {
        self.check_k(k)?;
        let c = self.context_id(&sample.context)?;
        let terms = self.channel_terms(c, &sample.response)?;
        let joint: Vec<f64> = self.tables[k][c]
            .iter()
            .zip(&terms)
            .map(|(p, l)| p.ln() + l)
            .collect();
        let z = log_sum_exp(&joint);
        Ok((c, joint.into_iter().map(|j| (j - z).exp()).collect()))
    }

    pub fn zero_counts(&self) -> TemplateCounts {
        TemplateCounts {
            counts: self
                .tables
                .iter()
                .map(|rows| rows.iter().map(|r| vec![0.0; r.len()]).collect())
                .collect(),
        }
    }

    /// Adds `weight · P(t | k, c, r)` to every template count of decoder `k`.
    pub fn accumulate(&self, counts: &mut TemplateCounts, k: usize, sample: &Sample, weight: f64) -> Result<()> {
        if weight == 0.0 {
            return Ok(());
        }
        let (c, post) = self.template_posterior(k, sample)?;
        for (t, p) in post.into_iter().enumerate() {
            counts.add(k, c, t, weight * p);
        }
        Ok(())
    }

    /// Closed-form maximizer: `(count + α) / (Σ count + α T)`. A row whose
    /// counts are all zero with `α = 0` has no maximizer and is left as is.
    pub fn mstep(&mut self, counts: &TemplateCounts) -> Result<()> {
        let alpha = self.config.alpha;
        for (k, rows) in counts.counts.iter().enumerate() {
            for (c, row) in rows.iter().enumerate() {
                if row.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "invalid template count for decoder {k}, context {c}"
                    )));
                }
                let total: f64 = row.iter().sum::<f64>() + alpha * row.len() as f64;
                if total == 0.0 {
                    continue;
                }
                self.tables[k][c] = row.iter().map(|w| (w + alpha) / total).collect();
            }
        }
        Ok(())
    }

    fn ranked(&self, k: usize, c: usize) -> Vec<Decoded> {
        let mut out: Vec<(usize, Decoded)> = self.templates[c]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let cap = self.config.max_response_len;
                let truncated = t.len() + 1 > cap;
                let mut tokens: Vec<Token> = t.clone();
                tokens.push(EOS);
                tokens.truncate(cap);
                let terms: Vec<f64> = self.templates[c]
                    .iter()
                    .map(|u| self.channel.log_likelihood(t, u))
                    .collect();
                let log_prob = self.mix(k, c, &terms);
                (
                    i,
                    Decoded {
                        tokens,
                        log_prob,
                        truncated,
                    },
                )
            })
            .collect();
        out.sort_by(|a, b| b.1.log_prob.total_cmp(&a.1.log_prob).then(a.0.cmp(&b.0)));
        out.into_iter().map(|(_, d)| d).collect()
    }

    /// The most probable template response (lowest template index on ties).
    pub fn greedy_decode(&self, k: usize, context: &[Token]) -> Result<Decoded> {
        self.check_k(k)?;
        let c = self.context_id(context)?;
        Ok(self.ranked(k, c).swap_remove(0))
    }

    /// The `beam` most probable template responses, best first.
    pub fn beam_decode(&self, k: usize, context: &[Token], beam: usize) -> Result<Vec<Decoded>> {
        if beam < 1 {
            return Err(Error::Parameter("beam width must be at least 1".into()));
        }
        self.check_k(k)?;
        let c = self.context_id(context)?;
        let mut out = self.ranked(k, c);
        out.truncate(beam);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(alpha: f64, noise: f64) -> TabularBank {
        let templates = vec![vec![vec![3, 4], vec![5, 6], vec![7, 8, 9], vec![10]]];
        let config = TabularConfig {
            alpha,
            init_jitter: 0.0,
            ..TabularConfig::default()
        };
        TabularBank::new(Vocab::new(12).unwrap(), vec![vec![3]], templates, 2, noise, config, 1).unwrap()
    }

    fn sample(body: &[Token]) -> Sample {
        let mut r = body.to_vec();
        r.push(EOS);
        Sample::new(vec![3], r)
    }

    #[test]
    fn uniform_row_gives_log_quarter() {
        let b = bank(0.1, 0.0);
        assert!((b.log_prob(0, &sample(&[5, 6])).unwrap() - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn laplace_uniform_after_empty_counts() {
        let mut b = bank(1.0, 0.0);
        b.set_table(0, 0, vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let counts = b.zero_counts();
        b.mstep(&counts).unwrap();
        assert_eq!(b.table(0, 0), &[0.25; 4]);
        assert!((b.log_prob(0, &sample(&[10])).unwrap() - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mstep_examples() {
        let templates = vec![vec![vec![3], vec![4]]];
        let make = |alpha| {
            TabularBank::new(
                Vocab::new(6).unwrap(),
                vec![vec![3]],
                templates.clone(),
                1,
                0.0,
                TabularConfig {
                    alpha,
                    ..TabularConfig::default()
                },
                0,
            )
            .unwrap()
        };
        let mut b = make(0.0);
        let mut counts = b.zero_counts();
        counts.add(0, 0, 0, 3.0);
        counts.add(0, 0, 1, 1.0);
        b.mstep(&counts).unwrap();
        assert_eq!(b.table(0, 0), &[0.75, 0.25]);

        let mut b = make(2.0);
        let mut counts = b.zero_counts();
        counts.add(0, 0, 0, 2.0);
        counts.add(0, 0, 1, 2.0);
        b.mstep(&counts).unwrap();
        assert_eq!(b.table(0, 0), &[0.5, 0.5]);
    }

    #[test]
    fn rows_sum_to_one_after_init() {
        let templates = vec![vec![vec![3], vec![4], vec![5]]; 3];
        let b = TabularBank::new(
            Vocab::new(8).unwrap(),
            vec![vec![3], vec![4], vec![5]],
            templates,
            4,
            0.05,
            TabularConfig::default(),
            9,
        )
        .unwrap();
        for k in 0..4 {
            for c in 0..3 {
                assert!((b.table(k, c).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(b.table(k, c).iter().all(|p| *p > 0.0));
            }
        }
    }

    #[test]
    fn single_template_decodes_to_itself() {
        let mut b = bank(0.1, 0.0);
        b.set_table(1, 0, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(b.greedy_decode(1, &[3]).unwrap().tokens, vec![7, 8, 9, EOS]);
    }

    #[test]
    fn full_beam_lists_templates_by_probability() {
        let mut b = bank(0.1, 0.0);
        b.set_table(0, 0, vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        let out = b.beam_decode(0, &[3], 4).unwrap();
        let bodies: Vec<Vec<Token>> = out.iter().map(|d| d.body().to_vec()).collect();
        assert_eq!(bodies, vec![vec![5, 6], vec![10], vec![7, 8, 9], vec![3, 4]]);
        assert_eq!(b.beam_decode(0, &[3], 1).unwrap()[0], b.greedy_decode(0, &[3]).unwrap());
    }

    #[test]
    fn noisy_channel_mixes_templates() {
        let b = bank(0.1, 0.2);
        let chan = SubstitutionChannel::new(0.2, 9);
        let r = [5, 4];
        let direct = (0.25 * chan.log_likelihood(&r, &[3, 4]).exp() + 0.25 * chan.log_likelihood(&r, &[5, 6]).exp()).ln();
        assert!((b.log_prob(0, &sample(&r)).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let b = bank(0.1, 0.0);
        assert!(matches!(b.log_prob(0, &Sample::new(vec![4], vec![3, 4, EOS])), Err(Error::Domain(_))));
        assert!(matches!(b.log_prob(0, &sample(&[4, 4, 4, 4])), Err(Error::Domain(_))));
    }
}
