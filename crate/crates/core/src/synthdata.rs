//! Synthetic one-to-many dialogue corpora with planted response modes.
//!
//! Every context owns `M` response templates. A sample draws a context
//! uniformly, a mode from `mode_weights`, and emits that mode's template with
//! each token independently replaced, with probability `noise_rate`, by a
//! uniform draw from the non-reserved vocabulary. The generative model is
//! known exactly, so the true posterior over modes is available in closed
//! form.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::vocab::{format_tokens, parse_tokens, strip_eos, Token, Vocab, EOS, FIRST_WORD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub vocab_size: usize,
    pub n_contexts: usize,
    pub modes_per_context: usize,
    /// Inclusive context length range.
    pub context_len: [usize; 2],
    /// Inclusive template length range, EOS excluded.
    pub template_len: [usize; 2],
    pub noise_rate: f64,
    /// Prior over modes; `None` means uniform.
    pub mode_weights: Option<Vec<f64>>,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            vocab_size: 50,
            n_contexts: 20,
            modes_per_context: 4,
            context_len: [3, 6],
            template_len: [6, 10],
            noise_rate: 0.05,
            mode_weights: None,
            n_train: 20_000,
            n_valid: 1_000,
            n_test: 1_000,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Spec(msg));
        if self.vocab_size < 4 {
            return fail(format!("vocab_size must be >= 4, got {}", self.vocab_size));
        }
        if self.n_contexts == 0 {
            return fail("n_contexts must be positive".into());
        }
        if self.modes_per_context == 0 {
            return fail("modes_per_context must be >= 1".into());
        }
        for (name, [lo, hi]) in [
            ("context_len", self.context_len),
            ("template_len", self.template_len),
        ] {
            if lo == 0 || lo > hi {
                return fail(format!("{name} range [{lo}, {hi}] is invalid"));
            }
        }
        if !(0.0..=0.3).contains(&self.noise_rate) {
            return fail(format!("noise_rate must be in [0, 0.3], got {}", self.noise_rate));
        }
        if let Some(w) = &self.mode_weights {
            if w.len() != self.modes_per_context {
                return fail(format!(
                    "mode_weights has {} entries, expected {}",
                    w.len(),
                    self.modes_per_context
                ));
            }
            if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return fail("mode_weights must be non-negative and sum to 1".into());
            }
        }
        let n_words = (self.vocab_size - FIRST_WORD as usize) as f64;
        let room = |[lo, hi]: [usize; 2]| -> f64 {
            (lo..=hi).map(|l| n_words.powi(l as i32)).sum()
        };
        if room(self.context_len) < self.n_contexts as f64 {
            return fail("not enough distinct contexts for the requested count".into());
        }
        if room(self.template_len) < self.modes_per_context as f64 {
            return fail("not enough distinct templates for the requested mode count".into());
        }
        Ok(())
    }

    pub fn vocab(&self) -> Vocab {
        Vocab::new(self.vocab_size).expect("validated")
    }

    pub fn weights(&self) -> Vec<f64> {
        self.mode_weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.modes_per_context as f64; self.modes_per_context])
    }
}

/// Token substitution noise: each position keeps its template token with
/// probability `1 - rate`, otherwise draws uniformly from the `n_words`
/// non-reserved ids (possibly the same token).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionChannel {
    rate: f64,
    log_keep: f64,
    log_swap: f64,
}

impl SubstitutionChannel {
    pub fn new(rate: f64, n_words: usize) -> Self {
        let n = n_words as f64;
        Self {
            rate,
            log_keep: (1.0 - rate + rate / n).ln(),
            log_swap: (rate / n).ln(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `log P(body | template)`; `-inf` on a length mismatch.
    pub fn log_likelihood(&self, body: &[Token], template: &[Token]) -> f64 {
        if body.len() != template.len() {
            return f64::NEG_INFINITY;
        }
        let matches = body.iter().zip(template).filter(|(a, b)| a == b).count();
        let mismatches = body.len() - matches;
        if mismatches == 0 {
            return matches as f64 * self.log_keep;
        }
        matches as f64 * self.log_keep + mismatches as f64 * self.log_swap
    }
}

/// The generative model: contexts, their templates, mode prior and noise channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusModel {
    vocab: Vocab,
    contexts: Vec<Vec<Token>>,
    templates: Vec<Vec<Vec<Token>>>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    channel: SubstitutionChannel,
    index: HashMap<Vec<Token>, usize>,
}

fn random_tokens<R: Rng>(rng: &mut R, vocab: &Vocab, [lo, hi]: [usize; 2]) -> Vec<Token> {
    let len = rng.gen_range(lo..=hi);
    (0..len)
        .map(|_| rng.gen_range(FIRST_WORD..vocab.size() as Token))
        .collect()
}

impl CorpusModel {
    pub fn from_spec(spec: &CorpusSpec) -> Result<Self> {
        spec.validate()?;
        let vocab = spec.vocab();

        let mut rng = seed::rng(spec.seed, &[seed::CONTEXTS]);
        let mut seen = HashSet::new();
        let mut contexts = Vec::with_capacity(spec.n_contexts);
        while contexts.len() < spec.n_contexts {
            let c = random_tokens(&mut rng, &vocab, spec.context_len);
            if seen.insert(c.clone()) {
                contexts.push(c);
            }
        }

        let mut rng = seed::rng(spec.seed, &[seed::TEMPLATES]);
        let templates = (0..spec.n_contexts)
            .map(|_| {
                let mut mine = HashSet::new();
                let mut out = Vec::with_capacity(spec.modes_per_context);
                while out.len() < spec.modes_per_context {
                    let t = random_tokens(&mut rng, &vocab, spec.template_len);
                    if mine.insert(t.clone()) {
                        out.push(t);
                    }
                }
                out
            })
            .collect();

        Ok(Self::new(vocab, contexts, templates, spec.weights(), spec.noise_rate))
    }

    pub fn new(
        vocab: Vocab,
        contexts: Vec<Vec<Token>>,
        templates: Vec<Vec<Vec<Token>>>,
        weights: Vec<f64>,
        noise_rate: f64,
    ) -> Self {
        let index = contexts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            vocab,
            contexts,
            templates,
            weights,
            log_weights,
            channel: SubstitutionChannel::new(noise_rate, vocab.n_words()),
            index,
        }
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn contexts(&self) -> &[Vec<Token>] {
        &self.contexts
    }

    pub fn context(&self, id: usize) -> &[Token] {
        &self.contexts[id]
    }

    /// Template bodies (no EOS) of one context, indexed by mode.
    pub fn templates(&self, context_id: usize) -> &[Vec<Token>] {
        &self.templates[context_id]
    }

    pub fn noise_rate(&self) -> f64 {
        self.channel.rate()
    }

    pub fn channel(&self) -> SubstitutionChannel {
        self.channel
    }

    pub fn context_id(&self, context: &[Token]) -> Result<usize> {
        self.index
            .get(context)
            .copied()
            .ok_or_else(|| Error::Domain(format!("unknown context [{}]", format_tokens(context))))
    }

    /// Draws `(context_id, mode, response)`; the response ends with EOS.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> (usize, usize, Vec<Token>) {
        let mut response = Vec::new();
        let (c, mode) = self.draw_into(rng, &mut response);
        response.push(EOS);
        (c, mode, response)
    }

    /// Like [`CorpusModel::draw`] but writes the body (no EOS) into `body`.
    pub fn draw_into<R: Rng>(&self, rng: &mut R, body: &mut Vec<Token>) -> (usize, usize) {
        let c = rng.gen_range(0..self.contexts.len());
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut mode = self.weights.len() - 1;
        for (m, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                mode = m;
                break;
            }
        }
        body.clear();
        for &t in &self.templates[c][mode] {
            body.push(if rng.gen::<f64>() < self.channel.rate() {
                rng.gen_range(FIRST_WORD..self.vocab.size() as Token)
            } else {
                t
            });
        }
        (c, mode)
    }

    /// `log P(body | template)` under the substitution channel.
    pub fn channel_log_likelihood(&self, body: &[Token], template: &[Token]) -> f64 {
        self.channel.log_likelihood(body, template)
    }

    /// Exact posterior over modes for a known context id.
    pub fn posterior_by_id(&self, context_id: usize, response: &[Token]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_modes()];
        self.posterior_into(context_id, strip_eos(response), &mut out)?;
        Ok(out)
    }

    /// Writes the posterior for a response body (no EOS) into `out`.
    pub fn posterior_into(&self, context_id: usize, body: &[Token], out: &mut [f64]) -> Result<()> {
        for ((o, t), lw) in out.iter_mut().zip(&self.templates[context_id]).zip(&self.log_weights) {
            *o = lw + self.channel.log_likelihood(body, t);
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Domain(
                "response has zero probability under every mode".into(),
            ));
        }
        let mut z = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSample {
    pub context: Vec<Token>,
    pub response: Vec<Token>,
    pub context_id: usize,
    pub mode: usize,
}

impl LabeledSample {
    pub fn sample(&self) -> crate::vocab::Sample {
        crate::vocab::Sample::new(self.context.clone(), self.response.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DedupReport {
    pub valid_removed: usize,
    pub test_removed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub spec: CorpusSpec,
    pub model: CorpusModel,
    pub train: Vec<LabeledSample>,
    pub valid: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

impl LabeledCorpus {
    pub fn vocab(&self) -> Vocab {
        self.model.vocab()
    }

    pub fn templates(&self, context_id: usize) -> &[Vec<Token>] {
        self.model.templates(context_id)
    }
}

/// Generates all three splits, then removes split overlap with [`dedup_splits`].
pub fn gen_corpus(spec: &CorpusSpec) -> Result<(LabeledCorpus, DedupReport)> {
    let model = CorpusModel::from_spec(spec)?;
    let split = |idx: u64, n: usize| -> Vec<LabeledSample> {
        let mut rng = seed::rng(spec.seed, &[seed::SPLIT, idx]);
        (0..n)
            .map(|_| {
                let (c, mode, response) = model.draw(&mut rng);
                LabeledSample {
                    context: model.context(c).to_vec(),
                    response,
                    context_id: c,
                    mode,
                }
            })
            .collect()
    };
    let corpus = LabeledCorpus {
        train: split(0, spec.n_train),
        valid: split(1, spec.n_valid),
        test: split(2, spec.n_test),
        spec: spec.clone(),
        model,
    };
    Ok(dedup_splits(corpus))
}

/// Drops valid samples whose exact (context, response) pair occurs in train,
/// and test samples whose pair occurs in train or valid.
pub fn dedup_splits(mut corpus: LabeledCorpus) -> (LabeledCorpus, DedupReport) {
    let key = |s: &LabeledSample| (s.context.clone(), s.response.clone());
    let mut seen: HashSet<_> = corpus.train.iter().map(key).collect();

    let before = corpus.valid.len();
    corpus.valid.retain(|s| !seen.contains(&key(s)));
    let valid_removed = before - corpus.valid.len();
    seen.extend(corpus.valid.iter().map(key));

    let before = corpus.test.len();
    corpus.test.retain(|s| !seen.contains(&key(s)));
    let test_removed = before - corpus.test.len();

    (
        corpus,
        DedupReport {
            valid_removed,
            test_removed,
        },
    )
}

/// Exact Bayes posterior over the planted modes of `context`.
pub fn true_posterior(corpus: &LabeledCorpus, context: &[Token], response: &[Token]) -> Result<Vec<f64>> {
    let id = corpus.model.context_id(context)?;
    corpus.model.posterior_by_id(id, response)
}

const HEADER_PREFIX: &str = "# spec ";

/// Writes one split: a header line carrying the spec, then
/// `context_tokens TAB response_tokens TAB mode_label` per sample.
pub fn write_split<W: Write>(out: W, spec: &CorpusSpec, samples: &[LabeledSample]) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{HEADER_PREFIX}{}", serde_json::to_string(spec)?)?;
    for s in samples {
        writeln!(
            out,
            "{}\t{}\t{}",
            format_tokens(&s.context),
            format_tokens(&s.response),
            s.mode
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a split written by [`write_split`]. Context ids are resolved
/// against `model`.
pub fn read_split<R: BufRead>(reader: R, model: &CorpusModel) -> Result<(CorpusSpec, Vec<LabeledSample>)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty corpus file".into()))??;
    let spec_json = header
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| Error::Parse("missing spec header line".into()))?;
    let spec: CorpusSpec = serde_json::from_str(spec_json)?;
    let vocab = model.vocab();
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected 3 tab-separated fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let context = parse_tokens(fields[0])?;
        let response = parse_tokens(fields[1])?;
        let mode = fields[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("line {}: bad mode label: {e}", lineno + 2)))?;
        let sample = crate::vocab::Sample::new(context, response);
        sample.validate(&vocab)?;
        if mode >= model.n_modes() {
            return Err(Error::Parse(format!("line {}: mode {mode} out of range", lineno + 2)));
        }
        samples.push(LabeledSample {
            context_id: model.context_id(&sample.context)?,
            context: sample.context,
            response: sample.response,
            mode,
        });
    }
    Ok((spec, samples))
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "valid", "test"];

/// Writes `train.tsv`, `valid.tsv`, `test.tsv`, the `spec.json` sidecar and a
/// `templates.tsv` listing of the planted modes.
pub fn save_corpus(dir: &Path, corpus: &LabeledCorpus) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, split) in SPLIT_NAMES
        .iter()
        .zip([&corpus.train, &corpus.valid, &corpus.test])
    {
        write_split(fs::File::create(dir.join(format!("{name}.tsv")))?, &corpus.spec, split)?;
    }
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&corpus.spec)? + "\n")?;
    let mut out = BufWriter::new(fs::File::create(dir.join("templates.tsv"))?);
    for c in 0..corpus.model.n_contexts() {
        for (m, t) in corpus.templates(c).iter().enumerate() {
            writeln!(
                out,
                "{c}\t{}\t{m}\t{}",
                format_tokens(corpus.model.context(c)),
                format_tokens(t)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Loads a corpus directory written by [`save_corpus`]. The planted modes are
/// regenerated from the spec sidecar; sample files must carry the same spec.
pub fn load_corpus(dir: &Path) -> Result<LabeledCorpus> {
    let spec: CorpusSpec = serde_json::from_str(&fs::read_to_string(dir.join("spec.json"))?)?;
    let model = CorpusModel::from_spec(&spec)?;
    let mut splits = Vec::with_capacity(3);
    for name in SPLIT_NAMES {
        let file = fs::File::open(dir.join(format!("{name}.tsv")))?;
        let (file_spec, samples) = read_split(BufReader::new(file), &model)?;
        if file_spec != spec {
            return Err(Error::Compatibility(format!(
                "{name}.tsv header does not match spec.json"
            )));
        }
        splits.push(samples);
    }
    let test = splits.pop().unwrap();
    let valid = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(LabeledCorpus {
        spec,
        model,
        train,
        valid,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            n_contexts: 5,
            n_train: 500,
            n_valid: 100,
            n_test: 100,
            seed: 3,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn noiseless_single_mode_repeats_template() {
        let spec = CorpusSpec {
            noise_rate: 0.0,
            modes_per_context: 1,
            ..small_spec()
        };
        let (corpus, _) = gen_corpus(&spec).unwrap();
        for s in &corpus.train {
            assert_eq!(strip_eos(&s.response), corpus.templates(s.context_id)[0].as_slice());
            assert_eq!(s.mode, 0);
        }
    }

    #[test]
    fn mode_frequencies_within_three_sigma() {
        let spec = CorpusSpec {
            n_contexts: 1,
            noise_rate: 0.0,
            n_train: 10_000,
            n_valid: 0,
            n_test: 0,
            ..small_spec()
        };
        let (corpus, _) = gen_corpus(&spec).unwrap();
        let n = corpus.train.len() as f64;
        let sigma = (0.25f64 * 0.75 / n).sqrt();
        for m in 0..4 {
            let freq = corpus.train.iter().filter(|s| s.mode == m).count() as f64 / n;
            assert!((freq - 0.25).abs() <= 3.0 * sigma, "mode {m}: {freq}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_corpus(&small_spec()).unwrap();
        let b = gen_corpus(&small_spec()).unwrap();
        assert_eq!(a, b);
        let other = gen_corpus(&CorpusSpec { seed: 4, ..small_spec() }).unwrap();
        assert_ne!(a.0.train, other.0.train);
    }

    #[test]
    fn spec_validation() {
        for bad in [
            CorpusSpec { modes_per_context: 0, ..small_spec() },
            CorpusSpec { noise_rate: 0.5, ..small_spec() },
            CorpusSpec { mode_weights: Some(vec![0.5, 0.5]), ..small_spec() },
            CorpusSpec { mode_weights: Some(vec![0.5, 0.2, 0.2, 0.2]), ..small_spec() },
            CorpusSpec { template_len: [5, 4], ..small_spec() },
        ] {
            assert!(matches!(gen_corpus(&bad), Err(Error::Spec(_))), "{bad:?}");
        }
    }

    #[test]
    fn noiseless_posterior_is_one_hot() {
        let spec = CorpusSpec { noise_rate: 0.0, ..small_spec() };
        let (corpus, _) = gen_corpus(&spec).unwrap();
        let ctx = corpus.model.context(0).to_vec();
        let mut r = corpus.templates(0)[2].clone();
        r.push(EOS);
        let p = true_posterior(&corpus, &ctx, &r).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0]);
        for s in &corpus.train {
            let p = true_posterior(&corpus, &s.context, &s.response).unwrap();
            assert_eq!(p[s.mode], 1.0);
        }
    }

    #[test]
    fn equidistant_response_splits_evenly() {
        let vocab = Vocab::new(10).unwrap();
        let model = CorpusModel::new(
            vocab,
            vec![vec![3]],
            vec![vec![vec![4, 5, 6], vec![7, 5, 6], vec![9, 9, 9]]],
            vec![1.0 / 3.0; 3],
            0.1,
        );
        // [8, 5, 6] is one substitution away from both of the first two templates.
        let p = model.posterior_by_id(0, &[8, 5, 6, EOS]).unwrap();
        assert!((p[0] - p[1]).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] < p[0]);
    }

    #[test]
    fn posterior_matches_direct_enumeration() {
        let (corpus, _) = gen_corpus(&small_spec()).unwrap();
        let n_words = corpus.vocab().n_words() as f64;
        let rho = corpus.spec.noise_rate;
        for s in corpus.train.iter().take(50) {
            let body = strip_eos(&s.response);
            let joint: Vec<f64> = corpus
                .templates(s.context_id)
                .iter()
                .map(|t| {
                    if t.len() != body.len() {
                        return 0.0;
                    }
                    let mut p = 0.25;
                    for (a, b) in body.iter().zip(t) {
                        p *= if a == b { 1.0 - rho + rho / n_words } else { rho / n_words };
                    }
                    p
                })
                .collect();
            let z: f64 = joint.iter().sum();
            let p = true_posterior(&corpus, &s.context, &s.response).unwrap();
            for (a, b) in p.iter().zip(&joint) {
                assert!((a - b / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unknown_context_is_domain_error() {
        let (corpus, _) = gen_corpus(&small_spec()).unwrap();
        assert!(matches!(
            true_posterior(&corpus, &[49, 49, 49, 49, 49, 49, 49], &[3, EOS]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dedup_cases() {
        let (corpus, _) = gen_corpus(&small_spec()).unwrap();

        let mut disjoint = corpus.clone();
        disjoint.valid.clear();
        disjoint.test.clear();
        let (_, rep) = dedup_splits(disjoint);
        assert_eq!(rep, DedupReport::default());

        let mut copy = corpus.clone();
        copy.test = copy.train.clone();
        let n = copy.test.len();
        let (out, rep) = dedup_splits(copy);
        assert!(out.test.is_empty());
        assert_eq!(rep.test_removed, n);

        let mut one = corpus.clone();
        one.valid.clear();
        one.test = vec![LabeledSample {
            context: one.train[0].context.clone(),
            response: vec![49, 48, 47, 46, 45, 44, 43, 42, 41, 40, 39, 38, 37, 36, 35, EOS],
            context_id: one.train[0].context_id,
            mode: 0,
        }];
        one.test.push(one.train[0].clone());
        let (out, rep) = dedup_splits(one);
        assert_eq!(rep.test_removed, 1);
        assert_eq!(out.test.len(), 1);
    }

    #[test]
    fn splits_do_not_overlap() {
        let (corpus, _) = gen_corpus(&small_spec()).unwrap();
        let key = |s: &LabeledSample| (s.context.clone(), s.response.clone());
        let train: HashSet<_> = corpus.train.iter().map(key).collect();
        let valid: HashSet<_> = corpus.valid.iter().map(key).collect();
        assert!(corpus.valid.iter().all(|s| !train.contains(&key(s))));
        assert!(corpus.test.iter().all(|s| !train.contains(&key(s)) && !valid.contains(&key(s))));
    }

    #[test]
    fn file_round_trip() {
        let (corpus, _) = gen_corpus(&small_spec()).unwrap();
        let dir = std::env::temp_dir().join(format!("eqhard-synth-{}", std::process::id()));
        save_corpus(&dir, &corpus).unwrap();
        let loaded = load_corpus(&dir).unwrap();
        assert_eq!(loaded, corpus);
        fs::remove_dir_all(&dir).unwrap();
    }
}
