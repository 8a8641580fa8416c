//! Independent oracles shared by the integration tests and the acceptance
//! runner. They favor plain loops over speed.

#![allow(dead_code)]

use eqhard::decoders::neural::SHARED_TENSORS;
use eqhard::decoders::{AdapterInit, NeuralBank, NeuralConfig};
use eqhard::vocab::{Sample, Vocab, EOS};
use rand::Rng;

/// All length-`n` windows as owned vectors.
fn grams(tokens: &[u32], n: usize) -> Vec<Vec<u32>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

fn occurrences(list: &[Vec<u32>], g: &[u32]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

/// Sentence BLEU by linear scans: clipped precisions, add-one on zero
/// precisions, closest-reference brevity penalty.
pub fn bleu_oracle(hyp: &[u32], refs: &[Vec<u32>], max_n: usize) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut product = 1.0f64;
    for n in 1..=max_n {
        let h = grams(hyp, n);
        let mut distinct: Vec<Vec<u32>> = Vec::new();
        for g in &h {
            if !distinct.contains(g) {
                distinct.push(g.clone());
            }
        }
        let mut clipped = 0;
        for g in &distinct {
            let mut best = 0;
            for r in refs {
                best = best.max(occurrences(&grams(r, n), g));
            }
            clipped += occurrences(&h, g).min(best);
        }
        let p = if clipped == 0 {
            1.0 / (h.len() as f64 + 1.0)
        } else {
            clipped as f64 / h.len() as f64
        };
        product *= p;
    }
    let c = hyp.len() as i64;
    let mut r = refs[0].len() as i64;
    for x in refs {
        let l = x.len() as i64;
        if (l - c).abs() < (r - c).abs() || ((l - c).abs() == (r - c).abs() && l < r) {
            r = l;
        }
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * product.powf(1.0 / max_n as f64)
}

/// Precision, recall and F of one context by the double loop over pairs.
pub fn prf_oracle(hyps: &[Vec<u32>], refs: &[Vec<u32>], max_n: usize) -> (f64, f64) {
    let mut p = 0.0;
    for h in hyps {
        let mut best = 0.0f64;
        for r in refs {
            best = best.max(bleu_oracle(h, std::slice::from_ref(r), max_n));
        }
        p += best;
    }
    let mut rc = 0.0;
    for r in refs {
        let mut best = 0.0f64;
        for h in hyps {
            best = best.max(bleu_oracle(r, std::slice::from_ref(h), max_n));
        }
        rc += best;
    }
    (p / hyps.len() as f64, rc / refs.len() as f64)
}

/// Distinct n-grams over total n-grams, counted with a sorted list.
pub fn dist_oracle(hyps: &[Vec<u32>], n: usize) -> f64 {
    let mut all: Vec<Vec<u32>> = hyps.iter().flat_map(|h| grams(h, n)).collect();
    let total = all.len();
    if total == 0 {
        return 0.0;
    }
    all.sort();
    all.dedup();
    all.len() as f64 / total as f64
}

pub fn random_sentence<R: Rng>(rng: &mut R, max_len: usize, alphabet: u32) -> Vec<u32> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| rng.gen_range(0..alphabet)).collect()
}

pub const GRAD_EPS: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Toy network: d = 4, d' = 2, V = 6, two decoders, no dropout or clipping.
pub fn toy_bank(seed: u64) -> NeuralBank {
    let config = NeuralConfig {
        hidden: 4,
        adapter_inner: 2,
        dropout: 0.0,
        adapter_init: AdapterInit::Random,
        random_init_scale: 1.5,
        clip_norm: None,
        ..NeuralConfig::default()
    };
    NeuralBank::new(Vocab::new(6).unwrap(), 2, config, seed).unwrap()
}

pub fn toy_samples() -> Vec<Sample> {
    vec![
        Sample::new(vec![3, 4, 5], vec![4, 3, 5, EOS]),
        Sample::new(vec![5], vec![3, 3, EOS]),
        Sample::new(vec![4, 4], vec![EOS]),
    ]
}

/// Central difference of `log P(r | z = k, c)` along one scalar parameter.
pub fn numeric<F>(bank: &NeuralBank, sample: &Sample, k: usize, mut touch: F) -> f64
where
    F: FnMut(&mut NeuralBank, f64),
{
    let mut plus = bank.clone();
    touch(&mut plus, GRAD_EPS);
    let mut minus = bank.clone();
    touch(&mut minus, -GRAD_EPS);
    (plus.log_prob(k, sample, None).unwrap() - minus.log_prob(k, sample, None).unwrap()) / (2.0 * GRAD_EPS)
}

/// Worst relative error, per tensor name, between the analytic gradient and
/// central differences over every parameter, sample and decoder.
pub fn gradient_errors(bank: &NeuralBank) -> Vec<(String, f64)> {
    let mut worst: Vec<(String, f64)> = SHARED_TENSORS
        .iter()
        .map(|s| s.to_string())
        .chain(["adapter.w1".to_string(), "adapter.w2".to_string()])
        .map(|s| (s, 0.0))
        .collect();
    for sample in toy_samples() {
        for k in 0..bank.n_decoders() {
            let (_, grad) = bank.gradient(Some(k), &sample, None, true).unwrap();
            let shared = grad.shared.as_ref().unwrap();
            for ti in 0..SHARED_TENSORS.len() {
                let analytic = shared.tensors()[ti];
                for i in 0..analytic.len() {
                    let n = numeric(bank, &sample, k, |b, e| b.shared_mut().tensors_mut()[ti][i] += e);
                    worst[ti].1 = worst[ti].1.max(rel_err(analytic[i], n));
                }
            }
            let ag = grad.adapter.as_ref().unwrap();
            let at = SHARED_TENSORS.len();
            for i in 0..ag.w1.len() {
                let n = numeric(bank, &sample, k, |b, e| b.adapter_mut(k).weights_mut().0[i] += e);
                worst[at].1 = worst[at].1.max(rel_err(ag.w1[i], n));
            }
            for i in 0..ag.w2.len() {
                let n = numeric(bank, &sample, k, |b, e| b.adapter_mut(k).weights_mut().1[i] += e);
                worst[at + 1].1 = worst[at + 1].1.max(rel_err(ag.w2[i], n));
            }
        }
    }
    worst
}
