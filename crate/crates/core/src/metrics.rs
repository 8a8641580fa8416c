//! Multi-response evaluation: BLEU precision/recall/F, Dist-n,
//! Pairwise-BLEU, decoder assignment statistics and planted-mode coverage.
//!
//! All scores are in `[0, 1]`; reports scale them by 100 when written.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::em::TrainLog;
use crate::error::{Error, Result};

fn check_order(max_n: usize) -> Result<()> {
    if !(1..=2).contains(&max_n) {
        return Err(Error::Parameter(format!("BLEU order must be 1 or 2, got {max_n}")));
    }
    Ok(())
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU of `hyp` against `refs` up to order `max_n`.
///
/// Modified precisions clip each hypothesis n-gram count by its largest count
/// in any single reference. A precision with no matches is smoothed to
/// `1 / (total + 1)`. The brevity penalty uses the reference length closest
/// to the hypothesis length (shorter wins ties). An empty hypothesis scores 0.
pub fn sentence_bleu<T: Eq + Hash, R: AsRef<[T]>>(hyp: &[T], refs: &[R], max_n: usize) -> Result<f64> {
    check_order(max_n)?;
    if refs.is_empty() {
        return Err(Error::Parameter("sentence_bleu needs at least one reference".into()));
    }
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let hyp_counts = ngram_counts(hyp, n);
        let total: usize = hyp_counts.values().sum();
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r.as_ref(), n)).collect();
        let clipped: usize = hyp_counts
            .iter()
            .map(|(g, &c)| {
                let best = ref_counts
                    .iter()
                    .map(|rc| rc.get(g).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                c.min(best)
            })
            .sum();
        let p = if clipped == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            clipped as f64 / total as f64
        };
        log_sum += p.ln() / max_n as f64;
    }
    let c = hyp.len();
    let r = refs
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty refs");
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(bp * log_sum.exp())
}

/// Hypotheses and references for one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet<T> {
    pub hypotheses: Vec<Vec<T>>,
    pub references: Vec<Vec<T>>,
}

impl<T> ResponseSet<T> {
    pub fn new(hypotheses: Vec<Vec<T>>, references: Vec<Vec<T>>) -> Self {
        Self {
            hypotheses,
            references,
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            hypotheses: self.references,
            references: self.hypotheses,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    xs.sum::<f64>() / n as f64
}

fn best_match<T: Eq + Hash>(x: &[T], others: &[Vec<T>], max_n: usize) -> Result<f64> {
    let mut best = 0.0f64;
    for o in others {
        best = best.max(sentence_bleu(x, std::slice::from_ref(o), max_n)?);
    }
    Ok(best)
}

/// Precision averages, over hypotheses, the best BLEU against any single
/// reference; recall averages, over references, the best BLEU of the
/// reference scored against any single hypothesis. Both are per-context
/// averages, then averaged over contexts; F is their harmonic mean.
pub fn bleu_prf<T: Eq + Hash>(sets: &[ResponseSet<T>], max_n: usize) -> Result<Prf> {
    check_order(max_n)?;
    if sets.is_empty() {
        return Err(Error::Parameter("bleu_prf needs at least one context".into()));
    }
    let mut ps = Vec::with_capacity(sets.len());
    let mut rs = Vec::with_capacity(sets.len());
    for set in sets {
        if set.hypotheses.is_empty() || set.references.is_empty() {
            return Err(Error::Parameter("every context needs hypotheses and references".into()));
        }
        let p = set
            .hypotheses
            .iter()
            .map(|h| best_match(h, &set.references, max_n))
            .collect::<Result<Vec<_>>>()?;
        let r = set
            .references
            .iter()
            .map(|r| best_match(r, &set.hypotheses, max_n))
            .collect::<Result<Vec<_>>>()?;
        ps.push(mean(p.into_iter()));
        rs.push(mean(r.into_iter()));
    }
    let p = mean(ps.into_iter());
    let r = mean(rs.into_iter());
    Ok(Prf { p, r, f: harmonic_mean(p, r) })
}

/// Distinct n-grams over all n-gram occurrences in `hyps`; 0 when there are none.
pub fn dist_n<T: Eq + Hash, H: AsRef<[T]>>(hyps: &[H], n: usize) -> f64 {
    let mut unique = HashSet::new();
    let mut total = 0usize;
    for h in hyps {
        let h = h.as_ref();
        if h.len() >= n && n > 0 {
            for g in h.windows(n) {
                unique.insert(g);
                total += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        unique.len() as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistGranularity {
    #[default]
    PerContext,
    Corpus,
}

/// Dist-n over a corpus: the per-context mean by default, or a single
/// pooled count over every hypothesis.
pub fn corpus_dist_n<T: Eq + Hash>(sets: &[ResponseSet<T>], n: usize, granularity: DistGranularity) -> f64 {
    match granularity {
        DistGranularity::PerContext => mean(sets.iter().map(|s| dist_n(&s.hypotheses, n))),
        DistGranularity::Corpus => {
            let all: Vec<&[T]> = sets
                .iter()
                .flat_map(|s| s.hypotheses.iter().map(Vec::as_slice))
                .collect();
            dist_n(&all, n)
        }
    }
}

/// Mean order-2 BLEU over ordered pairs of distinct positions; `None` for
/// fewer than two hypotheses.
pub fn pairwise_bleu<T: Eq + Hash>(hyps: &[Vec<T>]) -> Option<f64> {
    let n = hyps.len();
    if n < 2 {
        return None;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += sentence_bleu(&hyps[i], std::slice::from_ref(&hyps[j]), 2).expect("order 2");
            }
        }
    }
    Some(total / (n * (n - 1)) as f64)
}

pub fn corpus_pairwise_bleu<T: Eq + Hash>(sets: &[ResponseSet<T>]) -> Option<f64> {
    let scores: Option<Vec<f64>> = sets.iter().map(|s| pairwise_bleu(&s.hypotheses)).collect();
    scores.filter(|s| !s.is_empty()).map(|s| mean(s.into_iter()))
}

/// Fraction of planted modes matched by some hypothesis at order-2 BLEU >= `tau`.
pub fn mode_coverage<T: Eq + Hash>(hyps: &[Vec<T>], modes: &[Vec<T>], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Parameter(format!("coverage threshold must be in (0, 1], got {tau}")));
    }
    if modes.is_empty() {
        return Ok(0.0);
    }
    let mut hit = 0usize;
    for m in modes {
        let mut covered = false;
        for h in hyps {
            if sentence_bleu(h, std::slice::from_ref(m), 2)? >= tau {
                covered = true;
                break;
            }
        }
        hit += usize::from(covered);
    }
    Ok(hit as f64 / modes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-decoder mean and (population) standard deviation, over iterations, of
/// the fraction of the mega-batch assigned to that decoder.
pub fn assignment_stats(log: &TrainLog) -> Result<Vec<ShareStats>> {
    let records = log.records();
    let first = records
        .first()
        .ok_or_else(|| Error::Parameter("assignment statistics need at least one iteration".into()))?;
    let k = first.counts.len();
    let shares: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let n: f64 = r.counts.iter().sum();
            r.counts.iter().map(|c| c / n).collect()
        })
        .collect();
    let t = shares.len() as f64;
    Ok((0..k)
        .map(|j| {
            let mean = shares.iter().map(|s| s[j]).sum::<f64>() / t;
            let var = shares.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / t;
            ShareStats { mean, std: var.sqrt() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub max_n: usize,
    pub dist_orders: Vec<usize>,
    pub pairwise: bool,
    pub coverage_tau: f64,
    pub dist_granularity: DistGranularity,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_n: 2,
            dist_orders: vec![1, 2],
            pairwise: true,
            coverage_tau: 0.6,
            dist_granularity: DistGranularity::PerContext,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bleu1: Prf,
    pub bleu2: Option<Prf>,
    pub dist1: f64,
    pub dist2: f64,
    pub pairwise_bleu: Option<f64>,
    pub mode_coverage: Option<f64>,
    pub assignment: Option<Vec<ShareStats>>,
}

/// Computes every metric over per-context response sets. `modes[i]` holds
/// the planted modes of context `i`, when known.
pub fn evaluate<T: Eq + Hash>(
    sets: &[ResponseSet<T>],
    modes: Option<&[Vec<Vec<T>>]>,
    config: &EvalConfig,
) -> Result<MetricsReport> {
    check_order(config.max_n)?;
    let bleu1 = bleu_prf(sets, 1)?;
    let bleu2 = if config.max_n >= 2 { Some(bleu_prf(sets, 2)?) } else { None };
    let dist = |n: usize| {
        if config.dist_orders.contains(&n) {
            corpus_dist_n(sets, n, config.dist_granularity)
        } else {
            f64::NAN
        }
    };
    let mode_coverage = match modes {
        Some(modes) => {
            if modes.len() != sets.len() {
                return Err(Error::Dimension(format!(
                    "{} mode lists for {} contexts",
                    modes.len(),
                    sets.len()
                )));
            }
            let cov = sets
                .iter()
                .zip(modes)
                .map(|(s, m)| mode_coverage(&s.hypotheses, m, config.coverage_tau))
                .collect::<Result<Vec<_>>>()?;
            Some(mean(cov.into_iter()))
        }
        None => None,
    };
    Ok(MetricsReport {
        bleu1,
        bleu2,
        dist1: dist(1),
        dist2: dist(2),
        pairwise_bleu: if config.pairwise { corpus_pairwise_bleu(sets) } else { None },
        mode_coverage,
        assignment: None,
    })
}

/// Column layout of the comparison table.
pub const TABLE_COLUMNS: [&str; 10] = [
    "BLEU1-F",
    "BLEU1-P",
    "BLEU1-R",
    "BLEU2-F",
    "BLEU2-P",
    "BLEU2-R",
    "Dist-1",
    "Dist-2",
    "Pairwise-BLEU",
    "Mode-Coverage",
];

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{:.2}", 100.0 * v),
        _ => String::new(),
    }
}

impl MetricsReport {
    /// Table cells in [`TABLE_COLUMNS`] order, scaled by 100; undefined
    /// values are empty cells.
    pub fn table_cells(&self) -> Vec<String> {
        let b2 = self.bleu2;
        vec![
            pct(Some(self.bleu1.f)),
            pct(Some(self.bleu1.p)),
            pct(Some(self.bleu1.r)),
            pct(b2.map(|b| b.f)),
            pct(b2.map(|b| b.p)),
            pct(b2.map(|b| b.r)),
            pct(Some(self.dist1)),
            pct(Some(self.dist2)),
            pct(self.pairwise_bleu),
            pct(self.mode_coverage),
        ]
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", TABLE_COLUMNS.join(","), self.table_cells().join(","))
    }

    /// Flat `key=value` lines; undefined values are written as `NA`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let cells = self.table_cells();
        for (name, cell) in TABLE_COLUMNS.iter().zip(&cells) {
            let key = name.to_lowercase().replace('-', "_");
            let value = if cell.is_empty() { "NA" } else { cell.as_str() };
            let _ = writeln!(out, "{key}={value}");
        }
        if let Some(stats) = &self.assignment {
            for (k, s) in stats.iter().enumerate() {
                let _ = writeln!(out, "decoder{k}_share_mean={:.6}", s.mean);
                let _ = writeln!(out, "decoder{k}_share_std={:.6}", s.std);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn perfect_match_scores_one() {
        let h = toks("a b c d");
        assert_eq!(sentence_bleu(&h, &[h.clone()], 2).unwrap(), 1.0);
        assert_eq!(sentence_bleu(&h, &[h.clone()], 1).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_unigrams_hit_smoothing_floor() {
        let h = toks("x y z");
        let r = toks("a b c");
        assert_eq!(sentence_bleu(&h, &[r.clone()], 1).unwrap(), 1.0 / 4.0);
        let b2 = sentence_bleu(&h, &[r], 2).unwrap();
        assert!((b2 - (0.25f64 * (1.0 / 3.0)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hand_counted_bigram_case() {
        // p1 = 2/3 ("a", "b" match), p2 = 1/2 ("a b" matches), equal lengths.
        let v = sentence_bleu(&toks("a b c"), &[toks("a b d")], 2).unwrap();
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((v - 0.5774).abs() < 1e-4);
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        let empty: Vec<&str> = vec![];
        assert_eq!(sentence_bleu(&empty, &[toks("a")], 2).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty_uses_closest_reference() {
        let h = toks("a b");
        let v = sentence_bleu(&h, &[toks("a b c d"), toks("a b c d e f g")], 1).unwrap();
        assert!((v - (1.0f64 - 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn clipping_against_best_reference() {
        let h = toks("a a a");
        let v = sentence_bleu(&h, &[toks("a b c"), toks("a a d")], 1).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bad_order_is_rejected() {
        assert!(sentence_bleu(&toks("a"), &[toks("a")], 3).is_err());
        assert!(sentence_bleu(&toks("a"), &[toks("a")], 0).is_err());
    }

    #[test]
    fn prf_identical_sets() {
        let hs = vec![toks("a b c"), toks("d e f")];
        let set = ResponseSet::new(hs.clone(), hs);
        let prf = bleu_prf(&[set], 2).unwrap();
        assert_eq!((prf.p, prf.r, prf.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn prf_directional_asymmetry() {
        let r = toks("a b c d");
        let garbage = toks("w x y z");
        let set = ResponseSet::new(vec![r.clone(), garbage.clone()], vec![r.clone()]);
        let prf = bleu_prf(&[set], 2).unwrap();
        let eps = sentence_bleu(&garbage, &[r], 2).unwrap();
        assert!((prf.p - 0.5 * (1.0 + eps)).abs() < 1e-15);
        assert_eq!(prf.r, 1.0);
        assert!(prf.p < prf.r);
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_n(&[toks("a b"), toks("a c")], 1), 0.75);
        let same = vec![toks("a"); 5];
        assert_eq!(dist_n(&same, 1), 1.0 / 5.0);
        assert_eq!(dist_n(&[toks("a")], 2), 0.0);
    }

    #[test]
    fn pairwise_examples() {
        let same = vec![toks("a b c"); 4];
        assert_eq!(pairwise_bleu(&same), Some(1.0));
        assert_eq!(pairwise_bleu(&[toks("a b")]), None);
        let disjoint = vec![toks("a b c"), toks("d e f"), toks("g h i")];
        let floor = (0.25f64 * (1.0 / 3.0)).sqrt();
        assert!((pairwise_bleu(&disjoint).unwrap() - floor).abs() < 1e-15);
    }

    #[test]
    fn pairwise_three_fixed_hypotheses() {
        let hs = vec![toks("a b c"), toks("a b d"), toks("a c d e")];
        let mut sum = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)] {
            sum += sentence_bleu(&hs[i], &[hs[j].clone()], 2).unwrap();
        }
        assert!((pairwise_bleu(&hs).unwrap() - sum / 6.0).abs() < 1e-15);
    }

    #[test]
    fn coverage_examples() {
        let modes = vec![toks("a b c d"), toks("e f g h"), toks("i j k l"), toks("m n o p")];
        assert_eq!(mode_coverage(&modes, &modes, 0.6).unwrap(), 1.0);
        assert_eq!(mode_coverage(&[toks("q r s t")], &modes, 0.6).unwrap(), 0.0);
        let three = vec![modes[0].clone(), modes[2].clone(), modes[3].clone(), toks("z z")];
        assert_eq!(mode_coverage(&three, &modes, 0.6).unwrap(), 0.75);
        assert!(mode_coverage(&three, &modes, 0.0).is_err());
    }

    #[test]
    fn report_formats_are_stable() {
        let set = ResponseSet::new(vec![toks("a b")], vec![toks("a b")]);
        let report = evaluate(&[set], None, &EvalConfig::default()).unwrap();
        assert_eq!(report.pairwise_bleu, None);
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TABLE_COLUMNS.join(","));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), TABLE_COLUMNS.len());
        assert_eq!(cells[0], "100.00");
        assert_eq!(cells[8], "");
        assert!(report.to_key_values().contains("pairwise_bleu=NA"));
    }
}
