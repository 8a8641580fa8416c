use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::prior::PriorModel;
use super::CostSource;
use crate::assignment::{balanced_assign, AssignmentMatrix, CostMatrix};
use crate::error::{Error, Result};
use crate::seed;
use crate::vocab::Token;

/// Posterior responsibilities `Q[n][k]`, each row a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMatrix {
    n_samples: usize,
    n_decoders: usize,
    values: Vec<f64>,
}

impl PosteriorMatrix {
    /// Checks that every row is a distribution within `1e-9`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.as_ref().len());
        if k == 0 {
            return Err(Error::Dimension("posterior needs at least one column".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * k);
        for (n, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != k {
                return Err(Error::Dimension(format!("row {n} has {} entries, expected {k}", row.len())));
            }
            if row.iter().any(|q| !(0.0..=1.0).contains(q)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("row {n} is not a distribution")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            n_samples: rows.len(),
            n_decoders: k,
            values,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_decoders(&self) -> usize {
        self.n_decoders
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_decoders..(n + 1) * self.n_decoders]
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.values[n * self.n_decoders + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_decoders)
    }

    /// Column sums: the soft assignment mass per decoder.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_decoders];
        for row in self.rows() {
            for (s, q) in sums.iter_mut().zip(row) {
                *s += q;
            }
        }
        sums
    }
}

/// Bayes' rule in log space: `Q[n][k] ∝ prior_k(c_n) · exp(loglik[n][k])`,
/// normalized after subtracting the row maximum.
pub fn posterior<R: AsRef<[f64]>, C: AsRef<[Token]>>(
    loglik: &[R],
    prior: &PriorModel,
    contexts: &[C],
) -> Result<PosteriorMatrix> {
    if loglik.len() != contexts.len() {
        return Err(Error::Dimension(format!(
            "{} likelihood rows for {} contexts",
            loglik.len(),
            contexts.len()
        )));
    }
    let k = prior.n_decoders();
    let mut values = Vec::with_capacity(loglik.len() * k);
    for (n, (row, ctx)) in loglik.iter().zip(contexts).enumerate() {
        let row = row.as_ref();
        if row.len() != k {
            return Err(Error::Dimension(format!("likelihood row {n} has {} entries, expected {k}", row.len())));
        }
        if row.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric(format!("non-finite log-likelihood in row {n}")));
        }
        let lp = prior.log_probs(ctx.as_ref());
        let joint: Vec<f64> = row.iter().zip(&lp).map(|(l, p)| l + p).collect();
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = joint.iter().map(|j| (j - max).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        values.extend(unnorm.into_iter().map(|u| u / z));
    }
    Ok(PosteriorMatrix {
        n_samples: loglik.len(),
        n_decoders: k,
        values,
    })
}

/// Soft-EM weights: the posterior rows themselves.
pub fn estep_soft(q: &PosteriorMatrix) -> Vec<Vec<f64>> {
    q.rows().map(<[f64]>::to_vec).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = k;
        }
    }
    best
}

/// Hard-EM: every sample goes to its most responsible decoder.
pub fn estep_hard(q: &PosteriorMatrix) -> AssignmentMatrix {
    AssignmentMatrix::new(q.rows().map(argmax).collect(), q.n_decoders()).expect("argmax is in range")
}

/// EqHard-EM: minimum-cost assignment with exactly `N/K` samples per decoder.
/// The cost is `-Q` or, with [`CostSource::LogLikelihood`], `-loglik`.
pub fn estep_eqhard<R: AsRef<[f64]>>(
    q: &PosteriorMatrix,
    source: CostSource,
    loglik: Option<&[R]>,
) -> Result<AssignmentMatrix> {
    let (n, k) = (q.n_samples(), q.n_decoders());
    let values: Vec<f64> = match source {
        CostSource::Posterior => q.values.iter().map(|v| -v).collect(),
        CostSource::LogLikelihood => {
            let rows = loglik.ok_or_else(|| {
                Error::Parameter("log-likelihood cost requested without log-likelihoods".into())
            })?;
            if rows.len() != n {
                return Err(Error::Dimension(format!("{} likelihood rows for {n} samples", rows.len())));
            }
            rows.iter().flat_map(|r| r.as_ref().iter().map(|v| -v)).collect()
        }
    };
    balanced_assign(&CostMatrix::new(n, k, values)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqRandomMode {
    Fixed,
    Dynamic,
}

const FIXED_STREAM: u64 = 1;
const DYNAMIC_STREAM: u64 = 2;

/// Decoder pre-assigned to a sample id under EqRandom-Fixed. Ids are grouped
/// in consecutive blocks of `K`; each block is a seeded permutation of the
/// decoders, so any union of whole blocks is exactly balanced.
pub fn fixed_label(sample_id: usize, n_decoders: usize, seed_value: u64) -> usize {
    let block = (sample_id / n_decoders) as u64;
    let mut perm: Vec<usize> = (0..n_decoders).collect();
    perm.shuffle(&mut seed::rng(seed_value, &[seed::EQ_RANDOM, FIXED_STREAM, block]));
    perm[sample_id % n_decoders]
}

/// EqRandom assignment for one mega-batch. `Fixed` is a pure function of
/// each sample id and the seed; `Dynamic` draws a fresh balanced shuffle
/// keyed by `call`. Both must meet the `N/K` quota.
pub fn estep_eqrandom(
    n_decoders: usize,
    mode: EqRandomMode,
    seed_value: u64,
    sample_ids: &[usize],
    call: u64,
) -> Result<AssignmentMatrix> {
    let n = sample_ids.len();
    if n_decoders == 0 || n % n_decoders != 0 {
        return Err(Error::Quota {
            n_samples: n,
            n_decoders,
        });
    }
    let assignee = match mode {
        EqRandomMode::Fixed => sample_ids
            .iter()
            .map(|&id| fixed_label(id, n_decoders, seed_value))
            .collect(),
        EqRandomMode::Dynamic => {
            let mut slots: Vec<usize> = (0..n).map(|i| i % n_decoders).collect();
            slots.shuffle(&mut seed::rng(seed_value, &[seed::EQ_RANDOM, DYNAMIC_STREAM, call]));
            slots
        }
    };
    let a = AssignmentMatrix::new(assignee, n_decoders)?;
    if !a.is_balanced() {
        return Err(Error::Quota {
            n_samples: n,
            n_decoders,
        });
    }
    Ok(a)
}
