//! Concentration of the average posterior responsibility around `1/K`.
//!
//! For `Q` the posterior used by the E-step and `p` the true posterior,
//! with probability at least `1 - δ`, for every `z`:
//!
//! ```text
//! | mean_D Q(z | c, r) - 1/K |  <=  sqrt(ln(2K/δ) / (2|D|))  +  E| Q(z | c, r) - p(z | c, r) |
//! ```
//!
//! The first term is Hoeffding's inequality for `p` with a union bound over
//! `z`; the second follows from the triangle inequality. The expectation is
//! estimated on the sampled dataset itself.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::synthdata::{CorpusModel, CorpusSpec};
use crate::vocab::Token;

/// `sqrt(ln(2K/δ) / (2 |D|))`.
pub fn hoeffding_eps(n_decoders: usize, dataset_size: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must be in (0, 1), got {delta}")));
    }
    if dataset_size == 0 || n_decoders == 0 {
        return Err(Error::Parameter("dataset size and K must be positive".into()));
    }
    Ok(((2.0 * n_decoders as f64 / delta).ln() / (2.0 * dataset_size as f64)).sqrt())
}

fn check_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<usize> {
    let k = rows
        .first()
        .map(|r| r.as_ref().len())
        .ok_or_else(|| Error::Size("need at least one posterior row".into()))?;
    if rows.iter().any(|r| r.as_ref().len() != k) {
        return Err(Error::Dimension("posterior rows have different lengths".into()));
    }
    Ok(k)
}

/// `|mean_D Q(z) - 1/K|` for every `z`.
pub fn empirical_deviation<R: AsRef<[f64]>>(q: &[R]) -> Result<Vec<f64>> {
    let k = check_rows(q)?;
    let mut sums = vec![0.0; k];
    for row in q {
        for (s, v) in sums.iter_mut().zip(row.as_ref()) {
            *s += v;
        }
    }
    let n = q.len() as f64;
    Ok(sums.into_iter().map(|s| (s / n - 1.0 / k as f64).abs()).collect())
}

/// `mean_D |Q(z) - p(z)|` for every `z`.
pub fn posterior_gap<R: AsRef<[f64]>, S: AsRef<[f64]>>(q: &[R], p: &[S]) -> Result<Vec<f64>> {
    if q.len() != p.len() {
        return Err(Error::Dimension(format!("{} Q rows but {} p rows", q.len(), p.len())));
    }
    let k = check_rows(q)?;
    if check_rows(p)? != k {
        return Err(Error::Dimension("Q and p have different widths".into()));
    }
    let mut sums = vec![0.0; k];
    for (a, b) in q.iter().zip(p) {
        for ((s, x), y) in sums.iter_mut().zip(a.as_ref()).zip(b.as_ref()) {
            *s += (x - y).abs();
        }
    }
    let n = q.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta: f64,
    pub dataset_size: usize,
    pub hoeffding_eps: f64,
    pub posterior_gap: Vec<f64>,
    pub empirical_dev: Vec<f64>,
    pub holds: Vec<bool>,
}

impl BoundReport {
    fn assemble(delta: f64, dataset_size: usize, eps: f64, dev: Vec<f64>, gap: Vec<f64>) -> Self {
        let holds = dev.iter().zip(&gap).map(|(d, g)| *d <= eps + g).collect();
        Self {
            delta,
            dataset_size,
            hoeffding_eps: eps,
            posterior_gap: gap,
            empirical_dev: dev,
            holds,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|h| *h)
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "delta={}", self.delta);
        let _ = writeln!(out, "dataset_size={}", self.dataset_size);
        let _ = writeln!(out, "hoeffding_eps={:.6}", self.hoeffding_eps);
        for (z, ((d, g), h)) in self.empirical_dev.iter().zip(&self.posterior_gap).zip(&self.holds).enumerate() {
            let _ = writeln!(out, "z{z}_empirical_dev={d:.6}");
            let _ = writeln!(out, "z{z}_posterior_gap={g:.6}");
            let _ = writeln!(out, "z{z}_holds={h}");
        }
        out
    }
}

/// Both bound terms and the per-`z` verdict for one dataset.
pub fn bound_report<R: AsRef<[f64]>, S: AsRef<[f64]>>(q: &[R], p: &[S], delta: f64) -> Result<BoundReport> {
    let dev = empirical_deviation(q)?;
    let gap = posterior_gap(q, p)?;
    let eps = hoeffding_eps(dev.len(), q.len(), delta)?;
    Ok(BoundReport::assemble(delta, q.len(), eps, dev, gap))
}

/// Aggregate over resampled datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub trials: usize,
    pub delta: f64,
    pub dataset_size: usize,
    pub hoeffding_eps: f64,
    /// Trials where the two-term bound held for every `z`.
    pub bound_holds: usize,
    /// Trials where `|mean_D p(z) - 1/K| <= eps` for every `z`.
    pub exact_holds: usize,
    /// Trials where the exact-posterior event held but the two-term bound
    /// failed. The triangle inequality makes this impossible.
    pub implication_failures: usize,
    pub max_dev: f64,
}

impl TheoremCheck {
    pub fn fraction(&self) -> f64 {
        self.bound_holds as f64 / self.trials as f64
    }

    pub fn exact_fraction(&self) -> f64 {
        self.exact_holds as f64 / self.trials as f64
    }

    pub fn summary(&self) -> String {
        format!(
            "trials={} delta={} dataset_size={} hoeffding_eps={:.6} bound_holds={} exact_holds={} implication_failures={} fraction={:.4}",
            self.trials,
            self.delta,
            self.dataset_size,
            self.hoeffding_eps,
            self.bound_holds,
            self.exact_holds,
            self.implication_failures,
            self.fraction()
        )
    }
}

/// Monte-Carlo check of the bound. Each trial draws a fresh dataset of
/// `spec.n_train` samples from the generative model (trial seeds derived
/// from `spec.seed`), maps each sample's true posterior through `q_map`
/// (`q_map(context_id, body, p, out)`), and evaluates both terms.
/// `K` is the number of planted modes.
pub fn verify_theorem<F>(spec: &CorpusSpec, q_map: F, delta: f64, n_trials: usize) -> Result<TheoremCheck>
where
    F: Fn(usize, &[Token], &[f64], &mut [f64]),
{
    if n_trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    let model = CorpusModel::from_spec(spec)?;
    let k = model.n_modes();
    let n = spec.n_train;
    let eps = hoeffding_eps(k, n, delta)?;
    let mut check = TheoremCheck {
        trials: n_trials,
        delta,
        dataset_size: n,
        hoeffding_eps: eps,
        bound_holds: 0,
        exact_holds: 0,
        implication_failures: 0,
        max_dev: 0.0,
    };
    let mut body = Vec::new();
    let mut p = vec![0.0; k];
    let mut q = vec![0.0; k];
    for trial in 0..n_trials {
        let mut rng = seed::rng(spec.seed, &[seed::TRIAL, trial as u64]);
        let mut sum_p = vec![0.0; k];
        let mut sum_q = vec![0.0; k];
        let mut sum_gap = vec![0.0; k];
        for _ in 0..n {
            let (c, _) = model.draw_into(&mut rng, &mut body);
            model.posterior_into(c, &body, &mut p)?;
            q_map(c, &body, &p, &mut q);
            for z in 0..k {
                sum_p[z] += p[z];
                sum_q[z] += q[z];
                sum_gap[z] += (q[z] - p[z]).abs();
            }
        }
        let nf = n as f64;
        let target = 1.0 / k as f64;
        let exact = (0..k).all(|z| (sum_p[z] / nf - target).abs() <= eps);
        let mut bound = true;
        for z in 0..k {
            let dev = (sum_q[z] / nf - target).abs();
            check.max_dev = check.max_dev.max(dev);
            bound &= dev <= eps + sum_gap[z] / nf;
        }
        check.exact_holds += usize::from(exact);
        check.bound_holds += usize::from(bound);
        check.implication_failures += usize::from(exact && !bound);
    }
    Ok(check)
}

/// The exact-posterior map for [`verify_theorem`].
pub fn exact_q(_c: usize, _body: &[Token], p: &[f64], out: &mut [f64]) {
    out.copy_from_slice(p);
}
