use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Variant;
use crate::error::{Error, Result};

/// One E/M iteration over a mega-batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterRecord {
    pub iter: usize,
    pub variant: Variant,
    /// `Σ_n log Σ_k (1/K) P(r_n | z = k, c_n)` over the mega-batch, before the M-step.
    pub mll: f64,
    /// Samples per decoder; posterior mass per decoder for Soft-EM.
    pub counts: Vec<f64>,
    pub t_estep_ms: f64,
    pub t_hungarian_ms: f64,
    pub t_mstep_ms: f64,
}

impl IterRecord {
    pub fn batch_size(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn without_timings(&self) -> Self {
        Self {
            t_estep_ms: 0.0,
            t_hungarian_ms: 0.0,
            t_mstep_ms: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    records: Vec<IterRecord>,
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<IterRecord>) -> Self {
        Self { records }
    }

    pub fn push(&mut self, record: IterRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// The log with every wall-time zeroed.
    pub fn without_timings(&self) -> Self {
        Self {
            records: self.records.iter().map(IterRecord::without_timings).collect(),
        }
    }

    /// Bitwise comparison of everything except timings.
    pub fn same_outcome(&self, other: &TrainLog) -> bool {
        let a = self.without_timings();
        let b = other.without_timings();
        a.records.len() == b.records.len()
            && a.records.iter().zip(&b.records).all(|(x, y)| {
                x.iter == y.iter
                    && x.variant == y.variant
                    && x.mll.to_bits() == y.mll.to_bits()
                    && x.counts.len() == y.counts.len()
                    && x.counts.iter().zip(&y.counts).all(|(p, q)| p.to_bits() == q.to_bits())
            })
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: IterRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("log line {}: {e}", i + 1)))?;
            records.push(r);
        }
        Ok(Self { records })
    }
}

/// Wall-time shares aggregated over a log, in percent. The Hungarian share
/// is reported both as a part of the E-step and of the whole iteration.
/// Shares are `None` when the relevant total is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub total_estep_ms: f64,
    pub total_mstep_ms: f64,
    pub total_hungarian_ms: f64,
    pub estep_pct: Option<f64>,
    pub mstep_pct: Option<f64>,
    pub hungarian_pct_of_estep: Option<f64>,
    pub hungarian_pct_of_total: Option<f64>,
}

impl TimingBreakdown {
    pub fn from_log(log: &TrainLog) -> Self {
        let sum = |f: fn(&IterRecord) -> f64| log.records.iter().map(f).sum::<f64>();
        let e = sum(|r| r.t_estep_ms);
        let m = sum(|r| r.t_mstep_ms);
        let h = sum(|r| r.t_hungarian_ms);
        let share = |part: f64, whole: f64| (whole > 0.0).then(|| 100.0 * part / whole);
        Self {
            total_estep_ms: e,
            total_mstep_ms: m,
            total_hungarian_ms: h,
            estep_pct: share(e, e + m),
            mstep_pct: share(m, e + m),
            hungarian_pct_of_estep: share(h, e),
            hungarian_pct_of_total: share(h, e + m),
        }
    }

    pub fn to_key_values(&self) -> String {
        let cell = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        format!(
            "estep_ms={:.3}\nmstep_ms={:.3}\nhungarian_ms={:.3}\nestep_pct={}\nmstep_pct={}\nhungarian_pct_of_estep={}\nhungarian_pct_of_total={}\n",
            self.total_estep_ms,
            self.total_mstep_ms,
            self.total_hungarian_ms,
            cell(self.estep_pct),
            cell(self.mstep_pct),
            cell(self.hungarian_pct_of_estep),
            cell(self.hungarian_pct_of_total),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iter: usize, t: f64) -> IterRecord {
        IterRecord {
            iter,
            variant: Variant::EqHardEm,
            mll: -123.456789012345,
            counts: vec![2.0, 2.0],
            t_estep_ms: t,
            t_hungarian_ms: t / 10.0,
            t_mstep_ms: t,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let log = TrainLog::from_records(vec![record(0, 1.5), record(1, 2.5)]);
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["iter", "variant", "mll", "counts", "t_estep_ms", "t_hungarian_ms", "t_mstep_ms"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        assert_eq!(first["variant"], "EqHardEM");
        let back = TrainLog::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn timings_do_not_affect_outcome() {
        let a = TrainLog::from_records(vec![record(0, 1.0)]);
        let b = TrainLog::from_records(vec![record(0, 9.0)]);
        assert!(a.same_outcome(&b));
        let mut c = b.clone();
        c.records[0].mll += 1e-12;
        assert!(!a.same_outcome(&c));
    }

    #[test]
    fn timing_shares() {
        let mut r = record(0, 0.0);
        r.t_estep_ms = 75.0;
        r.t_mstep_ms = 25.0;
        r.t_hungarian_ms = 1.0;
        let t = TimingBreakdown::from_log(&TrainLog::from_records(vec![r]));
        assert_eq!(t.estep_pct, Some(75.0));
        assert_eq!(t.mstep_pct, Some(25.0));
        assert!((t.hungarian_pct_of_estep.unwrap() - 100.0 / 75.0).abs() < 1e-12);
        assert!(t.to_key_values().contains("hungarian_pct_of_estep=1.33"));

        let zero = TimingBreakdown::from_log(&TrainLog::from_records(vec![record(0, 0.0)]));
        assert_eq!(zero.estep_pct, None);
        assert_eq!(zero.hungarian_pct_of_estep, None);
        assert!(zero.to_key_values().contains("estep_pct=NA"));
    }
}
