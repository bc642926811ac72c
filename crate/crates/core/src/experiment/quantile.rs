use crate::engine::RunRecord;
use crate::error::{Error, Result};

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    pub observations: usize,
    pub coordinate: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl QuantileRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quartiles across replications, one row per (checkpoint, coordinate).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    pub config_hash: String,
    pub rows: Vec<QuantileRow>,
}

impl QuantileTable {
    /// Uses, for each replication, the latest estimate recorded at or before
    /// each checkpoint.
    pub fn from_records(records: &[RunRecord], checkpoints: &[usize], averaged: bool, config_hash: &str) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::InvalidArgument("no replications to summarize".into()))?;
        if records.iter().any(|r| r.coordinates != first.coordinates) {
            return Err(Error::InvalidArgument("replications disagree on coordinates".into()));
        }
        let mut rows = Vec::with_capacity(checkpoints.len() * first.coordinates.len());
        for &cp in checkpoints {
            let entries = records
                .iter()
                .map(|r| r.at(cp).ok_or_else(|| Error::InvalidArgument(format!("no estimate at or before {cp}"))))
                .collect::<Result<Vec<_>>>()?;
            for (k, name) in first.coordinates.iter().enumerate() {
                let mut v: Vec<f64> = entries.iter().map(|e| if averaged { e.averaged[k] } else { e.estimate[k] }).collect();
                v.sort_by(f64::total_cmp);
                rows.push(QuantileRow {
                    observations: cp,
                    coordinate: name.clone(),
                    q1: quantile(&v, 0.25),
                    median: quantile(&v, 0.5),
                    q3: quantile(&v, 0.75),
                });
            }
        }
        Ok(Self { config_hash: config_hash.to_string(), rows })
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.rows.iter().map(|r| r.observations).collect();
        c.dedup();
        c
    }

    pub fn coordinates(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.coordinate) {
                out.push(r.coordinate.clone());
            }
        }
        out
    }

    pub fn get(&self, observations: usize, coordinate: &str) -> Option<&QuantileRow> {
        self.rows.iter().find(|r| r.observations == observations && r.coordinate == coordinate)
    }

    /// Rows of one coordinate in checkpoint order.
    pub fn series(&self, coordinate: &str) -> Vec<&QuantileRow> {
        self.rows.iter().filter(|r| r.coordinate == coordinate).collect()
    }
}
