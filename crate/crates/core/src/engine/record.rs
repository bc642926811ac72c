use std::time::Duration;

use crate::error::{Error, Result};

/// One recorded parameter estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    /// Observations consumed so far.
    pub observations: usize,
    pub estimate: Vec<f64>,
    pub averaged: Vec<f64>,
    /// Number of completed blocks (online EM: parameter updates).
    pub block: usize,
    pub elapsed: Duration,
}

/// Trajectory of estimates of one replication, indexed by observation count.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub coordinates: Vec<String>,
    pub seed: u64,
    pub replication: u64,
    pub config_hash: String,
    /// Blocks (or online updates) whose M-step was skipped as degenerate.
    pub skipped: Vec<usize>,
    entries: Vec<RunEntry>,
}

impl RunRecord {
    pub fn new(coordinates: Vec<String>) -> Self {
        Self { coordinates, seed: 0, replication: 0, config_hash: String::new(), skipped: Vec::new(), entries: Vec::new() }
    }

    pub fn push(&mut self, entry: RunEntry) -> Result<()> {
        if entry.estimate.len() != self.coordinates.len() || entry.averaged.len() != self.coordinates.len() {
            return Err(Error::InvalidArgument("entry width does not match the coordinate list".into()));
        }
        if let Some(last) = self.entries.last() {
            if entry.observations <= last.observations {
                return Err(Error::InvalidArgument(format!(
                    "observation counts must increase: {} after {}",
                    entry.observations, last.observations
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[RunEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&RunEntry> {
        self.entries.last()
    }

    /// Latest entry recorded at or before `observations`.
    pub fn at(&self, observations: usize) -> Option<&RunEntry> {
        let k = self.entries.partition_point(|e| e.observations <= observations);
        k.checked_sub(1).map(|i| &self.entries[i])
    }

    /// Equality ignoring wall-clock times.
    pub fn same_trajectory(&self, other: &RunRecord) -> bool {
        self.coordinates == other.coordinates
            && self.seed == other.seed
            && self.config_hash == other.config_hash
            && self.skipped == other.skipped
            && self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.observations == b.observations
                    && a.block == b.block
                    && bits(&a.estimate) == bits(&b.estimate)
                    && bits(&a.averaged) == bits(&b.averaged)
            })
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
