use super::quantile::QuantileTable;
use crate::error::{Error, Result};

/// Paired descriptive summary of two experiments at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub coordinate: String,
    pub median_a: f64,
    pub iqr_a: f64,
    pub median_b: f64,
    pub iqr_b: f64,
    /// `median_b - median_a`.
    pub median_delta: f64,
    /// `iqr_b - iqr_a`.
    pub iqr_delta: f64,
}

/// Compares at `checkpoint`, or at the last shared checkpoint when `None`.
/// Both tables must have the same checkpoints and coordinates.
pub fn compare(a: &QuantileTable, b: &QuantileTable, checkpoint: Option<usize>) -> Result<Vec<CompareRow>> {
    let grid = a.checkpoints();
    if grid != b.checkpoints() {
        return Err(Error::GridMismatch(format!("checkpoints {:?} vs {:?}", grid, b.checkpoints())));
    }
    if a.coordinates() != b.coordinates() {
        return Err(Error::GridMismatch("coordinate lists differ".into()));
    }
    let cp = match checkpoint {
        Some(c) if grid.contains(&c) => c,
        Some(c) => return Err(Error::GridMismatch(format!("checkpoint {c} not in the grid"))),
        None => *grid.last().ok_or_else(|| Error::GridMismatch("empty tables".into()))?,
    };
    a.coordinates()
        .into_iter()
        .map(|name| {
            let ra = a.get(cp, &name).ok_or_else(|| Error::GridMismatch(format!("{name} missing at {cp}")))?;
            let rb = b.get(cp, &name).ok_or_else(|| Error::GridMismatch(format!("{name} missing at {cp}")))?;
            Ok(CompareRow {
                median_a: ra.median,
                iqr_a: ra.iqr(),
                median_b: rb.median,
                iqr_b: rb.iqr(),
                median_delta: rb.median - ra.median,
                iqr_delta: rb.iqr() - ra.iqr(),
                coordinate: name,
            })
        })
        .collect()
}
