//! CSV layouts. Every file starts with a `# config_hash=<hex>` line followed
//! by a fixed header row.

use std::io::{BufRead, BufReader, Read, Write};

use super::quantile::{QuantileRow, QuantileTable};
use crate::engine::RunRecord;
use crate::error::{Error, Result};

pub const RAW_HEADER: [&str; 5] = ["replication", "observations", "coordinate", "estimate", "averaged"];
pub const QUANTILE_HEADER: [&str; 5] = ["observations", "coordinate", "q1", "median", "q3"];
pub const OBSERVATION_HEADER: [&str; 3] = ["t", "state", "observation"];

/// One row of the raw per-replication output.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub replication: u64,
    pub observations: usize,
    pub coordinate: String,
    pub estimate: f64,
    pub averaged: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub config_hash: String,
    pub rows: Vec<RawRow>,
}

/// Shortest text that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn write_hash<W: Write>(w: &mut W, hash: &str) -> Result<()> {
    writeln!(w, "# config_hash={hash}")?;
    Ok(())
}

fn read_hash<R: Read>(r: R) -> Result<(String, BufReader<R>)> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let hash = first
        .trim_end_matches(['\n', '\r'])
        .strip_prefix("# config_hash=")
        .ok_or_else(|| Error::CsvFormat("first line must be '# config_hash=<hex>'".into()))?;
    if !hash.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(Error::CsvFormat(format!("config hash '{hash}' is not hexadecimal")));
    }
    Ok((hash.to_string(), reader))
}

fn csv_reader<R: Read>(r: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::CsvFormat(format!("expected header {}, found {}", header.join(","), found.join(","))));
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let text = rec.get(i).ok_or_else(|| Error::CsvFormat(format!("line {line}: missing column {}", i + 1)))?;
    text.parse().map_err(|_| Error::CsvFormat(format!("line {line}: cannot parse '{text}'")))
}

fn finite(v: f64, line: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::CsvFormat(format!("line {line}: non-finite value")))
    }
}

/// Raw output: the latest estimate at or before each checkpoint, for every
/// replication and coordinate.
pub fn write_raw<W: Write>(w: W, records: &[RunRecord], checkpoints: &[usize], config_hash: &str) -> Result<()> {
    let mut w = w;
    write_hash(&mut w, config_hash)?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(RAW_HEADER)?;
    for rec in records {
        for &cp in checkpoints {
            let Some(e) = rec.at(cp) else { continue };
            for (k, name) in rec.coordinates.iter().enumerate() {
                out.write_record([
                    rec.replication.to_string(),
                    cp.to_string(),
                    name.clone(),
                    num(e.estimate[k]),
                    num(e.averaged[k]),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_raw<R: Read>(r: R) -> Result<RawTable> {
    let (config_hash, rest) = read_hash(r)?;
    let mut rdr = csv_reader(rest, &RAW_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() + 1);
        if rec.len() != RAW_HEADER.len() {
            return Err(Error::CsvFormat(format!("line {line}: expected {} columns", RAW_HEADER.len())));
        }
        rows.push(RawRow {
            replication: field(&rec, 0, line)?,
            observations: field(&rec, 1, line)?,
            coordinate: field(&rec, 2, line)?,
            estimate: finite(field(&rec, 3, line)?, line)?,
            averaged: finite(field(&rec, 4, line)?, line)?,
        });
    }
    Ok(RawTable { config_hash, rows })
}

pub fn write_quantiles<W: Write>(w: W, table: &QuantileTable) -> Result<()> {
    let mut w = w;
    write_hash(&mut w, &table.config_hash)?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(QUANTILE_HEADER)?;
    for r in &table.rows {
        out.write_record([r.observations.to_string(), r.coordinate.clone(), num(r.q1), num(r.median), num(r.q3)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_quantiles<R: Read>(r: R) -> Result<QuantileTable> {
    let (config_hash, rest) = read_hash(r)?;
    let mut rdr = csv_reader(rest, &QUANTILE_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() + 1);
        if rec.len() != QUANTILE_HEADER.len() {
            return Err(Error::CsvFormat(format!("line {line}: expected {} columns", QUANTILE_HEADER.len())));
        }
        let row = QuantileRow {
            observations: field(&rec, 0, line)?,
            coordinate: field(&rec, 1, line)?,
            q1: finite(field(&rec, 2, line)?, line)?,
            median: finite(field(&rec, 3, line)?, line)?,
            q3: finite(field(&rec, 4, line)?, line)?,
        };
        if !(row.q1 <= row.median && row.median <= row.q3) {
            return Err(Error::CsvFormat(format!("line {line}: quartiles out of order")));
        }
        rows.push(row);
    }
    Ok(QuantileTable { config_hash, rows })
}

/// Simulated stream: `t = 0` carries `X_0` and an empty observation.
pub fn write_observations<W: Write>(w: W, states: &[String], observations: &[f64], config_hash: &str) -> Result<()> {
    let mut w = w;
    write_hash(&mut w, config_hash)?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(OBSERVATION_HEADER)?;
    for (t, x) in states.iter().enumerate() {
        let y = if t == 0 { String::new() } else { num(observations[t - 1]) };
        out.write_record([t.to_string(), x.clone(), y])?;
    }
    out.flush()?;
    Ok(())
}
