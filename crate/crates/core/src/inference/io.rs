//! Sample files: per-chain parameter CSV and a packed state bitset.
//!
//! Bitset layout (little endian): magic `UPSB`, `u32` version, `u64` node
//! count, `u64` sample count, then `ceil(nodes / 64)` words per sample with
//! node `i` at bit `i % 64` of word `i / 64`.

use std::io::{Read, Write};

use super::chain::{ChainSamples, StateSamples};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"UPSB";
const VERSION: u32 = 1;

/// Writes `iteration,theta0,theta1,<reporting labels..>` rows.
pub fn write_chain_csv<W: Write>(writer: W, chain: &ChainSamples, reporting_labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["iteration".to_string(), "theta0".into(), "theta1".into()];
    header.extend(reporting_labels.iter().cloned());
    w.write_record(&header)?;
    for s in 0..chain.len() {
        let mut row = vec![
            chain.iterations[s].to_string(),
            chain.theta0[s].to_string(),
            chain.theta1[s].to_string(),
        ];
        row.extend(chain.reporting[s].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parameter columns read back from a chain CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTable {
    pub labels: Vec<String>,
    /// One vector per column after `iteration`.
    pub columns: Vec<Vec<f64>>,
}

impl ChainTable {
    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.columns[k].as_slice())
    }
}

pub fn read_chain_csv<R: Read>(reader: R) -> Result<ChainTable> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("iteration") {
        return Err(Error::parse("chain CSV", "first column must be `iteration`"));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut columns = vec![Vec::new(); labels.len()];
    for rec in r.records() {
        let rec = rec?;
        for (k, col) in columns.iter_mut().enumerate() {
            let field = rec.get(k + 1).unwrap_or("");
            col.push(field.parse().map_err(|_| Error::parse("chain CSV value", field))?);
        }
    }
    Ok(ChainTable { labels, columns })
}

pub fn write_states<W: Write>(mut writer: W, states: &StateSamples) -> Result<()> {
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(states.n_nodes as u64).to_le_bytes())?;
    writer.write_all(&(states.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(states.words().len() * 8);
    for w in states.words() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

pub fn read_states<R: Read>(mut reader: R) -> Result<StateSamples> {
    let mut head = [0u8; 24];
    reader.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::parse("state bitset", "bad magic"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::parse("state bitset", format!("unsupported version {version}")));
    }
    let n_nodes = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes")) as usize;
    let n_samples = u64::from_le_bytes(head[16..24].try_into().expect("8 bytes")) as usize;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let expected = n_samples * n_nodes.div_ceil(64) * 8;
    if body.len() != expected {
        return Err(Error::parse(
            "state bitset",
            format!("expected {expected} payload bytes, found {}", body.len()),
        ));
    }
    let words = body
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if n_samples == 0 {
        return Ok(StateSamples::new(n_nodes));
    }
    StateSamples::from_words(n_nodes, words)
}
