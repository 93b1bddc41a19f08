//! CSV layout for round logs.
//!
//! Columns: `t, chosen, expected_cost, algorithm_cost, loss_0..loss_{n-1}, prob_0..prob_{n-1}`
//! with a header row. Floats use Rust's shortest round-trip formatting, so a log re-read
//! with [`read_records`] reproduces the in-memory values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::{ChoiceDistribution, ExpertId, RoundRecord};

pub fn header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "chosen", "expected_cost", "algorithm_cost"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n).map(|i| format!("loss_{i}")));
    h.extend((0..n).map(|i| format!("prob_{i}")));
    h
}

pub fn write_records<W: Write>(writer: W, records: &[RoundRecord]) -> Result<()> {
    let n = records.first().map_or(0, |r| r.losses.len());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(n))?;
    for r in records {
        let mut row = vec![
            r.t.to_string(),
            r.chosen.to_string(),
            r.expected_cost.to_string(),
            r.algorithm_cost.to_string(),
        ];
        row.extend(r.losses.iter().map(f64::to_string));
        row.extend(r.distribution.probs().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_file(path: impl AsRef<Path>, records: &[RoundRecord]) -> Result<()> {
    write_records(std::fs::File::create(path)?, records)
}

fn parse_f64(field: &str, line: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::data(format!("line {line}, column {column}: {e}")))
}

/// Reads the `loss_*` columns of a round log, in column order. Other columns are ignored,
/// so a plain table with only `loss_i` headers is accepted too.
pub fn read_loss_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut loss_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            h.trim()
                .strip_prefix("loss_")
                .and_then(|k| k.parse::<usize>().ok())
                .map(|k| (k, col))
        })
        .collect();
    loss_cols.sort_unstable();
    if loss_cols.is_empty() {
        return Err(Error::data("no loss_<i> columns in header"));
    }
    if loss_cols.iter().enumerate().any(|(i, (k, _))| i != *k) {
        return Err(Error::data("loss_<i> columns are not numbered 0..n-1"));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = loss_cols
            .iter()
            .map(|&(k, col)| {
                let field = rec
                    .get(col)
                    .ok_or_else(|| Error::data(format!("line {}: missing loss_{k}", line + 2)))?;
                parse_f64(field, line + 2, &format!("loss_{k}"))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_loss_rows_file(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_loss_rows(file)
}

/// Full round-log reader; inverse of [`write_records`].
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 4 || (headers.len() - 4) % 2 != 0 {
        return Err(Error::data(format!("unexpected header width {}", headers.len())));
    }
    let n = (headers.len() - 4) / 2;
    let expected = header(n);
    if headers.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::data("header does not match the round-log layout"));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line + 2;
        let field = |i: usize| parse_f64(&rec[i], line, &expected[i]);
        let t = rec[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::data(format!("line {line}, column t: {e}")))?;
        let chosen = rec[1]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::data(format!("line {line}, column chosen: {e}")))?;
        let losses = (4..4 + n).map(field).collect::<Result<Vec<_>>>()?;
        let probs = (4 + n..4 + 2 * n).map(field).collect::<Result<Vec<_>>>()?;
        out.push(RoundRecord {
            t,
            chosen: ExpertId(chosen),
            expected_cost: field(2)?,
            algorithm_cost: field(3)?,
            losses,
            distribution: ChoiceDistribution::new(probs)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            header(2).join(","),
            "t,chosen,expected_cost,algorithm_cost,loss_0,loss_1,prob_0,prob_1"
        );
    }

    #[test]
    fn loss_columns_only() {
        let rows = read_loss_rows("loss_1,loss_0\n2,1\n4,3.5\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.5, 4.0]]);
        assert!(read_loss_rows("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_loss_rows("loss_0,loss_2\n1,2\n".as_bytes()).is_err());
        assert!(read_loss_rows("loss_0\nxyz\n".as_bytes()).is_err());
    }
}
