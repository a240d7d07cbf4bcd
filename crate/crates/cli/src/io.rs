//! CSV and JSONL file formats.
//!
//! Score matrices are CSV with a `dim_1,...,dim_M` header, optionally
//! followed by `doc_len,out_len` columns. Rewards are written as
//! `scalar_reward,advantage` rows. Floats use Rust's shortest round-trip
//! formatting so re-reading and re-writing a file reproduces it byte for byte.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use hvo_core::ScoreMatrix;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Parsed numeric CSV: header names and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_source(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io("<stdin>", e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parses a headed CSV of finite numbers. Errors carry the 1-based line number.
pub fn parse_numeric_csv(text: &str, source: &str) -> CliResult<NumericTable> {
    let malformed = |line: u64, reason: String| CliError::Malformed {
        path: source.to_string(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(malformed(1, "missing header".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(line, format!("not a finite number: '{field}'"))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(malformed(2, "no data rows".into()));
    }
    Ok(NumericTable { header, rows })
}

/// A score matrix plus optional per-row `(doc_len, out_len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInput {
    pub scores: ScoreMatrix,
    pub lengths: Option<Vec<(usize, usize)>>,
}

pub fn parse_score_csv(text: &str, source: &str) -> CliResult<ScoreInput> {
    let table = parse_numeric_csv(text, source)?;
    let malformed = |line: u64, reason: String| CliError::Malformed {
        path: source.to_string(),
        line,
        reason,
    };
    let has_lengths =
        table.header.len() >= 2 && table.header[table.header.len() - 2..] == ["doc_len", "out_len"];
    let dims = table.header.len() - if has_lengths { 2 } else { 0 };
    for (k, name) in table.header[..dims].iter().enumerate() {
        if *name != format!("dim_{}", k + 1) {
            return Err(malformed(
                1,
                format!("expected column 'dim_{}', found '{name}'", k + 1),
            ));
        }
    }
    if dims == 0 {
        return Err(malformed(1, "no score columns".into()));
    }
    let mut score_rows = Vec::with_capacity(table.rows.len());
    let mut lengths = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let line = i as u64 + 2;
        if has_lengths {
            let as_len = |v: f64, what: &str| {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(malformed(
                        line,
                        format!("{what} must be a positive integer, got {v}"),
                    ))
                }
            };
            lengths.push((
                as_len(row[dims], "doc_len")?,
                as_len(row[dims + 1], "out_len")?,
            ));
        }
        score_rows.push(row[..dims].to_vec());
    }
    let scores = ScoreMatrix::from_rows(score_rows).map_err(|e| malformed(2, e.to_string()))?;
    Ok(ScoreInput {
        scores,
        lengths: has_lengths.then_some(lengths),
    })
}

pub fn format_rewards_csv(rewards: &[f64], advantages: &[f64]) -> String {
    let mut out = String::from("scalar_reward,advantage\n");
    for (r, a) in rewards.iter().zip(advantages) {
        let _ = writeln!(out, "{r},{a}");
    }
    out
}

/// Reads a rewards CSV back into `(rewards, advantages)`.
pub fn parse_rewards_csv(text: &str, source: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let table = parse_numeric_csv(text, source)?;
    if table.header != ["scalar_reward", "advantage"] {
        return Err(CliError::Malformed {
            path: source.into(),
            line: 1,
            reason: "expected header 'scalar_reward,advantage'".into(),
        });
    }
    Ok(table.rows.iter().map(|r| (r[0], r[1])).unzip())
}

/// Formats `value` rounded to `digits` significant digits, without trailing zeros.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), value)
        .parse()
        .unwrap_or(value);
    format!("{rounded}")
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scores_with_and_without_lengths() {
        let input = parse_score_csv("dim_1,dim_2\n0.5,0.8\n0.7,0.6\n", "t").unwrap();
        assert_eq!(input.scores.group_size(), 2);
        assert!(input.lengths.is_none());
        let input = parse_score_csv("dim_1,doc_len,out_len\n0.5,64,4\n", "t").unwrap();
        assert_eq!(input.lengths, Some(vec![(64, 4)]));
        assert_eq!(input.scores.dims(), 1);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let err = parse_score_csv("dim_1,dim_2\n0.5,0.8\n0.7,abc\n", "s.csv").unwrap_err();
        assert_eq!(err.to_string(), "s.csv: line 3: not a finite number: 'abc'");
        let err = parse_score_csv("dim_1,dim_2\n0.5,0.8\n0.7\n", "s.csv").unwrap_err();
        assert!(err.to_string().starts_with("s.csv: line 3"), "{err}");
        let err = parse_score_csv("dim_1,dim_2\n", "s.csv").unwrap_err();
        assert!(err.to_string().contains("no data rows"));
        let err = parse_score_csv("a,b\n1,2\n", "s.csv").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = parse_score_csv("dim_1,doc_len,out_len\n0.5,64,0\n", "s.csv").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.52, 12), "0.52");
        assert_eq!(
            format_significant(0.09999999999999998 * 0.001, 12),
            "0.0001"
        );
        assert_eq!(format_significant(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_significant(0.0, 12), "0");
    }
}
