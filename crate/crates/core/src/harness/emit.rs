//! Result serialization: CSV and JSONL trajectory dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::stats::AggregateStats;
use crate::harness::trajectory::TrajectoryRecord;

pub const CSV_HEADER: &str = "trajectory_id,iteration,tau,bits,herald,w_dominant,ratio";

/// One CSV row; the flat view of an iteration within a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRow {
    pub trajectory_id: u64,
    pub iteration: usize,
    pub tau: f64,
    pub bits: String,
    pub herald: bool,
    pub w_dominant: f64,
    pub ratio: f64,
}

/// 17 significant digits; round-trips f64 exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn flatten(records: &[TrajectoryRecord]) -> Vec<FlatRow> {
    let mut rows = Vec::new();
    for rec in records {
        for s in &rec.steps {
            rows.push(FlatRow {
                trajectory_id: rec.id,
                iteration: s.iteration,
                tau: s.tau,
                bits: s.bits.clone(),
                herald: s.herald_ok,
                w_dominant: s.w_dominant,
                ratio: s.ratio,
            });
        }
    }
    rows
}

pub fn write_csv<W: Write>(mut w: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    w.write_all(CSV_HEADER.as_bytes())?;
    w.write_all(b"\n")?;
    for row in flatten(records) {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.trajectory_id,
            row.iteration,
            fmt_float(row.tau),
            row.bits,
            row.herald,
            fmt_float(row.w_dominant),
            fmt_float(row.ratio)
        )?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    for row in flatten(records) {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<FlatRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Validation(format!(
                "bad csv header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Validation(format!(
                "line {}: expected 7 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |field: &str, err: String| {
            Error::Validation(format!("line {}: bad {field}: {err}", lineno + 2))
        };
        rows.push(FlatRow {
            trajectory_id: fields[0]
                .parse()
                .map_err(|e: std::num::ParseIntError| bad("trajectory_id", e.to_string()))?,
            iteration: fields[1]
                .parse()
                .map_err(|e: std::num::ParseIntError| bad("iteration", e.to_string()))?,
            tau: fields[2]
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad("tau", e.to_string()))?,
            bits: fields[3].to_string(),
            herald: fields[4]
                .parse()
                .map_err(|e: std::str::ParseBoolError| bad("herald", e.to_string()))?,
            w_dominant: fields[5]
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad("w_dominant", e.to_string()))?,
            ratio: fields[6]
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad("ratio", e.to_string()))?,
        });
    }
    Ok(rows)
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_ctx(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_csv_file(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = open_out(path)?;
    write_csv(&mut w, records).map_err(io_ctx(path))?;
    w.flush().map_err(io_ctx(path))
}

pub fn write_jsonl_file(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = open_out(path)?;
    write_jsonl(&mut w, records).map_err(io_ctx(path))?;
    w.flush().map_err(io_ctx(path))
}

pub fn write_stats_file(path: &Path, stats: &AggregateStats) -> Result<()> {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, stats).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    w.write_all(b"\n").map_err(io_ctx(path))?;
    w.flush().map_err(io_ctx(path))
}

/// Generic table writer for `reproduce` outputs: a header plus rows of
/// already-formatted cells.
pub fn write_table_csv<W: Write>(
    mut w: W,
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_table_csv_file(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = open_out(path)?;
    write_table_csv(&mut w, header, rows).map_err(io_ctx(path))?;
    w.flush().map_err(io_ctx(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trajectory::{IterationRecord, Terminal};
    use proptest::prelude::*;

    fn sample_records() -> Vec<TrajectoryRecord> {
        vec![TrajectoryRecord {
            id: 3,
            steps: vec![
                IterationRecord {
                    iteration: 0,
                    tau: 1.5,
                    bits: "01".into(),
                    herald_ok: true,
                    w_dominant: 0.75,
                    ratio: 1.0 / 3.0,
                    mean_log_ratio: -1.0,
                    dominant_index: 0,
                    restarted: false,
                },
                IterationRecord {
                    iteration: 1,
                    tau: 0.25,
                    bits: "10".into(),
                    herald_ok: false,
                    w_dominant: 0.75,
                    ratio: 1.0 / 3.0,
                    mean_log_ratio: -1.0,
                    dominant_index: 0,
                    restarted: true,
                },
            ],
            restarts: 1,
            final_populations: vec![0.75, 0.25],
            terminal: Terminal::ExhaustedBudget,
        }]
    }

    #[test]
    fn csv_round_trip() {
        let records = sample_records();
        let mut buf = Vec::new();
        write_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(!text.contains('\r'));
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows, flatten(&records));
    }

    #[test]
    fn empty_input_yields_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[]).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn jsonl_one_object_per_line() {
        let records = sample_records();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<FlatRow> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(rows, flatten(&records));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_csv("nope\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nx,0,0.0,01,true,0.5,0.5\n")).is_err());
    }

    proptest! {
        #[test]
        fn float_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let back: f64 = fmt_float(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
