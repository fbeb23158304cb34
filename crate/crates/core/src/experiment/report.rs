use std::io::Write;
use std::path::Path;

use super::{aggregate, Aggregate, ExperimentReport, ExperimentRow, Method};
use crate::error::{Error, Result};

pub const ROW_HEADER: &str = "rep,method,d,coverage,width,threshold,chosen,runtime_ms";
pub const AGGREGATE_HEADER: &str = "method,d,mean_coverage,se_coverage,mean_width,se_width";

const ERROR_PREFIX: &str = "error: ";

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numeric(format!("csv encoding failed: {e}"))
}

/// Serializes the report: per-row records, a blank line, then aggregates.
pub fn write_csv<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(ROW_HEADER.split(',')).map_err(csv_err)?;
        for r in &report.rows {
            let chosen = match &r.error {
                Some(e) => format!("{ERROR_PREFIX}{e}"),
                None => r.chosen.clone(),
            };
            w.write_record([
                r.rep.to_string(),
                r.method.to_string(),
                r.d.to_string(),
                num(r.coverage),
                num(r.width),
                num(r.threshold),
                chosen,
                num(r.runtime_ms),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Numeric(e.to_string()))?;
    }
    buf.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(AGGREGATE_HEADER.split(',')).map_err(csv_err)?;
        for a in &report.aggregates {
            w.write_record([
                a.method.to_string(),
                a.d.to_string(),
                num(a.mean_coverage),
                num(a.se_coverage),
                num(a.mean_width),
                num(a.se_width),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Numeric(e.to_string()))?;
    }
    out.write_all(&buf).map_err(|e| Error::Numeric(e.to_string()))
}

/// Writes the report to `path`, creating parent directories.
pub fn emit_csv(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut buf = Vec::new();
    write_csv(report, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, row: usize, col: usize) -> Result<T> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        row,
        column: col + 1,
        message: format!("cannot parse '{raw}'"),
    })
}

/// Parses the text written by [`write_csv`]. Aggregates are read from the
/// file when present and recomputed from the rows otherwise.
pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    let (rows_part, agg_part) = match text.find("\n\n") {
        Some(i) => (&text[..i + 1], Some((&text[i + 2..], text[..i + 2].lines().count() + 1))),
        None => (text, None),
    };
    let header = rows_part.lines().next().unwrap_or("");
    if header.trim() != ROW_HEADER {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: format!("expected header '{ROW_HEADER}'"),
        });
    }
    let mut rows = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().from_reader(rows_part.as_bytes());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row: line,
            column: 1,
            message: e.to_string(),
        })?;
        let chosen: String = rec.get(6).unwrap_or("").to_string();
        let (chosen, error) = match chosen.strip_prefix(ERROR_PREFIX) {
            Some(e) => (String::new(), Some(e.to_string())),
            None => (chosen, None),
        };
        rows.push(ExperimentRow {
            rep: field(&rec, line, 0)?,
            method: field::<Method>(&rec, line, 1)?,
            d: field(&rec, line, 2)?,
            coverage: field(&rec, line, 3)?,
            width: field(&rec, line, 4)?,
            threshold: field(&rec, line, 5)?,
            chosen,
            runtime_ms: field(&rec, line, 7)?,
            error,
        });
    }

    let aggregates = match agg_part {
        Some((part, first_line)) if !part.trim().is_empty() => {
            if part.lines().next().unwrap_or("").trim() != AGGREGATE_HEADER {
                return Err(Error::Parse {
                    row: first_line,
                    column: 1,
                    message: format!("expected header '{AGGREGATE_HEADER}'"),
                });
            }
            let recomputed = aggregate(&rows);
            let mut out = Vec::new();
            let mut rdr = csv::ReaderBuilder::new().from_reader(part.as_bytes());
            for (i, rec) in rdr.records().enumerate() {
                let line = first_line + i + 1;
                let rec = rec.map_err(|e| Error::Parse {
                    row: line,
                    column: 1,
                    message: e.to_string(),
                })?;
                let method: Method = field(&rec, line, 0)?;
                let d: usize = field(&rec, line, 1)?;
                let n = recomputed
                    .iter()
                    .find(|a| a.method == method && a.d == d)
                    .map_or(0, |a| a.n);
                out.push(Aggregate {
                    method,
                    d,
                    n,
                    mean_coverage: field(&rec, line, 2)?,
                    se_coverage: field(&rec, line, 3)?,
                    mean_width: field(&rec, line, 4)?,
                    se_width: field(&rec, line, 5)?,
                });
            }
            out
        }
        _ => aggregate(&rows),
    };
    Ok(ExperimentReport { rows, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rep: usize, method: Method, coverage: f64, width: f64) -> ExperimentRow {
        ExperimentRow {
            rep,
            method,
            d: 10,
            coverage,
            width,
            threshold: width / 2.0,
            chosen: "12.5".into(),
            runtime_ms: 0.0,
            error: None,
        }
    }

    fn same(a: f64, b: f64) -> bool {
        a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
    }

    #[test]
    fn header_and_layout() {
        let report = ExperimentReport::from_rows(vec![row(0, Method::Efcp, 0.9, 3.0), row(1, Method::Efcp, 0.8, 2.0)]);
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ROW_HEADER);
        assert_eq!(lines[1], "0,EFCP,10,0.9,3,1.5,12.5,0");
        assert_eq!(lines[3], "");
        assert_eq!(lines[4], AGGREGATE_HEADER);
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn round_trip_preserves_rows_and_aggregates() {
        let mut rows = vec![
            row(0, Method::Efcp, 0.91, 1.0 / 3.0),
            row(0, Method::Vfcp, 0.9, f64::INFINITY),
            row(1, Method::Efcp, 0.87, 0.1 + 0.2),
        ];
        let mut failed = row(1, Method::Vfcp, f64::NAN, f64::NAN);
        failed.chosen.clear();
        failed.error = Some("numeric failure: singular, \"quoted\"".into());
        rows.push(failed);
        let report = ExperimentReport::from_rows(rows);
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let back = parse_report(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.rows.len(), report.rows.len());
        for (a, b) in report.rows.iter().zip(&back.rows) {
            assert_eq!((a.rep, a.method, a.d, &a.chosen, &a.error), (b.rep, b.method, b.d, &b.chosen, &b.error));
            assert!(same(a.coverage, b.coverage) && same(a.width, b.width) && same(a.threshold, b.threshold));
        }
        for (a, b) in report.aggregates.iter().zip(&back.aggregates) {
            assert_eq!((a.method, a.d, a.n), (b.method, b.d, b.n));
            assert!(same(a.mean_coverage, b.mean_coverage) && same(a.se_coverage, b.se_coverage));
            assert!(same(a.mean_width, b.mean_width) && same(a.se_width, b.se_width));
        }
    }

    #[test]
    fn malformed_input_reports_position() {
        let err = parse_report("rep,method\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
        let text = format!("{ROW_HEADER}\n0,EFCP,10,abc,1,1,x,0\n");
        match parse_report(&text).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 4)),
            e => panic!("{e}"),
        }
    }
}
