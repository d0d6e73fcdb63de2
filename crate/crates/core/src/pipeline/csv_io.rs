//! CSV contracts: readings (`consumer_id,timestamp,kwh`) and labels
//! (`consumer_id,label`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime};

use super::{ConsumerSeries, Label, CADENCE_MINUTES};
use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M"))
        .ok()
        .or_else(|| {
            DateTime::parse_from_rfc3339(raw)
                .ok()
                .map(|d| d.naive_utc())
        })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header '{}', got '{}'",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

/// Reads consumer series from the readings CSV. Rows may come in any order;
/// series are returned sorted by consumer id with readings in time order.
pub fn read_series<R: Read>(input: R) -> Result<Vec<ConsumerSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    check_header(&mut reader, &["consumer_id", "timestamp", "kwh"])?;
    let mut grouped: BTreeMap<String, Vec<(NaiveDateTime, f64, usize)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", record.len())));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(bad("empty consumer_id".into()));
        }
        let ts = parse_timestamp(&record[1])
            .ok_or_else(|| bad(format!("bad timestamp '{}'", &record[1])))?;
        let kwh: f64 = record[2]
            .parse()
            .map_err(|_| bad(format!("bad kwh value '{}'", &record[2])))?;
        if !kwh.is_finite() || kwh < 0.0 {
            return Err(bad(format!(
                "kwh must be finite and non-negative, got {kwh}"
            )));
        }
        grouped
            .entry(id.to_string())
            .or_default()
            .push((ts, kwh, line));
    }

    let step = Duration::minutes(CADENCE_MINUTES);
    let mut out = Vec::with_capacity(grouped.len());
    for (id, mut rows) in grouped {
        rows.sort_by_key(|r| r.0);
        for pair in rows.windows(2) {
            if pair[1].0 == pair[0].0 {
                return Err(Error::Data(format!(
                    "consumer {id}: duplicate timestamp {} (line {})",
                    format_timestamp(&pair[1].0),
                    pair[1].2
                )));
            }
            if pair[1].0 - pair[0].0 != step {
                return Err(Error::Data(format!(
                    "consumer {id}: readings at {} and {} break the {CADENCE_MINUTES}-minute cadence",
                    format_timestamp(&pair[0].0),
                    format_timestamp(&pair[1].0)
                )));
            }
        }
        let start = rows[0].0;
        let readings = rows.into_iter().map(|r| r.1).collect();
        out.push(ConsumerSeries::new(id, start, readings, Label::Unknown)?);
    }
    Ok(out)
}

pub fn ingest_csv(path: &Path) -> Result<Vec<ConsumerSeries>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(std::io::BufReader::new(file))
}

pub fn write_series<W: Write>(series: &[ConsumerSeries], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    let step = Duration::minutes(CADENCE_MINUTES);
    let io = |e: std::io::Error| Error::io("<readings csv>", e);
    writeln!(w, "consumer_id,timestamp,kwh").map_err(io)?;
    for s in series {
        let mut t = s.start;
        for v in &s.readings {
            writeln!(w, "{},{},{}", s.consumer_id, format_timestamp(&t), v).map_err(io)?;
            t += step;
        }
    }
    w.flush().map_err(io)
}

pub fn read_labels<R: Read>(input: R) -> Result<BTreeMap<String, Label>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    check_header(&mut reader, &["consumer_id", "label"])?;
    let mut labels = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let label = record[1]
            .parse::<u8>()
            .ok()
            .and_then(Label::from_code)
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("label must be 0 or 1, got '{}'", &record[1]),
            })?;
        labels.insert(record[0].to_string(), label);
    }
    Ok(labels)
}

pub fn write_labels<W: Write>(series: &[ConsumerSeries], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    let io = |e: std::io::Error| Error::io("<labels csv>", e);
    writeln!(w, "consumer_id,label").map_err(io)?;
    for s in series {
        if let Some(code) = s.label.code() {
            writeln!(w, "{},{code}", s.consumer_id).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Attaches labels by consumer id; consumers missing from `labels` stay unknown.
pub fn apply_labels(series: &mut [ConsumerSeries], labels: &BTreeMap<String, Label>) {
    for s in series {
        if let Some(l) = labels.get(&s.consumer_id) {
            s.label = *l;
        }
    }
}
