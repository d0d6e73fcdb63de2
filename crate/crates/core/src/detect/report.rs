//! Report CSVs: `consumer_id,n_windows,at_score,threshold,decision` and
//! per-window `consumer_id,window_index,as_score`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::AnomalyReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub consumer_id: String,
    pub n_windows: usize,
    pub at_score: f64,
    pub threshold: f64,
    pub decision: u8,
}

impl From<&AnomalyReport> for ReportRow {
    fn from(r: &AnomalyReport) -> Self {
        Self {
            consumer_id: r.consumer_id.clone(),
            n_windows: r.window_scores.len(),
            at_score: r.total_score,
            threshold: r.threshold,
            decision: r.decision_code(),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

pub fn write_report<W: Write>(reports: &[AnomalyReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(ReportRow::from(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<report csv>", e))
}

pub fn read_report<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let rows: Vec<ReportRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err)?;
    for r in &rows {
        if r.decision > 1 {
            return Err(Error::Data(format!(
                "consumer {}: decision must be 0 or 1",
                r.consumer_id
            )));
        }
    }
    Ok(rows)
}

pub fn write_window_scores<W: Write>(reports: &[AnomalyReport], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    let io = |e: std::io::Error| Error::io("<window scores csv>", e);
    writeln!(w, "consumer_id,window_index,as_score").map_err(io)?;
    for r in reports {
        for (i, s) in r.window_scores.iter().enumerate() {
            writeln!(w, "{},{i},{s}", r.consumer_id).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip() {
        let reports = vec![AnomalyReport {
            consumer_id: "C00001".into(),
            window_scores: vec![0.5, 1.25],
            total_score: 1.8125,
            threshold: 1.0,
            decision: true,
        }];
        let mut buf = Vec::new();
        write_report(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("consumer_id,n_windows,at_score,threshold,decision\n"));
        let rows = read_report(buf.as_slice()).unwrap();
        assert_eq!(rows[0], ReportRow::from(&reports[0]));
    }
}
