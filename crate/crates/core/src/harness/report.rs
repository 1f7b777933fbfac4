use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One repetition of a run, with the union of results accumulated so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRow {
    pub rep: u32,
    pub seed: u64,
    pub pre_candidates: u64,
    pub candidates: u64,
    pub results: u64,
    pub cum_results: u64,
    /// Absent when no ground truth was supplied.
    pub cum_recall: Option<f64>,
    pub max_depth: u32,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub lambda: f64,
    pub params: serde_json::Value,
    pub master_seed: u64,
    pub phi_target: Option<f64>,
    pub ground_truth_pairs: Option<u64>,
    pub repetitions: Vec<RepetitionRow>,
    pub repetitions_used: u32,
    pub final_results: u64,
    pub final_recall: Option<f64>,
    pub reached_target: bool,
    pub total_seconds: f64,
}

impl RunReport {
    /// Zeroes every timing field, leaving only deterministic content.
    pub fn mask_timing(&mut self) {
        self.total_seconds = 0.0;
        for row in &mut self.repetitions {
            row.seconds = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::UnknownFormat(s.to_owned())),
        }
    }
}

/// The CSV view of a repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub rep: u32,
    pub pre_candidates: u64,
    pub candidates: u64,
    pub results: u64,
    pub cum_results: u64,
    pub cum_recall: Option<f64>,
    pub max_depth: u32,
    pub seconds: f64,
}

impl From<&RepetitionRow> for CsvRow {
    fn from(r: &RepetitionRow) -> Self {
        CsvRow {
            rep: r.rep,
            pre_candidates: r.pre_candidates,
            candidates: r.candidates,
            results: r.results,
            cum_results: r.cum_results,
            cum_recall: r.cum_recall,
            max_depth: r.max_depth,
            seconds: r.seconds,
        }
    }
}

pub const CSV_HEADER: &str = "rep,pre_candidates,candidates,results,cum_results,cum_recall,max_depth,seconds";

pub fn write_report(report: &RunReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut out = Vec::new();
            out.extend_from_slice(CSV_HEADER.as_bytes());
            out.push(b'\n');
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            for row in &report.repetitions {
                writer.serialize(CsvRow::from(row))?;
            }
            writer.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

pub fn read_json_report(bytes: &[u8]) -> Result<RunReport> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn read_csv_rows(bytes: &[u8]) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(bytes);
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(rows: usize) -> RunReport {
        RunReport {
            algorithm: "cpsjoin".into(),
            lambda: 0.7,
            params: serde_json::json!({"lambda": 0.7, "limit": 250}),
            master_seed: 3,
            phi_target: Some(0.9),
            ground_truth_pairs: Some(10),
            repetitions: (0..rows)
                .map(|i| RepetitionRow {
                    rep: i as u32,
                    seed: 1000 + i as u64,
                    pre_candidates: 50,
                    candidates: 20,
                    results: 5,
                    cum_results: 5 + i as u64,
                    cum_recall: Some(0.1 * (i + 1) as f64 / 3.0),
                    max_depth: 4,
                    seconds: 0.123_456_789_012_345_6,
                })
                .collect(),
            repetitions_used: rows as u32,
            final_results: 5 + rows as u64,
            final_recall: Some(1.0 / 3.0),
            reached_target: false,
            total_seconds: 1.5,
        }
    }

    #[test]
    fn empty_report_is_header_only_csv() {
        let csv = write_report(&report(0), ReportFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_has_one_row_per_repetition_and_round_trips() {
        let r = report(4);
        let csv = write_report(&r, ReportFormat::Csv).unwrap();
        let rows = read_csv_rows(&csv).unwrap();
        assert_eq!(rows.len(), r.repetitions_used as usize);
        let expected: Vec<CsvRow> = r.repetitions.iter().map(CsvRow::from).collect();
        assert_eq!(rows, expected);
    }

    #[test]
    fn csv_leaves_recall_blank_without_truth() {
        let mut r = report(1);
        r.repetitions[0].cum_recall = None;
        let text = String::from_utf8(write_report(&r, ReportFormat::Csv).unwrap()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        assert_eq!(read_csv_rows(text.as_bytes()).unwrap()[0].cum_recall, None);
    }

    #[test]
    fn json_round_trips() {
        let r = report(3);
        let bytes = write_report(&r, ReportFormat::Json).unwrap();
        assert_eq!(read_json_report(&bytes).unwrap(), r);
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert!(matches!("xml".parse::<ReportFormat>(), Err(Error::UnknownFormat(_))));
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
    }
}
