//! Log-file IO: impression logs as line-delimited JSON, visit labels as CSV.
//! Writers emit deterministic bytes (stable field order, `\n` line endings)
//! so identical runs produce identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::domain::{ImpressionLog, VisitLabel};

#[derive(Debug, Error)]
pub enum LogIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid impression record: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: invalid label row: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> LogIoError {
    LogIoError::Io { path: path.display().to_string(), source }
}

/// Write impressions as one JSON object per line.
pub fn write_impressions(path: &Path, records: &[ImpressionLog]) -> Result<(), LogIoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec).expect("impression records always serialize");
        out.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Read a line-delimited JSON impression log; blank lines are skipped.
pub fn read_impressions(path: &Path) -> Result<Vec<ImpressionLog>, LogIoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| LogIoError::Json {
            path: path.display().to_string(),
            line: idx + 1,
            source,
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Write visit labels as CSV with header `user_id,s_final,y_obs`.
pub fn write_labels(path: &Path, labels: &[VisitLabel]) -> Result<(), LogIoError> {
    let csv_err = |source| LogIoError::Csv { path: path.display().to_string(), source };
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    for label in labels {
        out.serialize(label).map_err(csv_err)?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Read a visit-label CSV written by [`write_labels`].
pub fn read_labels(path: &Path) -> Result<Vec<VisitLabel>, LogIoError> {
    let csv_err = |source| LogIoError::Csv { path: path.display().to_string(), source };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut labels = Vec::new();
    for row in reader.deserialize() {
        labels.push(row.map_err(csv_err)?);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Arm, ExposureBin, Features, Mechanism, Micros};

    fn sample_impression(user_id: u32, won: bool) -> ImpressionLog {
        ImpressionLog {
            user_id,
            day: 2,
            hour: 13,
            auction_id: u64::from(user_id) * 10,
            arm: Arm::Unbiased,
            slot_id: 4,
            features: Features {
                visit_frequency: 1.25,
                distance_km: 3.5,
                prior_impressions: 2,
                logged_pcvr: 0.04,
            },
            exposure_count_before: 6,
            bin_before: ExposureBin::from_index(5),
            phi: 1.4,
            pcvr: 0.04,
            bid_micros: Micros(12_000),
            won,
            price_paid_micros: if won { Micros(9_000) } else { Micros::ZERO },
            clearing_price_micros: won.then_some(Micros(9_000)),
            mechanism: Mechanism::SecondPrice,
            clicked: won,
        }
    }

    #[test]
    fn impressions_round_trip_and_bytes_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("impressions.jsonl");
        let records = vec![sample_impression(1, true), sample_impression(2, false)];
        write_impressions(&path, &records).unwrap();
        let first = std::fs::read(&path).unwrap();
        assert_eq!(read_impressions(&path).unwrap(), records);
        write_impressions(&path, &records).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 2);
    }

    #[test]
    fn labels_round_trip_with_expected_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels = vec![
            VisitLabel { user_id: 1, s_final: 0, y_obs: 2 },
            VisitLabel { user_id: 2, s_final: 11, y_obs: 0 },
        ];
        write_labels(&path, &labels).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("user_id,s_final,y_obs\n"), "got: {text}");
        assert_eq!(read_labels(&path).unwrap(), labels);
    }

    #[test]
    fn empty_logs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let jsonl = dir.path().join("empty.jsonl");
        write_impressions(&jsonl, &[]).unwrap();
        assert!(read_impressions(&jsonl).unwrap().is_empty());
        let csvp = dir.path().join("empty.csv");
        write_labels(&csvp, &[]).unwrap();
        assert!(read_labels(&csvp).unwrap().is_empty());
    }

    #[test]
    fn malformed_json_reports_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&sample_impression(1, true)).unwrap();
        std::fs::write(&path, format!("{good}\nnot-json\n")).unwrap();
        let err = read_impressions(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.jsonl:2"), "got: {msg}");
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_impressions(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.jsonl"));
    }
}
