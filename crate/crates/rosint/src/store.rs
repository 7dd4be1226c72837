//! Crash-safe persistence of scan results: one self-describing JSON object
//! per line, schema-versioned header first, optional end marker on finalize.
//! A truncated final line (crash mid-append) costs at most one report and is
//! skipped with a warning on load.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{FeatureHit, HostCategory};
use crate::fingerprint::HttpFingerprint;
use crate::probe::ProbeOutcome;
use crate::snapshot::RosSnapshot;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o on {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error("scan already finalized; no further reports can be appended")]
    Finalized,
    #[error("{file} line {line_no}: {reason}")]
    Corrupt {
        file: String,
        line_no: usize,
        reason: String,
    },
    #[error("{file}: unsupported schema version {found} (supported: {SCHEMA_VERSION})")]
    SchemaVersion { file: String, found: u32 },
}

/// Per-stage evidence captured while a host moved through the funnel.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageOutcomes {
    /// Stage 1: the ROS-port (or Rosbridge-port) transport probe.
    pub port_probe: Option<ProbeOutcome>,
    /// Stage 2: the control-port probe.
    pub control_probe: Option<ProbeOutcome>,
    /// Stage 3: HTTP GET fingerprint or WebSocket upgrade evidence.
    pub http: Option<HttpFingerprint>,
}

/// The unit row behind every report table: one host, one scan run.
///
/// `stage_reached` is the furthest stage that produced a positive result;
/// stage 4 counts only when a snapshot was actually captured, so
/// `snapshot.is_some() == (stage_reached == 4)` and a category is present
/// exactly when a snapshot is.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HostReport {
    pub target: SocketAddr,
    pub stage_reached: u8,
    pub outcomes: StageOutcomes,
    pub snapshot: Option<RosSnapshot>,
    pub hits: Vec<FeatureHit>,
    pub category: Option<HostCategory>,
    pub warnings: Vec<String>,
}

impl HostReport {
    pub fn record_id(&self) -> String {
        self.target.ip().to_string()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanMeta {
    pub scan_id: String,
    pub config_hash: String,
    pub started_at: DateTime<Utc>,
    pub ended_at: Option<DateTime<Utc>>,
    pub finalized: bool,
}

#[derive(Debug, Clone)]
pub struct ScanRecord {
    pub meta: ScanMeta,
    pub host_reports: Vec<HostReport>,
}

impl ScanRecord {
    /// In-memory record for tests and offline recomputation.
    pub fn synthetic(scan_id: &str, host_reports: Vec<HostReport>) -> Self {
        ScanRecord {
            meta: ScanMeta {
                scan_id: scan_id.to_string(),
                config_hash: String::new(),
                started_at: Utc::now(),
                ended_at: None,
                finalized: true,
            },
            host_reports,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Meta {
        schema_version: u32,
        scan_id: String,
        config_hash: String,
        started_at: DateTime<Utc>,
    },
    Host {
        report: Box<HostReport>,
    },
    End {
        ended_at: DateTime<Utc>,
    },
}

/// Append-only writer for one scan run. Each report goes out as one complete
/// line in a single write, then gets flushed.
pub struct ScanWriter {
    writer: BufWriter<File>,
    path: String,
    finalized: bool,
}

impl ScanWriter {
    pub fn create(path: &Path, scan_id: &str, config_hash: &str) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|source| StoreError::Io {
                file: path.display().to_string(),
                source,
            })?;
        let mut writer = ScanWriter {
            writer: BufWriter::new(file),
            path: path.display().to_string(),
            finalized: false,
        };
        writer.write_line(&Line::Meta {
            schema_version: SCHEMA_VERSION,
            scan_id: scan_id.to_string(),
            config_hash: config_hash.to_string(),
            started_at: Utc::now(),
        })?;
        Ok(writer)
    }

    pub fn append(&mut self, report: &HostReport) -> Result<(), StoreError> {
        if self.finalized {
            return Err(StoreError::Finalized);
        }
        self.write_line(&Line::Host {
            report: Box::new(report.clone()),
        })
    }

    pub fn finalize(&mut self) -> Result<(), StoreError> {
        if self.finalized {
            return Err(StoreError::Finalized);
        }
        self.write_line(&Line::End {
            ended_at: Utc::now(),
        })?;
        self.finalized = true;
        Ok(())
    }

    fn write_line(&mut self, line: &Line) -> Result<(), StoreError> {
        let mut encoded = serde_json::to_string(line)?;
        encoded.push('\n');
        let io_err = |source| StoreError::Io {
            file: self.path.clone(),
            source,
        };
        self.writer.write_all(encoded.as_bytes()).map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        Ok(())
    }
}

/// Load a scan record. Returns the record plus load warnings (for instance a
/// skipped truncated final line).
pub fn load_scan(path: &Path) -> Result<(ScanRecord, Vec<String>), StoreError> {
    let file_name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        file: file_name.clone(),
        source,
    })?;
    let mut warnings = Vec::new();

    let complete_up_to = text.rfind('\n').map(|i| i + 1).unwrap_or(0);
    let trailing = &text[complete_up_to..];

    let mut meta: Option<ScanMeta> = None;
    let mut host_reports = Vec::new();
    let mut line_no = 0usize;
    let mut parse = |raw: &str, line_no: usize, is_final: bool| -> Result<bool, StoreError> {
        let line: Line = match serde_json::from_str(raw) {
            Ok(line) => line,
            Err(err) if is_final => {
                warnings.push(format!(
                    "skipped truncated final line {line_no} ({err}); at most one report lost"
                ));
                return Ok(false);
            }
            Err(err) => {
                return Err(StoreError::Corrupt {
                    file: file_name.clone(),
                    line_no,
                    reason: err.to_string(),
                })
            }
        };
        match line {
            Line::Meta {
                schema_version,
                scan_id,
                config_hash,
                started_at,
            } => {
                if schema_version != SCHEMA_VERSION {
                    return Err(StoreError::SchemaVersion {
                        file: file_name.clone(),
                        found: schema_version,
                    });
                }
                meta = Some(ScanMeta {
                    scan_id,
                    config_hash,
                    started_at,
                    ended_at: None,
                    finalized: false,
                });
            }
            Line::Host { report } => host_reports.push(*report),
            Line::End { ended_at } => {
                if let Some(meta) = meta.as_mut() {
                    meta.ended_at = Some(ended_at);
                    meta.finalized = true;
                }
            }
        }
        Ok(true)
    };

    for raw in text[..complete_up_to].lines() {
        line_no += 1;
        if raw.trim().is_empty() {
            continue;
        }
        parse(raw, line_no, false)?;
    }
    if !trailing.trim().is_empty() {
        // No trailing newline: the writer crashed mid-append. Accept the line
        // if it parses, otherwise drop it with a warning.
        parse(trailing, line_no + 1, true)?;
    }

    let meta = meta.ok_or(StoreError::Corrupt {
        file: file_name,
        line_no: 1,
        reason: "missing scan header line".into(),
    })?;
    if !meta.finalized {
        warnings.push("scan record has no end marker (scan interrupted?)".into());
    }
    Ok((
        ScanRecord {
            meta,
            host_reports,
        },
        warnings,
    ))
}

/// Stable fingerprint for config provenance in scan headers (FNV-1a 64).
pub fn config_fingerprint(canonical: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{PortVerdict, ProbeOutcome};

    fn report(ip: [u8; 4]) -> HostReport {
        let target = SocketAddr::from((ip, 11311));
        HostReport {
            target,
            stage_reached: 1,
            outcomes: StageOutcomes {
                port_probe: Some(ProbeOutcome {
                    target,
                    verdict: PortVerdict::Closed,
                    rtt_ms: Some(0.3),
                    observed_at: Utc::now(),
                }),
                control_probe: None,
                http: None,
            },
            snapshot: None,
            hits: Vec::new(),
            category: None,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn append_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.jsonl");
        let mut writer = ScanWriter::create(&path, "scan-1", "cafebabe").unwrap();
        writer.append(&report([10, 0, 0, 1])).unwrap();
        writer.append(&report([10, 0, 0, 2])).unwrap();
        writer.finalize().unwrap();

        let (record, warnings) = load_scan(&path).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(record.meta.scan_id, "scan-1");
        assert!(record.meta.finalized);
        assert_eq!(record.host_reports.len(), 2);
        assert_eq!(record.host_reports[1].record_id(), "10.0.0.2");
    }

    #[test]
    fn append_after_finalize_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.jsonl");
        let mut writer = ScanWriter::create(&path, "scan-1", "x").unwrap();
        writer.finalize().unwrap();
        assert!(matches!(
            writer.append(&report([10, 0, 0, 1])),
            Err(StoreError::Finalized)
        ));
    }

    #[test]
    fn truncated_final_line_loses_at_most_one_report() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.jsonl");
        let mut writer = ScanWriter::create(&path, "scan-1", "x").unwrap();
        for i in 0..5 {
            writer.append(&report([10, 0, 0, i])).unwrap();
        }
        drop(writer);

        // Chop the file mid-way through the last line, as a crash would.
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = text.trim_end().rfind('\n').unwrap() + 10;
        std::fs::write(&path, &text[..cut]).unwrap();

        let (record, warnings) = load_scan(&path).unwrap();
        assert_eq!(record.host_reports.len(), 4);
        assert!(warnings.iter().any(|w| w.contains("truncated final line")));
    }

    #[test]
    fn corruption_in_the_middle_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.jsonl");
        let mut writer = ScanWriter::create(&path, "scan-1", "x").unwrap();
        writer.append(&report([10, 0, 0, 1])).unwrap();
        writer.append(&report([10, 0, 0, 2])).unwrap();
        drop(writer);

        let text = std::fs::read_to_string(&path).unwrap();
        let mangled = text.replacen("\"kind\":\"host\"", "\"kind\":\"host?", 1);
        std::fs::write(&path, mangled).unwrap();
        assert!(matches!(
            load_scan(&path),
            Err(StoreError::Corrupt { line_no: 2, .. })
        ));
    }

    #[test]
    fn future_schema_versions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.jsonl");
        std::fs::write(
            &path,
            "{\"kind\":\"meta\",\"schema_version\":99,\"scan_id\":\"s\",\"config_hash\":\"h\",\"started_at\":\"2020-01-01T00:00:00Z\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_scan(&path),
            Err(StoreError::SchemaVersion { found: 99, .. })
        ));
    }

    #[test]
    fn config_fingerprint_is_stable() {
        assert_eq!(config_fingerprint(""), "cbf29ce484222325");
        assert_eq!(config_fingerprint("a"), config_fingerprint("a"));
        assert_ne!(config_fingerprint("a"), config_fingerprint("b"));
    }
}
