//! Atomic CSV/JSON writers and the run manifest.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use ttlab::experiments::{ConvergenceRecord, SweepRecord};

use crate::config::Format;
use crate::error::CliError;

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable output");
    v.push(b'\n');
    v
}

/// CSV from a header and string rows (RFC 4180 quoting).
pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.into()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn diag_keys<'a>(maps: impl Iterator<Item = &'a std::collections::BTreeMap<String, f64>>) -> Vec<String> {
    let keys: BTreeSet<&String> = maps.flat_map(|m| m.keys()).collect();
    keys.into_iter().cloned().collect()
}

/// `N,lhs_re,lhs_im,rhs_re,rhs_im,gap,<diagnostics…>`
pub fn convergence_csv(records: &[ConvergenceRecord]) -> Result<Vec<u8>, CliError> {
    let keys = diag_keys(records.iter().map(|r| &r.diagnostics));
    let mut header: Vec<String> = ["N", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(keys.iter().cloned());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.n.to_string(),
                num(r.lhs.re),
                num(r.lhs.im),
                num(r.rhs.re),
                num(r.rhs.im),
                num(r.gap),
            ];
            row.extend(keys.iter().map(|k| r.diagnostics.get(k).map(|v| num(*v)).unwrap_or_default()));
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// `N,value,<diagnostics…>`
pub fn sweep_csv(records: &[SweepRecord]) -> Result<Vec<u8>, CliError> {
    let keys = diag_keys(records.iter().map(|r| &r.diagnostics));
    let mut header = vec!["N".to_string(), "value".to_string()];
    header.extend(keys.iter().cloned());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string(), num(r.value)];
            row.extend(keys.iter().map(|k| r.diagnostics.get(k).map(|v| num(*v)).unwrap_or_default()));
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Ok,
    AssertionFailed,
    Failed,
}

/// Record of one run; written before the run starts and rewritten at the end.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub timestamp: u64,
    pub seed: u64,
    pub subcommand: String,
    pub status: RunStatus,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects outputs of a run into a directory and keeps the manifest in step.
pub struct OutputSink {
    dir: PathBuf,
    formats: Vec<Format>,
    pub manifest: RunManifest,
}

impl OutputSink {
    pub fn start(dir: &Path, formats: &[Format], subcommand: &str, config_hash: String, seed: u64) -> Result<Self, CliError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let sink = OutputSink {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            manifest: RunManifest {
                config_hash,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp,
                seed,
                subcommand: subcommand.to_string(),
                status: RunStatus::Running,
                outputs: Vec::new(),
                notes: Vec::new(),
            },
        };
        sink.write_manifest()?;
        Ok(sink)
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        write_atomic(&self.dir.join(MANIFEST_NAME), &json_bytes(&self.manifest))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn put_json<T: Serialize + ?Sized>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        if self.wants(Format::Json) {
            self.put(&format!("{stem}.json"), &json_bytes(value))?;
        }
        Ok(())
    }

    pub fn put_csv(&mut self, stem: &str, bytes: Result<Vec<u8>, CliError>) -> Result<(), CliError> {
        if self.wants(Format::Csv) {
            self.put(&format!("{stem}.csv"), &bytes?)?;
        }
        Ok(())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.manifest.notes.push(text.into());
    }

    pub fn finish(mut self, status: RunStatus) -> Result<RunManifest, CliError> {
        self.manifest.status = status;
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ttlab::C64;

    #[test]
    fn convergence_header_and_quoting() {
        let r = ConvergenceRecord::new(8, C64::new(1.5, 0.0), C64::new(2.0, 0.0)).with("b", 1.0).with("a", 3.0);
        let text = String::from_utf8(convergence_csv(&[r]).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "N,lhs_re,lhs_im,rhs_re,rhs_im,gap,a,b");
        assert_eq!(lines.next().unwrap(), "8,1.5e0,0e0,2e0,0e0,5e-1,3e0,1e0");
        let q = String::from_utf8(csv_bytes(&["x".into()], &[vec!["a,b".into()]]).unwrap()).unwrap();
        assert_eq!(q, "x\n\"a,b\"\n");
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"{}");
        assert!(!dir.path().join("sub/out.json.tmp").exists());
    }
}
