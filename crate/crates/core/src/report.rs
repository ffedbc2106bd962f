//! JSON reports written by the command line front end.
//!
//! A report is a pure function of the inputs and flags except for
//! `elapsed_ms`, which [`Report::canonical`] drops.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An input file with its content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Outcome of one command.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub verdict: Value,
    /// Files written next to the report.
    pub witnesses: Vec<String>,
    /// Names of the caps that were hit.
    pub caps_hit: Vec<String>,
    /// Set when a cap was hit and the verdict may be incomplete.
    pub inconclusive: bool,
    pub elapsed_ms: u64,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report {
            command: command.to_string(),
            inputs: Vec::new(),
            verdict: Value::Null,
            witnesses: Vec::new(),
            caps_hit: Vec::new(),
            inconclusive: false,
            elapsed_ms: 0,
        }
    }

    /// Reads `path`, records its hash and returns the text.
    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputFile {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
            bytes: text.len(),
        });
        Ok(text)
    }

    /// Writes a witness file and records its path.
    pub fn write_witness(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(path, text).map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))?;
        self.witnesses.push(path.display().to_string());
        Ok(())
    }

    /// Marks a cap as hit; the verdict becomes inconclusive.
    pub fn cap_hit(&mut self, name: &str) {
        if !self.caps_hit.iter().any(|c| c == name) {
            self.caps_hit.push(name.to_string());
        }
        self.inconclusive = true;
    }

    /// 0 for a verdict, 2 when a cap was hit.
    pub fn exit_code(&self) -> i32 {
        if self.caps_hit.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serialises")
    }

    /// The report without the timing field.
    pub fn canonical(&self) -> Value {
        let mut v = self.to_json();
        if let Value::Object(m) = &mut v {
            m.remove("elapsed_ms");
        }
        v
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_hash() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn cap_makes_inconclusive() {
        let mut r = Report::new("x");
        assert_eq!(r.exit_code(), 0);
        r.cap_hit("cactus-cap");
        r.cap_hit("cactus-cap");
        assert_eq!(r.caps_hit.len(), 1);
        assert!(r.inconclusive);
        assert_eq!(r.exit_code(), 2);
        assert!(r.canonical().get("elapsed_ms").is_none());
    }
}
