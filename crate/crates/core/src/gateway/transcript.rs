//! Record/replay transcripts: canonical request fingerprint to response.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TranscriptMode {
    /// Call the provider, keep nothing.
    Live,
    /// Call the provider and keep every exchange.
    Record,
    /// Answer from stored exchanges only; never touches the network.
    Replay,
}

impl std::str::FromStr for TranscriptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(TranscriptMode::Live),
            "record" => Ok(TranscriptMode::Record),
            "replay" => Ok(TranscriptMode::Replay),
            other => Err(format!("unknown provider mode '{other}' (live, record, replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub response: String,
}

#[derive(Debug)]
pub struct Transcript {
    mode: TranscriptMode,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    pub fn live() -> Self {
        Self::with_entries(TranscriptMode::Live, Vec::new())
    }

    pub fn record() -> Self {
        Self::with_entries(TranscriptMode::Record, Vec::new())
    }

    pub fn replay(entries: Vec<TranscriptEntry>) -> Result<Self, GatewayError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.fingerprint.as_str()) {
                return Err(GatewayError::Transcript(format!(
                    "duplicate fingerprint {} in replay transcript",
                    e.fingerprint
                )));
            }
        }
        Ok(Self::with_entries(TranscriptMode::Replay, entries))
    }

    fn with_entries(mode: TranscriptMode, entries: Vec<TranscriptEntry>) -> Self {
        Transcript {
            mode,
            entries: Mutex::new(entries),
        }
    }

    /// Opens the transcript a stage should use: replay reads `path`, the
    /// other modes start empty.
    pub fn open(mode: TranscriptMode, path: &Path) -> Result<Self, GatewayError> {
        match mode {
            TranscriptMode::Replay => {
                let text = fs::read_to_string(path)
                    .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
                let entries: Vec<TranscriptEntry> = serde_json::from_str(&text)
                    .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
                Self::replay(entries)
            }
            TranscriptMode::Record => Ok(Self::record()),
            TranscriptMode::Live => Ok(Self::live()),
        }
    }

    pub fn mode(&self) -> TranscriptMode {
        self.mode
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, fingerprint: &str) -> Option<String> {
        self.entries
            .lock()
            .expect("transcript lock")
            .iter()
            .find(|e| e.fingerprint == fingerprint)
            .map(|e| e.response.clone())
    }

    /// Appends an exchange; a repeated fingerprint keeps its first response.
    pub fn append(&self, fingerprint: String, response: String) {
        let mut entries = self.entries.lock().expect("transcript lock");
        if let Some(existing) = entries.iter().find(|e| e.fingerprint == fingerprint) {
            if existing.response != response {
                log::warn!("request {fingerprint} answered differently twice; keeping the first answer");
            }
            return;
        }
        entries.push(TranscriptEntry { fingerprint, response });
    }

    pub fn to_json(&self) -> String {
        let entries = self.entries();
        serde_json::to_string_pretty(&entries).expect("entries serialize") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        write_atomic(path, self.to_json().as_bytes())
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))
    }
}
