//! Line-delimited JSON transcripts: one header line, then one line per step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PilotError, PilotResponse, PromptVariant};
use crate::fsm::FsmState;
use crate::harness::{Query, ReachThresholds};
use crate::sim::{DronePose, RotationConvention};

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub version: u32,
    pub pilot: String,
    pub plan: String,
    pub query: Query,
    pub spawn: DronePose,
    pub max_steps: usize,
    pub reach: ReachThresholds,
    pub rotation_convention: RotationConvention,
    pub prompt_version: String,
    pub prompt_variant: PromptVariant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub step: usize,
    pub state: FsmState,
    pub prompt_digest: String,
    pub raw: String,
    /// The accepted response; absent when the pilot failed this step.
    pub response: Option<PilotResponse>,
    pub violations: Vec<String>,
    pub attempts: u32,
    #[serde(default)]
    pub latency_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header(TranscriptHeader),
    Step(TranscriptRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub records: Vec<TranscriptRecord>,
}

/// Append-only writer; every line is flushed as it is written.
pub struct TranscriptWriter {
    out: BufWriter<File>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PilotError {
    PilotError::Transcript(format!("{}: {e}", path.display()))
}

impl TranscriptWriter {
    pub fn create(path: &Path, header: &TranscriptHeader) -> Result<Self, PilotError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = TranscriptWriter {
            out: BufWriter::new(file),
        };
        w.line(&Line::Header(header.clone()))
            .map_err(|e| io_err(path, e))?;
        Ok(w)
    }

    fn line(&mut self, line: &Line) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn append(&mut self, record: &TranscriptRecord) -> Result<(), PilotError> {
        self.line(&Line::Step(record.clone()))
            .map_err(|e| PilotError::Transcript(e.to_string()))
    }
}

pub fn read_transcript(path: &Path) -> Result<Transcript, PilotError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", n + 1)))?;
        match parsed {
            Line::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
            Line::Header(_) => return Err(io_err(path, format!("line {}: unexpected header", n + 1))),
            Line::Step(r) => {
                if header.is_none() {
                    return Err(io_err(path, "missing header line"));
                }
                if r.step != records.len() {
                    return Err(io_err(path, format!("line {}: expected step {}, found {}", n + 1, records.len(), r.step)));
                }
                records.push(r);
            }
        }
    }
    Ok(Transcript {
        header: header.ok_or_else(|| io_err(path, "missing header line"))?,
        records,
    })
}
