use std::path::{Path, PathBuf};

use super::transcript::{read_transcript, Transcript};
use super::{Decision, DecisionContext, Pilot, PilotError};

/// Plays back the responses stored in a transcript, one per step.
pub struct ReplayPilot {
    path: PathBuf,
    transcript: Transcript,
}

impl ReplayPilot {
    pub fn open(path: &Path) -> Result<Self, PilotError> {
        Ok(ReplayPilot {
            path: path.to_path_buf(),
            transcript: read_transcript(path)?,
        })
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Pilot for ReplayPilot {
    /// The label of the pilot that produced the transcript.
    fn label(&self) -> String {
        self.transcript.header.pilot.clone()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, PilotError> {
        let rec = self
            .transcript
            .records
            .get(ctx.step)
            .ok_or(PilotError::StepOutOfRange(ctx.step))?;
        match &rec.response {
            Some(r) => Ok(Decision {
                response: r.clone(),
                raw: rec.raw.clone(),
                attempts: rec.attempts,
                violations: rec.violations.clone(),
                latency_ms: None,
            }),
            None => Err(PilotError::RetriesExhausted {
                attempts: rec.attempts,
                last: rec.violations.clone(),
                raw: rec.raw.clone(),
            }),
        }
    }
}
