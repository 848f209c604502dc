//! The decision layer: anything that maps an observation in a given state to
//! a movement and a next state.

mod live;
mod oracle;
mod prompt;
mod replay;
mod response;
pub mod transcript;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::{LivePilot, ProviderRequest};
pub use oracle::{rotation_toward, OraclePilot, ALIGN_TOLERANCE_DEG};
pub use prompt::{build_prompt, state_text, PromptBundle, PromptVariant, OUTPUT_TEXT, PROMPT_VERSION, SYSTEM_TEXT};
pub use replay::ReplayPilot;
pub use response::{parse_response, serialize, ParseError, PilotResponse, FIELDS};

use crate::fsm::{validate, FsmState, TransitionDecision};
use crate::harness::Query;
use crate::sim::{Observation, SimConfig};
use crate::world::FloorPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PilotError {
    #[error("request timed out")]
    Timeout,
    #[error("provider returned HTTP {code}")]
    HttpStatus { code: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no valid response after {attempts} attempts: {}", last.join("; "))]
    RetriesExhausted {
        attempts: u32,
        last: Vec<String>,
        raw: String,
    },
    #[error("transcript has no record for step {0}")]
    StepOutOfRange(usize),
    #[error("mission impossible: {0}")]
    MissionImpossible(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(&'static str),
    #[error("transcript error: {0}")]
    Transcript(String),
}

/// Inputs for one decision.
pub struct DecisionContext<'a> {
    pub step: usize,
    pub state: FsmState,
    pub observation: &'a Observation,
    pub bundle: &'a PromptBundle,
}

/// A validated decision plus what is needed to record it.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub response: PilotResponse,
    pub raw: String,
    pub attempts: u32,
    /// Violations of rejected attempts, oldest first.
    pub violations: Vec<String>,
    pub latency_ms: Option<u64>,
}

pub trait Pilot {
    /// Short label used in reports and transcripts.
    fn label(&self) -> String;

    /// Whether decisions need rendered camera frames.
    fn needs_frames(&self) -> bool {
        false
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, PilotError>;
}

/// Parses `raw` and checks it against the state table; failures come back
/// as human-readable violation strings.
pub fn check_response(raw: &str, state: FsmState) -> Result<PilotResponse, Vec<String>> {
    let r = parse_response(raw).map_err(|e| vec![e.to_string()])?;
    let v = validate(
        state,
        &TransitionDecision {
            movement: r.movement,
            next_state: r.state,
        },
    );
    if v.is_empty() {
        Ok(r)
    } else {
        Err(v.iter().map(ToString::to_string).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    #[serde(alias = "openai-compatible")]
    OpenAi,
    #[serde(alias = "gemini-compatible")]
    Gemini,
    Oracle,
    Replay,
}

impl Provider {
    pub fn default_model(self) -> &'static str {
        match self {
            Provider::OpenAi => "gpt-4.1",
            Provider::Gemini => "gemini-2.5-flash",
            Provider::Oracle => "oracle",
            Provider::Replay => "replay",
        }
    }

    pub fn default_endpoint(self) -> &'static str {
        match self {
            Provider::OpenAi => "https://api.openai.com/v1",
            Provider::Gemini => "https://generativelanguage.googleapis.com/v1beta",
            Provider::Oracle | Provider::Replay => "",
        }
    }

    pub fn key_var(self) -> Option<&'static str> {
        match self {
            Provider::OpenAi => Some("OPENAI_API_KEY"),
            Provider::Gemini => Some("GEMINI_API_KEY"),
            Provider::Oracle | Provider::Replay => None,
        }
    }
}

impl std::str::FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "openai" | "openai-compatible" => Ok(Provider::OpenAi),
            "gemini" | "gemini-compatible" => Ok(Provider::Gemini),
            "oracle" => Ok(Provider::Oracle),
            "replay" => Ok(Provider::Replay),
            _ => Err(format!("unknown pilot `{s}` (oracle | openai | gemini | replay)")),
        }
    }
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub provider: Provider,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Extra attempts after the first invalid response.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    /// Overrides the provider's environment variable.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub variant: PromptVariant,
    /// Transcript to replay, for the replay provider.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
}

impl PilotConfig {
    pub fn new(provider: Provider) -> Self {
        PilotConfig {
            provider,
            model: None,
            endpoint: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            temperature: 0.0,
            api_key: None,
            variant: PromptVariant::Standard,
            transcript: None,
        }
    }

    pub fn oracle() -> Self {
        PilotConfig::new(Provider::Oracle)
    }

    pub fn replay(path: impl Into<PathBuf>) -> Self {
        PilotConfig {
            transcript: Some(path.into()),
            ..PilotConfig::new(Provider::Replay)
        }
    }

    pub fn model_name(&self) -> &str {
        self.model
            .as_deref()
            .unwrap_or_else(|| self.provider.default_model())
    }

    /// Name shown in report column headers.
    pub fn label(&self) -> String {
        match self.provider {
            Provider::Oracle | Provider::Replay => self.provider.default_model().to_string(),
            _ => self.model_name().to_string(),
        }
    }
}

/// Instantiates the pilot described by `config` for one episode.
pub fn make_pilot(
    config: &PilotConfig,
    plan: Arc<FloorPlan>,
    sim: SimConfig,
    query: &Query,
) -> Result<Box<dyn Pilot + Send>, PilotError> {
    Ok(match config.provider {
        Provider::Oracle => Box::new(OraclePilot::new(plan, sim, query.clone())?),
        Provider::Replay => {
            let path = config
                .transcript
                .as_ref()
                .ok_or_else(|| PilotError::Transcript("replay needs a transcript path".into()))?;
            Box::new(ReplayPilot::open(path)?)
        }
        Provider::OpenAi | Provider::Gemini => Box::new(LivePilot::from_config(config)?),
    })
}
