//! The five-field decision record and its tolerant parser.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::fsm::FsmState;
use crate::percept::DoorPosition;
use crate::sim::MotionCommand;

/// Field names in the order they are checked and serialized.
pub const FIELDS: [&str; 5] = ["room", "movement", "state", "description", "door_position"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RawResponse", try_from = "RawResponse")]
pub struct PilotResponse {
    pub room: String,
    pub movement: MotionCommand,
    pub state: FsmState,
    pub description: String,
    pub door_position: DoorPosition,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawResponse {
    room: String,
    movement: String,
    state: String,
    description: String,
    door_position: String,
}

impl From<PilotResponse> for RawResponse {
    fn from(r: PilotResponse) -> Self {
        RawResponse {
            room: r.room,
            movement: r.movement.code().to_string(),
            state: r.state.display_name().to_string(),
            description: r.description,
            door_position: r.door_position.as_str().to_string(),
        }
    }
}

impl TryFrom<RawResponse> for PilotResponse {
    type Error = ParseError;

    fn try_from(r: RawResponse) -> Result<Self, ParseError> {
        Ok(PilotResponse {
            room: r.room,
            movement: r
                .movement
                .parse()
                .map_err(ParseError::UnknownMovement)?,
            state: FsmState::parse(&r.state).ok_or(ParseError::UnknownState(r.state))?,
            description: r.description,
            door_position: DoorPosition::parse(&r.door_position)
                .ok_or(ParseError::UnknownDoorPosition(r.door_position))?,
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no JSON object found in response")]
    NoObjectFound,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unknown movement `{0}`")]
    UnknownMovement(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown door_position `{0}`")]
    UnknownDoorPosition(String),
}

/// Compact single-line JSON with fields in canonical order.
pub fn serialize(r: &PilotResponse) -> String {
    serde_json::to_string(r).expect("response serializes")
}

/// Extracts the first well-formed object from `raw` and maps it to a
/// response. Surrounding prose, code fences and Python-style dict literals
/// (single quotes, `True`/`False`/`None`) are tolerated.
pub fn parse_response(raw: &str) -> Result<PilotResponse, ParseError> {
    let obj = first_object(raw).ok_or(ParseError::NoObjectFound)?;
    let fields: Vec<(String, &Value)> = obj
        .iter()
        .map(|(k, v)| (k.trim().to_lowercase(), v))
        .collect();
    let mut vals: [String; 5] = Default::default();
    for (slot, name) in vals.iter_mut().zip(FIELDS) {
        let v = fields
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .ok_or(ParseError::MissingField(name))?;
        *slot = match v {
            Value::String(s) => s.clone(),
            Value::Null => return Err(ParseError::MissingField(name)),
            other => other.to_string(),
        };
    }
    let [room, movement, state, description, door_position] = vals;
    PilotResponse::try_from(RawResponse {
        room,
        movement,
        state,
        description,
        door_position,
    })
}

fn first_object(raw: &str) -> Option<Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(off) = raw[start..].find('{') {
        let open = start + off;
        if let Some(close) = matching_brace(bytes, open) {
            let text = &raw[open..=close];
            let parsed = serde_json::from_str::<Value>(text)
                .ok()
                .or_else(|| serde_json::from_str::<Value>(&python_to_json(text)?).ok());
            if let Some(Value::Object(map)) = parsed {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

/// Index of the brace closing the one at `open`, skipping quoted strings of
/// either quote style.
fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut i = open;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) => {
                if c == b'\\' {
                    i += 1;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                b'"' | b'\'' => quote = Some(c),
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            },
        }
        i += 1;
    }
    None
}

/// Rewrites a Python dict literal as JSON, or `None` if a string is left
/// unterminated.
fn python_to_json(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len() + 16);
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' | '"' => {
                let quote = c;
                let mut s = String::new();
                loop {
                    match chars.next()? {
                        '\\' => match chars.next()? {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            'r' => s.push('\r'),
                            other => s.push(other),
                        },
                        ch if ch == quote => break,
                        ch => s.push(ch),
                    }
                }
                out.push_str(&serde_json::to_string(&s).ok()?);
            }
            c if c.is_ascii_alphabetic() => {
                let mut word = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        word.push(n);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push_str(match word.as_str() {
                    "True" => "true",
                    "False" => "false",
                    "None" => "null",
                    w => w,
                });
            }
            c => out.push(c),
        }
    }
    Some(out)
}
