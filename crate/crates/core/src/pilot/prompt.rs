//! Three-part prompts: a fixed system block, a per-state block generated
//! from the state table, and a fixed output-format block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fsm::{compact, spec_of, FsmState, TerminalState};
use crate::sim::{Motion, MotionCommand, RotationConvention};

pub const PROMPT_VERSION: &str = "v1";
pub const SYSTEM_TEXT: &str = include_str!("../../assets/prompts/v1/system.txt");
pub const OUTPUT_TEXT: &str = include_str!("../../assets/prompts/v1/output.txt");
const STATE_TEMPLATE: &str = include_str!("../../assets/prompts/v1/state.txt");
const USER_TEMPLATE: &str = include_str!("../../assets/prompts/v1/user.txt");
const STATES_TOML: &str = include_str!("../../assets/prompts/v1/states.toml");

/// Extra rule shown in door states by the close-approach variant.
const CLOSE_APPROACH_RULE: &str =
    "Get close to the doorway, with the opening filling most of the image, before going through it.";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    #[default]
    Standard,
    /// Pushes the pilot to get nearer to a doorway before crossing.
    CloseApproach,
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(PromptVariant::Standard),
            "close-approach" => Ok(PromptVariant::CloseApproach),
            _ => Err(format!("unknown prompt variant `{s}` (standard | close-approach)")),
        }
    }
}

#[derive(Debug, Deserialize)]
struct StateContent {
    goal: String,
    rules: Vec<String>,
    notes: Vec<String>,
    transitions: BTreeMap<String, String>,
}

fn state_content() -> &'static BTreeMap<String, StateContent> {
    static CONTENT: OnceLock<BTreeMap<String, StateContent>> = OnceLock::new();
    CONTENT.get_or_init(|| toml::from_str(STATES_TOML).expect("bundled state prompts parse"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub version: String,
    pub system_text: String,
    pub state_text: String,
    pub output_text: String,
    pub user_query: String,
    pub map_serialization: String,
    pub current_state: FsmState,
    pub previous_state: Option<FsmState>,
    pub previous_movement: Option<MotionCommand>,
    /// Base64 PNG of the frontal camera; empty when frames were not rendered.
    pub frontal_image: String,
}

impl PromptBundle {
    /// The dynamic inputs rendered as text.
    pub fn user_text(&self) -> String {
        USER_TEMPLATE
            .replace("{query}", &self.user_query)
            .replace("{map}", &self.map_serialization)
            .replace("{state}", self.current_state.display_name())
            .replace(
                "{previous_state}",
                self.previous_state.map_or("none", |s| s.display_name()),
            )
            .replace(
                "{previous_movement}",
                self.previous_movement.map_or("none", |m| m.code()),
            )
    }

    /// System, state and output blocks joined into one instruction text.
    pub fn instructions(&self) -> String {
        format!("{}\n{}\n{}", self.system_text, self.state_text, self.output_text)
    }

    /// Hex SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("bundle serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn bullet_list(items: &[String]) -> String {
    items.iter().map(|i| format!("- {i}")).collect::<Vec<_>>().join("\n")
}

/// Groups the allowed commands under headings, with their magnitudes.
fn command_section(moves: &[MotionCommand], convention: RotationConvention) -> String {
    let mut out = String::new();
    let groups: [(&str, fn(MotionCommand) -> bool); 5] = [
        ("A", |m| matches!(m.motion(), Motion::Forward(_))),
        ("B", |m| matches!(m.motion(), Motion::RotateRight(_))),
        ("C", |m| matches!(m.motion(), Motion::RotateLeft(_))),
        ("D", |m| matches!(m.motion(), Motion::Lateral(_))),
        ("E", |m| matches!(m.motion(), Motion::Hover)),
    ];
    for (letter, member) in groups {
        let cmds: Vec<MotionCommand> = moves.iter().copied().filter(|m| member(*m)).collect();
        let Some(&first) = cmds.first() else { continue };
        let title = match first.motion() {
            Motion::Forward(_) => "Forward movement",
            Motion::RotateRight(_) | Motion::RotateLeft(_) if convention.yaw_delta(first) < 0.0 => "Right rotation",
            Motion::RotateRight(_) | Motion::RotateLeft(_) => "Left rotation",
            Motion::Lateral(_) => "Lateral movement",
            Motion::Hover => "Hover",
        };
        if !out.is_empty() {
            out.push('\n');
        }
        writeln!(out, "### {letter}. {title}:").unwrap();
        for m in cmds {
            let text = match m.motion() {
                Motion::RotateLeft(d) | Motion::RotateRight(d) => format!("rotate {d}°"),
                _ => m.describe(convention),
            };
            writeln!(out, "- `{}`: {text}", m.code()).unwrap();
        }
    }
    out.trim_end().to_string()
}

/// Renders the state block for `state`.
pub fn state_text(
    state: FsmState,
    convention: RotationConvention,
    variant: PromptVariant,
) -> Result<String, TerminalState> {
    let spec = spec_of(state)?;
    let content = &state_content()[&compact(state)];
    let mut rules = content.rules.clone();
    if variant == PromptVariant::CloseApproach
        && matches!(state, FsmState::OrientTowardsDoor | FsmState::GoThroughDoor)
    {
        rules.push(CLOSE_APPROACH_RULE.to_string());
    }
    let transitions: Vec<String> = spec
        .next_states
        .iter()
        .map(|n| {
            let cond = content
                .transitions
                .get(&compact(*n))
                .unwrap_or_else(|| panic!("no prompt condition for {state:?} -> {n:?}"));
            format!("- `{}`: {cond}", n.display_name())
        })
        .collect();
    Ok(STATE_TEMPLATE
        .replace("{state}", state.display_name())
        .replace("{goal}", &content.goal)
        .replace("{rules}", &bullet_list(&rules))
        .replace("{commands}", &command_section(spec.allowed_moves, convention))
        .replace("{transitions}", &transitions.join("\n"))
        .replace("{notes}", &bullet_list(&content.notes)))
}

#[allow(clippy::too_many_arguments)]
pub fn build_prompt(
    query: &str,
    map_json: &str,
    current: FsmState,
    previous_state: Option<FsmState>,
    previous_movement: Option<MotionCommand>,
    frontal_image: &str,
    convention: RotationConvention,
    variant: PromptVariant,
) -> Result<PromptBundle, TerminalState> {
    Ok(PromptBundle {
        version: PROMPT_VERSION.to_string(),
        system_text: SYSTEM_TEXT.to_string(),
        state_text: state_text(current, convention, variant)?,
        output_text: OUTPUT_TEXT.to_string(),
        user_query: query.to_string(),
        map_serialization: map_json.to_string(),
        current_state: current,
        previous_state,
        previous_movement,
        frontal_image: frontal_image.to_string(),
    })
}
