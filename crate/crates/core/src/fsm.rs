//! Navigation state machine: per-state goals, allowed moves and successors.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::MotionCommand::{self, *};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FsmState {
    Start,
    RecognizeRoom,
    SearchOpenDoor,
    OrientTowardsDoor,
    GoThroughDoor,
    StayOnRoom,
    SearchObject,
    ReachObject,
    DescribeObject,
    Final,
}

impl FsmState {
    pub const ALL: [FsmState; 10] = [
        FsmState::Start,
        FsmState::RecognizeRoom,
        FsmState::SearchOpenDoor,
        FsmState::OrientTowardsDoor,
        FsmState::GoThroughDoor,
        FsmState::StayOnRoom,
        FsmState::SearchObject,
        FsmState::ReachObject,
        FsmState::DescribeObject,
        FsmState::Final,
    ];

    /// Human-readable name, as used in prompts and responses.
    pub fn display_name(self) -> &'static str {
        match self {
            FsmState::Start => "Start",
            FsmState::RecognizeRoom => "Recognize Room",
            FsmState::SearchOpenDoor => "Search Open Door",
            FsmState::OrientTowardsDoor => "Orient Towards Door",
            FsmState::GoThroughDoor => "Go Through Door",
            FsmState::StayOnRoom => "Stay On Room",
            FsmState::SearchObject => "Search Object",
            FsmState::ReachObject => "Reach Object",
            FsmState::DescribeObject => "Describe Object",
            FsmState::Final => "Final",
        }
    }

    /// States whose only successor is `Final`.
    pub fn is_pre_final(self) -> bool {
        matches!(self, FsmState::StayOnRoom | FsmState::DescribeObject)
    }

    /// Parses a state name, ignoring case, spaces, underscores and hyphens,
    /// and accepting the spelling variants in [`STATE_ALIASES`].
    pub fn parse(name: &str) -> Option<FsmState> {
        let key = normalize_name(name);
        FsmState::ALL
            .iter()
            .copied()
            .find(|s| normalize_name(s.display_name()) == key)
            .or_else(|| {
                STATE_ALIASES
                    .iter()
                    .find(|(alias, _)| *alias == key)
                    .map(|&(_, s)| s)
            })
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '_' | '-'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Extra spellings mapped to canonical states, keyed by normalized name.
pub const STATE_ALIASES: &[(&str, FsmState)] = &[
    ("orientedtowardsdoor", FsmState::OrientTowardsDoor),
    ("orienttowarddoor", FsmState::OrientTowardsDoor),
    ("positionincenterofroom", FsmState::RecognizeRoom),
    ("recognizeroom", FsmState::RecognizeRoom),
    ("recogniseroom", FsmState::RecognizeRoom),
    ("stayinroom", FsmState::StayOnRoom),
    ("searchdoor", FsmState::SearchOpenDoor),
    ("gothroughthedoor", FsmState::GoThroughDoor),
    ("finalstate", FsmState::Final),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSpec {
    pub state: FsmState,
    pub goal_text: &'static str,
    pub allowed_moves: &'static [MotionCommand],
    pub next_states: &'static [FsmState],
}

/// One row per state that a pilot can be asked about.
pub const STATE_TABLE: [StateSpec; 8] = [
    StateSpec {
        state: FsmState::RecognizeRoom,
        goal_text: "Identify the current room.",
        allowed_moves: &[A1, B1, B2, B3, C1, C2, C3],
        next_states: &[FsmState::StayOnRoom, FsmState::SearchObject, FsmState::SearchOpenDoor],
    },
    StateSpec {
        state: FsmState::StayOnRoom,
        goal_text: "Remain stationary in the target room.",
        allowed_moves: &[E],
        next_states: &[FsmState::Final],
    },
    StateSpec {
        state: FsmState::SearchObject,
        goal_text: "Locate and center the target object.",
        allowed_moves: &[A1, A2, B1, B2, B3, C1, C2, C3],
        next_states: &[FsmState::SearchObject, FsmState::ReachObject],
    },
    StateSpec {
        state: FsmState::ReachObject,
        goal_text: "Approach and align with the object.",
        allowed_moves: &[A1, B1, C1, D1, D2, E],
        next_states: &[FsmState::DescribeObject, FsmState::SearchObject, FsmState::ReachObject],
    },
    StateSpec {
        state: FsmState::DescribeObject,
        goal_text: "Stop and describe the object.",
        allowed_moves: &[E],
        next_states: &[FsmState::Final],
    },
    StateSpec {
        state: FsmState::SearchOpenDoor,
        goal_text: "Look for an open door to the goal.",
        allowed_moves: &[A1, B1, B2, B3, C1, C2, C3, E],
        next_states: &[FsmState::SearchOpenDoor, FsmState::OrientTowardsDoor],
    },
    StateSpec {
        state: FsmState::OrientTowardsDoor,
        goal_text: "Align with the open door.",
        allowed_moves: &[A1, B1, C1, D1, D2],
        next_states: &[FsmState::GoThroughDoor, FsmState::SearchOpenDoor],
    },
    StateSpec {
        state: FsmState::GoThroughDoor,
        goal_text: "Enter the next room through the door.",
        allowed_moves: &[A1],
        next_states: &[FsmState::RecognizeRoom, FsmState::OrientTowardsDoor],
    },
];

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{0} is terminal and has no state spec")]
pub struct TerminalState(pub FsmState);

pub fn spec_of(state: FsmState) -> Result<&'static StateSpec, TerminalState> {
    STATE_TABLE
        .iter()
        .find(|s| s.state == state)
        .ok_or(TerminalState(state))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDecision {
    pub movement: MotionCommand,
    pub next_state: FsmState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    MoveNotAllowed { state: FsmState, movement: MotionCommand },
    NextStateUnreachable { state: FsmState, next_state: FsmState },
    TerminalState { state: FsmState },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MoveNotAllowed { state, movement } => {
                write!(f, "move {movement} not allowed in {}", compact(*state))
            }
            Violation::NextStateUnreachable { state, next_state } => write!(
                f,
                "next_state {} not reachable from {}",
                compact(*next_state),
                compact(*state)
            ),
            Violation::TerminalState { state } => write!(f, "{} accepts no decisions", compact(*state)),
        }
    }
}

/// Identifier-style state name, e.g. `SearchObject`.
pub fn compact(state: FsmState) -> String {
    state.display_name().replace(' ', "")
}

/// Checks a decision against the table; an empty list means it is legal.
pub fn validate(current: FsmState, decision: &TransitionDecision) -> Vec<Violation> {
    let Ok(spec) = spec_of(current) else {
        return vec![Violation::TerminalState { state: current }];
    };
    let mut out = Vec::new();
    if !spec.allowed_moves.contains(&decision.movement) {
        out.push(Violation::MoveNotAllowed {
            state: current,
            movement: decision.movement,
        });
    }
    if !spec.next_states.contains(&decision.next_state) {
        out.push(Violation::NextStateUnreachable {
            state: current,
            next_state: decision.next_state,
        });
    }
    out
}

/// The first state with a spec. `Start` is consumed here and never shown to
/// a pilot; the query does not influence the entry point.
pub fn initial_state() -> FsmState {
    FsmState::RecognizeRoom
}

/// Stable text rendering of the table, one state per line.
pub fn dump_table() -> String {
    let mut out = String::from("state\tallowed_moves\tnext_states\tgoal\n");
    for spec in &STATE_TABLE {
        let moves: Vec<&str> = spec.allowed_moves.iter().map(|m| m.code()).collect();
        let next: Vec<String> = spec.next_states.iter().map(|s| compact(*s)).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            compact(spec.state),
            moves.join(","),
            next.join(","),
            spec.goal_text
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        assert_eq!(spec_of(FsmState::GoThroughDoor).unwrap().allowed_moves, &[A1]);
        let stay = spec_of(FsmState::StayOnRoom).unwrap();
        assert_eq!(stay.allowed_moves, &[E]);
        assert_eq!(stay.next_states, &[FsmState::Final]);
        assert_eq!(spec_of(FsmState::SearchObject).unwrap().allowed_moves.len(), 8);
        assert_eq!(spec_of(FsmState::Final), Err(TerminalState(FsmState::Final)));
        assert!(spec_of(FsmState::Start).is_err());
    }

    #[test]
    fn validate_examples() {
        let d = |movement, next_state| TransitionDecision { movement, next_state };
        assert!(validate(FsmState::GoThroughDoor, &d(A1, FsmState::RecognizeRoom)).is_empty());
        let v = validate(FsmState::StayOnRoom, &d(A1, FsmState::Final));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "move A1 not allowed in StayOnRoom");
        let v = validate(FsmState::SearchObject, &d(A2, FsmState::DescribeObject));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "next_state DescribeObject not reachable from SearchObject");
        assert_eq!(validate(FsmState::SearchObject, &d(E, FsmState::Final)).len(), 2);
        assert_eq!(
            validate(FsmState::Final, &d(E, FsmState::Final)),
            vec![Violation::TerminalState { state: FsmState::Final }]
        );
    }

    #[test]
    fn transition_relation_is_closed() {
        for spec in &STATE_TABLE {
            for n in spec.next_states {
                assert!(*n == FsmState::Final || spec_of(*n).is_ok(), "{n:?}");
            }
        }
        let pre_final: Vec<FsmState> = STATE_TABLE
            .iter()
            .filter(|s| s.next_states == [FsmState::Final])
            .map(|s| s.state)
            .collect();
        assert_eq!(pre_final, [FsmState::StayOnRoom, FsmState::DescribeObject]);
        assert!(pre_final.iter().all(|s| s.is_pre_final()));
    }

    #[test]
    fn hover_allowed_exactly_where_listed() {
        for spec in &STATE_TABLE {
            let expect = matches!(
                spec.state,
                FsmState::StayOnRoom | FsmState::DescribeObject | FsmState::ReachObject | FsmState::SearchOpenDoor
            );
            assert_eq!(spec.allowed_moves.contains(&E), expect, "{:?}", spec.state);
        }
    }

    #[test]
    fn name_normalization() {
        assert_eq!(FsmState::parse("Search open Door"), Some(FsmState::SearchOpenDoor));
        assert_eq!(FsmState::parse("SEARCH_OBJECT"), Some(FsmState::SearchObject));
        assert_eq!(FsmState::parse("Oriented Towards Door"), Some(FsmState::OrientTowardsDoor));
        assert_eq!(FsmState::parse("Position in Center of Room"), Some(FsmState::RecognizeRoom));
        assert_eq!(FsmState::parse("final"), Some(FsmState::Final));
        assert_eq!(FsmState::parse("Fly Away"), None);
        for s in FsmState::ALL {
            assert_eq!(FsmState::parse(s.display_name()), Some(s));
            assert_eq!(FsmState::parse(&compact(s)), Some(s));
        }
    }

    #[test]
    fn dump_is_stable() {
        let dump = dump_table();
        assert_eq!(dump.lines().count(), 9);
        assert!(dump.contains("GoThroughDoor\tA1\tRecognizeRoom,OrientTowardsDoor\tEnter the next room through the door.\n"));
        assert_eq!(dump, dump_table());
    }

    #[test]
    fn initial_is_recognize_room() {
        assert_eq!(initial_state(), FsmState::RecognizeRoom);
    }
}
