use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tokens::find_reserved;
use super::types::{is_identifier, AssistantBody, Conversation, Decision, Role, Segment, Turn};

/// One rule breach, with a path into the conversation such as `turns[3].calls[1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ViolationKind {
    NoTurns,
    FirstTurnNotUser { found: Role },
    RoleOrder { previous: Role, found: Role },
    IpythonWithoutToolCall,
    MissingToolResponse,
    ArityMismatch { expected: usize, got: usize },
    DecisionWithoutFunctions,
    MissingDecision,
    DecisionBodyMismatch { decision: Decision },
    CallsWithoutFunctions,
    EmptyCallList,
    EmptyFunctionList,
    DuplicateFunctionName { name: String },
    InvalidFunctionDescription { detail: String },
    UndeclaredFunction { name: String },
    InvalidCallName { name: String },
    ImageOutsideUserTurn,
    ZeroPatchImage,
    InvalidBBox { coords: [u16; 4] },
    ReservedTokenInText { token: String },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        match self {
            NoTurns => write!(f, "conversation has no turns"),
            FirstTurnNotUser { found } => write!(f, "first turn must be user, found {found}"),
            RoleOrder { previous, found } => write!(f, "{found} turn cannot follow {previous} turn"),
            IpythonWithoutToolCall => write!(f, "ipython turn must follow an assistant use_tool turn"),
            MissingToolResponse => write!(f, "use_tool turn must be followed by an ipython turn"),
            ArityMismatch { expected, got } => {
                write!(f, "expected {expected} function responses, got {got}")
            }
            DecisionWithoutFunctions => write!(f, "decision token present but no functions are provided"),
            MissingDecision => write!(f, "assistant turn needs a decision when functions are provided"),
            DecisionBodyMismatch { decision } => write!(
                f,
                "decision {} does not match the turn body",
                serde_json::to_string(decision).unwrap_or_default()
            ),
            CallsWithoutFunctions => write!(f, "function calls present but no functions are provided"),
            EmptyCallList => write!(f, "use_tool turn carries no calls"),
            EmptyFunctionList => write!(f, "function list is present but empty"),
            DuplicateFunctionName { name } => write!(f, "function {name:?} is declared twice"),
            InvalidFunctionDescription { detail } => write!(f, "{detail}"),
            UndeclaredFunction { name } => write!(f, "call to undeclared function {name:?}"),
            InvalidCallName { name } => write!(f, "call name {name:?} is not an identifier"),
            ImageOutsideUserTurn => write!(f, "image placeholders are only allowed in user turns"),
            ZeroPatchImage => write!(f, "image must have at least one patch"),
            InvalidBBox { coords } => write!(f, "bbox {coords:?} is outside the 0..=1000 grid or inverted"),
            ReservedTokenInText { token } => write!(f, "text contains reserved token {token}"),
        }
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, kind: ViolationKind) {
        self.0.push(Violation { path: path.into(), kind });
    }
}

/// Checks every structural rule; returns all breaches, empty when valid.
pub fn validate_conversation(conv: &Conversation) -> Vec<Violation> {
    let mut c = Collector(Vec::new());

    if let Some(sys) = &conv.system {
        if let Some(tok) = find_reserved(sys) {
            c.push("system", ViolationKind::ReservedTokenInText { token: tok.into() });
        }
    }

    let declared: Option<HashSet<&str>> = conv.functions.as_ref().map(|fs| {
        if fs.is_empty() {
            c.push("functions", ViolationKind::EmptyFunctionList);
        }
        let mut seen = HashSet::new();
        for (i, f) in fs.iter().enumerate() {
            if !seen.insert(f.name.as_str()) {
                c.push(format!("functions[{i}]"), ViolationKind::DuplicateFunctionName { name: f.name.clone() });
            }
            for detail in f.problems() {
                c.push(format!("functions[{i}]"), ViolationKind::InvalidFunctionDescription { detail });
            }
        }
        seen
    });

    if conv.turns.is_empty() {
        c.push("turns", ViolationKind::NoTurns);
    }

    let mut prev: Option<(Role, Option<usize>)> = None; // role, and call count when use_tool
    for (i, turn) in conv.turns.iter().enumerate() {
        let path = format!("turns[{i}]");
        let role = turn.role();

        match prev {
            None if role != Role::User => c.push(&path, ViolationKind::FirstTurnNotUser { found: role }),
            Some((Role::Assistant, Some(_))) if role != Role::Ipython => {
                c.push(format!("turns[{}]", i - 1), ViolationKind::MissingToolResponse)
            }
            Some((p, calls)) => match (p, role) {
                (Role::User, Role::Assistant) | (Role::Ipython, Role::Assistant) => {}
                (Role::Assistant, Role::User) => {}
                (_, Role::Ipython) if !(p == Role::Assistant && calls.is_some()) => {
                    c.push(&path, ViolationKind::IpythonWithoutToolCall)
                }
                (Role::Assistant, Role::Ipython) => {}
                _ => c.push(&path, ViolationKind::RoleOrder { previous: p, found: role }),
            },
            None => {}
        }

        match turn {
            Turn::User(segs) => check_segments(&mut c, &path, segs, true),
            Turn::Assistant(a) => {
                match (a.decision, declared.is_some()) {
                    (Some(_), false) => c.push(&path, ViolationKind::DecisionWithoutFunctions),
                    (None, true) => c.push(&path, ViolationKind::MissingDecision),
                    _ => {}
                }
                match &a.body {
                    AssistantBody::Segments(segs) => {
                        if a.decision == Some(Decision::UseTool) {
                            c.push(&path, ViolationKind::DecisionBodyMismatch { decision: Decision::UseTool });
                        }
                        check_segments(&mut c, &path, segs, false);
                    }
                    AssistantBody::Calls(calls) => {
                        if declared.is_none() {
                            c.push(&path, ViolationKind::CallsWithoutFunctions);
                        } else if a.decision == Some(Decision::Answer) {
                            c.push(&path, ViolationKind::DecisionBodyMismatch { decision: Decision::Answer });
                        }
                        if calls.is_empty() {
                            c.push(format!("{path}.calls"), ViolationKind::EmptyCallList);
                        }
                        for (j, call) in calls.iter().enumerate() {
                            let cpath = format!("{path}.calls[{j}]");
                            if !is_identifier(&call.name) {
                                c.push(&cpath, ViolationKind::InvalidCallName { name: call.name.clone() });
                            } else if let Some(decl) = &declared {
                                if !decl.contains(call.name.as_str()) {
                                    c.push(&cpath, ViolationKind::UndeclaredFunction { name: call.name.clone() });
                                }
                            }
                        }
                    }
                }
            }
            Turn::Ipython(resps) => {
                if let Some((Role::Assistant, Some(expected))) = prev {
                    if expected != resps.len() {
                        c.push(&path, ViolationKind::ArityMismatch { expected, got: resps.len() });
                    }
                }
            }
        }

        let calls = match turn {
            Turn::Assistant(a) => match &a.body {
                AssistantBody::Calls(calls) => Some(calls.len()),
                AssistantBody::Segments(_) => None,
            },
            _ => None,
        };
        prev = Some((role, calls));
    }

    c.0
}

fn check_segments(c: &mut Collector, path: &str, segs: &[Segment], user: bool) {
    for (j, seg) in segs.iter().enumerate() {
        let spath = format!("{path}.content[{j}]");
        match seg {
            Segment::Text { text } => {
                if let Some(tok) = find_reserved(text) {
                    c.push(spath, ViolationKind::ReservedTokenInText { token: tok.into() });
                }
            }
            Segment::Image { patch_count } => {
                if !user {
                    c.push(&spath, ViolationKind::ImageOutsideUserTurn);
                }
                if *patch_count == 0 {
                    c.push(spath, ViolationKind::ZeroPatchImage);
                }
            }
            Segment::Bbox { r#box } => {
                if !r#box.is_valid() {
                    c.push(spath, ViolationKind::InvalidBBox { coords: r#box.coords() });
                }
            }
        }
    }
}
