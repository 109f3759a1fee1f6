//! Conversation rendering and assistant-output parsing.
//!
//! Prompts use Llama 3 style role blocks extended with image and bounding-box
//! placeholders, a system-turn function list, decision tokens, and parallel
//! calls/responses.

mod bbox;
mod parse;
mod render;
pub mod tokens;
mod types;
mod validate;

use thiserror::Error;

pub use bbox::{denormalize_bbox, normalize_bbox, BBoxError, PixelBox};
pub use parse::{parse_assistant, parse_segments, AssistantOutput, ParseError};
pub use render::{header, render_assistant, render_prompt, render_segments, RenderOptions};
pub use types::{
    calls_to_json, coalesce_segments, is_identifier, AssistantBody, AssistantTurn, Conversation, Decision,
    FunctionCall, FunctionDescription, FunctionResponse, NormalizedBBox, ParameterSchema, PropertySchema, Role,
    Segment, Turn,
};
pub use validate::{validate_conversation, Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("invalid conversation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidConversation(Vec<Violation>),
}

/// The content after the last assistant header of a rendered prompt.
pub fn assistant_tail(prompt: &str) -> Option<&str> {
    let h = header(Role::Assistant);
    prompt.rfind(&h).map(|i| &prompt[i + h.len()..])
}
