use std::fmt::Write as _;

use super::tokens::*;
use super::types::{calls_to_json, AssistantBody, AssistantTurn, Conversation, Role, Segment, Turn};
use super::validate::validate_conversation;
use super::CodecError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// End the prompt with an open assistant header so a model continues as the assistant.
    pub append_generation_header: bool,
}

impl RenderOptions {
    pub fn for_generation() -> Self {
        Self { append_generation_header: true }
    }
}

/// Renders a validated conversation into the conditional prompt string.
///
/// Layout: `<|begin_of_text|>`, then for each block
/// `<|start_header_id|>{role}<|end_header_id|>\n\n{content}<|eot_id|>`.
/// The system block is emitted when the conversation has system text or
/// functions; functions follow the system text under `Customized Functions:`,
/// one compact JSON object per line.
pub fn render_prompt(conv: &Conversation, opts: RenderOptions) -> Result<String, CodecError> {
    let violations = validate_conversation(conv);
    if !violations.is_empty() {
        return Err(CodecError::InvalidConversation(violations));
    }

    let mut out = String::from(BEGIN_OF_TEXT);
    if let Some(system) = system_content(conv) {
        push_block(&mut out, Role::System, &system);
    }
    for turn in &conv.turns {
        let content = match turn {
            Turn::User(segs) => render_segments(segs),
            Turn::Assistant(a) => render_assistant(a),
            Turn::Ipython(resps) => serde_json::to_string(resps).expect("responses serialize"),
        };
        push_block(&mut out, turn.role(), &content);
    }
    if opts.append_generation_header {
        out.push_str(&header(Role::Assistant));
    }
    Ok(out)
}

fn system_content(conv: &Conversation) -> Option<String> {
    let functions = conv.functions.as_ref().map(|fs| {
        let mut block = String::from(FUNCTIONS_HEADER);
        for f in fs {
            block.push('\n');
            block.push_str(&f.canonical_json());
        }
        block
    });
    match (conv.system.as_deref(), functions) {
        (None, None) => None,
        (Some(s), None) => Some(s.to_string()),
        (None, Some(f)) => Some(f),
        (Some(s), Some(f)) => Some(format!("{s}\n\n{f}")),
    }
}

/// `<|start_header_id|>{role}<|end_header_id|>\n\n`
pub fn header(role: Role) -> String {
    format!("{START_HEADER}{role}{END_HEADER}\n\n")
}

fn push_block(out: &mut String, role: Role, content: &str) {
    out.push_str(&header(role));
    out.push_str(content);
    out.push_str(EOT);
}

pub fn render_segments(segments: &[Segment]) -> String {
    let mut out = String::new();
    for seg in segments {
        match seg {
            Segment::Text { text } => out.push_str(text),
            Segment::Image { patch_count } => {
                out.push_str(START_IMG);
                for _ in 0..*patch_count {
                    out.push_str(IMG);
                }
                out.push_str(END_IMG);
            }
            Segment::Bbox { r#box } => {
                let _ = write!(out, "{START_BBOX}[{}, {}, {}, {}]{END_BBOX}", r#box.x1, r#box.y1, r#box.x2, r#box.y2);
            }
        }
    }
    out
}

/// Content of an assistant block without the header or end-of-turn marker.
pub fn render_assistant(turn: &AssistantTurn) -> String {
    let mut out = String::new();
    if let Some(d) = turn.decision {
        out.push_str(d.token());
    }
    match &turn.body {
        AssistantBody::Segments(segs) => out.push_str(&render_segments(segs)),
        AssistantBody::Calls(calls) => {
            out.push_str(PYTHON_TAG);
            out.push_str(&calls_to_json(calls));
        }
    }
    out
}
