use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokens::*;
use super::types::{is_identifier, Decision, FunctionCall, NormalizedBBox, Segment};

/// A typed assistant generation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssistantOutput {
    pub decision: Option<Decision>,
    #[serde(default)]
    pub calls: Vec<FunctionCall>,
    #[serde(default)]
    pub text_segments: Vec<Segment>,
}

impl AssistantOutput {
    pub fn is_tool_use(&self) -> bool {
        self.decision == Some(Decision::UseTool)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ParseError {
    #[error("generation does not start with a decision token")]
    MissingDecisionToken,
    #[error("malformed call payload at byte {position}: {detail}")]
    MalformedCallPayload { position: usize, detail: String },
    #[error("unbalanced {token} at byte {position}")]
    UnbalancedPlaceholder { token: String, position: usize },
    #[error("malformed {token} at byte {position}: {detail}")]
    MalformedPlaceholder { token: String, position: usize, detail: String },
}

/// Parses one raw assistant generation.
///
/// Everything from the first `<|eot_id|>` / `<|eom_id|>` on is ignored. With
/// `functions_present`, the generation must open with a decision token
/// (leading whitespace tolerated); `<|use_tool|>` must be followed by
/// `<|python_tag|>` and a JSON array of calls.
pub fn parse_assistant(raw: &str, functions_present: bool) -> Result<AssistantOutput, ParseError> {
    let end = [EOT, EOM].iter().filter_map(|t| raw.find(t)).min().unwrap_or(raw.len());
    let body = &raw[..end];

    if !functions_present {
        return Ok(AssistantOutput { decision: None, calls: vec![], text_segments: parse_segments(body, 0)? });
    }

    let lead = body.len() - body.trim_start().len();
    let rest = &body[lead..];
    if let Some(after) = rest.strip_prefix(ANSWER) {
        let offset = lead + ANSWER.len();
        Ok(AssistantOutput {
            decision: Some(Decision::Answer),
            calls: vec![],
            text_segments: parse_segments(after, offset)?,
        })
    } else if let Some(after) = rest.strip_prefix(USE_TOOL) {
        let offset = lead + USE_TOOL.len();
        let calls = parse_call_payload(after, offset)?;
        Ok(AssistantOutput { decision: Some(Decision::UseTool), calls, text_segments: vec![] })
    } else {
        Err(ParseError::MissingDecisionToken)
    }
}

fn parse_call_payload(s: &str, offset: usize) -> Result<Vec<FunctionCall>, ParseError> {
    let ws = s.len() - s.trim_start().len();
    let Some(payload) = s[ws..].strip_prefix(PYTHON_TAG) else {
        return Err(ParseError::MalformedCallPayload {
            position: offset + ws,
            detail: format!("expected {PYTHON_TAG}"),
        });
    };
    let start = offset + ws + PYTHON_TAG.len();
    if payload.trim().is_empty() {
        return Err(ParseError::MalformedCallPayload { position: start, detail: "missing call list".into() });
    }
    let calls: Vec<FunctionCall> = serde_json::from_str(payload).map_err(|e| ParseError::MalformedCallPayload {
        position: start + byte_offset(payload, e.line(), e.column()),
        detail: e.to_string(),
    })?;
    if calls.is_empty() {
        return Err(ParseError::MalformedCallPayload { position: start, detail: "empty call list".into() });
    }
    if let Some(bad) = calls.iter().find(|c| !is_identifier(&c.name)) {
        return Err(ParseError::MalformedCallPayload {
            position: start,
            detail: format!("call name {:?} is not an identifier", bad.name),
        });
    }
    Ok(calls)
}

/// serde_json reports 1-based line and column; map that back to a byte offset.
fn byte_offset(s: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in s.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + column.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    s.len()
}

const PLACEHOLDERS: [&str; 5] = [START_IMG, IMG, END_IMG, START_BBOX, END_BBOX];

/// Splits content into text, image and bbox segments. Unknown `<|...|>`
/// tokens stay in the text.
pub fn parse_segments(s: &str, offset: usize) -> Result<Vec<Segment>, ParseError> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut i = 0;

    while i < s.len() {
        let Some(rel) = s[i..].find("<|") else {
            text.push_str(&s[i..]);
            break;
        };
        let at = i + rel;
        text.push_str(&s[i..at]);
        let tail = &s[at..];
        let Some(tok) = PLACEHOLDERS.iter().copied().find(|t| tail.starts_with(t)) else {
            text.push_str("<|");
            i = at + 2;
            continue;
        };
        let pos = offset + at;
        let (seg, consumed) = match tok {
            START_IMG => parse_image(tail, pos)?,
            START_BBOX => parse_bbox(tail, pos)?,
            _ => return Err(ParseError::UnbalancedPlaceholder { token: tok.into(), position: pos }),
        };
        if !text.is_empty() {
            out.push(Segment::Text { text: std::mem::take(&mut text) });
        }
        out.push(seg);
        i = at + consumed;
    }
    if !text.is_empty() {
        out.push(Segment::Text { text });
    }
    Ok(out)
}

fn parse_image(s: &str, pos: usize) -> Result<(Segment, usize), ParseError> {
    let mut rest = &s[START_IMG.len()..];
    let mut count: u32 = 0;
    while let Some(r) = rest.strip_prefix(IMG) {
        count += 1;
        rest = r;
    }
    if !rest.starts_with(END_IMG) {
        return Err(ParseError::UnbalancedPlaceholder { token: START_IMG.into(), position: pos });
    }
    if count == 0 {
        return Err(ParseError::MalformedPlaceholder {
            token: START_IMG.into(),
            position: pos,
            detail: "image has no patches".into(),
        });
    }
    let consumed = s.len() - rest.len() + END_IMG.len();
    Ok((Segment::Image { patch_count: count }, consumed))
}

fn parse_bbox(s: &str, pos: usize) -> Result<(Segment, usize), ParseError> {
    let inner_start = START_BBOX.len();
    let unbalanced = || ParseError::UnbalancedPlaceholder { token: START_BBOX.into(), position: pos };
    let close = s[inner_start..].find(END_BBOX).ok_or_else(unbalanced)?;
    let inner = &s[inner_start..inner_start + close];
    if inner.contains("<|") {
        return Err(unbalanced());
    }
    let malformed =
        |detail: String| ParseError::MalformedPlaceholder { token: START_BBOX.into(), position: pos, detail };

    let trimmed = inner.trim();
    let list = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')).unwrap_or(trimmed);
    let coords: Vec<u16> = list
        .split(',')
        .map(|p| p.trim().parse::<u16>())
        .collect::<Result<_, _>>()
        .map_err(|_| malformed(format!("expected four integers, found {inner:?}")))?;
    let [x1, y1, x2, y2] = coords[..] else {
        return Err(malformed(format!("expected four coordinates, found {}", coords.len())));
    };
    let b = NormalizedBBox::new(x1, y1, x2, y2);
    if !b.is_valid() {
        return Err(malformed(format!("{:?} is outside the 0..=1000 grid or inverted", b.coords())));
    }
    Ok((Segment::Bbox { r#box: b }, inner_start + close + END_BBOX.len()))
}
