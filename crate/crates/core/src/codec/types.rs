use std::fmt;

use indexmap::IndexMap;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Ipython,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Ipython => "ipython",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A box on the 0..=1000 integer grid; (x1, y1) is top-left, (x2, y2) bottom-right.
///
/// Serialized as a four-element array `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u16; 4]", into = "[u16; 4]")]
pub struct NormalizedBBox {
    pub x1: u16,
    pub y1: u16,
    pub x2: u16,
    pub y2: u16,
}

impl NormalizedBBox {
    pub const GRID: u16 = 1000;

    pub fn new(x1: u16, y1: u16, x2: u16, y2: u16) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn is_valid(&self) -> bool {
        self.x1 <= self.x2 && self.y1 <= self.y2 && self.x2 <= Self::GRID && self.y2 <= Self::GRID
    }

    pub fn coords(&self) -> [u16; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl From<[u16; 4]> for NormalizedBBox {
    fn from(c: [u16; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<NormalizedBBox> for [u16; 4] {
    fn from(b: NormalizedBBox) -> Self {
        b.coords()
    }
}

/// One piece of turn content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Segment {
    Text { text: String },
    Image { patch_count: u32 },
    Bbox { r#box: NormalizedBBox },
}

impl Segment {
    pub fn text(s: impl Into<String>) -> Self {
        Segment::Text { text: s.into() }
    }

    pub fn image(patch_count: u32) -> Self {
        Segment::Image { patch_count }
    }

    pub fn bbox(b: NormalizedBBox) -> Self {
        Segment::Bbox { r#box: b }
    }
}

/// Merges adjacent text segments and drops empty ones.
///
/// Rendering is insensitive to this rewrite, so parsing a rendered segment
/// list recovers the coalesced form.
pub fn coalesce_segments(segments: &[Segment]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments {
        match seg {
            Segment::Text { text } if text.is_empty() => {}
            Segment::Text { text } => match out.last_mut() {
                Some(Segment::Text { text: prev }) => prev.push_str(text),
                _ => out.push(seg.clone()),
            },
            _ => out.push(seg.clone()),
        }
    }
    out
}

/// Schema for one parameter property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySchema {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "enum", default, skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<Vec<Value>>,
    /// Any further JSON-Schema keywords (`items`, `default`, ...), kept verbatim.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PropertySchema {
    pub fn new(kind: impl Into<String>, description: impl Into<String>) -> Self {
        Self { kind: kind.into(), description: description.into(), enum_values: None, extra: Map::new() }
    }
}

fn object_kind() -> String {
    "object".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchema {
    #[serde(rename = "type", default = "object_kind")]
    pub kind: String,
    #[serde(default)]
    pub properties: IndexMap<String, PropertySchema>,
    #[serde(default)]
    pub required: Vec<String>,
}

impl Default for ParameterSchema {
    fn default() -> Self {
        Self { kind: object_kind(), properties: IndexMap::new(), required: Vec::new() }
    }
}

/// A tool advertised to the model in the system turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDescription {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parameters: ParameterSchema,
}

impl FunctionDescription {
    /// Compact single-line JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("function description serializes")
    }

    /// Structural problems with this description, as human-readable details.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !is_identifier(&self.name) {
            out.push(format!("name {:?} is not an identifier", self.name));
        }
        for req in &self.parameters.required {
            if !self.parameters.properties.contains_key(req) {
                out.push(format!("required parameter {req:?} is not among the properties"));
            }
        }
        out
    }
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A structured invocation: function name plus keyword arguments in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionCall {
    pub name: String,
    #[serde(deserialize_with = "unique_keys")]
    pub arguments: Map<String, Value>,
}

impl FunctionCall {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), arguments: Map::new() }
    }

    pub fn arg(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.arguments.insert(key.into(), value.into());
        self
    }
}

/// Canonical JSON array of calls, as placed after `<|python_tag|>`.
pub fn calls_to_json(calls: &[FunctionCall]) -> String {
    serde_json::to_string(calls).expect("calls serialize")
}

fn unique_keys<'de, D>(deserializer: D) -> Result<Map<String, Value>, D::Error>
where
    D: Deserializer<'de>,
{
    struct UniqueKeys;

    impl<'de> Visitor<'de> for UniqueKeys {
        type Value = Map<String, Value>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an object of keyword arguments")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut map = Map::new();
            while let Some((k, v)) = access.next_entry::<String, Value>()? {
                if map.contains_key(&k) {
                    return Err(de::Error::custom(format!("duplicate argument {k:?}")));
                }
                map.insert(k, v);
            }
            Ok(map)
        }
    }

    deserializer.deserialize_map(UniqueKeys)
}

/// One tool result carried by an ipython turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionResponse(pub Value);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Answer,
    UseTool,
}

impl Decision {
    pub fn token(self) -> &'static str {
        match self {
            Decision::Answer => super::tokens::ANSWER,
            Decision::UseTool => super::tokens::USE_TOOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssistantBody {
    Segments(Vec<Segment>),
    Calls(Vec<FunctionCall>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistantTurn {
    pub decision: Option<Decision>,
    pub body: AssistantBody,
}

impl AssistantTurn {
    pub fn answer(text: impl Into<String>) -> Self {
        Self { decision: Some(Decision::Answer), body: AssistantBody::Segments(vec![Segment::text(text)]) }
    }

    pub fn plain(segments: Vec<Segment>) -> Self {
        Self { decision: None, body: AssistantBody::Segments(segments) }
    }

    pub fn use_tool(calls: Vec<FunctionCall>) -> Self {
        Self { decision: Some(Decision::UseTool), body: AssistantBody::Calls(calls) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TurnRepr", into = "TurnRepr")]
pub enum Turn {
    User(Vec<Segment>),
    Assistant(AssistantTurn),
    Ipython(Vec<FunctionResponse>),
}

impl Turn {
    pub fn role(&self) -> Role {
        match self {
            Turn::User(_) => Role::User,
            Turn::Assistant(_) => Role::Assistant,
            Turn::Ipython(_) => Role::Ipython,
        }
    }

    pub fn user_text(text: impl Into<String>) -> Self {
        Turn::User(vec![Segment::text(text)])
    }
}

/// User content may be given as a bare string or as a segment list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ContentRepr {
    Plain(String),
    Segments(Vec<Segment>),
}

impl From<ContentRepr> for Vec<Segment> {
    fn from(c: ContentRepr) -> Self {
        match c {
            ContentRepr::Plain(s) => vec![Segment::text(s)],
            ContentRepr::Segments(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRepr {
    role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content: Option<ContentRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calls: Option<Vec<FunctionCall>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    responses: Option<Vec<FunctionResponse>>,
}

impl TryFrom<TurnRepr> for Turn {
    type Error = String;

    fn try_from(r: TurnRepr) -> Result<Self, Self::Error> {
        match r.role {
            Role::System => Err("system text belongs in the top-level \"system\" field".into()),
            Role::User => {
                if r.decision.is_some() || r.calls.is_some() || r.responses.is_some() {
                    return Err("user turns carry only \"content\"".into());
                }
                Ok(Turn::User(r.content.map(Into::into).unwrap_or_default()))
            }
            Role::Assistant => {
                if r.responses.is_some() {
                    return Err("assistant turns cannot carry \"responses\"".into());
                }
                let body = match (r.content, r.calls) {
                    (Some(_), Some(_)) => return Err("assistant turn has both \"content\" and \"calls\"".into()),
                    (None, Some(calls)) => AssistantBody::Calls(calls),
                    (content, None) => AssistantBody::Segments(content.map(Into::into).unwrap_or_default()),
                };
                Ok(Turn::Assistant(AssistantTurn { decision: r.decision, body }))
            }
            Role::Ipython => {
                if r.decision.is_some() || r.content.is_some() || r.calls.is_some() {
                    return Err("ipython turns carry only \"responses\"".into());
                }
                Ok(Turn::Ipython(r.responses.unwrap_or_default()))
            }
        }
    }
}

impl From<Turn> for TurnRepr {
    fn from(t: Turn) -> Self {
        let mut r = TurnRepr { role: t.role(), decision: None, content: None, calls: None, responses: None };
        match t {
            Turn::User(segs) => r.content = Some(ContentRepr::Segments(segs)),
            Turn::Assistant(a) => {
                r.decision = a.decision;
                match a.body {
                    AssistantBody::Segments(segs) => r.content = Some(ContentRepr::Segments(segs)),
                    AssistantBody::Calls(calls) => r.calls = Some(calls),
                }
            }
            Turn::Ipython(resps) => r.responses = Some(resps),
        }
        r
    }
}

/// A multi-role dialogue, optionally advertising functions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conversation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<FunctionDescription>>,
    #[serde(default)]
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn has_functions(&self) -> bool {
        self.functions.is_some()
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn user_content_accepts_plain_string() {
        let conv: Conversation = serde_json::from_value(json!({
            "system": "S",
            "turns": [{"role": "user", "content": "hi"}]
        }))
        .unwrap();
        assert_eq!(conv.turns, vec![Turn::user_text("hi")]);
    }

    #[test]
    fn turn_json_shape() {
        let t = Turn::Assistant(AssistantTurn::use_tool(vec![FunctionCall::new("f").arg("x", 1)]));
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(
            v,
            json!({"role": "assistant", "decision": "use_tool", "calls": [{"name": "f", "arguments": {"x": 1}}]})
        );
        let back: Turn = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn segments_and_bbox_shape() {
        let v = json!([
            {"type": "text", "text": "look"},
            {"type": "image", "patch_count": 3},
            {"type": "bbox", "box": [1, 2, 3, 4]}
        ]);
        let segs: Vec<Segment> = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(segs[2], Segment::bbox(NormalizedBBox::new(1, 2, 3, 4)));
        assert_eq!(serde_json::to_value(&segs).unwrap(), v);
    }

    #[test]
    fn duplicate_call_arguments_rejected() {
        let err = serde_json::from_str::<FunctionCall>(r#"{"name":"f","arguments":{"a":1,"a":2}}"#);
        assert!(err.unwrap_err().to_string().contains("duplicate argument"));
    }

    #[test]
    fn system_role_in_turns_rejected() {
        let r: Result<Turn, _> = serde_json::from_value(json!({"role": "system", "content": "x"}));
        assert!(r.is_err());
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("get_weather"));
        assert!(is_identifier("_x9"));
        assert!(!is_identifier("9x"));
        assert!(!is_identifier("a-b"));
        assert!(!is_identifier(""));
    }

    #[test]
    fn coalesce_merges_text() {
        let segs =
            vec![Segment::text("a"), Segment::text(""), Segment::text("b"), Segment::image(1), Segment::text("")];
        assert_eq!(coalesce_segments(&segs), vec![Segment::text("ab"), Segment::image(1)]);
    }
}
