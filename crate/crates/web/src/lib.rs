//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export takes and returns strings so the page needs no glue beyond
//! the generated bindings. Errors come back as a message string.

use serde_json::json;
use toolchat_core::codec::{
    normalize_bbox, parse_assistant, render_prompt, render_segments, Conversation, PixelBox, RenderOptions, Segment,
};
use wasm_bindgen::prelude::*;

/// Renders a conversation given as JSON into the prompt string.
#[wasm_bindgen]
pub fn render(conversation_json: &str, generation_header: bool) -> Result<String, String> {
    let conv = Conversation::from_json(conversation_json).map_err(|e| format!("invalid conversation JSON: {e}"))?;
    let opts = RenderOptions { append_generation_header: generation_header };
    render_prompt(&conv, opts).map_err(|e| e.to_string())
}

/// Parses a raw assistant generation into pretty-printed JSON.
#[wasm_bindgen]
pub fn parse(raw: &str, functions_present: bool) -> Result<String, String> {
    let out = parse_assistant(raw, functions_present).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string_pretty(&out).expect("output serializes"))
}

/// Maps a pixel box onto the 0..=1000 grid.
///
/// Returns `{"grid": [x1, y1, x2, y2], "text": ...}` where `text` is the box as it
/// appears inside a prompt.
#[wasm_bindgen]
pub fn bbox(x1: f64, y1: f64, x2: f64, y2: f64, width: f64, height: f64) -> Result<String, String> {
    let nb = normalize_bbox(PixelBox::new(x1, y1, x2, y2), width, height).map_err(|e| e.to_string())?;
    Ok(json!({"grid": nb.coords(), "text": render_segments(&[Segment::bbox(nb)])}).to_string())
}
