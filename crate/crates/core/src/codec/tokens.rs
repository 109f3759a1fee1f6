//! Special-token literals used by the conversation format.

pub const BEGIN_OF_TEXT: &str = "<|begin_of_text|>";
pub const START_HEADER: &str = "<|start_header_id|>";
pub const END_HEADER: &str = "<|end_header_id|>";
pub const EOT: &str = "<|eot_id|>";
/// Llama 3 emits this after a tool call; accepted as a terminator when parsing.
pub const EOM: &str = "<|eom_id|>";

pub const START_IMG: &str = "<|start_img|>";
pub const IMG: &str = "<|img|>";
pub const END_IMG: &str = "<|end_img|>";
pub const START_BBOX: &str = "<|start_bbox|>";
pub const END_BBOX: &str = "<|end_bbox|>";

pub const USE_TOOL: &str = "<|use_tool|>";
pub const ANSWER: &str = "<|answer|>";
pub const PYTHON_TAG: &str = "<|python_tag|>";

pub const FUNCTIONS_HEADER: &str = "Customized Functions:";

/// Every token the codec gives meaning to. Text segments may not contain these.
pub const RESERVED: &[&str] = &[
    BEGIN_OF_TEXT,
    START_HEADER,
    END_HEADER,
    EOT,
    EOM,
    START_IMG,
    IMG,
    END_IMG,
    START_BBOX,
    END_BBOX,
    USE_TOOL,
    ANSWER,
    PYTHON_TAG,
];

/// Returns the first reserved token found in `text`, if any.
pub fn find_reserved(text: &str) -> Option<&'static str> {
    RESERVED.iter().copied().find(|tok| text.contains(tok))
}
