//! Toolkit for a tool-calling chat format: prompt codec, call-expression
//! grammar and AST matching, function-calling metrics, non-function-call data
//! derivation, and a passkey long-context harness.

pub mod codec;
pub mod fc_eval;
pub mod grammar;
pub mod jsonl;
pub mod passkey;
pub mod synth;
