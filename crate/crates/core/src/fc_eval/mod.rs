//! Function-calling metrics: AST accuracy, executable accuracy and relevance
//! detection, bucketed by problem type and pooled into a report.

mod registry;
mod report;
mod score;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::codec::{
    calls_to_json, parse_assistant, render_assistant, render_prompt, tokens, AssistantOutput, AssistantTurn,
    CodecError, Conversation, FunctionCall, FunctionDescription, ParseError, RenderOptions, Turn,
};
use crate::grammar::{AnswerSpec, MatchError};

pub use registry::{Builtin, HostFn, Registry, RegistryEntry, RegistryError, RegistryManifest};
pub use report::{aggregate_report, Cell, EvalReport, TABLE_COLUMNS};
pub use score::{evaluate, score_ast, score_exec, score_relevance, Anomaly, EvalOutcome, Evaluation, Metric, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemType {
    Simple,
    Multiple,
    Parallel,
    ParallelMultiple,
}

impl ProblemType {
    pub const ALL: [ProblemType; 4] =
        [ProblemType::Simple, ProblemType::Multiple, ProblemType::Parallel, ProblemType::ParallelMultiple];

    pub fn is_parallel(self) -> bool {
        matches!(self, ProblemType::Parallel | ProblemType::ParallelMultiple)
    }

    /// Short column label: S., M., P., P.M.
    pub fn abbrev(self) -> &'static str {
        match self {
            ProblemType::Simple => "S.",
            ProblemType::Multiple => "M.",
            ProblemType::Parallel => "P.",
            ProblemType::ParallelMultiple => "P.M.",
        }
    }

    fn from_counts(functions: usize, calls: usize) -> Self {
        match (functions > 1, calls > 1) {
            (false, false) => ProblemType::Simple,
            (true, false) => ProblemType::Multiple,
            (false, true) => ProblemType::Parallel,
            (true, true) => ProblemType::ParallelMultiple,
        }
    }
}

impl fmt::Display for ProblemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemType::Simple => "simple",
            ProblemType::Multiple => "multiple",
            ProblemType::Parallel => "parallel",
            ProblemType::ParallelMultiple => "parallel_multiple",
        })
    }
}

/// One benchmark question. An empty `target` marks a relevance-detection
/// instance; `expected_results` marks an executable one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub functions: Vec<FunctionDescription>,
    pub query: String,
    #[serde(default)]
    pub target: Vec<AnswerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_results: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_type: Option<ProblemType>,
}

impl EvalInstance {
    pub fn is_relevance(&self) -> bool {
        self.target.is_empty()
    }

    pub fn is_executable(&self) -> bool {
        !self.is_relevance() && self.expected_results.is_some()
    }

    /// The conversation a model is prompted with.
    pub fn conversation(&self) -> Conversation {
        Conversation {
            system: self.system.clone(),
            functions: Some(self.functions.clone()),
            turns: vec![Turn::user_text(self.query.clone())],
        }
    }

    pub fn prompt(&self) -> Result<String, CodecError> {
        render_prompt(&self.conversation(), RenderOptions::for_generation())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("instance {0} has no target calls (relevance instance)")]
    RelevanceInstance(String),
    #[error("instance {0} has target calls but was scored for relevance")]
    NotRelevanceInstance(String),
    #[error("no output for instance {0}")]
    MissingOutput(String),
    #[error("instance {0} is executable but has no expected results")]
    MissingExpectedResults(String),
    #[error("instance {id} declares {declared} but its shape is {actual}")]
    InconsistentProblemType { id: String, declared: ProblemType, actual: ProblemType },
    #[error("instance {id}: {source}")]
    Match { id: String, source: MatchError },
    #[error("executable instances present but no function registry supplied")]
    MissingRegistry,
    #[error("nothing was scored")]
    EmptyRun,
}

/// Problem type from the number of provided functions and expected calls.
pub fn classify(instance: &EvalInstance) -> Result<ProblemType, EvalError> {
    if instance.is_relevance() {
        return Err(EvalError::RelevanceInstance(instance.id.clone()));
    }
    let actual = ProblemType::from_counts(instance.functions.len(), instance.target.len());
    match instance.problem_type {
        Some(declared) if declared != actual => {
            Err(EvalError::InconsistentProblemType { id: instance.id.clone(), declared, actual })
        }
        _ => Ok(actual),
    }
}

/// A model generation for one instance, kept raw alongside its parse.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub raw: String,
    pub parsed: Result<AssistantOutput, ParseError>,
}

impl Generation {
    pub fn from_raw(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let parsed = parse_assistant(&raw, true);
        Self { raw, parsed }
    }

    /// Whether the generation tried to call a function, parseable or not.
    pub fn emits_call(&self) -> bool {
        match &self.parsed {
            Ok(out) => out.is_tool_use() || !out.calls.is_empty(),
            Err(ParseError::MalformedCallPayload { .. }) => true,
            Err(ParseError::MissingDecisionToken) => self.raw.contains(tokens::PYTHON_TAG),
            Err(_) => false,
        }
    }
}

/// JSONL record for model outputs: `{"id": ..., "raw": ...}`; `response`
/// is accepted in place of `raw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub id: String,
    #[serde(alias = "response")]
    pub raw: String,
}

/// What a perfect model would generate for `instance`: the canonical target
/// calls, or a direct answer for relevance instances.
pub fn reference_generation(instance: &EvalInstance) -> String {
    if instance.is_relevance() {
        return render_assistant(&AssistantTurn::answer("None of the provided functions fit this request."));
    }
    let calls: Vec<FunctionCall> = instance.target.iter().map(AnswerSpec::canonical_call).collect();
    format!("{}{}{}", tokens::USE_TOOL, tokens::PYTHON_TAG, calls_to_json(&calls))
}
