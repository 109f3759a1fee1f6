use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::registry::Registry;
use super::report::{aggregate_report, Cell, EvalReport};
use super::{classify, EvalError, EvalInstance, Generation, ProblemType};
use crate::grammar::{ast_match, literal_eq, CallExpr, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ast,
    Exec,
    Relevance,
}

/// Scored result for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub id: String,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_type: Option<ProblemType>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Harness-side problems found while scoring: the run continues but the
/// numbers may not mean what they should.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anomaly {
    /// A declared function has no host implementation.
    UnknownFunction { id: String, name: String },
}

/// Per-category tallies plus the per-instance outcomes behind them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreSet {
    pub cells: BTreeMap<ProblemType, Cell>,
    pub outcomes: Vec<EvalOutcome>,
}

impl ScoreSet {
    pub fn pooled(&self) -> Cell {
        self.cells.values().fold(Cell::default(), |a, c| a.merge(*c))
    }

    fn record(&mut self, outcome: EvalOutcome) {
        let pt = outcome.problem_type.expect("category scores carry a problem type");
        self.cells.entry(pt).or_default().record(outcome.correct);
        self.outcomes.push(outcome);
    }
}

fn output<'a>(outputs: &'a HashMap<String, Generation>, id: &str) -> Result<&'a Generation, EvalError> {
    outputs.get(id).ok_or_else(|| EvalError::MissingOutput(id.to_string()))
}

fn check_outputs(instances: &[EvalInstance], outputs: &HashMap<String, Generation>) -> Result<(), EvalError> {
    instances.iter().try_for_each(|i| output(outputs, &i.id).map(|_| ()))
}

/// Candidate calls of a tool-use generation, or why there are none.
fn tool_calls(g: &Generation) -> Result<Vec<CallExpr>, String> {
    match &g.parsed {
        Err(e) => Err(format!("unparseable generation: {e}")),
        Ok(out) if !out.is_tool_use() => Err("model answered directly".into()),
        Ok(out) => Ok(out.calls.iter().map(CallExpr::from).collect()),
    }
}

/// AST accuracy: correct iff the model chose to use a tool and its calls
/// structurally match the targets.
pub fn score_ast(instances: &[EvalInstance], outputs: &HashMap<String, Generation>) -> Result<ScoreSet, EvalError> {
    check_outputs(instances, outputs)?;
    let mut set = ScoreSet::default();
    for inst in instances {
        let pt = classify(inst)?;
        let (correct, detail) = match tool_calls(output(outputs, &inst.id)?) {
            Err(why) => (false, Some(why)),
            Ok(calls) => {
                let ok = ast_match(&calls, &inst.target, pt)
                    .map_err(|source| EvalError::Match { id: inst.id.clone(), source })?;
                (ok, (!ok).then(|| "calls do not match the target".to_string()))
            }
        };
        set.record(EvalOutcome { id: inst.id.clone(), metric: Metric::Ast, problem_type: Some(pt), correct, detail });
    }
    Ok(set)
}

/// Executable accuracy: runs each generated call against `registry` and
/// compares the results with the expected ones. Execution faults make the
/// instance incorrect without stopping the run.
pub fn score_exec(
    instances: &[EvalInstance],
    outputs: &HashMap<String, Generation>,
    registry: &Registry,
) -> Result<(ScoreSet, Vec<Anomaly>), EvalError> {
    check_outputs(instances, outputs)?;
    let mut set = ScoreSet::default();
    let mut anomalies = Vec::new();
    for inst in instances {
        let pt = classify(inst)?;
        let expected =
            inst.expected_results.as_ref().ok_or_else(|| EvalError::MissingExpectedResults(inst.id.clone()))?;
        let verdict = tool_calls(output(outputs, &inst.id)?).and_then(|calls| {
            let mut results = Vec::with_capacity(calls.len());
            for call in &calls {
                if !inst.functions.iter().any(|f| f.name == call.name) {
                    return Err(format!("call to undeclared function {:?}", call.name));
                }
                let fc = crate::codec::FunctionCall::from(call);
                match registry.call(&call.name, &fc.arguments) {
                    None => {
                        anomalies.push(Anomaly::UnknownFunction { id: inst.id.clone(), name: call.name.clone() });
                        return Err(format!("no host implementation for {:?}", call.name));
                    }
                    Some(Err(fault)) => return Err(format!("execution fault in {}: {fault}", call.name)),
                    Some(Ok(v)) => results.push(v),
                }
            }
            if results_match(&results, expected, pt.is_parallel()) {
                Ok(())
            } else {
                Err("results differ from the expected outcomes".into())
            }
        });
        let (correct, detail) = match verdict {
            Ok(()) => (true, None),
            Err(why) => (false, Some(why)),
        };
        set.record(EvalOutcome { id: inst.id.clone(), metric: Metric::Exec, problem_type: Some(pt), correct, detail });
    }
    Ok((set, anomalies))
}

fn value_eq(a: &Value, b: &Value) -> bool {
    literal_eq(&Literal::from(a).canonical(), &Literal::from(b).canonical())
}

/// Positional comparison, or multiset comparison when `unordered`.
fn results_match(got: &[Value], expected: &[Value], unordered: bool) -> bool {
    if got.len() != expected.len() {
        return false;
    }
    if !unordered {
        return got.iter().zip(expected).all(|(a, b)| value_eq(a, b));
    }
    // bipartite matching by augmenting paths
    let n = got.len();
    let adj: Vec<Vec<usize>> = got.iter().map(|g| (0..n).filter(|&j| value_eq(g, &expected[j])).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|i| augment(i, &adj, &mut vec![false; n], &mut owner))
}

/// Relevance detection: success iff the model made no function call.
pub fn score_relevance(
    instances: &[EvalInstance],
    outputs: &HashMap<String, Generation>,
) -> Result<(Cell, Vec<EvalOutcome>), EvalError> {
    check_outputs(instances, outputs)?;
    let mut cell = Cell::default();
    let mut outcomes = Vec::with_capacity(instances.len());
    for inst in instances {
        if !inst.is_relevance() {
            return Err(EvalError::NotRelevanceInstance(inst.id.clone()));
        }
        let called = output(outputs, &inst.id)?.emits_call();
        cell.record(!called);
        outcomes.push(EvalOutcome {
            id: inst.id.clone(),
            metric: Metric::Relevance,
            problem_type: None,
            correct: !called,
            detail: called.then(|| "called a function although none is relevant".to_string()),
        });
    }
    Ok((cell, outcomes))
}

/// Full scoring run over a mixed instance set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: EvalReport,
    pub outcomes: Vec<EvalOutcome>,
    pub anomalies: Vec<Anomaly>,
}

/// Splits instances into relevance (no target), executable (expected results
/// given) and AST sets, scores each, and aggregates the report.
pub fn evaluate(
    instances: &[EvalInstance],
    outputs: &HashMap<String, Generation>,
    registry: Option<&Registry>,
) -> Result<Evaluation, EvalError> {
    check_outputs(instances, outputs)?;
    let (relevance, scored): (Vec<EvalInstance>, Vec<EvalInstance>) =
        instances.iter().cloned().partition(EvalInstance::is_relevance);
    let (exec, ast): (Vec<EvalInstance>, Vec<EvalInstance>) = scored.into_iter().partition(EvalInstance::is_executable);

    let ast_set = score_ast(&ast, outputs)?;
    let (exec_set, anomalies) = if exec.is_empty() {
        (ScoreSet::default(), vec![])
    } else {
        score_exec(&exec, outputs, registry.ok_or(EvalError::MissingRegistry)?)?
    };
    let (rel_cell, rel_outcomes) = score_relevance(&relevance, outputs)?;

    let report = aggregate_report(Some(&ast_set), Some(&exec_set), Some(rel_cell))?;
    let mut outcomes = ast_set.outcomes;
    outcomes.extend(exec_set.outcomes);
    outcomes.extend(rel_outcomes);
    Ok(Evaluation { report, outcomes, anomalies })
}
