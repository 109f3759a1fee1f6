use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{canonicalize, CallExpr, Literal, FLOAT_REL_TOL};
use crate::codec::FunctionCall;
use crate::fc_eval::ProblemType;

/// Largest call count the exhaustive assignment search accepts.
pub const MAX_MATCH_CALLS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("target call list is empty")]
    EmptyTarget,
    #[error("{0} calls exceed the assignment search limit of {MAX_MATCH_CALLS}")]
    TooManyCalls(usize),
}

/// Acceptable values for one expected call.
///
/// JSON form: `{"name": "f", "args": {"a": [1, 2]}, "optional": ["a"]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnswerSpecRepr", into = "AnswerSpecRepr")]
pub struct AnswerSpec {
    name: String,
    args: IndexMap<String, Vec<Literal>>,
    optional: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerSpecRepr {
    name: String,
    #[serde(default)]
    args: IndexMap<String, Vec<Literal>>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    optional: BTreeSet<String>,
}

impl TryFrom<AnswerSpecRepr> for AnswerSpec {
    type Error = String;

    fn try_from(r: AnswerSpecRepr) -> Result<Self, String> {
        AnswerSpec::new(r.name, r.args, r.optional)
    }
}

impl From<AnswerSpec> for AnswerSpecRepr {
    fn from(s: AnswerSpec) -> Self {
        AnswerSpecRepr { name: s.name, args: s.args, optional: s.optional }
    }
}

impl AnswerSpec {
    pub fn new(
        name: impl Into<String>,
        args: IndexMap<String, Vec<Literal>>,
        optional: BTreeSet<String>,
    ) -> Result<Self, String> {
        let name = name.into();
        if name.is_empty() || !name.split('.').all(crate::codec::is_identifier) {
            return Err(format!("spec name {name:?} is not a dotted identifier"));
        }
        if let Some((k, _)) = args.iter().find(|(_, v)| v.is_empty()) {
            return Err(format!("argument {k:?} of {name} has no acceptable values"));
        }
        if let Some(o) = optional.iter().find(|o| !args.contains_key(*o)) {
            return Err(format!("optional argument {o:?} of {name} has no acceptable-value entry"));
        }
        Ok(Self { name, args, optional })
    }

    /// Spec accepting exactly the given call's arguments, all required.
    pub fn exact(call: &CallExpr) -> Self {
        let args = call.kwargs.iter().map(|(k, v)| (k.clone(), vec![v.clone()])).collect();
        Self { name: call.name.clone(), args, optional: BTreeSet::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &IndexMap<String, Vec<Literal>> {
        &self.args
    }

    pub fn optional(&self) -> &BTreeSet<String> {
        &self.optional
    }

    /// The call a perfect model would emit: every required argument with its
    /// first acceptable value, optional arguments omitted.
    pub fn canonical_call(&self) -> FunctionCall {
        let call = CallExpr {
            name: self.name.clone(),
            kwargs: self
                .args
                .iter()
                .filter(|(k, _)| !self.optional.contains(*k))
                .map(|(k, v)| (k.clone(), v[0].clone()))
                .collect(),
        };
        FunctionCall::from(&call)
    }
}

/// Literal equality after canonicalization: numbers within a relative
/// tolerance, exact match for every other kind, no cross-kind coercion.
pub fn literal_eq(a: &Literal, b: &Literal) -> bool {
    use Literal::*;
    match (a, b) {
        (Int(x), Int(y)) => x == y,
        (Int(_) | Float(_), Int(_) | Float(_)) => {
            let (x, y) = (as_f64(a), as_f64(b));
            x == y || (x - y).abs() <= FLOAT_REL_TOL * x.abs().max(y.abs())
        }
        (Null, Null) => true,
        (Bool(x), Bool(y)) => x == y,
        (Str(x), Str(y)) => x == y,
        (List(xs), List(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| literal_eq(x, y)),
        (Map(xs), Map(ys)) => {
            xs.len() == ys.len() && xs.iter().all(|(k, x)| ys.get(k).is_some_and(|y| literal_eq(x, y)))
        }
        _ => false,
    }
}

fn as_f64(l: &Literal) -> f64 {
    match l {
        Literal::Int(i) => *i as f64,
        Literal::Float(f) => *f,
        _ => f64::NAN,
    }
}

/// Whether one candidate call satisfies one spec.
pub fn call_matches(candidate: &CallExpr, spec: &AnswerSpec) -> bool {
    let c = canonicalize(candidate);
    if c.name != spec.name {
        return false;
    }
    let args_ok = c
        .kwargs
        .iter()
        .all(|(k, v)| spec.args.get(k).is_some_and(|accepted| accepted.iter().any(|a| literal_eq(v, &a.canonical()))));
    let required_ok = spec.args.keys().filter(|k| !spec.optional.contains(*k)).all(|k| c.get(k).is_some());
    args_ok && required_ok
}

/// Structural match of generated calls against expected call specs.
///
/// Parallel modes search for a one-to-one assignment in any order; the other
/// modes compare position by position.
pub fn ast_match(candidates: &[CallExpr], targets: &[AnswerSpec], mode: ProblemType) -> Result<bool, MatchError> {
    if targets.is_empty() {
        return Err(MatchError::EmptyTarget);
    }
    if candidates.len() != targets.len() {
        return Ok(false);
    }
    let n = targets.len();
    if n > MAX_MATCH_CALLS {
        return Err(MatchError::TooManyCalls(n));
    }
    if !mode.is_parallel() {
        return Ok(candidates.iter().zip(targets).all(|(c, t)| call_matches(c, t)));
    }

    let compatible: Vec<Vec<bool>> =
        candidates.iter().map(|c| targets.iter().map(|t| call_matches(c, t)).collect()).collect();
    let mut used = vec![false; n];
    Ok(assign(&compatible, 0, &mut used))
}

fn assign(compatible: &[Vec<bool>], row: usize, used: &mut [bool]) -> bool {
    if row == compatible.len() {
        return true;
    }
    for col in 0..used.len() {
        if compatible[row][col] && !used[col] {
            used[col] = true;
            if assign(compatible, row + 1, used) {
                return true;
            }
            used[col] = false;
        }
    }
    false
}
