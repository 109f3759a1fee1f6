//! Call representations: literal values, keyword-only call expressions,
//! canonical form, and structural matching against answer specs.

mod matcher;
mod parser;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use unicode_normalization::UnicodeNormalization;

use crate::codec::FunctionCall;

pub use matcher::{ast_match, call_matches, literal_eq, AnswerSpec, MatchError, MAX_MATCH_CALLS};
pub use parser::{parse_call_expressions, parse_call_json, GrammarError};

/// Relative tolerance for numeric equality in structural matching.
pub const FLOAT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Value", into = "Value")]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Literal>),
    Map(IndexMap<String, Literal>),
}

impl From<Value> for Literal {
    fn from(v: Value) -> Self {
        Literal::from(&v)
    }
}

impl From<&Value> for Literal {
    fn from(v: &Value) -> Self {
        match v {
            Value::Null => Literal::Null,
            Value::Bool(b) => Literal::Bool(*b),
            Value::Number(n) => match n.as_i64() {
                Some(i) => Literal::Int(i),
                None => Literal::Float(n.as_f64().unwrap_or(f64::NAN)),
            },
            Value::String(s) => Literal::Str(s.clone()),
            Value::Array(a) => Literal::List(a.iter().map(Literal::from).collect()),
            Value::Object(o) => Literal::Map(o.iter().map(|(k, v)| (k.clone(), Literal::from(v))).collect()),
        }
    }
}

impl From<Literal> for Value {
    fn from(l: Literal) -> Self {
        Value::from(&l)
    }
}

impl From<&Literal> for Value {
    fn from(l: &Literal) -> Self {
        match l {
            Literal::Null => Value::Null,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Number((*i).into()),
            Literal::Float(f) => Number::from_f64(*f).map(Value::Number).unwrap_or(Value::Null),
            Literal::Str(s) => Value::String(s.clone()),
            Literal::List(items) => Value::Array(items.iter().map(Value::from).collect()),
            Literal::Map(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), Value::from(v))).collect()),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("None"),
            Literal::Bool(true) => f.write_str("True"),
            Literal::Bool(false) => f.write_str("False"),
            Literal::Int(i) => write!(f, "{i}"),
            // Debug keeps a '.' or exponent so the value re-parses as a float
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Str(s) => write!(f, "{}", Value::String(s.clone())),
            Literal::List(items) => {
                f.write_str("[")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str("]")
            }
            Literal::Map(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {v}", Value::String(k.clone()))?;
                }
                f.write_str("}")
            }
        }
    }
}

impl Literal {
    /// Integral floats fold to integers, strings and keys are NFC-normalized,
    /// and map keys are sorted.
    pub fn canonical(&self) -> Literal {
        match self {
            Literal::Float(x) if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.2e18 => Literal::Int(*x as i64),
            Literal::Str(s) => Literal::Str(s.nfc().collect()),
            Literal::List(items) => Literal::List(items.iter().map(Literal::canonical).collect()),
            Literal::Map(m) => {
                let mut entries: Vec<(String, Literal)> =
                    m.iter().map(|(k, v)| (k.nfc().collect(), v.canonical())).collect();
                entries.sort_by(|a, b| a.0.cmp(&b.0));
                Literal::Map(entries.into_iter().collect())
            }
            other => other.clone(),
        }
    }
}

/// A call `name(k1=v1, k2=v2)` with a possibly dotted name and keyword-only arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallExpr {
    pub name: String,
    pub kwargs: Vec<(String, Literal)>,
}

impl CallExpr {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), kwargs: Vec::new() }
    }

    pub fn kwarg(mut self, name: impl Into<String>, value: Literal) -> Self {
        self.kwargs.push((name.into(), value));
        self
    }

    pub fn get(&self, name: &str) -> Option<&Literal> {
        self.kwargs.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

impl fmt::Display for CallExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, (k, v)) in self.kwargs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// `[a(...), b(...)]`
pub fn format_calls(calls: &[CallExpr]) -> String {
    let inner: Vec<String> = calls.iter().map(ToString::to_string).collect();
    format!("[{}]", inner.join(", "))
}

impl From<&FunctionCall> for CallExpr {
    fn from(c: &FunctionCall) -> Self {
        CallExpr {
            name: c.name.clone(),
            kwargs: c.arguments.iter().map(|(k, v)| (k.clone(), Literal::from(v))).collect(),
        }
    }
}

impl From<&CallExpr> for FunctionCall {
    fn from(c: &CallExpr) -> Self {
        FunctionCall {
            name: c.name.clone(),
            arguments: c.kwargs.iter().map(|(k, v)| (k.clone(), Value::from(v))).collect(),
        }
    }
}

/// Sorts kwargs by name and canonicalizes every value. Idempotent.
pub fn canonicalize(c: &CallExpr) -> CallExpr {
    let mut kwargs: Vec<(String, Literal)> = c.kwargs.iter().map(|(k, v)| (k.clone(), v.canonical())).collect();
    kwargs.sort_by(|a, b| a.0.cmp(&b.0));
    CallExpr { name: c.name.clone(), kwargs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorts_kwargs() {
        let c = CallExpr::new("f").kwarg("b", Literal::Int(1)).kwarg("a", Literal::Int(2));
        assert_eq!(canonicalize(&c).to_string(), "f(a=2, b=1)");
    }

    #[test]
    fn folds_integral_floats() {
        let c = CallExpr::new("f").kwarg("x", Literal::Float(2.0));
        assert_eq!(canonicalize(&c), CallExpr::new("f").kwarg("x", Literal::Int(2)));
        let c = CallExpr::new("f").kwarg("x", Literal::Float(2.5));
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn nfc_strings() {
        // "e" + combining acute -> precomposed
        let c = CallExpr::new("f").kwarg("s", Literal::Str("e\u{301}".into()));
        assert_eq!(canonicalize(&c).get("s"), Some(&Literal::Str("\u{e9}".into())));
    }

    #[test]
    fn display_forms() {
        let mut m = IndexMap::new();
        m.insert("k".to_string(), Literal::List(vec![Literal::Null, Literal::Bool(true)]));
        let c = CallExpr::new("mod.f")
            .kwarg("s", Literal::Str("a\"b".into()))
            .kwarg("x", Literal::Float(-2.0))
            .kwarg("m", Literal::Map(m));
        assert_eq!(c.to_string(), r#"mod.f(s="a\"b", x=-2.0, m={"k": [None, True]})"#);
    }

    pub(crate) fn literal() -> impl Strategy<Value = Literal> {
        let leaf = prop_oneof![
            Just(Literal::Null),
            any::<bool>().prop_map(Literal::Bool),
            (-1000i64..1000).prop_map(Literal::Int),
            (-1.0e6f64..1.0e6).prop_map(Literal::Float),
            (-50i64..50).prop_map(|i| Literal::Float(i as f64)),
            "[a-zA-Z0-9 \u{e9}\u{301}\"\\\\]{0,8}".prop_map(Literal::Str),
        ];
        leaf.prop_recursive(3, 16, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Literal::List),
                prop::collection::vec(("[a-z]{1,4}", inner), 0..4)
                    .prop_map(|kv| Literal::Map(kv.into_iter().collect())),
            ]
        })
    }

    pub(crate) fn call_expr() -> impl Strategy<Value = CallExpr> {
        ("[a-z_][a-z0-9_]{0,6}", prop::collection::btree_map("[a-z_][a-z0-9_]{0,5}", literal(), 0..5))
            .prop_map(|(name, kw)| CallExpr { name, kwargs: kw.into_iter().rev().collect() })
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(c in call_expr()) {
            let once = canonicalize(&c);
            prop_assert_eq!(canonicalize(&once), once);
        }

        #[test]
        fn function_call_round_trip(c in call_expr()) {
            let fc = FunctionCall::from(&c);
            let back = CallExpr::from(&fc);
            prop_assert_eq!(back, c);
        }
    }
}
