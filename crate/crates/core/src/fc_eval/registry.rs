//! Local, deterministic host functions for executable accuracy.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::grammar::{literal_eq, Literal};

/// A host implementation: keyword arguments in, result or fault message out.
pub type HostFn = dyn Fn(&Map<String, Value>) -> Result<Value, String> + Send + Sync;

#[derive(Clone, Default)]
pub struct Registry {
    fns: HashMap<String, Arc<HostFn>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<&String> = self.fns.keys().collect();
        names.sort();
        f.debug_struct("Registry").field("functions", &names).finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: impl Into<String>, f: F) -> &mut Self
    where
        F: Fn(&Map<String, Value>) -> Result<Value, String> + Send + Sync + 'static,
    {
        self.fns.insert(name.into(), Arc::new(f));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.fns.contains_key(name)
    }

    pub fn call(&self, name: &str, args: &Map<String, Value>) -> Option<Result<Value, String>> {
        self.fns.get(name).map(|f| f(args))
    }

    pub fn from_manifest(manifest: &RegistryManifest) -> Result<Self, RegistryError> {
        let mut reg = Registry::new();
        for entry in &manifest.functions {
            if reg.contains(&entry.name) {
                return Err(RegistryError::Duplicate(entry.name.clone()));
            }
            let f = entry.build()?;
            reg.fns.insert(entry.name.clone(), f);
        }
        Ok(reg)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("function {0:?} is declared twice")]
    Duplicate(String),
    #[error("function {name:?}: {detail}")]
    Invalid { name: String, detail: String },
}

/// JSON manifest: `{"functions": [ ... ]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryManifest {
    pub functions: Vec<RegistryEntry>,
}

/// One manifest entry. Exactly one of `builtin` or `table` must be set.
///
/// `params` fixes which arguments a builtin reads and in what order; without
/// it, variadic builtins read every argument in call order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<TableRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub arguments: Map<String, Value>,
    pub result: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Add,
    Subtract,
    Multiply,
    Divide,
    Power,
    Max,
    Min,
    Concat,
    Echo,
    Constant,
}

impl Builtin {
    fn binary(self) -> bool {
        matches!(self, Builtin::Subtract | Builtin::Divide | Builtin::Power)
    }
}

impl RegistryEntry {
    fn build(&self) -> Result<Arc<HostFn>, RegistryError> {
        let invalid = |detail: &str| RegistryError::Invalid { name: self.name.clone(), detail: detail.into() };
        match (&self.builtin, &self.table) {
            (Some(_), Some(_)) | (None, None) => Err(invalid("set exactly one of \"builtin\" or \"table\"")),
            (None, Some(rows)) => {
                let rows: Vec<(Literal, Value)> = rows
                    .iter()
                    .map(|r| (Literal::from(&Value::Object(r.arguments.clone())).canonical(), r.result.clone()))
                    .collect();
                Ok(Arc::new(move |args: &Map<String, Value>| {
                    let key = Literal::from(&Value::Object(args.clone())).canonical();
                    rows.iter()
                        .find(|(k, _)| literal_eq(k, &key))
                        .map(|(_, v)| v.clone())
                        .ok_or_else(|| "no table entry for these arguments".to_string())
                }))
            }
            (Some(b), None) => {
                let b = *b;
                if b.binary() && self.params.as_ref().map(Vec::len) != Some(2) {
                    return Err(invalid("binary builtins need exactly two \"params\""));
                }
                if b == Builtin::Constant && self.value.is_none() {
                    return Err(invalid("constant builtin needs a \"value\""));
                }
                let params = self.params.clone();
                let value = self.value.clone().unwrap_or(Value::Null);
                Ok(Arc::new(move |args: &Map<String, Value>| run_builtin(b, params.as_deref(), &value, args)))
            }
        }
    }
}

fn select<'a>(params: Option<&[String]>, args: &'a Map<String, Value>) -> Result<Vec<&'a Value>, String> {
    match params {
        Some(ps) => {
            if let Some(extra) = args.keys().find(|k| !ps.contains(k)) {
                return Err(format!("unexpected argument {extra:?}"));
            }
            ps.iter().map(|p| args.get(p).ok_or_else(|| format!("missing argument {p:?}"))).collect()
        }
        None => Ok(args.values().collect()),
    }
}

#[derive(Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

impl Num {
    fn of(v: &Value) -> Result<Num, String> {
        match v {
            Value::Number(n) => Ok(n.as_i64().map(Num::I).unwrap_or_else(|| Num::F(n.as_f64().unwrap_or(f64::NAN)))),
            other => Err(format!("expected a number, got {other}")),
        }
    }

    fn f(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::F(f) => f,
        }
    }

    fn value(self) -> Result<Value, String> {
        match self {
            Num::I(i) => Ok(Value::from(i)),
            Num::F(f) => Number::from_f64(f).map(Value::Number).ok_or_else(|| "non-finite result".to_string()),
        }
    }
}

fn fold(nums: &[Num], int_op: fn(i64, i64) -> Option<i64>, float_op: fn(f64, f64) -> f64) -> Result<Num, String> {
    let mut it = nums.iter().copied();
    let first = it.next().ok_or("needs at least one argument")?;
    it.try_fold(first, |acc, x| match (acc, x) {
        (Num::I(a), Num::I(b)) => int_op(a, b).map(Num::I).ok_or_else(|| "integer overflow".to_string()),
        _ => Ok(Num::F(float_op(acc.f(), x.f()))),
    })
}

fn run_builtin(
    b: Builtin,
    params: Option<&[String]>,
    constant: &Value,
    args: &Map<String, Value>,
) -> Result<Value, String> {
    let vals = select(params, args)?;
    let nums = || vals.iter().map(|v| Num::of(v)).collect::<Result<Vec<_>, _>>();
    match b {
        Builtin::Add => fold(&nums()?, i64::checked_add, |a, b| a + b)?.value(),
        Builtin::Subtract => fold(&nums()?, i64::checked_sub, |a, b| a - b)?.value(),
        Builtin::Multiply => fold(&nums()?, i64::checked_mul, |a, b| a * b)?.value(),
        Builtin::Divide => {
            let n = nums()?;
            if n[1].f() == 0.0 {
                return Err("division by zero".into());
            }
            Num::F(n[0].f() / n[1].f()).value()
        }
        Builtin::Power => {
            let n = nums()?;
            match (n[0], n[1]) {
                (Num::I(a), Num::I(e)) if (0..=u32::MAX as i64).contains(&e) => {
                    a.checked_pow(e as u32).map(Value::from).ok_or_else(|| "integer overflow".into())
                }
                (a, e) => Num::F(a.f().powf(e.f())).value(),
            }
        }
        Builtin::Max => fold(&nums()?, |a, b| Some(a.max(b)), f64::max)?.value(),
        Builtin::Min => fold(&nums()?, |a, b| Some(a.min(b)), f64::min)?.value(),
        Builtin::Concat => {
            let mut s = String::new();
            for v in vals {
                match v {
                    Value::String(x) => s.push_str(x),
                    other => s.push_str(&other.to_string()),
                }
            }
            Ok(Value::String(s))
        }
        Builtin::Echo => Ok(Value::Object(args.clone())),
        Builtin::Constant => Ok(constant.clone()),
    }
}
