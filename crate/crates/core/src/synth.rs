//! Training-data derivation for function calling: non-function-call examples
//! built by deleting the called functions, category-balanced sampling, and
//! language mixing by ratio.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{FunctionCall, FunctionDescription};

/// Marker stored on derived answers; the answer text itself is left for
/// downstream labeling.
pub const NON_FUNCTION_CALL_PROVENANCE: &str = "derived:non-function-call";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    En,
    #[serde(rename = "zh-tw")]
    ZhTw,
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "en" => Ok(Language::En),
            "zh-tw" => Ok(Language::ZhTw),
            other => Err(format!("unknown language tag {other:?} (expected en or zh-tw)")),
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Language::En => "en",
            Language::ZhTw => "zh-tw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    UseTool {
        calls: Vec<FunctionCall>,
    },
    Answer {
        #[serde(default)]
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provenance: Option<String>,
    },
}

/// A function-calling training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcExample {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub functions: Vec<FunctionDescription>,
    pub query: String,
    pub label: Label,
    pub language: Language,
    /// Caller-defined category of the called functions.
    pub function_type: String,
}

impl FcExample {
    pub fn called_names(&self) -> Vec<&str> {
        match &self.label {
            Label::UseTool { calls } => calls.iter().map(|c| c.name.as_str()).collect(),
            Label::Answer { .. } => vec![],
        }
    }

    /// Every called name must be among the provided functions.
    pub fn check(&self) -> Result<(), SynthError> {
        let names: HashSet<&str> = self.functions.iter().map(|f| f.name.as_str()).collect();
        match self.called_names().into_iter().find(|n| !names.contains(n)) {
            Some(n) => Err(SynthError::InvalidExample(format!("calls undeclared function {n:?}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("example is not a function-call example")]
    NotAFunctionCallExample,
    #[error("removing the called functions leaves no functions")]
    NoRemainingFunctions,
    #[error("invalid example: {0}")]
    InvalidExample(String),
    #[error("pool{} holds {available} examples, {requested} requested", language.map(|l| format!(" for {l}")).unwrap_or_default())]
    InsufficientPool { language: Option<Language>, requested: usize, available: usize },
    #[error("invalid ratio: {0}")]
    InvalidRatio(String),
}

/// Turns a function-call example into one where no provided function fits:
/// every called function is removed and the label becomes an answer slot.
pub fn derive_non_function_call(ex: &FcExample) -> Result<FcExample, SynthError> {
    let Label::UseTool { calls } = &ex.label else {
        return Err(SynthError::NotAFunctionCallExample);
    };
    if calls.is_empty() {
        return Err(SynthError::NotAFunctionCallExample);
    }
    ex.check()?;
    let called: HashSet<&str> = calls.iter().map(|c| c.name.as_str()).collect();
    let functions: Vec<FunctionDescription> =
        ex.functions.iter().filter(|f| !called.contains(f.name.as_str())).cloned().collect();
    if functions.is_empty() {
        return Err(SynthError::NoRemainingFunctions);
    }
    Ok(FcExample {
        id: ex.id.as_ref().map(|id| format!("{id}-nf")),
        functions,
        query: ex.query.clone(),
        label: Label::Answer { text: String::new(), provenance: Some(NON_FUNCTION_CALL_PROVENANCE.into()) },
        language: ex.language,
        function_type: ex.function_type.clone(),
    })
}

/// Per-type quotas: one at a time to every type with supply left until `k`
/// is spent; when the last round cannot cover every type, a seeded shuffle
/// picks which types get the extra one.
pub fn balanced_quotas(supply: &BTreeMap<String, usize>, k: usize, rng: &mut ChaCha8Rng) -> BTreeMap<String, usize> {
    let mut quota: BTreeMap<String, usize> = supply.keys().map(|t| (t.clone(), 0)).collect();
    let mut remaining = k;
    while remaining > 0 {
        let mut active: Vec<&String> = supply.iter().filter(|(t, s)| quota[*t] < **s).map(|(t, _)| t).collect();
        if active.is_empty() {
            break;
        }
        if active.len() > remaining {
            active.shuffle(rng);
            active.truncate(remaining);
        }
        for t in &active {
            *quota.get_mut(*t).expect("known type") += 1;
        }
        remaining -= active.len();
    }
    quota
}

/// Draws `k` examples keeping per-`function_type` counts as even as supply
/// allows. Deterministic for a given seed.
pub fn balanced_sample(pool: &[FcExample], k: usize, seed: u64) -> Result<Vec<FcExample>, SynthError> {
    if k > pool.len() {
        return Err(SynthError::InsufficientPool { language: None, requested: k, available: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, ex) in pool.iter().enumerate() {
        groups.entry(ex.function_type.clone()).or_default().push(i);
    }
    for idx in groups.values_mut() {
        idx.shuffle(&mut rng);
    }
    let supply = groups.iter().map(|(t, v)| (t.clone(), v.len())).collect();
    let quotas = balanced_quotas(&supply, k, &mut rng);

    let mut picked: Vec<usize> = groups.iter().flat_map(|(t, idx)| idx[..quotas[t]].iter().copied()).collect();
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}

/// Largest-remainder apportionment of `k` by positive weights. Ties on the
/// remainder go to the larger weight, then to the smaller key.
pub fn apportion<K: Ord + Clone>(k: usize, weights: &BTreeMap<K, f64>) -> Result<BTreeMap<K, usize>, SynthError> {
    if weights.is_empty() {
        return Err(SynthError::InvalidRatio("no weights".into()));
    }
    if let Some(w) = weights.values().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(SynthError::InvalidRatio(format!("weight {w} is not positive")));
    }
    let total: f64 = weights.values().sum();
    let mut rows: Vec<(K, f64, usize, f64)> = weights
        .iter()
        .map(|(key, &w)| {
            let exact = k as f64 * w / total;
            let floor = exact.floor();
            (key.clone(), w, floor as usize, exact - floor)
        })
        .collect();
    let assigned: usize = rows.iter().map(|r| r.2).sum();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[b].3.total_cmp(&rows[a].3).then(rows[b].1.total_cmp(&rows[a].1)).then(rows[a].0.cmp(&rows[b].0))
    });
    for &i in order.iter().take(k.saturating_sub(assigned)) {
        rows[i].2 += 1;
    }
    Ok(rows.into_iter().map(|(key, _, n, _)| (key, n)).collect())
}

fn language_seed(seed: u64, lang: Language) -> u64 {
    seed ^ (lang as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Splits `k` across languages by `ratio` and draws each share with
/// [`balanced_sample`].
pub fn mix_by_ratio(
    pools: &BTreeMap<Language, Vec<FcExample>>,
    ratio: &BTreeMap<Language, f64>,
    k: usize,
    seed: u64,
) -> Result<Vec<FcExample>, SynthError> {
    let shares = apportion(k, ratio)?;
    let mut out = Vec::with_capacity(k);
    for (lang, n) in &shares {
        let pool = pools.get(lang).map(Vec::as_slice).unwrap_or(&[]);
        let drawn = balanced_sample(pool, *n, language_seed(seed, *lang)).map_err(|e| match e {
            SynthError::InsufficientPool { requested, available, .. } => {
                SynthError::InsufficientPool { language: Some(*lang), requested, available }
            }
            other => other,
        })?;
        out.extend(drawn);
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

pub fn partition_by_language(pool: Vec<FcExample>) -> BTreeMap<Language, Vec<FcExample>> {
    let mut out: BTreeMap<Language, Vec<FcExample>> = BTreeMap::new();
    for ex in pool {
        out.entry(ex.language).or_default().push(ex);
    }
    out
}
