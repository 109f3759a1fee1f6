//! Passkey retrieval: a short digit key hidden at a controlled token offset
//! inside filler text, scored per position bin.

mod counter;

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fc_eval::Cell;

pub use counter::{is_cjk, ApproxCounter, TokenCounter};

pub const DEFAULT_BINS: usize = 16;
pub const DEFAULT_DIGITS: usize = 6;
pub const DEFAULT_TRIALS_PER_BIN: usize = 20;

const HEADER: &str = "There is an important piece of information hidden inside a lot of irrelevant text. \
Find it and memorize it. I will quiz you about it afterwards.";
const NEEDLE_LEAD: &str = "The pass key is ";
const NEEDLE_TAIL: &str = ". Remember it.";
const QUESTION: &str = "What is the pass key? The pass key is";

const FILLER: [&str; 10] = [
    "The grass is green.",
    "The sky is blue.",
    "The sun is yellow.",
    "Here we go.",
    "There and back again.",
    "The river keeps flowing.",
    "Clouds drift over the hills.",
    "The day goes on as usual.",
    "Birds sit on the fence.",
    "Nothing much happens here.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasskeyInstance {
    pub id: String,
    pub prompt: String,
    pub passkey: String,
    /// Tokens before the first passkey digit.
    pub position_tokens: usize,
    pub context_tokens: usize,
    pub n_bins: usize,
    pub bin_index: usize,
    /// Measured length of `prompt`.
    pub prompt_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasskeyConfig {
    pub context_tokens: usize,
    pub n_bins: usize,
    pub bin_index: usize,
    pub passkey_digits: usize,
    pub seed: u64,
}

impl PasskeyConfig {
    pub fn new(context_tokens: usize, bin_index: usize, seed: u64) -> Self {
        Self { context_tokens, n_bins: DEFAULT_BINS, bin_index, passkey_digits: DEFAULT_DIGITS, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PasskeyError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("bin {bin} ([{lo}, {hi}) tokens) cannot host the passkey sentence")]
    BinTooNarrow { bin: usize, lo: usize, hi: usize },
    #[error("could not reach {target} tokens within 2% (closest {got})")]
    LengthUnreachable { target: usize, got: usize },
    #[error("position {position} outside [0, {context})")]
    OutOfRange { position: usize, context: usize },
    #[error("no response for instance {0}")]
    MissingResponse(String),
    #[error("instances disagree on context length or bin count")]
    MixedInstances,
}

/// Bin holding a token position: floor(position * n_bins / context).
pub fn bin_of(position: usize, context: usize, n_bins: usize) -> Result<usize, PasskeyError> {
    if position >= context || n_bins == 0 {
        return Err(PasskeyError::OutOfRange { position, context });
    }
    Ok((position as u128 * n_bins as u128 / context as u128) as usize)
}

/// Half-open token range `[lo, hi)` covered by `bin`.
pub fn bin_bounds(bin: usize, context: usize, n_bins: usize) -> (usize, usize) {
    let edge = |b: usize| (b as u128 * context as u128).div_ceil(n_bins as u128) as usize;
    (edge(bin), edge(bin + 1))
}

fn short(tokens: usize) -> String {
    if tokens > 0 && tokens.is_multiple_of(1000) {
        format!("{}k", tokens / 1000)
    } else {
        tokens.to_string()
    }
}

/// Range label such as `0-8k`, `64-72k` or `80-160`.
pub fn bin_label(bin: usize, context: usize, n_bins: usize) -> String {
    let (lo, hi) = bin_bounds(bin, context, n_bins);
    if lo.is_multiple_of(1000) && hi.is_multiple_of(1000) && hi > 0 {
        return format!("{}-{}k", lo / 1000, hi / 1000);
    }
    format!("{}-{}", short(lo), short(hi))
}

fn within_tolerance(total: usize, target: usize) -> bool {
    50 * total.abs_diff(target) <= target
}

struct Filler {
    text: String,
    /// Byte span of each word in `text`.
    spans: Vec<(usize, usize)>,
}

impl Filler {
    fn generate(min_tokens: usize, counter: &impl TokenCounter, rng: &mut ChaCha8Rng) -> Self {
        let mut sentences: Vec<&str> = Vec::new();
        let mut order = FILLER;
        let mut approx = 0usize;
        let mut goal = min_tokens + min_tokens / 10 + 16;
        loop {
            while approx < goal {
                order.shuffle(rng);
                for s in order {
                    approx += counter.count(s);
                    sentences.push(s);
                }
            }
            let text = sentences.join(" ");
            if counter.count(&text) >= min_tokens {
                let mut spans = Vec::new();
                let mut start = 0;
                for w in text.split(' ') {
                    spans.push((start, start + w.len()));
                    start += w.len() + 1;
                }
                return Filler { text, spans };
            }
            goal *= 2;
        }
    }

    fn words(&self, from: usize, to: usize) -> &str {
        if from >= to {
            ""
        } else {
            &self.text[self.spans[from].0..self.spans[to - 1].1]
        }
    }

    fn len(&self) -> usize {
        self.spans.len()
    }
}

fn join_nonempty(parts: &[&str]) -> String {
    parts.iter().filter(|p| !p.is_empty()).copied().collect::<Vec<_>>().join(" ")
}

struct Layout<'a> {
    filler: &'a Filler,
    key: &'a str,
}

impl Layout<'_> {
    fn before_key(&self, p: usize) -> String {
        join_nonempty(&[HEADER, self.filler.words(0, p), NEEDLE_LEAD.trim_end()]) + " "
    }

    fn prompt(&self, p: usize, q: usize) -> String {
        let needle = format!("{}{}", self.key, NEEDLE_TAIL);
        let head = self.before_key(p) + &needle;
        join_nonempty(&[&head, self.filler.words(p, q), QUESTION])
    }
}

/// Smallest `i` in `[lo, hi]` with `pred(i)`, or `hi + 1` if none.
fn partition_point(lo: usize, hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut a, mut b) = (lo, hi + 1);
    while a < b {
        let m = a + (b - a) / 2;
        if pred(m) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    a
}

fn random_key(digits: usize, rng: &mut ChaCha8Rng) -> String {
    (0..digits).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

/// Builds one instance with the passkey placed uniformly inside the
/// requested bin and filler sized to the target length within 2%.
pub fn generate_passkey_instance(
    cfg: &PasskeyConfig,
    counter: &impl TokenCounter,
) -> Result<PasskeyInstance, PasskeyError> {
    let PasskeyConfig { context_tokens: ctx, n_bins, bin_index: bin, passkey_digits, seed } = *cfg;
    if n_bins == 0 || bin >= n_bins {
        return Err(PasskeyError::InvalidConfig(format!("bin {bin} not in [0, {n_bins})")));
    }
    if ctx < n_bins {
        return Err(PasskeyError::InvalidConfig(format!("context {ctx} smaller than {n_bins} bins")));
    }
    if passkey_digits == 0 {
        return Err(PasskeyError::InvalidConfig("passkey needs at least one digit".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = random_key(passkey_digits, &mut rng);
    let filler = Filler::generate(ctx, counter, &mut rng);
    let layout = Layout { filler: &filler, key: &key };

    let (lo, hi) = bin_bounds(bin, ctx, n_bins);
    let max_total = ctx + ctx / 50;
    let tail = counter.count(&format!("{key}{NEEDLE_TAIL} {QUESTION}"));
    let earliest = counter.count(&layout.before_key(0));
    let latest = max_total.saturating_sub(tail + 1);
    let (from, to) = (lo.max(earliest), hi.min(latest + 1));
    if from >= to {
        return Err(PasskeyError::BinTooNarrow { bin, lo, hi });
    }

    let target = rng.random_range(from..to);
    let pos = |p: usize| counter.count(&layout.before_key(p));
    let mut p = partition_point(0, filler.len(), |p| pos(p) >= target);
    if p > filler.len() || pos(p) >= to {
        p = p.saturating_sub(1);
    }
    let position = pos(p);
    if !(from..to).contains(&position) {
        return Err(PasskeyError::BinTooNarrow { bin, lo, hi });
    }

    let total = |q: usize| counter.count(&layout.prompt(p, q));
    let q_hi = partition_point(p, filler.len(), |q| total(q) >= ctx).min(filler.len());
    let q = [q_hi.saturating_sub(1).max(p), q_hi]
        .into_iter()
        .min_by_key(|&q| total(q).abs_diff(ctx))
        .expect("two candidates");
    let prompt = layout.prompt(p, q);
    let prompt_tokens = counter.count(&prompt);
    if !within_tolerance(prompt_tokens, ctx) {
        return Err(PasskeyError::LengthUnreachable { target: ctx, got: prompt_tokens });
    }
    debug_assert_eq!(prompt.matches(key.as_str()).count(), 1);
    debug_assert_eq!(bin_of(position, ctx, n_bins), Ok(bin));

    Ok(PasskeyInstance {
        id: format!("ctx{ctx}-b{bin:02}-s{seed}"),
        prompt,
        passkey: key,
        position_tokens: position,
        context_tokens: ctx,
        n_bins,
        bin_index: bin,
        prompt_tokens,
    })
}

/// `per_bin` instances for every bin, ids `b{bin}-t{trial}`, seeds drawn from `seed`.
pub fn generate_suite(
    context_tokens: usize,
    n_bins: usize,
    per_bin: usize,
    passkey_digits: usize,
    seed: u64,
    counter: &impl TokenCounter,
) -> Result<Vec<PasskeyInstance>, PasskeyError> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_bins * per_bin);
    for bin in 0..n_bins {
        for trial in 0..per_bin {
            let cfg = PasskeyConfig { context_tokens, n_bins, bin_index: bin, passkey_digits, seed: master.next_u64() };
            let mut inst = generate_passkey_instance(&cfg, counter)?;
            inst.id = format!("b{bin:02}-t{trial:03}");
            out.push(inst);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinScore {
    pub bin: usize,
    pub label: String,
    #[serde(flatten)]
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub context_tokens: usize,
    pub n_bins: usize,
    pub bins: Vec<BinScore>,
}

impl BinReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.cell.accuracy()).collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.bins.iter().map(|b| b.cell.count).collect()
    }

    /// One column per bin: `Bin i (lo-hi)` over its whole-percent accuracy.
    pub fn to_table(&self) -> String {
        let heads: Vec<String> = self.bins.iter().map(|b| format!("Bin {} ({})", b.bin, b.label)).collect();
        let vals: Vec<String> = self
            .bins
            .iter()
            .map(|b| if b.cell.count == 0 { "-".to_string() } else { b.cell.display().to_string() })
            .collect();
        let mut out = String::new();
        let line = |cols: &[String]| {
            cols.iter().zip(&heads).map(|(c, h)| format!("{c:>w$}", w = h.len())).collect::<Vec<_>>().join(" | ")
        };
        let _ = writeln!(out, "{}", heads.join(" | "));
        let _ = writeln!(out, "{}", line(&vals));
        out
    }
}

/// An instance is correct when the exact passkey string occurs in its response.
pub fn score_retrieval(
    instances: &[PasskeyInstance],
    responses: &HashMap<String, String>,
) -> Result<BinReport, PasskeyError> {
    let Some(first) = instances.first() else {
        return Err(PasskeyError::InvalidConfig("no instances".into()));
    };
    let (ctx, n) = (first.context_tokens, first.n_bins);
    let mut cells = vec![Cell::default(); n];
    for inst in instances {
        if inst.context_tokens != ctx || inst.n_bins != n {
            return Err(PasskeyError::MixedInstances);
        }
        let bin = bin_of(inst.position_tokens, ctx, n)?;
        let response = responses.get(&inst.id).ok_or_else(|| PasskeyError::MissingResponse(inst.id.clone()))?;
        cells[bin].record(response.contains(&inst.passkey));
    }
    let bins = cells
        .into_iter()
        .enumerate()
        .map(|(bin, cell)| BinScore { bin, label: bin_label(bin, ctx, n), cell })
        .collect();
    Ok(BinReport { context_tokens: ctx, n_bins: n, bins })
}
