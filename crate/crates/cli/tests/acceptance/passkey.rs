use std::collections::HashMap;
use std::time::Instant;

use regex::Regex;
use toolchat_core::passkey::{generate_suite, score_retrieval, ApproxCounter};

use crate::{ensure, Check};

/// chars/4 rounded up; the generated prompts are ASCII.
fn approx_tokens(s: &str) -> usize {
    assert!(s.is_ascii());
    s.len().div_ceil(4)
}

pub fn run() -> Check {
    let start = Instant::now();
    let (ctx, bins, per_bin) = (1280, 16, 20);
    let suite = generate_suite(ctx, bins, per_bin, 6, 1234, &ApproxCounter).map_err(|e| e.to_string())?;
    ensure(suite.len() == bins * per_bin, || format!("{} instances", suite.len()))?;

    let id_re = Regex::new(r"^b(\d+)-t\d+$").unwrap();
    let mut worst = 0.0f64;
    for inst in &suite {
        let bin: usize = id_re.captures(&inst.id).ok_or("bad id")?[1].parse().unwrap();
        let (lo, hi) = (bin * ctx / bins, (bin + 1) * ctx / bins);
        ensure(inst.bin_index == bin && (lo..hi).contains(&inst.position_tokens), || {
            format!("{}: position {} outside [{lo}, {hi})", inst.id, inst.position_tokens)
        })?;
        let at = inst.prompt.find(&inst.passkey).ok_or("passkey missing")?;
        ensure(approx_tokens(&inst.prompt[..at]) == inst.position_tokens, || {
            format!("{}: position miscounted", inst.id)
        })?;
        ensure(inst.prompt.matches(&inst.passkey).count() == 1, || format!("{}: passkey repeated", inst.id))?;
        let dev = (approx_tokens(&inst.prompt) as f64 - ctx as f64).abs() / ctx as f64;
        worst = worst.max(dev);
        ensure(dev <= 0.02, || format!("{}: length off by {:.2}%", inst.id, dev * 100.0))?;
    }

    let key_re = Regex::new(r"The pass key is (\d+)\.").unwrap();
    let responses: HashMap<String, String> = suite
        .iter()
        .map(|i| (i.id.clone(), key_re.captures(&i.prompt).map(|c| c[1].to_string()).unwrap_or_default()))
        .collect();
    let report = score_retrieval(&suite, &responses).map_err(|e| e.to_string())?;
    ensure(report.bins.len() == bins, || "wrong bin count".into())?;
    for b in &report.bins {
        ensure(b.cell.count == per_bin as u64 && b.cell.accuracy() == 100.0, || {
            format!("bin {} scored {}/{}", b.bin, b.cell.correct, b.cell.count)
        })?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "320 instances in-bin, max length deviation {:.2}%, oracle 100 in all 16 bins, {secs:.2}s",
        worst * 100.0
    ))
}
