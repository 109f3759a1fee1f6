use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;

use indexmap::IndexMap;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use toolchat_core::fc_eval::{evaluate, EvalInstance, Generation, OutputRecord, ProblemType};
use toolchat_core::grammar::{ast_match, AnswerSpec, CallExpr, Literal};
use toolchat_core::jsonl::read_jsonl_file;

use crate::{ensure, fixtures, Check};

fn small_literal(rng: &mut ChaCha8Rng) -> Literal {
    match rng.random_range(0..3) {
        0 => Literal::Int(rng.random_range(0..3)),
        1 => Literal::Str(["a", "b"].choose(rng).unwrap().to_string()),
        _ => Literal::Bool(rng.random_bool(0.5)),
    }
}

fn random_spec(rng: &mut ChaCha8Rng, names: &[&str]) -> AnswerSpec {
    let mut args = IndexMap::new();
    let mut optional = BTreeSet::new();
    for p in ["x", "y", "z"].iter().take(rng.random_range(1..=3)) {
        let mut accepted = vec![small_literal(rng)];
        if rng.random_bool(0.4) {
            accepted.push(small_literal(rng));
        }
        args.insert(p.to_string(), accepted);
        if rng.random_bool(0.3) {
            optional.insert(p.to_string());
        }
    }
    AnswerSpec::new(*names.choose(rng).unwrap(), args, optional).unwrap()
}

/// A call meant to satisfy `spec`, sometimes perturbed so it does not.
fn candidate_for(rng: &mut ChaCha8Rng, spec: &AnswerSpec, names: &[&str]) -> CallExpr {
    let mut c = CallExpr::new(spec.name());
    for (k, accepted) in spec.args() {
        if spec.optional().contains(k) && rng.random_bool(0.5) {
            continue;
        }
        let mut v = accepted.choose(rng).unwrap().clone();
        if let (Literal::Int(i), true) = (&v, rng.random_bool(0.2)) {
            v = Literal::Float(*i as f64);
        }
        c = c.kwarg(k.clone(), v);
    }
    if rng.random_bool(0.3) {
        match rng.random_range(0..4) {
            0 if !c.kwargs.is_empty() => {
                let i = rng.random_range(0..c.kwargs.len());
                c.kwargs[i].1 = small_literal(rng);
            }
            1 if !c.kwargs.is_empty() => {
                c.kwargs.remove(rng.random_range(0..c.kwargs.len()));
            }
            2 => c = c.kwarg("extra", Literal::Int(1)),
            _ => c.name = names.choose(rng).unwrap().to_string(),
        }
    }
    c
}

fn oracle_eq(a: &Literal, b: &Literal) -> bool {
    match (a, b) {
        (Literal::Int(x), Literal::Float(y)) | (Literal::Float(y), Literal::Int(x)) => *x as f64 == *y,
        _ => a == b,
    }
}

fn oracle_call(c: &CallExpr, s: &AnswerSpec) -> bool {
    c.name == s.name()
        && c.kwargs.iter().all(|(k, v)| s.args().get(k).is_some_and(|acc| acc.iter().any(|a| oracle_eq(v, a))))
        && s.args().keys().filter(|k| !s.optional().contains(*k)).all(|k| c.kwargs.iter().any(|(ck, _)| ck == k))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn oracle(cands: &[CallExpr], targets: &[AnswerSpec], mode: ProblemType) -> bool {
    if cands.len() != targets.len() {
        return false;
    }
    if !mode.is_parallel() {
        return cands.iter().zip(targets).all(|(c, t)| oracle_call(c, t));
    }
    permutations(targets.len()).iter().any(|p| p.iter().enumerate().all(|(i, &j)| oracle_call(&cands[i], &targets[j])))
}

fn randomized() -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut positives = 0;
    for i in 0..500 {
        let mode = *ProblemType::ALL.choose(&mut rng).unwrap();
        let names: &[&str] =
            if matches!(mode, ProblemType::Simple | ProblemType::Parallel) { &["f"] } else { &["f", "g", "h"] };
        let n = if mode.is_parallel() { rng.random_range(2..=4) } else { 1 };
        let targets: Vec<AnswerSpec> = (0..n).map(|_| random_spec(&mut rng, names)).collect();
        let mut cands: Vec<CallExpr> = targets.iter().map(|t| candidate_for(&mut rng, t, names)).collect();
        if rng.random_bool(0.6) || !mode.is_parallel() && rng.random_bool(0.1) {
            cands.shuffle(&mut rng);
        }
        if rng.random_bool(0.05) {
            cands.pop();
        }
        let got = ast_match(&cands, &targets, mode).map_err(|e| e.to_string())?;
        let want = oracle(&cands, &targets, mode);
        ensure(got == want, || format!("instance {i} ({mode}): matcher {got}, oracle {want}"))?;
        positives += usize::from(want);
    }
    Ok((500, positives))
}

#[derive(Deserialize)]
struct Verdicts {
    pairs: BTreeMap<String, Verdict>,
    cells: BTreeMap<ProblemType, u64>,
    overall: u64,
}

#[derive(Deserialize)]
struct Verdict {
    correct: bool,
}

fn adjudicated() -> Result<String, String> {
    let dir = fixtures().join("fc_adjudicated");
    let instances: Vec<EvalInstance> = read_jsonl_file(dir.join("instances.jsonl")).map_err(|e| e.to_string())?;
    let outputs: Vec<OutputRecord> = read_jsonl_file(dir.join("outputs.jsonl")).map_err(|e| e.to_string())?;
    let verdicts: Verdicts =
        serde_json::from_str(&fs::read_to_string(dir.join("verdicts.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    ensure(instances.len() == 40 && verdicts.pairs.len() == 40, || "fixture must hold 40 pairs".into())?;
    let gens: HashMap<String, Generation> = outputs.into_iter().map(|o| (o.id, Generation::from_raw(o.raw))).collect();
    let eval = evaluate(&instances, &gens, None).map_err(|e| e.to_string())?;
    for o in &eval.outcomes {
        let want = verdicts.pairs.get(&o.id).ok_or_else(|| format!("no verdict for {}", o.id))?.correct;
        ensure(o.correct == want, || format!("{}: scored {}, adjudicated {want}", o.id, o.correct))?;
    }
    for (pt, want) in &verdicts.cells {
        let got = eval.report.ast.get(pt).map(|c| c.display());
        ensure(got == Some(*want), || format!("{pt}: {got:?} vs hand count {want}"))?;
    }
    ensure(eval.report.overall.display() == verdicts.overall, || "overall differs from hand count".into())?;
    let cells: Vec<String> = verdicts.cells.iter().map(|(p, v)| format!("{}={v}", p.abbrev())).collect();
    Ok(cells.join(" "))
}

pub fn run() -> Check {
    let (n, pos) = randomized()?;
    let cells = adjudicated()?;
    Ok(format!("{n}/{n} agree with enumeration ({pos} matches); 40-pair fixture {cells}"))
}
