use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toolchat_core::codec::{FunctionCall, FunctionDescription, ParameterSchema};
use toolchat_core::synth::{derive_non_function_call, FcExample, Label, Language, SynthError};

use crate::{ensure, Check};

fn example(rng: &mut ChaCha8Rng) -> FcExample {
    let n = rng.random_range(1..=6);
    let names: Vec<String> = (0..n).map(|i| format!("tool_{i}")).collect();
    let mut pick = names.clone();
    pick.shuffle(rng);
    let called = rng.random_range(1..=n.min(3));
    let calls = (0..rng.random_range(1..=4))
        .map(|_| FunctionCall::new(pick[rng.random_range(0..called)].clone()).arg("q", rng.random_range(0..9)))
        .collect();
    FcExample {
        id: None,
        functions: names
            .iter()
            .map(|n| FunctionDescription {
                name: n.clone(),
                description: String::new(),
                parameters: ParameterSchema::default(),
            })
            .collect(),
        query: "question".into(),
        label: Label::UseTool { calls },
        language: if rng.random_bool(0.9) { Language::En } else { Language::ZhTw },
        function_type: "t".into(),
    }
}

pub fn run() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut derived, mut emptied) = (0, 0);
    for i in 0..1000 {
        let ex = example(&mut rng);
        let called: BTreeSet<&str> = ex.called_names().into_iter().collect();
        let remaining: Vec<&str> =
            ex.functions.iter().map(|f| f.name.as_str()).filter(|n| !called.contains(n)).collect();
        match derive_non_function_call(&ex) {
            Ok(out) => {
                ensure(!remaining.is_empty(), || format!("example {i}: derived although nothing remains"))?;
                let names: Vec<&str> = out.functions.iter().map(|f| f.name.as_str()).collect();
                ensure(names == remaining, || format!("example {i}: kept {names:?}, expected {remaining:?}"))?;
                ensure(matches!(out.label, Label::Answer { .. }), || format!("example {i}: label is not Answer"))?;
                ensure(out.query == ex.query, || format!("example {i}: query changed"))?;
                derived += 1;
            }
            Err(SynthError::NoRemainingFunctions) => {
                ensure(remaining.is_empty(), || format!("example {i}: NoRemainingFunctions with {remaining:?} left"))?;
                emptied += 1;
            }
            Err(e) => return Err(format!("example {i}: {e}")),
        }
    }
    ensure(derived > 0 && emptied > 0, || "generator covered only one branch".into())?;
    Ok(format!("{derived} derived, {emptied} raised NoRemainingFunctions, 0 violations"))
}
