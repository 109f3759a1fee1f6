use std::collections::HashMap;

use toolchat_core::codec::{FunctionDescription, ParameterSchema};
use toolchat_core::fc_eval::{score_relevance, EvalInstance, Generation};

use crate::{ensure, Check};

/// Ways a model can fail relevance detection.
const CALLS: [&str; 3] = [
    r#"<|use_tool|><|python_tag|>[{"name":"func_B","arguments":{"text":"x"}}]"#,
    r#"<|use_tool|><|python_tag|>[{"name":"#,
    r#"<|use_tool|>I would call something"#,
];

fn check(k: usize, n: usize) -> Result<(), String> {
    let functions = vec![FunctionDescription {
        name: "func_B".into(),
        description: "Translate text".into(),
        parameters: ParameterSchema::default(),
    }];
    let instances: Vec<EvalInstance> = (0..n)
        .map(|i| EvalInstance {
            id: format!("r{i}"),
            system: None,
            functions: functions.clone(),
            query: "Book a table.".into(),
            target: vec![],
            expected_results: None,
            problem_type: None,
        })
        .collect();
    let outputs: HashMap<String, Generation> = (0..n)
        .map(|i| {
            let raw = if i < k {
                "<|answer|>None of these tools can book tables.".to_string()
            } else {
                CALLS[i % 3].to_string()
            };
            (format!("r{i}"), Generation::from_raw(raw))
        })
        .collect();
    let (cell, _) = score_relevance(&instances, &outputs).map_err(|e| e.to_string())?;
    let want = 100.0 * k as f64 / n as f64;
    ensure(cell.accuracy() == want && cell.correct == k as u64 && cell.count == n as u64, || {
        format!("({k},{n}): got {} expected {want}", cell.accuracy())
    })
}

pub fn run() -> Check {
    for (k, n) in [(0, 20), (13, 20), (20, 20)] {
        check(k, n)?;
    }
    Ok("(0,20)=0 (13,20)=65 (20,20)=100".into())
}
