use std::collections::HashMap;
use std::fs;
use std::process::Command;
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::{ensure, fixtures, Check};

/// What a perfect model answers for one instance line, built from the raw JSON.
fn canonical_reply(inst: &Value) -> String {
    let target = inst["target"].as_array().cloned().unwrap_or_default();
    if target.is_empty() {
        return "<|answer|>None of the provided tools can do that.".into();
    }
    let calls: Vec<Value> = target
        .iter()
        .map(|spec| {
            let optional: Vec<&str> =
                spec["optional"].as_array().map(|o| o.iter().filter_map(Value::as_str).collect()).unwrap_or_default();
            let mut args = serde_json::Map::new();
            for (k, accepted) in spec["args"].as_object().unwrap() {
                if !optional.contains(&k.as_str()) {
                    args.insert(k.clone(), accepted[0].clone());
                }
            }
            json!({"name": spec["name"], "arguments": args})
        })
        .collect();
    format!("<|use_tool|><|python_tag|>{}", serde_json::to_string(&calls).unwrap())
}

pub fn run() -> Check {
    let dir = fixtures().join("e2e");
    let instances = dir.join("instances.jsonl");
    let lines: Vec<Value> = fs::read_to_string(&instances)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let replies: Arc<HashMap<String, String>> = Arc::new(
        lines
            .iter()
            .map(|i| {
                let key = format!("user<|end_header_id|>\n\n{}<|eot_id|>", i["query"].as_str().unwrap());
                (key, canonical_reply(i))
            })
            .collect(),
    );

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let url = rt.block_on(async {
        let app = Router::new().route(
            "/complete",
            post(move |Json(body): Json<Value>| {
                let replies = replies.clone();
                async move {
                    let prompt = body["prompt"].as_str().unwrap_or_default();
                    let text = replies.iter().find(|(k, _)| prompt.contains(k.as_str())).map(|(_, v)| v.clone());
                    Json(json!({"text": text.unwrap_or_default()}))
                }
            }),
        );
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        format!("http://{addr}/complete")
    });

    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_toolchat"))
        .args(["--quiet", "--out-dir"])
        .arg(out.path())
        .args(["eval-fc", "--endpoint", &url, "--registry"])
        .arg(dir.join("registry.json"))
        .arg("--instances")
        .arg(&instances)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("exit {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr))
    })?;

    let report: Value = serde_json::from_str(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    ensure(report["overall"]["display"] == 100 && report["overall"]["count"] == lines.len(), || {
        format!("overall {}", report["overall"])
    })?;
    for group in ["ast", "exec"] {
        for key in ["simple", "multiple", "parallel", "parallel_multiple"] {
            ensure(report[group][key]["display"] == 100, || format!("{group}.{key} = {}", report[group][key]))?;
        }
    }
    ensure(report["relevance"]["display"] == 100, || "relevance below 100".into())?;

    let table = fs::read_to_string(out.path().join("report.txt")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    let order = ["Overall", "AST Accuracy", "Executable Accuracy", "Relevance"];
    let pos: Vec<usize> = order.iter().filter_map(|h| rows[0].find(h)).collect();
    ensure(pos.len() == 4 && pos.windows(2).all(|w| w[0] < w[1]), || format!("header order: {}", rows[0]))?;
    let subs: Vec<&str> = rows[1].split(|c: char| c == '|' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    ensure(subs == ["Accuracy", "S.", "M.", "P.", "P.M.", "S.", "M.", "P.", "P.M.", "Detection"], || {
        format!("sub-header: {}", rows[1])
    })?;
    let values: Vec<&str> = rows[3].split(|c: char| c == '|' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    ensure(values == ["100"; 10], || format!("values: {}", rows[3]))?;
    ensure(out.path().join("manifest.json").exists() && out.path().join("outputs.jsonl").exists(), || {
        "manifest or outputs missing".into()
    })?;
    Ok(format!("{} instances via stub endpoint, overall 100, columns {}", lines.len(), subs[1..9].join(" ")))
}
