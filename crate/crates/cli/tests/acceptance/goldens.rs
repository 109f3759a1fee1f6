use std::fs;

use toolchat_core::codec::{render_prompt, Conversation, RenderOptions};

use crate::{ensure, fixtures, Check};

pub fn run() -> Check {
    let dir = fixtures().join("golden");
    let mut names: Vec<_> = fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    ensure(names.len() == 12, || format!("expected 12 fixtures, found {}", names.len()))?;
    for path in &names {
        let conv: Conversation =
            serde_json::from_str(&fs::read_to_string(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let want = fs::read(path.with_extension("prompt")).map_err(|e| e.to_string())?;
        let got = render_prompt(&conv, RenderOptions::default()).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(got.as_bytes() == want, || format!("{} differs from its golden", path.display()))?;
    }
    let relevance = fs::read_to_string(dir.join("11_relevance_func_abc.prompt")).map_err(|e| e.to_string())?;
    ensure(
        relevance.contains("\"func_B\"") && relevance.contains("\"func_C\"") && !relevance.contains("func_A"),
        || "relevance fixture must offer only func_B and func_C".into(),
    )?;
    Ok("12/12 byte-identical".into())
}
