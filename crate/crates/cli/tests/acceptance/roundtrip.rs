use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use toolchat_core::codec::{
    coalesce_segments, parse_assistant, parse_segments, render_prompt, AssistantBody, AssistantTurn, Conversation,
    Decision, FunctionCall, FunctionDescription, FunctionResponse, NormalizedBBox, ParameterSchema, PropertySchema,
    RenderOptions, Segment, Turn,
};

use crate::{ensure, Check};

const WORDS: &[&str] = &["hello", "world", "台北", "café", "the", "42", "weather", "?", "!", "quick", "naïve", "😀"];

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..6);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn bbox(rng: &mut ChaCha8Rng) -> NormalizedBBox {
    let (a, b) = (rng.random_range(0..=1000u16), rng.random_range(0..=1000u16));
    let (c, d) = (rng.random_range(0..=1000u16), rng.random_range(0..=1000u16));
    NormalizedBBox::new(a.min(b), c.min(d), a.max(b), c.max(d))
}

fn value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    match rng.random_range(0..if depth > 0 { 7 } else { 5 }) {
        0 => json!(rng.random_range(-1000i64..1000)),
        1 => json!(rng.random_range(-1e6f64..1e6)),
        2 => json!(text(rng)),
        3 => json!(rng.random_bool(0.5)),
        4 => Value::Null,
        5 => Value::Array((0..rng.random_range(0..3)).map(|_| value(rng, depth - 1)).collect()),
        _ => {
            let mut m = Map::new();
            for i in 0..rng.random_range(0..3) {
                m.insert(format!("k{i}"), value(rng, depth - 1));
            }
            Value::Object(m)
        }
    }
}

fn functions(rng: &mut ChaCha8Rng) -> Vec<FunctionDescription> {
    (0..rng.random_range(1..5))
        .map(|i| {
            let mut parameters = ParameterSchema::default();
            for p in 0..rng.random_range(0..4) {
                parameters.properties.insert(format!("p{p}"), PropertySchema::new("string", text(rng)));
                if rng.random_bool(0.5) {
                    parameters.required.push(format!("p{p}"));
                }
            }
            FunctionDescription { name: format!("fn_{i}"), description: text(rng), parameters }
        })
        .collect()
}

fn call(rng: &mut ChaCha8Rng, f: &FunctionDescription) -> FunctionCall {
    let mut c = FunctionCall::new(f.name.clone());
    for p in f.parameters.properties.keys() {
        if rng.random_bool(0.7) {
            c = c.arg(p.clone(), value(rng, 2));
        }
    }
    c
}

/// Spreads `n` items over `slots` positions.
fn spread(rng: &mut ChaCha8Rng, n: usize, slots: usize) -> Vec<usize> {
    let mut out = vec![0; slots];
    for _ in 0..n {
        out[rng.random_range(0..slots)] += 1;
    }
    out
}

fn user_turn(rng: &mut ChaCha8Rng, images: usize, boxes: usize) -> Vec<Segment> {
    let mut segs = vec![Segment::text(text(rng))];
    for _ in 0..images {
        segs.push(Segment::image(rng.random_range(1..6)));
        if rng.random_bool(0.5) {
            segs.push(Segment::text(format!(" {} ", text(rng))));
        }
    }
    for _ in 0..boxes {
        segs.insert(rng.random_range(0..=segs.len()), Segment::bbox(bbox(rng)));
    }
    segs
}

pub fn conversation(rng: &mut ChaCha8Rng) -> Conversation {
    let fs = rng.random_bool(0.8).then(|| functions(rng));
    let exchanges = rng.random_range(1..4);
    let (n_images, n_boxes) = (rng.random_range(0..=3), rng.random_range(0..=2));
    let images = spread(rng, n_images, exchanges);
    let boxes = spread(rng, n_boxes, exchanges);
    let mut turns = Vec::new();
    for x in 0..exchanges {
        let (user_boxes, answer_boxes) = if rng.random_bool(0.5) { (boxes[x], 0) } else { (0, boxes[x]) };
        turns.push(Turn::User(user_turn(rng, images[x], user_boxes)));
        let mut answer_segs = vec![Segment::text(text(rng))];
        for _ in 0..answer_boxes {
            answer_segs.push(Segment::bbox(bbox(rng)));
        }
        match &fs {
            Some(fs) => {
                if rng.random_bool(0.6) {
                    let calls: Vec<FunctionCall> = (0..rng.random_range(1..=4))
                        .map(|_| {
                            let f = fs.choose(rng).unwrap();
                            call(rng, f)
                        })
                        .collect();
                    let responses = (0..calls.len()).map(|_| FunctionResponse(value(rng, 2))).collect();
                    turns.push(Turn::Assistant(AssistantTurn::use_tool(calls)));
                    turns.push(Turn::Ipython(responses));
                }
                turns.push(Turn::Assistant(AssistantTurn {
                    decision: Some(Decision::Answer),
                    body: AssistantBody::Segments(answer_segs),
                }));
            }
            None => turns.push(Turn::Assistant(AssistantTurn::plain(answer_segs))),
        }
    }
    let system = rng.random_bool(0.5).then(|| text(rng));
    Conversation { system, functions: fs, turns }
}

/// Splits a rendered prompt into `(role, content)` blocks.
fn blocks(prompt: &str) -> Result<Vec<(&str, &str)>, String> {
    let mut rest = prompt.strip_prefix("<|begin_of_text|>").ok_or("missing begin-of-text")?;
    let mut out = Vec::new();
    while !rest.is_empty() {
        rest = rest.strip_prefix("<|start_header_id|>").ok_or("expected a header")?;
        let (role, after) = rest.split_once("<|end_header_id|>\n\n").ok_or("unterminated header")?;
        let (content, after) = after.split_once("<|eot_id|>").ok_or("unterminated block")?;
        out.push((role, content));
        rest = after;
    }
    Ok(out)
}

fn check_one(conv: &Conversation) -> Result<(), String> {
    let prompt = render_prompt(conv, RenderOptions::default()).map_err(|e| format!("render: {e}"))?;
    let mut blocks = blocks(&prompt)?.into_iter();

    if conv.system.is_some() || conv.functions.is_some() {
        let (role, content) = blocks.next().ok_or("missing system block")?;
        ensure(role == "system", || format!("first block is {role}"))?;
        let (text, funcs) = match content.split_once("Customized Functions:") {
            Some((t, f)) => (t.strip_suffix("\n\n").unwrap_or(t), Some(f)),
            None => (content, None),
        };
        ensure(conv.system.as_deref().unwrap_or("") == text, || format!("system text {text:?}"))?;
        let parsed: Option<Vec<FunctionDescription>> = funcs
            .map(|f| f.lines().skip(1).map(serde_json::from_str).collect::<Result<_, _>>())
            .transpose()
            .map_err(|e| format!("function line: {e}"))?;
        ensure(parsed == conv.functions, || "function list differs".into())?;
    }

    for turn in &conv.turns {
        let (role, content) = blocks.next().ok_or("missing block")?;
        ensure(role == turn.role().to_string(), || format!("role {role} for {:?}", turn.role()))?;
        match turn {
            Turn::User(segs) => {
                let back = parse_segments(content, 0).map_err(|e| e.to_string())?;
                ensure(back == coalesce_segments(segs), || format!("user segments differ: {content}"))?;
            }
            Turn::Assistant(a) => {
                let out = parse_assistant(content, conv.has_functions()).map_err(|e| e.to_string())?;
                ensure(out.decision == a.decision, || "decision differs".into())?;
                match &a.body {
                    AssistantBody::Calls(calls) => ensure(&out.calls == calls, || format!("calls differ: {content}"))?,
                    AssistantBody::Segments(segs) => {
                        ensure(out.calls.is_empty() && out.text_segments == coalesce_segments(segs), || {
                            format!("assistant segments differ: {content}")
                        })?
                    }
                }
            }
            Turn::Ipython(resps) => {
                let back: Vec<FunctionResponse> = serde_json::from_str(content).map_err(|e| e.to_string())?;
                ensure(&back == resps, || "responses differ".into())?;
            }
        }
    }
    ensure(blocks.next().is_none(), || "extra blocks".into())
}

pub fn run() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut tool_turns, mut images, mut boxes, mut max_calls) = (0, 0, 0, 0);
    for i in 0..1000 {
        let conv = conversation(&mut rng);
        for t in &conv.turns {
            match t {
                Turn::User(s) | Turn::Assistant(AssistantTurn { body: AssistantBody::Segments(s), .. }) => {
                    images += s.iter().filter(|x| matches!(x, Segment::Image { .. })).count();
                    boxes += s.iter().filter(|x| matches!(x, Segment::Bbox { .. })).count();
                }
                Turn::Assistant(AssistantTurn { body: AssistantBody::Calls(c), .. }) => {
                    tool_turns += 1;
                    max_calls = max_calls.max(c.len());
                }
                Turn::Ipython(_) => {}
            }
        }
        check_one(&conv).map_err(|e| format!("conversation {i}: {e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    ensure(tool_turns > 0 && images > 0 && boxes > 0 && max_calls == 4, || "generator coverage too thin".into())?;
    Ok(format!("1000/1000 identical ({tool_turns} tool turns, {images} images, {boxes} boxes) in {secs:.2}s"))
}
