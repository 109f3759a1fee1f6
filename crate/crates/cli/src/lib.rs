//! `toolchat` subcommands. Every command that writes into `--out-dir` also
//! writes a `manifest.json` recording how the outputs were produced.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use toolchat_client::{Client, EndpointConfig};
use toolchat_core::codec::{parse_assistant, render_prompt, validate_conversation, Conversation, RenderOptions};
use toolchat_core::fc_eval::{evaluate, EvalInstance, Generation, OutputRecord, Registry, RegistryManifest};
use toolchat_core::jsonl::{read_jsonl_file, write_jsonl};
use toolchat_core::passkey::{generate_suite, score_retrieval, ApproxCounter, PasskeyInstance};
use toolchat_core::synth::{
    balanced_sample, derive_non_function_call, mix_by_ratio, partition_by_language, FcExample, Language, SynthError,
};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ENDPOINT: i32 = 3;
pub const EXIT_ANOMALY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "toolchat", version, about = "Tool-calling chat format toolkit")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Suppress progress and summary output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Render a conversation JSON file into a prompt.
    Render(RenderArgs),
    /// Parse a raw assistant generation into JSON.
    Parse(ParseArgs),
    /// Check a conversation against the format rules.
    Validate(ValidateArgs),
    /// Score function-calling outputs, or fetch them from an endpoint first.
    EvalFc(EvalFcArgs),
    /// Derive non-function-call examples from function-call examples.
    GenNf(GenNfArgs),
    /// Draw a category-balanced sample, optionally mixed by language.
    Sample(SampleArgs),
    /// Generate passkey retrieval instances.
    GenPasskey(GenPasskeyArgs),
    /// Score passkey responses per position bin.
    ScorePasskey(ScorePasskeyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    pub conversation: PathBuf,
    /// Append the assistant header so the prompt is ready for generation.
    #[arg(long)]
    pub generation_header: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ParseArgs {
    /// Raw generation file, or `-` for stdin.
    pub input: PathBuf,
    /// Parse as a turn without declared functions (no decision token required).
    #[arg(long)]
    pub no_functions: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    pub conversation: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EndpointArgs {
    /// Completion URL; prompts are rendered and sent here.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 512)]
    pub max_new_tokens: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalFcArgs {
    #[arg(long)]
    pub instances: PathBuf,
    /// Model outputs as JSONL `{"id", "raw"}`.
    #[arg(long, conflicts_with = "endpoint", required_unless_present = "endpoint")]
    pub outputs: Option<PathBuf>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    /// Host-function manifest for executable instances.
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenNfArgs {
    /// Function-call examples (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Fail on examples that cannot be derived instead of skipping them.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Language weights such as `en=9,zh-tw=1`.
    #[arg(long)]
    pub ratio: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenPasskeyArgs {
    #[arg(long, default_value_t = 1280)]
    pub context: usize,
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
    #[arg(long, default_value_t = 20)]
    pub per_bin: usize,
    #[arg(long, default_value_t = 6)]
    pub digits: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ScorePasskeyArgs {
    #[arg(long)]
    pub instances: PathBuf,
    /// Responses as JSONL `{"id", "response"}`.
    #[arg(long, conflicts_with = "endpoint", required_unless_present = "endpoint")]
    pub responses: Option<PathBuf>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: message.to_string() }
    }

    fn endpoint(message: impl fmt::Display) -> Self {
        Self { code: EXIT_ENDPOINT, message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub tool_version: String,
    pub timestamp_unix: u64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()).unwrap_or_else(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    })
}

struct Run<'a> {
    cli: &'a Cli,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(cli: &'a Cli) -> Self {
        Self { cli, inputs: vec![], outputs: vec![] }
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.cli.out_dir.as_deref().ok_or_else(|| CliError::input("this command needs --out-dir"))?;
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_path_buf());
        path.to_path_buf()
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, items).map_err(CliError::input)?;
        self.write(name, &buf)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(CliError::input)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn finish(self) -> Result<(), CliError> {
        let Some(dir) = self.cli.out_dir.as_deref() else { return Ok(()) };
        if self.outputs.is_empty() {
            return Ok(());
        }
        let config = serde_json::to_value(&self.cli.command).map_err(CliError::input)?;
        let command = config.as_object().and_then(|o| o.keys().next().cloned()).unwrap_or_default();
        let config = config.get(&command).cloned().unwrap_or(Value::Null);
        let manifest = RunManifest {
            command,
            config,
            seed: self.cli.seed,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<Result<_, _>>()?,
            outputs: self
                .outputs
                .iter()
                .map(|n| digest(&dir.join(n)).map(|d| FileDigest { path: n.clone(), ..d }))
                .collect::<Result<_, _>>()?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: timestamp(),
        };
        let mut s = serde_json::to_string_pretty(&manifest).map_err(CliError::input)?;
        s.push('\n');
        fs::write(dir.join("manifest.json"), s).map_err(|e| CliError::input(e.to_string()))
    }

    fn note(&self, msg: impl fmt::Display) {
        if !self.cli.quiet {
            eprintln!("{msg}");
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(CliError::input)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read_jsonl_file(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_conversation(path: &Path) -> Result<Conversation, CliError> {
    read_json(path)
}

fn stdout(s: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes()).and_then(|_| out.flush()).map_err(CliError::input)
}

fn violations_message(conv: &Conversation) -> Option<String> {
    let v = validate_conversation(conv);
    (!v.is_empty()).then(|| v.iter().map(|x| format!("{}: {x}", x.path)).collect::<Vec<_>>().join("\n"))
}

fn complete_all(ep: &EndpointArgs, prompts: &[String], run: &Run) -> Result<Vec<Result<String, String>>, CliError> {
    let url = ep.endpoint.as_deref().expect("endpoint mode");
    let mut cfg = EndpointConfig::from_env(url);
    cfg.max_in_flight = ep.max_in_flight;
    cfg.max_retries = ep.max_retries;
    cfg.sampling.max_new_tokens = ep.max_new_tokens;
    cfg.timeout = std::time::Duration::try_from_secs_f64(ep.timeout).map_err(CliError::input)?;
    let client = Client::new(cfg).map_err(CliError::input)?;
    run.note(format!("requesting {} completions from {url}", prompts.len()));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::endpoint)?;
    let results = rt.block_on(client.run_batch(prompts));
    Ok(results.into_iter().map(|r| r.map(|c| c.text).map_err(|e| e.to_string())).collect())
}

#[derive(Serialize)]
struct FetchedOutput<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Completes `(id, prompt)` pairs, writes `outputs.jsonl`, and fails with
/// the endpoint exit code if any request failed.
fn fetch_outputs(
    ep: &EndpointArgs,
    items: &[(String, String)],
    run: &mut Run,
) -> Result<HashMap<String, String>, CliError> {
    let prompts: Vec<String> = items.iter().map(|(_, p)| p.clone()).collect();
    let results = complete_all(ep, &prompts, run)?;
    let records: Vec<FetchedOutput> = items
        .iter()
        .zip(&results)
        .map(|((id, _), r)| FetchedOutput {
            id,
            raw: r.as_ref().ok().map(String::as_str),
            error: r.as_ref().err().map(String::as_str),
        })
        .collect();
    run.write_jsonl("outputs.jsonl", &records)?;
    let failed: Vec<String> = records.iter().filter_map(|r| r.error.map(|e| format!("{}: {e}", r.id))).collect();
    if !failed.is_empty() {
        return Err(CliError::endpoint(format!("{} request(s) failed\n{}", failed.len(), failed.join("\n"))));
    }
    Ok(items.iter().zip(results).map(|((id, _), r)| (id.clone(), r.expect("checked"))).collect())
}

fn read_outputs(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let mut out = HashMap::new();
    for rec in read_records::<OutputRecord>(path)? {
        if out.insert(rec.id.clone(), rec.raw).is_some() {
            return Err(CliError::input(format!("duplicate output id {}", rec.id)));
        }
    }
    Ok(out)
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    let conv = load_conversation(&run.input(&a.conversation))?;
    if let Some(msg) = violations_message(&conv) {
        return Err(CliError::input(msg));
    }
    let prompt = render_prompt(&conv, RenderOptions { append_generation_header: a.generation_header })
        .map_err(CliError::input)?;
    if cli.out_dir.is_some() {
        run.write("prompt.txt", prompt.as_bytes())?;
    } else {
        stdout(&prompt)?;
    }
    run.finish()
}

fn cmd_parse(cli: &Cli, a: &ParseArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    let raw = read_text(&a.input)?;
    if a.input != Path::new("-") {
        run.input(&a.input);
    }
    let out = parse_assistant(&raw, !a.no_functions).map_err(CliError::input)?;
    let json = serde_json::to_string_pretty(&out).map_err(CliError::input)? + "\n";
    if cli.out_dir.is_some() {
        run.write("parsed.json", json.as_bytes())?;
    } else {
        stdout(&json)?;
    }
    run.finish()
}

fn cmd_validate(cli: &Cli, a: &ValidateArgs) -> Result<(), CliError> {
    let conv = load_conversation(&a.conversation)?;
    match violations_message(&conv) {
        Some(msg) => Err(CliError::input(msg)),
        None => {
            if !cli.quiet {
                println!("ok");
            }
            Ok(())
        }
    }
}

fn cmd_eval_fc(cli: &Cli, a: &EvalFcArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    run.out_dir()?;
    let instances: Vec<EvalInstance> = read_records(&run.input(&a.instances))?;
    let registry = match &a.registry {
        Some(p) => {
            let manifest: RegistryManifest = read_json(&run.input(p))?;
            Some(Registry::from_manifest(&manifest).map_err(CliError::input)?)
        }
        None => None,
    };
    let raw = match &a.outputs {
        Some(p) => read_outputs(&run.input(p))?,
        None => {
            let items = instances
                .iter()
                .map(|i| i.prompt().map(|p| (i.id.clone(), p)).map_err(|e| CliError::input(format!("{}: {e}", i.id))))
                .collect::<Result<Vec<_>, _>>()?;
            fetch_outputs(&a.endpoint, &items, &mut run)?
        }
    };
    let generations: HashMap<String, Generation> =
        raw.into_iter().map(|(id, text)| (id, Generation::from_raw(text))).collect();
    let eval = evaluate(&instances, &generations, registry.as_ref()).map_err(CliError::input)?;

    let table = eval.report.to_table();
    run.write_json("report.json", &eval.report)?;
    run.write("report.txt", table.as_bytes())?;
    run.write_jsonl("outcomes.jsonl", &eval.outcomes)?;
    if !eval.anomalies.is_empty() {
        run.write_jsonl("anomalies.jsonl", &eval.anomalies)?;
    }
    run.finish()?;
    if !cli.quiet {
        print!("{table}");
    }
    if !eval.anomalies.is_empty() {
        return Err(CliError {
            code: EXIT_ANOMALY,
            message: format!("{} scoring anomalies, see anomalies.jsonl", eval.anomalies.len()),
        });
    }
    Ok(())
}

fn cmd_gen_nf(cli: &Cli, a: &GenNfArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    run.out_dir()?;
    let examples: Vec<FcExample> = read_records(&run.input(&a.input))?;
    let mut derived = Vec::new();
    let mut skipped: BTreeMap<String, usize> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        match derive_non_function_call(ex) {
            Ok(nf) => derived.push(nf),
            Err(e @ SynthError::InvalidExample(_)) => return Err(CliError::input(format!("example {}: {e}", i + 1))),
            Err(e) if a.strict => return Err(CliError::input(format!("example {}: {e}", i + 1))),
            Err(e) => *skipped.entry(e.to_string()).or_default() += 1,
        }
    }
    run.write_jsonl("nf.jsonl", &derived)?;
    run.note(format!("derived {} of {} examples", derived.len(), examples.len()));
    for (reason, n) in &skipped {
        run.note(format!("skipped {n}: {reason}"));
    }
    run.finish()
}

fn parse_ratio(s: &str) -> Result<BTreeMap<Language, f64>, CliError> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lang, w) = part.split_once('=').ok_or_else(|| CliError::input(format!("bad ratio entry {part:?}")))?;
        let lang: Language = lang.trim().parse().map_err(CliError::input)?;
        let w: f64 = w.trim().parse().map_err(|_| CliError::input(format!("bad weight in {part:?}")))?;
        if out.insert(lang, w).is_some() {
            return Err(CliError::input(format!("{lang} listed twice")));
        }
    }
    Ok(out)
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    run.out_dir()?;
    let pool: Vec<FcExample> = read_records(&run.input(&a.input))?;
    let picked = match &a.ratio {
        Some(r) => mix_by_ratio(&partition_by_language(pool), &parse_ratio(r)?, a.k, cli.seed),
        None => balanced_sample(&pool, a.k, cli.seed),
    }
    .map_err(CliError::input)?;
    run.write_jsonl("sample.jsonl", &picked)?;
    run.note(format!("sampled {}", picked.len()));
    run.finish()
}

fn cmd_gen_passkey(cli: &Cli, a: &GenPasskeyArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    run.out_dir()?;
    let suite =
        generate_suite(a.context, a.bins, a.per_bin, a.digits, cli.seed, &ApproxCounter).map_err(CliError::input)?;
    run.write_jsonl("instances.jsonl", &suite)?;
    run.note(format!("generated {} instances", suite.len()));
    run.finish()
}

fn cmd_score_passkey(cli: &Cli, a: &ScorePasskeyArgs) -> Result<(), CliError> {
    let mut run = Run::new(cli);
    run.out_dir()?;
    let instances: Vec<PasskeyInstance> = read_records(&run.input(&a.instances))?;
    let responses = match &a.responses {
        Some(p) => read_outputs(&run.input(p))?,
        None => {
            let items: Vec<(String, String)> = instances.iter().map(|i| (i.id.clone(), i.prompt.clone())).collect();
            fetch_outputs(&a.endpoint, &items, &mut run)?
        }
    };
    let report = score_retrieval(&instances, &responses).map_err(CliError::input)?;
    let table = report.to_table();
    run.write_json("report.json", &report)?;
    run.write("report.txt", table.as_bytes())?;
    run.finish()?;
    if !cli.quiet {
        print!("{table}");
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Render(a) => cmd_render(cli, a),
        Command::Parse(a) => cmd_parse(cli, a),
        Command::Validate(a) => cmd_validate(cli, a),
        Command::EvalFc(a) => cmd_eval_fc(cli, a),
        Command::GenNf(a) => cmd_gen_nf(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
        Command::GenPasskey(a) => cmd_gen_passkey(cli, a),
        Command::ScorePasskey(a) => cmd_score_passkey(cli, a),
    }
}
