//! `synsum`: generate synthetic patient records and clinical-note prompts,
//! and run inference, learning and evaluation over them.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use synsum_core::learning::structure_of;
use synsum_core::notegen::DescriptorBank;
use synsum_core::reference::synsum_spec;
use synsum_core::{
    evaluate, learn_network_with, sample_dataset_with, Assignment, Dataset, EvidenceSetting, Execution,
    InferenceEngine, InferenceError, LearnConfig, Manifest, MentionPolicy, Network, NetworkError, NetworkSpec,
    NoteContext, SampleConfig, Templates,
};
use synsum_llm::{generate_corpus, GenConfig, LlmError, Mode, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT};

#[derive(Parser)]
#[command(name = "synsum", version, about = "Synthetic respiratory patient records and clinical-note prompts")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample patient records from a network.
    Generate(GenerateArgs),
    /// Turn records into prompts and clinical notes.
    Notes(NotesArgs),
    /// Posterior of one variable given evidence.
    Infer(InferArgs),
    /// Fit a network's parameters to a dataset.
    Learn(LearnArgs),
    /// Score symptom prediction on a test set.
    Eval(EvalArgs),
    /// Seeded train/test partition of a dataset.
    Split(SplitArgs),
    /// Write the built-in reference network, or its structure only.
    Spec(SpecArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Network spec (JSON). Defaults to the built-in reference network.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    /// Output directory for `records.csv` and `manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Offline,
    Llm,
}

#[derive(Args)]
struct NotesArgs {
    #[arg(long)]
    data: PathBuf,
    /// Spec whose variables describe the data. Defaults to the reference network.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "offline")]
    mode: ModeArg,
    /// Output directory for `notes.jsonl` and `errors.jsonl`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chat model id, required in llm mode.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    /// Name of the environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 1.2)]
    temperature: f64,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Bundle cache for resuming; defaults to `<out>/cache` in llm mode.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Directory overriding some or all prompt templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Descriptor bank (JSON) replacing the built-in one.
    #[arg(long)]
    descriptors: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    query: String,
    /// Comma-separated `variable=state` pairs.
    #[arg(long, default_value = "")]
    evidence: String,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    data: PathBuf,
    /// Spec providing variables and CPD families; its parameters are ignored.
    #[arg(long)]
    structure: PathBuf,
    /// Where to write the learned spec.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "all,no-sympt,realistic")]
    settings: Vec<EvidenceSetting>,
    /// Also write the report as JSON; `-` prints it instead of the table.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 8000)]
    train: usize,
    #[arg(long, default_value_t = 2000)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `train.csv` and `test.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long)]
    out: PathBuf,
    /// Reset parameters to neutral values, for use with `learn`.
    #[arg(long)]
    structure: bool,
}

/// Failures split by exit code.
#[derive(Debug)]
enum Failure {
    /// Bad arguments or invalid input files (exit 2).
    Usage(String),
    /// Anything that goes wrong while running (exit 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Loads and validates a spec; every problem with it is a usage error.
fn load_spec(path: Option<&Path>) -> Result<NetworkSpec, Failure> {
    let Some(path) = path else { return Ok(synsum_spec()) };
    let spec = NetworkSpec::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let violations = spec.validate();
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(usage(format!("{}: invalid network spec\n{}", path.display(), lines.join("\n"))));
    }
    Ok(spec)
}

fn network(spec: NetworkSpec) -> Result<Network, Failure> {
    Network::new(spec).map_err(|e| usage(e.to_string()))
}

fn load_data(spec: &NetworkSpec, path: &Path) -> Result<Dataset, Failure> {
    Dataset::load_csv(spec, path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn generate(args: GenerateArgs, exec: Execution) -> Outcome {
    let spec = load_spec(args.spec.as_deref())?;
    let net = network(spec.clone())?;
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let records = sample_dataset_with(&net, SampleConfig { seed: args.seed, count: args.count }, exec)
        .context("sampling records")?;
    create_dir(&args.out)?;
    let data = Dataset::new(&spec, records);
    data.save_csv(args.out.join("records.csv")).context("writing records.csv")?;
    let manifest = Manifest::new(args.seed, args.count, &spec, "records.csv");
    fs::write(args.out.join("manifest.json"), serde_json::to_string_pretty(&manifest).context("manifest")? + "\n")
        .context("writing manifest.json")?;
    println!("wrote {} records to {}", data.len(), args.out.display());
    Ok(())
}

fn notes(args: NotesArgs, exec: Execution) -> Outcome {
    let spec = load_spec(args.spec.as_deref())?;
    let net = network(spec.clone())?;
    let ctx = NoteContext::new(&net).map_err(|e| usage(e.to_string()))?;
    let data = load_data(&spec, &args.data)?;
    let templates = match &args.templates {
        Some(dir) => Templates::from_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?,
        None => Templates::default(),
    };
    let bank = match &args.descriptors {
        Some(p) => DescriptorBank::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => DescriptorBank::default(),
    };
    let mode = match args.mode {
        ModeArg::Offline => Mode::Offline,
        ModeArg::Llm => Mode::Llm,
    };
    let cache_dir = args.cache.clone().or_else(|| (mode == Mode::Llm).then(|| args.out.join("cache")));
    let config = GenConfig {
        endpoint: args.endpoint,
        model: args.model.unwrap_or_default(),
        temperature: args.temperature,
        mode,
        api_key_env: args.api_key_env,
        concurrency: args.concurrency,
        request_timeout: Duration::from_secs(args.timeout_secs),
        cache_dir,
        seed: args.seed,
        ..GenConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let plans =
        synsum_core::notegen::plan_corpus(&ctx, &data.records, &MentionPolicy::default(), &bank, args.seed, exec);
    let output = match generate_corpus(&ctx, &plans, &data.records, &templates, &config) {
        Ok(o) => o,
        Err(e @ (LlmError::Config(_) | LlmError::MissingCredentials(_))) => return Err(usage(e.to_string())),
        Err(e) => return Err(anyhow::Error::new(e).context("generating notes").into()),
    };

    create_dir(&args.out)?;
    write_jsonl(&args.out.join("notes.jsonl"), &output.bundles)?;
    let errors_path = args.out.join("errors.jsonl");
    write_jsonl(&errors_path, &output.errors)?;
    println!(
        "{} notes written to {} ({} from cache, {} failed)",
        output.bundles.len(),
        args.out.display(),
        output.cached,
        output.errors.len()
    );
    if !output.errors.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} record(s) failed, see {}; rerun the same command to retry only those",
            output.errors.len(),
            errors_path.display()
        )));
    }
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_evidence(text: &str) -> Result<Assignment, Failure> {
    let mut ev = Assignment::new();
    for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| usage(format!("evidence `{pair}` is not `variable=state`")))?;
        if ev.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(usage(format!("`{}` appears twice in the evidence", k.trim())));
        }
    }
    Ok(ev)
}

fn infer(args: InferArgs) -> Outcome {
    let spec = load_spec(args.spec.as_deref())?;
    let evidence = parse_evidence(&args.evidence)?;
    let engine = InferenceEngine::new(network(spec)?);
    match engine.eliminate(&args.query, &evidence) {
        Ok(posterior) => {
            for (state, p) in posterior {
                println!("{state}: {p:.4}");
            }
            Ok(())
        }
        Err(e @ (InferenceError::QueryInEvidence(_) | InferenceError::Network(_))) => Err(usage(e.to_string())),
        Err(e) => Err(anyhow::Error::new(e).into()),
    }
}

fn learn(args: LearnArgs, exec: Execution) -> Outcome {
    let structure =
        NetworkSpec::load(&args.structure).map_err(|e| usage(format!("{}: {e}", args.structure.display())))?;
    let data = load_data(&structure, &args.data)?;
    let config = LearnConfig { seed: args.seed, ..LearnConfig::default() };
    let learned = learn_network_with(&data, &structure, &config, exec).context("learning parameters")?;
    learned.spec.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{:<16} {:<12} {:>14}", "variable", "family", "log-likelihood");
    for r in &learned.reports {
        let note = r.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
        println!("{:<16} {:<12} {:>14.3}{note}", r.variable, r.family.to_string(), r.log_likelihood);
    }
    let total: f64 = learned.reports.iter().map(|r| r.log_likelihood).sum();
    println!("{:<16} {:<12} {:>14.3}", "total", "", total);
    Ok(())
}

fn eval(args: EvalArgs, exec: Execution) -> Outcome {
    let spec = load_spec(args.spec.as_deref())?;
    let test = load_data(&spec, &args.test)?;
    let engine = InferenceEngine::new(network(spec)?);
    let report = match evaluate(&engine, &test, &args.settings, exec) {
        Ok(r) => r,
        Err(e @ InferenceError::Network(NetworkError::UnknownVariable(_))) => return Err(usage(e.to_string())),
        Err(e) => return Err(anyhow::Error::new(e).context("evaluating").into()),
    };
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    match args.json.as_deref() {
        Some(p) if p == Path::new("-") => println!("{json}"),
        Some(p) => {
            print!("{}", report.table());
            fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?;
        }
        None => print!("{}", report.table()),
    }
    Ok(())
}

fn split(args: SplitArgs) -> Outcome {
    let spec = load_spec(args.spec.as_deref())?;
    let data = load_data(&spec, &args.data)?;
    let (train, test) = data.split(args.train, args.test, args.seed).map_err(|e| usage(e.to_string()))?;
    create_dir(&args.out)?;
    train.save_csv(args.out.join("train.csv")).context("writing train.csv")?;
    test.save_csv(args.out.join("test.csv")).context("writing test.csv")?;
    println!("train: {} records, test: {} records", train.len(), test.len());
    Ok(())
}

fn export_spec(args: SpecArgs) -> Outcome {
    let spec = synsum_spec();
    let spec = if args.structure { structure_of(&spec) } else { spec };
    spec.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match cli.command {
        Command::Generate(a) => generate(a, exec),
        Command::Notes(a) => notes(a, exec),
        Command::Infer(a) => infer(a),
        Command::Learn(a) => learn(a, exec),
        Command::Eval(a) => eval(a, exec),
        Command::Split(a) => split(a),
        Command::Spec(a) => export_spec(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
