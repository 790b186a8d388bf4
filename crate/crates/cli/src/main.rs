mod config;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{Mode, RunConfig, RunFile, RunOverrides, DEFAULT_SEED};
use grasploop_core::agents::transcript::{
    read_transcript, replay, TranscriptHeader, TranscriptWriter, TRANSCRIPT_VERSION,
};
use grasploop_core::agents::{RemoteCoder, RemoteObserver, RemotePlanner};
use grasploop_core::benchmark::{export_report, ExportFormat};
use grasploop_core::chat::ChatClient;
use grasploop_core::{
    evaluate, generate_suite, load_scene, run_pipeline, Agents, BenchmarkSuite, EvalConfig,
    MockConfig, MockTools, OutcomeStatus, PipelineConfig, RemoteTools, Runner, SuiteConfig,
    ToolBackend,
};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

#[derive(Parser, Debug)]
#[command(
    name = "grasploop",
    version,
    about = "Language-driven grasp detection with a plan/code/observe loop"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Answer one query against one scene.
    Run(RunArgs),
    /// Evaluate a benchmark suite and write a per-case report.
    Eval(EvalArgs),
    /// Generate a benchmark suite.
    Generate(GenerateArgs),
    /// Re-execute a transcript and check it reproduces.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    query: Option<String>,
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long = "max-iters")]
    max_iters: Option<u32>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "noise-center")]
    noise_center: Option<f64>,
    #[arg(long = "noise-angle")]
    noise_angle: Option<f64>,
    /// Where to write the JSON Lines transcript.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Base URL of a tools.v1 server; the built-in mock tools otherwise.
    #[arg(long = "tools-url")]
    tools_url: Option<String>,
    /// Chat endpoint base URL for remote mode.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, default_value = "loop")]
    runner: Runner,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// csv or json; taken from the output extension when omitted.
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long = "noise-center")]
    noise_center: Option<f64>,
    #[arg(long = "noise-angle")]
    noise_angle: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<u32>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// TOML suite configuration; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured number of cases.
    #[arg(long)]
    cases: Option<usize>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    transcript: PathBuf,
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let file = match &args.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let cfg = RunConfig::resolve(
        file,
        RunOverrides {
            scene: args.scene,
            query: args.query,
            mode: args.mode,
            max_iterations: args.max_iters,
            budget: args.budget,
            seed: args.seed,
            noise_center: args.noise_center,
            noise_angle: args.noise_angle,
            transcript: args.transcript,
            tools_url: args.tools_url,
            endpoint: args.endpoint,
            model: args.model,
        },
    )?;
    let scene = Arc::new(
        load_scene(&cfg.scene)
            .with_context(|| format!("cannot load scene {}", cfg.scene.display()))?,
    );

    let (tools, mock): (Box<dyn ToolBackend>, Option<MockConfig>) = match &cfg.tools_url {
        Some(url) => {
            let remote =
                RemoteTools::connect(url, &scene, Duration::from_secs_f64(cfg.tools_timeout_secs))
                    .with_context(|| format!("cannot reach tool server {url}"))?;
            (Box::new(remote), None)
        }
        None => (
            Box::new(MockTools::new(scene.clone(), cfg.tools)),
            Some(cfg.tools),
        ),
    };
    let agents = match &cfg.endpoints {
        None => Agents::scripted(scene.clone()),
        Some(e) => Agents {
            planner: Box::new(RemotePlanner::new(Arc::new(ChatClient::new(
                e.planner.clone(),
            )?))),
            coder: Box::new(RemoteCoder::new(Arc::new(ChatClient::new(
                e.coder.clone(),
            )?))),
            observer: Box::new(RemoteObserver::new(Arc::new(ChatClient::new(
                e.observer.clone(),
            )?))),
        },
    };
    let header = TranscriptHeader {
        version: TRANSCRIPT_VERSION.to_string(),
        query: cfg.query.clone(),
        scene: (*scene).clone(),
        tools: mock,
        budget: cfg.pipeline.budget,
        max_iterations: cfg.pipeline.max_iterations,
        agents: match cfg.mode {
            Mode::Scripted => "scripted".into(),
            Mode::Remote => "remote".into(),
        },
    };
    let mut writer = TranscriptWriter::create(&cfg.transcript, &header)
        .with_context(|| format!("cannot write transcript {}", cfg.transcript.display()))?;
    let outcome = run_pipeline(
        &scene,
        &cfg.query,
        &agents,
        tools.as_ref(),
        &cfg.pipeline,
        Some(&mut writer),
    )?;

    for r in &outcome.history {
        let verdict = r
            .feedback
            .as_ref()
            .map(|f| format!("{:?}: {}", f.verdict, f.summary).to_lowercase())
            .or_else(|| {
                r.plan
                    .as_ref()
                    .map(|p| format!("plan {:?}: {}", p.status, p.rationale).to_lowercase())
            })
            .unwrap_or_default();
        println!("iteration {}: {verdict}", r.iteration);
    }
    println!("{}", outcome.summary());
    println!("seed: {}", cfg.seed);
    println!("transcript: {}", cfg.transcript.display());
    Ok(if outcome.status == OutcomeStatus::Success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let suite = BenchmarkSuite::load(&args.suite)?;
    let defaults = MockConfig::default();
    let config = EvalConfig {
        runner: args.runner,
        tools: MockConfig {
            noise_center: args.noise_center.unwrap_or(defaults.noise_center),
            noise_angle: args.noise_angle.unwrap_or(defaults.noise_angle),
            seed: args.seed,
        },
        pipeline: PipelineConfig {
            max_iterations: args
                .max_iters
                .unwrap_or(PipelineConfig::default().max_iterations),
            ..Default::default()
        },
        jobs: args.jobs,
    };
    let format = match args.format.as_deref() {
        None => ExportFormat::from_path(&args.out),
        Some("csv") => ExportFormat::Csv,
        Some("json") => ExportFormat::Json,
        Some(other) => anyhow::bail!("unknown format {other:?}; expected csv or json"),
    };
    let report = evaluate(&suite, &config)?;
    export_report(&report, &args.out, format)?;
    print!("{}", report.summary());
    println!("report: {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            let mut c: SuiteConfig = toml::from_str(&text)
                .with_context(|| format!("malformed config {}", p.display()))?;
            if let (Some(lex), Some(dir)) = (&c.lexicon, p.parent()) {
                if lex.is_relative() {
                    c.lexicon = Some(dir.join(lex));
                }
            }
            c
        }
        None => SuiteConfig::default(),
    };
    if let Some(n) = args.cases {
        config.n_cases = n;
    }
    let suite = generate_suite(&config, args.seed)?;
    suite.save(&args.out)?;
    println!(
        "generated {} cases in {}",
        suite.cases.len(),
        args.out.display()
    );
    for (c, n) in suite.category_counts() {
        println!("  {c:<16} {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode> {
    let transcript = read_transcript(&args.transcript)?;
    let summary = replay(&transcript)?;
    println!(
        "replayed {} iterations ({} programs): identical",
        summary.iterations, summary.programs_executed
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
