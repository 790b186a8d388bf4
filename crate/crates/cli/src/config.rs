use anyhow::{bail, Context, Result};
use grasploop_core::chat::EndpointConfig;
use grasploop_core::toolset::MockConfig;
use grasploop_core::PipelineConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRANSCRIPT: &str = "transcript.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Scripted,
    Remote,
}

/// Optional settings read from a TOML file; command-line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunFile {
    pub scene: Option<PathBuf>,
    pub query: Option<String>,
    pub mode: Option<Mode>,
    pub max_iterations: Option<u32>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub noise_center: Option<f64>,
    pub noise_angle: Option<f64>,
    pub transcript: Option<PathBuf>,
    pub tools_url: Option<String>,
    pub tools_timeout_secs: Option<f64>,
    /// Shared by all three agents unless overridden below.
    pub endpoint: Option<EndpointConfig>,
    pub planner: Option<EndpointConfig>,
    pub coder: Option<EndpointConfig>,
    pub observer: Option<EndpointConfig>,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct Endpoints {
    pub planner: EndpointConfig,
    pub coder: EndpointConfig,
    pub observer: EndpointConfig,
}

/// Fully resolved settings for one `run`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: PathBuf,
    pub query: String,
    pub mode: Mode,
    pub endpoints: Option<Endpoints>,
    pub pipeline: PipelineConfig,
    pub seed: u64,
    pub tools: MockConfig,
    pub tools_url: Option<String>,
    pub tools_timeout_secs: f64,
    pub transcript: PathBuf,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub scene: Option<PathBuf>,
    pub query: Option<String>,
    pub mode: Option<Mode>,
    pub max_iterations: Option<u32>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub noise_center: Option<f64>,
    pub noise_angle: Option<f64>,
    pub transcript: Option<PathBuf>,
    pub tools_url: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

fn shared_endpoint(
    file: Option<EndpointConfig>,
    url: Option<String>,
    model: Option<String>,
) -> Option<EndpointConfig> {
    match (file, url, model) {
        (Some(mut e), url, model) => {
            if let Some(u) = url {
                e.base_url = u;
            }
            if let Some(m) = model {
                e.model = m;
            }
            Some(e)
        }
        (None, Some(u), Some(m)) => Some(EndpointConfig::new(u, m)),
        (None, Some(u), None) => Some(EndpointConfig::new(u, "")),
        _ => None,
    }
}

impl RunConfig {
    pub fn resolve(file: RunFile, flags: RunOverrides) -> Result<Self> {
        let scene = flags
            .scene
            .or(file.scene)
            .context("a scene is required (--scene)")?;
        let query = flags
            .query
            .or(file.query)
            .context("a query is required (--query)")?;
        let mode = flags.mode.or(file.mode).unwrap_or(Mode::Scripted);
        let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let defaults = MockConfig::default();
        let tools = MockConfig {
            noise_center: flags
                .noise_center
                .or(file.noise_center)
                .unwrap_or(defaults.noise_center),
            noise_angle: flags
                .noise_angle
                .or(file.noise_angle)
                .unwrap_or(defaults.noise_angle),
            seed,
        };
        if !(tools.noise_center >= 0.0 && tools.noise_angle >= 0.0) {
            bail!("noise amplitudes must be non-negative");
        }
        let pipeline = PipelineConfig {
            max_iterations: flags
                .max_iterations
                .or(file.max_iterations)
                .unwrap_or(PipelineConfig::default().max_iterations),
            budget: flags
                .budget
                .or(file.budget)
                .unwrap_or(PipelineConfig::default().budget),
        };
        let shared = shared_endpoint(file.endpoint, flags.endpoint, flags.model);
        let endpoints = match mode {
            Mode::Scripted => None,
            Mode::Remote => {
                let pick = |specific: Option<EndpointConfig>,
                            role: &str|
                 -> Result<EndpointConfig> {
                    let mut e = specific.or_else(|| shared.clone()).with_context(|| {
                        format!("remote mode needs an endpoint for the {role} (--endpoint/--model)")
                    })?;
                    e.retry.seed = seed;
                    let e = e.with_env_key();
                    e.validate().with_context(|| format!("{role} endpoint"))?;
                    Ok(e)
                };
                Some(Endpoints {
                    planner: pick(file.planner, "planner")?,
                    coder: pick(file.coder, "coder")?,
                    observer: pick(file.observer, "observer")?,
                })
            }
        };
        let tools_timeout_secs = file.tools_timeout_secs.unwrap_or(30.0);
        if !(tools_timeout_secs.is_finite() && tools_timeout_secs > 0.0) {
            bail!("tools_timeout_secs must be positive");
        }
        Ok(Self {
            scene,
            query,
            mode,
            endpoints,
            pipeline,
            seed,
            tools,
            tools_url: flags.tools_url.or(file.tools_url),
            tools_timeout_secs,
            transcript: flags
                .transcript
                .or(file.transcript)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_TRANSCRIPT)),
        })
    }
}
