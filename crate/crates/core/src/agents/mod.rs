//! Planner, Coder and Observer agents and the loop that connects them.
//!
//! One iteration is plan → code → execute → observe. The loop ends when the
//! Observer accepts a grasp, when the Planner or Observer aborts, or when the
//! iteration cap is reached. An accepted grasp is always checked against the
//! scene's workspace before it is reported as a success.

pub mod query;
mod remote;
pub mod risk;
mod scripted;
pub mod transcript;

pub use remote::{RemoteCoder, RemoteObserver, RemotePlanner};
pub use scripted::{
    program_for_steps, BadThenGoodCoder, NeverAcceptObserver, ScriptedCoder, ScriptedObserver,
    ScriptedPlanner,
};

use crate::chat::ChatError;
use crate::geometry::{within_workspace, GraspRect};
use crate::scene::{describe, Scene};
use crate::script::{
    execute, parse, ErrorKind, ExecutionReport, ParseError, ParseErrorKind, Program, ScriptError,
    DEFAULT_BUDGET,
};
use crate::toolset::ToolBackend;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_MAX_ITERATIONS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Continue,
    Finalize,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    NotFound,
    Unreachable,
    Unsafe,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub status: PlanStatus,
    #[serde(default)]
    pub steps: Vec<String>,
    #[serde(default)]
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<AbortReason>,
}

impl PlannerOutput {
    pub fn abort(reason: AbortReason, rationale: impl Into<String>) -> Self {
        Self {
            status: PlanStatus::Abort,
            steps: Vec::new(),
            rationale: rationale.into(),
            reason: Some(reason),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self.status {
            PlanStatus::Continue | PlanStatus::Finalize if self.steps.is_empty() => Err(
                AgentError::Invalid("a continue/finalize plan needs at least one step".into()),
            ),
            PlanStatus::Abort if self.rationale.trim().is_empty() => {
                Err(AgentError::Invalid("an abort needs a rationale".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Revise,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverFeedback {
    pub verdict: Verdict,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub risk_notes: String,
}

impl ObserverFeedback {
    pub fn revise(summary: impl Into<String>) -> Self {
        let summary = summary.into();
        Self {
            verdict: Verdict::Revise,
            summary: if summary.trim().is_empty() {
                "revise".into()
            } else {
                summary
            },
            risk_notes: String::new(),
        }
    }

    pub fn accept(summary: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Accept,
            summary: summary.into(),
            risk_notes: String::new(),
        }
    }
}

/// One completed iteration of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlannerOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ExecutionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<ObserverFeedback>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Success,
    Unreachable,
    NotFound,
    Exhausted,
    Aborted,
}

impl OutcomeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeStatus::Success => "success",
            OutcomeStatus::Unreachable => "unreachable",
            OutcomeStatus::NotFound => "not_found",
            OutcomeStatus::Exhausted => "exhausted",
            OutcomeStatus::Aborted => "aborted",
        }
    }
}

impl fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub grasp: Option<GraspRect>,
    pub reachable: Option<bool>,
    pub status: OutcomeStatus,
    pub iterations: u32,
    pub history: Vec<IterationRecord>,
}

impl GraspOutcome {
    pub fn summary(&self) -> String {
        let grasp = self.grasp.map_or("none".to_string(), |g| g.to_string());
        format!(
            "status={} iterations={} grasp={} reachable={}",
            self.status,
            self.iterations,
            grasp,
            self.reachable.map_or("n/a".to_string(), |r| r.to_string())
        )
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("could not read agent reply: {0}")]
    Extraction(String),
    #[error("{0}")]
    Invalid(String),
}

pub struct PlanContext<'a> {
    pub query: &'a str,
    pub iteration: u32,
    /// Textual view of the scene.
    pub scene_text: &'a str,
    /// Observer feedback from earlier iterations, oldest first.
    pub feedback: &'a [ObserverFeedback],
}

pub struct CodeRequest<'a> {
    pub query: &'a str,
    pub iteration: u32,
    pub plan: &'a PlannerOutput,
    /// Set on the single re-prompt after a parse failure.
    pub previous_attempt: Option<(&'a str, &'a ParseError)>,
}

pub struct ObserveContext<'a> {
    pub query: &'a str,
    pub iteration: u32,
    pub program: Option<&'a str>,
    pub report: &'a ExecutionReport,
}

pub trait Planner: Send + Sync {
    fn plan(&self, ctx: &PlanContext<'_>) -> Result<PlannerOutput, AgentError>;
}

pub trait Coder: Send + Sync {
    fn code(&self, request: &CodeRequest<'_>) -> Result<String, AgentError>;
}

pub trait Observer: Send + Sync {
    fn observe(&self, ctx: &ObserveContext<'_>) -> Result<ObserverFeedback, AgentError>;
}

pub struct Agents {
    pub planner: Box<dyn Planner>,
    pub coder: Box<dyn Coder>,
    pub observer: Box<dyn Observer>,
}

impl Agents {
    /// Deterministic rule-based agents; the observer judges against `scene`.
    pub fn scripted(scene: Arc<Scene>) -> Self {
        Self {
            planner: Box::new(ScriptedPlanner),
            coder: Box::new(ScriptedCoder),
            observer: Box::new(ScriptedObserver::new(scene)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_iterations: u32,
    /// Interpreter step budget per program.
    pub budget: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot write transcript: {0}")]
    Transcript(#[from] std::io::Error),
}

/// Receives loop records as they happen.
pub trait RecordSink {
    fn iteration(&mut self, record: &IterationRecord) -> std::io::Result<()>;
    fn outcome(&mut self, outcome: &GraspOutcome) -> std::io::Result<()>;
}

/// The report recorded when a program does not parse.
pub fn parse_failure_report(e: &ParseError) -> ExecutionReport {
    ExecutionReport::from_error(ScriptError::new(
        match e.kind {
            ParseErrorKind::Syntax => ErrorKind::Parse,
            ParseErrorKind::Name => ErrorKind::Name,
        },
        e.message.clone(),
        e.span,
    ))
}

pub enum Generated {
    Program {
        text: String,
        program: Program,
    },
    ParseFailure {
        text: String,
        report: ExecutionReport,
    },
    CoderFailure {
        report: ExecutionReport,
    },
}

/// Asks the coder for a program, re-prompting once with the parse error.
pub fn generate_program(coder: &dyn Coder, request: &CodeRequest<'_>) -> Generated {
    let coder_failure = |e: AgentError| Generated::CoderFailure {
        report: ExecutionReport::from_error(ScriptError::new(
            ErrorKind::Parse,
            format!("coder failure: {e}"),
            Default::default(),
        )),
    };
    let first = match coder.code(request) {
        Ok(t) => t,
        Err(e) => return coder_failure(e),
    };
    let err = match parse(&first) {
        Ok(program) => {
            return Generated::Program {
                text: first,
                program,
            }
        }
        Err(e) => e,
    };
    let retry = CodeRequest {
        previous_attempt: Some((&first, &err)),
        ..*request
    };
    let second = match coder.code(&retry) {
        Ok(t) => t,
        Err(e) => return coder_failure(e),
    };
    match parse(&second) {
        Ok(program) => Generated::Program {
            text: second,
            program,
        },
        Err(e) => Generated::ParseFailure {
            report: parse_failure_report(&e),
            text: second,
        },
    }
}

fn abort_status(reason: Option<AbortReason>) -> OutcomeStatus {
    match reason {
        Some(AbortReason::NotFound) => OutcomeStatus::NotFound,
        Some(AbortReason::Unreachable) => OutcomeStatus::Unreachable,
        _ => OutcomeStatus::Aborted,
    }
}

/// Runs the closed loop for one query. Reasoning failures never surface as
/// errors; they are encoded in the outcome's status.
pub fn run_pipeline(
    scene: &Scene,
    query: &str,
    agents: &Agents,
    tools: &dyn ToolBackend,
    config: &PipelineConfig,
    mut sink: Option<&mut dyn RecordSink>,
) -> Result<GraspOutcome, PipelineError> {
    if query.trim().is_empty() {
        return Err(PipelineError::InvalidConfig("query is empty".into()));
    }
    if config.max_iterations == 0 {
        return Err(PipelineError::InvalidConfig(
            "max_iterations must be at least 1".into(),
        ));
    }
    if config.budget == 0 {
        return Err(PipelineError::InvalidConfig(
            "budget must be positive".into(),
        ));
    }
    let scene_text = describe(scene, None);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut feedback: Vec<ObserverFeedback> = Vec::new();

    let finish = |history: Vec<IterationRecord>,
                  status: OutcomeStatus,
                  grasp: Option<GraspRect>,
                  reachable: Option<bool>,
                  sink: &mut Option<&mut dyn RecordSink>|
     -> Result<GraspOutcome, PipelineError> {
        let outcome = GraspOutcome {
            grasp,
            reachable,
            status,
            iterations: history.len() as u32,
            history,
        };
        if let Some(s) = sink.as_deref_mut() {
            s.outcome(&outcome)?;
        }
        Ok(outcome)
    };

    for iteration in 1..=config.max_iterations {
        let ctx = PlanContext {
            query,
            iteration,
            scene_text: &scene_text,
            feedback: &feedback,
        };
        let plan = agents
            .planner
            .plan(&ctx)
            .and_then(|p| p.validate().map(|_| p));
        let plan = match plan {
            Ok(p) => p,
            Err(e) => {
                let fb = ObserverFeedback::revise(format!("planner failure: {e}"));
                let record = IterationRecord {
                    iteration,
                    plan: None,
                    program: None,
                    report: None,
                    feedback: Some(fb.clone()),
                    note: Some(format!("planner failure: {e}")),
                };
                if let Some(s) = sink.as_deref_mut() {
                    s.iteration(&record)?;
                }
                history.push(record);
                feedback.push(fb);
                continue;
            }
        };
        if plan.status == PlanStatus::Abort {
            let status = abort_status(plan.reason);
            let record = IterationRecord {
                iteration,
                plan: Some(plan),
                program: None,
                report: None,
                feedback: None,
                note: None,
            };
            if let Some(s) = sink.as_deref_mut() {
                s.iteration(&record)?;
            }
            history.push(record);
            return finish(history, status, None, None, &mut sink);
        }

        let request = CodeRequest {
            query,
            iteration,
            plan: &plan,
            previous_attempt: None,
        };
        let (program, report) = match generate_program(agents.coder.as_ref(), &request) {
            Generated::Program { text, program } => {
                let report = execute(&program, scene, tools, config.budget);
                (Some(text), report)
            }
            Generated::ParseFailure { text, report } => (Some(text), report),
            Generated::CoderFailure { report } => (None, report),
        };

        let fb = agents
            .observer
            .observe(&ObserveContext {
                query,
                iteration,
                program: program.as_deref(),
                report: &report,
            })
            .unwrap_or_else(|e| ObserverFeedback::revise(format!("observer failure: {e}")));
        let grasp = report.grasp();
        let record = IterationRecord {
            iteration,
            plan: Some(plan),
            program,
            report: Some(report),
            feedback: Some(fb.clone()),
            note: (fb.verdict == Verdict::Accept && grasp.is_none())
                .then(|| "accepted without a grasp binding; continuing".to_string()),
        };
        if let Some(s) = sink.as_deref_mut() {
            s.iteration(&record)?;
        }
        history.push(record);

        match (fb.verdict, grasp) {
            (Verdict::Accept, Some(g)) => {
                let reachable = within_workspace(&g, &scene.workspace);
                let status = if reachable {
                    OutcomeStatus::Success
                } else {
                    OutcomeStatus::Unreachable
                };
                return finish(history, status, Some(g), Some(reachable), &mut sink);
            }
            (Verdict::Abort, _) => {
                return finish(history, OutcomeStatus::Aborted, None, None, &mut sink)
            }
            _ => feedback.push(fb),
        }
    }
    finish(history, OutcomeStatus::Exhausted, None, None, &mut sink)
}

#[cfg(test)]
mod tests;
