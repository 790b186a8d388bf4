//! JSON Lines transcripts of pipeline runs, and deterministic replay.
//!
//! A transcript starts with a `header` record, then holds one `iteration`
//! record per loop iteration and, if the run finished, an `outcome` record.
//! Each line is flushed as soon as it is written.

use super::{GraspOutcome, IterationRecord, OutcomeStatus, RecordSink};
use crate::geometry::GraspRect;
use crate::scene::Scene;
use crate::script::{run_source, ExecutionReport};
use crate::toolset::{MockConfig, MockTools};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub const TRANSCRIPT_VERSION: &str = "transcript.v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub version: String,
    pub query: String,
    pub scene: Scene,
    /// Set when the run used the in-process mock tools; needed for replay.
    #[serde(default)]
    pub tools: Option<MockConfig>,
    pub budget: u64,
    pub max_iterations: u32,
    pub agents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub status: OutcomeStatus,
    pub grasp: Option<GraspRect>,
    pub reachable: Option<bool>,
    pub iterations: u32,
}

impl From<&GraspOutcome> for OutcomeRecord {
    fn from(o: &GraspOutcome) -> Self {
        Self {
            status: o.status,
            grasp: o.grasp,
            reachable: o.reachable,
            iterations: o.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Header(TranscriptHeader),
    Iteration(IterationRecord),
    Outcome(OutcomeRecord),
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt transcript at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("cannot replay: {0}")]
    Unsupported(String),
    #[error("replay diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: u32, detail: String },
}

pub struct TranscriptWriter<W: Write> {
    out: W,
}

impl TranscriptWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &TranscriptHeader) -> io::Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> TranscriptWriter<W> {
    pub fn new(out: W, header: &TranscriptHeader) -> io::Result<Self> {
        let mut w = Self { out };
        w.write(&Record::Header(header.clone()))?;
        Ok(w)
    }

    fn write(&mut self, record: &Record) -> io::Result<()> {
        let line = serde_json::to_string(record).map_err(io::Error::other)?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RecordSink for TranscriptWriter<W> {
    fn iteration(&mut self, record: &IterationRecord) -> io::Result<()> {
        self.write(&Record::Iteration(record.clone()))
    }

    fn outcome(&mut self, outcome: &GraspOutcome) -> io::Result<()> {
        self.write(&Record::Outcome(outcome.into()))
    }
}

#[derive(Debug, Clone)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub iterations: Vec<IterationRecord>,
    pub outcome: Option<OutcomeRecord>,
}

pub fn parse_transcript(text: &str) -> Result<Transcript, TranscriptError> {
    let mut header = None;
    let mut iterations = Vec::new();
    let mut outcome = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| TranscriptError::Corrupt {
            line: line_no,
            message,
        };
        let record: Record = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        match (record, header.is_some(), outcome.is_some()) {
            (Record::Header(h), false, _) => {
                if h.version != TRANSCRIPT_VERSION {
                    return Err(corrupt(format!("unsupported version {:?}", h.version)));
                }
                header = Some(h);
            }
            (_, _, true) => return Err(corrupt("record after the outcome".into())),
            (Record::Header(_), true, _) => return Err(corrupt("second header".into())),
            (_, false, _) => return Err(corrupt("first record is not a header".into())),
            (Record::Iteration(r), true, _) => {
                let expected = iterations.len() as u32 + 1;
                if r.iteration != expected {
                    return Err(corrupt(format!(
                        "expected iteration {expected}, found {}",
                        r.iteration
                    )));
                }
                iterations.push(r);
            }
            (Record::Outcome(o), true, _) => outcome = Some(o),
        }
    }
    let header = header.ok_or(TranscriptError::Corrupt {
        line: 0,
        message: "empty transcript".into(),
    })?;
    Ok(Transcript {
        header,
        iterations,
        outcome,
    })
}

pub fn read_transcript(path: &Path) -> Result<Transcript, TranscriptError> {
    parse_transcript(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub iterations: u32,
    pub programs_executed: u32,
}

fn first_difference(recorded: &ExecutionReport, replayed: &ExecutionReport) -> Option<String> {
    let fields = [
        (
            "error",
            serde_json::to_value(&recorded.error),
            serde_json::to_value(&replayed.error),
        ),
        (
            "result",
            serde_json::to_value(&recorded.result),
            serde_json::to_value(&replayed.result),
        ),
        (
            "bindings",
            serde_json::to_value(&recorded.bindings),
            serde_json::to_value(&replayed.bindings),
        ),
        (
            "logs",
            serde_json::to_value(&recorded.logs),
            serde_json::to_value(&replayed.logs),
        ),
        (
            "steps_used",
            serde_json::to_value(recorded.steps_used),
            serde_json::to_value(replayed.steps_used),
        ),
        (
            "artifacts",
            serde_json::to_value(&recorded.artifacts),
            serde_json::to_value(&replayed.artifacts),
        ),
    ];
    fields.into_iter().find_map(|(name, a, b)| match (a, b) {
        (Ok(a), Ok(b)) if a == b => None,
        (Ok(a), Ok(b)) => Some(format!("{name} differs: recorded {a}, replayed {b}")),
        _ => Some(format!("{name} cannot be serialized")),
    })
}

/// Re-executes every recorded program against the recorded scene and mock
/// tool configuration and checks the reports match.
pub fn replay(transcript: &Transcript) -> Result<ReplaySummary, TranscriptError> {
    let header = &transcript.header;
    let config = header.tools.ok_or_else(|| {
        TranscriptError::Unsupported("the run did not use the built-in mock tools".into())
    })?;
    header
        .scene
        .validate()
        .map_err(|e| TranscriptError::Unsupported(format!("invalid scene: {e}")))?;
    let scene = Arc::new(header.scene.clone());
    let tools = MockTools::new(scene.clone(), config);
    let mut executed = 0;
    for record in &transcript.iterations {
        let (Some(program), Some(recorded)) = (&record.program, &record.report) else {
            continue;
        };
        let replayed = run_source(program, &scene, &tools, header.budget);
        executed += 1;
        if let Some(detail) = first_difference(recorded, &replayed) {
            return Err(TranscriptError::Diverged {
                iteration: record.iteration,
                detail,
            });
        }
    }
    if let (Some(outcome), Some(last)) = (&transcript.outcome, transcript.iterations.last()) {
        if outcome.iterations != transcript.iterations.len() as u32 {
            return Err(TranscriptError::Diverged {
                iteration: last.iteration,
                detail: format!(
                    "outcome claims {} iterations, transcript has {}",
                    outcome.iterations,
                    transcript.iterations.len()
                ),
            });
        }
        let final_grasp = last.report.as_ref().and_then(ExecutionReport::grasp);
        if outcome.grasp.is_some() && outcome.grasp != final_grasp {
            return Err(TranscriptError::Diverged {
                iteration: last.iteration,
                detail: "outcome grasp differs from the final report".into(),
            });
        }
    }
    Ok(ReplaySummary {
        iterations: transcript.iterations.len() as u32,
        programs_executed: executed,
    })
}
