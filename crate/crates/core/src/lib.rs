//! Closed-loop grasp detection from natural-language queries.
//!
//! A [`Planner`](agents::Planner) turns a query into steps, a
//! [`Coder`](agents::Coder) writes a GraspScript program for them, the
//! program runs against a [`ToolBackend`] and an
//! [`Observer`](agents::Observer) judges the result. The loop repeats until a
//! reachable grasp is accepted or it gives up.
//!
//! ```
//! use grasploop_core::{fixtures, run_pipeline, Agents, MockConfig, MockTools, OutcomeStatus, PipelineConfig};
//! use std::sync::Arc;
//!
//! let scene = Arc::new(fixtures::three_bottles());
//! let tools = MockTools::new(scene.clone(), MockConfig::default());
//! let agents = Agents::scripted(scene.clone());
//! let query = "grasp the second bottle from the left";
//! let outcome = run_pipeline(&scene, query, &agents, &tools, &PipelineConfig::default(), None).unwrap();
//! assert_eq!(outcome.status, OutcomeStatus::Success);
//! ```

pub mod agents;
pub mod benchmark;
pub mod chat;
pub mod fixtures;
pub mod geometry;
pub mod lexicon;
pub mod scene;
pub mod script;
pub mod toolset;

pub use agents::{
    run_pipeline, Agents, GraspOutcome, IterationRecord, ObserverFeedback, OutcomeStatus,
    PipelineConfig, PipelineError, PlannerOutput,
};
pub use benchmark::{
    evaluate, generate_suite, single_pass_baseline, BenchmarkSuite, Category, EvalConfig,
    EvalReport, QueryCase, Runner, SuiteConfig,
};
pub use chat::{ChatClient, ChatMessage, EndpointConfig};
pub use geometry::{
    grasp_success, rotated_iou, within_workspace, GraspRect, Point, Polygon, Workspace,
    ANGLE_THRESHOLD_DEG, IOU_THRESHOLD,
};
pub use lexicon::Lexicon;
pub use scene::{crop, describe, load_scene, BBox, ImagePatch, Scene, SceneObject};
pub use script::{execute, parse, pretty_print, run_source, ExecutionReport, Program};
pub use toolset::{Detection, MockConfig, MockTools, RemoteTools, ToolBackend, ToolName, Tools};
