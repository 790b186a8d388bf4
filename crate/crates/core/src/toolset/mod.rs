//! The nine perception tools, behind a pluggable backend.
//!
//! Every tool call is a [`ToolCall`] value answered with a [`ToolOutput`].
//! [`MockTools`] answers from a ground-truth [`Scene`](crate::scene::Scene);
//! [`RemoteTools`] forwards calls over the `tools.v1` HTTP protocol.

mod mock;
pub mod protocol;
mod remote;

pub use crate::scene::ImagePatch;
pub use mock::{MockConfig, MockTools};
pub use remote::RemoteTools;

use crate::geometry::{GraspRect, Polygon};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    Find,
    FindPart,
    GraspDetection,
    Exists,
    VerifyProperty,
    BestImageMatch,
    ComputeDepth,
    Masks,
    LlmQuery,
}

impl ToolName {
    pub const ALL: [ToolName; 9] = [
        ToolName::Find,
        ToolName::FindPart,
        ToolName::GraspDetection,
        ToolName::Exists,
        ToolName::VerifyProperty,
        ToolName::BestImageMatch,
        ToolName::ComputeDepth,
        ToolName::Masks,
        ToolName::LlmQuery,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ToolName::Find => "find",
            ToolName::FindPart => "find_part",
            ToolName::GraspDetection => "grasp_detection",
            ToolName::Exists => "exists",
            ToolName::VerifyProperty => "verify_property",
            ToolName::BestImageMatch => "best_image_match",
            ToolName::ComputeDepth => "compute_depth",
            ToolName::Masks => "masks",
            ToolName::LlmQuery => "llm_query",
        }
    }

    /// One-line usage, shown to code-writing agents.
    pub fn usage(&self) -> &'static str {
        match self {
            ToolName::Find => "find(patch, name) -> list of patches: detect objects given an object name",
            ToolName::FindPart => "find_part(patch, part_name) -> list of patches: detect a part of an object",
            ToolName::GraspDetection => "grasp_detection(patch) -> list of grasps, best first: grasp poses for the object in the patch",
            ToolName::Exists => "exists(patch, name) -> bool: check if an object exists in the patch",
            ToolName::VerifyProperty => "verify_property(patch, name, property) -> bool: verify a property (color, shape, ...) of an object",
            ToolName::BestImageMatch => "best_image_match(patches, content) -> patch: the patch most likely to contain the content",
            ToolName::ComputeDepth => "compute_depth(patch) -> number: median depth of the patch (smaller is nearer)",
            ToolName::Masks => "masks(patch, name) -> list of [x, y] points: mask outline of an object",
            ToolName::LlmQuery => "llm_query(question) or llm_query(question, patch) -> text: ask external knowledge",
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolName {
    type Err = ToolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ToolError::UnknownTool(s.to_string()))
    }
}

/// A detected object or part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub patch: ImagePatch,
    pub score: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tool", content = "args", rename_all = "snake_case")]
pub enum ToolCall {
    Find {
        patch: ImagePatch,
        name: String,
    },
    FindPart {
        patch: ImagePatch,
        part_name: String,
    },
    GraspDetection {
        patch: ImagePatch,
    },
    Exists {
        patch: ImagePatch,
        name: String,
    },
    VerifyProperty {
        patch: ImagePatch,
        name: String,
        property: String,
    },
    BestImageMatch {
        patches: Vec<ImagePatch>,
        content: String,
    },
    ComputeDepth {
        patch: ImagePatch,
    },
    Masks {
        patch: ImagePatch,
        name: String,
    },
    LlmQuery {
        question: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        patch: Option<ImagePatch>,
    },
}

impl ToolCall {
    pub fn tool(&self) -> ToolName {
        match self {
            ToolCall::Find { .. } => ToolName::Find,
            ToolCall::FindPart { .. } => ToolName::FindPart,
            ToolCall::GraspDetection { .. } => ToolName::GraspDetection,
            ToolCall::Exists { .. } => ToolName::Exists,
            ToolCall::VerifyProperty { .. } => ToolName::VerifyProperty,
            ToolCall::BestImageMatch { .. } => ToolName::BestImageMatch,
            ToolCall::ComputeDepth { .. } => ToolName::ComputeDepth,
            ToolCall::Masks { .. } => ToolName::Masks,
            ToolCall::LlmQuery { .. } => ToolName::LlmQuery,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToolOutput {
    Detections(Vec<Detection>),
    Grasps(Vec<GraspRect>),
    Bool(bool),
    Patch(ImagePatch),
    Number(f64),
    Mask(Polygon),
    Text(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("no such object: {0}")]
    NoSuchObject(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error("tool {0} is not supported by this backend")]
    Unsupported(ToolName),
    /// An error message relayed verbatim from a remote backend.
    #[error("{0}")]
    Reported(String),
    #[error("tool transport failure: {0}")]
    Transport(String),
}

/// Anything that can answer tool calls. Implementations must tolerate
/// concurrent use.
pub trait ToolBackend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Vec<ToolName> {
        ToolName::ALL.to_vec()
    }

    fn call(&self, call: &ToolCall) -> Result<ToolOutput, ToolError>;
}

fn unexpected(tool: ToolName, out: &ToolOutput) -> ToolError {
    ToolError::Reported(format!(
        "{tool} returned an unexpected output kind: {out:?}"
    ))
}

/// Typed wrappers over [`ToolBackend::call`].
pub trait Tools: ToolBackend {
    fn find(&self, patch: &ImagePatch, name: &str) -> Result<Vec<Detection>, ToolError> {
        match self.call(&ToolCall::Find {
            patch: patch.clone(),
            name: name.to_string(),
        })? {
            ToolOutput::Detections(d) => Ok(d),
            other => Err(unexpected(ToolName::Find, &other)),
        }
    }

    fn find_part(&self, patch: &ImagePatch, part_name: &str) -> Result<Vec<Detection>, ToolError> {
        match self.call(&ToolCall::FindPart {
            patch: patch.clone(),
            part_name: part_name.to_string(),
        })? {
            ToolOutput::Detections(d) => Ok(d),
            other => Err(unexpected(ToolName::FindPart, &other)),
        }
    }

    fn grasp_detection(&self, patch: &ImagePatch) -> Result<Vec<GraspRect>, ToolError> {
        match self.call(&ToolCall::GraspDetection {
            patch: patch.clone(),
        })? {
            ToolOutput::Grasps(g) => Ok(g),
            other => Err(unexpected(ToolName::GraspDetection, &other)),
        }
    }

    fn exists(&self, patch: &ImagePatch, name: &str) -> Result<bool, ToolError> {
        match self.call(&ToolCall::Exists {
            patch: patch.clone(),
            name: name.to_string(),
        })? {
            ToolOutput::Bool(b) => Ok(b),
            other => Err(unexpected(ToolName::Exists, &other)),
        }
    }

    fn verify_property(
        &self,
        patch: &ImagePatch,
        name: &str,
        property: &str,
    ) -> Result<bool, ToolError> {
        match self.call(&ToolCall::VerifyProperty {
            patch: patch.clone(),
            name: name.to_string(),
            property: property.to_string(),
        })? {
            ToolOutput::Bool(b) => Ok(b),
            other => Err(unexpected(ToolName::VerifyProperty, &other)),
        }
    }

    fn best_image_match(
        &self,
        patches: &[ImagePatch],
        content: &str,
    ) -> Result<ImagePatch, ToolError> {
        match self.call(&ToolCall::BestImageMatch {
            patches: patches.to_vec(),
            content: content.to_string(),
        })? {
            ToolOutput::Patch(p) => Ok(p),
            other => Err(unexpected(ToolName::BestImageMatch, &other)),
        }
    }

    fn compute_depth(&self, patch: &ImagePatch) -> Result<f64, ToolError> {
        match self.call(&ToolCall::ComputeDepth {
            patch: patch.clone(),
        })? {
            ToolOutput::Number(n) => Ok(n),
            other => Err(unexpected(ToolName::ComputeDepth, &other)),
        }
    }

    fn masks(&self, patch: &ImagePatch, name: &str) -> Result<Polygon, ToolError> {
        match self.call(&ToolCall::Masks {
            patch: patch.clone(),
            name: name.to_string(),
        })? {
            ToolOutput::Mask(m) => Ok(m),
            other => Err(unexpected(ToolName::Masks, &other)),
        }
    }

    fn llm_query(&self, question: &str, patch: Option<&ImagePatch>) -> Result<String, ToolError> {
        match self.call(&ToolCall::LlmQuery {
            question: question.to_string(),
            patch: patch.cloned(),
        })? {
            ToolOutput::Text(t) => Ok(t),
            other => Err(unexpected(ToolName::LlmQuery, &other)),
        }
    }
}

impl<T: ToolBackend + ?Sized> Tools for T {}
