//! The `tools.v1` wire protocol: JSON over HTTP.
//!
//! * `POST /tools/{name}` with a [`ToolRequest`]; answered by a [`ToolResponse`].
//! * `POST /scenes` with a scene document; registers it under its fingerprint.
//! * `GET /health` returns the protocol version and capability list.
//!
//! Tool arguments use the field names of [`ToolCall`]. A missing `patch`
//! argument means the whole image. [`StubRouter`] is a transport-free
//! reference implementation answering with [`MockTools`] semantics.

use super::{
    Detection, MockConfig, MockTools, ToolBackend, ToolCall, ToolError, ToolName, ToolOutput,
};
use crate::geometry::{GraspRect, Polygon};
use crate::scene::{ImagePatch, Scene};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

pub const PROTOCOL_VERSION: &str = "tools.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    /// Base64 image payload. Stub servers accept a base64 scene document here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
    #[serde(default)]
    pub args: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ToolResponse {
    pub fn success(result: Value) -> Self {
        Self {
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn failure(error: impl Into<String>) -> Self {
        Self {
            ok: false,
            result: None,
            error: Some(error.into()),
        }
    }

    /// `result` present iff `ok`.
    pub fn is_well_formed(&self) -> bool {
        self.ok == self.result.is_some() && (self.ok || self.error.is_some())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("response serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub version: String,
    pub capabilities: Vec<ToolName>,
}

pub fn encode_call(call: &ToolCall) -> (ToolName, Map<String, Value>) {
    let mut tagged = serde_json::to_value(call).expect("tool call serialization is infallible");
    let args = match tagged.get_mut("args").map(Value::take) {
        Some(Value::Object(map)) => map,
        _ => Map::new(),
    };
    (call.tool(), args)
}

pub fn decode_call(tool: ToolName, args: Map<String, Value>) -> Result<ToolCall, ToolError> {
    serde_json::from_value(json!({ "tool": tool.as_str(), "args": args }))
        .map_err(|e| ToolError::InvalidArgument(format!("bad arguments for {tool}: {e}")))
}

pub fn encode_output(out: &ToolOutput) -> Value {
    let v = match out {
        ToolOutput::Detections(d) => serde_json::to_value(d),
        ToolOutput::Grasps(g) => serde_json::to_value(g),
        ToolOutput::Bool(b) => Ok(Value::Bool(*b)),
        ToolOutput::Patch(p) => serde_json::to_value(p),
        ToolOutput::Number(n) => serde_json::to_value(n),
        ToolOutput::Mask(m) => serde_json::to_value(m),
        ToolOutput::Text(t) => Ok(Value::String(t.clone())),
    };
    v.expect("tool output serialization is infallible")
}

pub fn decode_output(tool: ToolName, value: Value) -> Result<ToolOutput, ToolError> {
    let bad = |e: serde_json::Error| ToolError::Transport(format!("malformed {tool} result: {e}"));
    Ok(match tool {
        ToolName::Find | ToolName::FindPart => {
            ToolOutput::Detections(serde_json::from_value::<Vec<Detection>>(value).map_err(bad)?)
        }
        ToolName::GraspDetection => {
            ToolOutput::Grasps(serde_json::from_value::<Vec<GraspRect>>(value).map_err(bad)?)
        }
        ToolName::Exists | ToolName::VerifyProperty => {
            ToolOutput::Bool(serde_json::from_value(value).map_err(bad)?)
        }
        ToolName::BestImageMatch => {
            ToolOutput::Patch(serde_json::from_value::<ImagePatch>(value).map_err(bad)?)
        }
        ToolName::ComputeDepth => ToolOutput::Number(serde_json::from_value(value).map_err(bad)?),
        ToolName::Masks => ToolOutput::Mask(serde_json::from_value::<Polygon>(value).map_err(bad)?),
        ToolName::LlmQuery => ToolOutput::Text(serde_json::from_value(value).map_err(bad)?),
    })
}

/// Canonical text of a tool result or error, used for conformance checks.
pub fn canonical(result: &Result<ToolOutput, ToolError>) -> String {
    let response = match result {
        Ok(out) => ToolResponse::success(encode_output(out)),
        Err(e) => ToolResponse::failure(e.to_string()),
    };
    response.to_json()
}

/// An HTTP reply as produced by [`StubRouter`].
#[derive(Debug, Clone, PartialEq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

impl HttpReply {
    fn json(status: u16, body: String) -> Self {
        Self { status, body }
    }

    fn fail(status: u16, error: impl Into<String>) -> Self {
        Self::json(status, ToolResponse::failure(error).to_json())
    }
}

/// Routes `tools.v1` requests to mock backends, one per registered scene.
#[derive(Debug, Default)]
pub struct StubRouter {
    config: MockConfig,
    scenes: RwLock<BTreeMap<String, Arc<Scene>>>,
}

impl StubRouter {
    pub fn new(config: MockConfig) -> Self {
        Self {
            config,
            scenes: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn register(&self, scene: Scene) -> String {
        let id = scene.fingerprint().to_string();
        self.scenes
            .write()
            .expect("scene store lock poisoned")
            .insert(id.clone(), Arc::new(scene));
        id
    }

    pub fn health(&self) -> Health {
        Health {
            version: PROTOCOL_VERSION.to_string(),
            capabilities: ToolName::ALL.to_vec(),
        }
    }

    pub fn handle(&self, method: &str, path: &str, body: &str) -> HttpReply {
        let path = path.split('?').next().unwrap_or(path).trim_end_matches('/');
        match (method, path) {
            ("GET", "/health") => HttpReply::json(
                200,
                serde_json::to_string(&self.health()).expect("infallible"),
            ),
            ("POST", "/scenes") => match Scene::from_json_str(body) {
                Ok(scene) => {
                    let id = self.register(scene);
                    HttpReply::json(
                        200,
                        ToolResponse::success(json!({ "scene_id": id })).to_json(),
                    )
                }
                Err(e) => HttpReply::fail(400, e.to_string()),
            },
            ("POST", p) if p.starts_with("/tools/") => self.tool(&p["/tools/".len()..], body),
            (_, p) if p.starts_with("/tools/") => {
                HttpReply::fail(405, format!("{method} not allowed"))
            }
            _ => HttpReply::fail(404, format!("no route for {method} {path}")),
        }
    }

    fn scene_for(&self, request: &ToolRequest) -> Result<Arc<Scene>, HttpReply> {
        match (&request.scene_id, &request.image_b64) {
            (Some(id), _) => self
                .scenes
                .read()
                .expect("scene store lock poisoned")
                .get(id)
                .cloned()
                .ok_or_else(|| HttpReply::fail(404, format!("unknown scene_id {id}"))),
            (None, Some(b64)) => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(b64)
                    .map_err(|e| HttpReply::fail(400, format!("image_b64 is not base64: {e}")))?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| HttpReply::fail(400, "image_b64 is not a scene document"))?;
                Scene::from_json_str(&text)
                    .map(Arc::new)
                    .map_err(|e| HttpReply::fail(400, e.to_string()))
            }
            (None, None) => Err(HttpReply::fail(400, "request needs scene_id or image_b64")),
        }
    }

    fn tool(&self, name: &str, body: &str) -> HttpReply {
        let Ok(tool) = name.parse::<ToolName>() else {
            return HttpReply::fail(404, format!("unknown tool: {name}"));
        };
        let mut request: ToolRequest = match serde_json::from_str(body) {
            Ok(r) => r,
            Err(e) => return HttpReply::fail(400, format!("malformed request body: {e}")),
        };
        let scene = match self.scene_for(&request) {
            Ok(s) => s,
            Err(reply) => return reply,
        };
        let takes_patch = !matches!(tool, ToolName::BestImageMatch | ToolName::LlmQuery);
        if takes_patch && !request.args.contains_key("patch") {
            let full = serde_json::to_value(scene.full_patch()).expect("infallible");
            request.args.insert("patch".into(), full);
        }
        let call = match decode_call(tool, request.args) {
            Ok(c) => c,
            Err(e) => return HttpReply::fail(400, e.to_string()),
        };
        let backend = MockTools::new(scene, self.config);
        HttpReply::json(200, canonical(&backend.call(&call)))
    }
}
