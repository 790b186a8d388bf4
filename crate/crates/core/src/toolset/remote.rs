use super::protocol::{decode_output, encode_call, Health, ToolRequest, ToolResponse};
use super::{ToolBackend, ToolCall, ToolError, ToolOutput};
use crate::scene::Scene;
use std::time::Duration;

/// Tool backend speaking `tools.v1` to an HTTP server.
#[derive(Debug, Clone)]
pub struct RemoteTools {
    base_url: String,
    scene_id: String,
    agent: ureq::Agent,
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn transport(e: ureq::Error) -> ToolError {
    ToolError::Transport(e.to_string())
}

impl RemoteTools {
    /// Uses a scene already registered on the server.
    pub fn new(base_url: &str, scene_id: &str, timeout: Duration) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            scene_id: scene_id.to_string(),
            agent: agent(timeout),
        }
    }

    /// Uploads `scene` and binds the backend to it.
    pub fn connect(base_url: &str, scene: &Scene, timeout: Duration) -> Result<Self, ToolError> {
        let base = base_url.trim_end_matches('/');
        let agent = agent(timeout);
        let mut resp = agent
            .post(&format!("{base}/scenes"))
            .header("content-type", "application/json")
            .send(scene.to_json_string())
            .map_err(transport)?;
        let body = resp.body_mut().read_to_string().map_err(transport)?;
        let parsed: ToolResponse = serde_json::from_str(&body)
            .map_err(|e| ToolError::Transport(format!("malformed upload reply: {e}")))?;
        let scene_id = parsed
            .result
            .as_ref()
            .and_then(|r| r.get("scene_id"))
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                ToolError::Reported(
                    parsed
                        .error
                        .clone()
                        .unwrap_or_else(|| "scene upload failed".into()),
                )
            })?
            .to_string();
        Ok(Self {
            base_url: base.to_string(),
            scene_id,
            agent,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn health(&self) -> Result<Health, ToolError> {
        let mut resp = self
            .agent
            .get(&format!("{}/health", self.base_url))
            .call()
            .map_err(transport)?;
        let body = resp.body_mut().read_to_string().map_err(transport)?;
        serde_json::from_str(&body)
            .map_err(|e| ToolError::Transport(format!("malformed health reply: {e}")))
    }
}

impl ToolBackend for RemoteTools {
    fn name(&self) -> &str {
        "remote"
    }

    fn call(&self, call: &ToolCall) -> Result<ToolOutput, ToolError> {
        let (tool, args) = encode_call(call);
        let request = ToolRequest {
            scene_id: Some(self.scene_id.clone()),
            image_b64: None,
            args,
        };
        let body = serde_json::to_string(&request).expect("request serialization is infallible");
        let mut resp = self
            .agent
            .post(&format!("{}/tools/{}", self.base_url, tool))
            .header("content-type", "application/json")
            .send(body)
            .map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if status == 404 && text.trim().is_empty() {
            return Err(ToolError::UnknownTool(tool.to_string()));
        }
        let parsed: ToolResponse = serde_json::from_str(&text)
            .map_err(|e| ToolError::Transport(format!("HTTP {status}: malformed reply: {e}")))?;
        match (parsed.ok, parsed.result) {
            (true, Some(result)) => decode_output(tool, result),
            (true, None) => Err(ToolError::Transport(format!(
                "{tool} reply has ok=true but no result"
            ))),
            (false, _) => {
                let msg = parsed.error.unwrap_or_else(|| format!("HTTP {status}"));
                if status == 404 {
                    Err(ToolError::UnknownTool(msg))
                } else {
                    Err(ToolError::Reported(msg))
                }
            }
        }
    }
}
