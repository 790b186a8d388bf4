//! The tools.v1 stub server and the golden call corpus.

use grasploop_core::toolset::protocol::{canonical, StubRouter};
use grasploop_core::toolset::ToolCall;
use grasploop_core::{BBox, MockConfig, MockTools, Scene, ToolBackend, Tools};
use serde_json::json;
use std::path::PathBuf;
use std::sync::Arc;

/// Serves a [`StubRouter`] over HTTP on an ephemeral port.
pub fn serve(router: Arc<StubRouter>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let addr = server.server_addr().to_ip().unwrap();
    std::thread::spawn(move || {
        for mut request in server.incoming_requests() {
            let mut body = String::new();
            let _ = request.as_reader().read_to_string(&mut body);
            let reply = router.handle(request.method().as_str(), request.url(), &body);
            let header = tiny_http::Header::from_bytes("content-type", "application/json").unwrap();
            let response = tiny_http::Response::from_string(reply.body)
                .with_status_code(reply.status)
                .with_header(header);
            let _ = request.respond(response);
        }
    });
    format!("http://{addr}")
}

/// Fifty calls covering every tool, including failing ones.
pub fn golden_calls(scene: &Scene) -> Vec<ToolCall> {
    let mock = MockTools::new(Arc::new(scene.clone()), MockConfig::default());
    let full = scene.full_patch();
    let mug = mock.find(&full, "mug").unwrap()[0].patch.clone();
    let knife = mock.find(&full, "knife").unwrap()[0].patch.clone();
    let plant = mock.find(&full, "plant").unwrap()[0].patch.clone();
    let empty_corner = full.derive(BBox::new(600.0, 440.0, 630.0, 470.0), "crop");
    let mut calls = Vec::new();
    for name in [
        "mug",
        "cup",
        "knife",
        "plant",
        "tissue box",
        "box",
        "glass",
        "unicorn",
        "",
    ] {
        calls.push(ToolCall::Find {
            patch: full.clone(),
            name: name.into(),
        });
    }
    for (patch, part) in [
        (&mug, "handle"),
        (&mug, "body"),
        (&knife, "blade"),
        (&knife, "handle"),
        (&plant, "pot"),
        (&full, "handle"),
        (&mug, "wheel"),
    ] {
        calls.push(ToolCall::FindPart {
            patch: patch.clone(),
            part_name: part.into(),
        });
    }
    for patch in [&full, &mug, &knife, &plant, &empty_corner] {
        calls.push(ToolCall::GraspDetection {
            patch: patch.clone(),
        });
    }
    for (patch, name) in [
        (&full, "mug"),
        (&full, "banana"),
        (&knife, "knife"),
        (&knife, "mug"),
        (&empty_corner, "glass"),
    ] {
        calls.push(ToolCall::Exists {
            patch: patch.clone(),
            name: name.into(),
        });
    }
    for (patch, name, property) in [
        (&mug, "mug", "red"),
        (&mug, "mug", "blue"),
        (&full, "glass", "fragile"),
        (&knife, "knife", "steel"),
        (&full, "unicorn", "red"),
    ] {
        calls.push(ToolCall::VerifyProperty {
            patch: patch.clone(),
            name: name.into(),
            property: property.into(),
        });
    }
    for content in ["red mug", "silver knife", "green plant", "nothing at all"] {
        calls.push(ToolCall::BestImageMatch {
            patches: vec![mug.clone(), knife.clone(), plant.clone()],
            content: content.into(),
        });
    }
    calls.push(ToolCall::BestImageMatch {
        patches: vec![],
        content: "mug".into(),
    });
    for patch in [&full, &mug, &knife, &plant, &empty_corner] {
        calls.push(ToolCall::ComputeDepth {
            patch: patch.clone(),
        });
    }
    for (patch, name) in [
        (&full, "mug"),
        (&full, "tissue box"),
        (&plant, "plant"),
        (&full, "unicorn"),
    ] {
        calls.push(ToolCall::Masks {
            patch: patch.clone(),
            name: name.into(),
        });
    }
    for (q, p) in [
        ("kleenex", None),
        ("what can cut", None),
        ("What can cut?", None),
        ("who painted the mona lisa", None),
        ("what is this", Some(mug.clone())),
    ] {
        calls.push(ToolCall::LlmQuery {
            question: q.into(),
            patch: p,
        });
    }
    calls
}

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/tools_golden.jsonl")
}

pub fn render(calls: &[ToolCall], backend: &dyn ToolBackend) -> String {
    calls
        .iter()
        .map(|c| {
            let line = json!({ "call": c, "response": serde_json::from_str::<serde_json::Value>(&canonical(&backend.call(c))).unwrap() });
            line.to_string() + "\n"
        })
        .collect()
}
