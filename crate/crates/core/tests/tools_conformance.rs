mod common;

use common::tools::{golden_calls, golden_path, render, serve};
use grasploop_core::toolset::protocol::{Health, StubRouter, PROTOCOL_VERSION};
use grasploop_core::toolset::ToolCall;
use grasploop_core::{fixtures, MockConfig, MockTools, RemoteTools, ToolBackend, ToolName};
use serde_json::json;
use std::sync::Arc;
use std::time::Duration;

#[test]
fn golden_corpus_covers_every_tool() {
    let calls = golden_calls(&fixtures::kitchen());
    assert_eq!(calls.len(), 50);
    for tool in ToolName::ALL {
        assert!(calls.iter().any(|c| c.tool() == tool), "{tool} missing");
    }
}

#[test]
fn mock_matches_golden_corpus() {
    let scene = fixtures::kitchen();
    let calls = golden_calls(&scene);
    let mock = MockTools::new(Arc::new(scene), MockConfig::default());
    let rendered = render(&calls, &mock);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), &rendered).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path())
        .expect("golden corpus exists; run with UPDATE_GOLDEN=1");
    for (i, (got, want)) in rendered.lines().zip(golden.lines()).enumerate() {
        assert_eq!(got, want, "call {i} differs from the golden corpus");
    }
    assert_eq!(rendered.lines().count(), golden.lines().count());
    let failures = golden
        .lines()
        .filter(|l| l.contains("\"ok\":false"))
        .count();
    assert!((3..25).contains(&failures), "{failures} failing calls");
}

#[test]
fn http_backend_matches_in_process_mock() {
    let scene = fixtures::kitchen();
    let calls = golden_calls(&scene);
    let mock = MockTools::new(Arc::new(scene.clone()), MockConfig::default());
    let url = serve(Arc::new(StubRouter::new(MockConfig::default())));
    let remote = RemoteTools::connect(&url, &scene, Duration::from_secs(10)).unwrap();
    assert_eq!(remote.scene_id(), scene.fingerprint());
    assert_eq!(render(&calls, &remote), render(&calls, &mock));
    let golden = std::fs::read_to_string(golden_path()).unwrap();
    assert_eq!(render(&calls, &remote), golden);
}

#[test]
fn health_lists_all_nine_tools() {
    let url = serve(Arc::new(StubRouter::new(MockConfig::default())));
    let remote = RemoteTools::new(&url, "unused", Duration::from_secs(10));
    let health: Health = remote.health().unwrap();
    assert_eq!(health.version, PROTOCOL_VERSION);
    assert_eq!(health.capabilities, ToolName::ALL.to_vec());
}

#[test]
fn transport_and_protocol_failures_are_typed() {
    let url = serve(Arc::new(StubRouter::new(MockConfig::default())));
    let scene = fixtures::kitchen();
    let stale = RemoteTools::new(&url, "no-such-scene", Duration::from_secs(10));
    let err = stale
        .call(&ToolCall::ComputeDepth {
            patch: scene.full_patch(),
        })
        .unwrap_err();
    assert!(err.to_string().contains("unknown scene_id"), "{err}");

    let closed = RemoteTools::new("http://127.0.0.1:9", "x", Duration::from_secs(2));
    let err = closed
        .call(&ToolCall::ComputeDepth {
            patch: scene.full_patch(),
        })
        .unwrap_err();
    assert!(
        err.to_string().starts_with("tool transport failure"),
        "{err}"
    );
}

#[test]
fn stub_accepts_inline_scene_documents() {
    use base64::Engine as _;
    let router = StubRouter::new(MockConfig::default());
    let scene = fixtures::three_bottles();
    let b64 = base64::engine::general_purpose::STANDARD.encode(scene.to_json_string());
    let body = json!({ "image_b64": b64, "args": { "name": "bottle" } }).to_string();
    let reply = router.handle("POST", "/tools/find", &body);
    assert_eq!(reply.status, 200, "{}", reply.body);
    let v: serde_json::Value = serde_json::from_str(&reply.body).unwrap();
    assert_eq!(v["result"].as_array().unwrap().len(), 3);
    assert_eq!(router.handle("GET", "/tools/find", "").status, 405);
    assert_eq!(router.handle("POST", "/tools/teleport", "{}").status, 404);
    assert_eq!(router.handle("POST", "/tools/find", "not json").status, 400);
}
