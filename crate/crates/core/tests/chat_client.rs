use grasploop_core::agents::{RemoteCoder, RemoteObserver, RemotePlanner};
use grasploop_core::chat::{ChatBackend, ChatError, RetryPolicy};
use grasploop_core::{
    fixtures, run_pipeline, Agents, ChatClient, ChatMessage, EndpointConfig, MockConfig, MockTools,
    OutcomeStatus, PipelineConfig,
};
use serde_json::{json, Value};
use std::sync::{Arc, Mutex};
use std::time::Duration;

#[derive(Clone)]
enum Step {
    Reply(u16, String),
    Stall(Duration),
}

struct Seen {
    bodies: Vec<Value>,
    auth: Vec<Option<String>>,
}

fn completion(content: &str) -> String {
    json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string()
}

/// A chat endpoint answering with `script` in order, then repeating the last step.
fn serve(script: Vec<Step>) -> (String, Arc<Mutex<Seen>>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let addr = server.server_addr().to_ip().unwrap();
    let seen = Arc::new(Mutex::new(Seen {
        bodies: Vec::new(),
        auth: Vec::new(),
    }));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (i, mut request) in server.incoming_requests().enumerate() {
            let mut body = String::new();
            let _ = request.as_reader().read_to_string(&mut body);
            {
                let mut log = log.lock().unwrap();
                log.bodies
                    .push(serde_json::from_str(&body).unwrap_or(Value::Null));
                log.auth.push(
                    request
                        .headers()
                        .iter()
                        .find(|h| h.field.equiv("authorization"))
                        .map(|h| h.value.to_string()),
                );
            }
            let step = script.get(i).or(script.last()).cloned().unwrap();
            std::thread::spawn(move || match step {
                Step::Reply(status, text) => {
                    let _ = request
                        .respond(tiny_http::Response::from_string(text).with_status_code(status));
                }
                Step::Stall(d) => {
                    std::thread::sleep(d);
                    let _ = request.respond(tiny_http::Response::from_string(completion("late")));
                }
            });
        }
    });
    (format!("http://{addr}"), seen)
}

fn config(url: &str) -> EndpointConfig {
    let mut c = EndpointConfig::new(url, "test-model");
    c.timeout_secs = 0.5;
    c.retry = RetryPolicy {
        max_attempts: 3,
        backoff_base_secs: 0.01,
        jitter: 0.5,
        seed: 1,
    };
    c
}

fn ask(client: &ChatClient) -> Result<String, ChatError> {
    client.complete(&[ChatMessage::system("be brief"), ChatMessage::user("hello")])
}

#[test]
fn canned_reply_is_returned() {
    let (url, seen) = serve(vec![Step::Reply(200, completion("hi there"))]);
    let mut cfg = config(&url);
    cfg.api_key = Some("sekrit".into());
    let client = ChatClient::new(cfg).unwrap();
    assert_eq!(ask(&client).unwrap(), "hi there");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.bodies[0]["model"], "test-model");
    assert_eq!(seen.bodies[0]["messages"][1]["content"], "hello");
    assert_eq!(seen.auth[0].as_deref(), Some("Bearer sekrit"));
    assert_eq!(client.log().len(), 1);
}

#[test]
fn server_errors_are_retried_up_to_the_limit() {
    let (url, seen) = serve(vec![Step::Reply(500, "boom".into())]);
    let client = ChatClient::new(config(&url)).unwrap();
    match ask(&client) {
        Err(ChatError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected transport failure, got {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().bodies.len(), 3);
    assert!(client.log().iter().all(|e| e.status == Some(500)));
}

#[test]
fn timeout_then_success() {
    let (url, _) = serve(vec![
        Step::Stall(Duration::from_secs(3)),
        Step::Reply(200, completion("second time")),
    ]);
    let client = ChatClient::new(config(&url)).unwrap();
    assert_eq!(ask(&client).unwrap(), "second time");
    let log = client.log();
    assert_eq!(log.len(), 2);
    assert!(log[0].error.is_some() && log[0].status.is_none());
}

#[test]
fn client_errors_and_garbage_are_not_retried() {
    let (url, seen) = serve(vec![Step::Reply(401, "no key".into())]);
    let client = ChatClient::new(config(&url)).unwrap();
    assert!(matches!(
        ask(&client),
        Err(ChatError::Status { status: 401, .. })
    ));
    assert_eq!(seen.lock().unwrap().bodies.len(), 1);

    let (url, _) = serve(vec![Step::Reply(200, "{\"choices\": []}".into())]);
    let client = ChatClient::new(config(&url)).unwrap();
    assert!(matches!(ask(&client), Err(ChatError::MalformedResponse(_))));
}

#[test]
fn bad_configs_and_messages_are_rejected_locally() {
    assert!(ChatClient::new(EndpointConfig::new("", "m")).is_err());
    let mut c = config("http://127.0.0.1:9");
    c.retry.max_attempts = 0;
    assert!(ChatClient::new(c).is_err());
    let client = ChatClient::new(config("http://127.0.0.1:9")).unwrap();
    assert!(matches!(
        client.complete(&[]),
        Err(ChatError::InvalidMessage(_))
    ));
}

/// Answers planner, coder and observer prompts with fixed fenced blocks.
fn role_reply(body: &Value) -> String {
    let system = body["messages"][0]["content"]
        .as_str()
        .unwrap_or_default()
        .to_lowercase();
    if system.contains("```plan") {
        "```plan\n{\"status\": \"continue\", \"steps\": [\"find bottle\", \"sort by center_x asc\", \"take index 1\", \"detect grasp\"], \"rationale\": \"second from left\"}\n```".into()
    } else if system.contains("```feedback") {
        "```feedback\n{\"verdict\": \"accept\", \"summary\": \"looks right\"}\n```".into()
    } else {
        "```graspscript\nlet bottles = find(image, \"bottle\");\nlet ordered = sort_by(bottles, \"center_x\", \"asc\");\nlet target = ordered[1];\nlet grasp = grasp_detection(target)[0];\nreturn grasp;\n```".into()
    }
}

#[test]
fn remote_agents_drive_the_loop_over_http() {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    std::thread::spawn(move || {
        for mut request in server.incoming_requests() {
            let mut body = String::new();
            let _ = request.as_reader().read_to_string(&mut body);
            let v: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
            let _ = request.respond(tiny_http::Response::from_string(completion(&role_reply(
                &v,
            ))));
        }
    });
    let backend =
        |url: &str| -> Arc<dyn ChatBackend> { Arc::new(ChatClient::new(config(url)).unwrap()) };
    let agents = Agents {
        planner: Box::new(RemotePlanner::new(backend(&url))),
        coder: Box::new(RemoteCoder::new(backend(&url))),
        observer: Box::new(RemoteObserver::new(backend(&url))),
    };
    let scene = Arc::new(fixtures::three_bottles());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let outcome = run_pipeline(
        &scene,
        "grasp the second bottle from the left",
        &agents,
        &tools,
        &PipelineConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(
        outcome.status,
        OutcomeStatus::Success,
        "{}",
        outcome.summary()
    );
    assert_eq!(outcome.iterations, 1);
    let target = scene.object(1).unwrap();
    let g = outcome.grasp.unwrap();
    assert!(target.bbox.left <= g.x() && g.x() <= target.bbox.right);
}
