use super::transcript::{
    parse_transcript, replay, TranscriptError, TranscriptHeader, TranscriptWriter,
    TRANSCRIPT_VERSION,
};
use super::*;
use crate::fixtures;
use crate::geometry::grasp_success;
use crate::toolset::{MockConfig, MockTools};

fn run(scene: Scene, query: &str) -> GraspOutcome {
    let scene = Arc::new(scene);
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents::scripted(scene.clone());
    run_pipeline(
        &scene,
        query,
        &agents,
        &tools,
        &PipelineConfig::default(),
        None,
    )
    .unwrap()
}

fn truths(scene: &Scene, id: u32, part: Option<&str>) -> Vec<GraspRect> {
    let obj = scene.object(id).unwrap();
    match part {
        Some(p) => obj.part(p).unwrap().grasps.clone(),
        None => obj.grasps.clone(),
    }
}

#[test]
fn ordinal_query_produces_reference_program() {
    let scene = fixtures::three_bottles();
    let out = run(scene.clone(), "grasp the second bottle from the left");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert_eq!(out.iterations, 1);
    assert_eq!(
        out.history[0].program.as_deref(),
        Some(
            "let bottles = find(image, \"bottle\");\n\
             let ordered = sort_by(bottles, \"center_x\", \"asc\");\n\
             let target = ordered[1];\n\
             let grasp = grasp_detection(target)[0];\n\
             return grasp;\n"
        )
    );
    assert!(grasp_success(&out.grasp.unwrap(), &truths(&scene, 1, None)).unwrap());
    assert_eq!(out.reachable, Some(true));
}

#[test]
fn direct_plan_is_minimal() {
    let scene = Arc::new(fixtures::kitchen());
    let text = describe(&scene, None);
    let plan = ScriptedPlanner
        .plan(&PlanContext {
            query: "grasp the knife",
            iteration: 1,
            scene_text: &text,
            feedback: &[],
        })
        .unwrap();
    assert_eq!(plan.status, PlanStatus::Continue);
    assert_eq!(
        plan.steps,
        ["find knife", "detect grasp", "check workspace"]
    );
}

#[test]
fn blade_grasp_is_revised_to_handle() {
    let scene = fixtures::kitchen();
    let out = run(scene.clone(), "grasp the knife");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert_eq!(out.iterations, 2);
    let first = out.history[0].feedback.as_ref().unwrap();
    assert_eq!(first.verdict, Verdict::Revise);
    assert!(first.risk_notes.contains("blade"));
    let plan = out.history[1].plan.as_ref().unwrap();
    assert_eq!(plan.status, PlanStatus::Finalize);
    assert!(plan.steps.contains(&"find part handle".to_string()));
    assert!(grasp_success(
        &out.grasp.unwrap(),
        &truths(&scene, fixtures::KITCHEN_KNIFE, Some("handle"))
    )
    .unwrap());
}

#[test]
fn affordance_query_finds_a_cutting_tool() {
    let scene = fixtures::kitchen();
    let out = run(scene.clone(), "I need something to cut");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert!(grasp_success(
        &out.grasp.unwrap(),
        &truths(&scene, fixtures::KITCHEN_KNIFE, Some("handle"))
    )
    .unwrap());
}

#[test]
fn part_and_attribute_queries() {
    let scene = fixtures::kitchen();
    let out = run(scene.clone(), "grasp the handle of the mug");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert!(grasp_success(
        &out.grasp.unwrap(),
        &truths(&scene, fixtures::KITCHEN_MUG, Some("handle"))
    )
    .unwrap());

    let out = run(scene.clone(), "grasp the plant");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert!(grasp_success(
        &out.grasp.unwrap(),
        &truths(&scene, fixtures::KITCHEN_PLANT, Some("pot"))
    )
    .unwrap());

    let scene = fixtures::three_bottles();
    let out = run(scene.clone(), "grasp the brown bottle");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert!(grasp_success(&out.grasp.unwrap(), &truths(&scene, 1, None)).unwrap());
}

#[test]
fn knowledge_query_resolves_brand_name() {
    let scene = fixtures::kitchen();
    let out = run(scene.clone(), "grasp the kleenex");
    assert_eq!(out.status, OutcomeStatus::Success);
    assert!(out.history[0]
        .program
        .as_deref()
        .unwrap()
        .contains("llm_query(\"kleenex\")"));
    assert!(grasp_success(
        &out.grasp.unwrap(),
        &truths(&scene, fixtures::KITCHEN_TISSUE, None)
    )
    .unwrap());
}

#[test]
fn fragile_object_is_refused() {
    let out = run(fixtures::kitchen(), "grasp the glass");
    assert_eq!(out.status, OutcomeStatus::Aborted);
    assert_eq!(out.grasp, None);
    let last = out.history.last().unwrap().plan.as_ref().unwrap();
    assert_eq!(last.reason, Some(AbortReason::Unsafe));
}

#[test]
fn missing_object_is_not_found() {
    let out = run(fixtures::kitchen(), "grasp the banana");
    assert_eq!(out.status, OutcomeStatus::NotFound);
    assert!(out.iterations <= 2);
    let out = run(fixtures::three_bottles(), "I need something to hammer");
    assert_eq!(out.status, OutcomeStatus::NotFound);
    assert_eq!(out.iterations, 1);
}

#[test]
fn object_outside_workspace_is_unreachable() {
    let out = run(fixtures::out_of_reach(), "grasp the bottle");
    assert_eq!(out.status, OutcomeStatus::Unreachable);
    assert!(out.history.iter().any(|r| r
        .feedback
        .as_ref()
        .is_some_and(|f| f.summary.starts_with("outside workspace"))));
}

#[test]
fn accepted_grasp_outside_workspace_is_unreachable() {
    struct Lenient;
    impl Observer for Lenient {
        fn observe(&self, _ctx: &ObserveContext<'_>) -> Result<ObserverFeedback, AgentError> {
            Ok(ObserverFeedback::accept("fine"))
        }
    }
    let scene = Arc::new(fixtures::out_of_reach());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents {
        planner: Box::new(ScriptedPlanner),
        coder: Box::new(ScriptedCoder),
        observer: Box::new(Lenient),
    };
    let out = run_pipeline(
        &scene,
        "grasp the bottle",
        &agents,
        &tools,
        &PipelineConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(out.status, OutcomeStatus::Unreachable);
    assert_eq!(out.reachable, Some(false));
    assert!(out.grasp.is_some());
}

#[test]
fn parse_failure_is_recorded_and_repaired() {
    let scene = Arc::new(fixtures::three_bottles());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents {
        planner: Box::new(ScriptedPlanner),
        coder: Box::new(BadThenGoodCoder),
        observer: Box::new(ScriptedObserver::new(scene.clone())),
    };
    let out = run_pipeline(
        &scene,
        "grasp the leftmost bottle",
        &agents,
        &tools,
        &PipelineConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(out.status, OutcomeStatus::Success);
    assert_eq!(out.iterations, 2);
    let first = out.history[0].report.as_ref().unwrap();
    assert_eq!(first.error.as_ref().unwrap().kind, ErrorKind::Parse);
    assert_eq!(first.steps_used, 0);
    assert!(grasp_success(&out.grasp.unwrap(), &truths(&scene, 2, None)).unwrap());
}

#[test]
fn iteration_cap_gives_exhausted() {
    let scene = Arc::new(fixtures::three_bottles());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents {
        planner: Box::new(ScriptedPlanner),
        coder: Box::new(ScriptedCoder),
        observer: Box::new(NeverAcceptObserver),
    };
    for cap in [1, 3, 5] {
        let config = PipelineConfig {
            max_iterations: cap,
            ..Default::default()
        };
        let out = run_pipeline(&scene, "grasp the mug", &agents, &tools, &config, None).unwrap();
        assert_eq!(out.status, OutcomeStatus::Exhausted);
        assert_eq!(out.iterations, cap);
        assert_eq!(out.history.len(), cap as usize);
        assert_eq!(out.grasp, None);
    }
}

#[test]
fn configuration_errors_are_errors() {
    let scene = Arc::new(fixtures::three_bottles());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents::scripted(scene.clone());
    let bad = [
        ("", PipelineConfig::default()),
        (
            "grasp the mug",
            PipelineConfig {
                max_iterations: 0,
                ..Default::default()
            },
        ),
        (
            "grasp the mug",
            PipelineConfig {
                budget: 0,
                ..Default::default()
            },
        ),
    ];
    for (query, config) in bad {
        assert!(matches!(
            run_pipeline(&scene, query, &agents, &tools, &config, None),
            Err(PipelineError::InvalidConfig(_))
        ));
    }
}

#[test]
fn planner_failures_become_revisions() {
    struct Broken;
    impl Planner for Broken {
        fn plan(&self, _ctx: &PlanContext<'_>) -> Result<PlannerOutput, AgentError> {
            Err(AgentError::Extraction("no plan block".into()))
        }
    }
    let scene = Arc::new(fixtures::three_bottles());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents {
        planner: Box::new(Broken),
        coder: Box::new(ScriptedCoder),
        observer: Box::new(ScriptedObserver::new(scene.clone())),
    };
    let out = run_pipeline(
        &scene,
        "grasp the mug",
        &agents,
        &tools,
        &PipelineConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(out.status, OutcomeStatus::Exhausted);
    assert!(out
        .history
        .iter()
        .all(|r| r.plan.is_none() && r.note.is_some()));
}

fn transcript_of(scene: Scene, query: &str) -> (GraspOutcome, String) {
    let scene = Arc::new(scene);
    let config = MockConfig::default();
    let tools = MockTools::new(scene.clone(), config);
    let agents = Agents::scripted(scene.clone());
    let pipeline = PipelineConfig::default();
    let header = TranscriptHeader {
        version: TRANSCRIPT_VERSION.into(),
        query: query.into(),
        scene: (*scene).clone(),
        tools: Some(config),
        budget: pipeline.budget,
        max_iterations: pipeline.max_iterations,
        agents: "scripted".into(),
    };
    let mut writer = TranscriptWriter::new(Vec::new(), &header).unwrap();
    let out = run_pipeline(&scene, query, &agents, &tools, &pipeline, Some(&mut writer)).unwrap();
    (out, String::from_utf8(writer.into_inner()).unwrap())
}

#[test]
fn transcript_replays_exactly() {
    let (out, text) = transcript_of(fixtures::kitchen(), "grasp the knife");
    assert_eq!(text.lines().count(), 2 + out.history.len());
    let t = parse_transcript(&text).unwrap();
    assert_eq!(t.iterations, out.history);
    assert_eq!(t.outcome.as_ref().unwrap().status, out.status);
    let summary = replay(&t).unwrap();
    assert_eq!(summary.programs_executed, 2);
}

#[test]
fn tampered_transcript_diverges() {
    let (_, text) = transcript_of(fixtures::kitchen(), "grasp the knife");
    let mut t = parse_transcript(&text).unwrap();
    let program = t.iterations[1].program.as_mut().unwrap();
    *program = program.replace("[0]", "[1]");
    match replay(&t) {
        Err(TranscriptError::Diverged { iteration, .. }) => assert_eq!(iteration, 2),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn truncated_transcript_is_corrupt() {
    let (_, text) = transcript_of(fixtures::three_bottles(), "grasp the mug");
    let cut = &text[..text.len() / 2];
    assert!(matches!(
        parse_transcript(cut),
        Err(TranscriptError::Corrupt { .. })
    ));
    assert!(matches!(
        parse_transcript(""),
        Err(TranscriptError::Corrupt { .. })
    ));
}
