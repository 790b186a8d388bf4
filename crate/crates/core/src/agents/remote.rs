//! Agents backed by an OpenAI-compatible chat model.

use super::{
    AgentError, CodeRequest, Coder, ObserveContext, Observer, ObserverFeedback, PlanContext,
    Planner, PlannerOutput,
};
use crate::chat::{extract_block, ChatBackend, ChatMessage};
use crate::script::builtins;
use crate::toolset::ToolName;
use std::fmt::Write as _;
use std::sync::Arc;

const PLANNER_SYSTEM: &str = r#"You are the Planner of a robot grasping system. Given a user request and a description of the scene, write a short plan of steps that a Coder turns into a GraspScript program. Use the Observer's feedback from earlier attempts to repair the plan.

Steps use this vocabulary:
- find NAME
- find NAME or ask what NAME is
- find NAME as anchor
- sort by KEY asc|desc
- take index K
- pick best match for DESCRIPTION
- pick nearest to camera
- pick closest to anchor
- find part PART
- detect grasp
- detect reachable grasp
- check workspace

Reply with exactly one fenced block labelled plan holding JSON:
```plan
{"status": "continue", "steps": ["find knife", "detect grasp", "check workspace"], "rationale": "the knife is visible"}
```
status is continue, finalize or abort. When you abort, add "reason": one of not_found, unreachable, unsafe, other."#;

const CODER_EXAMPLE: &str = r#"let bottles = find(image, "bottle");
let ordered = sort_by(bottles, "center_x", "asc");
let target = ordered[1];
let grasp = grasp_detection(target)[0];
return grasp;"#;

const OBSERVER_SYSTEM: &str = r#"You are the Observer of a robot grasping system. You see the user request, the program that ran and its execution report. Decide whether the resulting grasp answers the request safely. Never grasp blades or other harmful parts and never grasp fragile objects.

Reply with exactly one fenced block labelled feedback holding JSON:
```feedback
{"verdict": "accept", "summary": "the grasp is on the handle of the mug", "risk_notes": ""}
```
verdict is accept, revise or abort. When revising, say what went wrong so the Planner can fix it."#;

fn coder_system() -> String {
    let mut s = String::from(
        "You are the Coder of a robot grasping system. Translate the plan into a GraspScript program.\n\n\
         Grammar: statements are `let NAME = EXPR;`, `if EXPR { ... } else { ... }`, `for NAME in EXPR { ... }`, \
         `return EXPR;` and `log(EXPR);`. Expressions use numbers, \"strings\", true, false, null, lists indexed with [k], \
         calls, `and`, `or`, `not`, comparisons and arithmetic. `image` is the whole camera image.\n\n\
         Perception tools:\n",
    );
    for t in ToolName::ALL {
        let _ = writeln!(s, "- {}", t.usage());
    }
    s.push_str("\nHelpers:\n");
    for line in builtins::USAGE.lines() {
        let _ = writeln!(s, "- {line}");
    }
    let _ = write!(
        s,
        "\nBind the final grasp to `grasp` and return it. Example for \"grasp the second bottle from the left\":\n\
         ```graspscript\n{CODER_EXAMPLE}\n```\n\nReply with exactly one fenced block labelled graspscript."
    );
    s
}

fn complete(chat: &dyn ChatBackend, messages: &[ChatMessage]) -> Result<String, AgentError> {
    Ok(chat.complete(messages)?)
}

fn json_block(reply: &str, label: &str) -> String {
    extract_block(reply, label)
        .or_else(|_| extract_block(reply, "json"))
        .or_else(|_| extract_block(reply, "any"))
        .unwrap_or_else(|_| reply.to_string())
}

pub struct RemotePlanner {
    chat: Arc<dyn ChatBackend>,
}

impl RemotePlanner {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl Planner for RemotePlanner {
    fn plan(&self, ctx: &PlanContext<'_>) -> Result<PlannerOutput, AgentError> {
        let mut user = format!(
            "Request: {}\nIteration: {}\n\nScene:\n{}\n",
            ctx.query, ctx.iteration, ctx.scene_text
        );
        if !ctx.feedback.is_empty() {
            user.push_str("\nObserver feedback so far:\n");
            for (i, f) in ctx.feedback.iter().enumerate() {
                let _ = writeln!(user, "{}. [{:?}] {}", i + 1, f.verdict, f.summary);
                if !f.risk_notes.is_empty() {
                    let _ = writeln!(user, "   risk: {}", f.risk_notes);
                }
            }
        }
        let reply = complete(
            self.chat.as_ref(),
            &[ChatMessage::system(PLANNER_SYSTEM), ChatMessage::user(user)],
        )?;
        let block = json_block(&reply, "plan");
        serde_json::from_str(&block)
            .map_err(|e| AgentError::Extraction(format!("plan is not valid JSON: {e}")))
    }
}

pub struct RemoteCoder {
    chat: Arc<dyn ChatBackend>,
}

impl RemoteCoder {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl Coder for RemoteCoder {
    fn code(&self, request: &CodeRequest<'_>) -> Result<String, AgentError> {
        let mut user = format!("Request: {}\nPlan:\n", request.query);
        for (i, step) in request.plan.steps.iter().enumerate() {
            let _ = writeln!(user, "{}. {step}", i + 1);
        }
        let mut messages = vec![ChatMessage::system(coder_system()), ChatMessage::user(user)];
        if let Some((previous, error)) = request.previous_attempt {
            messages.push(ChatMessage::assistant(format!(
                "```graspscript\n{previous}```"
            )));
            messages.push(ChatMessage::user(format!(
                "That program does not parse: {error}. Reply with a corrected program."
            )));
        }
        let reply = complete(self.chat.as_ref(), &messages)?;
        Ok(extract_block(&reply, "graspscript").or_else(|_| extract_block(&reply, "any"))?)
    }
}

pub struct RemoteObserver {
    chat: Arc<dyn ChatBackend>,
}

impl RemoteObserver {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl Observer for RemoteObserver {
    fn observe(&self, ctx: &ObserveContext<'_>) -> Result<ObserverFeedback, AgentError> {
        let report = ctx.report;
        let mut user = format!("Request: {}\n\nProgram:\n", ctx.query);
        user.push_str(ctx.program.unwrap_or("(none)\n"));
        let _ = writeln!(user, "\nSteps used: {}", report.steps_used);
        if let Some(e) = &report.error {
            let _ = writeln!(user, "Error: {e}");
        }
        for (k, v) in &report.bindings {
            let _ = writeln!(user, "{k} = {v}");
        }
        for l in &report.logs {
            let _ = writeln!(user, "log: {l}");
        }
        for a in &report.artifacts {
            let _ = writeln!(user, "view of {}:\n{}", a.label, a.text);
        }
        let reply = complete(
            self.chat.as_ref(),
            &[
                ChatMessage::system(OBSERVER_SYSTEM),
                ChatMessage::user(user),
            ],
        )?;
        let block = json_block(&reply, "feedback");
        Ok(serde_json::from_str(&block).unwrap_or_else(|_| ObserverFeedback::revise(reply.trim())))
    }
}
