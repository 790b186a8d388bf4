//! Deterministic rule-based agents. They stand in for language-model agents
//! in tests, benchmarks and offline runs.

use super::query::{parse_query, Intent, Selection};
use super::risk::{assess, Risk};
use super::{
    AbortReason, AgentError, CodeRequest, Coder, ObserveContext, Observer, ObserverFeedback,
    PlanContext, PlanStatus, Planner, PlannerOutput, Verdict,
};
use crate::geometry::within_workspace;
use crate::lexicon::Lexicon;
use crate::scene::Scene;
use crate::script::{builtins, lexer::KEYWORDS, Value};
use std::fmt::Write as _;
use std::sync::Arc;

/// Object names in a scene description, in listing order.
pub(crate) fn scene_names(scene_text: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for line in scene_text.lines() {
        let Some(rest) = line.strip_prefix("object ") else {
            continue;
        };
        let Some((_, rest)) = rest.split_once(' ') else {
            continue;
        };
        let Some((name, _)) = rest.split_once(':') else {
            continue;
        };
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
        }
    }
    names
}

fn safe_part_hint(summary: &str) -> Option<&str> {
    let start = summary.find("grasp the ")? + "grasp the ".len();
    let len = summary[start..].find(" instead")?;
    Some(&summary[start..start + len])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedPlanner;

impl ScriptedPlanner {
    fn lexicon(&self) -> &'static Lexicon {
        Lexicon::builtin()
    }
}

impl Planner for ScriptedPlanner {
    fn plan(&self, ctx: &PlanContext<'_>) -> Result<PlannerOutput, AgentError> {
        let lex = self.lexicon();
        if let Some(last) = ctx.feedback.last() {
            let s = last.summary.as_str();
            if s.starts_with("unreachable") {
                return Ok(PlannerOutput::abort(AbortReason::Unreachable, s));
            }
            if s.starts_with("error[index]")
                || s.starts_with("error[tool]") && s.contains("no such object")
            {
                return Ok(PlannerOutput::abort(AbortReason::NotFound, s));
            }
            if s.starts_with("risk") && (s.contains("fragile") || !s.contains(" instead")) {
                return Ok(PlannerOutput::abort(AbortReason::Unsafe, s));
            }
        }
        let known = scene_names(ctx.scene_text);
        let Some(intent) = parse_query(ctx.query, lex, &known) else {
            return Ok(PlannerOutput::abort(
                AbortReason::Other,
                format!("cannot interpret the query {:?}", ctx.query),
            ));
        };
        let (name, selection, part) = match intent {
            Intent::Object {
                name,
                selection,
                part,
            } => (name, selection, part),
            Intent::Affordance { verb } => {
                let candidates: Vec<&str> = match lex.affordances.get(&verb) {
                    Some(c) => c.iter().map(String::as_str).collect(),
                    None => lex
                        .objects
                        .iter()
                        .filter(|o| o.affordances.contains(&verb))
                        .map(|o| o.name.as_str())
                        .collect(),
                };
                match candidates
                    .into_iter()
                    .find(|c| known.iter().any(|k| k == c))
                {
                    Some(c) => (c.to_string(), Selection::Only, None),
                    None => {
                        return Ok(PlannerOutput::abort(
                            AbortReason::NotFound,
                            format!("nothing in the scene can be used to {verb}"),
                        ))
                    }
                }
            }
        };

        let safe = ctx
            .feedback
            .iter()
            .rev()
            .find_map(|f| safe_part_hint(&f.summary));
        let reachable = ctx
            .feedback
            .iter()
            .any(|f| f.summary.starts_with("outside workspace"));

        let mut steps = Vec::new();
        if let Selection::ClosestTo(anchor) = &selection {
            steps.push(format!("find {anchor} as anchor"));
        }
        if known.contains(&name) {
            steps.push(format!("find {name}"));
        } else {
            steps.push(format!("find {name} or ask what {name} is"));
        }
        match &selection {
            Selection::Only => {}
            Selection::Attribute(a) => steps.push(format!("pick best match for {a} {name}")),
            Selection::Ordinal { rank, from } => {
                let (key, order) = from.sort();
                steps.push(format!("sort by {key} {order}"));
                steps.push(format!("take index {}", rank - 1));
            }
            Selection::ClosestTo(_) => steps.push("pick closest to anchor".into()),
            Selection::NearestToCamera => steps.push("pick nearest to camera".into()),
        }
        if let Some(p) = safe.map(str::to_string).or(part) {
            steps.push(format!("find part {p}"));
            steps.push("take index 0".into());
        }
        steps.push(
            if reachable {
                "detect reachable grasp"
            } else {
                "detect grasp"
            }
            .into(),
        );
        steps.push("check workspace".into());

        Ok(PlannerOutput {
            status: if ctx.iteration == 1 {
                PlanStatus::Continue
            } else {
                PlanStatus::Finalize
            },
            steps,
            rationale: format!("locate the {name} and grasp it"),
            reason: None,
        })
    }
}

fn plural(word: &str) -> String {
    let consonant_y = word.ends_with('y')
        && !word.ends_with("ay")
        && !word.ends_with("ey")
        && !word.ends_with("oy");
    if let Some(stem) = word.strip_suffix("fe") {
        format!("{stem}ves")
    } else if let Some(stem) = word.strip_suffix('f') {
        format!("{stem}ves")
    } else if ["ss", "x", "z", "ch", "sh"]
        .iter()
        .any(|s| word.ends_with(s))
    {
        format!("{word}es")
    } else if consonant_y {
        format!("{}ies", &word[..word.len() - 1])
    } else if word.ends_with('s') {
        format!("{word}_list")
    } else {
        format!("{word}s")
    }
}

const RESERVED: [&str; 8] = [
    "image", "parts", "ordered", "matches", "anchor", "target", "grasp", "reach",
];

/// Variable name for the detections of `object`.
fn list_var(object: &str) -> String {
    let last = object.split_whitespace().last().unwrap_or("item");
    let clean: String = last
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    let clean = if clean.starts_with(|c: char| c.is_ascii_alphabetic()) {
        clean
    } else {
        format!("obj_{clean}")
    };
    let name = plural(&clean);
    if KEYWORDS.contains(&name.as_str())
        || builtins::names().contains(&name.as_str())
        || RESERVED.contains(&name.as_str())
    {
        format!("found_{name}")
    } else {
        name
    }
}

fn quoted(text: &str) -> String {
    crate::script::lexer::escape(text)
}

/// Translates plan steps into a program.
pub fn program_for_steps(steps: &[String]) -> Result<String, String> {
    let mut out = String::new();
    let mut list: Option<String> = None;
    let mut has_target = false;

    fn ensure_target(
        out: &mut String,
        list: &Option<String>,
        has_target: &mut bool,
    ) -> Result<(), String> {
        if !*has_target {
            let l = list.as_ref().ok_or("no detections to choose from")?;
            let _ = writeln!(out, "let target = {l}[0];");
            *has_target = true;
        }
        Ok(())
    }
    fn need<'a>(list: &'a Option<String>, step: &str) -> Result<&'a str, String> {
        list.as_deref()
            .ok_or_else(|| format!("step {step:?} needs detections"))
    }

    for step in steps {
        let s = step.trim();
        if let Some(p) = s.strip_prefix("find part ") {
            ensure_target(&mut out, &list, &mut has_target)?;
            let _ = writeln!(out, "let parts = find_part(target, {});", quoted(p));
            list = Some("parts".into());
            has_target = false;
        } else if let Some(a) = s
            .strip_prefix("find ")
            .and_then(|r| r.strip_suffix(" as anchor"))
        {
            let _ = writeln!(out, "let anchor = first(find(image, {}));", quoted(a));
        } else if let Some((name, _)) = s
            .strip_prefix("find ")
            .and_then(|r| r.split_once(" or ask what "))
        {
            let _ = writeln!(out, "let matches = find(image, {});", quoted(name));
            let _ = writeln!(out, "if count(matches) == 0 {{");
            let _ = writeln!(
                out,
                "    let matches = find(image, llm_query({}));",
                quoted(name)
            );
            let _ = writeln!(out, "}}");
            list = Some("matches".into());
            has_target = false;
        } else if let Some(name) = s.strip_prefix("find ") {
            let var = list_var(name);
            let _ = writeln!(out, "let {var} = find(image, {});", quoted(name));
            list = Some(var);
            has_target = false;
        } else if let Some(rest) = s.strip_prefix("sort by ") {
            let (key, order) = rest
                .split_once(' ')
                .ok_or_else(|| format!("bad sort step {s:?}"))?;
            let l = need(&list, s)?;
            let _ = writeln!(
                out,
                "let ordered = sort_by({l}, {}, {});",
                quoted(key),
                quoted(order)
            );
            list = Some("ordered".into());
            has_target = false;
        } else if let Some(k) = s.strip_prefix("take index ") {
            let k: usize = k.parse().map_err(|_| format!("bad index in {s:?}"))?;
            let l = need(&list, s)?;
            let _ = writeln!(out, "let target = {l}[{k}];");
            has_target = true;
        } else if let Some(c) = s.strip_prefix("pick best match for ") {
            let l = need(&list, s)?;
            let _ = writeln!(out, "let target = best_image_match({l}, {});", quoted(c));
            has_target = true;
        } else if s == "pick nearest to camera" {
            let l = need(&list, s)?;
            let _ = writeln!(out, "let target = min_by({l}, \"depth\");");
            has_target = true;
        } else if s == "pick closest to anchor" {
            let l = need(&list, s)?;
            let _ = writeln!(out, "let target = closest_to({l}, anchor);");
            has_target = true;
        } else if s == "detect grasp" {
            ensure_target(&mut out, &list, &mut has_target)?;
            let _ = writeln!(out, "let grasp = grasp_detection(target)[0];");
        } else if s == "detect reachable grasp" {
            ensure_target(&mut out, &list, &mut has_target)?;
            let _ = writeln!(out, "let grasp = null;");
            let _ = writeln!(out, "let reach = reachable(grasp_detection(target));");
            let _ = writeln!(out, "if count(reach) > 0 {{");
            let _ = writeln!(out, "    let grasp = reach[0];");
            let _ = writeln!(out, "}} else {{");
            let _ = writeln!(out, "    log(\"no reachable grasp\");");
            let _ = writeln!(out, "}}");
        } else if s == "check workspace" {
        } else {
            return Err(format!("unknown step {s:?}"));
        }
    }
    out.push_str("return grasp;\n");
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedCoder;

impl Coder for ScriptedCoder {
    fn code(&self, request: &CodeRequest<'_>) -> Result<String, AgentError> {
        program_for_steps(&request.plan.steps).map_err(AgentError::Invalid)
    }
}

/// Emits an unparsable program on the first iteration, then behaves like
/// [`ScriptedCoder`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BadThenGoodCoder;

impl Coder for BadThenGoodCoder {
    fn code(&self, request: &CodeRequest<'_>) -> Result<String, AgentError> {
        if request.iteration == 1 {
            Ok("let = find(image, \"thing\"\n".into())
        } else {
            ScriptedCoder.code(request)
        }
    }
}

/// Judges reports against the scene's ground truth.
pub struct ScriptedObserver {
    scene: Arc<Scene>,
}

impl ScriptedObserver {
    pub fn new(scene: Arc<Scene>) -> Self {
        Self { scene }
    }
}

impl Observer for ScriptedObserver {
    fn observe(&self, ctx: &ObserveContext<'_>) -> Result<ObserverFeedback, AgentError> {
        let report = ctx.report;
        if let Some(e) = &report.error {
            let mut summary = e.to_string();
            let empty: Vec<&str> = report
                .bindings
                .iter()
                .filter(|(_, v)| matches!(v, Value::List(items) if items.is_empty()))
                .map(|(k, _)| k.as_str())
                .collect();
            if !empty.is_empty() {
                let _ = write!(summary, "; empty: {}", empty.join(", "));
            }
            return Ok(ObserverFeedback::revise(summary));
        }
        let Some(grasp) = report.grasp() else {
            if report.logs.iter().any(|l| l.contains("no reachable grasp")) {
                return Ok(ObserverFeedback::revise(
                    "unreachable: no detected grasp lies inside the workspace",
                ));
            }
            let mut summary = "no grasp: the program produced no grasp".to_string();
            if !report.logs.is_empty() {
                let _ = write!(summary, "; logs: {}", report.logs.join(" | "));
            }
            return Ok(ObserverFeedback::revise(summary));
        };
        if !within_workspace(&grasp, &self.scene.workspace) {
            return Ok(ObserverFeedback::revise(format!(
                "outside workspace: grasp {grasp} is not reachable"
            )));
        }
        if let Some(risk) = assess(&self.scene, &grasp, Lexicon::builtin()) {
            let note = risk.to_string();
            let summary = match &risk {
                Risk::Fragile { .. } => format!("risk: {note}; grasping it may break it"),
                Risk::HarmfulPart { .. } => format!("risk: {note}"),
            };
            return Ok(ObserverFeedback {
                verdict: Verdict::Revise,
                summary,
                risk_notes: note,
            });
        }
        Ok(ObserverFeedback::accept(format!(
            "grasp {grasp} looks correct and safe"
        )))
    }
}

/// Never accepts; drives the loop to its iteration cap.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverAcceptObserver;

impl Observer for NeverAcceptObserver {
    fn observe(&self, _ctx: &ObserveContext<'_>) -> Result<ObserverFeedback, AgentError> {
        Ok(ObserverFeedback::revise("not satisfied yet"))
    }
}
