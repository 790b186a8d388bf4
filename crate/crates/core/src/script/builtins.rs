//! Builtin functions: list helpers, patch geometry, and the nine tools.

use super::ast::Span;
use super::interp::{ErrorKind, ScriptError};
use super::value::Value;
use crate::geometry::within_workspace;
use crate::scene::{ImagePatch, Scene};
use crate::toolset::{Detection, ToolBackend, ToolName, Tools};

/// Keys accepted by `sort_by`, `min_by` and `max_by`.
pub const SORT_KEYS: [&str; 5] = ["center_x", "center_y", "area", "depth", "score"];

const SIGNATURES: [(&str, usize, usize); 13] = [
    ("sort_by", 3, 3),
    ("count", 1, 1),
    ("first", 1, 1),
    ("reverse", 1, 1),
    ("center_x", 1, 1),
    ("center_y", 1, 1),
    ("area", 1, 1),
    ("distance", 2, 2),
    ("min_by", 2, 2),
    ("max_by", 2, 2),
    ("closest_to", 2, 2),
    ("in_workspace", 1, 1),
    ("reachable", 1, 1),
];

/// `(min, max)` argument count of a builtin or tool.
pub fn arity(name: &str) -> Option<(usize, usize)> {
    if let Some((_, lo, hi)) = SIGNATURES.iter().find(|(n, ..)| *n == name) {
        return Some((*lo, *hi));
    }
    Some(match name.parse::<ToolName>().ok()? {
        ToolName::GraspDetection | ToolName::ComputeDepth => (1, 1),
        ToolName::Find
        | ToolName::FindPart
        | ToolName::Exists
        | ToolName::Masks
        | ToolName::BestImageMatch => (2, 2),
        ToolName::VerifyProperty => (3, 3),
        ToolName::LlmQuery => (1, 2),
    })
}

pub fn names() -> Vec<&'static str> {
    SIGNATURES
        .iter()
        .map(|(n, ..)| *n)
        .chain(ToolName::ALL.iter().map(|t| t.as_str()))
        .collect()
}

/// One-line usage of the non-tool builtins, for code-writing agents.
pub const USAGE: &str = "\
sort_by(list, key, order) -> list: key is center_x, center_y, area, depth or score; order is \"asc\" or \"desc\"
count(list) -> number
first(list) -> element
reverse(list) -> list
center_x(patch), center_y(patch), area(patch) -> number
distance(a, b) -> number: distance between centers
min_by(list, key), max_by(list, key) -> element
closest_to(list, anchor) -> element: the element whose center is nearest the anchor's
in_workspace(grasp) -> bool: whether the robot can reach the grasp
reachable(grasps) -> list: the grasps the robot can reach";

pub struct Context<'a> {
    pub scene: &'a Scene,
    pub tools: &'a dyn ToolBackend,
}

fn type_err(span: Span, message: String) -> ScriptError {
    ScriptError::new(ErrorKind::Type, message, span)
}

struct Args<'v> {
    name: &'v str,
    values: Vec<Value>,
    span: Span,
}

impl Args<'_> {
    fn mismatch(&self, i: usize, want: &str) -> ScriptError {
        type_err(
            self.span,
            format!(
                "{}: argument {} must be {want}, got {}",
                self.name,
                i + 1,
                self.values[i].type_name()
            ),
        )
    }

    fn list(&self, i: usize) -> Result<&[Value], ScriptError> {
        match &self.values[i] {
            Value::List(items) => Ok(items),
            _ => Err(self.mismatch(i, "a list")),
        }
    }

    fn text(&self, i: usize) -> Result<&str, ScriptError> {
        match &self.values[i] {
            Value::Text(s) => Ok(s),
            _ => Err(self.mismatch(i, "text")),
        }
    }

    fn patch(&self, i: usize) -> Result<&Detection, ScriptError> {
        self.values[i]
            .as_patch()
            .ok_or_else(|| self.mismatch(i, "a patch"))
    }

    fn located(&self, i: usize) -> Result<&Value, ScriptError> {
        match &self.values[i] {
            v @ (Value::Patch(_) | Value::Grasp(_)) => Ok(v),
            _ => Err(self.mismatch(i, "a patch or grasp")),
        }
    }

    fn key(&self, i: usize) -> Result<&str, ScriptError> {
        let key = self.text(i)?;
        if SORT_KEYS.contains(&key) {
            Ok(key)
        } else {
            Err(type_err(
                self.span,
                format!(
                    "{}: unknown key {key:?}; expected one of {}",
                    self.name,
                    SORT_KEYS.join(", ")
                ),
            ))
        }
    }
}

fn index_err(span: Span, message: String) -> ScriptError {
    ScriptError::new(ErrorKind::Index, message, span)
}

fn tool_err(span: Span, tool: &str, e: crate::toolset::ToolError) -> ScriptError {
    ScriptError::new(ErrorKind::Tool, format!("{tool}: {e}"), span)
}

fn key_of(ctx: &Context<'_>, v: &Value, key: &str, span: Span) -> Result<f64, ScriptError> {
    let bad = || {
        type_err(
            span,
            format!("key {key:?} does not apply to {}", v.type_name()),
        )
    };
    match (key, v) {
        ("center_x", _) => v.center().map(|c| c.x).ok_or_else(bad),
        ("center_y", _) => v.center().map(|c| c.y).ok_or_else(bad),
        ("area", Value::Patch(d)) => Ok(d.patch.bbox.area()),
        ("area", Value::Grasp(g)) => Ok(g.area()),
        ("score", Value::Patch(d)) => Ok(d.score),
        ("score", Value::Grasp(g)) => Ok(g.score().unwrap_or(1.0)),
        ("depth", Value::Patch(d)) => ctx
            .tools
            .compute_depth(&d.patch)
            .map_err(|e| tool_err(span, "compute_depth", e)),
        _ => Err(bad()),
    }
}

fn keyed(
    ctx: &Context<'_>,
    items: &[Value],
    key: &str,
    span: Span,
) -> Result<Vec<(f64, Value)>, ScriptError> {
    items
        .iter()
        .map(|v| key_of(ctx, v, key, span).map(|k| (k, v.clone())))
        .collect()
}

fn patches(d: &[Detection]) -> Value {
    Value::List(d.iter().cloned().map(Value::Patch).collect())
}

pub fn call(
    ctx: &Context<'_>,
    name: &str,
    values: Vec<Value>,
    span: Span,
) -> Result<Value, ScriptError> {
    let Some((lo, hi)) = arity(name) else {
        return Err(ScriptError::new(
            ErrorKind::Name,
            format!("unknown function `{name}`"),
            span,
        ));
    };
    if values.len() < lo || values.len() > hi {
        return Err(type_err(
            span,
            format!("{name}: wrong number of arguments ({})", values.len()),
        ));
    }
    let a = Args { name, values, span };
    let tool = |e| tool_err(span, name, e);
    match name {
        "sort_by" => {
            let key = a.key(1)?;
            let descending = match a.text(2)? {
                "asc" => false,
                "desc" => true,
                other => {
                    return Err(type_err(
                        span,
                        format!("sort_by: order must be \"asc\" or \"desc\", got {other:?}"),
                    ))
                }
            };
            let mut pairs = keyed(ctx, a.list(0)?, key, span)?;
            // stable: equal keys keep their input order
            pairs.sort_by(|x, y| {
                let o = x.0.total_cmp(&y.0);
                if descending {
                    o.reverse()
                } else {
                    o
                }
            });
            Ok(Value::List(pairs.into_iter().map(|(_, v)| v).collect()))
        }
        "count" => Ok(Value::Number(a.list(0)?.len() as f64)),
        "first" => a
            .list(0)?
            .first()
            .cloned()
            .ok_or_else(|| index_err(span, "first: the list is empty".into())),
        "reverse" => Ok(Value::List(a.list(0)?.iter().rev().cloned().collect())),
        "center_x" | "center_y" | "area" => {
            key_of(ctx, a.located(0)?, name, span).map(Value::Number)
        }
        "distance" => {
            let p = a.located(0)?.center().expect("located values have centers");
            let q = a.located(1)?.center().expect("located values have centers");
            Ok(Value::Number(p.distance(&q)))
        }
        "min_by" | "max_by" => {
            let key = a.key(1)?;
            let pairs = keyed(ctx, a.list(0)?, key, span)?;
            let mut best: Option<(f64, Value)> = None;
            for (k, v) in pairs {
                let better = match &best {
                    None => true,
                    Some((b, _)) if name == "min_by" => k < *b,
                    Some((b, _)) => k > *b,
                };
                if better {
                    best = Some((k, v));
                }
            }
            best.map(|(_, v)| v)
                .ok_or_else(|| index_err(span, format!("{name}: the list is empty")))
        }
        "closest_to" => {
            let anchor = a.located(1)?.center().expect("located values have centers");
            let mut best: Option<(f64, &Value)> = None;
            for v in a.list(0)? {
                let c = v.center().ok_or_else(|| {
                    type_err(
                        span,
                        format!("closest_to: cannot locate a {}", v.type_name()),
                    )
                })?;
                let d = c.distance(&anchor);
                if best.is_none_or(|(b, _)| d < b) {
                    best = Some((d, v));
                }
            }
            best.map(|(_, v)| v.clone())
                .ok_or_else(|| index_err(span, "closest_to: the list is empty".into()))
        }
        "in_workspace" => match &a.values[0] {
            Value::Grasp(g) => Ok(Value::Bool(within_workspace(g, &ctx.scene.workspace))),
            _ => Err(a.mismatch(0, "a grasp")),
        },
        "reachable" => {
            let mut out = Vec::new();
            for v in a.list(0)? {
                let g = v.as_grasp().ok_or_else(|| {
                    type_err(
                        span,
                        format!("reachable: list holds {}, not grasps", v.type_name()),
                    )
                })?;
                if within_workspace(g, &ctx.scene.workspace) {
                    out.push(v.clone());
                }
            }
            Ok(Value::List(out))
        }
        "find" => ctx
            .tools
            .find(&a.patch(0)?.patch, a.text(1)?)
            .map(|d| patches(&d))
            .map_err(tool),
        "find_part" => ctx
            .tools
            .find_part(&a.patch(0)?.patch, a.text(1)?)
            .map(|d| patches(&d))
            .map_err(tool),
        "grasp_detection" => ctx
            .tools
            .grasp_detection(&a.patch(0)?.patch)
            .map(|g| Value::List(g.into_iter().map(Value::Grasp).collect()))
            .map_err(tool),
        "exists" => ctx
            .tools
            .exists(&a.patch(0)?.patch, a.text(1)?)
            .map(Value::Bool)
            .map_err(tool),
        "verify_property" => ctx
            .tools
            .verify_property(&a.patch(0)?.patch, a.text(1)?, a.text(2)?)
            .map(Value::Bool)
            .map_err(tool),
        "best_image_match" => {
            let mut candidates = Vec::new();
            for v in a.list(0)? {
                candidates.push(v.as_patch().ok_or_else(|| {
                    type_err(
                        span,
                        format!(
                            "best_image_match: list holds {}, not patches",
                            v.type_name()
                        ),
                    )
                })?);
            }
            let input: Vec<ImagePatch> = candidates.iter().map(|d| d.patch.clone()).collect();
            let chosen = ctx
                .tools
                .best_image_match(&input, a.text(1)?)
                .map_err(tool)?;
            let origin = candidates.iter().find(|d| d.patch.bbox == chosen.bbox);
            Ok(Value::Patch(Detection {
                score: origin.map_or(1.0, |d| d.score),
                label: origin.map_or_else(String::new, |d| d.label.clone()),
                patch: chosen,
            }))
        }
        "compute_depth" => ctx
            .tools
            .compute_depth(&a.patch(0)?.patch)
            .map(Value::Number)
            .map_err(tool),
        "masks" => ctx
            .tools
            .masks(&a.patch(0)?.patch, a.text(1)?)
            .map(|m| Value::points(m.vertices()))
            .map_err(tool),
        "llm_query" => {
            let patch = if a.values.len() > 1 {
                Some(&a.patch(1)?.patch)
            } else {
                None
            };
            ctx.tools
                .llm_query(a.text(0)?, patch)
                .map(Value::Text)
                .map_err(tool)
        }
        other => Err(ScriptError::new(
            ErrorKind::Name,
            format!("unknown function `{other}`"),
            span,
        )),
    }
}
