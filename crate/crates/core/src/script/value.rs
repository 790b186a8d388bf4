use crate::geometry::{GraspRect, Point};
use crate::toolset::Detection;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A runtime value. Lists produced by builtins are homogeneous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Number(f64),
    Text(String),
    Bool(bool),
    Patch(Detection),
    Grasp(GraspRect),
    List(Vec<Value>),
    Null,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Text(_) => "text",
            Value::Bool(_) => "bool",
            Value::Patch(_) => "patch",
            Value::Grasp(_) => "grasp",
            Value::List(_) => "list",
            Value::Null => "null",
        }
    }

    pub fn as_grasp(&self) -> Option<&GraspRect> {
        match self {
            Value::Grasp(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_patch(&self) -> Option<&Detection> {
        match self {
            Value::Patch(p) => Some(p),
            _ => None,
        }
    }

    /// Center of a patch or grasp.
    pub fn center(&self) -> Option<Point> {
        match self {
            Value::Patch(d) => Some(d.patch.bbox.center()),
            Value::Grasp(g) => Some(g.center()),
            _ => None,
        }
    }

    pub fn points(points: &[Point]) -> Value {
        Value::List(
            points
                .iter()
                .map(|p| Value::List(vec![Value::Number(p.x), Value::Number(p.y)]))
                .collect(),
        )
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Patch(d) => write!(f, "patch({}, {}, score={})", d.label, d.patch.bbox, d.score),
            Value::Grasp(g) => write!(f, "{g}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match v {
                        Value::Text(s) => write!(f, "{s:?}")?,
                        other => write!(f, "{other}")?,
                    }
                }
                f.write_str("]")
            }
            Value::Null => f.write_str("null"),
        }
    }
}
