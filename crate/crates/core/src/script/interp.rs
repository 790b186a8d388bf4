use super::ast::{BinaryOp, Expr, ExprKind, Program, Span, Stmt, StmtKind, UnaryOp};
use super::builtins::{self, Context};
use super::parser::{parse, ParseErrorKind};
use super::value::Value;
use crate::geometry::within_workspace;
use crate::scene::{describe, BBox, Scene};
use crate::toolset::{Detection, ToolBackend};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub const DEFAULT_BUDGET: u64 = 10_000;

/// Longest text value a program may build, in bytes.
pub const MAX_TEXT_LEN: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Parse,
    Type,
    Name,
    Index,
    Tool,
    Budget,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Parse => "parse",
            ErrorKind::Type => "type",
            ErrorKind::Name => "name",
            ErrorKind::Index => "index",
            ErrorKind::Tool => "tool",
            ErrorKind::Budget => "budget",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptError {
    pub kind: ErrorKind,
    pub message: String,
    pub span: Span,
}

impl ScriptError {
    pub fn new(kind: ErrorKind, message: impl Into<String>, span: Span) -> Self {
        Self {
            kind,
            message: message.into(),
            span,
        }
    }
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}] at {}: {}", self.kind, self.span, self.message)
    }
}

impl std::error::Error for ScriptError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub label: String,
    pub text: String,
}

/// Everything observable about one program run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    /// Top-level bindings at the point execution stopped.
    pub bindings: BTreeMap<String, Value>,
    pub logs: Vec<String>,
    pub result: Option<Value>,
    pub error: Option<ScriptError>,
    pub steps_used: u64,
    pub artifacts: Vec<Artifact>,
}

impl ExecutionReport {
    pub fn from_error(error: ScriptError) -> Self {
        Self {
            error: Some(error),
            ..Self::default()
        }
    }

    /// The program's answer: the `grasp` binding, else a returned grasp.
    pub fn grasp(&self) -> Option<crate::geometry::GraspRect> {
        self.bindings
            .get("grasp")
            .and_then(Value::as_grasp)
            .or_else(|| self.result.as_ref().and_then(Value::as_grasp))
            .copied()
    }
}

enum Flow {
    Next,
    Return(Value),
}

struct Interpreter<'a> {
    ctx: Context<'a>,
    budget: u64,
    steps: u64,
    scopes: Vec<BTreeMap<String, Value>>,
    logs: Vec<String>,
    artifacts: Vec<Artifact>,
}

type EResult<T> = Result<T, ScriptError>;

fn type_err(span: Span, message: String) -> ScriptError {
    ScriptError::new(ErrorKind::Type, message, span)
}

impl Interpreter<'_> {
    fn tick(&mut self, span: Span) -> EResult<()> {
        if self.steps >= self.budget {
            return Err(ScriptError::new(
                ErrorKind::Budget,
                format!("step budget of {} exhausted", self.budget),
                span,
            ));
        }
        self.steps += 1;
        Ok(())
    }

    fn lookup(&self, name: &str, span: Span) -> EResult<Value> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .cloned()
            .ok_or_else(|| {
                ScriptError::new(ErrorKind::Name, format!("`{name}` is not defined"), span)
            })
    }

    fn assign(&mut self, name: &str, value: Value) {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.get_mut(name) {
                *slot = value;
                return;
            }
        }
        self.scopes
            .last_mut()
            .expect("scope stack is never empty")
            .insert(name.to_string(), value);
    }

    fn run_block(&mut self, stmts: &[Stmt], scope: BTreeMap<String, Value>) -> EResult<Flow> {
        self.scopes.push(scope);
        let flow = self.run_stmts(stmts);
        self.scopes.pop();
        flow
    }

    fn run_stmts(&mut self, stmts: &[Stmt]) -> EResult<Flow> {
        for stmt in stmts {
            if let Flow::Return(v) = self.stmt(stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn condition(&mut self, e: &Expr, what: &str) -> EResult<bool> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            other => Err(type_err(
                e.span,
                format!("{what} must be bool, got {}", other.type_name()),
            )),
        }
    }

    fn stmt(&mut self, stmt: &Stmt) -> EResult<Flow> {
        self.tick(stmt.span)?;
        match &stmt.kind {
            StmtKind::Let { name, value } => {
                let v = self.eval(value)?;
                self.assign(name, v);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.condition(cond, "an `if` condition")? {
                    return self.run_block(&then_block.statements, BTreeMap::new());
                } else if let Some(b) = else_block {
                    return self.run_block(&b.statements, BTreeMap::new());
                }
            }
            StmtKind::For { var, iter, body } => {
                let items = match self.eval(iter)? {
                    Value::List(items) => items,
                    other => {
                        return Err(type_err(
                            iter.span,
                            format!("`for` needs a list, got {}", other.type_name()),
                        ));
                    }
                };
                for item in items {
                    let scope = BTreeMap::from([(var.clone(), item)]);
                    if let Flow::Return(v) = self.run_block(&body.statements, scope)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(e) => return Ok(Flow::Return(self.eval(e)?)),
            StmtKind::Log(e) => {
                let v = self.eval(e)?;
                self.logs.push(v.to_string());
                self.collect_artifacts(&v);
            }
        }
        Ok(Flow::Next)
    }

    fn collect_artifacts(&mut self, v: &Value) {
        match v {
            Value::Patch(d) => self.artifacts.push(patch_artifact(self.ctx.scene, d)),
            Value::Grasp(g) => {
                let (l, t, r, b) = g.aabb();
                let region = describe(self.ctx.scene, Some(BBox::new(l, t, r, b)));
                let reach = within_workspace(g, &self.ctx.scene.workspace);
                self.artifacts.push(Artifact {
                    label: "grasp".into(),
                    text: format!("{g} in_workspace={reach}\n{region}"),
                });
            }
            Value::List(items) => items.iter().for_each(|i| self.collect_artifacts(i)),
            _ => {}
        }
    }

    fn eval(&mut self, e: &Expr) -> EResult<Value> {
        self.tick(e.span)?;
        match &e.kind {
            ExprKind::Number(n) => Ok(Value::Number(*n)),
            ExprKind::Str(s) => Ok(Value::Text(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::Ident(name) => self.lookup(name, e.span),
            ExprKind::Call { name, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a)?);
                }
                builtins::call(&self.ctx, name, values, e.span)
            }
            ExprKind::Index { target, index } => {
                let t = self.eval(target)?;
                let i = self.eval(index)?;
                index_value(t, i, e.span)
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Number(n)) => Ok(Value::Number(-n)),
                    (UnaryOp::Not, v) => Err(type_err(
                        e.span,
                        format!("`not` needs a bool, got {}", v.type_name()),
                    )),
                    (UnaryOp::Neg, v) => Err(type_err(
                        e.span,
                        format!("`-` needs a number, got {}", v.type_name()),
                    )),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => match op {
                BinaryOp::And | BinaryOp::Or => {
                    let l = self.condition(lhs, &format!("the left side of `{}`", op.symbol()))?;
                    if (*op == BinaryOp::And) != l {
                        return Ok(Value::Bool(l));
                    }
                    let r = self.condition(rhs, &format!("the right side of `{}`", op.symbol()))?;
                    Ok(Value::Bool(r))
                }
                _ => {
                    let l = self.eval(lhs)?;
                    let r = self.eval(rhs)?;
                    binary(*op, l, r, e.span)
                }
            },
        }
    }
}

fn patch_artifact(scene: &Scene, d: &Detection) -> Artifact {
    Artifact {
        label: if d.label.is_empty() {
            "patch".into()
        } else {
            d.label.clone()
        },
        text: describe(scene, Some(d.patch.bbox)),
    }
}

fn index_value(target: Value, index: Value, span: Span) -> EResult<Value> {
    let Value::List(items) = target else {
        return Err(type_err(
            span,
            format!("cannot index into {}", target.type_name()),
        ));
    };
    let Value::Number(n) = index else {
        return Err(type_err(
            span,
            format!("list index must be a number, got {}", index.type_name()),
        ));
    };
    if n.fract() != 0.0 || !n.is_finite() {
        return Err(type_err(
            span,
            format!("list index must be a whole number, got {n}"),
        ));
    }
    if n < 0.0 || n >= items.len() as f64 {
        return Err(ScriptError::new(
            ErrorKind::Index,
            format!(
                "index {n} out of range for a list of length {}",
                items.len()
            ),
            span,
        ));
    }
    Ok(items.into_iter().nth(n as usize).expect("bounds checked"))
}

fn binary(op: BinaryOp, l: Value, r: Value, span: Span) -> EResult<Value> {
    let mismatch = |l: &Value, r: &Value| {
        type_err(
            span,
            format!(
                "`{}` does not apply to {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ),
        )
    };
    match op {
        BinaryOp::Eq => Ok(Value::Bool(l == r)),
        BinaryOp::Ne => Ok(Value::Bool(l != r)),
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
                (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
                _ => None,
            }
            .ok_or_else(|| mismatch(&l, &r))?;
            Ok(Value::Bool(match op {
                BinaryOp::Lt => ord.is_lt(),
                BinaryOp::Le => ord.is_le(),
                BinaryOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinaryOp::Add => match (l, r) {
            (Value::Number(a), Value::Number(b)) => finite(a + b, span),
            (Value::Text(a), Value::Text(b)) => {
                if a.len() + b.len() > MAX_TEXT_LEN {
                    return Err(type_err(
                        span,
                        format!("text longer than {MAX_TEXT_LEN} bytes"),
                    ));
                }
                Ok(Value::Text(a + &b))
            }
            (l, r) => Err(mismatch(&l, &r)),
        },
        BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => match (l, r) {
            (Value::Number(_), Value::Number(b)) if op == BinaryOp::Div && b == 0.0 => {
                Err(type_err(span, "division by zero".into()))
            }
            (Value::Number(a), Value::Number(b)) => finite(
                match op {
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    _ => a / b,
                },
                span,
            ),
            (l, r) => Err(mismatch(&l, &r)),
        },
        BinaryOp::And | BinaryOp::Or => {
            unreachable!("short-circuit operators are evaluated lazily")
        }
    }
}

fn finite(n: f64, span: Span) -> EResult<Value> {
    if n.is_finite() {
        Ok(Value::Number(n))
    } else {
        Err(type_err(span, "arithmetic overflow".into()))
    }
}

/// Runs `program` against `tools`. Never fails: every error is recorded in
/// the report. `image` is bound to the whole scene.
pub fn execute(
    program: &Program,
    scene: &Scene,
    tools: &dyn ToolBackend,
    budget: u64,
) -> ExecutionReport {
    let image = Value::Patch(Detection {
        patch: scene.full_patch(),
        score: 1.0,
        label: "image".into(),
    });
    let mut interp = Interpreter {
        ctx: Context { scene, tools },
        budget,
        steps: 0,
        scopes: vec![BTreeMap::from([("image".to_string(), image)])],
        logs: Vec::new(),
        artifacts: Vec::new(),
    };
    let outcome = interp.run_stmts(&program.statements);
    let mut bindings = interp.scopes.swap_remove(0);
    bindings.remove("image");
    let (result, error) = match outcome {
        Ok(Flow::Return(v)) => (Some(v), None),
        Ok(Flow::Next) => (None, None),
        Err(e) => (None, Some(e)),
    };
    ExecutionReport {
        bindings,
        logs: interp.logs,
        result,
        error,
        steps_used: interp.steps,
        artifacts: interp.artifacts,
    }
}

/// Parses and executes `source`; parse failures become the report's error.
pub fn run_source(
    source: &str,
    scene: &Scene,
    tools: &dyn ToolBackend,
    budget: u64,
) -> ExecutionReport {
    match parse(source) {
        Ok(program) => execute(&program, scene, tools, budget),
        Err(e) => ExecutionReport::from_error(ScriptError::new(
            match e.kind {
                ParseErrorKind::Syntax => ErrorKind::Parse,
                ParseErrorKind::Name => ErrorKind::Name,
            },
            e.message,
            e.span,
        )),
    }
}
