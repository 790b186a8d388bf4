use super::ast::{Block, Expr, ExprKind, Program, Stmt, StmtKind, UnaryOp, PREC_POSTFIX};
use super::lexer::escape;
use std::fmt::Write as _;

const INDENT: &str = "    ";

/// Canonical source text: one statement per line, four-space blocks,
/// minimal parentheses.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.statements {
        write_stmt(&mut out, stmt, 0);
    }
    out
}

pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr);
    out
}

fn write_block(out: &mut String, block: &Block, depth: usize) {
    out.push_str("{\n");
    for stmt in &block.statements {
        write_stmt(out, stmt, depth + 1);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    out.push_str(&INDENT.repeat(depth));
    match &stmt.kind {
        StmtKind::Let { name, value } => {
            let _ = write!(out, "let {name} = ");
            write_expr(out, value);
            out.push(';');
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            out.push_str("if ");
            write_expr(out, cond);
            out.push(' ');
            write_block(out, then_block, depth);
            if let Some(b) = else_block {
                out.push_str(" else ");
                write_block(out, b, depth);
            }
        }
        StmtKind::For { var, iter, body } => {
            let _ = write!(out, "for {var} in ");
            write_expr(out, iter);
            out.push(' ');
            write_block(out, body, depth);
        }
        StmtKind::Return(e) => {
            out.push_str("return ");
            write_expr(out, e);
            out.push(';');
        }
        StmtKind::Log(e) => {
            out.push_str("log(");
            write_expr(out, e);
            out.push_str(");");
        }
    }
    out.push('\n');
}

fn write_wrapped(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
    }
    write_expr(out, e);
    if parens {
        out.push(')');
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Number(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Str(s) => out.push_str(&escape(s)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Null => out.push_str("null"),
        ExprKind::Ident(name) => out.push_str(name),
        ExprKind::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        ExprKind::Index { target, index } => {
            write_wrapped(out, target, target.precedence() < PREC_POSTFIX);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(match op {
                UnaryOp::Not => "not ",
                UnaryOp::Neg => "-",
            });
            write_wrapped(out, operand, operand.precedence() < PREC_POSTFIX);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            // comparisons are non-associative; everything else is left-associative
            let cmp = p == 3;
            write_wrapped(
                out,
                lhs,
                lhs.precedence() < p || (cmp && lhs.precedence() == p),
            );
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, rhs, rhs.precedence() <= p);
        }
    }
}
