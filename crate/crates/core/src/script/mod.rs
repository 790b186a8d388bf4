//! GraspScript, the small plan language that coder agents write.
//!
//! ```text
//! program := stmt* ;
//! stmt    := "let" IDENT "=" expr ";" | "if" expr block ["else" block]
//!          | "for" IDENT "in" expr block | "return" expr ";" | "log" "(" expr ")" ";" ;
//! block   := "{" stmt* "}" ;
//! expr    := or_expr ;   or_expr := and_expr {"or" and_expr} ;   and_expr := cmp {"and" cmp} ;
//! cmp     := add [("=="|"!="|"<"|"<="|">"|">=") add] ;
//! add     := mul {("+"|"-") mul} ;   mul := unary {("*"|"/") unary} ;
//! unary   := ["not"|"-"] postfix ;   postfix := primary {"[" expr "]"} ;
//! primary := NUMBER | STRING | "true" | "false" | "null" | IDENT
//!          | IDENT "(" [expr {"," expr}] ")" | "(" expr ")" ;
//! ```
//!
//! Names must be bound before use; this is checked when parsing. `let` on a
//! name that is already visible updates that binding, otherwise it creates
//! one in the current block. `image` is pre-bound to the whole scene.
//!
//! Execution is sandboxed: the only effects are tool calls on the supplied
//! backend, and every run is capped by a step budget.

pub mod ast;
pub mod builtins;
mod interp;
pub mod lexer;
mod parser;
mod printer;
mod value;

pub use ast::{Program, Span};
pub use interp::{
    execute, run_source, Artifact, ErrorKind, ExecutionReport, ScriptError, DEFAULT_BUDGET,
    MAX_TEXT_LEN,
};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse, parse_tokens, ParseError, ParseErrorKind, MAX_DEPTH};
pub use printer::{pretty_print, print_expr};
pub use value::Value;
