use super::ast::{BinaryOp, Block, Expr, ExprKind, Program, Span, Stmt, StmtKind, UnaryOp};
use super::builtins;
use super::lexer::{tokenize, unescape, LexError, Token, TokenKind};
use std::collections::BTreeSet;
use std::fmt;

/// Deepest allowed nesting of blocks and expressions.
pub const MAX_DEPTH: usize = 64;

/// Names bound before the first statement runs.
pub const PRELUDE: [&str; 1] = ["image"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Name,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub span: Span,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError {
            kind: ParseErrorKind::Syntax,
            message: e.message,
            span: e.span,
        }
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    depth: usize,
    scopes: Vec<BTreeSet<String>>,
    eof: Span,
}

type PResult<T> = Result<T, ParseError>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> Span {
        self.peek().map_or(self.eof, |t| t.span)
    }

    fn prev(&self) -> Span {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map_or(self.eof, |t| t.span)
    }

    fn syntax(&self, message: String) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            message,
            span: self.here(),
        }
    }

    fn found(&self) -> String {
        self.peek()
            .map_or("end of input".to_string(), |t| t.to_string())
    }

    fn at(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, lexeme))
    }

    fn at_punct(&self, p: &str) -> bool {
        self.at(TokenKind::Punct, p)
    }

    fn at_kw(&self, k: &str) -> bool {
        self.at(TokenKind::Keyword, k)
    }

    fn eat(&mut self, kind: TokenKind, lexeme: &str) -> bool {
        if self.at(kind, lexeme) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, lexeme: &str) -> PResult<Span> {
        if self.at(kind, lexeme) {
            self.pos += 1;
            Ok(self.prev())
        } else {
            Err(self.syntax(format!("expected `{lexeme}`, found {}", self.found())))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok((t.lexeme.clone(), t.span))
            }
            _ => Err(self.syntax(format!("expected {what}, found {}", self.found()))),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax(format!("nesting deeper than {MAX_DEPTH} levels")));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn is_bound(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    // `let` rebinds the nearest enclosing binding, else binds in the current block.
    fn bind(&mut self, name: &str) {
        if !self.is_bound(name) {
            self.scopes
                .last_mut()
                .expect("scope stack is never empty")
                .insert(name.to_string());
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut statements = Vec::new();
        while self.peek().is_some() {
            statements.push(self.stmt()?);
        }
        Ok(Program { statements })
    }

    fn block(&mut self, bound: Option<&str>) -> PResult<Block> {
        self.enter()?;
        let open = self.expect(TokenKind::Punct, "{")?;
        let mut scope = BTreeSet::new();
        if let Some(name) = bound {
            scope.insert(name.to_string());
        }
        self.scopes.push(scope);
        let mut statements = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                return Err(self.syntax("expected `}`, found end of input".into()));
            }
            statements.push(self.stmt()?);
        }
        self.scopes.pop();
        let close = self.expect(TokenKind::Punct, "}")?;
        self.leave();
        Ok(Block {
            statements,
            span: open.to(close),
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.here();
        let kind = if self.eat(TokenKind::Keyword, "let") {
            let (name, _) = self.expect_ident("a variable name after `let`")?;
            self.expect(TokenKind::Punct, "=")?;
            let value = self.expr()?;
            self.expect(TokenKind::Punct, ";")?;
            self.bind(&name);
            StmtKind::Let { name, value }
        } else if self.eat(TokenKind::Keyword, "if") {
            let cond = self.expr()?;
            let then_block = self.block(None)?;
            let else_block = if self.eat(TokenKind::Keyword, "else") {
                Some(self.block(None)?)
            } else {
                None
            };
            StmtKind::If {
                cond,
                then_block,
                else_block,
            }
        } else if self.eat(TokenKind::Keyword, "for") {
            let (var, _) = self.expect_ident("a loop variable after `for`")?;
            self.expect(TokenKind::Keyword, "in")?;
            let iter = self.expr()?;
            let body = self.block(Some(&var))?;
            StmtKind::For { var, iter, body }
        } else if self.eat(TokenKind::Keyword, "return") {
            if self.at_punct(";") {
                return Err(self.syntax("expected an expression after `return`".into()));
            }
            let value = self.expr()?;
            self.expect(TokenKind::Punct, ";")?;
            StmtKind::Return(value)
        } else if self.eat(TokenKind::Keyword, "log") {
            self.expect(TokenKind::Punct, "(")?;
            let value = self.expr()?;
            self.expect(TokenKind::Punct, ")")?;
            self.expect(TokenKind::Punct, ";")?;
            StmtKind::Log(value)
        } else {
            return Err(self.syntax(format!(
                "expected a statement (`let`, `if`, `for`, `return` or `log`), found {}",
                self.found()
            )));
        };
        Ok(Stmt {
            kind,
            span: start.to(self.prev()),
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let e = self.or_expr();
        self.leave();
        e
    }

    fn binary_chain(
        &mut self,
        ops: &[&str],
        kind: TokenKind,
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        while let Some(op) = ops.iter().find(|op| self.at(kind, op)) {
            self.pos += 1;
            let rhs = next(self)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary {
                    op: BinaryOp::from_symbol(op).expect("operator table is consistent"),
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        self.binary_chain(&["or"], TokenKind::Keyword, Self::and_expr)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        self.binary_chain(&["and"], TokenKind::Keyword, Self::cmp)
    }

    fn cmp(&mut self) -> PResult<Expr> {
        const CMP: [&str; 6] = ["==", "!=", "<=", ">=", "<", ">"];
        let lhs = self.add()?;
        let Some(op) = CMP.iter().find(|op| self.at_punct(op)) else {
            return Ok(lhs);
        };
        self.pos += 1;
        let rhs = self.add()?;
        if CMP.iter().any(|op| self.at_punct(op)) {
            return Err(self.syntax("comparison operators do not chain; add parentheses".into()));
        }
        let span = lhs.span.to(rhs.span);
        Ok(Expr {
            kind: ExprKind::Binary {
                op: BinaryOp::from_symbol(op).expect("operator table is consistent"),
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        })
    }

    fn add(&mut self) -> PResult<Expr> {
        self.binary_chain(&["+", "-"], TokenKind::Punct, Self::mul)
    }

    fn mul(&mut self) -> PResult<Expr> {
        self.binary_chain(&["*", "/"], TokenKind::Punct, Self::unary)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.here();
        let op = if self.eat(TokenKind::Keyword, "not") {
            UnaryOp::Not
        } else if self.eat(TokenKind::Punct, "-") {
            UnaryOp::Neg
        } else {
            return self.postfix();
        };
        if self.at_kw("not") || self.at_punct("-") {
            return Err(
                self.syntax("a unary operator cannot follow another; add parentheses".into())
            );
        }
        let operand = self.postfix()?;
        let span = start.to(operand.span);
        Ok(Expr {
            kind: ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
            span,
        })
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut target = self.primary()?;
        while self.eat(TokenKind::Punct, "[") {
            let index = self.expr()?;
            let close = self.expect(TokenKind::Punct, "]")?;
            let span = target.span.to(close);
            target = Expr {
                kind: ExprKind::Index {
                    target: Box::new(target),
                    index: Box::new(index),
                },
                span,
            };
        }
        Ok(target)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return Err(self.syntax("expected an expression, found end of input".into()));
        };
        let span = tok.span;
        let atom = |kind| Ok(Expr { kind, span });
        match tok.kind {
            TokenKind::Number => {
                self.pos += 1;
                let n: f64 = tok
                    .lexeme
                    .parse()
                    .map_err(|_| self.syntax(format!("bad number {}", tok.lexeme)))?;
                atom(ExprKind::Number(n))
            }
            TokenKind::String => {
                self.pos += 1;
                atom(ExprKind::Str(unescape(&tok.lexeme)))
            }
            TokenKind::Keyword => match tok.lexeme.as_str() {
                "true" | "false" => {
                    self.pos += 1;
                    atom(ExprKind::Bool(tok.lexeme == "true"))
                }
                "null" => {
                    self.pos += 1;
                    atom(ExprKind::Null)
                }
                _ => Err(self.syntax(format!("expected an expression, found {tok}"))),
            },
            TokenKind::Ident => {
                self.pos += 1;
                if self.at_punct("(") {
                    self.call(tok.lexeme.clone(), span)
                } else if self.is_bound(&tok.lexeme) {
                    atom(ExprKind::Ident(tok.lexeme.clone()))
                } else {
                    Err(ParseError {
                        kind: ParseErrorKind::Name,
                        message: format!("`{}` is used before it is defined", tok.lexeme),
                        span,
                    })
                }
            }
            TokenKind::Punct if tok.lexeme == "(" => {
                self.pos += 1;
                let mut inner = self.expr()?;
                let close = self.expect(TokenKind::Punct, ")")?;
                inner.span = span.to(close);
                Ok(inner)
            }
            TokenKind::Punct => Err(self.syntax(format!("expected an expression, found {tok}"))),
        }
    }

    fn call(&mut self, name: String, name_span: Span) -> PResult<Expr> {
        let Some((min, max)) = builtins::arity(&name) else {
            return Err(ParseError {
                kind: ParseErrorKind::Name,
                message: format!("unknown function `{name}`"),
                span: name_span,
            });
        };
        self.expect(TokenKind::Punct, "(")?;
        let mut args = Vec::new();
        if !self.at_punct(")") {
            args.push(self.expr()?);
            while self.eat(TokenKind::Punct, ",") {
                args.push(self.expr()?);
            }
        }
        let close = self.expect(TokenKind::Punct, ")")?;
        if args.len() < min || args.len() > max {
            let expected = if min == max {
                format!("{min}")
            } else {
                format!("{min} to {max}")
            };
            return Err(ParseError {
                kind: ParseErrorKind::Syntax,
                message: format!("`{name}` takes {expected} arguments, got {}", args.len()),
                span: name_span.to(close),
            });
        }
        Ok(Expr {
            kind: ExprKind::Call { name, args },
            span: name_span.to(close),
        })
    }
}

pub fn parse_tokens(tokens: &[Token], source_len: usize) -> Result<Program, ParseError> {
    let (line, column) = tokens.last().map_or((1, 1), |t| {
        (t.line, t.column + t.lexeme.chars().count() as u32)
    });
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
        scopes: vec![PRELUDE.iter().map(|s| s.to_string()).collect()],
        eof: Span {
            start: source_len,
            end: source_len,
            line,
            column,
        },
    };
    parser.program()
}

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    parse_tokens(&tokens, source.len())
}
