//! Lexer and recursive-descent parser for the kernel language.
//!
//! Grammar (after `//` line comments are stripped):
//!
//! ```text
//! program := decl* stmt+
//! decl    := ("in" | "out" | "var") ident ":" "int" WIDTH ("[" INT "]")? ";"
//! stmt    := pragma* assign | for
//! pragma  := "#pragma HLS resource variable=" ident " core=Mul_LUT"
//! assign  := ident ("[" expr "]")? ("=" | "+=") expr ";"
//! for     := "for" ident "in" INT ".." INT "{" stmt+ "}"
//! expr    := prod ("+" prod)*
//! prod    := atom ("*" atom)*
//! atom    := INT | ident ("[" expr "]")?
//! ```
//!
//! `in`, `out`, `var`, and `for` are reserved words. Every error carries
//! the 1-based line and column where it was detected.

use super::ast::*;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

const RESERVED: [&str; 4] = ["in", "out", "var", "for"];

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Plus,
    PlusEq,
    Star,
    Assign,
    Semi,
    Colon,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    DotDot,
    /// Content of a `#...` line with the `#` stripped.
    PragmaLine(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(v) => write!(f, "integer `{v}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::PlusEq => write!(f, "`+=`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Assign => write!(f, "`=`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::DotDot => write!(f, "`..`"),
            Tok::PragmaLine(_) => write!(f, "directive line"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! push {
        ($tok:expr, $line:expr, $col:expr) => {
            tokens.push(Token {
                tok: $tok,
                line: $line,
                col: $col,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tok_line, tok_col) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                let mut content = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    content.push(c);
                    chars.next();
                    col += 1;
                }
                push!(Tok::PragmaLine(content[1..].trim().to_string()), tok_line, tok_col);
            }
            '/' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                        col += 1;
                    }
                } else {
                    return Err(ParseError {
                        line: tok_line,
                        col: tok_col,
                        message: "unexpected `/` (only `//` comments are supported)".to_string(),
                    });
                }
            }
            '+' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::PlusEq, tok_line, tok_col);
                } else {
                    push!(Tok::Plus, tok_line, tok_col);
                }
            }
            '*' => {
                chars.next();
                col += 1;
                push!(Tok::Star, tok_line, tok_col);
            }
            '=' => {
                chars.next();
                col += 1;
                push!(Tok::Assign, tok_line, tok_col);
            }
            ';' => {
                chars.next();
                col += 1;
                push!(Tok::Semi, tok_line, tok_col);
            }
            ':' => {
                chars.next();
                col += 1;
                push!(Tok::Colon, tok_line, tok_col);
            }
            '[' => {
                chars.next();
                col += 1;
                push!(Tok::LBracket, tok_line, tok_col);
            }
            ']' => {
                chars.next();
                col += 1;
                push!(Tok::RBracket, tok_line, tok_col);
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, tok_line, tok_col);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, tok_line, tok_col);
            }
            '.' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'.') {
                    chars.next();
                    col += 1;
                    push!(Tok::DotDot, tok_line, tok_col);
                } else {
                    return Err(ParseError {
                        line: tok_line,
                        col: tok_col,
                        message: "expected `..`".to_string(),
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        text.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let value = text.parse::<u64>().map_err(|_| ParseError {
                    line: tok_line,
                    col: tok_col,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                push!(Tok::Int(value), tok_line, tok_col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        text.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(text), tok_line, tok_col);
            }
            other => {
                return Err(ParseError {
                    line: tok_line,
                    col: tok_col,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    push!(Tok::Eof, line, col);
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_tok(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &Tok, context: &str) -> Result<Token, ParseError> {
        if self.peek_tok() == want {
            Ok(self.advance())
        } else {
            Err(self.error_here(format!("expected {want} {context}, found {}", self.peek_tok())))
        }
    }

    fn expect_ident(&mut self, context: &str) -> Result<(String, usize, usize), ParseError> {
        match self.peek_tok().clone() {
            Tok::Ident(name) => {
                let t = self.advance();
                Ok((name, t.line, t.col))
            }
            other => Err(self.error_here(format!("expected identifier {context}, found {other}"))),
        }
    }

    fn expect_int(&mut self, context: &str) -> Result<u64, ParseError> {
        match *self.peek_tok() {
            Tok::Int(v) => {
                self.advance();
                Ok(v)
            }
            ref other => {
                Err(self.error_here(format!("expected integer {context}, found {other}")))
            }
        }
    }

    fn at_decl_keyword(&self) -> bool {
        matches!(self.peek_tok(), Tok::Ident(s) if s == "in" || s == "out" || s == "var")
    }

    fn parse_program(&mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        while self.at_decl_keyword() {
            decls.push(self.parse_decl()?);
        }
        let mut stmts = Vec::new();
        while *self.peek_tok() != Tok::Eof {
            stmts.push(self.parse_stmt()?);
        }
        if stmts.is_empty() {
            return Err(self.error_here("program requires at least one statement"));
        }
        Ok(Program { decls, stmts })
    }

    fn parse_decl(&mut self) -> Result<Decl, ParseError> {
        let (kw, line, _) = self.expect_ident("declaration keyword")?;
        let kind = match kw.as_str() {
            "in" => DeclKind::In,
            "out" => DeclKind::Out,
            "var" => DeclKind::Var,
            _ => unreachable!("guarded by at_decl_keyword"),
        };
        let (name, name_line, name_col) = self.expect_ident("declaration name")?;
        if RESERVED.contains(&name.as_str()) {
            return Err(ParseError {
                line: name_line,
                col: name_col,
                message: format!("`{name}` is a reserved word"),
            });
        }
        self.expect(&Tok::Colon, "after declaration name")?;
        let (ty, ty_line, ty_col) = self.expect_ident("type")?;
        let width_text = ty.strip_prefix("int").ok_or(ParseError {
            line: ty_line,
            col: ty_col,
            message: format!("expected `intN` type, found `{ty}`"),
        })?;
        let width = width_text.parse::<u64>().map_err(|_| ParseError {
            line: ty_line,
            col: ty_col,
            message: format!("expected `intN` type, found `{ty}`"),
        })?;
        let array_len = if *self.peek_tok() == Tok::LBracket {
            self.advance();
            let len = self.expect_int("array length")?;
            self.expect(&Tok::RBracket, "after array length")?;
            Some(len)
        } else {
            None
        };
        self.expect(&Tok::Semi, "after declaration")?;
        Ok(Decl {
            kind,
            name,
            width,
            array_len,
            line,
        })
    }

    fn parse_pragma_line(&mut self) -> Result<PragmaDirective, ParseError> {
        let token = self.advance();
        let Tok::PragmaLine(content) = token.tok else {
            unreachable!("caller checked");
        };
        let parts: Vec<&str> = content.split_whitespace().collect();
        let bad = |message: String| ParseError {
            line: token.line,
            col: token.col,
            message,
        };
        if parts.len() != 5
            || parts[0] != "pragma"
            || parts[1] != "HLS"
            || parts[2] != "resource"
        {
            return Err(bad(format!(
                "unsupported directive `#{content}`; expected `#pragma HLS resource variable=<name> core=Mul_LUT`"
            )));
        }
        let var = parts[3].strip_prefix("variable=").ok_or_else(|| {
            bad(format!("expected `variable=<name>`, found `{}`", parts[3]))
        })?;
        if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(bad(format!("bad variable name `{var}` in directive")));
        }
        if parts[4] != "core=Mul_LUT" {
            return Err(bad(format!(
                "unsupported core `{}`; only `core=Mul_LUT` is recognized",
                parts[4]
            )));
        }
        Ok(PragmaDirective {
            var: var.to_string(),
            line: token.line,
        })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let mut pragmas = Vec::new();
        while matches!(self.peek_tok(), Tok::PragmaLine(_)) {
            pragmas.push(self.parse_pragma_line()?);
        }
        if matches!(self.peek_tok(), Tok::Ident(s) if s == "for") {
            if let Some(p) = pragmas.first() {
                return Err(ParseError {
                    line: p.line,
                    col: 1,
                    message: "directive must precede an assignment, not a loop".to_string(),
                });
            }
            return self.parse_for().map(Stmt::For);
        }
        if self.at_decl_keyword() {
            return Err(self.error_here("declarations must precede statements"));
        }
        let (target, line, _) = self.expect_ident("assignment target")?;
        let index = if *self.peek_tok() == Tok::LBracket {
            self.advance();
            let idx = self.parse_expr()?;
            self.expect(&Tok::RBracket, "after index expression")?;
            Some(idx)
        } else {
            None
        };
        let accumulate = match self.peek_tok() {
            Tok::Assign => {
                self.advance();
                false
            }
            Tok::PlusEq => {
                self.advance();
                true
            }
            other => {
                return Err(self.error_here(format!("expected `=` or `+=`, found {other}")));
            }
        };
        let expr = self.parse_expr()?;
        self.expect(&Tok::Semi, "after statement")?;
        Ok(Stmt::Assign(AssignStmt {
            target,
            index,
            accumulate,
            expr,
            pragmas,
            line,
        }))
    }

    fn parse_for(&mut self) -> Result<ForStmt, ParseError> {
        let (_, line, _) = self.expect_ident("`for`")?;
        let (var, var_line, var_col) = self.expect_ident("loop variable")?;
        if RESERVED.contains(&var.as_str()) {
            return Err(ParseError {
                line: var_line,
                col: var_col,
                message: format!("`{var}` is a reserved word"),
            });
        }
        match self.peek_tok().clone() {
            Tok::Ident(s) if s == "in" => {
                self.advance();
            }
            other => return Err(self.error_here(format!("expected `in`, found {other}"))),
        }
        let start = self.expect_int("loop start")?;
        self.expect(&Tok::DotDot, "between loop bounds")?;
        let end = self.expect_int("loop end")?;
        self.expect(&Tok::LBrace, "to open loop body")?;
        let mut body = Vec::new();
        while *self.peek_tok() != Tok::RBrace {
            if *self.peek_tok() == Tok::Eof {
                return Err(self.error_here("unterminated loop body"));
            }
            body.push(self.parse_stmt()?);
        }
        if body.is_empty() {
            return Err(self.error_here("loop body requires at least one statement"));
        }
        self.expect(&Tok::RBrace, "to close loop body")?;
        Ok(ForStmt {
            var,
            start,
            end,
            body,
            line,
        })
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_prod()?;
        while *self.peek_tok() == Tok::Plus {
            self.advance();
            let rhs = self.parse_prod()?;
            lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_prod(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_atom()?;
        while *self.peek_tok() == Tok::Star {
            self.advance();
            let rhs = self.parse_atom()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek_tok().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Const(v))
            }
            Tok::Ident(name) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(self.error_here(format!("`{name}` is a reserved word")));
                }
                self.advance();
                if *self.peek_tok() == Tok::LBracket {
                    self.advance();
                    let idx = self.parse_expr()?;
                    self.expect(&Tok::RBracket, "after index expression")?;
                    Ok(Expr::Index(name, Box::new(idx)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => Err(self.error_here(format!("expected expression, found {other}"))),
        }
    }
}

/// Parses kernel source into an AST. Errors carry 1-based line/column.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let tokens = lex(src)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.parse_program()
}
