//! Abstract syntax tree for the kernel language.
//!
//! The language is deliberately small: integer declarations (scalar or
//! fixed-length array), assignments and accumulations over `+`/`*`
//! expressions, constant-bound counted loops (fully unrolled at lowering),
//! and a resource directive line that marks the next statement's multiply
//! for LUT implementation.

/// Declaration class.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DeclKind {
    /// Kernel input, provided by the environment.
    In,
    /// Kernel output, must be assigned before the program ends.
    Out,
    /// Local value.
    Var,
}

/// `in|out|var name:intW;` or `... name:intW[LEN];`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    pub name: String,
    /// Declared width; lowering checks the `2..=32` range.
    pub width: u64,
    pub array_len: Option<u64>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(u64),
    Var(String),
    /// `name[index]`; the index must be constant after loop unrolling.
    Index(String, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

/// One `#pragma HLS resource variable=<var> core=Mul_LUT` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PragmaDirective {
    pub var: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignStmt {
    pub target: String,
    pub index: Option<Expr>,
    /// `true` for `+=` (append a term), `false` for `=` (replace).
    pub accumulate: bool,
    pub expr: Expr,
    pub pragmas: Vec<PragmaDirective>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForStmt {
    pub var: String,
    /// Half-open bounds `start..end`; `end <= start` runs zero iterations.
    pub start: u64,
    pub end: u64,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Assign(AssignStmt),
    For(ForStmt),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub stmts: Vec<Stmt>,
}
