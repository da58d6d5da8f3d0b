//! Mini hardware-kernel language: parse source, lower it to the graph IR,
//! emit source back from a graph, and execute programs two independent
//! ways for cross-checking.
//!
//! A kernel declares scalar or array values (`in`/`out`/`var`, each with an
//! `intN` width in 2..=32), then computes with `+`, `*`, `+=` accumulation,
//! and fully unrolled `for` loops. A `#pragma HLS resource variable=<v>
//! core=Mul_LUT` line before an assignment flags that statement's
//! multiplier for LUT mapping, which lowering records on the graph node.

pub mod ast;
pub mod emit;
pub mod interp;
pub mod lower;
pub mod parser;

pub use ast::Program;
pub use emit::emit_code;
pub use interp::{eval_dfg, eval_program, InterpError};
pub use lower::{
    lower, InputBinding, InputSource, LowerError, Lowered, OutputBinding, OutputSink,
};
pub use parser::{parse, ParseError};
