//! Text format for scenarios: parsing with positioned diagnostics, lowering
//! to a compiled scenario, and printing back to canonical text.

pub mod ast;
pub mod diagnostic;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod printer;

pub use ast::ScenarioSpec;
pub use diagnostic::{render, Code, Diagnostic, Severity, Span};
pub use lower::{compile, compile_spec, from_def, lower, Compiled};
pub use parser::parse;
pub use printer::serialize;
