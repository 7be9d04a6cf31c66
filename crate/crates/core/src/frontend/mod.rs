//! Lexing and parsing of the JavaScript subset.
//!
//! The accepted language covers function declarations and expressions, `var`,
//! `if`/`else`, `while`, `return`, a fatal `throw`, object and array literals,
//! `new`, property and index access, method calls, the usual arithmetic,
//! comparison and logical operators, and compound assignment. Semicolons are
//! mandatory.

pub mod analysis;
pub mod ast;
pub mod lexer;
pub mod parser;
pub mod unparse;

use std::path::Path;

use thiserror::Error;

pub use ast::Program;
pub use lexer::tokenize;
pub use unparse::unparse;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: lex error: {message}")]
    Lex { line: u32, col: u32, message: String },
    #[error("{line}:{col}: parse error: expected {}, found {found}", expected.join(" or "))]
    Parse { line: u32, col: u32, expected: Vec<String>, found: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: empty program")]
    Empty(String),
}

/// A source file, newline-normalized to LF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub path: String,
    pub source: String,
}

impl SourceProgram {
    pub fn new(path: impl Into<String>, source: &str) -> Result<Self, FrontendError> {
        let path = path.into();
        let source = source.replace("\r\n", "\n");
        if source.trim().is_empty() {
            return Err(FrontendError::Empty(path));
        }
        Ok(Self { path, source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FrontendError> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p)
            .map_err(|source| FrontendError::Io { path: p.display().to_string(), source })?;
        Self::new(p.display().to_string(), &text)
    }

    pub fn parse(&self) -> Result<Program, FrontendError> {
        parser::parse(&self.path, tokenize(&self.source)?)
    }
}

/// Tokenizes and parses `source` in one step.
pub fn parse_program(path: &str, source: &str) -> Result<Program, FrontendError> {
    SourceProgram::new(path, source)?.parse()
}

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;

    pub(crate) const SUM_SRC: &str = "function f(n) {\n    if (n == 0)\n        return 0;\n    else\n        return n + f(n-1);\n}\n";
    pub(crate) const ACCUM_SRC: &str = "function Accum() {\n    this.n = 0;\n    this.add = function id1(x) { this.n += x };\n    this.sub = function id2(x) { this.n -= x };\n}\n\nvar a = new Accum();\na.add(5);\n";

    #[test]
    fn recursive_sum_parses_to_if_on_equality() {
        let p = parse_program("f.js", SUM_SRC).unwrap();
        assert_eq!(p.body.len(), 1);
        let StmtKind::FunctionDecl(f) = &p.body[0].kind else { panic!("not a function") };
        assert_eq!(f.name.as_deref(), Some("f"));
        let StmtKind::If { cond, .. } = &f.body[0].kind else { panic!("not an if") };
        let ExprKind::Binary(BinOp::Eq, l, r) = &cond.kind else { panic!("not ==") };
        assert_eq!(l.kind, ExprKind::Ident("n".into()));
        assert_eq!(r.kind, ExprKind::Int(0));
    }

    #[test]
    fn accumulator_method_writes_have_distinct_ids() {
        let p = parse_program("accum.js", ACCUM_SRC).unwrap();
        let StmtKind::FunctionDecl(accum) = &p.body[0].kind else { panic!() };
        let mut ids = Vec::new();
        for s in &accum.body {
            if let StmtKind::Expr(Expr { kind: ExprKind::Assign { target, value, .. }, .. }) = &s.kind {
                if let (ExprKind::Member { .. }, ExprKind::Function(f)) = (&target.kind, &value.kind) {
                    ids.push(f.index);
                }
            }
        }
        assert_eq!(ids.len(), 2);
        assert_ne!(ids[0], ids[1]);
        assert_eq!(p.functions.len(), 3);
    }

    #[test]
    fn malformed_assignment_is_parse_error() {
        assert!(matches!(parse_program("x.js", "x = ;"), Err(FrontendError::Parse { line: 1, col: 5, .. })));
        assert!(matches!(parse_program("x.js", "  \n"), Err(FrontendError::Empty(_))));
    }

    #[test]
    fn precedence_ladder() {
        let p = parse_program("p.js", "x = a || b && c == d < e + f * -g;").unwrap();
        assert_eq!(unparse(&p).trim(), "x = (a || (b && (c == (d < (e + (f * (-g)))))));");
    }

    #[test]
    fn negative_literals_fold() {
        let p = parse_program("n.js", "x = -1 - -2.5;").unwrap();
        let StmtKind::Expr(e) = &p.body[0].kind else { panic!() };
        let ExprKind::Assign { value, .. } = &e.kind else { panic!() };
        let ExprKind::Binary(BinOp::Sub, l, r) = &value.kind else { panic!() };
        assert_eq!(l.kind, ExprKind::Int(-1));
        assert_eq!(r.kind, ExprKind::Float(-2.5));
    }

    #[test]
    fn srclocs_inside_file() {
        let p = parse_program("f.js", ACCUM_SRC).unwrap();
        let lines = ACCUM_SRC.lines().count() as u32;
        let mut all = Vec::new();
        for f in &p.functions {
            walk_exprs(&f.body, &mut |e| all.push(e.span));
        }
        walk_exprs(&p.body, &mut |e| all.push(e.span));
        assert!(!all.is_empty());
        for s in all {
            assert!(s.line >= 1 && s.line <= lines && s.col >= 1, "{s:?}");
        }
    }
}
