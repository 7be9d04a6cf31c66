//! A small JavaScript-subset VM built around lazy basic block versioning.
//!
//! Source goes through [`frontend`] and [`ir::lower`] into a block IR whose
//! dynamic checks are explicit terminators. [`bbv::Vm`] compiles and runs
//! specialized versions of those blocks on demand; [`refinterp`] is a plain
//! AST interpreter used as the semantic reference.

pub mod bbv;
pub mod cli;
pub mod corpus;
pub mod frontend;
pub mod fuzz;
pub mod ir;
pub mod oracle;
pub mod refinterp;
pub mod runtime;
pub mod shapes;
pub mod stats;
pub mod typesys;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Frontend(#[from] frontend::FrontendError),
    #[error("{path}: {source}")]
    Lower {
        path: String,
        #[source]
        source: ir::LowerError,
    },
}

/// Parses and lowers one program.
pub fn compile(path: &str, source: &str) -> Result<ir::Module, CompileError> {
    let program = frontend::parse_program(path, source)?;
    ir::lower(&program).map_err(|source| CompileError::Lower { path: path.to_string(), source })
}
