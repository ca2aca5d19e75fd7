//! Configuration, orchestration and persistence behind the `varspde` binary.

pub mod config;
pub mod dump;
pub mod expr;
pub mod run;

pub use config::{validate, ExperimentKind, Issue, RunConfig};
pub use dump::{read_dump, write_dump, Dump};
pub use expr::{Expr, Scope};
pub use run::{execute, run, solve_ensemble, OutputFile, RunFailure, RunManifest};
