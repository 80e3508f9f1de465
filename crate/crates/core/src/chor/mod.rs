//! Choreography syntax and static analyses.

pub mod analysis;
pub mod ast;

pub use analysis::{
    check_annotations, check_well_formed, h_mods, nodes, s_conn, s_conn_violation, AnalysisError, AnnotationError,
    ConnViolation, Diagnostic, DiagnosticKind,
};
pub use ast::{Branch, ChorProgram, ChorTerm, Definitions, Interaction};
