//! Recursion formulas for layered network architectures.
//!
//! A formula such as `X[i] = (1 + W[i])*X[i-1]` is parsed into an
//! [`ArchitectureSpec`], expanded into path polynomials, compiled into an
//! architecture graph, checked numerically against exact Jacobians, and the
//! resulting accuracy tables can be compared with Friedman/Nemenyi tests.

pub mod builtin;
pub mod expand;
pub mod graph;
pub mod numeric;
pub mod parser;
pub mod poly;
pub mod spec;
pub mod stats;

pub use builtin::Builtin;
pub use expand::{check_structure, CheckReport, Engine, ExpandError, StructureKind};
pub use graph::{
    build_graph, direct_propagation_check, export, structural_equal, ArchGraph, ExportFormat,
    GraphError, StructuralReport,
};
pub use parser::{parse, parse_named, ParseError, Position};
pub use poly::{PathPolynomial, StateExpansion, Word};
pub use spec::ArchitectureSpec;
