//! Action-based refactoring mining for Python commits.
//!
//! The pipeline decomposes a commit's code change into AST-level edit
//! actions and module-level slice actions, refines them into element-level
//! actions, and matches the result against declarative rules for 15
//! refactoring types (extract/inline/move/rename at module, class, method
//! and variable granularity).

pub mod action_refine;
pub mod config;
pub mod git_ingest;
pub mod module_level;
pub mod pipeline;
pub mod report;
pub mod rule_engine;
pub mod source_model;
pub mod tree_diff;

pub use config::Config;
pub use pipeline::{detect_commit, CommitAnalysis};
pub use report::{DetectionReport, MetricsReport, OracleEntry};
pub use rule_engine::{RefactoringInstance, RefactoringType};
pub use source_model::{AstTree, CodeElement, ElementKind, SourceFile};
