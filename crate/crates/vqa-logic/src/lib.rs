//! Visual question answering by predicate-logic inference over scene graphs.
//!
//! The pipeline has three deterministic stages:
//!
//! 1. [`scene`] turns a scene graph into ground background facts
//!    (`object/1`, `attribute/3`, `relation/3`).
//! 2. [`compile`] turns a question's functional program into a stratified
//!    rule program ending in a `target` rule; [`sentence`] serializes rule
//!    programs to a one-line textual encoding and parses them back, which is
//!    the seam where a learned question-to-sentence translator can plug in.
//! 3. [`infer`] checks satisfiability of the target rule against the facts
//!    and extracts the answer: yes/no for boolean targets, the unique
//!    grounding for counting and attribute queries, and NULL for anything
//!    that fails along the way.
//!
//! [`harness`] runs the pipeline over dataset files, scores the answers per
//! question family, and hosts the independent set-semantics executor
//! ([`harness::oracle`]) that the logic path is validated against.

pub mod compile;
pub mod harness;
pub mod infer;
pub mod logic;
pub mod scene;
pub mod sentence;

pub use compile::{CompileError, FunctionalProgram, ProgramNode, QuestionFamily, QuestionRecord};
pub use harness::{EvalReport, ReportFormat, RunOptions, RunSummary, Tally};
pub use infer::{Answer, EvalError, Evaluation, SolutionSet};
pub use logic::{
    AnswerKind, Atom, AttrKind, Constant, Predicate, ProgramError, Rule, RuleProgram, Substitution,
    Term,
};
pub use scene::{FactBase, MalformedScene, ObjectRecord, SceneGraph, SceneRelation};
pub use sentence::{ParseError, TargetSentence, UnencodableProgram};
