//! Compilation of CLEVR functional programs into rule programs.
//!
//! A functional program is the dataset's chain of set-valued operations. Each
//! object-valued branch becomes a conjunction of body atoms sharing the
//! branch's output variable; branches are closed into named rules only when an
//! operation forces it (`count`, `exist`, `query_*`, comparison operands,
//! `union`). The operation map:
//!
//! * `scene` — a fresh object variable; emits `object(V)` only when the rule
//!   body would otherwise be empty.
//! * `filter_<t>[v]` — `attribute(V, t, v)`.
//! * `unique` — nothing; the dataset guarantees a singleton solution set.
//! * `relate[r]` — fresh `V2` with `relation(V2, V, r)` ("V2 is r of V").
//! * `same_<t>` — fresh `V2` with `same_<t>(V2, V)`.
//! * `count` — close the branch as `r<i>`, then `r<i+1>(C) :- count(r<i>(V), C)`.
//! * `exist` — close the branch; `target :- r<i>(V)`.
//! * `equal_integer`, `greater_than`, `less_than` — `target :- r<a>(C1),
//!   r<b>(C2), <cmp>(C1, C2)` over the operands' count rules.
//! * `equal_<t>` — `target :- r<a>(X), r<b>(Y), attribute(X, t, A1),
//!   attribute(Y, t, A2), same(A1, A2)`.
//! * `query_<t>` — `target(A) :- r<i>(X), attribute(X, t, A)`.
//! * `union` — two clauses with one shared head; `intersect` — both branches'
//!   atoms merged onto one variable.
//!
//! The atom that introduces a branch's output variable is kept first in the
//! body, with that variable in the leading argument slot, so the sentence
//! codec can recover rule heads by a first-variable scan.

use crate::logic::{AnswerKind, Atom, AttrKind, Predicate, Rule, RuleProgram, Substitution, Term};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// One operation node: `function` applied to earlier nodes, plus literal
/// arguments such as a filter value or a relation name.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
pub struct ProgramNode {
    #[serde(alias = "type")]
    pub function: String,
    #[serde(default)]
    pub inputs: Vec<usize>,
    #[serde(default, alias = "side_inputs")]
    pub value_inputs: Vec<String>,
}

impl ProgramNode {
    pub fn new(function: &str, inputs: Vec<usize>, value_inputs: Vec<&str>) -> Self {
        ProgramNode {
            function: function.to_string(),
            inputs,
            value_inputs: value_inputs.into_iter().map(String::from).collect(),
        }
    }
}

/// A question's operation DAG; the last node is the output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionalProgram {
    nodes: Vec<ProgramNode>,
}

/// Far beyond any real question; keeps compilation of hostile inputs from
/// recursing or expanding without bound.
const MAX_PROGRAM_NODES: usize = 1_000;

impl FunctionalProgram {
    pub fn new(nodes: Vec<ProgramNode>) -> Result<Self, CompileError> {
        if nodes.is_empty() {
            return Err(CompileError::MalformedProgram(
                "a program needs at least one node".into(),
            ));
        }
        if nodes.len() > MAX_PROGRAM_NODES {
            return Err(CompileError::MalformedProgram(format!(
                "program has {} nodes, limit is {MAX_PROGRAM_NODES}",
                nodes.len()
            )));
        }
        for (index, node) in nodes.iter().enumerate() {
            if node.inputs.iter().any(|&input| input >= index) {
                return Err(CompileError::MalformedProgram(format!(
                    "node {index} (`{}`) must only take inputs from earlier nodes",
                    node.function
                )));
            }
        }
        Ok(FunctionalProgram { nodes })
    }

    pub fn nodes(&self) -> &[ProgramNode] {
        &self.nodes
    }

    pub fn output(&self) -> &ProgramNode {
        self.nodes.last().expect("programs are never empty")
    }
}

/// The five question families, keyed by the output operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuestionFamily {
    Count,
    Exist,
    CompareNumber,
    CompareAttribute,
    QueryAttribute,
}

impl QuestionFamily {
    pub const ALL: [QuestionFamily; 5] = [
        QuestionFamily::Count,
        QuestionFamily::Exist,
        QuestionFamily::CompareNumber,
        QuestionFamily::CompareAttribute,
        QuestionFamily::QueryAttribute,
    ];
}

impl fmt::Display for QuestionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuestionFamily::Count => "Count",
            QuestionFamily::Exist => "Exist",
            QuestionFamily::CompareNumber => "Compare Number",
            QuestionFamily::CompareAttribute => "Compare Attribute",
            QuestionFamily::QueryAttribute => "Query Attribute",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("unsupported operation `{0}`")]
    UnsupportedOperation(String),
    #[error("malformed program: {0}")]
    MalformedProgram(String),
}

/// The supported operation vocabulary, with literal arguments attached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Scene,
    Filter(AttrKind, String),
    Unique,
    Relate(String),
    Same(AttrKind),
    Count,
    Exist,
    EqualInteger,
    GreaterThan,
    LessThan,
    EqualAttr(AttrKind),
    QueryAttr(AttrKind),
    Union,
    Intersect,
}

pub(crate) fn op_of(node: &ProgramNode) -> Result<Op, CompileError> {
    let name = node.function.as_str();
    let op = if let Some(kind) = name.strip_prefix("filter_").and_then(AttrKind::from_name) {
        Op::Filter(kind, expect_value(node)?)
    } else if let Some(kind) = name.strip_prefix("same_").and_then(AttrKind::from_name) {
        Op::Same(kind)
    } else if let Some(kind) = name.strip_prefix("equal_").and_then(AttrKind::from_name) {
        Op::EqualAttr(kind)
    } else if let Some(kind) = name.strip_prefix("query_").and_then(AttrKind::from_name) {
        Op::QueryAttr(kind)
    } else {
        match name {
            "scene" => Op::Scene,
            "unique" => Op::Unique,
            "relate" => Op::Relate(expect_value(node)?),
            "count" => Op::Count,
            "exist" => Op::Exist,
            "equal_integer" => Op::EqualInteger,
            "greater_than" => Op::GreaterThan,
            "less_than" => Op::LessThan,
            "union" => Op::Union,
            "intersect" => Op::Intersect,
            other => return Err(CompileError::UnsupportedOperation(other.to_string())),
        }
    };

    let expected_inputs = match op {
        Op::Scene => 0,
        Op::EqualInteger
        | Op::GreaterThan
        | Op::LessThan
        | Op::EqualAttr(_)
        | Op::Union
        | Op::Intersect => 2,
        _ => 1,
    };
    if node.inputs.len() != expected_inputs {
        return Err(CompileError::MalformedProgram(format!(
            "`{name}` takes {expected_inputs} input(s), found {}",
            node.inputs.len()
        )));
    }
    Ok(op)
}

fn expect_value(node: &ProgramNode) -> Result<String, CompileError> {
    match node.value_inputs.as_slice() {
        [value] => Ok(value.clone()),
        other => Err(CompileError::MalformedProgram(format!(
            "`{}` takes exactly one value input, found {}",
            node.function,
            other.len()
        ))),
    }
}

/// The question family, determined solely by the output operation.
pub fn classify(program: &FunctionalProgram) -> Result<QuestionFamily, CompileError> {
    match op_of(program.output())? {
        Op::Count => Ok(QuestionFamily::Count),
        Op::Exist => Ok(QuestionFamily::Exist),
        Op::EqualInteger | Op::GreaterThan | Op::LessThan => Ok(QuestionFamily::CompareNumber),
        Op::EqualAttr(_) => Ok(QuestionFamily::CompareAttribute),
        Op::QueryAttr(_) => Ok(QuestionFamily::QueryAttribute),
        _ => Err(CompileError::MalformedProgram(format!(
            "`{}` cannot be a question's output",
            program.output().function
        ))),
    }
}

/// An open object branch: its accumulated atoms and output variable. When the
/// atom list is non-empty, its first atom carries `out` in the leading
/// argument slot.
struct Branch {
    atoms: Vec<Atom>,
    out: String,
}

struct Compiler<'p> {
    program: &'p FunctionalProgram,
    rules: Vec<Rule>,
    next_rule: usize,
    next_var: usize,
}

const BRANCH_VARS: [&str; 4] = ["W", "X", "Y", "Z"];

impl<'p> Compiler<'p> {
    fn new(program: &'p FunctionalProgram) -> Self {
        Compiler {
            program,
            rules: Vec::new(),
            next_rule: 0,
            next_var: 0,
        }
    }

    fn fresh_var(&mut self) -> String {
        let n = self.next_var;
        self.next_var += 1;
        match BRANCH_VARS.get(n) {
            Some(name) => name.to_string(),
            None => format!("V{}", n - BRANCH_VARS.len() + 1),
        }
    }

    fn node(&self, index: usize) -> &'p ProgramNode {
        &self.program.nodes()[index]
    }

    /// Compile an object-set-valued node into an open branch.
    ///
    /// Shared nodes are re-expanded per use (safe, because `unique` nodes are
    /// singletons), so a crafted program could blow up exponentially; the
    /// variable counter caps that with an error instead.
    fn compile_set(&mut self, index: usize) -> Result<Branch, CompileError> {
        if self.next_var > 4 * MAX_PROGRAM_NODES {
            return Err(CompileError::MalformedProgram(
                "program expands beyond the compilation budget".into(),
            ));
        }
        let node = self.node(index);
        match op_of(node)? {
            Op::Scene => Ok(Branch {
                atoms: Vec::new(),
                out: self.fresh_var(),
            }),
            Op::Unique => self.compile_set(node.inputs[0]),
            Op::Filter(kind, value) => {
                let mut branch = self.compile_set(node.inputs[0])?;
                branch.atoms.push(Atom::attribute(
                    Term::var(&branch.out),
                    Term::word(kind.as_str()),
                    Term::word(value),
                ));
                Ok(branch)
            }
            Op::Relate(name) => {
                let branch = self.compile_set(node.inputs[0])?;
                let fresh = self.fresh_var();
                let mut atoms = vec![Atom::relation(
                    Term::var(&fresh),
                    Term::var(&branch.out),
                    Term::word(name),
                )];
                atoms.extend(branch.atoms);
                Ok(Branch { atoms, out: fresh })
            }
            Op::Same(kind) => {
                let branch = self.compile_set(node.inputs[0])?;
                let fresh = self.fresh_var();
                let mut atoms = vec![Atom::same_attr(
                    kind,
                    Term::var(&fresh),
                    Term::var(&branch.out),
                )];
                atoms.extend(branch.atoms);
                Ok(Branch { atoms, out: fresh })
            }
            Op::Intersect => {
                let mut left = self.compile_set(node.inputs[0])?;
                let right = self.compile_set(node.inputs[1])?;
                left.atoms
                    .extend(rename_var(right.atoms, &right.out, &left.out));
                Ok(left)
            }
            Op::Union => {
                let left = self.compile_set(node.inputs[0])?;
                let right = self.compile_set(node.inputs[1])?;
                let head_var = left.out.clone();
                let index = self.next_rule;
                self.next_rule += 1;
                let left_body = close_body(left.atoms, &head_var);
                let right_body =
                    rename_var(close_body(right.atoms, &right.out), &right.out, &head_var);
                let head = Atom::rule_ref(index, Term::var(&head_var));
                self.rules.push(Rule::new(head.clone(), left_body));
                self.rules.push(Rule::new(head, right_body));
                Ok(Branch {
                    atoms: vec![Atom::rule_ref(index, Term::var(&head_var))],
                    out: head_var,
                })
            }
            _ => Err(CompileError::MalformedProgram(format!(
                "`{}` does not produce an object set",
                node.function
            ))),
        }
    }

    /// Close a branch into a named rule, returning its index and head
    /// variable. A branch that is already a bare rule reference is reused;
    /// the reference then carries the rule's own head variable (intersection
    /// may have renamed the branch side), which is what the sentence codec
    /// reconstructs.
    fn close(&mut self, branch: Branch) -> (usize, String) {
        if let [Atom::App {
            pred: Predicate::RuleRef(existing),
            args,
        }] = branch.atoms.as_slice()
        {
            if args.first().and_then(Term::as_var) == Some(&branch.out) {
                let head_var = self
                    .rules
                    .iter()
                    .find(|rule| rule.head_index() == Some(*existing))
                    .and_then(Rule::head_var)
                    .expect("closed rules have variable heads")
                    .to_string();
                return (*existing, head_var);
            }
        }
        let index = self.next_rule;
        self.next_rule += 1;
        let body = close_body(branch.atoms, &branch.out);
        self.rules.push(Rule::new(
            Atom::rule_ref(index, Term::var(&branch.out)),
            body,
        ));
        (index, branch.out)
    }

    /// Compile a `count` node: close its branch and add the counting rule.
    fn compile_count(&mut self, index: usize) -> Result<usize, CompileError> {
        let node = self.node(index);
        if !matches!(op_of(node)?, Op::Count) {
            return Err(CompileError::MalformedProgram(format!(
                "`{}` does not produce a number; comparison operands must be counts",
                node.function
            )));
        }
        let branch = self.compile_set(node.inputs[0])?;
        let (inner, head_var) = self.close(branch);
        let count_index = self.next_rule;
        self.next_rule += 1;
        self.rules.push(Rule::new(
            Atom::rule_ref(count_index, Term::var("C")),
            vec![Atom::count(inner, Term::var(&head_var), Term::var("C"))],
        ));
        Ok(count_index)
    }
}

/// A closed rule body may not be empty: a bare `scene` branch gets the domain
/// predicate so its variable ranges over the universe.
fn close_body(atoms: Vec<Atom>, out: &str) -> Vec<Atom> {
    if atoms.is_empty() {
        vec![Atom::object(Term::var(out))]
    } else {
        atoms
    }
}

fn rename_var(atoms: Vec<Atom>, from: &str, to: &str) -> Vec<Atom> {
    if from == to {
        return atoms;
    }
    let rename: Substitution = [(from.to_string(), Term::var(to))].into_iter().collect();
    atoms.iter().map(|a| rename.apply(a)).collect()
}

/// Compile a functional program into a stratified rule program whose
/// evaluation over any fact base matches the program's set semantics.
pub fn compile(program: &FunctionalProgram) -> Result<RuleProgram, CompileError> {
    let mut compiler = Compiler::new(program);
    let output_index = program.nodes().len() - 1;
    let output = compiler.node(output_index);

    let (target, kind) = match op_of(output)? {
        Op::Count => {
            let count_rule = compiler.compile_count(output_index)?;
            let target = Rule::new(
                Atom::target(vec![Term::var("C")]),
                vec![Atom::rule_ref(count_rule, Term::var("C"))],
            );
            (target, AnswerKind::Numeric)
        }
        Op::Exist => {
            let branch = compiler.compile_set(output.inputs[0])?;
            let (rule, var) = compiler.close(branch);
            let target = Rule::new(
                Atom::target(vec![]),
                vec![Atom::rule_ref(rule, Term::var(&var))],
            );
            (target, AnswerKind::Boolean)
        }
        op @ (Op::EqualInteger | Op::GreaterThan | Op::LessThan) => {
            let left = compiler.compile_count(output.inputs[0])?;
            let right = compiler.compile_count(output.inputs[1])?;
            let comparison = match op {
                Op::GreaterThan => Atom::greater_than(Term::var("C1"), Term::var("C2")),
                Op::LessThan => Atom::lesser_than(Term::var("C1"), Term::var("C2")),
                _ => Atom::same(Term::var("C1"), Term::var("C2")),
            };
            let target = Rule::new(
                Atom::target(vec![]),
                vec![
                    Atom::rule_ref(left, Term::var("C1")),
                    Atom::rule_ref(right, Term::var("C2")),
                    comparison,
                ],
            );
            (target, AnswerKind::Boolean)
        }
        Op::EqualAttr(kind) => {
            let left = compiler.compile_set(output.inputs[0])?;
            let (left_rule, left_var) = compiler.close(left);
            let right = compiler.compile_set(output.inputs[1])?;
            let (right_rule, right_var) = compiler.close(right);
            let target = Rule::new(
                Atom::target(vec![]),
                vec![
                    Atom::rule_ref(left_rule, Term::var(&left_var)),
                    Atom::rule_ref(right_rule, Term::var(&right_var)),
                    Atom::attribute(
                        Term::var(&left_var),
                        Term::word(kind.as_str()),
                        Term::var("A1"),
                    ),
                    Atom::attribute(
                        Term::var(&right_var),
                        Term::word(kind.as_str()),
                        Term::var("A2"),
                    ),
                    Atom::same(Term::var("A1"), Term::var("A2")),
                ],
            );
            (target, AnswerKind::Boolean)
        }
        Op::QueryAttr(kind) => {
            let branch = compiler.compile_set(output.inputs[0])?;
            let (rule, var) = compiler.close(branch);
            let target = Rule::new(
                Atom::target(vec![Term::var("A")]),
                vec![
                    Atom::rule_ref(rule, Term::var(&var)),
                    Atom::attribute(Term::var(&var), Term::word(kind.as_str()), Term::var("A")),
                ],
            );
            (target, AnswerKind::AttributeQuery)
        }
        _ => {
            return Err(CompileError::MalformedProgram(format!(
                "`{}` cannot be a question's output",
                output.function
            )))
        }
    };

    let mut rules = compiler.rules;
    rules.push(target);
    RuleProgram::new(rules, kind).map_err(|e| CompileError::MalformedProgram(e.to_string()))
}

// --- questions JSON ------------------------------------------------------

/// One dataset question: the functional program plus scoring metadata.
#[derive(Clone, Debug, Deserialize)]
pub struct QuestionRecord {
    #[serde(default)]
    pub question: Option<String>,
    pub image_index: usize,
    pub program: Vec<ProgramNode>,
    #[serde(default, deserialize_with = "answer_as_string")]
    pub answer: Option<String>,
}

#[derive(Deserialize)]
struct QuestionsFile {
    questions: Vec<QuestionRecord>,
}

/// Parse a CLEVR questions document (top-level `questions` array).
pub fn questions_from_json(text: &str) -> Result<Vec<QuestionRecord>, serde_json::Error> {
    Ok(serde_json::from_str::<QuestionsFile>(text)?.questions)
}

/// Ground-truth answers appear as strings, numbers, or booleans depending on
/// the export; normalize them all to strings.
fn answer_as_string<'de, D>(deserializer: D) -> Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let value = Option::<serde_json::Value>::deserialize(deserializer)?;
    Ok(value.map(|v| match v {
        serde_json::Value::String(s) => s,
        serde_json::Value::Bool(true) => "yes".to_string(),
        serde_json::Value::Bool(false) => "no".to_string(),
        other => other.to_string(),
    }))
}
