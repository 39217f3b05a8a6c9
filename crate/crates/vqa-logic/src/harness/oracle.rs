//! Direct set-semantics execution of functional programs over a scene graph.
//!
//! The reference executor: no facts, no rules, no unification. Every node
//! evaluates to an explicit value — an object set, a single object, an
//! integer, a boolean, or an attribute word — by walking the scene graph.
//! The logic pipeline must agree with this executor on every question; it is
//! the independent ground truth that the compiler and engine are tested
//! against.

use crate::compile::{op_of, CompileError, FunctionalProgram, Op};
use crate::infer::Answer;
use crate::scene::SceneGraph;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("unsupported operation `{0}`")]
    UnsupportedOperation(String),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("`unique` on node {node} found {size} objects instead of one")]
    NonUnique { node: usize, size: usize },
}

impl From<CompileError> for OracleError {
    fn from(error: CompileError) -> Self {
        match error {
            CompileError::UnsupportedOperation(op) => OracleError::UnsupportedOperation(op),
            CompileError::MalformedProgram(msg) => OracleError::Malformed(msg),
        }
    }
}

#[derive(Clone, Debug)]
enum NodeValue {
    Objects(BTreeSet<usize>),
    Object(usize),
    Int(u64),
    Bool(bool),
    Word(String),
}

/// Execute a functional program node by node over explicit object sets.
pub fn oracle_execute(
    scene: &SceneGraph,
    program: &FunctionalProgram,
) -> Result<Answer, OracleError> {
    let mut values: Vec<NodeValue> = Vec::with_capacity(program.nodes().len());

    for (index, node) in program.nodes().iter().enumerate() {
        let objects = |input: usize| -> Result<&BTreeSet<usize>, OracleError> {
            match &values[node.inputs[input]] {
                NodeValue::Objects(set) => Ok(set),
                other => Err(OracleError::Malformed(format!(
                    "`{}` needs an object set, found {other:?}",
                    node.function
                ))),
            }
        };
        let single = |input: usize| -> Result<usize, OracleError> {
            match &values[node.inputs[input]] {
                NodeValue::Object(id) => Ok(*id),
                other => Err(OracleError::Malformed(format!(
                    "`{}` needs a single object, found {other:?}",
                    node.function
                ))),
            }
        };
        let integer = |input: usize| -> Result<u64, OracleError> {
            match &values[node.inputs[input]] {
                NodeValue::Int(n) => Ok(*n),
                other => Err(OracleError::Malformed(format!(
                    "`{}` needs an integer, found {other:?}",
                    node.function
                ))),
            }
        };
        let attr = |id: usize, kind: &str| -> Result<String, OracleError> {
            scene
                .attribute(id, kind)
                .map(str::to_string)
                .ok_or_else(|| {
                    OracleError::Malformed(format!("object {id} has no `{kind}` attribute"))
                })
        };

        let value = match op_of(node)? {
            Op::Scene => NodeValue::Objects(scene.objects.iter().map(|o| o.id).collect()),
            Op::Filter(kind, wanted) => {
                let mut kept = BTreeSet::new();
                for &id in objects(0)? {
                    if scene.attribute(id, kind.as_str()) == Some(wanted.as_str()) {
                        kept.insert(id);
                    }
                }
                NodeValue::Objects(kept)
            }
            Op::Unique => {
                let set = objects(0)?;
                match set.len() {
                    1 => NodeValue::Object(*set.iter().next().expect("len is one")),
                    size => return Err(OracleError::NonUnique { node: index, size }),
                }
            }
            Op::Relate(name) => {
                let anchor = single(0)?;
                NodeValue::Objects(
                    scene
                        .relations
                        .iter()
                        .filter(|r| r.object == anchor && r.name == name)
                        .map(|r| r.subject)
                        .collect(),
                )
            }
            Op::Same(kind) => {
                let anchor = single(0)?;
                let wanted = attr(anchor, kind.as_str())?;
                NodeValue::Objects(
                    scene
                        .objects
                        .iter()
                        .filter(|o| {
                            o.id != anchor && o.attributes.get(kind.as_str()) == Some(&wanted)
                        })
                        .map(|o| o.id)
                        .collect(),
                )
            }
            Op::Count => NodeValue::Int(objects(0)?.len() as u64),
            Op::Exist => NodeValue::Bool(!objects(0)?.is_empty()),
            Op::EqualInteger => NodeValue::Bool(integer(0)? == integer(1)?),
            Op::GreaterThan => NodeValue::Bool(integer(0)? > integer(1)?),
            Op::LessThan => NodeValue::Bool(integer(0)? < integer(1)?),
            Op::EqualAttr(kind) => {
                let left = attr(single(0)?, kind.as_str())?;
                let right = attr(single(1)?, kind.as_str())?;
                NodeValue::Bool(left == right)
            }
            Op::QueryAttr(kind) => NodeValue::Word(attr(single(0)?, kind.as_str())?),
            Op::Union => NodeValue::Objects(objects(0)?.union(objects(1)?).copied().collect()),
            Op::Intersect => {
                NodeValue::Objects(objects(0)?.intersection(objects(1)?).copied().collect())
            }
        };
        values.push(value);
    }

    match values.pop().expect("programs are never empty") {
        NodeValue::Bool(true) => Ok(Answer::Yes),
        NodeValue::Bool(false) => Ok(Answer::No),
        NodeValue::Int(n) => Ok(Answer::Num(n)),
        NodeValue::Word(word) => Ok(Answer::Attr(word)),
        other => Err(OracleError::Malformed(format!(
            "program output {other:?} is not an answer"
        ))),
    }
}
