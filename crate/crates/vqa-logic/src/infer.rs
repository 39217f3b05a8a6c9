//! Bottom-up satisfiability checking of rule programs over a fact base.
//!
//! Rules are evaluated in head-index order — a valid stratification, since a
//! rule may only reference earlier rules — so every `count` aggregation sees a
//! complete solution set. Within a clause the body is solved left to right by
//! backtracking joins: base predicates look up facts, rule references draw
//! from already-computed solution sets, `same_<t>` enumerates object pairs
//! sharing an attribute value, and the comparison builtins (`same`,
//! `greater_than`, `lesser_than`) are delayed until their arguments are
//! ground. Iteration everywhere is id-sorted, so evaluation is deterministic.
//!
//! [`answer`] never fails: evaluation errors (and query targets without a
//! unique grounding) are reported as [`Answer::Null`] and logged.

use crate::logic::{
    self, AnswerKind, Atom, AttrKind, Constant, Predicate, Rule, RuleProgram, Substitution, Term,
};
use crate::scene::{FactBase, UnknownPredicate};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// The pipeline's output alphabet.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    Yes,
    No,
    Num(u64),
    Attr(String),
    Null,
}

impl Answer {
    /// Comparison against a dataset ground-truth string, case-insensitively.
    /// `Null` never matches anything.
    pub fn matches(&self, truth: &str) -> bool {
        !matches!(self, Answer::Null) && self.to_string() == truth.trim().to_ascii_lowercase()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => f.write_str("yes"),
            Answer::No => f.write_str("no"),
            Answer::Num(n) => write!(f, "{n}"),
            Answer::Attr(word) => f.write_str(word),
            Answer::Null => f.write_str("NULL"),
        }
    }
}

/// The ground head-argument tuples derived for one rule index. Tuples are
/// empty for the arity-0 target, singletons otherwise.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolutionSet {
    rule: usize,
    values: BTreeSet<Vec<Constant>>,
}

impl SolutionSet {
    pub fn rule(&self) -> usize {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Constant]> {
        self.values.iter().map(Vec::as_slice)
    }

    pub fn contains_value(&self, value: &Constant) -> bool {
        self.values.contains(&vec![value.clone()])
    }

    /// The single head value, when there is exactly one solution of arity 1.
    pub fn unique_value(&self) -> Option<&Constant> {
        if self.values.len() != 1 {
            return None;
        }
        match self.values.iter().next().map(Vec::as_slice) {
            Some([value]) => Some(value),
            _ => None,
        }
    }
}

impl fmt::Display for SolutionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, tuple) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match tuple.as_slice() {
                [] => write!(f, "()")?,
                [value] => write!(f, "{value}")?,
                many => {
                    write!(f, "(")?;
                    for (j, value) in many.iter().enumerate() {
                        if j > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{value}")?;
                    }
                    write!(f, ")")?;
                }
            }
        }
        write!(f, "}}")
    }
}

/// Solution sets for every rule of a program, target included.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub body: Vec<SolutionSet>,
    pub target: SolutionSet,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("builtin `{0}` never became ground")]
    NonGroundBuiltin(String),
    #[error("head variable {0} was not grounded by the body")]
    NonGroundHead(String),
    #[error("`{0}` is not an object id in this scene")]
    UnknownObject(Constant),
    #[error("numeric comparison on non-integer arguments: `{0}`")]
    NonNumericComparison(String),
    #[error("solutions for r{0} are not available yet")]
    MissingSolutions(usize),
    #[error(transparent)]
    UnknownPredicate(#[from] UnknownPredicate),
}

/// True iff `x` and `y` are distinct objects sharing their `kind` attribute
/// value. Both ids must be in the scene's universe.
pub fn same_attribute(fb: &FactBase, kind: AttrKind, x: u64, y: u64) -> Result<bool, EvalError> {
    for id in [x, y] {
        if !fb.contains_object(id) {
            return Err(EvalError::UnknownObject(Constant::Int(id)));
        }
    }
    let shared = match (
        fb.attribute_value(x, kind.as_str()),
        fb.attribute_value(y, kind.as_str()),
    ) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };
    Ok(x != y && shared)
}

/// Solutions of the clause group with head index `index`, given the solution
/// sets of all earlier rules.
pub fn eval_rule(
    fb: &FactBase,
    program: &RuleProgram,
    index: usize,
    prior: &[SolutionSet],
) -> Result<SolutionSet, EvalError> {
    let solver = Solver { fb, prior };
    let mut values = BTreeSet::new();
    for clause in program.clauses_of(index) {
        solver.solve_clause(clause, &mut values)?;
    }
    Ok(SolutionSet {
        rule: index,
        values,
    })
}

/// Evaluate every rule bottom-up, in index order, target last.
pub fn evaluate(fb: &FactBase, program: &RuleProgram) -> Result<Evaluation, EvalError> {
    let mut body = Vec::with_capacity(program.body_rule_count());
    for index in 0..program.body_rule_count() {
        let solutions = eval_rule(fb, program, index, &body)?;
        body.push(solutions);
    }
    let solver = Solver { fb, prior: &body };
    let mut values = BTreeSet::new();
    solver.solve_clause(program.target(), &mut values)?;
    let target = SolutionSet {
        rule: program.body_rule_count(),
        values,
    };
    Ok(Evaluation { body, target })
}

/// Evaluate a program and extract its answer. Evaluation errors, and query or
/// numeric targets without a unique grounding, become [`Answer::Null`].
pub fn answer(fb: &FactBase, program: &RuleProgram) -> Answer {
    match evaluate(fb, program) {
        Ok(evaluation) => extract_answer(program, &evaluation),
        Err(error) => {
            log::debug!("inference failed, answering NULL: {error}");
            Answer::Null
        }
    }
}

/// Like [`answer`], but also renders the per-rule solution trace.
pub fn answer_with_trace(fb: &FactBase, program: &RuleProgram) -> (Answer, String) {
    match evaluate(fb, program) {
        Ok(evaluation) => {
            let answer = extract_answer(program, &evaluation);
            (answer, render_trace(program, &evaluation))
        }
        Err(error) => (Answer::Null, format!("inference failed: {error}\n")),
    }
}

fn extract_answer(program: &RuleProgram, evaluation: &Evaluation) -> Answer {
    match program.answer_kind() {
        AnswerKind::Boolean => {
            if evaluation.target.is_empty() {
                Answer::No
            } else {
                Answer::Yes
            }
        }
        AnswerKind::Numeric => match evaluation.target.unique_value() {
            Some(Constant::Int(n)) => Answer::Num(*n),
            other => {
                log::debug!("numeric target without a unique integer: {other:?}");
                Answer::Null
            }
        },
        AnswerKind::AttributeQuery => match evaluation.target.unique_value() {
            Some(Constant::Word(word)) => Answer::Attr(word.clone()),
            other => {
                log::debug!("query target without a unique word grounding: {other:?}");
                Answer::Null
            }
        },
    }
}

/// One line per clause plus the solution set of each rule.
pub fn render_trace(program: &RuleProgram, evaluation: &Evaluation) -> String {
    use fmt::Write;
    let mut out = String::new();
    for (index, solutions) in evaluation.body.iter().enumerate() {
        for clause in program.clauses_of(index) {
            let _ = writeln!(out, "{clause}");
        }
        let _ = writeln!(out, "  r{index} = {solutions}");
    }
    let _ = writeln!(out, "{}", program.target());
    let _ = writeln!(out, "  target = {}", evaluation.target);
    out
}

// --- the clause solver -----------------------------------------------------

struct Solver<'a> {
    fb: &'a FactBase,
    prior: &'a [SolutionSet],
}

impl Solver<'_> {
    fn solve_clause(
        &self,
        clause: &Rule,
        out: &mut BTreeSet<Vec<Constant>>,
    ) -> Result<(), EvalError> {
        self.step(
            &clause.body,
            0,
            &Substitution::new(),
            &[],
            &clause.head,
            out,
        )
    }

    /// Extend the current substitution over `body[pos..]`, settling delayed
    /// comparison builtins as they become ground, and record every complete
    /// head grounding.
    fn step(
        &self,
        body: &[Atom],
        pos: usize,
        subst: &Substitution,
        delayed: &[Atom],
        head: &Atom,
        out: &mut BTreeSet<Vec<Constant>>,
    ) -> Result<(), EvalError> {
        let mut pending = Vec::new();
        for builtin in delayed {
            let applied = subst.apply(builtin);
            match eval_comparison(&applied)? {
                Some(false) => return Ok(()),
                Some(true) => {}
                None => pending.push(applied),
            }
        }

        if pos == body.len() {
            if let Some(unsettled) = pending.first() {
                return Err(EvalError::NonGroundBuiltin(unsettled.to_string()));
            }
            let grounded = subst.apply(head);
            let mut tuple = Vec::new();
            for term in grounded.terms() {
                match term {
                    Term::Const(value) => tuple.push(value.clone()),
                    Term::Var(name) => return Err(EvalError::NonGroundHead(name.clone())),
                }
            }
            out.insert(tuple);
            return Ok(());
        }

        let atom = subst.apply(&body[pos]);
        match &atom {
            Atom::App {
                pred: Predicate::Attribute | Predicate::Relation | Predicate::Object,
                ..
            } => {
                for fact in self.fb.facts_of(&atom)? {
                    if let Some(extended) = logic::extend(subst, &atom, &fact) {
                        self.step(body, pos + 1, &extended, &pending, head, out)?;
                    }
                }
                Ok(())
            }
            Atom::App {
                pred: Predicate::RuleRef(rule),
                ..
            } => {
                let solutions = self
                    .prior
                    .get(*rule)
                    .ok_or(EvalError::MissingSolutions(*rule))?;
                for tuple in solutions.iter() {
                    let fact = Atom::App {
                        pred: Predicate::RuleRef(*rule),
                        args: tuple.iter().cloned().map(Term::Const).collect(),
                    };
                    if let Some(extended) = logic::extend(subst, &atom, &fact) {
                        self.step(body, pos + 1, &extended, &pending, head, out)?;
                    }
                }
                Ok(())
            }
            Atom::App {
                pred: Predicate::SameAttr(kind),
                args,
            } => self.step_same(*kind, args, body, pos, subst, &pending, head, out),
            Atom::App {
                pred: Predicate::GreaterThan | Predicate::LesserThan | Predicate::Same,
                ..
            } => match eval_comparison(&atom)? {
                Some(false) => Ok(()),
                Some(true) => self.step(body, pos + 1, subst, &pending, head, out),
                None => {
                    pending.push(atom.clone());
                    self.step(body, pos + 1, subst, &pending, head, out)
                }
            },
            Atom::Count { rule, result, .. } => {
                let solutions = self
                    .prior
                    .get(*rule)
                    .ok_or(EvalError::MissingSolutions(*rule))?;
                let count = Constant::Int(solutions.len() as u64);
                match result {
                    Term::Const(value) if *value == count => {
                        self.step(body, pos + 1, subst, &pending, head, out)
                    }
                    Term::Const(_) => Ok(()),
                    Term::Var(name) => {
                        let mut extended = subst.clone();
                        extended.bind(name, &Term::Const(count));
                        self.step(body, pos + 1, &extended, &pending, head, out)
                    }
                }
            }
            Atom::App {
                pred: Predicate::Target,
                ..
            } => Err(UnknownPredicate("target".into()).into()),
        }
    }

    /// `same_<t>(x, y)` holds for distinct objects sharing the attribute
    /// value; unbound sides enumerate the universe in id order.
    #[allow(clippy::too_many_arguments)]
    fn step_same(
        &self,
        kind: AttrKind,
        args: &[Term],
        body: &[Atom],
        pos: usize,
        subst: &Substitution,
        pending: &[Atom],
        head: &Atom,
        out: &mut BTreeSet<Vec<Constant>>,
    ) -> Result<(), EvalError> {
        let [first, second] = args else {
            // Arity is enforced at program construction.
            return Err(UnknownPredicate(format!("same_{kind}/{}", args.len())).into());
        };
        match (first, second) {
            (Term::Const(x), Term::Const(y)) => {
                if same_attribute(self.fb, kind, self.object_id(x)?, self.object_id(y)?)? {
                    self.step(body, pos + 1, subst, pending, head, out)?;
                }
                Ok(())
            }
            (Term::Var(var), Term::Const(anchor)) | (Term::Const(anchor), Term::Var(var)) => {
                let anchor = self.object_id(anchor)?;
                for partner in self.partners(kind, anchor) {
                    let mut extended = subst.clone();
                    extended.bind(var, &Term::int(partner));
                    self.step(body, pos + 1, &extended, pending, head, out)?;
                }
                Ok(())
            }
            (Term::Var(x), Term::Var(y)) => {
                if x == y {
                    // same_<t> is irreflexive.
                    return Ok(());
                }
                for &left in self.fb.universe() {
                    for right in self.partners(kind, left) {
                        let mut extended = subst.clone();
                        extended.bind(x, &Term::int(left));
                        extended.bind(y, &Term::int(right));
                        self.step(body, pos + 1, &extended, pending, head, out)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Objects other than `anchor` sharing its `kind` value, ascending.
    fn partners(&self, kind: AttrKind, anchor: u64) -> Vec<u64> {
        match self.fb.attribute_value(anchor, kind.as_str()) {
            Some(value) => self
                .fb
                .objects_with(kind.as_str(), value)
                .filter(|&id| id != anchor)
                .collect(),
            None => Vec::new(),
        }
    }

    fn object_id(&self, constant: &Constant) -> Result<u64, EvalError> {
        match constant {
            Constant::Int(id) if self.fb.contains_object(*id) => Ok(*id),
            other => Err(EvalError::UnknownObject(other.clone())),
        }
    }
}

/// Evaluate a ground comparison builtin; `None` while arguments are unbound.
fn eval_comparison(atom: &Atom) -> Result<Option<bool>, EvalError> {
    let Atom::App { pred, args } = atom else {
        return Ok(None);
    };
    let [Term::Const(a), Term::Const(b)] = args.as_slice() else {
        return Ok(None);
    };
    match pred {
        Predicate::Same => Ok(Some(a == b)),
        Predicate::GreaterThan | Predicate::LesserThan => {
            let (Some(x), Some(y)) = (a.as_int(), b.as_int()) else {
                return Err(EvalError::NonNumericComparison(atom.to_string()));
            };
            Ok(Some(if *pred == Predicate::GreaterThan {
                x > y
            } else {
                x < y
            }))
        }
        _ => Ok(None),
    }
}
