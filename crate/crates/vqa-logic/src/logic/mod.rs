//! Predicate-logic core: terms, atoms, rules, and stratified rule programs.
//!
//! The vocabulary is fixed: `attribute/3`, `relation/3`, the four `same_*/2`
//! attribute comparisons, `greater_than/2`, `lesser_than/2`, `same/2`,
//! `object/1`, rule references `r<i>/1`, and the aggregation form
//! `count(r<i>(X), C)`. Terms are flat — a variable or a constant, never a
//! nested predicate — so unification stays first-order and decidable. The one
//! nested shape the pipeline needs, counting the solutions of an earlier rule,
//! gets its own [`Atom::Count`] form instead of general function terms.
//!
//! A [`RuleProgram`] is an ordered list of clauses whose head indices run
//! contiguously from `r0`, followed by exactly one `target` rule. A rule may
//! only reference rules with a strictly smaller index, which makes bottom-up
//! evaluation in index order a valid stratification.

mod subst;

pub(crate) use subst::extend;
pub use subst::{unify, ComposeConflict, Substitution};

use std::fmt;
use thiserror::Error;

/// A constant: a lowercase word or a non-negative integer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Int(u64),
    Word(String),
}

impl Constant {
    pub fn word(w: impl Into<String>) -> Self {
        Constant::Word(w.into())
    }

    pub fn as_int(&self) -> Option<u64> {
        match self {
            Constant::Int(n) => Some(*n),
            Constant::Word(_) => None,
        }
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            Constant::Word(w) => Some(w),
            Constant::Int(_) => None,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Word(w) => write!(f, "{w}"),
        }
    }
}

/// A flat term: an uppercase-named variable or a constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Constant),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn word(w: impl Into<String>) -> Self {
        Term::Const(Constant::word(w))
    }

    pub fn int(n: u64) -> Self {
        Term::Const(Constant::Int(n))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Constant> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Variable names start with an uppercase ASCII letter.
pub fn is_valid_variable(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Word constants are lowercase: `[a-z][a-z0-9_]*`.
pub fn is_valid_word(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// The four object attribute types with dedicated `same_*` predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttrKind {
    Size,
    Color,
    Material,
    Shape,
}

impl AttrKind {
    pub const ALL: [AttrKind; 4] = [
        AttrKind::Size,
        AttrKind::Color,
        AttrKind::Material,
        AttrKind::Shape,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttrKind::Size => "size",
            AttrKind::Color => "color",
            AttrKind::Material => "material",
            AttrKind::Shape => "shape",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Predicate symbols of the fixed vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    /// `attribute(id, type, value)`
    Attribute,
    /// `relation(subject, object, name)`: subject stands in the relation to object.
    Relation,
    /// `same_size/2`, `same_color/2`, `same_material/2`, `same_shape/2`
    SameAttr(AttrKind),
    GreaterThan,
    LesserThan,
    /// Constant equality, `same/2`.
    Same,
    /// Domain predicate for otherwise unconstrained object variables.
    Object,
    /// A reference to rule `r<i>`.
    RuleRef(usize),
    /// Head of the final rule; arity 0 (boolean) or 1 (grounding answer).
    Target,
}

impl Predicate {
    /// Fixed arity, or `None` for `target` (arity 0 or 1).
    pub fn arity(self) -> Option<usize> {
        match self {
            Predicate::Attribute | Predicate::Relation => Some(3),
            Predicate::SameAttr(_)
            | Predicate::GreaterThan
            | Predicate::LesserThan
            | Predicate::Same => Some(2),
            Predicate::Object | Predicate::RuleRef(_) => Some(1),
            Predicate::Target => None,
        }
    }

    /// Look a predicate up by its textual name (`r<digits>` for rule references).
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "attribute" => Some(Predicate::Attribute),
            "relation" => Some(Predicate::Relation),
            "same_size" => Some(Predicate::SameAttr(AttrKind::Size)),
            "same_color" => Some(Predicate::SameAttr(AttrKind::Color)),
            "same_material" => Some(Predicate::SameAttr(AttrKind::Material)),
            "same_shape" => Some(Predicate::SameAttr(AttrKind::Shape)),
            "greater_than" => Some(Predicate::GreaterThan),
            "lesser_than" => Some(Predicate::LesserThan),
            "same" => Some(Predicate::Same),
            "object" => Some(Predicate::Object),
            "target" => Some(Predicate::Target),
            _ => {
                let digits = name.strip_prefix('r')?;
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                digits.parse().ok().map(Predicate::RuleRef)
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Attribute => f.write_str("attribute"),
            Predicate::Relation => f.write_str("relation"),
            Predicate::SameAttr(kind) => write!(f, "same_{kind}"),
            Predicate::GreaterThan => f.write_str("greater_than"),
            Predicate::LesserThan => f.write_str("lesser_than"),
            Predicate::Same => f.write_str("same"),
            Predicate::Object => f.write_str("object"),
            Predicate::RuleRef(i) => write!(f, "r{i}"),
            Predicate::Target => f.write_str("target"),
        }
    }
}

/// An atom: a predicate applied to flat terms, or the counting form
/// `count(r<i>(X), C)` whose first argument names an earlier rule.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    App {
        pred: Predicate,
        args: Vec<Term>,
    },
    Count {
        rule: usize,
        arg: Term,
        result: Term,
    },
}

impl Atom {
    pub fn attribute(id: Term, kind: Term, value: Term) -> Self {
        Atom::App {
            pred: Predicate::Attribute,
            args: vec![id, kind, value],
        }
    }

    pub fn relation(subject: Term, object: Term, name: Term) -> Self {
        Atom::App {
            pred: Predicate::Relation,
            args: vec![subject, object, name],
        }
    }

    pub fn same_attr(kind: AttrKind, a: Term, b: Term) -> Self {
        Atom::App {
            pred: Predicate::SameAttr(kind),
            args: vec![a, b],
        }
    }

    pub fn greater_than(a: Term, b: Term) -> Self {
        Atom::App {
            pred: Predicate::GreaterThan,
            args: vec![a, b],
        }
    }

    pub fn lesser_than(a: Term, b: Term) -> Self {
        Atom::App {
            pred: Predicate::LesserThan,
            args: vec![a, b],
        }
    }

    pub fn same(a: Term, b: Term) -> Self {
        Atom::App {
            pred: Predicate::Same,
            args: vec![a, b],
        }
    }

    pub fn object(id: Term) -> Self {
        Atom::App {
            pred: Predicate::Object,
            args: vec![id],
        }
    }

    pub fn rule_ref(index: usize, arg: Term) -> Self {
        Atom::App {
            pred: Predicate::RuleRef(index),
            args: vec![arg],
        }
    }

    pub fn count(rule: usize, arg: Term, result: Term) -> Self {
        Atom::Count { rule, arg, result }
    }

    pub fn target(args: Vec<Term>) -> Self {
        Atom::App {
            pred: Predicate::Target,
            args,
        }
    }

    pub fn predicate(&self) -> Option<Predicate> {
        match self {
            Atom::App { pred, .. } => Some(*pred),
            Atom::Count { .. } => None,
        }
    }

    /// Terms in argument order; for `count` the inner argument comes first.
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Atom::App { args, .. } => args.iter().collect(),
            Atom::Count { arg, result, .. } => vec![arg, result],
        }
    }

    /// Variable names in left-to-right argument order, with repeats.
    pub fn variables(&self) -> Vec<&str> {
        self.terms().into_iter().filter_map(Term::as_var).collect()
    }

    pub fn is_ground(&self) -> bool {
        self.terms().iter().all(|t| !t.is_var())
    }

    /// The earlier rule this atom mentions, if any.
    pub fn referenced_rule(&self) -> Option<usize> {
        match self {
            Atom::App {
                pred: Predicate::RuleRef(i),
                ..
            } => Some(*i),
            Atom::Count { rule, .. } => Some(*rule),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::App { pred, args } => {
                write!(f, "{pred}")?;
                if args.is_empty() {
                    return Ok(());
                }
                write!(f, "(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                write!(f, ")")
            }
            Atom::Count { rule, arg, result } => write!(f, "count(r{rule}({arg}), {result})"),
        }
    }
}

/// One clause, `head :- body.`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Rule { head, body }
    }

    /// Head index for `r<i>` heads; `None` for the target rule.
    pub fn head_index(&self) -> Option<usize> {
        match self.head {
            Atom::App {
                pred: Predicate::RuleRef(i),
                ..
            } => Some(i),
            _ => None,
        }
    }

    pub fn is_target(&self) -> bool {
        matches!(
            self.head,
            Atom::App {
                pred: Predicate::Target,
                ..
            }
        )
    }

    /// The head's single variable, when the head is `r<i>(V)` or `target(V)`.
    pub fn head_var(&self) -> Option<&str> {
        match &self.head {
            Atom::App { args, .. } => match args.as_slice() {
                [Term::Var(v)] => Some(v),
                _ => None,
            },
            Atom::Count { .. } => None,
        }
    }

    /// A clause is a count rule when its body is exactly one count atom.
    pub fn is_count_rule(&self) -> bool {
        matches!(self.body.as_slice(), [Atom::Count { .. }])
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, atom) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{atom}")?;
        }
        write!(f, ".")
    }
}

/// How the target rule's result turns into an answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnswerKind {
    /// Arity-0 target: the answer is yes iff the target is derivable.
    Boolean,
    /// Arity-1 target bound to an integer.
    Numeric,
    /// Arity-1 target bound to an attribute word.
    AttributeQuery,
}

/// An ordered, stratified clause list ending in exactly one target rule.
///
/// Multiple clauses may share one head index (disjunction); indices are
/// contiguous from 0 and non-decreasing in clause order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleProgram {
    rules: Vec<Rule>,
    answer_kind: AnswerKind,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("a rule program needs at least a target rule")]
    Empty,
    #[error("the target rule must come last")]
    TargetNotLast,
    #[error("the final rule must have the `target` head")]
    MissingTarget,
    #[error("target takes at most one argument, found {0}")]
    TargetArity(usize),
    #[error("`target` cannot appear in a rule body")]
    TargetInBody,
    #[error("rule head must be r<i> with one argument or target, found `{0}`")]
    BadHead(String),
    #[error("head indices must be contiguous from r0, found r{found} after r{previous}")]
    IndexGap { previous: usize, found: usize },
    #[error("first rule must have head r0, found r{0}")]
    BadFirstIndex(usize),
    #[error("rule body cannot be empty")]
    EmptyBody,
    #[error("`{pred}` expects {expected} arguments, found {found}")]
    BadArity {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid variable or constant name `{0}`")]
    BadName(String),
    #[error("rule r{rule} references r{referenced}, which is not an earlier rule")]
    ForwardReference { rule: usize, referenced: usize },
    #[error("target references r{0}, which does not exist")]
    UnknownRule(usize),
    #[error("head variable {0} does not occur in the body")]
    HeadVariableNotInBody(String),
    #[error("a boolean program must have an arity-0 target (and only then)")]
    AnswerArityMismatch,
}

impl RuleProgram {
    pub fn new(rules: Vec<Rule>, answer_kind: AnswerKind) -> Result<Self, ProgramError> {
        if rules.is_empty() {
            return Err(ProgramError::Empty);
        }

        let last = rules.len() - 1;
        let mut max_index: Option<usize> = None;
        for (pos, rule) in rules.iter().enumerate() {
            match &rule.head {
                Atom::App {
                    pred: Predicate::Target,
                    args,
                } => {
                    if pos != last {
                        return Err(ProgramError::TargetNotLast);
                    }
                    if args.len() > 1 {
                        return Err(ProgramError::TargetArity(args.len()));
                    }
                }
                Atom::App {
                    pred: Predicate::RuleRef(index),
                    args,
                } => {
                    if pos == last {
                        return Err(ProgramError::MissingTarget);
                    }
                    if args.len() != 1 {
                        return Err(ProgramError::BadArity {
                            pred: format!("r{index}"),
                            expected: 1,
                            found: args.len(),
                        });
                    }
                    match max_index {
                        None if *index != 0 => return Err(ProgramError::BadFirstIndex(*index)),
                        Some(prev) if *index != prev && *index != prev + 1 => {
                            return Err(ProgramError::IndexGap {
                                previous: prev,
                                found: *index,
                            })
                        }
                        _ => {}
                    }
                    max_index = Some(*index);
                }
                other => return Err(ProgramError::BadHead(other.to_string())),
            }
        }

        let body_rule_count = max_index.map_or(0, |i| i + 1);
        for rule in &rules {
            if rule.body.is_empty() {
                return Err(ProgramError::EmptyBody);
            }
            // Strict stratification: a clause with head index i may only
            // reference rules with index < i; the target sees them all.
            let limit = rule.head_index().unwrap_or(body_rule_count);
            validate_atom(&rule.head)?;
            for atom in &rule.body {
                validate_atom(atom)?;
                if matches!(
                    atom,
                    Atom::App {
                        pred: Predicate::Target,
                        ..
                    }
                ) {
                    return Err(ProgramError::TargetInBody);
                }
                if let Some(j) = atom.referenced_rule() {
                    if j >= limit {
                        match rule.head_index() {
                            Some(i) => {
                                return Err(ProgramError::ForwardReference {
                                    rule: i,
                                    referenced: j,
                                })
                            }
                            None => return Err(ProgramError::UnknownRule(j)),
                        }
                    }
                }
            }
            let body_vars: Vec<&str> = rule.body.iter().flat_map(|a| a.variables()).collect();
            for var in rule.head.variables() {
                if !body_vars.contains(&var) {
                    return Err(ProgramError::HeadVariableNotInBody(var.to_string()));
                }
            }
        }

        let target_arity = rules[last].head.terms().len();
        let boolean = matches!(answer_kind, AnswerKind::Boolean);
        if boolean != (target_arity == 0) {
            return Err(ProgramError::AnswerArityMismatch);
        }

        Ok(RuleProgram { rules, answer_kind })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn answer_kind(&self) -> AnswerKind {
        self.answer_kind
    }

    pub fn target(&self) -> &Rule {
        self.rules.last().expect("programs are never empty")
    }

    /// Number of distinct `r<i>` head indices (the target not included).
    pub fn body_rule_count(&self) -> usize {
        self.rules
            .iter()
            .filter_map(Rule::head_index)
            .max()
            .map_or(0, |i| i + 1)
    }

    /// All clauses sharing head index `index`.
    pub fn clauses_of(&self, index: usize) -> impl Iterator<Item = &Rule> {
        self.rules
            .iter()
            .filter(move |r| r.head_index() == Some(index))
    }
}

impl fmt::Display for RuleProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

fn validate_atom(atom: &Atom) -> Result<(), ProgramError> {
    if let Atom::App { pred, args } = atom {
        if let Some(expected) = pred.arity() {
            if args.len() != expected {
                return Err(ProgramError::BadArity {
                    pred: pred.to_string(),
                    expected,
                    found: args.len(),
                });
            }
        }
    }
    for term in atom.terms() {
        match term {
            Term::Var(name) if !is_valid_variable(name) => {
                return Err(ProgramError::BadName(name.clone()))
            }
            Term::Const(Constant::Word(word)) if !is_valid_word(word) => {
                return Err(ProgramError::BadName(word.clone()))
            }
            _ => {}
        }
    }
    Ok(())
}
