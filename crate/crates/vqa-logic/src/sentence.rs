//! The target-sentence codec: a one-line, backslash-delimited encoding of
//! rule programs, and its parser.
//!
//! Serialized form (EBNF; whitespace is allowed after commas and around
//! tokens on the way back in):
//!
//! ```text
//! sentence  = { segment "\" } operator "\" ;
//! segment   = marker | body ;
//! marker    = "C" ordinal ;                      (* 1-based, in order *)
//! body      = clause { ";" clause } ;            (* ";" = disjunction *)
//! clause    = atom { "," atom } ;
//! atom      = name "(" term { "," term } ")"
//!           | "count" "(" rule "(" variable ")" "," term ")" ;
//! operator  = ">" | "<" | "=#" | "E" | "C" | "Q(" attr ")" | "=" attr ;
//! attr      = "size" | "color" | "material" | "shape" ;
//! rule      = "r" digits ;
//! variable  = upper { letter | digit | "_" } ;
//! term      = variable | lower { lower | digit | "_" } | digits ;
//! ```
//!
//! Every body segment is one rule; its head variable is the first variable in
//! a left-to-right argument scan, which the compiler guarantees is the
//! branch's output variable. A `C<n>` marker wraps the immediately preceding
//! rule in a count rule. The final operator segment builds the target rule:
//! `E` (exists), `C` (numeric answer), `Q(t)` (query attribute `t`), `=t`
//! (attribute comparison), and `>`/`<`/`=#` (comparisons over the last two
//! count rules).
//!
//! `parse` is total: any input yields a rule program or a [`ParseError`],
//! which the pipeline maps to the NULL answer. Round-tripping is exact for
//! compiler-produced programs; hand-written programs outside that grammar may
//! serialize to a sentence that parses back to an equivalent-but-renamed
//! program.

use crate::logic::{
    is_valid_variable, is_valid_word, AnswerKind, Atom, AttrKind, Predicate, ProgramError, Rule,
    RuleProgram, Term,
};
use std::fmt;
use thiserror::Error;

/// A serialized rule program; plain UTF-8, one line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSentence {
    text: String,
}

impl TargetSentence {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

impl fmt::Display for TargetSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// The target rule fits none of the operator shapes.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("target rule `{0}` matches no operator shape")]
pub struct UnencodableProgram(pub String);

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("sentence must end with a trailing `\\`")]
    MissingTerminator,
    #[error("segment {0} is empty")]
    EmptySegment(usize),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`target` cannot appear in a sentence body")]
    TargetInBody,
    #[error("`{pred}` expects {expected} arguments, found {found}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("malformed term `{0}`")]
    BadTerm(String),
    #[error("count must wrap a rule application, as in count(r0(W), C)")]
    BadCountAtom,
    #[error("unexpected `{found}` at byte {at}")]
    UnexpectedChar { found: char, at: usize },
    #[error("segment ended unexpectedly")]
    UnexpectedEnd,
    #[error("count marker out of order: expected C{expected}, found `{found}`")]
    CountOrdinal { expected: usize, found: String },
    #[error("count marker has no preceding rule to wrap")]
    CountWithoutRule,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` needs {needed} preceding {what}")]
    MissingOperand {
        op: String,
        needed: usize,
        what: &'static str,
    },
    #[error("clause has no variable to serve as the rule head")]
    NoHeadVariable,
    #[error(transparent)]
    Program(#[from] ProgramError),
}

// --- serialization -------------------------------------------------------

/// Serialize a rule program. Body atoms are joined by `,`, clauses of one
/// head by `;`, and arguments inside an atom by `, `.
pub fn serialize(program: &RuleProgram) -> Result<TargetSentence, UnencodableProgram> {
    let mut segments: Vec<String> = Vec::new();
    let mut count_ordinal = 0;

    let body_rules = &program.rules()[..program.rules().len() - 1];
    let mut position = 0;
    while position < body_rules.len() {
        let index = body_rules[position]
            .head_index()
            .expect("non-target rules have indexed heads");
        let mut clauses = Vec::new();
        while position < body_rules.len() && body_rules[position].head_index() == Some(index) {
            clauses.push(&body_rules[position]);
            position += 1;
        }
        if let [clause] = clauses.as_slice() {
            if is_canonical_count_rule(clause, index, body_rules) {
                count_ordinal += 1;
                segments.push(format!("C{count_ordinal}"));
                continue;
            }
        }
        segments.push(
            clauses
                .iter()
                .map(|clause| {
                    clause
                        .body
                        .iter()
                        .map(Atom::to_string)
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(";"),
        );
    }

    segments.push(operator_token(program)?);
    Ok(TargetSentence {
        text: format!("{}\\", segments.join("\\")),
    })
}

/// A count rule is marker-encodable only in the exact shape the parser
/// reconstructs: `r<i>(C) :- count(r<i-1>(V), C)` with `V` the head variable
/// of the preceding rule.
fn is_canonical_count_rule(rule: &Rule, index: usize, body_rules: &[Rule]) -> bool {
    let Some(head_var) = rule.head_var() else {
        return false;
    };
    let [Atom::Count {
        rule: inner,
        arg: Term::Var(arg),
        result: Term::Var(result),
    }] = rule.body.as_slice()
    else {
        return false;
    };
    if index == 0 || *inner != index - 1 || result != head_var {
        return false;
    }
    body_rules
        .iter()
        .rev()
        .find(|r| r.head_index() == Some(*inner))
        .and_then(Rule::head_var)
        == Some(arg)
}

fn operator_token(program: &RuleProgram) -> Result<String, UnencodableProgram> {
    let target = program.target();
    let fail = || UnencodableProgram(target.to_string());
    let head_args = match &target.head {
        Atom::App { args, .. } => args,
        Atom::Count { .. } => return Err(fail()),
    };

    match (program.answer_kind(), target.body.as_slice()) {
        (AnswerKind::Boolean, [Atom::App { pred, args }]) => match (pred, args.as_slice()) {
            (Predicate::RuleRef(_), [Term::Var(_)]) => Ok("E".to_string()),
            _ => Err(fail()),
        },
        (AnswerKind::Numeric, [Atom::App { pred, args }]) => match (pred, args.as_slice()) {
            (Predicate::RuleRef(_), [arg @ Term::Var(_)]) if Some(arg) == head_args.first() => {
                Ok("C".to_string())
            }
            _ => Err(fail()),
        },
        (AnswerKind::Boolean, [left, right, comparison]) => {
            let (Some(a), Some(b)) = (ref_var(left), ref_var(right)) else {
                return Err(fail());
            };
            let Atom::App { pred, args } = comparison else {
                return Err(fail());
            };
            if a == b || args.as_slice() != [Term::var(a), Term::var(b)] {
                return Err(fail());
            }
            match pred {
                Predicate::GreaterThan => Ok(">".to_string()),
                Predicate::LesserThan => Ok("<".to_string()),
                Predicate::Same => Ok("=#".to_string()),
                _ => Err(fail()),
            }
        }
        (AnswerKind::AttributeQuery, [reference, attribute]) => {
            let Some(x) = ref_var(reference) else {
                return Err(fail());
            };
            let Some((id, kind, value)) = attribute_parts(attribute) else {
                return Err(fail());
            };
            if id != x || value == x || head_args.first() != Some(&Term::var(value)) {
                return Err(fail());
            }
            Ok(format!("Q({kind})"))
        }
        (AnswerKind::Boolean, [left, right, first_attr, second_attr, equality]) => {
            let (Some(x), Some(y)) = (ref_var(left), ref_var(right)) else {
                return Err(fail());
            };
            let (Some((id1, kind1, a1)), Some((id2, kind2, a2))) =
                (attribute_parts(first_attr), attribute_parts(second_attr))
            else {
                return Err(fail());
            };
            let same_ok = matches!(
                equality,
                Atom::App { pred: Predicate::Same, args }
                    if args.as_slice() == [Term::var(a1), Term::var(a2)]
            );
            if x == y
                || id1 != x
                || id2 != y
                || kind1 != kind2
                || a1 == a2
                || [a1, a2].iter().any(|a| *a == x || *a == y)
                || !same_ok
            {
                return Err(fail());
            }
            Ok(format!("={kind1}"))
        }
        _ => Err(fail()),
    }
}

/// `r<i>(V)` with a variable argument.
fn ref_var(atom: &Atom) -> Option<&str> {
    match atom {
        Atom::App {
            pred: Predicate::RuleRef(_),
            args,
        } => match args.as_slice() {
            [Term::Var(v)] => Some(v),
            _ => None,
        },
        _ => None,
    }
}

/// `attribute(Var, kind, Var)` with a `same_*`-style attribute kind.
fn attribute_parts(atom: &Atom) -> Option<(&str, AttrKind, &str)> {
    match atom {
        Atom::App {
            pred: Predicate::Attribute,
            args,
        } => match args.as_slice() {
            [Term::Var(id), Term::Const(kind), Term::Var(value)] => {
                Some((id, AttrKind::from_name(kind.as_word()?)?, value))
            }
            _ => None,
        },
        _ => None,
    }
}

// --- parsing ---------------------------------------------------------------

/// Parse a target sentence back into a rule program. Accepts arbitrary
/// strings; anything outside the grammar is a [`ParseError`].
pub fn parse(text: &str) -> Result<RuleProgram, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let Some(body) = trimmed.strip_suffix('\\') else {
        return Err(ParseError::MissingTerminator);
    };

    let segments: Vec<&str> = body.split('\\').collect();
    let (&operator, rule_segments) = segments
        .split_last()
        .expect("split always yields at least one segment");

    let mut builder = Builder::default();
    for (position, segment) in rule_segments.iter().enumerate() {
        let segment = segment.trim();
        if segment.is_empty() {
            return Err(ParseError::EmptySegment(position));
        }
        match count_marker(segment) {
            Some(ordinal) => builder.push_count_marker(ordinal, segment)?,
            None => builder.push_body_segment(segment)?,
        }
    }

    let operator = operator.trim();
    if operator.is_empty() {
        return Err(ParseError::EmptySegment(segments.len() - 1));
    }
    builder.finish(operator)
}

/// `C<digits>` and nothing else.
fn count_marker(segment: &str) -> Option<usize> {
    let digits = segment.strip_prefix('C')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Default)]
struct Builder {
    rules: Vec<Rule>,
    next_index: usize,
    /// Head indices of count rules, in order of appearance.
    count_rules: Vec<usize>,
}

impl Builder {
    /// Head index and head variable of the most recently introduced rule.
    fn last_rule(&self) -> Option<(usize, String)> {
        let rule = self.rules.last()?;
        Some((rule.head_index()?, rule.head_var()?.to_string()))
    }

    fn push_count_marker(&mut self, ordinal: usize, segment: &str) -> Result<(), ParseError> {
        let expected = self.count_rules.len() + 1;
        if ordinal != expected {
            return Err(ParseError::CountOrdinal {
                expected,
                found: segment.to_string(),
            });
        }
        let (inner, inner_var) = self.last_rule().ok_or(ParseError::CountWithoutRule)?;
        let index = self.next_index;
        self.next_index += 1;
        self.rules.push(Rule::new(
            Atom::rule_ref(index, Term::var("C")),
            vec![Atom::count(inner, Term::var(&inner_var), Term::var("C"))],
        ));
        self.count_rules.push(index);
        Ok(())
    }

    fn push_body_segment(&mut self, segment: &str) -> Result<(), ParseError> {
        let index = self.next_index;
        self.next_index += 1;
        for clause in segment.split(';') {
            let atoms = parse_clause(clause)?;
            let head_var = atoms
                .iter()
                .flat_map(|a| a.variables())
                .next()
                .ok_or(ParseError::NoHeadVariable)?
                .to_string();
            self.rules.push(Rule::new(
                Atom::rule_ref(index, Term::var(&head_var)),
                atoms,
            ));
        }
        Ok(())
    }

    fn finish(mut self, operator: &str) -> Result<RuleProgram, ParseError> {
        let (target, kind) = self.target_rule(operator)?;
        self.rules.push(target);
        Ok(RuleProgram::new(self.rules, kind)?)
    }

    fn target_rule(&self, operator: &str) -> Result<(Rule, AnswerKind), ParseError> {
        let single_operand = |op: &str| {
            self.last_rule().ok_or(ParseError::MissingOperand {
                op: op.to_string(),
                needed: 1,
                what: "rule",
            })
        };

        if let Some(comparison) = match operator {
            ">" => Some(Predicate::GreaterThan),
            "<" => Some(Predicate::LesserThan),
            "=#" => Some(Predicate::Same),
            _ => None,
        } {
            let [.., first, second] = self.count_rules.as_slice() else {
                return Err(ParseError::MissingOperand {
                    op: operator.to_string(),
                    needed: 2,
                    what: "count rules",
                });
            };
            let body = vec![
                Atom::rule_ref(*first, Term::var("C1")),
                Atom::rule_ref(*second, Term::var("C2")),
                Atom::App {
                    pred: comparison,
                    args: vec![Term::var("C1"), Term::var("C2")],
                },
            ];
            return Ok((Rule::new(Atom::target(vec![]), body), AnswerKind::Boolean));
        }

        match operator {
            "E" => {
                let (index, var) = single_operand("E")?;
                let body = vec![Atom::rule_ref(index, Term::var(var))];
                Ok((Rule::new(Atom::target(vec![]), body), AnswerKind::Boolean))
            }
            "C" => {
                let (index, var) = single_operand("C")?;
                let head = Atom::target(vec![Term::var(&var)]);
                let body = vec![Atom::rule_ref(index, Term::var(&var))];
                Ok((Rule::new(head, body), AnswerKind::Numeric))
            }
            _ if operator.starts_with("Q(") => {
                let kind = operator
                    .strip_prefix("Q(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .map(str::trim)
                    .and_then(AttrKind::from_name)
                    .ok_or_else(|| ParseError::UnknownOperator(operator.to_string()))?;
                let (index, var) = single_operand(operator)?;
                let answer = fresh_name("A", &[&var]);
                let head = Atom::target(vec![Term::var(&answer)]);
                let body = vec![
                    Atom::rule_ref(index, Term::var(&var)),
                    Atom::attribute(
                        Term::var(&var),
                        Term::word(kind.as_str()),
                        Term::var(&answer),
                    ),
                ];
                Ok((Rule::new(head, body), AnswerKind::AttributeQuery))
            }
            _ if operator.starts_with('=') => {
                let kind = AttrKind::from_name(operator[1..].trim())
                    .ok_or_else(|| ParseError::UnknownOperator(operator.to_string()))?;
                let mut indexed: Vec<(usize, &str)> = Vec::new();
                for rule in &self.rules {
                    if let (Some(index), Some(var)) = (rule.head_index(), rule.head_var()) {
                        if indexed.last().map(|(i, _)| *i) != Some(index) {
                            indexed.push((index, var));
                        }
                    }
                }
                let [.., (left, left_var), (right, right_var)] = indexed.as_slice() else {
                    return Err(ParseError::MissingOperand {
                        op: operator.to_string(),
                        needed: 2,
                        what: "rules",
                    });
                };
                let x = left_var.to_string();
                let y = fresh_name(right_var, &[&x]);
                let a1 = fresh_name("A1", &[&x, &y]);
                let a2 = fresh_name("A2", &[&x, &y, &a1]);
                let body = vec![
                    Atom::rule_ref(*left, Term::var(&x)),
                    Atom::rule_ref(*right, Term::var(&y)),
                    Atom::attribute(Term::var(&x), Term::word(kind.as_str()), Term::var(&a1)),
                    Atom::attribute(Term::var(&y), Term::word(kind.as_str()), Term::var(&a2)),
                    Atom::same(Term::var(&a1), Term::var(&a2)),
                ];
                Ok((Rule::new(Atom::target(vec![]), body), AnswerKind::Boolean))
            }
            other => Err(ParseError::UnknownOperator(other.to_string())),
        }
    }
}

/// `preferred`, unless taken; then `preferred_2`, `preferred_3`, ...
fn fresh_name(preferred: &str, taken: &[&str]) -> String {
    if !taken.contains(&preferred) {
        return preferred.to_string();
    }
    (2..)
        .map(|n| format!("{preferred}_{n}"))
        .find(|candidate| !taken.contains(&candidate.as_str()))
        .expect("the candidate space is unbounded")
}

// --- clause-level recursive descent ---------------------------------------

struct Cursor<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, wanted: char) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == wanted => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => Err(ParseError::UnexpectedChar {
                found: c,
                at: self.pos,
            }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }

    fn eat(&mut self, wanted: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(wanted) {
            self.pos += wanted.len_utf8();
            true
        } else {
            false
        }
    }

    /// An identifier or number: a maximal run of `[A-Za-z0-9_]`.
    fn token(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return match self.peek() {
                Some(c) => Err(ParseError::UnexpectedChar {
                    found: c,
                    at: self.pos,
                }),
                None => Err(ParseError::UnexpectedEnd),
            };
        }
        Ok(&self.text[start..self.pos])
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.bytes.len()
    }
}

fn parse_clause(clause: &str) -> Result<Vec<Atom>, ParseError> {
    let mut cursor = Cursor::new(clause);
    let mut atoms = vec![parse_atom(&mut cursor)?];
    loop {
        if cursor.at_end() {
            return Ok(atoms);
        }
        cursor.expect(',')?;
        atoms.push(parse_atom(&mut cursor)?);
    }
}

fn parse_atom(cursor: &mut Cursor) -> Result<Atom, ParseError> {
    let name = cursor.token()?;
    if name == "count" {
        return parse_count(cursor);
    }
    let pred =
        Predicate::from_name(name).ok_or_else(|| ParseError::UnknownPredicate(name.to_string()))?;
    if pred == Predicate::Target {
        return Err(ParseError::TargetInBody);
    }
    let expected = pred
        .arity()
        .expect("every non-target predicate has a fixed arity");

    let mut args = Vec::new();
    cursor.expect('(')?;
    loop {
        args.push(parse_term(cursor)?);
        if cursor.eat(')') {
            break;
        }
        cursor.expect(',')?;
    }
    if args.len() != expected {
        return Err(ParseError::ArityMismatch {
            pred: name.to_string(),
            expected,
            found: args.len(),
        });
    }
    Ok(Atom::App { pred, args })
}

fn parse_count(cursor: &mut Cursor) -> Result<Atom, ParseError> {
    cursor.expect('(')?;
    let rule_name = cursor.token()?;
    let Some(Predicate::RuleRef(rule)) = Predicate::from_name(rule_name) else {
        return Err(ParseError::BadCountAtom);
    };
    cursor.expect('(')?;
    let arg = parse_term(cursor)?;
    if !arg.is_var() {
        return Err(ParseError::BadCountAtom);
    }
    cursor.expect(')')?;
    cursor.expect(',')?;
    let result = parse_term(cursor)?;
    cursor.expect(')')?;
    Ok(Atom::count(rule, arg, result))
}

fn parse_term(cursor: &mut Cursor) -> Result<Term, ParseError> {
    let token = cursor.token()?;
    let first = token.chars().next().expect("tokens are never empty");
    if first.is_ascii_digit() {
        return token
            .parse()
            .map(Term::int)
            .map_err(|_| ParseError::BadTerm(token.to_string()));
    }
    if first.is_ascii_uppercase() {
        if !is_valid_variable(token) {
            return Err(ParseError::BadTerm(token.to_string()));
        }
        return Ok(Term::var(token));
    }
    if !is_valid_word(token) {
        return Err(ParseError::BadTerm(token.to_string()));
    }
    Ok(Term::word(token))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile, FunctionalProgram, ProgramNode};
    use proptest::prelude::*;

    /// The serialized count-comparison sentence for "Are there more big green
    /// things than large purple shiny cubes?".
    pub(super) const COUNT_COMPARISON: &str = r"attribute(W, size, large),attribute(W, color, green)\C1\attribute(X, size, large),attribute(X, color, purple),attribute(X, material, metal),attribute(X, shape, cube)\C2\>\";

    fn count_comparison_program() -> RuleProgram {
        let nodes = vec![
            ProgramNode::new("scene", vec![], vec![]),
            ProgramNode::new("filter_size", vec![0], vec!["large"]),
            ProgramNode::new("filter_color", vec![1], vec!["green"]),
            ProgramNode::new("count", vec![2], vec![]),
            ProgramNode::new("scene", vec![], vec![]),
            ProgramNode::new("filter_size", vec![4], vec!["large"]),
            ProgramNode::new("filter_color", vec![5], vec!["purple"]),
            ProgramNode::new("filter_material", vec![6], vec!["metal"]),
            ProgramNode::new("filter_shape", vec![7], vec!["cube"]),
            ProgramNode::new("count", vec![8], vec![]),
            ProgramNode::new("greater_than", vec![3, 9], vec![]),
        ];
        compile(&FunctionalProgram::new(nodes).unwrap()).unwrap()
    }

    fn compile_chain(ops: &[(&str, Vec<&str>)]) -> RuleProgram {
        let nodes = ops
            .iter()
            .enumerate()
            .map(|(i, (name, values))| {
                let inputs = if *name == "scene" {
                    vec![]
                } else {
                    vec![i - 1]
                };
                ProgramNode::new(name, inputs, values.clone())
            })
            .collect();
        compile(&FunctionalProgram::new(nodes).unwrap()).unwrap()
    }

    #[test]
    fn serializes_the_count_comparison_sentence() {
        let sentence = serialize(&count_comparison_program()).unwrap();
        assert_eq!(sentence.as_str(), COUNT_COMPARISON);
    }

    #[test]
    fn serializes_count_and_exist_sentences() {
        let count = compile_chain(&[("scene", vec![]), ("count", vec![])]);
        assert_eq!(serialize(&count).unwrap().as_str(), r"object(W)\C1\C\");

        let exist = compile_chain(&[
            ("scene", vec![]),
            ("filter_color", vec!["red"]),
            ("exist", vec![]),
        ]);
        assert_eq!(
            serialize(&exist).unwrap().as_str(),
            r"attribute(W, color, red)\E\"
        );
    }

    #[test]
    fn parses_its_own_output_back_to_the_same_program() {
        for program in [
            count_comparison_program(),
            compile_chain(&[("scene", vec![]), ("count", vec![])]),
            compile_chain(&[
                ("scene", vec![]),
                ("filter_color", vec!["red"]),
                ("exist", vec![]),
            ]),
            compile_chain(&[
                ("scene", vec![]),
                ("filter_shape", vec!["cube"]),
                ("unique", vec![]),
                ("relate", vec!["left"]),
                ("unique", vec![]),
                ("query_color", vec![]),
            ]),
        ] {
            let sentence = serialize(&program).unwrap();
            assert_eq!(parse(sentence.as_str()).unwrap(), program);
        }
    }

    #[test]
    fn parses_disjunctive_bodies() {
        let sentence = r"attribute(W, shape, cube);attribute(W, shape, sphere)\C1\C\";
        let program = parse(sentence).unwrap();
        assert_eq!(program.clauses_of(0).count(), 2);
        assert_eq!(serialize(&program).unwrap().as_str(), sentence);
    }

    #[test]
    fn accepts_optional_whitespace_after_commas_and_delimiters() {
        let spaced =
            " attribute(W, size, large) , attribute(W,color,green) \\ C1 \\ object(X) \\ C2 \\ > \\";
        let canonical = r"attribute(W, size, large),attribute(W, color, green)\C1\object(X)\C2\>\";
        assert_eq!(parse(spaced).unwrap(), parse(canonical).unwrap());
    }

    #[test]
    fn rejects_malformed_sentences() {
        assert_eq!(parse(""), Err(ParseError::EmptyInput));
        assert_eq!(parse("   "), Err(ParseError::EmptyInput));
        assert_eq!(
            parse(r"attribute(W, size)\E\"),
            Err(ParseError::ArityMismatch {
                pred: "attribute".into(),
                expected: 3,
                found: 2
            })
        );
        assert_eq!(
            parse(r"attribute(W, color, red)\E"),
            Err(ParseError::MissingTerminator)
        );
        assert_eq!(
            parse(r"attribute(W, color, red)\"),
            Err(ParseError::UnknownOperator(
                "attribute(W, color, red)".into()
            ))
        );
        assert_eq!(
            parse(r"attrib(W, color, red)\E\"),
            Err(ParseError::UnknownPredicate("attrib".into()))
        );
        assert_eq!(parse(r"C1\C\"), Err(ParseError::CountWithoutRule));
        assert_eq!(
            parse(r"object(W)\C2\C\"),
            Err(ParseError::CountOrdinal {
                expected: 1,
                found: "C2".into()
            })
        );
        assert_eq!(
            parse(r"object(W)\C1\>\"),
            Err(ParseError::MissingOperand {
                op: ">".into(),
                needed: 2,
                what: "count rules"
            })
        );
        assert_eq!(
            parse(r"attribute(1, color, red)\E\"),
            Err(ParseError::NoHeadVariable)
        );
        // A body rule referencing itself is a stratification violation.
        assert!(matches!(
            parse(r"r0(W)\E\"),
            Err(ParseError::Program(ProgramError::ForwardReference { .. }))
        ));
    }

    proptest! {
        // Totality: any string either parses or is a ParseError; no panics,
        // and whatever parses must serialize again.
        #[test]
        fn parse_is_total(input in ".{0,120}") {
            if let Ok(program) = parse(&input) {
                serialize(&program).expect("parsed programs are serializable");
            }
        }

        // Same, over strings built from the grammar's own alphabet, which
        // reach much deeper into the parser.
        #[test]
        fn parse_is_total_on_grammar_like_strings(
            input in r"[a-zA-Z0-9_,;()\\ =<>#]{0,80}"
        ) {
            let _ = parse(&input);
        }
    }

    #[test]
    fn handwritten_compare_with_colliding_heads_is_renamed_apart() {
        // Both operand rules use W; the reconstruction must not fuse them
        // into one object variable.
        let program =
            parse(r"attribute(W, shape, cube)\attribute(W, shape, sphere)\=size\").unwrap();
        let target = program.target();
        let vars: Vec<&str> = target.body[..2]
            .iter()
            .flat_map(|a| a.variables())
            .collect();
        assert_eq!(vars.len(), 2);
        assert_ne!(vars[0], vars[1], "operand variables must stay distinct");
    }

    #[test]
    fn query_and_attribute_compare_round_trip() {
        let query = compile_chain(&[
            ("scene", vec![]),
            ("filter_shape", vec!["cube"]),
            ("unique", vec![]),
            ("query_color", vec![]),
        ]);
        let sentence = serialize(&query).unwrap();
        assert_eq!(sentence.as_str(), r"attribute(W, shape, cube)\Q(color)\");
        assert_eq!(parse(sentence.as_str()).unwrap(), query);

        let nodes = vec![
            ProgramNode::new("scene", vec![], vec![]),
            ProgramNode::new("filter_shape", vec![0], vec!["cube"]),
            ProgramNode::new("unique", vec![1], vec![]),
            ProgramNode::new("scene", vec![], vec![]),
            ProgramNode::new("filter_shape", vec![3], vec!["sphere"]),
            ProgramNode::new("unique", vec![4], vec![]),
            ProgramNode::new("equal_size", vec![2, 5], vec![]),
        ];
        let compare = compile(&FunctionalProgram::new(nodes).unwrap()).unwrap();
        let sentence = serialize(&compare).unwrap();
        assert_eq!(
            sentence.as_str(),
            r"attribute(W, shape, cube)\attribute(X, shape, sphere)\=size\"
        );
        assert_eq!(parse(sentence.as_str()).unwrap(), compare);
    }
}
