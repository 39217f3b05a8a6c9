//! Substitutions and first-order unification over flat terms.

use super::{Atom, Constant, Term};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// An idempotent mapping from variable names to terms.
///
/// Bindings are kept fully resolved: no variable maps to itself and no image
/// mentions a bound variable, so applying a substitution twice equals applying
/// it once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

/// Composition failure: one variable resolves to two distinct constants.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("variable {var} resolves to both {first} and {second}")]
pub struct ComposeConflict {
    pub var: String,
    pub first: Constant,
    pub second: Constant,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.bindings.iter().map(|(v, t)| (v.as_str(), t))
    }

    /// Replace `term` by its image when it is a bound variable.
    pub fn resolve(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => self
                .bindings
                .get(v)
                .cloned()
                .unwrap_or_else(|| term.clone()),
            Term::Const(_) => term.clone(),
        }
    }

    /// Replace every bound variable in `atom`; constants and free variables
    /// pass through unchanged.
    pub fn apply(&self, atom: &Atom) -> Atom {
        match atom {
            Atom::App { pred, args } => Atom::App {
                pred: *pred,
                args: args.iter().map(|t| self.resolve(t)).collect(),
            },
            Atom::Count { rule, arg, result } => Atom::Count {
                rule: *rule,
                arg: self.resolve(arg),
                result: self.resolve(result),
            },
        }
    }

    /// Add `var -> term`, keeping the substitution idempotent. Flat terms make
    /// this cheap: resolve the image once and rewrite any existing image that
    /// still mentions `var`.
    pub(crate) fn bind(&mut self, var: &str, term: &Term) {
        let image = self.resolve(term);
        if matches!(&image, Term::Var(v) if v == var) {
            return;
        }
        for existing in self.bindings.values_mut() {
            if matches!(existing, Term::Var(v) if v == var) {
                *existing = image.clone();
            }
        }
        self.bindings.insert(var.to_string(), image);
    }

    /// Sequential composition: `later` applies after `self`, so for every atom
    /// `a`, `compose(self, later).apply(a) == later.apply(&self.apply(a))`.
    ///
    /// Errors when both substitutions bind the same variable to distinct
    /// constants. When `later` rebinds a variable of `self` to a non-constant,
    /// `self`'s (resolved) image wins, as the composition law requires.
    pub fn compose(&self, later: &Substitution) -> Result<Substitution, ComposeConflict> {
        let mut out = BTreeMap::new();
        for (var, term) in &self.bindings {
            let image = later.resolve(term);
            if !matches!(&image, Term::Var(v) if v == var) {
                out.insert(var.clone(), image);
            }
        }
        for (var, term) in &later.bindings {
            if !self.bindings.contains_key(var) {
                out.insert(var.clone(), term.clone());
                continue;
            }
            if let (Some(Term::Const(first)), Term::Const(second)) = (out.get(var), term) {
                if first != second {
                    return Err(ComposeConflict {
                        var: var.clone(),
                        first: first.clone(),
                        second: second.clone(),
                    });
                }
            }
        }
        Ok(Substitution { bindings: out })
    }

    /// True when applying twice equals applying once.
    pub fn is_idempotent(&self) -> bool {
        self.bindings.values().all(|t| match t {
            Term::Var(v) => !self.bindings.contains_key(v),
            Term::Const(_) => true,
        })
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        let mut subst = Substitution::new();
        for (var, term) in iter {
            subst.bind(&var, &term);
        }
        subst
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (var, term)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{var} -> {term}")?;
        }
        write!(f, "}}")
    }
}

/// Most-general unifier of two atoms. Returns `None` when the predicates,
/// arities, or constants clash; failure is a value, not an error.
pub fn unify(a: &Atom, b: &Atom) -> Option<Substitution> {
    extend(&Substitution::new(), a, b)
}

/// Unify under an existing substitution, returning the extended substitution.
pub(crate) fn extend(base: &Substitution, a: &Atom, b: &Atom) -> Option<Substitution> {
    let mut subst = base.clone();
    match (a, b) {
        (Atom::App { pred: pa, args: aa }, Atom::App { pred: pb, args: ab }) => {
            if pa != pb || aa.len() != ab.len() {
                return None;
            }
            for (x, y) in aa.iter().zip(ab) {
                unify_terms(&mut subst, x, y)?;
            }
        }
        (
            Atom::Count {
                rule: ra,
                arg: xa,
                result: za,
            },
            Atom::Count {
                rule: rb,
                arg: xb,
                result: zb,
            },
        ) => {
            if ra != rb {
                return None;
            }
            unify_terms(&mut subst, xa, xb)?;
            unify_terms(&mut subst, za, zb)?;
        }
        _ => return None,
    }
    Some(subst)
}

fn unify_terms(subst: &mut Substitution, a: &Term, b: &Term) -> Option<()> {
    let ra = subst.resolve(a);
    let rb = subst.resolve(b);
    match (&ra, &rb) {
        (Term::Const(x), Term::Const(y)) => (x == y).then_some(()),
        (Term::Var(v), Term::Var(w)) if v == w => Some(()),
        (Term::Var(v), _) => {
            subst.bind(v, &rb);
            Some(())
        }
        (_, Term::Var(w)) => {
            subst.bind(w, &ra);
            Some(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::AttrKind;
    use proptest::prelude::*;

    fn attr(id: Term, kind: &str, value: Term) -> Atom {
        Atom::attribute(id, Term::word(kind), value)
    }

    #[test]
    fn unify_binds_forced_matches() {
        let subst = unify(
            &attr(Term::var("W"), "size", Term::word("large")),
            &attr(Term::int(1), "size", Term::word("large")),
        )
        .unwrap();
        assert_eq!(subst.get("W"), Some(&Term::int(1)));
        assert_eq!(subst.len(), 1);
    }

    #[test]
    fn unify_fails_on_constant_clash() {
        assert_eq!(
            unify(
                &attr(Term::var("W"), "color", Term::word("blue")),
                &attr(Term::int(1), "color", Term::word("green")),
            ),
            None
        );
    }

    #[test]
    fn unify_binds_both_relation_variables() {
        let subst = unify(
            &Atom::relation(Term::var("X"), Term::var("Y"), Term::word("left")),
            &Atom::relation(Term::int(2), Term::int(3), Term::word("left")),
        )
        .unwrap();
        assert_eq!(subst.get("X"), Some(&Term::int(2)));
        assert_eq!(subst.get("Y"), Some(&Term::int(3)));
    }

    #[test]
    fn unify_fails_across_predicates_and_count_indices() {
        assert_eq!(
            unify(
                &Atom::object(Term::var("X")),
                &Atom::rule_ref(0, Term::int(1))
            ),
            None
        );
        assert_eq!(
            unify(
                &Atom::count(0, Term::var("W"), Term::var("C")),
                &Atom::count(1, Term::var("W"), Term::int(2)),
            ),
            None
        );
        let subst = unify(
            &Atom::count(0, Term::var("W"), Term::var("C")),
            &Atom::count(0, Term::var("W"), Term::int(2)),
        )
        .unwrap();
        assert_eq!(subst.get("C"), Some(&Term::int(2)));
    }

    #[test]
    fn apply_replaces_only_bound_variables() {
        let subst: Substitution = [("W".to_string(), Term::int(1))].into_iter().collect();
        assert_eq!(
            subst.apply(&attr(Term::var("W"), "color", Term::var("B"))),
            attr(Term::int(1), "color", Term::var("B"))
        );
        let identity = Substitution::new();
        let ground = Atom::relation(Term::int(1), Term::int(2), Term::word("left"));
        assert_eq!(identity.apply(&ground), ground);
        let pair: Substitution = [
            ("X".to_string(), Term::int(2)),
            ("Y".to_string(), Term::int(3)),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            pair.apply(&Atom::same_attr(
                AttrKind::Color,
                Term::var("X"),
                Term::var("Y")
            )),
            Atom::same_attr(AttrKind::Color, Term::int(2), Term::int(3))
        );
    }

    #[test]
    fn compose_chains_and_detects_conflicts() {
        let s1: Substitution = [("W".to_string(), Term::var("X"))].into_iter().collect();
        let s2: Substitution = [("X".to_string(), Term::int(1))].into_iter().collect();
        let composed = s1.compose(&s2).unwrap();
        assert_eq!(composed.get("W"), Some(&Term::int(1)));
        assert_eq!(composed.get("X"), Some(&Term::int(1)));
        assert!(composed.is_idempotent());

        let left_identity = Substitution::new().compose(&s2).unwrap();
        assert_eq!(left_identity, s2);

        let c1: Substitution = [("X".to_string(), Term::int(1))].into_iter().collect();
        let c2: Substitution = [("X".to_string(), Term::int(2))].into_iter().collect();
        let err = c1.compose(&c2).unwrap_err();
        assert_eq!(err.var, "X");
    }

    // --- generators ---------------------------------------------------

    prop_compose! {
        fn arb_constant()(choice in 0..3u8, word in "[a-z][a-z0-9]{0,4}", n in 0..20u64) -> Constant {
            match choice {
                0 => Constant::Int(n),
                _ => Constant::Word(word),
            }
        }
    }

    prop_compose! {
        fn arb_term()(is_var in proptest::bool::ANY, var in "[A-Z]", c in arb_constant()) -> Term {
            if is_var { Term::Var(var) } else { Term::Const(c) }
        }
    }

    fn arb_atom() -> impl Strategy<Value = Atom> {
        let term = arb_term;
        prop_oneof![
            (term(), term(), term()).prop_map(|(a, b, c)| Atom::attribute(a, b, c)),
            (term(), term(), term()).prop_map(|(a, b, c)| Atom::relation(a, b, c)),
            (term(), term()).prop_map(|(a, b)| Atom::same_attr(AttrKind::Color, a, b)),
            (term(), term()).prop_map(|(a, b)| Atom::greater_than(a, b)),
            term().prop_map(Atom::object),
            (0..4usize, term(), term()).prop_map(|(i, a, b)| Atom::count(i, a, b)),
        ]
    }

    proptest! {
        // Soundness: a successful unifier makes both atoms identical.
        #[test]
        fn unifier_makes_atoms_equal(a in arb_atom(), b in arb_atom()) {
            if let Some(subst) = unify(&a, &b) {
                prop_assert_eq!(subst.apply(&a), subst.apply(&b));
                prop_assert!(subst.is_idempotent());
            }
        }

        // Most-generality: unifying an atom with one of its ground instances
        // binds exactly the atom's variables.
        #[test]
        fn unify_with_ground_instance_binds_exactly_the_variables(
            a in arb_atom(),
            fill in proptest::collection::vec(arb_constant(), 6),
        ) {
            let mut ground = a.clone();
            let vars: Vec<String> = a.variables().iter().map(|v| v.to_string()).collect();
            let grounding: Substitution = vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), Term::Const(fill[i % fill.len()].clone())))
                .collect();
            ground = grounding.apply(&ground);

            let subst = unify(&a, &ground).expect("an atom unifies with its own instance");
            let mut bound: Vec<&str> = subst.iter().map(|(v, _)| v).collect();
            let mut expected: Vec<&str> = vars.iter().map(String::as_str).collect();
            bound.sort_unstable();
            bound.dedup();
            expected.sort_unstable();
            expected.dedup();
            prop_assert_eq!(bound, expected);
            prop_assert_eq!(subst.apply(&a), ground);
        }

        // Composition law and idempotence, for the join pattern the engine
        // uses: the later substitution binds to ground terms only.
        #[test]
        fn compose_obeys_the_application_law(
            a in arb_atom(),
            vars1 in proptest::collection::vec("[A-Z]", 0..3),
            imgs1 in proptest::collection::vec(arb_term(), 3),
            vars2 in proptest::collection::vec("[A-Z]", 0..3),
            imgs2 in proptest::collection::vec(arb_constant(), 3),
        ) {
            let s1: Substitution = vars1
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), imgs1[i].clone()))
                .collect();
            let s2: Substitution = vars2
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), Term::Const(imgs2[i].clone())))
                .collect();
            prop_assert!(s1.is_idempotent());
            prop_assert!(s2.is_idempotent());
            if let Ok(composed) = s1.compose(&s2) {
                prop_assert!(composed.is_idempotent());
                prop_assert_eq!(composed.apply(&a), s2.apply(&s1.apply(&a)));
            }
        }
    }
}
