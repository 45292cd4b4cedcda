//! Surrogation and the consistency-set algebra.
//!
//! To hand a mixed term to a component decision procedure, every topmost
//! subterm rooted in the *other* component's function symbols is replaced by
//! a fresh set variable, its surrogate. Boolean connectives are shared and
//! traversed. The consistency set over an atom set Θ is the family of all
//! full sign assignments (types) over Θ; a point of a model realizes exactly
//! one type.
//!
//! Also here: the depth measures that drive the plain-satisfiability
//! procedure — E-depth (nesting under a set of function symbols) and the
//! alternation depth between the two components — and the bounded covering
//! iteration `t^{<=m}(x)`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::adl::{fnv1a, AssertionSet, Component, FuncDecl, Term, TermKind, SURROGATE_PREFIX};
use crate::{Error, ResourceKind, Result};

/// Bijective table between surrogated terms and their reserved variables.
///
/// Names are derived from the canonical serialization of the term, so the
/// same term receives the same surrogate in every run and in every table.
#[derive(Debug, Clone, Default)]
pub struct SurrogateTable {
    forward: HashMap<Term, String>,
    backward: HashMap<String, Term>,
}

impl SurrogateTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The deterministic surrogate name for a term.
    pub fn surrogate_name(t: &Term) -> String {
        format!("{}{:016x}", SURROGATE_PREFIX, fnv1a(t.canonical().as_bytes()))
    }

    /// Registers the term (idempotent) and returns its surrogate variable.
    pub fn intern(&mut self, t: &Term) -> Term {
        let name = Self::surrogate_name(t);
        if let Some(prev) = self.backward.get(&name) {
            // A 64-bit collision between distinct canonical strings would
            // break bijectivity; treat it as unreachable.
            assert!(prev == t, "surrogate name collision: {name}");
        } else {
            self.forward.insert(t.clone(), name.clone());
            self.backward.insert(name.clone(), t.clone());
        }
        Term::var(name)
    }

    pub fn term_of(&self, surrogate_name: &str) -> Option<&Term> {
        self.backward.get(surrogate_name)
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }
}

/// `sur_i(t)`: replaces every topmost subterm rooted in the other component's
/// function symbols by its surrogate. Variables (surrogates included) and
/// Boolean structure pass through.
pub fn surrogate(i: Component, t: &Term, tbl: &mut SurrogateTable) -> Term {
    let alien = i.other();
    debug_assert!(alien != Component::Shared, "surrogation needs a proper component");
    match t.kind() {
        TermKind::Var(_) | TermKind::Top | TermKind::Bot => t.clone(),
        TermKind::Not(a) => Term::not(&surrogate(i, a, tbl)),
        TermKind::And(a, b) => Term::and(&surrogate(i, a, tbl), &surrogate(i, b, tbl)),
        TermKind::Or(a, b) => Term::or(&surrogate(i, a, tbl), &surrogate(i, b, tbl)),
        TermKind::App(decl, args) => {
            if decl.component == alien {
                tbl.intern(t)
            } else {
                let args: Vec<Term> = args.iter().map(|a| surrogate(i, a, tbl)).collect();
                Term::app(decl, &args).expect("arity preserved under surrogation")
            }
        }
    }
}

/// Replaces surrogate variables by their originating terms, recursively,
/// until none remain.
pub fn desurrogate(t: &Term, tbl: &SurrogateTable) -> Result<Term> {
    match t.kind() {
        TermKind::Var(n) => {
            if n.starts_with(SURROGATE_PREFIX) {
                let original = tbl
                    .term_of(n)
                    .ok_or_else(|| Error::UnknownSurrogate(n.clone()))?;
                desurrogate(original, tbl)
            } else {
                Ok(t.clone())
            }
        }
        TermKind::Top | TermKind::Bot => Ok(t.clone()),
        TermKind::Not(a) => Ok(Term::not(&desurrogate(a, tbl)?)),
        TermKind::And(a, b) => Ok(Term::and(&desurrogate(a, tbl)?, &desurrogate(b, tbl)?)),
        TermKind::Or(a, b) => Ok(Term::or(&desurrogate(a, tbl)?, &desurrogate(b, tbl)?)),
        TermKind::App(decl, args) => {
            let args: Result<Vec<Term>> = args.iter().map(|a| desurrogate(a, tbl)).collect();
            Term::app(decl, &args?)
        }
    }
}

/// The topmost alien subterms of `t` from component `i`'s point of view.
fn topmost_alien(i: Component, t: &Term, out: &mut Vec<Term>) {
    let alien = i.other();
    match t.kind() {
        TermKind::Var(_) | TermKind::Top | TermKind::Bot => {}
        TermKind::Not(a) => topmost_alien(i, a, out),
        TermKind::And(a, b) | TermKind::Or(a, b) => {
            topmost_alien(i, a, out);
            topmost_alien(i, b, out);
        }
        TermKind::App(decl, args) => {
            if decl.component == alien {
                if !out.contains(t) {
                    out.push(t.clone());
                }
            } else {
                for a in args {
                    topmost_alien(i, a, out);
                }
            }
        }
    }
}

/// An ordered, duplicate-free set of type atoms. The order is canonical, so
/// type materialization is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypeAtomSet {
    atoms: Vec<Term>,
}

impl TypeAtomSet {
    pub fn from_terms<I: IntoIterator<Item = Term>>(items: I) -> Self {
        let set: BTreeSet<Term> = items.into_iter().collect();
        TypeAtomSet { atoms: set.into_iter().collect() }
    }

    pub fn atoms(&self) -> &[Term] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// `sub^i(Θ)`: all subterms of the topmost alien subterms of Θ, plus all set
/// variables of Θ, in canonical order.
pub fn sub_i_terms(i: Component, terms: &[Term]) -> TypeAtomSet {
    let mut aliens = Vec::new();
    for t in terms {
        topmost_alien(i, t, &mut aliens);
    }
    let mut atoms: BTreeSet<Term> = BTreeSet::new();
    for alien in &aliens {
        for sub in alien.subterms() {
            atoms.insert(sub);
        }
    }
    for t in terms {
        for v in t.free_vars() {
            atoms.insert(Term::var(v));
        }
    }
    TypeAtomSet { atoms: atoms.into_iter().collect() }
}

/// `sub^i(Γ) = sub^i(term(Γ))`.
pub fn alien_closure(i: Component, gamma: &AssertionSet) -> TypeAtomSet {
    sub_i_terms(i, &gamma.terms())
}

/// One type: a full sign assignment over an atom set. Two descriptors over
/// the same atoms are equal iff their sign vectors are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypeDescriptor {
    atoms: Arc<TypeAtomSet>,
    signs: u64,
}

impl TypeDescriptor {
    pub fn new(atoms: Arc<TypeAtomSet>, signs: u64) -> Self {
        TypeDescriptor { atoms, signs }
    }

    pub fn signs(&self) -> u64 {
        self.signs
    }

    pub fn positive(&self, idx: usize) -> bool {
        self.signs >> idx & 1 == 1
    }

    /// The conjunction `±χ1 ∧ ±χ2 ∧ …` in atom order; the empty type is top.
    pub fn materialize(&self) -> Term {
        Term::conj(self.atoms.atoms().iter().enumerate().map(|(k, atom)| {
            if self.positive(k) {
                atom.clone()
            } else {
                Term::not(atom)
            }
        }))
    }
}

/// The consistency set over Θ: all `2^|Θ|` types, in sign-vector order.
pub fn consistency_set(atoms: &Arc<TypeAtomSet>, max_atoms: usize) -> Result<Vec<TypeDescriptor>> {
    if atoms.len() > max_atoms {
        return Err(Error::ResourceCap { kind: ResourceKind::TypeCap, limit: max_atoms });
    }
    let n = atoms.len() as u32;
    Ok((0..(1u64 << n))
        .map(|signs| TypeDescriptor::new(atoms.clone(), signs))
        .collect())
}

/// E-depth: nesting depth counted only under symbols satisfying `in_e`.
pub fn e_depth_by<F: Fn(&FuncDecl) -> bool>(in_e: &F, t: &Term) -> u32 {
    match t.kind() {
        TermKind::Var(_) | TermKind::Top | TermKind::Bot => 0,
        TermKind::Not(a) => e_depth_by(in_e, a),
        TermKind::And(a, b) | TermKind::Or(a, b) => e_depth_by(in_e, a).max(e_depth_by(in_e, b)),
        TermKind::App(decl, args) => {
            let inner = args.iter().map(|a| e_depth_by(in_e, a)).max().unwrap_or(0);
            if in_e(decl) {
                inner + 1
            } else {
                inner
            }
        }
    }
}

/// E-depth for an explicit set of symbol names.
pub fn e_depth(e: &BTreeSet<String>, t: &Term) -> u32 {
    e_depth_by(&|d: &FuncDecl| e.contains(&d.name), t)
}

/// E-depth where E is all symbols of one component.
pub fn component_depth(c: Component, t: &Term) -> u32 {
    e_depth_by(&|d: &FuncDecl| d.component == c, t)
}

/// `d_E(Γ)`: the maximum over the terms of Γ.
pub fn component_depth_set(c: Component, gamma: &AssertionSet) -> u32 {
    gamma.terms().iter().map(|t| component_depth(c, t)).max().unwrap_or(0)
}

/// The 1- and 2-alternation depths and their sum.
///
/// The 1-alternation depth is the length of the longest nested symbol chain
/// alternating between the components that starts (outermost) with a
/// component-2 symbol; the 2-alternation depth starts with a component-1
/// symbol. A lone symbol counts as a chain of length one.
pub fn alternation_depths(t: &Term) -> (u32, u32, u32) {
    let (a1, a2) = alt(t);
    (a1, a2, a1 + a2)
}

fn alt(t: &Term) -> (u32, u32) {
    match t.kind() {
        TermKind::Var(_) | TermKind::Top | TermKind::Bot => (0, 0),
        TermKind::Not(a) => alt(a),
        TermKind::And(a, b) | TermKind::Or(a, b) => {
            let (x1, x2) = alt(a);
            let (y1, y2) = alt(b);
            (x1.max(y1), x2.max(y2))
        }
        TermKind::App(decl, args) => {
            let (mut a1, mut a2) = (0, 0);
            for arg in args {
                let (x1, x2) = alt(arg);
                a1 = a1.max(x1);
                a2 = a2.max(x2);
            }
            match decl.component {
                // A component-1 symbol starts or extends chains counted by a2.
                Component::C1 => (a1, a2.max(a1 + 1)),
                Component::C2 => (a1.max(a2 + 1), a2),
                Component::Shared => {
                    debug_assert!(false, "universal-role symbols have no alternation depth");
                    (a1, a2)
                }
            }
        }
    }
}

/// `a(Θ)`: the maximum alternation depth over a set of terms.
pub fn alternation_depth_terms(terms: &[Term]) -> u32 {
    terms.iter().map(|t| alternation_depths(t).2).max().unwrap_or(0)
}

/// `t^m(x)`: m-fold self-composition of a term with at most one free
/// variable. Substituting into a closed term is the identity.
pub fn iterate_power(t: &Term, m: u32) -> Result<Term> {
    let vars = t.free_vars();
    if vars.len() > 1 {
        return Err(Error::Invalid(format!(
            "iterated term must have at most one free variable, got {}",
            vars.len()
        )));
    }
    let var = vars.into_iter().next();
    let x = match &var {
        Some(v) => Term::var(v.clone()),
        None => return Ok(if m == 0 { Term::top() } else { t.clone() }),
    };
    let var = var.unwrap();
    let mut acc = x;
    for _ in 0..m {
        acc = t.substitute(&var, &acc);
    }
    Ok(acc)
}

/// `t^{<=m}(x) = t^m(x) ∧ t^{<=m-1}(x)`, with `t^{<=0}(x) = x`.
pub fn iterate_cover(t: &Term, m: u32) -> Result<Term> {
    let vars = t.free_vars();
    if vars.len() > 1 {
        return Err(Error::Invalid(format!(
            "iterated term must have at most one free variable, got {}",
            vars.len()
        )));
    }
    let mut acc = match vars.iter().next() {
        Some(v) => Term::var(v.clone()),
        None => {
            // Closed covering term: every power above zero is t itself.
            let mut acc = Term::top();
            for k in 1..=m {
                let power = t.clone();
                acc = if k == 1 { power } else { Term::and(&power, &acc) };
            }
            return Ok(acc);
        }
    };
    for k in 1..=m {
        let power = iterate_power(t, k)?;
        acc = Term::and(&power, &acc);
    }
    Ok(acc)
}

/// Substitutes `arg` into a one-variable term (identity on closed terms).
pub fn apply_one_var(t: &Term, arg: &Term) -> Result<Term> {
    let vars = t.free_vars();
    match vars.len() {
        0 => Ok(t.clone()),
        1 => Ok(t.substitute(vars.iter().next().unwrap(), arg)),
        n => Err(Error::Invalid(format!("expected at most one free variable, got {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::{FuncInterp, Signature};

    /// f unary in component 1, g binary in component 2 — the mixed-term
    /// signature used throughout this module's examples.
    fn fg_sig() -> Signature {
        Signature::builder()
            .set_var("x")
            .unwrap()
            .set_var("y")
            .unwrap()
            .function_decl("f", 1, Component::C1, FuncInterp::Uninterpreted)
            .unwrap()
            .function_decl("g", 2, Component::C2, FuncInterp::Uninterpreted)
            .unwrap()
            .build()
    }

    fn mixed_term(sig: &Signature) -> Term {
        // f(g(x, f(g(x, y))))
        let x = sig.mk_var("x").unwrap();
        let y = sig.mk_var("y").unwrap();
        let g_inner = sig.mk_app("g", &[x.clone(), y]).unwrap();
        let f_inner = sig.mk_app("f", &[g_inner]).unwrap();
        let g_outer = sig.mk_app("g", &[x, f_inner]).unwrap();
        sig.mk_app("f", &[g_outer]).unwrap()
    }

    #[test]
    fn surrogate_replaces_topmost_alien_subterm() {
        let sig = fg_sig();
        let t = mixed_term(&sig);
        let mut tbl = SurrogateTable::new();
        let s = surrogate(Component::C1, &t, &mut tbl);
        // sur1(f(g(x, f(g(x, y))))) = f(x_{g(x, f(g(x, y)))})
        let g_outer = match t.kind() {
            TermKind::App(_, args) => args[0].clone(),
            _ => unreachable!(),
        };
        let expected = sig
            .mk_app("f", &[Term::var(SurrogateTable::surrogate_name(&g_outer))])
            .unwrap();
        assert_eq!(s, expected);
        assert_eq!(tbl.len(), 1);
    }

    #[test]
    fn surrogate_traverses_shared_booleans() {
        let sig = fg_sig();
        let x = sig.mk_var("x").unwrap();
        let y = sig.mk_var("y").unwrap();
        let fx = sig.mk_app("f", &[x.clone()]).unwrap();
        let gxy = sig.mk_app("g", &[x, y]).unwrap();
        let t = Term::and(&fx, &gxy);
        let mut tbl = SurrogateTable::new();
        // sur1(f(x) ∧ g(x, y)) = f(x) ∧ x_{g(x, y)}
        let s1 = surrogate(Component::C1, &t, &mut tbl);
        assert_eq!(
            s1,
            Term::and(&fx, &Term::var(SurrogateTable::surrogate_name(&gxy)))
        );
        // sur2(f(x) ∧ g(x, y)) = x_{f(x)} ∧ g(x, y)
        let s2 = surrogate(Component::C2, &t, &mut tbl);
        assert_eq!(
            s2,
            Term::and(&Term::var(SurrogateTable::surrogate_name(&fx)), &gxy)
        );
    }

    #[test]
    fn surrogate_is_identity_on_native_terms() {
        let sig = fg_sig();
        let x = sig.mk_var("x").unwrap();
        let t = sig.mk_app("f", &[x]).unwrap();
        let mut tbl = SurrogateTable::new();
        assert_eq!(surrogate(Component::C1, &t, &mut tbl), t);
        assert!(tbl.is_empty());
    }

    #[test]
    fn desurrogate_inverts_surrogation() {
        let sig = fg_sig();
        let t = mixed_term(&sig);
        let mut tbl = SurrogateTable::new();
        for c in [Component::C1, Component::C2] {
            let s = surrogate(c, &t, &mut tbl);
            assert_eq!(desurrogate(&s, &tbl).unwrap(), t);
        }
    }

    #[test]
    fn desurrogate_unknown_surrogate_errors() {
        let tbl = SurrogateTable::new();
        let t = Term::var("$deadbeefdeadbeef");
        assert!(matches!(
            desurrogate(&t, &tbl),
            Err(Error::UnknownSurrogate(_))
        ));
    }

    #[test]
    fn sub1_of_worked_example() {
        let sig = fg_sig();
        let t = mixed_term(&sig);
        let atoms = sub_i_terms(Component::C1, &[t.clone()]);
        // {g(x, f(g(x, y))), f(g(x, y)), g(x, y), x, y}
        let x = sig.mk_var("x").unwrap();
        let y = sig.mk_var("y").unwrap();
        let gxy = sig.mk_app("g", &[x.clone(), y.clone()]).unwrap();
        let fgxy = sig.mk_app("f", &[gxy.clone()]).unwrap();
        let gouter = sig.mk_app("g", &[x.clone(), fgxy.clone()]).unwrap();
        let expected: BTreeSet<Term> = [gouter, fgxy, gxy, x, y].into_iter().collect();
        let got: BTreeSet<Term> = atoms.atoms().iter().cloned().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn sub1_of_boolean_term_is_variables() {
        let sig = fg_sig();
        let t = Term::and(
            &sig.mk_var("x").unwrap(),
            &Term::not(&sig.mk_var("y").unwrap()),
        );
        let atoms = sub_i_terms(Component::C1, &[t]);
        let names: Vec<String> = atoms.atoms().iter().map(|a| a.canonical()).collect();
        assert_eq!(names, vec!["x", "y"]);
    }

    #[test]
    fn sub1_includes_all_subterms_of_alien_roots() {
        // sub1({g(f(x))}) = {g(f(x)), f(x), x} with unary g in component 2.
        let sig = Signature::builder()
            .set_var("x")
            .unwrap()
            .function_decl("f", 1, Component::C1, FuncInterp::Uninterpreted)
            .unwrap()
            .function_decl("g", 1, Component::C2, FuncInterp::Uninterpreted)
            .unwrap()
            .build();
        let x = sig.mk_var("x").unwrap();
        let fx = sig.mk_app("f", &[x.clone()]).unwrap();
        let gfx = sig.mk_app("g", &[fx.clone()]).unwrap();
        let atoms = sub_i_terms(Component::C1, &[gfx.clone()]);
        let expected: BTreeSet<Term> = [gfx, fx, x].into_iter().collect();
        assert_eq!(atoms.atoms().iter().cloned().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn consistency_set_sizes() {
        let empty = Arc::new(TypeAtomSet::from_terms([]));
        let set = consistency_set(&empty, 16).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].materialize(), Term::top());

        let atoms = Arc::new(TypeAtomSet::from_terms([Term::var("x"), Term::var("y")]));
        assert_eq!(consistency_set(&atoms, 16).unwrap().len(), 4);

        let many = Arc::new(TypeAtomSet::from_terms(
            (0..17).map(|k| Term::var(format!("v{k:02}"))),
        ));
        assert!(matches!(
            consistency_set(&many, 16),
            Err(Error::ResourceCap { kind: ResourceKind::TypeCap, .. })
        ));
    }

    #[test]
    fn e_depth_examples() {
        let sig = Signature::builder()
            .set_var("x")
            .unwrap()
            .set_var("y")
            .unwrap()
            .function_decl("f", 1, Component::C1, FuncInterp::Uninterpreted)
            .unwrap()
            .function_decl("g", 1, Component::C2, FuncInterp::Uninterpreted)
            .unwrap()
            .build();
        let boolean = Term::and(
            &sig.mk_var("x").unwrap(),
            &Term::not(&sig.mk_var("y").unwrap()),
        );
        let f_set: BTreeSet<String> = ["f".to_string()].into();
        let g_set: BTreeSet<String> = ["g".to_string()].into();
        assert_eq!(e_depth(&f_set, &boolean), 0);

        // f(g(f(x))): d_F = 2, d_G = 1.
        let x = sig.mk_var("x").unwrap();
        let fx = sig.mk_app("f", &[x]).unwrap();
        let gfx = sig.mk_app("g", &[fx]).unwrap();
        let t = sig.mk_app("f", &[gfx]).unwrap();
        assert_eq!(e_depth(&f_set, &t), 2);
        assert_eq!(e_depth(&g_set, &t), 1);
    }

    #[test]
    fn alternation_depth_examples() {
        let sig = Signature::builder()
            .set_var("x")
            .unwrap()
            .set_var("y")
            .unwrap()
            .function_decl("f", 1, Component::C1, FuncInterp::Uninterpreted)
            .unwrap()
            .function_decl("g", 1, Component::C2, FuncInterp::Uninterpreted)
            .unwrap()
            .build();
        let boolean = Term::and(&sig.mk_var("x").unwrap(), &sig.mk_var("y").unwrap());
        assert_eq!(alternation_depths(&boolean), (0, 0, 0));

        // f(g(f(x))): a1 = 2 (chain g,f), a2 = 3 (chain f,g,f), a = 5.
        let x = sig.mk_var("x").unwrap();
        let fx = sig.mk_app("f", &[x.clone()]).unwrap();
        let gfx = sig.mk_app("g", &[fx]).unwrap();
        let t = sig.mk_app("f", &[gfx]).unwrap();
        assert_eq!(alternation_depths(&t), (2, 3, 5));

        // Pure component-1 term f(f(x)): a1 = 0, a2 = 1.
        let ffx = sig
            .mk_app("f", &[sig.mk_app("f", &[x]).unwrap()])
            .unwrap();
        assert_eq!(alternation_depths(&ffx), (0, 1, 1));
    }

    #[test]
    fn iterate_cover_unfolds() {
        let sig = Signature::builder()
            .set_var("x")
            .unwrap()
            .function_decl("f", 1, Component::C1, FuncInterp::Uninterpreted)
            .unwrap()
            .build();
        let x = sig.mk_var("x").unwrap();
        let t = sig.mk_app("f", &[x.clone()]).unwrap();
        assert_eq!(iterate_cover(&t, 0).unwrap(), x);
        // t^{<=1}(x) = t(x) ∧ x
        assert_eq!(iterate_cover(&t, 1).unwrap(), Term::and(&t, &x));
        // t^{<=2}(x) = t(t(x)) ∧ (t(x) ∧ x)
        let ttx = sig.mk_app("f", &[t.clone()]).unwrap();
        assert_eq!(
            iterate_cover(&t, 2).unwrap(),
            Term::and(&ttx, &Term::and(&t, &x))
        );
    }

    #[test]
    fn surrogated_terms_have_no_alien_symbols_and_depth_shrinks() {
        let sig = fg_sig();
        let t = mixed_term(&sig);
        let mut tbl = SurrogateTable::new();
        for c in [Component::C1, Component::C2] {
            let s = surrogate(c, &t, &mut tbl);
            assert!(!s.uses_component(c.other()));
            assert!(component_depth(c, &s) <= component_depth(c, &t));
            assert_eq!(component_depth(c.other(), &s), 0);
        }
    }
}
