//! Abstract description language: signatures, terms, assertions.
//!
//! A signature declares four pairwise disjoint name pools — set variables,
//! object variables, relation symbols, function symbols — and tags every
//! relation and function symbol with the component it belongs to. Terms are
//! built from set variables and Boolean connectives by applying function
//! symbols; assertions are term inclusions `t1 <= t2`, role assertions
//! `R(a, b)`, and memberships `a : t`.

pub mod json;
mod term;

pub use term::{Term, TermKind, SURROGATE_PREFIX};
pub(crate) use term::fnv1a;

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::{Error, Result};

/// Which side of a fusion a symbol belongs to. Boolean connectives are shared
/// and carry no tag; `Shared` is reserved for the universal-role symbols,
/// which belong to the extended system as a whole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    C1,
    C2,
    Shared,
}

impl Component {
    /// The other fusion component. `Shared` has no dual.
    pub fn other(self) -> Component {
        match self {
            Component::C1 => Component::C2,
            Component::C2 => Component::C1,
            Component::Shared => Component::Shared,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::C1 => "1",
            Component::C2 => "2",
            Component::Shared => "shared",
        }
    }
}

/// A role description. Only named roles are interpretable by the shipped
/// reasoners; complement, conjunction, and union exist so that translation
/// of such descriptions can be round-tripped, and are rejected by validation
/// before any reasoning happens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoleExpr {
    Name(String),
    Complement(Box<RoleExpr>),
    And(Box<RoleExpr>, Box<RoleExpr>),
    Or(Box<RoleExpr>, Box<RoleExpr>),
}

impl RoleExpr {
    pub fn is_name(&self) -> bool {
        matches!(self, RoleExpr::Name(_))
    }

    pub fn canonical(&self) -> String {
        match self {
            RoleExpr::Name(n) => n.clone(),
            RoleExpr::Complement(r) => format!("(not {})", r.canonical()),
            RoleExpr::And(a, b) => format!("(and {} {})", a.canonical(), b.canonical()),
            RoleExpr::Or(a, b) => format!("(or {} {})", a.canonical(), b.canonical()),
        }
    }
}

/// Fixed interpretation of a function symbol over a role, if any.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FuncInterp {
    /// `exists R . C` — unary.
    Exists(RoleExpr),
    /// `forall R . C` — unary.
    Forall(RoleExpr),
    /// `atleast n R` — nullary (unqualified).
    AtLeast(u32, RoleExpr),
    /// `atmost n R` — nullary (unqualified).
    AtMost(u32, RoleExpr),
    /// `exists U . C` over the universal role — unary.
    ExistsUniversal,
    /// `forall U . C` over the universal role — unary.
    ForallUniversal,
    /// No fixed semantics; usable for surrogation but not for reasoning or
    /// model evaluation.
    Uninterpreted,
}

impl FuncInterp {
    /// The role name this symbol is about, when it is a named role.
    pub fn role_name(&self) -> Option<&str> {
        match self {
            FuncInterp::Exists(RoleExpr::Name(n))
            | FuncInterp::Forall(RoleExpr::Name(n))
            | FuncInterp::AtLeast(_, RoleExpr::Name(n))
            | FuncInterp::AtMost(_, RoleExpr::Name(n)) => Some(n),
            _ => None,
        }
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, FuncInterp::ExistsUniversal | FuncInterp::ForallUniversal)
    }
}

/// A declared function symbol.
#[derive(Debug, Clone)]
pub struct FuncDecl {
    pub name: String,
    pub arity: usize,
    pub component: Component,
    pub interp: FuncInterp,
    /// Declaration index within the governing signature; used only for
    /// canonical ordering. Not part of symbol identity.
    pub index: u32,
}

impl PartialEq for FuncDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.arity == other.arity
            && self.component == other.component
            && self.interp == other.interp
    }
}
impl Eq for FuncDecl {}
impl std::hash::Hash for FuncDecl {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state);
        self.arity.hash(state);
        self.component.hash(state);
        self.interp.hash(state);
    }
}

/// A declared relation symbol with its model-class restrictions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelDecl {
    pub name: String,
    pub component: Component,
    /// Interpretations must be transitively closed.
    pub transitive: bool,
    /// Interpretations must be partial functions.
    pub functional: bool,
}

/// A signature: the four name pools plus symbol declarations.
///
/// Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone, Default)]
pub struct Signature {
    set_vars: BTreeSet<String>,
    obj_vars: BTreeSet<String>,
    relations: Vec<Arc<RelDecl>>,
    functions: Vec<Arc<FuncDecl>>,
}

impl Signature {
    pub fn builder() -> SignatureBuilder {
        SignatureBuilder::default()
    }

    pub fn set_vars(&self) -> &BTreeSet<String> {
        &self.set_vars
    }

    pub fn obj_vars(&self) -> &BTreeSet<String> {
        &self.obj_vars
    }

    pub fn relations(&self) -> &[Arc<RelDecl>] {
        &self.relations
    }

    pub fn functions(&self) -> &[Arc<FuncDecl>] {
        &self.functions
    }

    pub fn relation(&self, name: &str) -> Option<&Arc<RelDecl>> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Arc<FuncDecl>> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// The `forall:R` symbol for a named role, used as covering term head.
    pub fn forall_symbol(&self, role: &str) -> Option<&Arc<FuncDecl>> {
        self.functions.iter().find(
            |f| matches!(&f.interp, FuncInterp::Forall(RoleExpr::Name(n)) if n == role),
        )
    }

    /// Builds an application by symbol name, checking declaration and arity.
    pub fn mk_app(&self, name: &str, args: &[Term]) -> Result<Term> {
        let decl = self
            .function(name)
            .ok_or_else(|| Error::UndeclaredSymbol(name.to_string()))?;
        Term::app(decl, args)
    }

    /// Builds a declared set variable.
    pub fn mk_var(&self, name: &str) -> Result<Term> {
        if self.set_vars.contains(name) {
            Ok(Term::var(name))
        } else {
            Err(Error::UndeclaredSymbol(name.to_string()))
        }
    }

    /// Checks that every symbol of the term is declared (or a surrogate).
    pub fn validate_term(&self, t: &Term) -> Result<()> {
        for sub in t.subterms() {
            match sub.kind() {
                TermKind::Var(n) => {
                    if !n.starts_with(SURROGATE_PREFIX) && !self.set_vars.contains(n) {
                        return Err(Error::UndeclaredSymbol(n.clone()));
                    }
                }
                TermKind::App(decl, _) => {
                    let declared = self
                        .function(&decl.name)
                        .ok_or_else(|| Error::UndeclaredSymbol(decl.name.clone()))?;
                    if **declared != **decl {
                        return Err(Error::SymbolCollision(decl.name.clone()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// True when no universal-role symbol is declared; the shipped model
    /// classes are all closed under disjoint unions otherwise.
    pub fn is_local(&self) -> bool {
        !self.functions.iter().any(|f| f.interp.is_universal())
    }
}

/// Incremental signature construction with pool-disjointness checks.
#[derive(Debug, Default)]
pub struct SignatureBuilder {
    sig: Signature,
    next_index: u32,
}

impl SignatureBuilder {
    fn check_fresh(&self, name: &str) -> Result<()> {
        if self.sig.set_vars.contains(name)
            || self.sig.obj_vars.contains(name)
            || self.sig.relation(name).is_some()
            || self.sig.function(name).is_some()
        {
            return Err(Error::SymbolCollision(name.to_string()));
        }
        Ok(())
    }

    pub fn set_var(mut self, name: &str) -> Result<Self> {
        self.check_fresh(name)?;
        self.sig.set_vars.insert(name.to_string());
        Ok(self)
    }

    pub fn obj_var(mut self, name: &str) -> Result<Self> {
        self.check_fresh(name)?;
        self.sig.obj_vars.insert(name.to_string());
        Ok(self)
    }

    /// Declares a role together with its `exists:R` and `forall:R` symbols.
    pub fn role(mut self, component: Component, name: &str, transitive: bool, functional: bool) -> Result<Self> {
        self.check_fresh(name)?;
        self.sig.relations.push(Arc::new(RelDecl {
            name: name.to_string(),
            component,
            transitive,
            functional,
        }));
        let role = RoleExpr::Name(name.to_string());
        self = self.function_decl(
            &format!("exists:{name}"),
            1,
            component,
            FuncInterp::Exists(role.clone()),
        )?;
        self = self.function_decl(
            &format!("forall:{name}"),
            1,
            component,
            FuncInterp::Forall(role),
        )?;
        Ok(self)
    }

    /// Declares an unqualified number-restriction symbol (arity 0).
    pub fn number_restriction(mut self, component: Component, at_least: bool, n: u32, role: &str) -> Result<Self> {
        let role_expr = RoleExpr::Name(role.to_string());
        let (name, interp) = if at_least {
            (format!("atleast:{n}:{role}"), FuncInterp::AtLeast(n, role_expr))
        } else {
            (format!("atmost:{n}:{role}"), FuncInterp::AtMost(n, role_expr))
        };
        if self.sig.function(&name).is_some() {
            return Ok(self); // idempotent
        }
        self = self.function_decl(&name, 0, component, interp)?;
        Ok(self)
    }

    pub fn function_decl(
        mut self,
        name: &str,
        arity: usize,
        component: Component,
        interp: FuncInterp,
    ) -> Result<Self> {
        self.check_fresh(name)?;
        let index = self.next_index;
        self.next_index += 1;
        self.sig.functions.push(Arc::new(FuncDecl {
            name: name.to_string(),
            arity,
            component,
            interp,
            index,
        }));
        Ok(self)
    }

    /// The two universal-role symbols of the extended system.
    pub fn universal_role(mut self) -> Result<Self> {
        self = self.function_decl("existsU", 1, Component::Shared, FuncInterp::ExistsUniversal)?;
        self = self.function_decl("forallU", 1, Component::Shared, FuncInterp::ForallUniversal)?;
        Ok(self)
    }

    pub fn build(self) -> Signature {
        self.sig
    }
}

/// One assertion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assertion {
    /// `t1 <= t2` — a term assertion.
    Inclusion(Term, Term),
    /// `R(a, b)` — an object assertion over a relation.
    Rel {
        rel: Arc<RelDecl>,
        from: String,
        to: String,
    },
    /// `a : t` — an object assertion over a term.
    Member { obj: String, term: Term },
}

impl Assertion {
    pub fn is_term_assertion(&self) -> bool {
        matches!(self, Assertion::Inclusion(..))
    }

    pub fn canonical(&self) -> String {
        match self {
            Assertion::Inclusion(a, b) => format!("(<= {} {})", a.canonical(), b.canonical()),
            Assertion::Rel { rel, from, to } => format!("({} {} {})", rel.name, from, to),
            Assertion::Member { obj, term } => format!("(: {} {})", obj, term.canonical()),
        }
    }
}

/// A finite set of assertions with derived term/object views.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssertionSet {
    items: Vec<Assertion>,
}

impl AssertionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_iter<I: IntoIterator<Item = Assertion>>(items: I) -> Self {
        let mut s = Self::new();
        for a in items {
            s.insert(a);
        }
        s
    }

    /// Set semantics: duplicates are dropped.
    pub fn insert(&mut self, a: Assertion) {
        if !self.items.contains(&a) {
            self.items.push(a);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Assertion> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `term(Γ)`: every term occurring in the set, in canonical order.
    pub fn terms(&self) -> Vec<Term> {
        let mut out = BTreeSet::new();
        for a in &self.items {
            match a {
                Assertion::Inclusion(l, r) => {
                    out.insert(l.clone());
                    out.insert(r.clone());
                }
                Assertion::Member { term, .. } => {
                    out.insert(term.clone());
                }
                Assertion::Rel { .. } => {}
            }
        }
        out.into_iter().collect()
    }

    /// `obj(Γ)`: every object variable occurring in the set.
    pub fn objects(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.items {
            match a {
                Assertion::Rel { from, to, .. } => {
                    out.insert(from.clone());
                    out.insert(to.clone());
                }
                Assertion::Member { obj, .. } => {
                    out.insert(obj.clone());
                }
                Assertion::Inclusion(..) => {}
            }
        }
        out
    }

    /// Splits into (term assertions, object assertions). The two parts are
    /// disjoint and their union is the set.
    pub fn partition(&self) -> (AssertionSet, AssertionSet) {
        let mut terms = AssertionSet::new();
        let mut objects = AssertionSet::new();
        for a in &self.items {
            if a.is_term_assertion() {
                terms.insert(a.clone());
            } else {
                objects.insert(a.clone());
            }
        }
        (terms, objects)
    }

    /// The inclusions as pairs, for relativized term-satisfiability calls.
    pub fn inclusions(&self) -> Vec<(Term, Term)> {
        self.items
            .iter()
            .filter_map(|a| match a {
                Assertion::Inclusion(l, r) => Some((l.clone(), r.clone())),
                _ => None,
            })
            .collect()
    }

    /// Membership terms of one object, in insertion order.
    pub fn member_terms(&self, obj: &str) -> Vec<Term> {
        self.items
            .iter()
            .filter_map(|a| match a {
                Assertion::Member { obj: o, term } if o == obj => Some(term.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn canonical(&self) -> String {
        let mut lines: Vec<String> = self.items.iter().map(|a| a.canonical()).collect();
        lines.sort();
        lines.join("\n")
    }
}

impl<'a> IntoIterator for &'a AssertionSet {
    type Item = &'a Assertion;
    type IntoIter = std::slice::Iter<'a, Assertion>;
    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Collects the function declarations occurring anywhere in the set,
/// restricted to one component, sorted by declaration index.
pub fn component_symbols(gamma: &AssertionSet, c: Component) -> Vec<Arc<FuncDecl>> {
    let mut out: Vec<Arc<FuncDecl>> = Vec::new();
    for t in gamma.terms() {
        for decl in t.function_symbols() {
            if decl.component == c && !out.iter().any(|d| **d == *decl) {
                out.push(decl);
            }
        }
    }
    out.sort_by(|a, b| a.index.cmp(&b.index).then_with(|| a.name.cmp(&b.name)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig_with_vars() -> Signature {
        Signature::builder()
            .set_var("x")
            .unwrap()
            .set_var("y")
            .unwrap()
            .obj_var("a")
            .unwrap()
            .obj_var("b")
            .unwrap()
            .role(Component::C1, "R", false, false)
            .unwrap()
            .build()
    }

    #[test]
    fn pools_are_disjoint() {
        let err = Signature::builder()
            .set_var("x")
            .unwrap()
            .obj_var("x")
            .unwrap_err();
        assert!(matches!(err, Error::SymbolCollision(_)));
    }

    #[test]
    fn undeclared_symbol_is_rejected() {
        let sig = sig_with_vars();
        assert!(matches!(
            sig.mk_app("exists:S", &[Term::var("x")]),
            Err(Error::UndeclaredSymbol(_))
        ));
        assert!(sig.mk_var("z").is_err());
    }

    #[test]
    fn partition_splits_term_and_object_assertions() {
        let sig = sig_with_vars();
        let x = sig.mk_var("x").unwrap();
        let y = sig.mk_var("y").unwrap();
        let rel = sig.relation("R").unwrap().clone();
        let gamma = AssertionSet::from_iter([
            Assertion::Inclusion(x.clone(), y.clone()),
            Assertion::Member { obj: "a".into(), term: x.clone() },
            Assertion::Rel { rel, from: "a".into(), to: "b".into() },
        ]);
        let (t, o) = gamma.partition();
        assert_eq!(t.len(), 1);
        assert_eq!(o.len(), 2);
        let mut merged = AssertionSet::new();
        for a in t.iter().chain(o.iter()) {
            merged.insert(a.clone());
        }
        assert_eq!(merged.terms().len(), gamma.terms().len());
        assert_eq!(merged.len(), gamma.len());
    }

    #[test]
    fn empty_partition() {
        let (t, o) = AssertionSet::new().partition();
        assert!(t.is_empty() && o.is_empty());
    }

    #[test]
    fn objects_and_terms_views() {
        let sig = sig_with_vars();
        let x = sig.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([
            Assertion::Member { obj: "a".into(), term: x.clone() },
            Assertion::Member { obj: "a".into(), term: x.clone() },
        ]);
        assert_eq!(gamma.len(), 1, "set semantics");
        assert_eq!(gamma.objects().len(), 1);
        assert_eq!(gamma.terms(), vec![x]);
    }
}
