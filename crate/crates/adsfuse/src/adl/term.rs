//! Hash-consed terms.
//!
//! Terms are immutable DAG nodes interned in a global table: structurally
//! equal constructions always return the same allocation, so equality and
//! hashing are pointer operations. The table only grows; for a command-line
//! decision procedure that is acceptable.
//!
//! Surrogate variables live in a reserved namespace: every variable whose
//! name starts with `$` is a surrogate, and the frontend grammar cannot
//! produce such names.

use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, LazyLock, Mutex};

use crate::adl::{Component, FuncDecl};
use crate::Error;

/// Prefix of the reserved surrogate-variable namespace.
pub const SURROGATE_PREFIX: char = '$';

/// One interned term. Clones are cheap; equality is pointer identity.
#[derive(Clone)]
pub struct Term(Arc<TermNode>);

pub struct TermNode {
    kind: TermKind,
    /// Structural hash, stable across runs (derived from names and shape).
    shash: u64,
}

#[derive(Clone)]
pub enum TermKind {
    /// A set variable (user-declared or surrogate).
    Var(String),
    /// The full domain.
    Top,
    /// The empty set.
    Bot,
    Not(Term),
    And(Term, Term),
    Or(Term, Term),
    /// Application of a declared function symbol.
    App(Arc<FuncDecl>, Vec<Term>),
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.shash);
    }
}

impl std::fmt::Debug for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// FNV-1a, used for stable structural hashes and surrogate naming.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn fnv_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn structural_hash(kind: &TermKind) -> u64 {
    let mut h = fnv1a(&[match kind {
        TermKind::Var(_) => 1u8,
        TermKind::Top => 2,
        TermKind::Bot => 3,
        TermKind::Not(_) => 4,
        TermKind::And(..) => 5,
        TermKind::Or(..) => 6,
        TermKind::App(..) => 7,
    }]);
    match kind {
        TermKind::Var(name) => h = fnv_extend(h, name.as_bytes()),
        TermKind::Top | TermKind::Bot => {}
        TermKind::Not(t) => h = fnv_extend(h, &t.0.shash.to_le_bytes()),
        TermKind::And(a, b) | TermKind::Or(a, b) => {
            h = fnv_extend(h, &a.0.shash.to_le_bytes());
            h = fnv_extend(h, &b.0.shash.to_le_bytes());
        }
        TermKind::App(decl, args) => {
            h = fnv_extend(h, decl.name.as_bytes());
            for a in args {
                h = fnv_extend(h, &a.0.shash.to_le_bytes());
            }
        }
    }
    h
}

/// Interner key. Children compare by pointer (they are already interned);
/// declarations compare by content so that independently built but equal
/// signatures intern to the same nodes.
struct Key(TermKind, u64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (TermKind::Var(a), TermKind::Var(b)) => a == b,
            (TermKind::Top, TermKind::Top) | (TermKind::Bot, TermKind::Bot) => true,
            (TermKind::Not(a), TermKind::Not(b)) => a == b,
            (TermKind::And(a, b), TermKind::And(c, d))
            | (TermKind::Or(a, b), TermKind::Or(c, d)) => a == c && b == d,
            (TermKind::App(f, xs), TermKind::App(g, ys)) => **f == **g && xs == ys,
            _ => false,
        }
    }
}
impl Eq for Key {}
impl Hash for Key {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.1);
    }
}

static INTERNER: LazyLock<Mutex<HashMap<Key, Term>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

fn intern(kind: TermKind) -> Term {
    let shash = structural_hash(&kind);
    let mut table = INTERNER.lock().unwrap();
    if let Some(t) = table.get(&Key(kind.clone(), shash)) {
        return t.clone();
    }
    let term = Term(Arc::new(TermNode { kind: kind.clone(), shash }));
    table.insert(Key(kind, shash), term.clone());
    term
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        intern(TermKind::Var(name.into()))
    }

    pub fn top() -> Term {
        intern(TermKind::Top)
    }

    pub fn bot() -> Term {
        intern(TermKind::Bot)
    }

    pub fn not(t: &Term) -> Term {
        intern(TermKind::Not(t.clone()))
    }

    pub fn and(a: &Term, b: &Term) -> Term {
        intern(TermKind::And(a.clone(), b.clone()))
    }

    pub fn or(a: &Term, b: &Term) -> Term {
        intern(TermKind::Or(a.clone(), b.clone()))
    }

    /// Builds `f(args…)`, checking the declared arity.
    pub fn app(decl: &Arc<FuncDecl>, args: &[Term]) -> crate::Result<Term> {
        if args.len() != decl.arity {
            return Err(Error::ArityMismatch {
                symbol: decl.name.clone(),
                declared: decl.arity,
                got: args.len(),
            });
        }
        Ok(intern(TermKind::App(decl.clone(), args.to_vec())))
    }

    /// Left-associated conjunction; the empty conjunction is `top`.
    pub fn conj<I: IntoIterator<Item = Term>>(items: I) -> Term {
        let mut it = items.into_iter();
        match it.next() {
            None => Term::top(),
            Some(first) => it.fold(first, |acc, t| Term::and(&acc, &t)),
        }
    }

    /// Left-associated disjunction; the empty disjunction is `bot`.
    pub fn disj<I: IntoIterator<Item = Term>>(items: I) -> Term {
        let mut it = items.into_iter();
        match it.next() {
            None => Term::bot(),
            Some(first) => it.fold(first, |acc, t| Term::or(&acc, &t)),
        }
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    /// Stable structural hash.
    pub fn shash(&self) -> u64 {
        self.0.shash
    }

    pub fn is_surrogate_var(&self) -> bool {
        matches!(self.kind(), TermKind::Var(n) if n.starts_with(SURROGATE_PREFIX))
    }

    /// The set variables occurring in the term, surrogates included.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.kind() {
            TermKind::Var(n) => {
                out.insert(n.clone());
            }
            TermKind::Top | TermKind::Bot => {}
            TermKind::Not(t) => t.collect_vars(out),
            TermKind::And(a, b) | TermKind::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            TermKind::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// All subterms (the term itself included), deduplicated, in pre-order of
    /// first occurrence.
    pub fn subterms(&self) -> Vec<Term> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.collect_subterms(&mut seen, &mut out);
        out
    }

    fn collect_subterms(&self, seen: &mut BTreeSet<Term>, out: &mut Vec<Term>) {
        if !seen.insert(self.clone()) {
            return;
        }
        out.push(self.clone());
        match self.kind() {
            TermKind::Var(_) | TermKind::Top | TermKind::Bot => {}
            TermKind::Not(t) => t.collect_subterms(seen, out),
            TermKind::And(a, b) | TermKind::Or(a, b) => {
                a.collect_subterms(seen, out);
                b.collect_subterms(seen, out);
            }
            TermKind::App(_, args) => {
                for a in args {
                    a.collect_subterms(seen, out);
                }
            }
        }
    }

    /// Capture-free substitution of `repl` for the variable `var`.
    pub fn substitute(&self, var: &str, repl: &Term) -> Term {
        match self.kind() {
            TermKind::Var(n) => {
                if n == var {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            TermKind::Top | TermKind::Bot => self.clone(),
            TermKind::Not(t) => Term::not(&t.substitute(var, repl)),
            TermKind::And(a, b) => Term::and(&a.substitute(var, repl), &b.substitute(var, repl)),
            TermKind::Or(a, b) => Term::or(&a.substitute(var, repl), &b.substitute(var, repl)),
            TermKind::App(decl, args) => {
                let args: Vec<Term> = args.iter().map(|a| a.substitute(var, repl)).collect();
                intern(TermKind::App(decl.clone(), args))
            }
        }
    }

    /// Canonical prefix serialization, e.g. `(and (exists:R x) (not y))`.
    /// Deterministic across runs; used for surrogate naming and debugging.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.write_canonical(&mut s);
        s
    }

    fn write_canonical(&self, out: &mut String) {
        match self.kind() {
            TermKind::Var(n) => out.push_str(n),
            TermKind::Top => out.push_str("top"),
            TermKind::Bot => out.push_str("bot"),
            TermKind::Not(t) => {
                out.push_str("(not ");
                t.write_canonical(out);
                out.push(')');
            }
            TermKind::And(a, b) => {
                out.push_str("(and ");
                a.write_canonical(out);
                out.push(' ');
                b.write_canonical(out);
                out.push(')');
            }
            TermKind::Or(a, b) => {
                out.push_str("(or ");
                a.write_canonical(out);
                out.push(' ');
                b.write_canonical(out);
                out.push(')');
            }
            TermKind::App(decl, args) => {
                out.push('(');
                out.push_str(&decl.name);
                for a in args {
                    out.push(' ');
                    a.write_canonical(out);
                }
                out.push(')');
            }
        }
    }

    /// Canonical ordering: structural, with function symbols compared by
    /// declaration index first so that symbol order follows the declaration
    /// order of the governing signature.
    pub fn cmp_canonical(&self, other: &Term) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        if self == other {
            return Ordering::Equal;
        }
        fn rank(k: &TermKind) -> u8 {
            match k {
                TermKind::Var(_) => 0,
                TermKind::Top => 1,
                TermKind::Bot => 2,
                TermKind::Not(_) => 3,
                TermKind::And(..) => 4,
                TermKind::Or(..) => 5,
                TermKind::App(..) => 6,
            }
        }
        let (a, b) = (self.kind(), other.kind());
        rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
            (TermKind::Var(x), TermKind::Var(y)) => x.cmp(y),
            (TermKind::Not(x), TermKind::Not(y)) => x.cmp_canonical(y),
            (TermKind::And(x1, x2), TermKind::And(y1, y2))
            | (TermKind::Or(x1, x2), TermKind::Or(y1, y2)) => {
                x1.cmp_canonical(y1).then_with(|| x2.cmp_canonical(y2))
            }
            (TermKind::App(f, xs), TermKind::App(g, ys)) => f
                .index
                .cmp(&g.index)
                .then_with(|| f.name.cmp(&g.name))
                .then_with(|| {
                    for (x, y) in xs.iter().zip(ys.iter()) {
                        let c = x.cmp_canonical(y);
                        if c != std::cmp::Ordering::Equal {
                            return c;
                        }
                    }
                    xs.len().cmp(&ys.len())
                }),
            _ => Ordering::Equal,
        })
    }

    /// The function symbols occurring in the term.
    pub fn function_symbols(&self) -> Vec<Arc<FuncDecl>> {
        let mut out: Vec<Arc<FuncDecl>> = Vec::new();
        for sub in self.subterms() {
            if let TermKind::App(decl, _) = sub.kind() {
                if !out.iter().any(|d| **d == **decl) {
                    out.push(decl.clone());
                }
            }
        }
        out.sort_by(|a, b| a.index.cmp(&b.index).then_with(|| a.name.cmp(&b.name)));
        out
    }

    /// True if the term contains a function symbol of the given component.
    pub fn uses_component(&self, c: Component) -> bool {
        self.subterms()
            .iter()
            .any(|t| matches!(t.kind(), TermKind::App(d, _) if d.component == c))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cmp_canonical(other)
    }
}
impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::{FuncInterp, RoleExpr};

    fn unary(name: &str, comp: Component) -> Arc<FuncDecl> {
        Arc::new(FuncDecl {
            name: name.to_string(),
            arity: 1,
            component: comp,
            interp: FuncInterp::Uninterpreted,
            index: 0,
        })
    }

    #[test]
    fn interning_gives_identical_nodes() {
        let x1 = Term::var("x");
        let x2 = Term::var("x");
        assert!(std::sync::Arc::ptr_eq(&x1.0, &x2.0));
        let t1 = Term::and(&x1, &Term::not(&x2));
        let t2 = Term::and(&Term::var("x"), &Term::not(&Term::var("x")));
        assert_eq!(t1, t2);
    }

    #[test]
    fn and_of_x_and_not_x_is_distinct_from_bot() {
        let x = Term::var("x");
        let t = Term::and(&x, &Term::not(&x));
        assert_ne!(t, Term::bot());
    }

    #[test]
    fn app_checks_arity() {
        let f = unary("f", Component::C1);
        assert!(Term::app(&f, &[Term::var("x")]).is_ok());
        let err = Term::app(&f, &[]).unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { .. }));
    }

    #[test]
    fn nullary_app_with_args_is_arity_mismatch() {
        let f = Arc::new(FuncDecl {
            name: "atleast:2:R".to_string(),
            arity: 0,
            component: Component::C2,
            interp: FuncInterp::AtLeast(2, RoleExpr::Name("R".into())),
            index: 0,
        });
        let err = Term::app(&f, &[Term::var("x")]).unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { .. }));
    }

    #[test]
    fn free_vars_of_nested_application() {
        // f(g(x, f(g(x, y)))) has exactly the variables {x, y}.
        let f = unary("f", Component::C1);
        let g = Arc::new(FuncDecl {
            name: "g".to_string(),
            arity: 2,
            component: Component::C2,
            interp: FuncInterp::Uninterpreted,
            index: 1,
        });
        let x = Term::var("x");
        let y = Term::var("y");
        let inner = Term::app(&g, &[x.clone(), y.clone()]).unwrap();
        let finner = Term::app(&f, &[inner]).unwrap();
        let gouter = Term::app(&g, &[x.clone(), finner]).unwrap();
        let t = Term::app(&f, &[gouter]).unwrap();
        let vars: Vec<String> = t.free_vars().into_iter().collect();
        assert_eq!(vars, vec!["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn free_vars_of_top_is_empty() {
        assert!(Term::top().free_vars().is_empty());
    }

    #[test]
    fn canonical_round_trips_shape() {
        let x = Term::var("x");
        let y = Term::var("y");
        let t = Term::and(&x, &Term::not(&y));
        assert_eq!(t.canonical(), "(and x (not y))");
    }

    #[test]
    fn substitution_replaces_free_occurrences() {
        let f = unary("f", Component::C1);
        let t = Term::and(
            &Term::app(&f, &[Term::var("x")]).unwrap(),
            &Term::var("x"),
        );
        let s = t.substitute("x", &Term::var("z"));
        assert_eq!(s.canonical(), "(and (f z) z)");
    }
}
