//! Component decision procedures.
//!
//! One parametric tableau engine serves all shipped logics; configuration is
//! read off the signature (transitive and functional role flags, number
//! restriction symbols) and the query (term assertions become an
//! internalized meta-constraint added to every node). The rules:
//!
//! * ⊓: both conjuncts join the label.
//! * ⊔: branch on the disjuncts.
//! * ∀: `forall R . C` at `x` with an `R`-edge to `y` puts `C` at `y`; for
//!   transitive `R` the constraint `forall R . C` itself propagates too.
//! * ≤: more than `n` distinct `R`-successors under `atmost n R` forces a
//!   merge; pairs of named individuals never merge (unique names), and the
//!   most recently created pair is tried first.
//! * ∃ / ≥: generate fresh successors, suppressed at blocked nodes.
//!
//! Blocking is by label subset against unnamed ancestors, enabled whenever
//! term assertions or transitive roles are present. Functional roles are
//! enforced by seeding `atmost 1 f` into the meta-constraint. Clashes:
//! complementary literals, explicit bottom, and `atleast n R` against
//! `atmost m R` with `n > m`.
//!
//! Satisfiable answers try to materialize a finite witness from the
//! completion graph (redirecting blocked nodes to their blockers); a witness
//! is attached only if the finite-model oracle confirms it, so attached
//! witnesses always pass `oracle::check`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::adl::{
    Assertion, AssertionSet, FuncDecl, FuncInterp, RelDecl, RoleExpr, Signature, Term, TermKind,
};
use crate::oracle::{self, FiniteInterpretation};
use crate::{Error, ResourceKind, Result};

/// Variable used in one-variable covering terms.
pub const COVERING_VAR: &str = "$x";

/// Outcome of a decision call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Satisfiable; the witness, when present, passes the oracle's check on
    /// the queried assertion set.
    Sat(Option<FiniteInterpretation>),
    Unsat,
    /// A configured cap was exceeded; never a wrong answer.
    Resource(ResourceKind),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Verdict::Resource(_))
    }

    /// Same answer, ignoring witnesses.
    pub fn agrees_with(&self, other: &Verdict) -> bool {
        matches!(
            (self, other),
            (Verdict::Sat(_), Verdict::Sat(_))
                | (Verdict::Unsat, Verdict::Unsat)
                | (Verdict::Resource(_), Verdict::Resource(_))
        )
    }

    pub fn witness(&self) -> Option<&FiniteInterpretation> {
        match self {
            Verdict::Sat(w) => w.as_ref(),
            _ => None,
        }
    }
}

/// What a component procedure can decide; the fusion engine gates on these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentCapabilities {
    pub logic_name: String,
    pub supports_object_sat: bool,
    pub supports_relativized_sat: bool,
    pub has_covering_terms: bool,
    pub is_local: bool,
}

/// A pluggable component decision procedure.
pub trait ComponentReasoner: Send + Sync {
    fn capabilities(&self) -> &ComponentCapabilities;

    fn signature(&self) -> &Arc<Signature>;

    /// Satisfiability of a set of object assertions.
    fn decide_object_sat(&self, gamma: &AssertionSet) -> Result<Verdict>;

    /// Satisfiability of a mixed set (term assertions included).
    fn decide_relativized_sat(&self, gamma: &AssertionSet) -> Result<Verdict>;

    /// Term satisfiability: `{a : t}` for a fresh object variable.
    fn decide_term_sat(&self, t: &Term) -> Result<Verdict> {
        let gamma = AssertionSet::from_iter([Assertion::Member {
            obj: "$q0".to_string(),
            term: t.clone(),
        }]);
        self.decide_object_sat(&gamma)
    }

    /// Relativized term satisfiability: `{a : t}` plus inclusions.
    fn decide_relativized_term_sat(&self, t: &Term, inclusions: &[(Term, Term)]) -> Result<Verdict> {
        let mut gamma = AssertionSet::new();
        gamma.insert(Assertion::Member { obj: "$q0".to_string(), term: t.clone() });
        for (l, r) in inclusions {
            gamma.insert(Assertion::Inclusion(l.clone(), r.clone()));
        }
        self.decide_relativized_sat(&gamma)
    }

    /// A one-variable covering normal term for the symbol.
    fn covering_term(&self, f: &Arc<FuncDecl>) -> Result<Term>;

    /// A covering normal term for all the given symbols: the deduplicated
    /// conjunction of the individual covering terms (top when empty).
    fn combined_covering_term(&self, symbols: &[Arc<FuncDecl>]) -> Result<Term> {
        let mut parts: Vec<Term> = Vec::new();
        for f in symbols {
            let t = self.covering_term(f)?;
            if !parts.contains(&t) {
                parts.push(t);
            }
        }
        parts.retain(|t| *t != Term::top());
        Ok(Term::conj(parts))
    }
}

/// Internal constraint language in negation normal form. Number restrictions
/// appear as values, so negations like `not (atmost n R)` need no symbol
/// declarations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Ctr {
    Lit(String, bool),
    Top,
    Bot,
    And(Arc<Ctr>, Arc<Ctr>),
    Or(Arc<Ctr>, Arc<Ctr>),
    Exists(Arc<RelDecl>, Arc<Ctr>),
    Forall(Arc<RelDecl>, Arc<Ctr>),
    AtLeast(u32, Arc<RelDecl>),
    AtMost(u32, Arc<RelDecl>),
}

fn nnf(sig: &Signature, t: &Term, positive: bool) -> Result<Arc<Ctr>> {
    let role = |r: &RoleExpr| -> Result<Arc<RelDecl>> {
        match r {
            RoleExpr::Name(name) => sig
                .relation(name)
                .cloned()
                .ok_or_else(|| Error::UndeclaredSymbol(name.clone())),
            other => Err(Error::UnsupportedSymbol(other.canonical())),
        }
    };
    Ok(Arc::new(match t.kind() {
        TermKind::Var(name) => Ctr::Lit(name.clone(), positive),
        TermKind::Top => {
            if positive {
                Ctr::Top
            } else {
                Ctr::Bot
            }
        }
        TermKind::Bot => {
            if positive {
                Ctr::Bot
            } else {
                Ctr::Top
            }
        }
        TermKind::Not(a) => return nnf(sig, a, !positive),
        TermKind::And(a, b) => {
            let (x, y) = (nnf(sig, a, positive)?, nnf(sig, b, positive)?);
            if positive {
                Ctr::And(x, y)
            } else {
                Ctr::Or(x, y)
            }
        }
        TermKind::Or(a, b) => {
            let (x, y) = (nnf(sig, a, positive)?, nnf(sig, b, positive)?);
            if positive {
                Ctr::Or(x, y)
            } else {
                Ctr::And(x, y)
            }
        }
        TermKind::App(decl, args) => match &decl.interp {
            FuncInterp::Exists(r) => {
                let inner = nnf(sig, &args[0], positive)?;
                if positive {
                    Ctr::Exists(role(r)?, inner)
                } else {
                    Ctr::Forall(role(r)?, inner)
                }
            }
            FuncInterp::Forall(r) => {
                let inner = nnf(sig, &args[0], positive)?;
                if positive {
                    Ctr::Forall(role(r)?, inner)
                } else {
                    Ctr::Exists(role(r)?, inner)
                }
            }
            FuncInterp::AtLeast(n, r) => {
                if positive {
                    // atleast 0 R is the whole domain.
                    if *n == 0 {
                        Ctr::Top
                    } else {
                        Ctr::AtLeast(*n, role(r)?)
                    }
                } else if *n == 0 {
                    Ctr::Bot
                } else {
                    Ctr::AtMost(n - 1, role(r)?)
                }
            }
            FuncInterp::AtMost(n, r) => {
                if positive {
                    Ctr::AtMost(*n, role(r)?)
                } else {
                    Ctr::AtLeast(n + 1, role(r)?)
                }
            }
            FuncInterp::ExistsUniversal | FuncInterp::ForallUniversal => {
                return Err(Error::UnsupportedSymbol(decl.name.clone()))
            }
            FuncInterp::Uninterpreted => return Err(Error::UninterpretedSymbol(decl.name.clone())),
        },
    }))
}

#[derive(Debug, Clone)]
struct Node {
    label: BTreeSet<Arc<Ctr>>,
    named: Option<String>,
    parent: Option<usize>,
    alive: bool,
}

#[derive(Debug, Clone)]
struct State {
    nodes: Vec<Node>,
    edges: BTreeSet<(usize, Arc<RelDecl>, usize)>,
}

impl State {
    fn successors(&self, x: usize, rel: &Arc<RelDecl>) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|(f, r, _)| *f == x && r == rel)
            .map(|(_, _, t)| *t)
            .collect()
    }

    fn fresh_node(&mut self, parent: Option<usize>, meta: &[Arc<Ctr>]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            label: meta.iter().cloned().collect(),
            named: None,
            parent,
            alive: true,
        });
        id
    }

    /// Folds `victim` into `survivor`: labels union, edges reroute, children
    /// re-parent.
    fn merge(&mut self, survivor: usize, victim: usize) {
        let victim_label: Vec<Arc<Ctr>> = self.nodes[victim].label.iter().cloned().collect();
        self.nodes[survivor].label.extend(victim_label);
        let old_edges: Vec<(usize, Arc<RelDecl>, usize)> = self.edges.iter().cloned().collect();
        self.edges.clear();
        for (f, r, t) in old_edges {
            let f = if f == victim { survivor } else { f };
            let t = if t == victim { survivor } else { t };
            self.edges.insert((f, r, t));
        }
        for node in &mut self.nodes {
            if node.parent == Some(victim) {
                node.parent = Some(survivor);
            }
        }
        self.nodes[victim].alive = false;
        self.nodes[victim].label.clear();
    }

    fn has_clash(&self) -> bool {
        for (x, node) in self.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            for c in &node.label {
                match &**c {
                    Ctr::Bot => return true,
                    Ctr::Lit(name, true) => {
                        if node.label.contains(&Arc::new(Ctr::Lit(name.clone(), false))) {
                            return true;
                        }
                    }
                    Ctr::AtLeast(n, rel) => {
                        for other in &node.label {
                            if let Ctr::AtMost(m, rel2) = &**other {
                                if rel == rel2 && n > m {
                                    return true;
                                }
                            }
                        }
                    }
                    Ctr::AtMost(m, rel) => {
                        // Named successors never merge with each other.
                        let named = self
                            .successors(x, rel)
                            .iter()
                            .filter(|&&y| self.nodes[y].named.is_some())
                            .count();
                        if named > *m as usize {
                            return true;
                        }
                    }
                    _ => {}
                }
            }
        }
        false
    }

    /// Subset blocking against unnamed ancestors.
    fn blocked(&self, x: usize) -> bool {
        if self.nodes[x].named.is_some() {
            return false;
        }
        let mut cur = self.nodes[x].parent;
        while let Some(a) = cur {
            if self.nodes[a].named.is_none()
                && self.nodes[a].alive
                && self.nodes[x].label.is_subset(&self.nodes[a].label)
            {
                return true;
            }
            cur = self.nodes[a].parent;
        }
        false
    }
}

enum Outcome {
    Open(State),
    Closed,
    Resource,
}

struct Engine<'a> {
    meta: Vec<Arc<Ctr>>,
    blocking: bool,
    budget: &'a mut usize,
    trace: bool,
}

impl Engine<'_> {
    fn charge(&mut self) -> bool {
        if *self.budget == 0 {
            return false;
        }
        *self.budget -= 1;
        true
    }

    fn expand(&mut self, mut st: State) -> Outcome {
        loop {
            if st.has_clash() {
                return Outcome::Closed;
            }
            let Some(rule) = self.pick_rule(&st) else {
                return Outcome::Open(st);
            };
            if !self.charge() {
                return Outcome::Resource;
            }
            match rule {
                Rule::And(x, a, b) => {
                    st.nodes[x].label.insert(a);
                    st.nodes[x].label.insert(b);
                }
                Rule::Forall(y, c) => {
                    st.nodes[y].label.insert(c);
                }
                Rule::Or(x, a, b) => {
                    if self.trace {
                        eprintln!("tableau: or-branch at node {x}");
                    }
                    for choice in [a, b] {
                        let mut branch = st.clone();
                        branch.nodes[x].label.insert(choice);
                        match self.expand(branch) {
                            Outcome::Open(s) => return Outcome::Open(s),
                            Outcome::Resource => return Outcome::Resource,
                            Outcome::Closed => {}
                        }
                    }
                    return Outcome::Closed;
                }
                Rule::Merge(pairs) => {
                    if self.trace {
                        eprintln!("tableau: atmost-merge over {} pairs", pairs.len());
                    }
                    for (survivor, victim) in pairs {
                        let mut branch = st.clone();
                        branch.merge(survivor, victim);
                        match self.expand(branch) {
                            Outcome::Open(s) => return Outcome::Open(s),
                            Outcome::Resource => return Outcome::Resource,
                            Outcome::Closed => {}
                        }
                    }
                    return Outcome::Closed;
                }
                Rule::Exists(x, rel, c) => {
                    if self.trace {
                        eprintln!("tableau: exists-rule at node {x} over {}", rel.name);
                    }
                    let meta = self.meta.clone();
                    let y = st.fresh_node(Some(x), &meta);
                    st.nodes[y].label.insert(c);
                    st.edges.insert((x, rel, y));
                }
                Rule::AtLeast(x, rel, missing) => {
                    if self.trace {
                        eprintln!(
                            "tableau: atleast-rule at node {x} over {} (creating {missing})",
                            rel.name
                        );
                    }
                    let meta = self.meta.clone();
                    for _ in 0..missing {
                        let y = st.fresh_node(Some(x), &meta);
                        st.edges.insert((x, rel.clone(), y));
                    }
                }
            }
        }
    }

    fn pick_rule(&self, st: &State) -> Option<Rule> {
        // Deterministic priority: and, forall (with transitive propagation),
        // or, atmost-merge, exists, atleast.
        for (x, node) in st.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            for c in &node.label {
                if let Ctr::And(a, b) = &**c {
                    if !node.label.contains(a) || !node.label.contains(b) {
                        return Some(Rule::And(x, a.clone(), b.clone()));
                    }
                }
            }
        }
        for (x, node) in st.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            for c in &node.label {
                if let Ctr::Forall(rel, inner) = &**c {
                    for y in st.successors(x, rel) {
                        if !st.nodes[y].label.contains(inner) {
                            return Some(Rule::Forall(y, inner.clone()));
                        }
                        if rel.transitive && !st.nodes[y].label.contains(c) {
                            return Some(Rule::Forall(y, c.clone()));
                        }
                    }
                }
            }
        }
        for (x, node) in st.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            for c in &node.label {
                if let Ctr::Or(a, b) = &**c {
                    if !node.label.contains(a) && !node.label.contains(b) {
                        return Some(Rule::Or(x, a.clone(), b.clone()));
                    }
                }
            }
        }
        for (x, node) in st.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            for c in &node.label {
                if let Ctr::AtMost(m, rel) = &**c {
                    let succ = st.successors(x, rel);
                    if succ.len() > *m as usize {
                        let mut pairs: Vec<(usize, usize)> = Vec::new();
                        for i in 0..succ.len() {
                            for j in i + 1..succ.len() {
                                let (a, b) = (succ[i], succ[j]);
                                if st.nodes[a].named.is_some() && st.nodes[b].named.is_some() {
                                    continue;
                                }
                                // Survivor: named first, then the older node.
                                let (survivor, victim) = if st.nodes[b].named.is_some() {
                                    (b, a)
                                } else if st.nodes[a].named.is_some() {
                                    (a, b)
                                } else {
                                    (a.min(b), a.max(b))
                                };
                                pairs.push((survivor, victim));
                            }
                        }
                        if pairs.is_empty() {
                            continue; // named overflow: the clash check reports it
                        }
                        // Most recently created successors first.
                        pairs.sort_by_key(|&(s, v)| std::cmp::Reverse((s.max(v), s.min(v))));
                        pairs.dedup();
                        return Some(Rule::Merge(pairs));
                    }
                }
            }
        }
        for (x, node) in st.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            let generating: Vec<&Arc<Ctr>> = node
                .label
                .iter()
                .filter(|c| matches!(&***c, Ctr::Exists(..) | Ctr::AtLeast(..)))
                .collect();
            if generating.is_empty() {
                continue;
            }
            if self.blocking && st.blocked(x) {
                continue;
            }
            for c in generating {
                match &**c {
                    Ctr::Exists(rel, inner) => {
                        let satisfied = st
                            .successors(x, rel)
                            .iter()
                            .any(|&y| st.nodes[y].label.contains(inner));
                        if !satisfied {
                            return Some(Rule::Exists(x, rel.clone(), inner.clone()));
                        }
                    }
                    Ctr::AtLeast(n, rel) => {
                        let have = st.successors(x, rel).len();
                        if have < *n as usize {
                            return Some(Rule::AtLeast(x, rel.clone(), *n as usize - have));
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
        None
    }
}

enum Rule {
    And(usize, Arc<Ctr>, Arc<Ctr>),
    Forall(usize, Arc<Ctr>),
    Or(usize, Arc<Ctr>, Arc<Ctr>),
    /// (survivor, victim) merge candidates, in trial order.
    Merge(Vec<(usize, usize)>),
    Exists(usize, Arc<RelDecl>, Arc<Ctr>),
    AtLeast(usize, Arc<RelDecl>, usize),
}

/// The parametric tableau reasoner for one component (or a whole single
/// signature).
pub struct TableauComponent {
    caps: ComponentCapabilities,
    sig: Arc<Signature>,
    max_rule_applications: usize,
    trace: bool,
}

impl TableauComponent {
    pub fn new(logic_name: &str, sig: Arc<Signature>) -> Self {
        let caps = ComponentCapabilities {
            logic_name: logic_name.to_string(),
            supports_object_sat: true,
            supports_relativized_sat: true,
            has_covering_terms: true,
            is_local: sig.is_local(),
        };
        TableauComponent { caps, sig, max_rule_applications: 200_000, trace: false }
    }

    pub fn with_budget(mut self, max_rule_applications: usize) -> Self {
        self.max_rule_applications = max_rule_applications;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    fn decide(&self, gamma: &AssertionSet) -> Result<Verdict> {
        let (term_part, obj_part) = gamma.partition();
        // Internalized meta-constraint, plus atmost 1 f for every feature.
        let mut meta: Vec<Arc<Ctr>> = Vec::new();
        for (l, r) in term_part.inclusions() {
            meta.push(Arc::new(Ctr::Or(nnf(&self.sig, &l, false)?, nnf(&self.sig, &r, true)?)));
        }
        for rel in self.sig.relations() {
            if rel.functional {
                meta.push(Arc::new(Ctr::AtMost(1, rel.clone())));
            }
        }
        meta.sort();
        meta.dedup();
        let has_transitive = self.sig.relations().iter().any(|r| r.transitive);
        let blocking = !term_part.is_empty() || has_transitive;

        let mut st = State { nodes: Vec::new(), edges: BTreeSet::new() };
        let objects: Vec<String> = obj_part.objects().into_iter().collect();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for name in &objects {
            let id = st.nodes.len();
            st.nodes.push(Node {
                label: meta.iter().cloned().collect(),
                named: Some(name.clone()),
                parent: None,
                alive: true,
            });
            index.insert(name.clone(), id);
        }
        if objects.is_empty() {
            // Models are nonempty; a pure-TBox query needs one anonymous root.
            st.fresh_node(None, &meta);
        }
        for a in &obj_part {
            match a {
                Assertion::Member { obj, term } => {
                    let c = nnf(&self.sig, term, true)?;
                    let id = index[obj];
                    st.nodes[id].label.insert(c);
                }
                Assertion::Rel { rel, from, to } => {
                    st.edges.insert((index[from], rel.clone(), index[to]));
                }
                Assertion::Inclusion(..) => unreachable!("partitioned"),
            }
        }

        let mut budget = self.max_rule_applications;
        let mut engine = Engine { meta, blocking, budget: &mut budget, trace: self.trace };
        match engine.expand(st) {
            Outcome::Closed => Ok(Verdict::Unsat),
            Outcome::Resource => Ok(Verdict::Resource(ResourceKind::RuleCap)),
            Outcome::Open(st) => {
                let witness = extract_witness(&st, &self.sig)
                    .filter(|m| oracle::check(gamma, m).unwrap_or(false));
                Ok(Verdict::Sat(witness))
            }
        }
    }
}

impl ComponentReasoner for TableauComponent {
    fn capabilities(&self) -> &ComponentCapabilities {
        &self.caps
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn decide_object_sat(&self, gamma: &AssertionSet) -> Result<Verdict> {
        let (term_part, _) = gamma.partition();
        if !term_part.is_empty() {
            return Err(Error::Invalid(
                "object satisfiability rejects term assertions".into(),
            ));
        }
        self.decide(gamma)
    }

    fn decide_relativized_sat(&self, gamma: &AssertionSet) -> Result<Verdict> {
        self.decide(gamma)
    }

    fn covering_term(&self, f: &Arc<FuncDecl>) -> Result<Term> {
        covering_term(&self.sig, f)
    }
}

/// The covering normal term for one symbol: `top` for nullary symbols,
/// `forall:R($x)` for the unary role symbols.
pub fn covering_term(sig: &Signature, f: &Arc<FuncDecl>) -> Result<Term> {
    if f.arity == 0 {
        return Ok(Term::top());
    }
    match f.interp.role_name() {
        Some(role) => {
            let forall = sig
                .forall_symbol(role)
                .ok_or_else(|| Error::UndeclaredSymbol(format!("forall:{role}")))?;
            Term::app(forall, &[Term::var(COVERING_VAR)])
        }
        None => Err(Error::UnsupportedSymbol(f.name.clone())),
    }
}

/// Reads a finite model off a saturated open completion graph. Nodes left
/// with unexpanded generating constraints are blocked; their incoming edges
/// are redirected to the blocking ancestor. Transitive roles are closed
/// afterwards. Returns `None` if no coherent finite model can be read off.
fn extract_witness(st: &State, sig: &Signature) -> Option<FiniteInterpretation> {
    let alive: Vec<usize> = (0..st.nodes.len()).filter(|&i| st.nodes[i].alive).collect();
    // A node still owing successors must be replaced by an ancestor whose
    // label subsumes it.
    let unsatisfied: BTreeSet<usize> = alive
        .iter()
        .copied()
        .filter(|&x| {
            st.nodes[x].label.iter().any(|c| match &**c {
                Ctr::Exists(rel, inner) => !st
                    .successors(x, rel)
                    .iter()
                    .any(|&y| st.nodes[y].label.contains(inner)),
                Ctr::AtLeast(n, rel) => st.successors(x, rel).len() < *n as usize,
                _ => false,
            })
        })
        .collect();
    let mut target: BTreeMap<usize, usize> = BTreeMap::new();
    for &x in &unsatisfied {
        let mut cur = st.nodes[x].parent;
        let mut found = None;
        while let Some(a) = cur {
            if st.nodes[a].alive
                && st.nodes[a].named.is_none()
                && !unsatisfied.contains(&a)
                && st.nodes[x].label.is_subset(&st.nodes[a].label)
            {
                found = Some(a);
                break;
            }
            cur = st.nodes[a].parent;
        }
        target.insert(x, found?);
    }

    let kept: Vec<usize> = alive.iter().copied().filter(|i| !unsatisfied.contains(i)).collect();
    if kept.is_empty() {
        return None;
    }
    let renumber: BTreeMap<usize, usize> = kept.iter().copied().zip(0..).collect();
    let mut m = FiniteInterpretation::new(kept.len());
    for (&old, &new) in &renumber {
        for c in &st.nodes[old].label {
            if let Ctr::Lit(name, true) = &**c {
                *m.vars.entry(name.clone()).or_insert(0) |= 1 << new;
            }
        }
        if let Some(name) = &st.nodes[old].named {
            m.objects.insert(name.clone(), new);
        }
    }
    for (f, rel, t) in &st.edges {
        if !st.nodes[*f].alive || !st.nodes[*t].alive {
            continue;
        }
        let f = *target.get(f).unwrap_or(f);
        let t = *target.get(t).unwrap_or(t);
        let (Some(&f), Some(&t)) = (renumber.get(&f), renumber.get(&t)) else {
            continue;
        };
        let rows = m.roles.entry(rel.name.clone()).or_insert(vec![0; kept.len()]);
        rows[f] |= 1 << t;
    }
    for rel in sig.relations() {
        if rel.transitive {
            if let Some(rows) = m.roles.get(&rel.name) {
                let closed = close_rows(rows);
                m.roles.insert(rel.name.clone(), closed);
            }
        }
    }
    Some(m)
}

fn close_rows(rows: &[u64]) -> Vec<u64> {
    let n = rows.len();
    let mut out = rows.to_vec();
    for k in 0..n {
        for i in 0..n {
            if out[i] >> k & 1 == 1 {
                out[i] |= out[k];
            }
        }
    }
    out
}

/// Alternation-depth-0 base procedure: satisfiable iff, for each object, the
/// conjunction of its membership terms is propositionally satisfiable. Role
/// assertions never clash at depth zero under unique names.
pub fn decide_propositional(gamma: &AssertionSet) -> Result<Verdict> {
    for t in gamma.terms() {
        if t.subterms().iter().any(|s| matches!(s.kind(), TermKind::App(..))) {
            return Err(Error::Invalid(
                "propositional base requires alternation depth 0".into(),
            ));
        }
    }
    if gamma.iter().any(Assertion::is_term_assertion) {
        return Err(Error::Invalid(
            "propositional base takes object assertions only".into(),
        ));
    }
    let objects: Vec<String> = gamma.objects().into_iter().collect();
    let domain = objects.len().max(1);
    let mut model = FiniteInterpretation::new(domain);
    for (k, obj) in objects.iter().enumerate() {
        model.objects.insert(obj.clone(), k);
        let conj = Term::conj(gamma.member_terms(obj));
        let vars: Vec<String> = conj.free_vars().into_iter().collect();
        if vars.len() > 24 {
            return Ok(Verdict::Resource(ResourceKind::TruthTableCap));
        }
        let Some(assignment) = propositional_witness(&conj, &vars) else {
            return Ok(Verdict::Unsat);
        };
        for (vi, name) in vars.iter().enumerate() {
            if assignment >> vi & 1 == 1 {
                *model.vars.entry(name.clone()).or_insert(0) |= 1 << k;
            }
        }
    }
    for a in gamma {
        if let Assertion::Rel { rel, from, to } = a {
            let (f, t) = (model.objects[from], model.objects[to]);
            let rows = model.roles.entry(rel.name.clone()).or_insert(vec![0; domain]);
            rows[f] |= 1 << t;
        }
    }
    // Close transitive roles so the witness stays in the model class.
    let transitive: Vec<String> = gamma
        .iter()
        .filter_map(|a| match a {
            Assertion::Rel { rel, .. } if rel.transitive => Some(rel.name.clone()),
            _ => None,
        })
        .collect();
    for name in transitive {
        let rows = model.roles.get(&name).cloned().unwrap_or_default();
        model.roles.insert(name, close_rows(&rows));
    }
    Ok(Verdict::Sat(Some(model)))
}

/// Truth-table search for a satisfying assignment of a depth-0 term.
fn propositional_witness(t: &Term, vars: &[String]) -> Option<u32> {
    fn eval(t: &Term, vars: &[String], bits: u32) -> bool {
        match t.kind() {
            TermKind::Var(name) => {
                let i = vars.iter().position(|v| v == name).expect("collected");
                bits >> i & 1 == 1
            }
            TermKind::Top => true,
            TermKind::Bot => false,
            TermKind::Not(a) => !eval(a, vars, bits),
            TermKind::And(a, b) => eval(a, vars, bits) && eval(b, vars, bits),
            TermKind::Or(a, b) => eval(a, vars, bits) || eval(b, vars, bits),
            TermKind::App(..) => unreachable!("depth 0"),
        }
    }
    (0..(1u32 << vars.len() as u32)).find(|&bits| eval(t, vars, bits))
}

/// Propositional truth-table check that a term over opaque atoms is a
/// tautology. Atoms are variables and applications; Boolean structure is
/// interpreted. Capped at 20 atoms.
pub fn propositional_tautology(t: &Term) -> Result<bool> {
    let mut atoms: Vec<Term> = Vec::new();
    collect_atoms(t, &mut atoms);
    if atoms.len() > 20 {
        return Err(Error::ResourceCap { kind: ResourceKind::TruthTableCap, limit: 20 });
    }
    fn eval(t: &Term, atoms: &[Term], bits: u32) -> bool {
        match t.kind() {
            TermKind::Top => true,
            TermKind::Bot => false,
            TermKind::Not(a) => !eval(a, atoms, bits),
            TermKind::And(a, b) => eval(a, atoms, bits) && eval(b, atoms, bits),
            TermKind::Or(a, b) => eval(a, atoms, bits) || eval(b, atoms, bits),
            _ => {
                let i = atoms.iter().position(|a| a == t).expect("collected");
                bits >> i & 1 == 1
            }
        }
    }
    Ok((0..(1u32 << atoms.len() as u32)).all(|bits| eval(t, &atoms, bits)))
}

/// Dual of [`propositional_tautology`].
pub fn propositional_unsat(t: &Term) -> Result<bool> {
    propositional_tautology(&Term::not(t))
}

fn collect_atoms(t: &Term, out: &mut Vec<Term>) {
    match t.kind() {
        TermKind::Top | TermKind::Bot => {}
        TermKind::Not(a) => collect_atoms(a, out),
        TermKind::And(a, b) | TermKind::Or(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
        _ => {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::Component;
    use crate::oracle::{find_model, OracleOutcome};

    fn alc_sig() -> Arc<Signature> {
        Arc::new(
            Signature::builder()
                .set_var("x")
                .unwrap()
                .set_var("y")
                .unwrap()
                .obj_var("a")
                .unwrap()
                .obj_var("b")
                .unwrap()
                .obj_var("c")
                .unwrap()
                .role(Component::C1, "R", false, false)
                .unwrap()
                .build(),
        )
    }

    fn alcn_sig() -> Arc<Signature> {
        Arc::new(
            Signature::builder()
                .set_var("x")
                .unwrap()
                .obj_var("a")
                .unwrap()
                .obj_var("b")
                .unwrap()
                .obj_var("c")
                .unwrap()
                .role(Component::C1, "R", false, false)
                .unwrap()
                .number_restriction(Component::C1, false, 1, "R")
                .unwrap()
                .number_restriction(Component::C1, false, 2, "R")
                .unwrap()
                .number_restriction(Component::C1, true, 2, "R")
                .unwrap()
                .build(),
        )
    }

    fn member(obj: &str, term: Term) -> Assertion {
        Assertion::Member { obj: obj.to_string(), term }
    }

    #[test]
    fn propositional_clash_is_unsat() {
        let sig = alc_sig();
        let alc = TableauComponent::new("alc", sig.clone());
        let x = sig.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([member("a", Term::and(&x, &Term::not(&x)))]);
        assert!(alc.decide_object_sat(&gamma).unwrap().is_unsat());
    }

    #[test]
    fn exists_forall_interaction_is_unsat() {
        // a : (exists R . x) ∧ (forall R . ¬x)
        let sig = alc_sig();
        let alc = TableauComponent::new("alc", sig.clone());
        let x = sig.mk_var("x").unwrap();
        let t = Term::and(
            &sig.mk_app("exists:R", &[x.clone()]).unwrap(),
            &sig.mk_app("forall:R", &[Term::not(&x)]).unwrap(),
        );
        let gamma = AssertionSet::from_iter([member("a", t)]);
        assert!(alc.decide_object_sat(&gamma).unwrap().is_unsat());
        assert_eq!(find_model(&gamma, &sig, 4).unwrap(), OracleOutcome::NotFoundUpTo(4));
    }

    #[test]
    fn counting_clash_is_unsat() {
        // a : (exists R . x) ∧ (exists R . ¬x) ∧ (atmost 1 R), single role.
        let sig = alcn_sig();
        let alcn = TableauComponent::new("alcn", sig.clone());
        let x = sig.mk_var("x").unwrap();
        let t = Term::conj([
            sig.mk_app("exists:R", &[x.clone()]).unwrap(),
            sig.mk_app("exists:R", &[Term::not(&x)]).unwrap(),
            sig.mk_app("atmost:1:R", &[]).unwrap(),
        ]);
        let gamma = AssertionSet::from_iter([member("a", t)]);
        assert!(alcn.decide_object_sat(&gamma).unwrap().is_unsat());
    }

    #[test]
    fn numeric_clash_in_term_sat() {
        let sig = alcn_sig();
        let alcn = TableauComponent::new("alcn", sig.clone());
        let t = Term::and(
            &sig.mk_app("atleast:2:R", &[]).unwrap(),
            &sig.mk_app("atmost:1:R", &[]).unwrap(),
        );
        assert!(alcn.decide_term_sat(&t).unwrap().is_unsat());
        assert!(alcn.decide_term_sat(&Term::top()).unwrap().is_sat());
    }

    #[test]
    fn gci_bottom_is_unsat() {
        let sig = alc_sig();
        let alc = TableauComponent::new("alc", sig.clone());
        let gamma = AssertionSet::from_iter([
            Assertion::Inclusion(Term::top(), Term::bot()),
            member("a", sig.mk_var("x").unwrap()),
        ]);
        assert!(alc.decide_relativized_sat(&gamma).unwrap().is_unsat());
    }

    #[test]
    fn cyclic_gci_is_sat_with_blocking() {
        // x <= exists R . x, a : x — satisfied by a loop.
        let sig = alc_sig();
        let alc = TableauComponent::new("alc", sig.clone());
        let x = sig.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([
            Assertion::Inclusion(x.clone(), sig.mk_app("exists:R", &[x.clone()]).unwrap()),
            member("a", x),
        ]);
        let verdict = alc.decide_relativized_sat(&gamma).unwrap();
        assert!(verdict.is_sat());
        assert_eq!(
            find_model(&gamma, &sig, 2).unwrap().found().map(|m| m.domain),
            Some(1),
            "oracle finds the one-point loop"
        );
    }

    #[test]
    fn una_forces_counting_clash_on_named_successors() {
        // R(a,b), R(a,c), a : atmost 1 R — two named successors cannot merge.
        let sig = alcn_sig();
        let alcn = TableauComponent::new("alcn", sig.clone());
        let rel = sig.relation("R").unwrap().clone();
        let gamma = AssertionSet::from_iter([
            Assertion::Rel { rel: rel.clone(), from: "a".into(), to: "b".into() },
            Assertion::Rel { rel, from: "a".into(), to: "c".into() },
            member("a", sig.mk_app("atmost:1:R", &[]).unwrap()),
        ]);
        assert!(alcn.decide_object_sat(&gamma).unwrap().is_unsat());
    }

    #[test]
    fn merge_with_unnamed_successor_is_allowed() {
        let sig = alcn_sig();
        let alcn = TableauComponent::new("alcn", sig.clone());
        let rel = sig.relation("R").unwrap().clone();
        let x = sig.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([
            Assertion::Rel { rel, from: "a".into(), to: "b".into() },
            member(
                "a",
                Term::and(
                    &sig.mk_app("exists:R", &[x]).unwrap(),
                    &sig.mk_app("atmost:1:R", &[]).unwrap(),
                ),
            ),
        ]);
        let v = alcn.decide_object_sat(&gamma).unwrap();
        assert!(v.is_sat());
        if let Some(w) = v.witness() {
            assert!(oracle::check(&gamma, w).unwrap());
        }
    }

    #[test]
    fn transitive_role_term_sat() {
        let sig = Arc::new(
            Signature::builder()
                .set_var("x")
                .unwrap()
                .role(Component::C1, "T", true, false)
                .unwrap()
                .build(),
        );
        let comp = TableauComponent::new("alc_rplus", sig.clone());
        let t = sig.mk_app("exists:T", &[Term::top()]).unwrap();
        assert!(comp.decide_term_sat(&t).unwrap().is_sat());
    }

    #[test]
    fn transitive_forall_propagates_along_chains() {
        // a : exists T (x ∧ exists T ¬y) ∧ forall T y — unsat since the inner
        // point is T-reachable and forall propagates over transitive T.
        let sig = Arc::new(
            Signature::builder()
                .set_var("x")
                .unwrap()
                .set_var("y")
                .unwrap()
                .obj_var("a")
                .unwrap()
                .role(Component::C1, "T", true, false)
                .unwrap()
                .build(),
        );
        let comp = TableauComponent::new("alc_rplus", sig.clone());
        let x = sig.mk_var("x").unwrap();
        let y = sig.mk_var("y").unwrap();
        let inner = Term::and(&x, &sig.mk_app("exists:T", &[Term::not(&y)]).unwrap());
        let t = Term::and(
            &sig.mk_app("exists:T", &[inner]).unwrap(),
            &sig.mk_app("forall:T", &[y.clone()]).unwrap(),
        );
        let gamma = AssertionSet::from_iter([member("a", t)]);
        assert!(comp.decide_object_sat(&gamma).unwrap().is_unsat());
        assert_eq!(find_model(&gamma, &sig, 4).unwrap(), OracleOutcome::NotFoundUpTo(4));
    }

    #[test]
    fn functional_role_merges_successors() {
        let sig = Arc::new(
            Signature::builder()
                .set_var("x")
                .unwrap()
                .obj_var("a")
                .unwrap()
                .role(Component::C1, "F", false, true)
                .unwrap()
                .build(),
        );
        let comp = TableauComponent::new("alc_f", sig.clone());
        let x = sig.mk_var("x").unwrap();
        // exists F . x ∧ exists F . ¬x — the single F-successor must clash.
        let t = Term::and(
            &sig.mk_app("exists:F", &[x.clone()]).unwrap(),
            &sig.mk_app("exists:F", &[Term::not(&x)]).unwrap(),
        );
        assert!(comp.decide_term_sat(&t).unwrap().is_unsat());
        // exists F . x ∧ exists F . top is fine.
        let t2 = Term::and(
            &sig.mk_app("exists:F", &[x]).unwrap(),
            &sig.mk_app("exists:F", &[Term::top()]).unwrap(),
        );
        assert!(comp.decide_term_sat(&t2).unwrap().is_sat());
    }

    #[test]
    fn taxbreak_abox_is_sat() {
        // TBox: Human ∧ atleast 3 child <= exists entitled . Taxbreak;
        // ABox: Woman(MARY).
        let sig = Arc::new(
            Signature::builder()
                .set_var("Human")
                .unwrap()
                .set_var("Woman")
                .unwrap()
                .set_var("Taxbreak")
                .unwrap()
                .obj_var("MARY")
                .unwrap()
                .role(Component::C1, "child", false, false)
                .unwrap()
                .role(Component::C1, "entitled", false, false)
                .unwrap()
                .number_restriction(Component::C1, true, 3, "child")
                .unwrap()
                .build(),
        );
        let comp = TableauComponent::new("alcn", sig.clone());
        let human = sig.mk_var("Human").unwrap();
        let woman = sig.mk_var("Woman").unwrap();
        let lhs = Term::and(&human, &sig.mk_app("atleast:3:child", &[]).unwrap());
        let rhs = sig
            .mk_app("exists:entitled", &[sig.mk_var("Taxbreak").unwrap()])
            .unwrap();
        let gamma = AssertionSet::from_iter([
            Assertion::Inclusion(lhs, rhs),
            member("MARY", woman),
        ]);
        let verdict = comp.decide_relativized_sat(&gamma).unwrap();
        assert!(verdict.is_sat());
        assert!(find_model(&gamma, &sig, 1).unwrap().found().is_some());
    }

    #[test]
    fn witnesses_pass_oracle_check() {
        let sig = alcn_sig();
        let alcn = TableauComponent::new("alcn", sig.clone());
        let x = sig.mk_var("x").unwrap();
        let t = Term::conj([
            sig.mk_app("exists:R", &[x.clone()]).unwrap(),
            sig.mk_app("exists:R", &[Term::not(&x)]).unwrap(),
            sig.mk_app("atmost:2:R", &[]).unwrap(),
        ]);
        let gamma = AssertionSet::from_iter([member("a", t)]);
        let verdict = alcn.decide_object_sat(&gamma).unwrap();
        assert!(verdict.is_sat());
        let w = verdict.witness().expect("small query materializes a witness");
        assert!(oracle::check(&gamma, w).unwrap());
    }

    #[test]
    fn covering_terms() {
        let sig = alcn_sig();
        let comp = TableauComponent::new("alcn", sig.clone());
        let exists_r = sig.function("exists:R").unwrap().clone();
        let forall_r = sig.function("forall:R").unwrap().clone();
        let atleast2 = sig.function("atleast:2:R").unwrap().clone();
        let forall_x = Term::app(&forall_r, &[Term::var(COVERING_VAR)]).unwrap();
        assert_eq!(comp.covering_term(&exists_r).unwrap(), forall_x);
        assert_eq!(comp.covering_term(&forall_r).unwrap(), forall_x);
        assert_eq!(comp.covering_term(&atleast2).unwrap(), Term::top());
        // Deduplicated conjunction.
        assert_eq!(
            comp.combined_covering_term(&[exists_r.clone(), forall_r.clone()]).unwrap(),
            forall_x
        );
        assert_eq!(comp.combined_covering_term(&[]).unwrap(), Term::top());
        assert_eq!(comp.combined_covering_term(&[atleast2]).unwrap(), Term::top());
    }

    #[test]
    fn propositional_base() {
        let sig = alc_sig();
        let x = sig.mk_var("x").unwrap();
        let clash = AssertionSet::from_iter([
            member("a", x.clone()),
            member("a", Term::not(&x)),
        ]);
        assert!(decide_propositional(&clash).unwrap().is_unsat());
        let rel = sig.relation("R").unwrap().clone();
        let fine = AssertionSet::from_iter([
            member("a", x.clone()),
            member("b", Term::not(&x)),
            Assertion::Rel { rel, from: "a".into(), to: "b".into() },
        ]);
        let v = decide_propositional(&fine).unwrap();
        assert!(v.is_sat());
        assert!(oracle::check(&fine, v.witness().unwrap()).unwrap());
    }

    #[test]
    fn depth_zero_types_are_satisfiable() {
        // Every full sign assignment over distinct variables is satisfiable.
        let sig = alc_sig();
        let x = sig.mk_var("x").unwrap();
        let y = sig.mk_var("y").unwrap();
        for signs in 0..4u8 {
            let t = Term::and(
                &(if signs & 1 == 1 { x.clone() } else { Term::not(&x) }),
                &(if signs & 2 == 2 { y.clone() } else { Term::not(&y) }),
            );
            let gamma = AssertionSet::from_iter([member("a", t)]);
            assert!(decide_propositional(&gamma).unwrap().is_sat());
        }
    }

    #[test]
    fn tautology_checker() {
        let x = Term::var("x");
        assert!(propositional_tautology(&Term::or(&x, &Term::not(&x))).unwrap());
        assert!(!propositional_tautology(&x).unwrap());
        assert!(propositional_unsat(&Term::and(&x, &Term::not(&x))).unwrap());
    }

    #[test]
    fn resource_cap_is_reachable() {
        let sig = alc_sig();
        let alc = TableauComponent::new("alc", sig.clone()).with_budget(3);
        let x = sig.mk_var("x").unwrap();
        let mut t = x.clone();
        for _ in 0..6 {
            t = sig.mk_app("exists:R", &[t]).unwrap();
        }
        let gamma = AssertionSet::from_iter([member("a", t)]);
        assert!(matches!(
            alc.decide_object_sat(&gamma).unwrap(),
            Verdict::Resource(ResourceKind::RuleCap)
        ));
    }
}
