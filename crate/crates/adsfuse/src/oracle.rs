//! Brute-force semantics over explicit finite models.
//!
//! A [`FiniteInterpretation`] is a frame (domain of at most 64 points,
//! relation edge sets) together with an assignment (point sets for set
//! variables, injective points for object variables). Terms evaluate to
//! point sets bottom-up; assertion sets are checked directly against the
//! truth clauses.
//!
//! [`find_model`] searches domains of increasing size for a model of an
//! assertion set. A negative answer is *not* a proof of unsatisfiability —
//! callers receive `NotFoundUpTo(bound)`, never "unsat". The search assigns
//! unknown membership/edge bits one at a time in a fixed canonical order,
//! pruning with a three-valued evaluation, with named objects pinned to the
//! first domain points as symmetry reduction.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::adl::{
    Assertion, AssertionSet, FuncInterp, RelDecl, RoleExpr, Signature, Term, TermKind,
};
use crate::{Error, ResourceKind, Result};

/// Point sets are 64-bit masks, which caps oracle domains at 64 points;
/// practical bounds are far lower.
pub type PointSet = u64;

fn full(n: usize) -> PointSet {
    if n >= 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

/// An explicit finite abstract description model plus assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteInterpretation {
    /// Domain size; points are `0..domain`.
    pub domain: usize,
    /// Edge sets per relation name: `edges[w]` is the successor set of `w`.
    pub roles: BTreeMap<String, Vec<PointSet>>,
    /// Set-variable assignment. Unlisted variables denote the empty set.
    pub vars: BTreeMap<String, PointSet>,
    /// Object-variable assignment; must be injective.
    pub objects: BTreeMap<String, usize>,
}

impl FiniteInterpretation {
    pub fn new(domain: usize) -> Self {
        assert!(domain >= 1 && domain <= 64, "domain must be 1..=64");
        FiniteInterpretation {
            domain,
            roles: BTreeMap::new(),
            vars: BTreeMap::new(),
            objects: BTreeMap::new(),
        }
    }

    pub fn with_role(mut self, name: &str, edges: &[(usize, usize)]) -> Self {
        let rows = self.roles.entry(name.to_string()).or_insert(vec![0; self.domain]);
        for &(a, b) in edges {
            rows[a] |= 1 << b;
        }
        self
    }

    pub fn with_var(mut self, name: &str, points: &[usize]) -> Self {
        let mut mask = 0;
        for &p in points {
            mask |= 1 << p;
        }
        self.vars.insert(name.to_string(), mask);
        self
    }

    pub fn with_object(mut self, name: &str, point: usize) -> Self {
        self.objects.insert(name.to_string(), point);
        self
    }

    pub fn successors(&self, role: &str, w: usize) -> PointSet {
        self.roles.get(role).map(|rows| rows[w]).unwrap_or(0)
    }

    fn row_slice(&self, role: &str) -> Vec<PointSet> {
        self.roles.get(role).cloned().unwrap_or_else(|| vec![0; self.domain])
    }

    /// Checks the model-class restrictions recorded in the signature, plus
    /// injectivity of the object assignment.
    pub fn validate(&self, sig: &Signature) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (name, &p) in &self.objects {
            if p >= self.domain {
                return Err(Error::Invalid(format!("object {name} outside domain")));
            }
            if let Some(prev) = seen.insert(p, name.clone()) {
                return Err(Error::Invalid(format!(
                    "object assignment not injective: {prev} and {name} share a point"
                )));
            }
        }
        for rel in sig.relations() {
            let rows = self.row_slice(&rel.name);
            if rel.functional {
                for (w, row) in rows.iter().enumerate() {
                    if row.count_ones() > 1 {
                        return Err(Error::Invalid(format!(
                            "feature {} has two successors at point {w}",
                            rel.name
                        )));
                    }
                }
            }
            if rel.transitive && transitive_closure(&rows) != rows {
                return Err(Error::Invalid(format!(
                    "transitive role {} is not transitively closed",
                    rel.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let roles: BTreeMap<String, Vec<[usize; 2]>> = self
            .roles
            .iter()
            .map(|(name, rows)| {
                let mut edges = Vec::new();
                for (a, row) in rows.iter().enumerate() {
                    for b in 0..self.domain {
                        if row >> b & 1 == 1 {
                            edges.push([a, b]);
                        }
                    }
                }
                (name.clone(), edges)
            })
            .collect();
        let vars: BTreeMap<String, Vec<usize>> = self
            .vars
            .iter()
            .map(|(name, mask)| {
                (
                    name.clone(),
                    (0..self.domain).filter(|p| mask >> p & 1 == 1).collect(),
                )
            })
            .collect();
        json!({
            "domain": self.domain,
            "roles": roles,
            "vars": vars,
            "objects": self.objects,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let domain = v
            .get("domain")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Invalid("model missing domain".into()))? as usize;
        if domain == 0 || domain > 64 {
            return Err(Error::Invalid("model domain must be 1..=64".into()));
        }
        let mut m = FiniteInterpretation::new(domain);
        if let Some(roles) = v.get("roles").and_then(Value::as_object) {
            for (name, edges) in roles {
                let pairs: Vec<(usize, usize)> = edges
                    .as_array()
                    .ok_or_else(|| Error::Invalid("role edges must be an array".into()))?
                    .iter()
                    .map(|e| {
                        let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                            Error::Invalid("edge must be a two-element array".into())
                        })?;
                        Ok((
                            pair[0].as_u64().unwrap_or(u64::MAX) as usize,
                            pair[1].as_u64().unwrap_or(u64::MAX) as usize,
                        ))
                    })
                    .collect::<Result<_>>()?;
                for &(a, b) in &pairs {
                    if a >= domain || b >= domain {
                        return Err(Error::Invalid("edge outside domain".into()));
                    }
                }
                m = m.with_role(name, &pairs);
            }
        }
        if let Some(vars) = v.get("vars").and_then(Value::as_object) {
            for (name, points) in vars {
                let pts: Vec<usize> = points
                    .as_array()
                    .ok_or_else(|| Error::Invalid("var points must be an array".into()))?
                    .iter()
                    .filter_map(Value::as_u64)
                    .map(|p| p as usize)
                    .collect();
                if pts.iter().any(|&p| p >= domain) {
                    return Err(Error::Invalid("var point outside domain".into()));
                }
                m = m.with_var(name, &pts);
            }
        }
        if let Some(objs) = v.get("objects").and_then(Value::as_object) {
            for (name, p) in objs {
                let p = p
                    .as_u64()
                    .ok_or_else(|| Error::Invalid("object point must be a number".into()))?
                    as usize;
                if p >= domain {
                    return Err(Error::Invalid("object point outside domain".into()));
                }
                m = m.with_object(name, p);
            }
        }
        Ok(m)
    }
}

fn transitive_closure(rows: &[PointSet]) -> Vec<PointSet> {
    let n = rows.len();
    let mut out = rows.to_vec();
    // Floyd–Warshall on bit rows.
    for k in 0..n {
        for i in 0..n {
            if out[i] >> k & 1 == 1 {
                out[i] |= out[k];
            }
        }
    }
    out
}

/// `t^{W,A}`: bottom-up evaluation to a point set.
pub fn eval(t: &Term, m: &FiniteInterpretation) -> Result<PointSet> {
    let w = full(m.domain);
    match t.kind() {
        TermKind::Var(name) => Ok(*m.vars.get(name).unwrap_or(&0)),
        TermKind::Top => Ok(w),
        TermKind::Bot => Ok(0),
        TermKind::Not(a) => Ok(w & !eval(a, m)?),
        TermKind::And(a, b) => Ok(eval(a, m)? & eval(b, m)?),
        TermKind::Or(a, b) => Ok(eval(a, m)? | eval(b, m)?),
        TermKind::App(decl, args) => {
            let arg = |k: usize| eval(&args[k], m);
            match &decl.interp {
                FuncInterp::Exists(RoleExpr::Name(r)) => {
                    let x = arg(0)?;
                    let mut out = 0;
                    for p in 0..m.domain {
                        if m.successors(r, p) & x != 0 {
                            out |= 1 << p;
                        }
                    }
                    Ok(out)
                }
                FuncInterp::Forall(RoleExpr::Name(r)) => {
                    let x = arg(0)?;
                    let mut out = 0;
                    for p in 0..m.domain {
                        if m.successors(r, p) & !x & w == 0 {
                            out |= 1 << p;
                        }
                    }
                    Ok(out)
                }
                FuncInterp::AtLeast(n, RoleExpr::Name(r)) => {
                    let mut out = 0;
                    for p in 0..m.domain {
                        if m.successors(r, p).count_ones() >= *n {
                            out |= 1 << p;
                        }
                    }
                    Ok(out)
                }
                FuncInterp::AtMost(n, RoleExpr::Name(r)) => {
                    let mut out = 0;
                    for p in 0..m.domain {
                        if m.successors(r, p).count_ones() <= *n {
                            out |= 1 << p;
                        }
                    }
                    Ok(out)
                }
                FuncInterp::ExistsUniversal => {
                    let x = arg(0)?;
                    Ok(if x == 0 { 0 } else { w })
                }
                FuncInterp::ForallUniversal => {
                    let x = arg(0)?;
                    Ok(if x == w { w } else { 0 })
                }
                _ => Err(Error::UninterpretedSymbol(decl.name.clone())),
            }
        }
    }
}

/// Independent pointwise evaluator: membership of one point, computed by the
/// truth clauses directly rather than through set masks. Used to cross-check
/// [`eval`].
pub fn eval_point(t: &Term, m: &FiniteInterpretation, p: usize) -> Result<bool> {
    match t.kind() {
        TermKind::Var(name) => Ok(m.vars.get(name).unwrap_or(&0) >> p & 1 == 1),
        TermKind::Top => Ok(true),
        TermKind::Bot => Ok(false),
        TermKind::Not(a) => Ok(!eval_point(a, m, p)?),
        TermKind::And(a, b) => Ok(eval_point(a, m, p)? && eval_point(b, m, p)?),
        TermKind::Or(a, b) => Ok(eval_point(a, m, p)? || eval_point(b, m, p)?),
        TermKind::App(decl, args) => match &decl.interp {
            FuncInterp::Exists(RoleExpr::Name(r)) => {
                for q in 0..m.domain {
                    if m.successors(r, p) >> q & 1 == 1 && eval_point(&args[0], m, q)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            FuncInterp::Forall(RoleExpr::Name(r)) => {
                for q in 0..m.domain {
                    if m.successors(r, p) >> q & 1 == 1 && !eval_point(&args[0], m, q)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            FuncInterp::AtLeast(n, RoleExpr::Name(r)) => {
                Ok(m.successors(r, p).count_ones() >= *n)
            }
            FuncInterp::AtMost(n, RoleExpr::Name(r)) => Ok(m.successors(r, p).count_ones() <= *n),
            FuncInterp::ExistsUniversal => {
                for q in 0..m.domain {
                    if eval_point(&args[0], m, q)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            FuncInterp::ForallUniversal => {
                for q in 0..m.domain {
                    if !eval_point(&args[0], m, q)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Err(Error::UninterpretedSymbol(decl.name.clone())),
        },
    }
}

/// True iff every assertion of Γ holds in the model.
pub fn check(gamma: &AssertionSet, m: &FiniteInterpretation) -> Result<bool> {
    let w = full(m.domain);
    for a in gamma {
        let ok = match a {
            Assertion::Inclusion(l, r) => eval(l, m)? & !eval(r, m)? & w == 0,
            Assertion::Rel { rel, from, to } => {
                let (Some(&f), Some(&t)) = (m.objects.get(from), m.objects.get(to)) else {
                    return Ok(false);
                };
                m.successors(&rel.name, f) >> t & 1 == 1
            }
            Assertion::Member { obj, term } => {
                let Some(&p) = m.objects.get(obj) else {
                    return Ok(false);
                };
                eval(term, m)? >> p & 1 == 1
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of a bounded model search. `NotFoundUpTo` is *not* "unsat".
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Found(FiniteInterpretation),
    NotFoundUpTo(usize),
}

impl OracleOutcome {
    pub fn found(&self) -> Option<&FiniteInterpretation> {
        match self {
            OracleOutcome::Found(m) => Some(m),
            OracleOutcome::NotFoundUpTo(_) => None,
        }
    }
}

/// Three-valued partial assignment for one bit field.
#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    known_one: PointSet,
    known_zero: PointSet,
}

struct SearchCtx<'a> {
    gamma: &'a AssertionSet,
    n: usize,
    var_names: Vec<String>,
    roles: Vec<Arc<RelDecl>>,
    objects: BTreeMap<String, usize>,
}

/// Lower/upper approximation of a term value under a partial assignment:
/// `lo` points surely in, `hi` points possibly in.
#[derive(Debug, Clone, Copy)]
struct Approx {
    lo: PointSet,
    hi: PointSet,
}

struct PartialModel {
    vars: Vec<Partial>,
    // Row-per-point edge sets, one Vec per role.
    role_one: Vec<Vec<PointSet>>,
    role_zero: Vec<Vec<PointSet>>,
}

impl SearchCtx<'_> {
    fn approx(&self, t: &Term, pm: &PartialModel) -> Result<Approx> {
        let w = full(self.n);
        Ok(match t.kind() {
            TermKind::Var(name) => match self.var_names.iter().position(|v| v == name) {
                Some(i) => Approx {
                    lo: pm.vars[i].known_one,
                    hi: w & !pm.vars[i].known_zero,
                },
                // Variables not tracked are interpreted as empty.
                None => Approx { lo: 0, hi: 0 },
            },
            TermKind::Top => Approx { lo: w, hi: w },
            TermKind::Bot => Approx { lo: 0, hi: 0 },
            TermKind::Not(a) => {
                let x = self.approx(a, pm)?;
                Approx { lo: w & !x.hi, hi: w & !x.lo }
            }
            TermKind::And(a, b) => {
                let (x, y) = (self.approx(a, pm)?, self.approx(b, pm)?);
                Approx { lo: x.lo & y.lo, hi: x.hi & y.hi }
            }
            TermKind::Or(a, b) => {
                let (x, y) = (self.approx(a, pm)?, self.approx(b, pm)?);
                Approx { lo: x.lo | y.lo, hi: x.hi | y.hi }
            }
            TermKind::App(decl, args) => {
                let role_idx = |name: &str| self.roles.iter().position(|r| r.name == name);
                match &decl.interp {
                    FuncInterp::Exists(RoleExpr::Name(r)) => {
                        let x = self.approx(&args[0], pm)?;
                        let idx = role_idx(r);
                        let (mut lo, mut hi) = (0, 0);
                        for p in 0..self.n {
                            let (one, zero) = match idx {
                                Some(i) => (pm.role_one[i][p], pm.role_zero[i][p]),
                                None => (0, w),
                            };
                            if one & x.lo != 0 {
                                lo |= 1 << p;
                            }
                            if (w & !zero) & x.hi != 0 {
                                hi |= 1 << p;
                            }
                        }
                        Approx { lo, hi }
                    }
                    FuncInterp::Forall(RoleExpr::Name(r)) => {
                        let x = self.approx(&args[0], pm)?;
                        let idx = role_idx(r);
                        let (mut lo, mut hi) = (0, 0);
                        for p in 0..self.n {
                            let (one, zero) = match idx {
                                Some(i) => (pm.role_one[i][p], pm.role_zero[i][p]),
                                None => (0, w),
                            };
                            let possible = w & !zero;
                            if possible & !x.lo == 0 {
                                lo |= 1 << p;
                            }
                            if one & !x.hi == 0 {
                                hi |= 1 << p;
                            }
                        }
                        Approx { lo, hi }
                    }
                    FuncInterp::AtLeast(k, RoleExpr::Name(r)) => {
                        self.count_approx(pm, r, |succ_min, succ_max| {
                            (succ_min >= *k, succ_max >= *k)
                        })
                    }
                    FuncInterp::AtMost(k, RoleExpr::Name(r)) => {
                        self.count_approx(pm, r, |succ_min, succ_max| {
                            (succ_max <= *k, succ_min <= *k)
                        })
                    }
                    FuncInterp::ExistsUniversal => {
                        let x = self.approx(&args[0], pm)?;
                        Approx {
                            lo: if x.lo != 0 { w } else { 0 },
                            hi: if x.hi != 0 { w } else { 0 },
                        }
                    }
                    FuncInterp::ForallUniversal => {
                        let x = self.approx(&args[0], pm)?;
                        Approx {
                            lo: if x.lo == w { w } else { 0 },
                            hi: if x.hi == w { w } else { 0 },
                        }
                    }
                    _ => return Err(Error::UninterpretedSymbol(decl.name.clone())),
                }
            }
        })
    }

    fn count_approx(
        &self,
        pm: &PartialModel,
        role: &str,
        classify: impl Fn(u32, u32) -> (bool, bool),
    ) -> Approx {
        let w = full(self.n);
        let idx = self.roles.iter().position(|r| r.name == role);
        let (mut lo, mut hi) = (0, 0);
        for p in 0..self.n {
            let (one, zero) = match idx {
                Some(i) => (pm.role_one[i][p], pm.role_zero[i][p]),
                None => (0, w),
            };
            let succ_min = one.count_ones();
            let succ_max = (w & !zero).count_ones();
            let (sure, possible) = classify(succ_min, succ_max);
            if sure {
                lo |= 1 << p;
            }
            if possible {
                hi |= 1 << p;
            }
        }
        Approx { lo, hi }
    }

    /// Three-valued status of the whole assertion set: Some(false) if some
    /// assertion is surely violated, Some(true) if all surely hold.
    fn status(&self, pm: &PartialModel) -> Result<Option<bool>> {
        let w = full(self.n);
        let mut all_true = true;
        for a in self.gamma {
            match a {
                Assertion::Inclusion(l, r) => {
                    let (x, y) = (self.approx(l, pm)?, self.approx(r, pm)?);
                    if x.lo & !y.hi & w != 0 {
                        return Ok(Some(false));
                    }
                    if x.hi & !y.lo & w != 0 {
                        all_true = false;
                    }
                }
                Assertion::Rel { .. } => {
                    // Holds by construction: named edges are pre-assigned.
                }
                Assertion::Member { obj, term } => {
                    let p = self.objects[obj];
                    let x = self.approx(term, pm)?;
                    if x.hi >> p & 1 == 0 {
                        return Ok(Some(false));
                    }
                    if x.lo >> p & 1 == 0 {
                        all_true = false;
                    }
                }
            }
        }
        Ok(if all_true { Some(true) } else { None })
    }

    /// Structural pruning for role restrictions on partial edges.
    fn roles_consistent(&self, pm: &PartialModel) -> bool {
        let w = full(self.n);
        for (i, rel) in self.roles.iter().enumerate() {
            if rel.functional {
                for p in 0..self.n {
                    if pm.role_one[i][p].count_ones() > 1 {
                        return false;
                    }
                }
            }
            if rel.transitive {
                for p in 0..self.n {
                    let one = pm.role_one[i][p];
                    for q in 0..self.n {
                        if one >> q & 1 == 1 {
                            // Known edges (p,q),(q,u) force (p,u).
                            let forced = pm.role_one[i][q];
                            if forced & pm.role_zero[i][p] & w != 0 {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }
}

/// Searches for a model of Γ with domain at most `max_domain`, smallest
/// domain first. Relation restrictions (transitivity, functionality) are
/// taken from the signature.
pub fn find_model(
    gamma: &AssertionSet,
    sig: &Signature,
    max_domain: usize,
) -> Result<OracleOutcome> {
    if max_domain == 0 || max_domain > 16 {
        return Err(Error::ResourceCap { kind: ResourceKind::DomainCap, limit: 16 });
    }
    // Symbols that actually occur; everything else is interpreted trivially.
    let mut var_names: Vec<String> = Vec::new();
    let mut role_names: Vec<String> = Vec::new();
    for t in gamma.terms() {
        for v in t.free_vars() {
            if !var_names.contains(&v) {
                var_names.push(v);
            }
        }
        for f in t.function_symbols() {
            match &f.interp {
                FuncInterp::Exists(RoleExpr::Name(r))
                | FuncInterp::Forall(RoleExpr::Name(r))
                | FuncInterp::AtLeast(_, RoleExpr::Name(r))
                | FuncInterp::AtMost(_, RoleExpr::Name(r)) => {
                    if !role_names.contains(r) {
                        role_names.push(r.clone());
                    }
                }
                FuncInterp::ExistsUniversal | FuncInterp::ForallUniversal => {}
                FuncInterp::Uninterpreted
                | FuncInterp::Exists(_)
                | FuncInterp::Forall(_)
                | FuncInterp::AtLeast(..)
                | FuncInterp::AtMost(..) => {
                    return Err(Error::UninterpretedSymbol(f.name.clone()))
                }
            }
        }
    }
    for a in gamma {
        if let Assertion::Rel { rel, .. } = a {
            if !role_names.contains(&rel.name) {
                role_names.push(rel.name.clone());
            }
        }
    }
    var_names.sort();
    role_names.sort();
    let roles: Vec<Arc<RelDecl>> = role_names
        .iter()
        .map(|name| {
            sig.relation(name).cloned().unwrap_or_else(|| {
                Arc::new(RelDecl {
                    name: name.clone(),
                    component: crate::adl::Component::C1,
                    transitive: false,
                    functional: false,
                })
            })
        })
        .collect();

    let named: Vec<String> = gamma.objects().into_iter().collect();
    let min_domain = named.len().max(1);

    for n in min_domain..=max_domain {
        let objects: BTreeMap<String, usize> =
            named.iter().cloned().zip(0..named.len()).collect();
        let ctx = SearchCtx { gamma, n, var_names: var_names.clone(), roles: roles.clone(), objects };
        let mut pm = PartialModel {
            vars: vec![Partial::default(); ctx.var_names.len()],
            role_one: vec![vec![0; n]; ctx.roles.len()],
            role_zero: vec![vec![0; n]; ctx.roles.len()],
        };
        // Named role assertions are fixed up front.
        for a in gamma {
            if let Assertion::Rel { rel, from, to } = a {
                let i = ctx.roles.iter().position(|r| r.name == rel.name).unwrap();
                pm.role_one[i][ctx.objects[from]] |= 1 << ctx.objects[to];
            }
        }
        if let Some(m) = search(&ctx, &mut pm, 0)? {
            return Ok(OracleOutcome::Found(m));
        }
    }
    Ok(OracleOutcome::NotFoundUpTo(max_domain))
}

/// Bit `k` in the fixed decision order: first all variable bits (variable
/// index major, point minor), then all edge bits (role, source, target).
fn bit_count(ctx: &SearchCtx) -> usize {
    ctx.var_names.len() * ctx.n + ctx.roles.len() * ctx.n * ctx.n
}

fn assign(ctx: &SearchCtx, pm: &mut PartialModel, k: usize, value: bool) {
    let nv = ctx.var_names.len() * ctx.n;
    if k < nv {
        let (vi, p) = (k / ctx.n, k % ctx.n);
        if value {
            pm.vars[vi].known_one |= 1 << p;
        } else {
            pm.vars[vi].known_zero |= 1 << p;
        }
    } else {
        let k = k - nv;
        let per_role = ctx.n * ctx.n;
        let (ri, rest) = (k / per_role, k % per_role);
        let (src, dst) = (rest / ctx.n, rest % ctx.n);
        if value {
            pm.role_one[ri][src] |= 1 << dst;
        } else {
            pm.role_zero[ri][src] |= 1 << dst;
        }
    }
}

fn is_assigned(ctx: &SearchCtx, pm: &PartialModel, k: usize) -> bool {
    let nv = ctx.var_names.len() * ctx.n;
    if k < nv {
        let (vi, p) = (k / ctx.n, k % ctx.n);
        (pm.vars[vi].known_one | pm.vars[vi].known_zero) >> p & 1 == 1
    } else {
        let k = k - nv;
        let per_role = ctx.n * ctx.n;
        let (ri, rest) = (k / per_role, k % per_role);
        let (src, dst) = (rest / ctx.n, rest % ctx.n);
        (pm.role_one[ri][src] | pm.role_zero[ri][src]) >> dst & 1 == 1
    }
}

fn search(ctx: &SearchCtx, pm: &mut PartialModel, from_bit: usize) -> Result<Option<FiniteInterpretation>> {
    if !ctx.roles_consistent(pm) {
        return Ok(None);
    }
    match ctx.status(pm)? {
        Some(false) => return Ok(None),
        Some(true) | None => {}
    }
    let total = bit_count(ctx);
    let mut k = from_bit;
    while k < total && is_assigned(ctx, pm, k) {
        k += 1;
    }
    if k == total {
        let m = materialize(ctx, pm);
        // Full models must satisfy Γ exactly (the three-valued status is
        // exact once complete) and the closure conditions.
        for (i, rel) in ctx.roles.iter().enumerate() {
            if rel.transitive && transitive_closure(&pm.role_one[i]) != pm.role_one[i] {
                return Ok(None);
            }
        }
        return Ok(if check(ctx.gamma, &m)? { Some(m) } else { None });
    }
    for value in [false, true] {
        let mut next = PartialModel {
            vars: pm.vars.clone(),
            role_one: pm.role_one.clone(),
            role_zero: pm.role_zero.clone(),
        };
        assign(ctx, &mut next, k, value);
        if let Some(m) = search(ctx, &mut next, k + 1)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

fn materialize(ctx: &SearchCtx, pm: &PartialModel) -> FiniteInterpretation {
    let mut m = FiniteInterpretation::new(ctx.n);
    for (vi, name) in ctx.var_names.iter().enumerate() {
        m.vars.insert(name.clone(), pm.vars[vi].known_one);
    }
    for (ri, rel) in ctx.roles.iter().enumerate() {
        m.roles.insert(rel.name.clone(), pm.role_one[ri].clone());
    }
    m.objects = ctx.objects.clone();
    m
}

/// The disjoint union of finitely many models: domains are relabeled to be
/// consecutive, relations and valuations are unioned. Object assignments are
/// taken from the first member (the union is about frames; objects only need
/// *some* injective placement).
pub fn disjoint_union(models: &[FiniteInterpretation]) -> FiniteInterpretation {
    assert!(!models.is_empty(), "disjoint union needs at least one member");
    let total: usize = models.iter().map(|m| m.domain).sum();
    let mut out = FiniteInterpretation::new(total);
    let mut offset = 0;
    for m in models {
        for (name, rows) in &m.roles {
            let target = out.roles.entry(name.clone()).or_insert(vec![0; total]);
            for (p, row) in rows.iter().enumerate() {
                target[offset + p] |= row << offset;
            }
        }
        for (name, mask) in &m.vars {
            *out.vars.entry(name.clone()).or_insert(0) |= mask << offset;
        }
        offset += m.domain;
    }
    for (name, &p) in &models[0].objects {
        out.objects.insert(name.clone(), p);
    }
    out
}

/// Checks the three covering-normal-term conditions for `t_f` against `f` on
/// one model, exhaustively over subsets of the domain.
///
/// The term `t_f` must have at most one free variable; `f` is applied to
/// fresh argument variables. Domains above 5 points are rejected (the check
/// is exponential in the domain).
pub fn verify_covering_term(
    m: &FiniteInterpretation,
    f: &Arc<crate::adl::FuncDecl>,
    t_f: &Term,
) -> Result<bool> {
    if m.domain > 5 {
        return Err(Error::ResourceCap { kind: ResourceKind::DomainCap, limit: 5 });
    }
    let w = full(m.domain);
    let subsets = || 0..=w;
    let tf_at = |x: PointSet| -> Result<PointSet> {
        let mut probe = m.clone();
        probe.vars.insert("$cover".into(), x);
        let vars = t_f.free_vars();
        let t = match vars.iter().next() {
            Some(v) => t_f.substitute(v, &Term::var("$cover")),
            None => t_f.clone(),
        };
        eval(&t, &probe)
    };
    // (1) t_f(W) = W.
    if tf_at(w)? != w {
        return Ok(false);
    }
    // (2) t_f(X ∩ Y) = t_f(X) ∩ t_f(Y).
    for x in subsets() {
        for y in subsets() {
            if tf_at(x & y)? != tf_at(x)? & tf_at(y)? {
                return Ok(false);
            }
        }
    }
    // (3) X ∩ X_i = X ∩ Y_i for all i implies
    //     t_f(X) ∩ f(X…) = t_f(X) ∩ f(Y…).
    let arity = f.arity;
    if arity == 0 {
        return Ok(true);
    }
    let arg_vars: Vec<String> = (0..arity).map(|k| format!("$arg{k}")).collect();
    let f_args: Vec<Term> = arg_vars.iter().map(|v| Term::var(v.clone())).collect();
    let f_app = Term::app(f, &f_args)?;
    let f_at = |args: &[PointSet]| -> Result<PointSet> {
        let mut probe = m.clone();
        for (v, &mask) in arg_vars.iter().zip(args) {
            probe.vars.insert(v.clone(), mask);
        }
        eval(&f_app, &probe)
    };
    // Exhaustive only for arity 1 (the shipped symbols); higher arities would
    // need 4^(n·arity) cases.
    if arity > 1 {
        return Err(Error::UnsupportedSymbol(f.name.clone()));
    }
    for x in subsets() {
        let tfx = tf_at(x)?;
        for x1 in subsets() {
            for y1 in subsets() {
                if x & x1 == x & y1 && tfx & f_at(&[x1])? != tfx & f_at(&[y1])? {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Checks normality of a function symbol on one model: meet distribution in
/// every argument and the unit laws. For nullary symbols the unit law reads
/// `f = W`.
pub fn verify_normality(m: &FiniteInterpretation, f: &Arc<crate::adl::FuncDecl>) -> Result<bool> {
    if m.domain > 5 {
        return Err(Error::ResourceCap { kind: ResourceKind::DomainCap, limit: 5 });
    }
    let w = full(m.domain);
    let arity = f.arity;
    let arg_vars: Vec<String> = (0..arity).map(|k| format!("$arg{k}")).collect();
    let f_app = Term::app(f, &arg_vars.iter().map(|v| Term::var(v.clone())).collect::<Vec<_>>())?;
    let f_at = |args: &[PointSet]| -> Result<PointSet> {
        let mut probe = m.clone();
        for (v, &mask) in arg_vars.iter().zip(args) {
            probe.vars.insert(v.clone(), mask);
        }
        eval(&f_app, &probe)
    };
    if arity == 0 {
        return Ok(f_at(&[])? == w);
    }
    if arity > 1 {
        return Err(Error::UnsupportedSymbol(f.name.clone()));
    }
    // Unit: F(W) = W; meet distribution: F(X ∩ Y) = F(X) ∩ F(Y).
    if f_at(&[w])? != w {
        return Ok(false);
    }
    for x in 0..=w {
        for y in 0..=w {
            if f_at(&[x & y])? != f_at(&[x])? & f_at(&[y])? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::{Component, Signature};

    fn sig() -> Signature {
        Signature::builder()
            .set_var("x")
            .unwrap()
            .obj_var("a")
            .unwrap()
            .obj_var("b")
            .unwrap()
            .role(Component::C1, "R", false, false)
            .unwrap()
            .number_restriction(Component::C1, false, 1, "R")
            .unwrap()
            .number_restriction(Component::C1, true, 2, "R")
            .unwrap()
            .build()
    }

    #[test]
    fn eval_top_is_full_domain() {
        let m = FiniteInterpretation::new(3);
        assert_eq!(eval(&Term::top(), &m).unwrap(), 0b111);
    }

    #[test]
    fn eval_exists_clause() {
        // Domain {0,1}, R = {(0,1)}, x = {1}: eval(exists R . x) = {0}.
        let s = sig();
        let m = FiniteInterpretation::new(2)
            .with_role("R", &[(0, 1)])
            .with_var("x", &[1]);
        let t = s.mk_app("exists:R", &[s.mk_var("x").unwrap()]).unwrap();
        assert_eq!(eval(&t, &m).unwrap(), 0b01);
    }

    #[test]
    fn contradictory_cardinalities_evaluate_empty() {
        let s = sig();
        let t = Term::and(
            &s.mk_app("atmost:1:R", &[]).unwrap(),
            &s.mk_app("atleast:2:R", &[]).unwrap(),
        );
        for edges in [vec![], vec![(0usize, 1usize)], vec![(0, 0), (0, 1), (1, 0)]] {
            let m = FiniteInterpretation::new(2).with_role("R", &edges);
            assert_eq!(eval(&t, &m).unwrap(), 0);
        }
    }

    #[test]
    fn check_clauses() {
        let s = sig();
        let m = FiniteInterpretation::new(2).with_object("a", 0).with_var("x", &[1]);
        let top_incl = AssertionSet::from_iter([Assertion::Inclusion(Term::top(), Term::top())]);
        assert!(check(&top_incl, &m).unwrap());
        let bad = AssertionSet::from_iter([Assertion::Member {
            obj: "a".into(),
            term: s.mk_var("x").unwrap(),
        }]);
        assert!(!check(&bad, &m).unwrap());
    }

    #[test]
    fn find_model_clash_is_never_found() {
        let s = sig();
        let x = s.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([Assertion::Member {
            obj: "a".into(),
            term: Term::and(&x, &Term::not(&x)),
        }]);
        assert_eq!(
            find_model(&gamma, &s, 4).unwrap(),
            OracleOutcome::NotFoundUpTo(4)
        );
    }

    #[test]
    fn find_model_smallest_domain() {
        let s = sig();
        let x = s.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([Assertion::Member {
            obj: "a".into(),
            term: s.mk_app("exists:R", &[x.clone()]).unwrap(),
        }]);
        let out = find_model(&gamma, &s, 4).unwrap();
        let m = out.found().expect("satisfiable");
        // One point with a self-loop suffices.
        assert_eq!(m.domain, 1);
        assert!(check(&gamma, m).unwrap());
    }

    #[test]
    fn found_models_pass_check_and_validate() {
        let s = sig();
        let x = s.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([
            Assertion::Member {
                obj: "a".into(),
                term: Term::and(
                    &s.mk_app("exists:R", &[x.clone()]).unwrap(),
                    &s.mk_app("exists:R", &[Term::not(&x)]).unwrap(),
                ),
            },
            Assertion::Member { obj: "b".into(), term: x.clone() },
        ]);
        let out = find_model(&gamma, &s, 4).unwrap();
        let m = out.found().expect("satisfiable");
        assert!(check(&gamma, m).unwrap());
        m.validate(&s).unwrap();
    }

    #[test]
    fn transitive_roles_are_closed_in_found_models() {
        let s = Signature::builder()
            .set_var("x")
            .unwrap()
            .obj_var("a")
            .unwrap()
            .role(Component::C1, "T", true, false)
            .unwrap()
            .build();
        let x = s.mk_var("x").unwrap();
        let inner = s.mk_app("exists:T", &[x.clone()]).unwrap();
        let gamma = AssertionSet::from_iter([
            Assertion::Member { obj: "a".into(), term: s.mk_app("exists:T", &[inner]).unwrap() },
            // Forbid the trivial collapse so the chain is real.
            Assertion::Member { obj: "a".into(), term: Term::not(&x) },
        ]);
        let out = find_model(&gamma, &s, 4).unwrap();
        let m = out.found().expect("satisfiable");
        m.validate(&s).unwrap();
        // Closure means a has a direct T-edge into x.
        let direct = s.mk_app("exists:T", &[x]).unwrap();
        let pa = m.objects["a"];
        assert_eq!(eval(&direct, m).unwrap() >> pa & 1, 1);
    }

    #[test]
    fn functional_roles_stay_functional() {
        let s = Signature::builder()
            .set_var("x")
            .unwrap()
            .obj_var("a")
            .unwrap()
            .role(Component::C1, "F", false, true)
            .unwrap()
            .build();
        let x = s.mk_var("x").unwrap();
        let gamma = AssertionSet::from_iter([Assertion::Member {
            obj: "a".into(),
            term: Term::and(
                &s.mk_app("exists:F", &[x.clone()]).unwrap(),
                &s.mk_app("exists:F", &[Term::not(&x)]).unwrap(),
            ),
        }]);
        // Two F-successors with complementary labels cannot be one point.
        assert_eq!(
            find_model(&gamma, &s, 4).unwrap(),
            OracleOutcome::NotFoundUpTo(4)
        );
    }

    #[test]
    fn disjoint_union_is_isomorphic_for_singletons() {
        let m = FiniteInterpretation::new(2)
            .with_role("R", &[(0, 1)])
            .with_var("x", &[0]);
        let u = disjoint_union(&[m.clone()]);
        assert_eq!(u.domain, m.domain);
        assert_eq!(u.roles, m.roles);
        assert_eq!(u.vars, m.vars);
    }

    #[test]
    fn union_identity_holds_for_local_constructors() {
        let s = sig();
        let x = s.mk_var("x").unwrap();
        let terms = [
            s.mk_app("exists:R", &[x.clone()]).unwrap(),
            s.mk_app("forall:R", &[x.clone()]).unwrap(),
            s.mk_app("atleast:2:R", &[]).unwrap(),
            s.mk_app("atmost:1:R", &[]).unwrap(),
        ];
        let m1 = FiniteInterpretation::new(2)
            .with_role("R", &[(0, 1), (1, 1)])
            .with_var("x", &[1]);
        let m2 = FiniteInterpretation::new(3)
            .with_role("R", &[(0, 1), (0, 2)])
            .with_var("x", &[0, 2]);
        let u = disjoint_union(&[m1.clone(), m2.clone()]);
        for t in &terms {
            let lhs = eval(t, &u).unwrap();
            let rhs = eval(t, &m1).unwrap() | (eval(t, &m2).unwrap() << m1.domain);
            assert_eq!(lhs, rhs, "union identity failed for {}", t.canonical());
        }
    }

    #[test]
    fn union_identity_fails_for_universal_role() {
        let s = Signature::builder()
            .set_var("x")
            .unwrap()
            .universal_role()
            .unwrap()
            .build();
        let x = s.mk_var("x").unwrap();
        let t = s.mk_app("existsU", &[x]).unwrap();
        // 1-point + 1-point union: x holds only in the first part.
        let m1 = FiniteInterpretation::new(1).with_var("x", &[0]);
        let m2 = FiniteInterpretation::new(1);
        let u = disjoint_union(&[m1.clone(), m2.clone()]);
        let lhs = eval(&t, &u).unwrap();
        let rhs = eval(&t, &m1).unwrap() | (eval(&t, &m2).unwrap() << 1);
        assert_ne!(lhs, rhs);
    }

    #[test]
    fn universal_semantics() {
        let s = Signature::builder()
            .set_var("x")
            .unwrap()
            .universal_role()
            .unwrap()
            .build();
        let x = s.mk_var("x").unwrap();
        let t = s.mk_app("existsU", &[x]).unwrap();
        let m_empty = FiniteInterpretation::new(3);
        assert_eq!(eval(&t, &m_empty).unwrap(), 0);
        let m_some = FiniteInterpretation::new(3).with_var("x", &[1]);
        assert_eq!(eval(&t, &m_some).unwrap(), 0b111);
    }

    #[test]
    fn covering_term_checks() {
        let s = sig();
        let exists_r = s.function("exists:R").unwrap().clone();
        let forall_r = s.function("forall:R").unwrap().clone();
        let atleast2 = s.function("atleast:2:R").unwrap().clone();
        let fx = Term::app(&forall_r, &[Term::var("$x")]).unwrap();
        let m = FiniteInterpretation::new(3).with_role("R", &[(0, 1), (1, 2), (2, 2)]);
        assert!(verify_covering_term(&m, &exists_r, &fx).unwrap());
        assert!(verify_covering_term(&m, &forall_r, &fx).unwrap());
        assert!(verify_covering_term(&m, &atleast2, &Term::top()).unwrap());

        // exists:R(x) as its own covering candidate fails t(W) = W when some
        // point has no successor.
        let ex = Term::app(&exists_r, &[Term::var("$x")]).unwrap();
        let m2 = FiniteInterpretation::new(2).with_role("R", &[(0, 1)]);
        assert!(!verify_covering_term(&m2, &exists_r, &ex).unwrap());
    }

    #[test]
    fn normality_checks() {
        let s = sig();
        let forall_r = s.function("forall:R").unwrap().clone();
        let atleast2 = s.function("atleast:2:R").unwrap().clone();
        let m = FiniteInterpretation::new(3).with_role("R", &[(0, 1), (1, 2)]);
        assert!(verify_normality(&m, &forall_r).unwrap());
        // Some point lacks 2 successors, so the nullary unit law fails.
        assert!(!verify_normality(&m, &atleast2).unwrap());
    }

    #[test]
    fn eval_agrees_with_pointwise_evaluator() {
        let s = sig();
        let x = s.mk_var("x").unwrap();
        let terms = [
            Term::and(&s.mk_app("exists:R", &[x.clone()]).unwrap(), &Term::not(&x)),
            s.mk_app("forall:R", &[Term::or(&x, &Term::bot())]).unwrap(),
            Term::or(
                &s.mk_app("atleast:2:R", &[]).unwrap(),
                &s.mk_app("atmost:1:R", &[]).unwrap(),
            ),
        ];
        let m = FiniteInterpretation::new(4)
            .with_role("R", &[(0, 1), (0, 2), (1, 3), (3, 3)])
            .with_var("x", &[1, 3]);
        for t in &terms {
            let mask = eval(t, &m).unwrap();
            for p in 0..m.domain {
                assert_eq!(mask >> p & 1 == 1, eval_point(t, &m, p).unwrap());
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = FiniteInterpretation::new(3)
            .with_role("R", &[(0, 1), (2, 2)])
            .with_var("x", &[0, 2])
            .with_object("a", 1);
        let back = FiniteInterpretation::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }
}
