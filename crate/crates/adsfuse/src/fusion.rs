//! Decision procedures for the fusion of two components.
//!
//! Two reductions are implemented.
//!
//! **Relativized satisfiability** (mixed sets, term assertions allowed):
//! guess a set `D` of types over the alien-subterm closure `sub¹(Γ)` and a
//! typing of the named objects into `D`; check the two surrogated component
//! problems
//!
//! ```text
//! Γ1 = {a_t : sur1(t) | t ∈ D} ∪ {top <= sur1(⋁D)}
//!    ∪ {a : sur1(t_a)} ∪ {R(a,b) | R component-1}
//!    ∪ {sur1(t1) <= sur1(t2)} ∪ {a : sur1(s)}
//! Γ2 = {a_t : sur2(t) | t ∈ D} ∪ {top <= sur2(⋁D)}
//!    ∪ {a : sur2(t_a)} ∪ {Q(a,b) | Q component-2}
//! ```
//!
//! The input is satisfiable iff some choice makes both sides satisfiable.
//! Before enumerating, types that are not individually satisfiable in both
//! components are discarded, and the remaining set is refined to its
//! greatest self-consistent subset (a type survives only while its
//! surrogations stay satisfiable under `top <= sur_i(⋁ survivors)`); both
//! prunes only remove types that can belong to no successful `D`.
//!
//! **Plain satisfiability** (object assertions only): no guessing of `D`.
//! Instead the set `Σ_i` of fusion-satisfiable types over `sub^i(Γ)` is
//! *computed* by recursion — the alternation depth of the types is strictly
//! smaller than that of Γ for at least one component, and depth zero is
//! Boolean reasoning — and the disjunction `sur_i(⋁Σ)` is pushed into terms
//! with covering normal terms iterated to the component depths `m`, `r`:
//!
//! ```text
//! Γ1 = {a_t : sur1(t ∧ c^{<=m}(sur1(⋁Σ)))} ∪ {a : sur1(t_a ∧ c^{<=m}(sur1(⋁Σ)))}
//!    ∪ {R(a,b)} ∪ {a : sur1(s)}
//! Γ2 = {a_t : sur2(t ∧ d^{<=r}(sur2(⋁Σ)))} ∪ {a : sur2(t_a ∧ d^{<=r}(sur2(⋁Σ)))}
//!    ∪ {Q(a,b)}
//! ```
//!
//! Term-satisfiability variants split each role-free component query into
//! independent per-object term queries, which is sound because the component
//! model classes are closed under disjoint unions.
//!
//! The universal-role transformer decides relativized term satisfiability in
//! the presence of `existsU`/`forallU` by guessing, for every
//! `forallU`-rooted subterm, whether it denotes the whole domain, replacing
//! it by `top`/`bot` accordingly, and adding the guard assertions of the
//! guess; the guess space is `2^(number of U-terms)`.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use crate::adl::{
    component_symbols, Assertion, AssertionSet, Component, FuncInterp, Signature, Term, TermKind,
};
use crate::components::{decide_propositional, ComponentReasoner, Verdict};
use crate::oracle;
use crate::surrogation::{
    alien_closure, alternation_depth_terms, apply_one_var, component_depth_set, consistency_set,
    iterate_cover, surrogate, SurrogateTable, TypeAtomSet, TypeDescriptor,
};
use crate::{Error, ResourceKind, Result};

/// Enumeration caps. Exceeding one yields a resource verdict, never a wrong
/// answer.
#[derive(Debug, Clone)]
pub struct FusionCaps {
    /// Maximum size of a type-atom set Θ (the consistency set has `2^|Θ|`
    /// members).
    pub max_type_atoms: usize,
    /// Maximum number of component-viable types carried into the subset
    /// enumeration.
    pub max_viable_types: usize,
    /// Maximum number of universal-role subterms to guess over.
    pub max_sigma_domain: usize,
    /// Maximum number of (typing, subset) choices tried per query.
    pub max_choices: usize,
    /// Domain bound for fusion witnesses searched by the oracle.
    pub witness_bound: usize,
}

impl Default for FusionCaps {
    fn default() -> Self {
        FusionCaps {
            max_type_atoms: 16,
            max_viable_types: 16,
            max_sigma_domain: 16,
            max_choices: 100_000,
            witness_bound: 4,
        }
    }
}

/// The fused signature: the two component signatures and their union.
#[derive(Debug, Clone)]
pub struct FusionSignature {
    pub sig1: Arc<Signature>,
    pub sig2: Arc<Signature>,
    pub combined: Arc<Signature>,
}

/// Builds the fused signature from two single-component signatures over
/// disjoint symbol sets and shared variable pools. Symbols of the first
/// argument are tagged component 1, symbols of the second component 2.
pub fn fuse(sig1: &Signature, sig2: &Signature) -> Result<FusionSignature> {
    for sig in [sig1, sig2] {
        if !sig.is_local() {
            return Err(Error::NonLocalComponent(
                "universal-role symbols break closure under disjoint unions; \
                 use the universal-role transformer instead"
                    .into(),
            ));
        }
    }
    let mut b = Signature::builder();
    for v in sig1.set_vars().union(sig2.set_vars()) {
        b = b.set_var(v)?;
    }
    for v in sig1.obj_vars().union(sig2.obj_vars()) {
        b = b.obj_var(v)?;
    }
    for (sig, tag) in [(sig1, Component::C1), (sig2, Component::C2)] {
        for rel in sig.relations() {
            b = b.role(tag, &rel.name, rel.transitive, rel.functional)?;
        }
        for f in sig.functions() {
            if f.name.starts_with("exists:") || f.name.starts_with("forall:") {
                continue; // installed with the role
            }
            b = b.function_decl(&f.name, f.arity, tag, f.interp.clone())?;
        }
    }
    Ok(FusionSignature {
        sig1: Arc::new(sig1.clone()),
        sig2: Arc::new(sig2.clone()),
        combined: Arc::new(b.build()),
    })
}

/// Successful search state of the relativized procedure.
#[derive(Debug, Clone)]
pub struct Thm20SearchState {
    pub atoms: TypeAtomSet,
    /// The chosen type set `D`, materialized.
    pub d: Vec<Term>,
    /// Fresh object per member of `D`.
    pub fresh_objects: BTreeMap<Term, String>,
    /// Type assigned to each named object.
    pub typing: BTreeMap<String, Term>,
    pub gamma1: AssertionSet,
    pub gamma2: AssertionSet,
}

/// Successful search state of the plain procedure.
#[derive(Debug, Clone)]
pub struct CoveringPlan {
    /// Which component's consistency set was computed recursively.
    pub index: Component,
    pub m: u32,
    pub r: u32,
    /// Covering normal terms for the occurring component symbols.
    pub c: Term,
    pub d: Term,
    /// The computed set of fusion-satisfiable types, materialized.
    pub sigma: Vec<Term>,
    pub fresh_objects: BTreeMap<Term, String>,
    pub typing: BTreeMap<String, Term>,
    pub gamma1: AssertionSet,
    pub gamma2: AssertionSet,
}

/// Outcome of a fusion decision, with the successful search state when the
/// answer is satisfiable.
#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub verdict: Verdict,
    pub thm20: Option<Thm20SearchState>,
    pub thm30: Option<CoveringPlan>,
}

impl FusionOutcome {
    fn plain(verdict: Verdict) -> Self {
        FusionOutcome { verdict, thm20: None, thm30: None }
    }
}

/// How component queries are answered: whole assertion sets, or split into
/// per-object term queries (sound for role-free queries by locality).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueryMode {
    ObjectSat,
    TermSplit,
}

pub struct FusionEngine {
    pub fsig: FusionSignature,
    comp1: Arc<dyn ComponentReasoner>,
    comp2: Arc<dyn ComponentReasoner>,
    caps: FusionCaps,
    trace: bool,
    emit_dir: Option<PathBuf>,
    emit_counter: Cell<usize>,
    calls1: Cell<u64>,
    calls2: Cell<u64>,
    component_memo: RefCell<HashMap<(Component, String), Verdict>>,
    fusion_memo: RefCell<HashMap<Term, Verdict>>,
}

impl FusionEngine {
    pub fn new(
        fsig: FusionSignature,
        comp1: Arc<dyn ComponentReasoner>,
        comp2: Arc<dyn ComponentReasoner>,
        caps: FusionCaps,
    ) -> Result<Self> {
        for comp in [&comp1, &comp2] {
            if !comp.capabilities().is_local {
                return Err(Error::NonLocalComponent(comp.capabilities().logic_name.clone()));
            }
        }
        Ok(FusionEngine {
            fsig,
            comp1,
            comp2,
            caps,
            trace: false,
            emit_dir: None,
            emit_counter: Cell::new(0),
            calls1: Cell::new(0),
            calls2: Cell::new(0),
            component_memo: RefCell::new(HashMap::new()),
            fusion_memo: RefCell::new(HashMap::new()),
        })
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn with_emit_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.emit_dir = dir;
        self
    }

    pub fn caps(&self) -> &FusionCaps {
        &self.caps
    }

    /// Component subproblems decided so far (memoized repeats not counted).
    pub fn subproblem_counts(&self) -> (u64, u64) {
        (self.calls1.get(), self.calls2.get())
    }

    fn comp(&self, which: Component) -> &Arc<dyn ComponentReasoner> {
        match which {
            Component::C1 => &self.comp1,
            Component::C2 => &self.comp2,
            Component::Shared => unreachable!("no reasoner for shared symbols"),
        }
    }

    /// One memoized component call. `relativized` selects the decision
    /// procedure; in split mode the query must be role-free and is broken
    /// into independent per-object term queries.
    fn component_sat(
        &self,
        which: Component,
        gamma: &AssertionSet,
        mode: QueryMode,
        relativized: bool,
    ) -> Result<Verdict> {
        let key = (which, format!("{relativized}:{mode:?}:{}", gamma.canonical()));
        if let Some(v) = self.component_memo.borrow().get(&key) {
            return Ok(v.clone());
        }
        match which {
            Component::C1 => self.calls1.set(self.calls1.get() + 1),
            Component::C2 => self.calls2.set(self.calls2.get() + 1),
            Component::Shared => unreachable!(),
        }
        let comp = self.comp(which);
        let verdict = match mode {
            QueryMode::ObjectSat => {
                if relativized {
                    comp.decide_relativized_sat(gamma)?
                } else {
                    comp.decide_object_sat(gamma)?
                }
            }
            QueryMode::TermSplit => {
                debug_assert!(
                    !gamma.iter().any(|a| matches!(a, Assertion::Rel { .. })),
                    "split queries must be role-free"
                );
                let inclusions = gamma.inclusions();
                let mut verdict = Verdict::Sat(None);
                for obj in gamma.objects() {
                    let conj = Term::conj(gamma.member_terms(&obj));
                    let v = comp.decide_relativized_term_sat(&conj, &inclusions)?;
                    if !v.is_sat() {
                        verdict = v;
                        break;
                    }
                }
                verdict
            }
        };
        self.component_memo.borrow_mut().insert(key, verdict.clone());
        Ok(verdict)
    }

    fn emit_pair(&self, gamma1: &AssertionSet, gamma2: &AssertionSet) -> Result<()> {
        let Some(dir) = &self.emit_dir else {
            return Ok(());
        };
        let k = self.emit_counter.get();
        self.emit_counter.set(k + 1);
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("choice-{k:04}.component1.txt")), gamma1.canonical())?;
        std::fs::write(dir.join(format!("choice-{k:04}.component2.txt")), gamma2.canonical())?;
        Ok(())
    }

    fn fusion_witness(&self, gamma: &AssertionSet) -> Option<oracle::FiniteInterpretation> {
        match oracle::find_model(gamma, &self.fsig.combined, self.caps.witness_bound) {
            Ok(out) => out.found().cloned(),
            Err(_) => None,
        }
    }

    // ------------------------------------------------------------------
    // Relativized satisfiability.
    // ------------------------------------------------------------------

    /// Relativized satisfiability in the fusion.
    pub fn decide_relativized_sat_fusion(&self, gamma: &AssertionSet) -> Result<FusionOutcome> {
        self.relativized(gamma, QueryMode::ObjectSat)
    }

    /// Relativized term satisfiability: `{a : t}` plus term assertions, with
    /// component queries split per object.
    pub fn decide_relativized_term_sat_fusion(
        &self,
        t: &Term,
        inclusions: &[(Term, Term)],
    ) -> Result<FusionOutcome> {
        let mut gamma = AssertionSet::new();
        gamma.insert(Assertion::Member { obj: "$q0".into(), term: t.clone() });
        for (l, r) in inclusions {
            gamma.insert(Assertion::Inclusion(l.clone(), r.clone()));
        }
        self.relativized(&gamma, QueryMode::TermSplit)
    }

    fn relativized(&self, gamma: &AssertionSet, mode: QueryMode) -> Result<FusionOutcome> {
        for comp in [&self.comp1, &self.comp2] {
            if !comp.capabilities().supports_relativized_sat {
                return Err(Error::Invalid(format!(
                    "component {} does not support relativized satisfiability",
                    comp.capabilities().logic_name
                )));
            }
        }
        if gamma.is_empty() {
            return Ok(FusionOutcome::plain(Verdict::Sat(Some(
                oracle::FiniteInterpretation::new(1),
            ))));
        }
        let atoms = Arc::new(alien_closure(Component::C1, gamma));
        let types = match consistency_set(&atoms, self.caps.max_type_atoms) {
            Ok(t) => t,
            Err(Error::ResourceCap { kind, .. }) => {
                return Ok(FusionOutcome::plain(Verdict::Resource(kind)))
            }
            Err(e) => return Err(e),
        };
        if self.trace {
            eprintln!("thm20: sub1(Gamma) = {} atoms", atoms.len());
            for a in atoms.atoms() {
                eprintln!("thm20:   atom {}", a.canonical());
            }
            eprintln!("thm20: |C1(Gamma)| = {}", types.len());
        }

        let mut tbl = SurrogateTable::new();
        let infos: Vec<TypeInfo> = types
            .iter()
            .map(|desc| {
                let term = desc.materialize();
                let sur1 = surrogate(Component::C1, &term, &mut tbl);
                let sur2 = surrogate(Component::C2, &term, &mut tbl);
                TypeInfo { desc: desc.clone(), term, sur1, sur2 }
            })
            .collect();

        // Viability: a type that is not individually satisfiable in both
        // components can belong to no successful D (its fresh-object
        // membership is part of Γ_i).
        let mut viable: Vec<&TypeInfo> = Vec::new();
        for info in &infos {
            let v1 = self.comp(Component::C1).decide_term_sat(&info.sur1)?;
            if v1.is_resource() {
                return Ok(FusionOutcome::plain(v1));
            }
            if v1.is_unsat() {
                continue;
            }
            let v2 = self.comp(Component::C2).decide_term_sat(&info.sur2)?;
            if v2.is_resource() {
                return Ok(FusionOutcome::plain(v2));
            }
            if v2.is_sat() {
                viable.push(info);
            }
        }
        // Greatest-fixpoint refinement: drop types whose surrogation becomes
        // unsatisfiable under `top <= sur_i(⋁ survivors)`. A dropped type is
        // in no D with satisfiable Γ_i, since Γ_i contains both that global
        // constraint (weakened only by shrinking D) and the membership.
        loop {
            let disj1 = Term::disj(viable.iter().map(|i| i.sur1.clone()));
            let disj2 = Term::disj(viable.iter().map(|i| i.sur2.clone()));
            let mut kept: Vec<&TypeInfo> = Vec::new();
            for info in &viable {
                let v1 = self
                    .comp(Component::C1)
                    .decide_relativized_term_sat(&info.sur1, &[(Term::top(), disj1.clone())])?;
                if v1.is_resource() {
                    return Ok(FusionOutcome::plain(v1));
                }
                if v1.is_unsat() {
                    continue;
                }
                let v2 = self
                    .comp(Component::C2)
                    .decide_relativized_term_sat(&info.sur2, &[(Term::top(), disj2.clone())])?;
                if v2.is_resource() {
                    return Ok(FusionOutcome::plain(v2));
                }
                if v2.is_sat() {
                    kept.push(info);
                }
            }
            if kept.len() == viable.len() {
                break;
            }
            viable = kept;
        }
        if viable.len() > self.caps.max_viable_types {
            return Ok(FusionOutcome::plain(Verdict::Resource(ResourceKind::ViableCap)));
        }
        if self.trace {
            eprintln!("thm20: {} viable types", viable.len());
            for info in &viable {
                eprintln!("thm20:   type {}", info.term.canonical());
            }
        }

        let objects: Vec<String> = gamma.objects().into_iter().collect();
        let (term_part, obj_part) = gamma.partition();
        let inclusions = term_part.inclusions();

        // Fixed parts of Γ1/Γ2: role assertions split by component, term and
        // membership assertions surrogated into Γ1 only.
        let mut fixed1 = AssertionSet::new();
        let mut fixed2 = AssertionSet::new();
        for (l, r) in &inclusions {
            fixed1.insert(Assertion::Inclusion(
                surrogate(Component::C1, l, &mut tbl),
                surrogate(Component::C1, r, &mut tbl),
            ));
        }
        for a in &obj_part {
            match a {
                Assertion::Member { obj, term } => {
                    fixed1.insert(Assertion::Member {
                        obj: obj.clone(),
                        term: surrogate(Component::C1, term, &mut tbl),
                    });
                }
                Assertion::Rel { rel, from, to } => {
                    let target = match rel.component {
                        Component::C1 => &mut fixed1,
                        Component::C2 => &mut fixed2,
                        Component::Shared => {
                            return Err(Error::Invalid("role assertions cannot be shared".into()))
                        }
                    };
                    target.insert(a.clone());
                    let _ = (from, to);
                }
                Assertion::Inclusion(..) => unreachable!(),
            }
        }

        if viable.is_empty() {
            // D must be nonempty: every model realizes some type.
            return Ok(FusionOutcome::plain(Verdict::Unsat));
        }

        let mut choices = 0usize;
        let mut saw_resource = None;
        let mut typing_idx = vec![0usize; objects.len()];
        'typing: loop {
            // Per-typing core precheck: the typing memberships plus the fixed
            // parts are a subset of every Γ_i for this typing.
            let mut core_ok = true;
            for (which, fixed) in [(Component::C1, &fixed1), (Component::C2, &fixed2)] {
                let mut core = fixed.clone();
                for (a, &ti) in objects.iter().zip(&typing_idx) {
                    let info = viable[ti];
                    core.insert(Assertion::Member {
                        obj: a.clone(),
                        term: if which == Component::C1 {
                            info.sur1.clone()
                        } else {
                            info.sur2.clone()
                        },
                    });
                }
                let v = self.component_sat(which, &core, mode, true)?;
                if v.is_resource() {
                    saw_resource = Some(v);
                    core_ok = false;
                    break;
                }
                if v.is_unsat() {
                    core_ok = false;
                    break;
                }
            }
            if core_ok {
                // Seed D with the typing range and extend it, smallest first.
                let seed: BTreeSet<usize> = typing_idx.iter().copied().collect();
                let rest: Vec<usize> =
                    (0..viable.len()).filter(|k| !seed.contains(k)).collect();
                for ext_size in 0..=rest.len() {
                    for ext in combinations(&rest, ext_size) {
                        let mut d_idx: Vec<usize> = seed.iter().copied().collect();
                        d_idx.extend(ext);
                        d_idx.sort_unstable();
                        if d_idx.is_empty() {
                            continue;
                        }
                        choices += 1;
                        if choices > self.caps.max_choices {
                            return Ok(FusionOutcome::plain(Verdict::Resource(
                                ResourceKind::ViableCap,
                            )));
                        }
                        match self.try_thm20_choice(
                            &atoms, &viable, &d_idx, &objects, &typing_idx, &fixed1, &fixed2,
                            mode,
                        )? {
                            ChoiceOutcome::Sat(state) => {
                                let witness = self.fusion_witness(gamma);
                                return Ok(FusionOutcome {
                                    verdict: Verdict::Sat(witness),
                                    thm20: Some(state),
                                    thm30: None,
                                });
                            }
                            ChoiceOutcome::Unsat => {}
                            ChoiceOutcome::Resource(v) => saw_resource = Some(v),
                        }
                    }
                }
            }
            // Next typing, lexicographic over the viable-type order.
            if objects.is_empty() {
                break 'typing;
            }
            let mut k = objects.len();
            loop {
                if k == 0 {
                    break 'typing;
                }
                k -= 1;
                typing_idx[k] += 1;
                if typing_idx[k] < viable.len() {
                    break;
                }
                typing_idx[k] = 0;
            }
        }
        Ok(FusionOutcome::plain(saw_resource.unwrap_or(Verdict::Unsat)))
    }

    #[allow(clippy::too_many_arguments)]
    fn try_thm20_choice(
        &self,
        atoms: &Arc<TypeAtomSet>,
        viable: &[&TypeInfo],
        d_idx: &[usize],
        objects: &[String],
        typing_idx: &[usize],
        fixed1: &AssertionSet,
        fixed2: &AssertionSet,
        mode: QueryMode,
    ) -> Result<ChoiceOutcome> {
        let disj1 = Term::disj(d_idx.iter().map(|&k| viable[k].sur1.clone()));
        let disj2 = Term::disj(d_idx.iter().map(|&k| viable[k].sur2.clone()));
        let mut gamma1 = AssertionSet::new();
        let mut gamma2 = AssertionSet::new();
        let mut fresh_objects = BTreeMap::new();
        for &k in d_idx {
            let info = viable[k];
            let a_t = format!("$t{:04x}", info.desc.signs());
            fresh_objects.insert(info.term.clone(), a_t.clone());
            gamma1.insert(Assertion::Member { obj: a_t.clone(), term: info.sur1.clone() });
            gamma2.insert(Assertion::Member { obj: a_t, term: info.sur2.clone() });
        }
        gamma1.insert(Assertion::Inclusion(Term::top(), disj1));
        gamma2.insert(Assertion::Inclusion(Term::top(), disj2));
        let mut typing = BTreeMap::new();
        for (a, &ti) in objects.iter().zip(typing_idx) {
            let info = viable[ti];
            typing.insert(a.clone(), info.term.clone());
            gamma1.insert(Assertion::Member { obj: a.clone(), term: info.sur1.clone() });
            gamma2.insert(Assertion::Member { obj: a.clone(), term: info.sur2.clone() });
        }
        for a in fixed1 {
            gamma1.insert(a.clone());
        }
        for a in fixed2 {
            gamma2.insert(a.clone());
        }
        self.emit_pair(&gamma1, &gamma2)?;
        let v1 = self.component_sat(Component::C1, &gamma1, mode, true)?;
        if v1.is_resource() {
            return Ok(ChoiceOutcome::Resource(v1));
        }
        if v1.is_unsat() {
            return Ok(ChoiceOutcome::Unsat);
        }
        let v2 = self.component_sat(Component::C2, &gamma2, mode, true)?;
        if v2.is_resource() {
            return Ok(ChoiceOutcome::Resource(v2));
        }
        if v2.is_unsat() {
            return Ok(ChoiceOutcome::Unsat);
        }
        Ok(ChoiceOutcome::Sat(Thm20SearchState {
            atoms: (**atoms).clone(),
            d: d_idx.iter().map(|&k| viable[k].term.clone()).collect(),
            fresh_objects,
            typing,
            gamma1,
            gamma2,
        }))
    }

    // ------------------------------------------------------------------
    // Plain satisfiability.
    // ------------------------------------------------------------------

    /// Satisfiability of a set of object assertions in the fusion.
    pub fn decide_sat_fusion(&self, gamma: &AssertionSet) -> Result<FusionOutcome> {
        self.plain(gamma, QueryMode::ObjectSat, None)
    }

    /// Term satisfiability in the fusion, with component queries split per
    /// object.
    pub fn decide_term_sat_fusion(&self, t: &Term) -> Result<FusionOutcome> {
        let gamma = AssertionSet::from_iter([Assertion::Member {
            obj: "$q0".into(),
            term: t.clone(),
        }]);
        self.plain(&gamma, QueryMode::TermSplit, None)
    }

    /// Like [`decide_sat_fusion`](Self::decide_sat_fusion) but with the
    /// recursion index forced, for the condition-symmetry cross-check.
    /// Errors unless the forced index strictly decreases the alternation
    /// depth.
    pub fn decide_sat_fusion_with_index(
        &self,
        gamma: &AssertionSet,
        index: Component,
    ) -> Result<FusionOutcome> {
        self.plain(gamma, QueryMode::ObjectSat, Some(index))
    }

    /// The set Σ_i: all types over `sub^i(Γ)` whose term is satisfiable in
    /// the fusion. Errors if the recursion is inadmissible for `i`.
    pub fn compute_sigma(&self, index: Component, gamma: &AssertionSet) -> Result<Vec<TypeDescriptor>> {
        let terms = gamma.terms();
        let a = alternation_depth_terms(&terms);
        let atoms = Arc::new(alien_closure(index, gamma));
        let ac = alternation_depth_terms(atoms.atoms());
        if a > 0 && ac >= a {
            return Err(Error::Internal(format!(
                "recursion inadmissible: a(C{}) = {ac} does not decrease below a = {a}",
                index.label()
            )));
        }
        let types = consistency_set(&atoms, self.caps.max_type_atoms)?;
        let budget = a + 1;
        let mut sigma = Vec::new();
        for desc in types {
            let term = desc.materialize();
            let v = self.fusion_term_sat_memo(&term, budget)?;
            if v.is_resource() {
                return Err(Error::ResourceCap {
                    kind: ResourceKind::TypeCap,
                    limit: self.caps.max_type_atoms,
                });
            }
            if v.is_sat() {
                sigma.push(desc);
            }
        }
        Ok(sigma)
    }

    fn fusion_term_sat_memo(&self, t: &Term, depth_budget: u32) -> Result<Verdict> {
        if let Some(v) = self.fusion_memo.borrow().get(t) {
            return Ok(v.clone());
        }
        let gamma = AssertionSet::from_iter([Assertion::Member {
            obj: "$q0".into(),
            term: t.clone(),
        }]);
        let out = self.plain_inner(&gamma, QueryMode::TermSplit, None, depth_budget)?;
        // Memoized verdicts drop witnesses (they are per-query anyway).
        let v = match out.verdict {
            Verdict::Sat(_) => Verdict::Sat(None),
            other => other,
        };
        self.fusion_memo.borrow_mut().insert(t.clone(), v.clone());
        Ok(v)
    }

    fn plain(
        &self,
        gamma: &AssertionSet,
        mode: QueryMode,
        force_index: Option<Component>,
    ) -> Result<FusionOutcome> {
        for comp in [&self.comp1, &self.comp2] {
            let caps = comp.capabilities();
            if !caps.supports_object_sat || !caps.has_covering_terms {
                return Err(Error::Invalid(format!(
                    "component {} lacks object satisfiability or covering normal terms",
                    caps.logic_name
                )));
            }
        }
        if gamma.iter().any(Assertion::is_term_assertion) {
            return Err(Error::Invalid(
                "plain satisfiability rejects term assertions".into(),
            ));
        }
        let a = alternation_depth_terms(&gamma.terms());
        self.plain_inner(gamma, mode, force_index, a + 1)
    }

    fn plain_inner(
        &self,
        gamma: &AssertionSet,
        mode: QueryMode,
        force_index: Option<Component>,
        depth_budget: u32,
    ) -> Result<FusionOutcome> {
        if gamma.is_empty() {
            return Ok(FusionOutcome::plain(Verdict::Sat(Some(
                oracle::FiniteInterpretation::new(1),
            ))));
        }
        let terms = gamma.terms();
        let a = alternation_depth_terms(&terms);
        if a == 0 {
            return Ok(FusionOutcome::plain(decide_propositional(gamma)?));
        }
        if depth_budget == 0 {
            return Err(Error::Internal(
                "recursion depth exceeded the alternation-depth bound".into(),
            ));
        }

        let atoms1 = Arc::new(alien_closure(Component::C1, gamma));
        let atoms2 = Arc::new(alien_closure(Component::C2, gamma));
        let a1c = alternation_depth_terms(atoms1.atoms());
        let a2c = alternation_depth_terms(atoms2.atoms());
        let index = match force_index {
            Some(i) => {
                let ac = if i == Component::C1 { a1c } else { a2c };
                if ac >= a {
                    return Err(Error::Internal(format!(
                        "forced index {} is inadmissible here",
                        i.label()
                    )));
                }
                i
            }
            None => {
                if a1c < a {
                    Component::C1
                } else if a2c < a {
                    Component::C2
                } else {
                    return Err(Error::Internal(format!(
                        "neither consistency set decreases the alternation depth \
                         (a = {a}, a(C1) = {a1c}, a(C2) = {a2c})"
                    )));
                }
            }
        };
        let atoms = if index == Component::C1 { &atoms1 } else { &atoms2 };
        if self.trace {
            eprintln!(
                "thm30: a = {a}, a(C1) = {a1c}, a(C2) = {a2c}, recursing on component {}",
                index.label()
            );
        }

        let types = match consistency_set(atoms, self.caps.max_type_atoms) {
            Ok(t) => t,
            Err(Error::ResourceCap { kind, .. }) => {
                return Ok(FusionOutcome::plain(Verdict::Resource(kind)))
            }
            Err(e) => return Err(e),
        };
        let mut sigma: Vec<TypeDescriptor> = Vec::new();
        for desc in &types {
            let term = desc.materialize();
            let v = self.fusion_term_sat_memo(&term, depth_budget - 1)?;
            if v.is_resource() {
                return Ok(FusionOutcome::plain(v));
            }
            if v.is_sat() {
                sigma.push(desc.clone());
            }
        }
        if self.trace {
            eprintln!("thm30: |Sigma| = {} of {} types", sigma.len(), types.len());
        }

        let objects: Vec<String> = gamma.objects().into_iter().collect();
        if sigma.is_empty() {
            return Ok(FusionOutcome::plain(Verdict::Unsat));
        }

        // Covering machinery: depths, covering terms, capped disjunctions.
        let m = component_depth_set(Component::C1, gamma);
        let r = component_depth_set(Component::C2, gamma);
        let c = self.comp1.combined_covering_term(&component_symbols(gamma, Component::C1))?;
        let d = self.comp2.combined_covering_term(&component_symbols(gamma, Component::C2))?;
        let mut tbl = SurrogateTable::new();
        let sigma_terms: Vec<Term> = sigma.iter().map(|s| s.materialize()).collect();
        let disj = Term::disj(sigma_terms.iter().cloned());
        let capped1 = apply_one_var(&iterate_cover(&c, m)?, &surrogate(Component::C1, &disj, &mut tbl))?;
        let capped2 = apply_one_var(&iterate_cover(&d, r)?, &surrogate(Component::C2, &disj, &mut tbl))?;

        let mut base1 = AssertionSet::new();
        let mut base2 = AssertionSet::new();
        let mut fresh_objects = BTreeMap::new();
        for (desc, term) in sigma.iter().zip(&sigma_terms) {
            let a_t = format!("$t{:04x}", desc.signs());
            fresh_objects.insert(term.clone(), a_t.clone());
            base1.insert(Assertion::Member {
                obj: a_t.clone(),
                term: surrogate(Component::C1, &Term::and(term, &capped1), &mut tbl),
            });
            base2.insert(Assertion::Member {
                obj: a_t,
                term: surrogate(Component::C2, &Term::and(term, &capped2), &mut tbl),
            });
        }
        for assertion in gamma {
            match assertion {
                Assertion::Member { obj, term } => {
                    base1.insert(Assertion::Member {
                        obj: obj.clone(),
                        term: surrogate(Component::C1, term, &mut tbl),
                    });
                }
                Assertion::Rel { rel, .. } => {
                    match rel.component {
                        Component::C1 => base1.insert(assertion.clone()),
                        Component::C2 => base2.insert(assertion.clone()),
                        Component::Shared => {
                            return Err(Error::Invalid("role assertions cannot be shared".into()))
                        }
                    };
                }
                Assertion::Inclusion(..) => unreachable!("checked in plain()"),
            }
        }

        let mut saw_resource = None;
        let mut typing_idx = vec![0usize; objects.len()];
        loop {
            let mut gamma1 = base1.clone();
            let mut gamma2 = base2.clone();
            let mut typing = BTreeMap::new();
            for (aobj, &ti) in objects.iter().zip(&typing_idx) {
                let t = &sigma_terms[ti];
                typing.insert(aobj.clone(), t.clone());
                gamma1.insert(Assertion::Member {
                    obj: aobj.clone(),
                    term: surrogate(Component::C1, &Term::and(t, &capped1), &mut tbl),
                });
                gamma2.insert(Assertion::Member {
                    obj: aobj.clone(),
                    term: surrogate(Component::C2, &Term::and(t, &capped2), &mut tbl),
                });
            }
            self.emit_pair(&gamma1, &gamma2)?;
            let v1 = self.component_sat(Component::C1, &gamma1, mode, false)?;
            let v2 = if v1.is_sat() {
                self.component_sat(Component::C2, &gamma2, mode, false)?
            } else {
                v1.clone()
            };
            if v1.is_sat() && v2.is_sat() {
                let witness = self.fusion_witness(gamma);
                return Ok(FusionOutcome {
                    verdict: Verdict::Sat(witness),
                    thm20: None,
                    thm30: Some(CoveringPlan {
                        index,
                        m,
                        r,
                        c,
                        d,
                        sigma: sigma_terms,
                        fresh_objects,
                        typing,
                        gamma1,
                        gamma2,
                    }),
                });
            }
            if v1.is_resource() {
                saw_resource = Some(v1);
            } else if v2.is_resource() {
                saw_resource = Some(v2);
            }
            // Next typing.
            if objects.is_empty() {
                break;
            }
            let mut k = objects.len();
            loop {
                if k == 0 {
                    return Ok(FusionOutcome::plain(saw_resource.unwrap_or(Verdict::Unsat)));
                }
                k -= 1;
                typing_idx[k] += 1;
                if typing_idx[k] < sigma.len() {
                    break;
                }
                typing_idx[k] = 0;
            }
        }
        Ok(FusionOutcome::plain(saw_resource.unwrap_or(Verdict::Unsat)))
    }
}

enum ChoiceOutcome {
    Sat(Thm20SearchState),
    Unsat,
    Resource(Verdict),
}

/// One consistency-set member with its materialization and surrogations.
struct TypeInfo {
    desc: TypeDescriptor,
    term: Term,
    sur1: Term,
    sur2: Term,
}

/// k-subsets of a slice, lexicographic in the given order.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::new(), &mut out);
    out
}

// ----------------------------------------------------------------------
// Universal-role transformer.
// ----------------------------------------------------------------------

/// Report of a successful universal-role reduction.
#[derive(Debug, Clone)]
pub struct UniversalRoleReduction {
    /// The `forallU`-rooted subterms, canonical order.
    pub u_terms: Vec<Term>,
    /// The successful guess: which U-terms denote the whole domain.
    pub sigma: BTreeMap<Term, bool>,
    /// Fresh objects witnessing the complement of the bot-guessed U-terms.
    pub fresh_objects: BTreeMap<Term, String>,
}

/// Rewrites `existsU(t)` to `not forallU(not t)`.
pub fn rewrite_exists_universal(sig: &Signature, t: &Term) -> Result<Term> {
    let forall_u = sig
        .function("forallU")
        .ok_or_else(|| Error::UndeclaredSymbol("forallU".into()))?;
    fn go(forall_u: &Arc<crate::adl::FuncDecl>, t: &Term) -> Result<Term> {
        Ok(match t.kind() {
            TermKind::Var(_) | TermKind::Top | TermKind::Bot => t.clone(),
            TermKind::Not(a) => Term::not(&go(forall_u, a)?),
            TermKind::And(a, b) => Term::and(&go(forall_u, a)?, &go(forall_u, b)?),
            TermKind::Or(a, b) => Term::or(&go(forall_u, a)?, &go(forall_u, b)?),
            TermKind::App(decl, args) => {
                let args: Result<Vec<Term>> = args.iter().map(|x| go(forall_u, x)).collect();
                let args = args?;
                if matches!(decl.interp, FuncInterp::ExistsUniversal) {
                    Term::not(&Term::app(forall_u, &[Term::not(&args[0])])?)
                } else {
                    Term::app(decl, &args)?
                }
            }
        })
    }
    go(forall_u, t)
}

fn collect_u_terms(t: &Term, out: &mut BTreeSet<Term>) {
    for sub in t.subterms() {
        if let TermKind::App(decl, _) = sub.kind() {
            if matches!(decl.interp, FuncInterp::ForallUniversal) {
                out.insert(sub.clone());
            }
        }
    }
}

fn apply_sigma(t: &Term, sigma: &BTreeMap<Term, bool>) -> Term {
    if let TermKind::App(decl, _) = t.kind() {
        if matches!(decl.interp, FuncInterp::ForallUniversal) {
            return if sigma[t] { Term::top() } else { Term::bot() };
        }
    }
    match t.kind() {
        TermKind::Var(_) | TermKind::Top | TermKind::Bot => t.clone(),
        TermKind::Not(a) => Term::not(&apply_sigma(a, sigma)),
        TermKind::And(a, b) => Term::and(&apply_sigma(a, sigma), &apply_sigma(b, sigma)),
        TermKind::Or(a, b) => Term::or(&apply_sigma(a, sigma), &apply_sigma(b, sigma)),
        TermKind::App(decl, args) => {
            let args: Vec<Term> = args.iter().map(|x| apply_sigma(x, sigma)).collect();
            Term::app(decl, &args).expect("arity preserved")
        }
    }
}

/// Decides relativized term satisfiability in the universal-role extension,
/// given a decision procedure for the base system. For every guess σ over
/// the U-terms, each `forallU(s)` is replaced by top or bot, the guards
/// `top <= s^σ` (for top guesses) and `a_s : not s^σ` (for bot guesses) are
/// added, and the role-free result is split into per-object term queries.
pub fn lift_universal<F>(
    sig: &Signature,
    base: &F,
    t: &Term,
    inclusions: &[(Term, Term)],
    max_sigma: usize,
) -> Result<(Verdict, Option<UniversalRoleReduction>)>
where
    F: Fn(&Term, &[(Term, Term)]) -> Result<Verdict>,
{
    let t = rewrite_exists_universal(sig, t)?;
    let inclusions: Vec<(Term, Term)> = inclusions
        .iter()
        .map(|(l, r)| {
            Ok((
                rewrite_exists_universal(sig, l)?,
                rewrite_exists_universal(sig, r)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut u_set = BTreeSet::new();
    collect_u_terms(&t, &mut u_set);
    for (l, r) in &inclusions {
        collect_u_terms(l, &mut u_set);
        collect_u_terms(r, &mut u_set);
    }
    let u_terms: Vec<Term> = u_set.into_iter().collect();
    if u_terms.len() > max_sigma {
        return Ok((Verdict::Resource(ResourceKind::SigmaCap), None));
    }

    let mut saw_resource = None;
    for guess in 0..(1u64 << u_terms.len() as u32) {
        let sigma: BTreeMap<Term, bool> = u_terms
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), guess >> i & 1 == 1))
            .collect();
        // Σ^σ: σ-images of the inclusions and the root membership, plus the
        // guards for each guessed U-term.
        let mut incl_sigma: Vec<(Term, Term)> = inclusions
            .iter()
            .map(|(l, r)| (apply_sigma(l, &sigma), apply_sigma(r, &sigma)))
            .collect();
        let mut memberships: Vec<(String, Term)> = vec![("$q0".into(), apply_sigma(&t, &sigma))];
        let mut fresh_objects = BTreeMap::new();
        for (k, u) in u_terms.iter().enumerate() {
            let body = match u.kind() {
                TermKind::App(_, args) => &args[0],
                _ => unreachable!("U-terms are applications"),
            };
            let body_sigma = apply_sigma(body, &sigma);
            if sigma[u] {
                incl_sigma.push((Term::top(), body_sigma));
            } else {
                let a_u = format!("$u{k}");
                fresh_objects.insert(u.clone(), a_u.clone());
                memberships.push((a_u, Term::not(&body_sigma)));
            }
        }
        // Split into independent term queries (no role assertions occur).
        let mut all_sat = true;
        for (_, term) in &memberships {
            let v = base(term, &incl_sigma)?;
            if v.is_resource() {
                saw_resource = Some(v);
                all_sat = false;
                break;
            }
            if v.is_unsat() {
                all_sat = false;
                break;
            }
        }
        if all_sat {
            return Ok((
                Verdict::Sat(None),
                Some(UniversalRoleReduction { u_terms, sigma, fresh_objects }),
            ));
        }
    }
    Ok((saw_resource.unwrap_or(Verdict::Unsat), None))
}

/// The internalization of term assertions through the universal role:
/// `t ∧ forallU((not l1 ∨ r1) ∧ …)`, one guard conjunct per inclusion.
/// Satisfiability of the result in the extended system is equivalent to
/// relativized satisfiability of `t` under the inclusions in the base.
pub fn internalize_inclusions(sig: &Signature, t: &Term, inclusions: &[(Term, Term)]) -> Result<Term> {
    let forall_u = sig
        .function("forallU")
        .ok_or_else(|| Error::UndeclaredSymbol("forallU".into()))?;
    let guard = Term::conj(
        inclusions
            .iter()
            .map(|(l, r)| Term::or(&Term::not(l), r)),
    );
    Ok(Term::and(t, &Term::app(forall_u, &[guard])?))
}
