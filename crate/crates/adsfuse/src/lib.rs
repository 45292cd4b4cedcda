//! Decides satisfiability in the fusion of two description-logic components.
//!
//! The library is organized around *abstract description systems*: a term
//! language over set variables, Boolean connectives, and interpreted function
//! symbols (value/existential restrictions, unqualified number restrictions),
//! together with a class of set-valued models. Two components over disjoint
//! symbol sets are combined into a fusion, and the fusion's decision problems
//! are reduced to component decisions by surrogation of alien subterms and
//! type-set coordination.
//!
//! Module map:
//!
//! * [`adl`] — terms, signatures, assertion sets (hash-consed AST).
//! * [`surrogation`] — alien-subterm replacement, consistency sets, depth
//!   measures.
//! * [`oracle`] — explicit finite models: evaluation, bounded model search,
//!   disjoint unions, and law verification.
//! * [`components`] — the component reasoners: a parametric tableau engine
//!   and a propositional base.
//! * [`fusion`] — the fused decision procedures for relativized and plain
//!   satisfiability, plus the universal-role transformer.
//! * [`frontend`] — the textual input language and its translation to terms.
//! * [`suite`] — seeded randomized suites used by `selftest` and the
//!   acceptance tests.
//! * [`cli`] — command-line entry points.

pub mod adl;
pub mod cli;
pub mod components;
pub mod frontend;
pub mod fusion;
pub mod oracle;
pub mod suite;
pub mod surrogation;

use thiserror::Error;

/// Why a computation was abandoned rather than answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResourceKind {
    /// Too many type atoms; the consistency set would be too large.
    TypeCap,
    /// Too many component-viable types to enumerate subsets of.
    ViableCap,
    /// Too many universal-role subterms to enumerate guesses for.
    SigmaCap,
    /// Tableau rule-application budget exhausted.
    RuleCap,
    /// Finite-model search asked to exceed its domain bound.
    DomainCap,
    /// Propositional truth-table over too many variables.
    TruthTableCap,
}

impl ResourceKind {
    pub fn detail(self) -> &'static str {
        match self {
            ResourceKind::TypeCap => "type-cap",
            ResourceKind::ViableCap => "viable-cap",
            ResourceKind::SigmaCap => "sigma-cap",
            ResourceKind::RuleCap => "rule-cap",
            ResourceKind::DomainCap => "domain-cap",
            ResourceKind::TruthTableCap => "truth-table-cap",
        }
    }
}

impl std::fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.detail())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch for {symbol}: declared {declared}, got {got}")]
    ArityMismatch {
        symbol: String,
        declared: usize,
        got: usize,
    },
    #[error("undeclared symbol: {0}")]
    UndeclaredSymbol(String),
    #[error("symbol collision: {0}")]
    SymbolCollision(String),
    #[error("unknown surrogate variable: {0}")]
    UnknownSurrogate(String),
    #[error("resource cap exceeded: {kind} (limit {limit})")]
    ResourceCap { kind: ResourceKind, limit: usize },
    #[error("uninterpreted symbol: {0}")]
    UninterpretedSymbol(String),
    #[error("unsupported symbol: {0}")]
    UnsupportedSymbol(String),
    #[error("non-local component: {0}")]
    NonLocalComponent(String),
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
