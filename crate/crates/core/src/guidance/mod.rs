//! The three guidance queries used by the search: theorem relevance,
//! substitution generation and payoff estimation.

mod baseline;
mod oracle;
pub mod remote;
pub mod wire;

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::database::Sym;
use crate::frame::{Context, Library, TheoremFrame};
use crate::grammar::{Head, Tree};
use crate::unify::{is_viable_full, Substitution};

pub use baseline::{usage_counts, Baseline};
pub use oracle::Oracle;
pub use remote::Remote;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuidanceError {
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("request timed out")]
    Timeout,
    #[error("remote error: {0}")]
    Remote(String),
    #[error("cannot encode query: {0}")]
    Encoding(String),
}

/// Result of a generation query.
#[derive(Clone, Debug, Default)]
pub struct Generated {
    /// Complete substitutions with their probabilities, best first.
    pub candidates: Vec<(Substitution, f64)>,
    /// Set when every candidate was dropped for exceeding the token limit.
    pub truncated: bool,
}

pub type ViableTheorem = (Arc<TheoremFrame>, Substitution);

pub trait Guidance: Send + Sync {
    /// Probability of each viable theorem being the right next step; sums
    /// to one over `viable`.
    fn relevance(&self, ctx: &Context, a: &Tree, viable: &[ViableTheorem]) -> Result<Vec<f64>, GuidanceError>;

    /// Complete `constrained` with images for the theorem's unconstrained
    /// variables.
    fn generate(
        &self,
        ctx: &Context,
        a: &Tree,
        frame: &TheoremFrame,
        constrained: &Substitution,
        beam_width: usize,
        token_limit: usize,
    ) -> Result<Generated, GuidanceError>;

    /// Estimated probability that `a` is provable in `ctx`.
    fn payoff(&self, ctx: &Context, a: &Tree) -> Result<f64, GuidanceError>;
}

/// Normalize non-negative scores into a distribution (uniform if all zero).
pub(crate) fn normalize(scores: &[f64]) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    if total > 0.0 && total.is_finite() {
        scores.iter().map(|s| s / total).collect()
    } else if scores.is_empty() {
        Vec::new()
    } else {
        vec![1.0 / scores.len() as f64; scores.len()]
    }
}

/// Typecodes whose variables may be introduced fresh by a substitution.
pub fn is_set_typecode(name: &str) -> bool {
    name == "set" || name == "setvar"
}

/// Variables occurring in the goal or the context hypotheses.
pub fn present_vars(ctx: &Context, a: &Tree) -> HashSet<Sym> {
    let mut present: HashSet<Sym> = a.vars().into_iter().collect();
    for h in ctx.hyps() {
        present.extend(h.vars());
    }
    present
}

/// Filters every generated substitution must pass: constructors defined
/// before the context, no new variables except at most one set variable,
/// unconstrained images within `token_limit` tokens, and full viability.
pub fn admissible(
    lib: &Library,
    ctx: &Context,
    a: &Tree,
    frame: &TheoremFrame,
    s: &Substitution,
    token_limit: usize,
) -> bool {
    let present = present_vars(ctx, a);
    let mut fresh = HashSet::new();
    let mut tokens = 0;
    for (v, _) in frame.free_vars.iter().filter(|(v, _)| !frame.is_constrained(*v)) {
        let Some(img) = s.get(*v) else {
            return false;
        };
        tokens += img.size();
        for n in img.preorder() {
            match n.head() {
                Head::Ctor(c) if c >= ctx.db_position() => return false,
                Head::Var(x) if !present.contains(&x) => {
                    if !is_set_typecode(lib.grammar().symbol_name(n.typecode())) {
                        return false;
                    }
                    fresh.insert(x);
                }
                _ => {}
            }
        }
    }
    tokens <= token_limit && fresh.len() <= 1 && is_viable_full(s, frame, ctx)
}
