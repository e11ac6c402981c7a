//! Substitution, one-sided matching, disjointness and viability.

use std::collections::btree_map;
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::database::{normalize_pair, Sym};
use crate::frame::{Context, Library, TheoremFrame};
use crate::grammar::{Head, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnifyError {
    #[error("image of {var:?} has typecode {found:?}, expected {expected:?}")]
    TypeMismatch { var: Sym, expected: Sym, found: Sym },
}

/// Variable → tree map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Substitution(BTreeMap<Sym, Tree>);

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn get(&self, v: Sym) -> Option<&Tree> {
        self.0.get(&v)
    }

    pub fn insert(&mut self, v: Sym, t: Tree) -> Option<Tree> {
        self.0.insert(v, t)
    }

    pub fn contains(&self, v: Sym) -> bool {
        self.0.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Sym, Tree> {
        self.0.iter()
    }

    /// Restriction to the given variables.
    pub fn restrict(&self, vars: &[Sym]) -> Substitution {
        Substitution(self.0.iter().filter(|(v, _)| vars.contains(v)).map(|(v, t)| (*v, t.clone())).collect())
    }

    /// `v ↦ apply(self(v), outer)`, plus the bindings of `outer` for
    /// variables `self` leaves alone.
    pub fn compose(&self, outer: &Substitution) -> Result<Substitution, UnifyError> {
        let mut out = Substitution::new();
        for (v, t) in &self.0 {
            out.insert(*v, apply_substitution(t, outer)?);
        }
        for (v, t) in &outer.0 {
            out.0.entry(*v).or_insert_with(|| t.clone());
        }
        Ok(out)
    }

    /// Total symbol count of the images.
    pub fn token_len(&self) -> usize {
        self.0.values().map(Tree::token_len).sum()
    }
}

impl FromIterator<(Sym, Tree)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Sym, Tree)>>(iter: I) -> Substitution {
        Substitution(iter.into_iter().collect())
    }
}

/// Replace every variable of `t` that `s` binds.
pub fn apply_substitution(t: &Tree, s: &Substitution) -> Result<Tree, UnifyError> {
    match t.head() {
        Head::Var(v) => match s.get(v) {
            Some(img) if img.typecode() != t.typecode() => {
                Err(UnifyError::TypeMismatch { var: v, expected: t.typecode(), found: img.typecode() })
            }
            Some(img) => Ok(img.clone()),
            None => Ok(t.clone()),
        },
        Head::Ctor(c) => {
            if s.is_empty() {
                return Ok(t.clone());
            }
            let args = t.args().iter().map(|a| apply_substitution(a, s)).collect::<Result<Vec<_>, _>>()?;
            if args.iter().zip(t.args()).all(|(a, b)| a.ptr_eq(b)) {
                return Ok(t.clone());
            }
            Ok(Tree::ctor(c, t.typecode(), args))
        }
    }
}

/// The unique `s` with `apply_substitution(pattern, s) == target`, if any.
pub fn match_assertion(pattern: &Tree, target: &Tree) -> Option<Substitution> {
    let mut s = Substitution::new();
    match_into(pattern, target, &mut s).then_some(s)
}

/// Extend `s` so that `pattern` maps onto `target`.
pub fn match_into(pattern: &Tree, target: &Tree, s: &mut Substitution) -> bool {
    if pattern.typecode() != target.typecode() {
        return false;
    }
    match pattern.head() {
        Head::Var(v) => match s.get(v) {
            Some(bound) => bound == target,
            None => {
                s.insert(v, target.clone());
                true
            }
        },
        Head::Ctor(c) => {
            target.head() == Head::Ctor(c)
                && pattern.args().len() == target.args().len()
                && pattern.args().iter().zip(target.args()).all(|(p, t)| match_into(p, t, s))
        }
    }
}

/// Disjointness condition for the pairs of `pairs` whose variables are
/// both bound by `s`: context variables of the two images must be
/// distinct and declared disjoint in the context.
pub fn check_disjoint_pairs(s: &Substitution, pairs: &[(Sym, Sym)], ctx_disjoint: &HashSet<(Sym, Sym)>) -> bool {
    for (x, y) in pairs {
        let (Some(tx), Some(ty)) = (s.get(*x), s.get(*y)) else {
            continue;
        };
        let vy = ty.vars();
        for z in tx.vars() {
            for w in &vy {
                if z == *w || !ctx_disjoint.contains(&normalize_pair(z, *w)) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn check_disjoint(s: &Substitution, frame: &TheoremFrame, ctx: &Context) -> bool {
    check_disjoint_pairs(s, &frame.disjoint, &ctx.disjoint)
}

/// Whether `s` binds every free variable of `frame` with the right
/// typecode, uses only context variables, and satisfies disjointness.
pub fn is_viable_full(s: &Substitution, frame: &TheoremFrame, ctx: &Context) -> bool {
    for (v, tc) in &frame.free_vars {
        let Some(t) = s.get(*v) else {
            return false;
        };
        if t.typecode() != *tc {
            return false;
        }
        if t.vars().iter().any(|z| !ctx.var_types.contains_key(z)) {
            return false;
        }
    }
    check_disjoint(s, frame, ctx)
}

/// Theorems defined before the context whose assertion matches `a`, with
/// their constrained substitutions, in database order.
pub fn viable_theorems(a: &Tree, ctx: &Context, lib: &Library) -> Vec<(Arc<TheoremFrame>, Substitution)> {
    let mut out = Vec::new();
    for frame in lib.candidates(a.head()) {
        if frame.id >= ctx.db_position() {
            break;
        }
        if let Some(s) = match_assertion(&frame.assertion, a) {
            if check_disjoint(&s, frame, ctx) {
                out.push((frame.clone(), s));
            }
        }
    }
    out
}
