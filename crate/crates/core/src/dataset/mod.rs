//! Proof-step extraction and the three training sets: relevance,
//! generative and payoff.

mod emit;
#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::database::{decompress_proof, StmtId};
use crate::frame::{Context, Library, TheoremFrame};
use crate::grammar::{TokenizeError, Tree};
use crate::guidance::{Guidance, GuidanceError};
use crate::search::{candidate_value, Entry, ExpansionQueue};
use crate::unify::{apply_substitution, is_viable_full, viable_theorems, Substitution};
use crate::verifier::{tree_from_rpn, verify_proposition, ProofTree};

pub use emit::{
    audit_split, emit_tokenized, extract, sha256_hex, ExtractConfig, GenerativeRecord, Manifest, PayoffRecord,
    RelevanceRecord, SplitCounts, TheoremRecord, VarTag, FILE_STEMS,
};

/// Proportions of the validation and test sets, out of this total.
const SPLIT_TOTAL: u64 = 27217;
const SPLIT_VALIDATION: u64 = 2711;
const SPLIT_TEST: u64 = 2720;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("tokenization: {0}")]
    Tokenize(#[from] TokenizeError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Assignment of every provable proposition to a split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    assignment: BTreeMap<StmtId, Split>,
}

impl Splits {
    pub fn get(&self, id: StmtId) -> Option<Split> {
        self.assignment.get(&id).copied()
    }

    /// Members of `split` in database order.
    pub fn members(&self, split: Split) -> Vec<StmtId> {
        self.assignment.iter().filter(|(_, s)| **s == split).map(|(id, _)| *id).collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StmtId, Split)> + '_ {
        self.assignment.iter().map(|(id, s)| (*id, *s))
    }
}

/// Train, validation and test sizes for `n` propositions.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let share = |k: u64| ((n as u64 * k + SPLIT_TOTAL / 2) / SPLIT_TOTAL) as usize;
    let (val, test) = (share(SPLIT_VALIDATION), share(SPLIT_TEST));
    (n - val - test, val, test)
}

/// Seeded uniform split of the provable propositions of `lib`.
pub fn split_propositions(lib: &Library, seed: u64) -> Splits {
    let mut props: Vec<StmtId> = lib.db().provable_propositions().collect();
    let (_, n_val, n_test) = split_sizes(props.len());
    props.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = BTreeMap::new();
    for (k, id) in props.into_iter().enumerate() {
        let split = if k < n_val {
            Split::Validation
        } else if k < n_val + n_test {
            Split::Test
        } else {
            Split::Train
        };
        assignment.insert(id, split);
    }
    Splits { assignment }
}

/// One application of a theorem inside a database proof.
#[derive(Clone, Debug)]
pub struct ProofStep {
    pub context: Arc<Context>,
    pub expr: Tree,
    pub theorem: Arc<TheoremFrame>,
    pub subst: Substitution,
    pub split: Split,
}

impl ProofStep {
    /// The hypotheses produced by applying the step.
    pub fn hyp_exprs(&self) -> Vec<Tree> {
        self.theorem.hyps.iter().map(|h| apply_substitution(h, &self.subst).expect("typed substitution")).collect()
    }
}

/// Whether applying the recorded substitution to the theorem reproduces
/// the recorded expression.
pub fn replay(step: &ProofStep) -> bool {
    apply_substitution(&step.theorem.assertion, &step.subst).is_ok_and(|t| t == step.expr)
}

/// Steps of every split proposition, plus the propositions skipped with
/// the reason.
#[derive(Clone, Debug, Default)]
pub struct Extraction {
    pub steps: Vec<ProofStep>,
    pub skipped: Vec<(StmtId, String)>,
}

/// Expand the proof of every proposition in `splits` into its steps,
/// in database order.
pub fn extract_steps(lib: &Library, splits: &Splits, threads: usize) -> Extraction {
    let props: Vec<(StmtId, Split)> = splits.iter().collect();
    let results = parallel_map(&props, threads, |(id, split)| steps_of(lib, *id, *split));
    let mut out = Extraction::default();
    for ((id, _), r) in props.iter().zip(results) {
        match r {
            Ok(steps) => out.steps.extend(steps),
            Err(e) => {
                warn!("skipping {}: {e}", lib.db().label(*id));
                out.skipped.push((*id, e));
            }
        }
    }
    out
}

fn steps_of(lib: &Library, id: StmtId, split: Split) -> Result<Vec<ProofStep>, String> {
    let db = lib.db();
    verify_proposition(db, id).map_err(|e| e.to_string())?;
    let ctx = Arc::new(lib.context_at(id).map_err(|e| e.to_string())?);
    let labels = decompress_proof(db, id).map_err(|e| e.to_string())?;
    let pt = tree_from_rpn(&labels, &ctx, lib).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for node in pt.nodes() {
        if let ProofTree::Step { expr, theorem, subst, .. } = node {
            let frame = lib.frame(*theorem).ok_or_else(|| format!("no frame for {}", db.label(*theorem)))?;
            out.push(ProofStep {
                context: ctx.clone(),
                expr: expr.clone(),
                theorem: frame.clone(),
                subst: subst.clone(),
                split,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PayoffExample {
    pub context: Arc<Context>,
    pub expr: Tree,
    pub positive: bool,
    pub split: Split,
}

/// Payoff examples: every distinct step expression of a context is a
/// positive; the hypotheses of the two best pairs the guidance predicts
/// for each step are negatives unless they equal a positive or a context
/// hypothesis. Steps whose guidance queries fail contribute positives only.
pub fn make_payoff_examples(
    lib: &Library,
    steps: &[ProofStep],
    guidance: &dyn Guidance,
    beam_width: usize,
    token_limit: usize,
    threads: usize,
) -> Vec<PayoffExample> {
    let mut groups: Vec<&[ProofStep]> = Vec::new();
    let mut start = 0;
    for k in 1..=steps.len() {
        if k == steps.len() || !Arc::ptr_eq(&steps[k].context, &steps[start].context) {
            if start < k {
                groups.push(&steps[start..k]);
            }
            start = k;
        }
    }
    let per_group = parallel_map(&groups, threads, |group| {
        let ctx = &group[0].context;
        let mut positives: Vec<Tree> = Vec::new();
        let mut seen: HashSet<Tree> = HashSet::new();
        for s in group.iter() {
            if seen.insert(s.expr.clone()) {
                positives.push(s.expr.clone());
            }
        }
        let mut negatives: Vec<Tree> = Vec::new();
        for s in group.iter() {
            let pairs = match top_pairs(lib, guidance, ctx, &s.expr, 2, beam_width, token_limit) {
                Ok(p) => p,
                Err(e) => {
                    warn!("payoff negatives for a step of {}: {e}", ctx.label());
                    continue;
                }
            };
            for (frame, subst) in pairs {
                for h in &frame.hyps {
                    let e = apply_substitution(h, &subst).expect("typed substitution");
                    if !ctx.hyps().contains(&e) && seen.insert(e.clone()) {
                        negatives.push(e);
                    }
                }
            }
        }
        let split = group[0].split;
        let example = |expr: Tree, positive| PayoffExample { context: ctx.clone(), expr, positive, split };
        let mut out: Vec<PayoffExample> = positives.into_iter().map(|e| example(e, true)).collect();
        out.extend(negatives.into_iter().map(|e| example(e, false)));
        out
    });
    per_group.into_iter().flatten().collect()
}

/// The `k` highest-valued (theorem, substitution) pairs for `a`, ranked
/// as the search ranks its expansion queue.
pub fn top_pairs(
    lib: &Library,
    guidance: &dyn Guidance,
    ctx: &Context,
    a: &Tree,
    k: usize,
    beam_width: usize,
    token_limit: usize,
) -> Result<Vec<(Arc<TheoremFrame>, Substitution)>, GuidanceError> {
    let viable = viable_theorems(a, ctx, lib);
    if viable.is_empty() {
        return Ok(Vec::new());
    }
    let probs = guidance.relevance(ctx, a, &viable)?;
    let mut q = ExpansionQueue::new(&viable, &probs);
    let mut out = Vec::new();
    while out.len() < k {
        let Some(entry) = q.pop() else { break };
        match entry {
            Entry::Theorem { frame, constrained, ratio } => {
                if frame.unconstrained.is_empty() {
                    if is_viable_full(&constrained, &frame, ctx) {
                        q.push(Entry::Candidate { frame, subst: constrained, value: ratio });
                    }
                    continue;
                }
                let g = guidance.generate(ctx, a, &frame, &constrained, beam_width, token_limit)?;
                let best = g.candidates.iter().map(|c| c.1).fold(0.0, f64::max);
                for (s, p) in g.candidates {
                    let fits = apply_substitution(&frame.assertion, &s).is_ok_and(|t| t == *a);
                    if fits && is_viable_full(&s, &frame, ctx) {
                        q.push(Entry::Candidate { frame: frame.clone(), subst: s, value: candidate_value(ratio, p, best) });
                    }
                }
            }
            Entry::Candidate { frame, subst, .. } => out.push((frame, subst)),
        }
    }
    Ok(out)
}

/// Map `f` over `items` on up to `threads` threads, keeping order.
fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
