//! Frequency-based relevance and size-ranked enumeration of substitutions.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use super::{admissible, is_set_typecode, normalize, present_vars, Generated, Guidance, GuidanceError, ViableTheorem};
use crate::database::{decompress_proof, StmtId, Sym};
use crate::frame::{Context, Library, TheoremFrame};
use crate::grammar::Tree;
use crate::unify::{is_viable_full, match_into, Substitution};

/// Combinations examined per generation query before giving up.
const MAX_COMBINATIONS: usize = 4096;

/// How often each theorem is used in the proofs of `props`.
pub fn usage_counts(lib: &Library, props: impl IntoIterator<Item = StmtId>) -> HashMap<StmtId, f64> {
    let mut counts = HashMap::new();
    for p in props {
        let Ok(labels) = decompress_proof(lib.db(), p) else {
            continue;
        };
        for id in labels {
            if lib.frame(id).is_some() {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
    }
    counts
}

pub struct Baseline {
    lib: Arc<Library>,
    freq: HashMap<StmtId, f64>,
}

impl Baseline {
    pub fn new(lib: Arc<Library>, freq: HashMap<StmtId, f64>) -> Baseline {
        Baseline { lib, freq }
    }

    /// Baseline with no usage statistics.
    pub fn uniform(lib: Arc<Library>) -> Baseline {
        Baseline::new(lib, HashMap::new())
    }

    pub fn library(&self) -> &Arc<Library> {
        &self.lib
    }

    fn hyp_bonus(frame: &TheoremFrame, constrained: &Substitution, ctx: &Context) -> bool {
        frame.hyps.iter().any(|h| {
            ctx.hyps().iter().any(|e| {
                let mut s = constrained.clone();
                match_into(h, e, &mut s)
            })
        })
    }

    /// Candidate images of the given typecode, smallest first.
    pub fn candidate_pool(&self, ctx: &Context, a: &Tree, typecode: Sym) -> Vec<Tree> {
        let grammar = self.lib.grammar();
        let present = present_vars(ctx, a);
        let mut pool: Vec<Tree> = Vec::new();
        let push = |t: Tree, pool: &mut Vec<Tree>| {
            if t.typecode() == typecode && !pool.contains(&t) {
                pool.push(t);
            }
        };
        for src in std::iter::once(a).chain(ctx.hyps()) {
            for t in src.subtrees() {
                push(t, &mut pool);
            }
        }
        let name = grammar.symbol_name(typecode);
        if is_set_typecode(name) {
            if let Some(v) = ctx.vars_of_type(typecode).into_iter().find(|v| !present.contains(v)) {
                push(Tree::var(v, typecode), &mut pool);
            }
        }
        let before = |c: StmtId| c < ctx.db_position();
        for c in grammar.productions(typecode) {
            if before(c.id) && c.arity() == 0 {
                push(Tree::ctor(c.id, typecode, Vec::new()), &mut pool);
            }
        }
        // one level of constructors over the smallest available leaves
        let mut leaves: HashMap<Sym, Tree> = HashMap::new();
        let mut sorted: Vec<Sym> = present.iter().copied().collect();
        sorted.sort();
        for v in sorted {
            if let Some(tc) = ctx.var_types.get(&v) {
                leaves.entry(*tc).or_insert_with(|| Tree::var(v, *tc));
            }
        }
        for c in grammar.constructors() {
            if before(c.id) && c.arity() == 0 {
                leaves.entry(c.typecode).or_insert_with(|| Tree::ctor(c.id, c.typecode, Vec::new()));
            }
        }
        for c in grammar.productions(typecode) {
            if !before(c.id) || c.arity() == 0 {
                continue;
            }
            let args: Option<Vec<Tree>> = c.slot_types.iter().map(|t| leaves.get(t).cloned()).collect();
            if let Some(args) = args {
                push(Tree::ctor(c.id, typecode, args), &mut pool);
            }
        }
        pool.sort_by_key(Tree::size);
        pool
    }
}

impl Guidance for Baseline {
    fn relevance(&self, ctx: &Context, _a: &Tree, viable: &[ViableTheorem]) -> Result<Vec<f64>, GuidanceError> {
        let scores: Vec<f64> = viable
            .iter()
            .map(|(frame, s)| {
                let f = self.freq.get(&frame.id).copied().unwrap_or(0.0).max(0.5);
                let bonus = if Self::hyp_bonus(frame, s, ctx) { 1.0 } else { 0.0 };
                f * (1.0 + bonus)
            })
            .collect();
        Ok(normalize(&scores))
    }

    fn generate(
        &self,
        ctx: &Context,
        a: &Tree,
        frame: &TheoremFrame,
        constrained: &Substitution,
        beam_width: usize,
        token_limit: usize,
    ) -> Result<Generated, GuidanceError> {
        let free: Vec<(Sym, Sym)> =
            frame.free_vars.iter().copied().filter(|(v, _)| !constrained.contains(*v)).collect();
        if free.is_empty() {
            let ok = is_viable_full(constrained, frame, ctx);
            let candidates = if ok { vec![(constrained.clone(), 1.0)] } else { Vec::new() };
            return Ok(Generated { candidates, truncated: false });
        }
        let pools: Vec<Vec<Tree>> = free.iter().map(|(_, tc)| self.candidate_pool(ctx, a, *tc)).collect();
        if pools.iter().any(Vec::is_empty) {
            return Ok(Generated::default());
        }
        let size_of = |idx: &[usize]| -> usize { idx.iter().zip(&pools).map(|(i, p)| p[*i].size()).sum() };
        let mut heap = BinaryHeap::new();
        let mut seen = HashSet::new();
        let start = vec![0usize; free.len()];
        heap.push(Reverse((size_of(&start), start.clone())));
        seen.insert(start);
        let mut accepted: Vec<Substitution> = Vec::new();
        let mut hit_limit = false;
        let mut pops = 0;
        while let Some(Reverse((size, idx))) = heap.pop() {
            pops += 1;
            if size > token_limit {
                hit_limit = true;
                break;
            }
            let mut s = constrained.clone();
            for ((v, _), (i, pool)) in free.iter().zip(idx.iter().zip(&pools)) {
                s.insert(*v, pool[*i].clone());
            }
            if admissible(&self.lib, ctx, a, frame, &s, token_limit) {
                accepted.push(s);
                if accepted.len() >= beam_width {
                    break;
                }
            }
            if pops >= MAX_COMBINATIONS {
                break;
            }
            for k in 0..idx.len() {
                if idx[k] + 1 < pools[k].len() {
                    let mut next = idx.clone();
                    next[k] += 1;
                    if seen.insert(next.clone()) {
                        heap.push(Reverse((size_of(&next), next)));
                    }
                }
            }
        }
        let weights: Vec<f64> = (0..accepted.len()).map(|r| 1.0 / (r + 1) as f64).collect();
        let probs = normalize(&weights);
        let truncated = accepted.is_empty() && hit_limit;
        Ok(Generated { candidates: accepted.into_iter().zip(probs).collect(), truncated })
    }

    fn payoff(&self, ctx: &Context, a: &Tree) -> Result<f64, GuidanceError> {
        if ctx.hyp_label(a).is_some() {
            return Ok(1.0);
        }
        Ok(1.0 / (1.0 + 0.05 * a.size() as f64))
    }
}
