//! Guidance that knows a reference proof and steers the search along it.

use std::collections::{HashMap, HashSet};

use super::{normalize, Baseline, Generated, Guidance, GuidanceError, ViableTheorem};
use crate::database::StmtId;
use crate::frame::{Context, TheoremFrame};
use crate::grammar::Tree;
use crate::unify::Substitution;
use crate::verifier::ProofTree;

const EPSILON: f64 = 1e-3;

pub struct Oracle {
    steps: HashMap<Tree, (StmtId, Substitution)>,
    known: HashSet<Tree>,
    fallback: Baseline,
}

impl Oracle {
    /// Oracle for the proof `pt`, deferring to `fallback` off the proof.
    pub fn new(pt: &ProofTree, fallback: Baseline) -> Oracle {
        let mut steps = HashMap::new();
        let mut known = HashSet::new();
        for n in pt.nodes() {
            known.insert(n.expr().clone());
            if let ProofTree::Step { expr, theorem, subst, .. } = n {
                steps.entry(expr.clone()).or_insert_with(|| (*theorem, subst.clone()));
            }
        }
        Oracle { steps, known, fallback }
    }
}

impl Guidance for Oracle {
    fn relevance(&self, ctx: &Context, a: &Tree, viable: &[ViableTheorem]) -> Result<Vec<f64>, GuidanceError> {
        let Some((theorem, _)) = self.steps.get(a) else {
            return self.fallback.relevance(ctx, a, viable);
        };
        let Some(hit) = viable.iter().position(|(f, _)| f.id == *theorem) else {
            return self.fallback.relevance(ctx, a, viable);
        };
        if viable.len() == 1 {
            return Ok(vec![1.0]);
        }
        let rest = EPSILON / (viable.len() - 1) as f64;
        Ok((0..viable.len()).map(|i| if i == hit { 1.0 - EPSILON } else { rest }).collect())
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
        let mut g = self.fallback.generate(ctx, a, frame, constrained, beam_width, token_limit)?;
        let Some((_, subst)) = self.steps.get(a).filter(|(t, _)| *t == frame.id) else {
            return Ok(g);
        };
        let truth = subst.restrict(&frame.free_vars.iter().map(|(v, _)| *v).collect::<Vec<_>>());
        g.candidates.retain(|(s, _)| *s != truth);
        let scale = 0.1;
        for c in &mut g.candidates {
            c.1 *= scale;
        }
        g.candidates.insert(0, (truth, if g.candidates.is_empty() { 1.0 } else { 1.0 - scale }));
        g.candidates.truncate(beam_width.max(1));
        let probs = normalize(&g.candidates.iter().map(|c| c.1).collect::<Vec<_>>());
        for (c, p) in g.candidates.iter_mut().zip(probs) {
            c.1 = p;
        }
        g.truncated = false;
        Ok(g)
    }

    fn payoff(&self, _ctx: &Context, a: &Tree) -> Result<f64, GuidanceError> {
        Ok(if self.known.contains(a) { 1.0 } else { 0.1 })
    }
}
