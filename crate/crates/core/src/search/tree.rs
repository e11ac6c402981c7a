//! The partial proof tree: red expression nodes, blue theorem-application
//! nodes, and their statistics.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::queue::ExpansionQueue;
use super::SearchParams;
use crate::database::StmtId;
use crate::frame::TheoremFrame;
use crate::grammar::Tree;
use crate::unify::Substitution;
use crate::verifier::ProofTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RedId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlueId(pub u32);

impl fmt::Display for RedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Display for BlueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Debug, Default)]
pub(crate) enum QueueState {
    /// Relevance not evaluated yet.
    #[default]
    Pending,
    Ready(ExpansionQueue),
    /// Held by a pass that is expanding the node.
    Taken,
}

#[derive(Debug)]
pub struct RedNode {
    pub expr: Tree,
    pub parent: Option<BlueId>,
    /// Label of the context hypothesis equal to `expr`.
    pub hyp: Option<StmtId>,
    pub y: f64,
    pub x: f64,
    pub n: u64,
    /// Live children in creation order; dead blue nodes are removed.
    pub children: Vec<BlueId>,
    pub proven: bool,
    pub dead: bool,
    /// The initial payoff has been evaluated.
    pub visited: bool,
    pub has_dummy: bool,
    pub(crate) queue: QueueState,
}

impl RedNode {
    pub(crate) fn new(expr: Tree, parent: Option<BlueId>, hyp: Option<StmtId>) -> RedNode {
        RedNode {
            expr,
            parent,
            hyp,
            y: 0.0,
            x: 0.0,
            n: 1,
            children: Vec::new(),
            proven: hyp.is_some(),
            dead: false,
            visited: false,
            has_dummy: false,
            queue: QueueState::Pending,
        }
    }

    pub fn average(&self) -> f64 {
        self.x / self.n as f64
    }

    /// The expansion queue was built and has run dry.
    pub fn queue_exhausted(&self) -> bool {
        matches!(&self.queue, QueueState::Ready(q) if q.is_empty())
    }

    pub fn queue_len(&self) -> Option<usize> {
        match &self.queue {
            QueueState::Ready(q) => Some(q.len()),
            _ => None,
        }
    }

    pub fn is_busy(&self) -> bool {
        matches!(self.queue, QueueState::Taken)
    }
}

#[derive(Debug)]
pub struct BlueNode {
    pub parent: RedId,
    /// `None` for the dummy child added when generation hit the token limit.
    pub theorem: Option<Arc<TheoremFrame>>,
    pub subst: Substitution,
    pub value: f64,
    pub children: Vec<RedId>,
    pub proven: bool,
    pub dead: bool,
    /// Passes currently below this node.
    pub in_flight: u32,
    pub x: f64,
    pub n: u64,
    pub least: Option<RedId>,
}

impl BlueNode {
    pub fn is_dummy(&self) -> bool {
        self.theorem.is_none()
    }
}

/// `x_b/(n_b + gamma t_b) + beta v_b/n_b + alpha sqrt(ln n_a / n_b)`.
pub fn blue_priority(x_b: f64, n_b: u64, v_b: f64, t_b: u32, n_a: u64, params: &SearchParams) -> f64 {
    let nb = n_b as f64;
    x_b / (nb + params.gamma * t_b as f64)
        + params.beta * v_b / nb
        + params.alpha * ((n_a as f64).ln() / nb).sqrt()
}

/// Children a red node with `n` visits may have.
pub fn child_cap(n: u64, divisor: u64) -> usize {
    n.div_ceil(divisor) as usize
}

#[derive(Debug, Default)]
pub struct SearchTree {
    pub(crate) reds: Vec<RedNode>,
    pub(crate) blues: Vec<BlueNode>,
}

impl SearchTree {
    pub(crate) fn with_root(expr: Tree, hyp: Option<StmtId>) -> SearchTree {
        SearchTree { reds: vec![RedNode::new(expr, None, hyp)], blues: Vec::new() }
    }

    pub fn root(&self) -> RedId {
        RedId(0)
    }

    pub fn red(&self, id: RedId) -> &RedNode {
        &self.reds[id.0 as usize]
    }

    pub fn blue(&self, id: BlueId) -> &BlueNode {
        &self.blues[id.0 as usize]
    }

    pub(crate) fn red_mut(&mut self, id: RedId) -> &mut RedNode {
        &mut self.reds[id.0 as usize]
    }

    pub(crate) fn blue_mut(&mut self, id: BlueId) -> &mut BlueNode {
        &mut self.blues[id.0 as usize]
    }

    pub fn red_count(&self) -> usize {
        self.reds.len()
    }

    pub fn blue_count(&self) -> usize {
        self.blues.len()
    }

    pub fn red_ids(&self) -> impl Iterator<Item = RedId> {
        (0..self.reds.len() as u32).map(RedId)
    }

    pub fn blue_ids(&self) -> impl Iterator<Item = BlueId> {
        (0..self.blues.len() as u32).map(BlueId)
    }

    /// Red ancestors of `a`, nearest first, excluding `a`.
    pub fn red_ancestors(&self, a: RedId) -> Vec<RedId> {
        let mut out = Vec::new();
        let mut cur = self.red(a).parent;
        while let Some(b) = cur {
            let r = self.blue(b).parent;
            out.push(r);
            cur = self.red(r).parent;
        }
        out
    }

    /// Nodes reachable from the root through live children.
    pub fn live_reds(&self) -> Vec<RedId> {
        let mut out = vec![self.root()];
        let mut i = 0;
        while i < out.len() {
            for b in &self.red(out[i]).children {
                out.extend(&self.blue(*b).children);
            }
            i += 1;
        }
        out
    }

    pub(crate) fn add_red(&mut self, node: RedNode) -> RedId {
        self.reds.push(node);
        RedId(self.reds.len() as u32 - 1)
    }

    pub(crate) fn add_blue(&mut self, node: BlueNode) -> BlueId {
        self.blues.push(node);
        BlueId(self.blues.len() as u32 - 1)
    }

    /// Recompute a blue node from its children.
    pub(crate) fn refresh_blue(&mut self, b: BlueId) {
        if self.blue(b).is_dummy() {
            return;
        }
        let children = self.blue(b).children.clone();
        let dead = children.iter().any(|c| self.red(*c).dead);
        let proven = children.iter().all(|c| self.red(*c).proven);
        let pick = |only_unproven: bool| {
            let mut best: Option<RedId> = None;
            for c in &children {
                let r = self.red(*c);
                if only_unproven && r.proven {
                    continue;
                }
                if best.is_none_or(|k| r.average() < self.red(k).average()) {
                    best = Some(*c);
                }
            }
            best
        };
        let least = pick(true).or_else(|| pick(false));
        let (x, n) = match least {
            Some(c) => (self.red(c).x, self.red(c).n),
            None => (1.0, 1),
        };
        let node = self.blue_mut(b);
        node.dead = dead;
        node.proven = proven;
        node.least = least;
        node.x = x;
        node.n = n;
    }

    /// Recompute a red node from its children, dropping dead ones.
    pub(crate) fn refresh_red(&mut self, a: RedId) {
        let mut children = std::mem::take(&mut self.red_mut(a).children);
        children.retain(|b| !self.blue(*b).dead);
        let x: f64 = children.iter().map(|b| self.blue(*b).x).sum();
        let n: u64 = children.iter().map(|b| self.blue(*b).n).sum();
        let proven_child = children.iter().any(|b| self.blue(*b).proven);
        let node = self.red_mut(a);
        node.x = node.y + x;
        node.n = 1 + n;
        node.proven = node.hyp.is_some() || proven_child;
        node.dead = !node.proven && children.is_empty() && node.queue_exhausted();
        node.children = children;
    }

    /// Refresh `a` and every ancestor up to the root.
    pub(crate) fn refresh_path(&mut self, a: RedId) {
        let mut cur = a;
        loop {
            self.refresh_red(cur);
            let Some(b) = self.red(cur).parent else { break };
            self.refresh_blue(b);
            cur = self.blue(b).parent;
        }
    }

    /// Highest-priority live child of `a`; ties go to the earliest created.
    pub fn best_child(&self, a: RedId, params: &SearchParams) -> Option<BlueId> {
        let r = self.red(a);
        let mut best: Option<(BlueId, f64)> = None;
        for b in &r.children {
            let node = self.blue(*b);
            if node.proven || node.dead {
                continue;
            }
            let p = blue_priority(node.x, node.n, node.value, node.in_flight, r.n, params);
            if best.is_none_or(|(_, q)| p > q) {
                best = Some((*b, p));
            }
        }
        best.map(|(b, _)| b)
    }

    /// Extract a proof tree from a proven red node, keeping for each red
    /// node the proven blue child with the fewest red nodes below it (the
    /// earliest created on ties).
    pub fn prune(&self, a: RedId) -> Option<ProofTree> {
        let mut sizes = HashMap::new();
        self.pruned_size(a, &mut sizes)?;
        Some(self.build_pruned(a, &sizes))
    }

    fn pruned_size(&self, a: RedId, memo: &mut HashMap<RedId, (usize, Option<BlueId>)>) -> Option<usize> {
        if let Some((s, _)) = memo.get(&a) {
            return Some(*s);
        }
        let r = self.red(a);
        if r.hyp.is_some() {
            memo.insert(a, (1, None));
            return Some(1);
        }
        let mut best: Option<(usize, BlueId)> = None;
        for b in &r.children {
            let node = self.blue(*b);
            if !node.proven || node.is_dummy() {
                continue;
            }
            let mut total = 1;
            let mut ok = true;
            for c in &node.children {
                match self.pruned_size(*c, memo) {
                    Some(s) => total += s,
                    None => ok = false,
                }
            }
            if ok && best.is_none_or(|(s, _)| total < s) {
                best = Some((total, *b));
            }
        }
        let (size, b) = best?;
        memo.insert(a, (size, Some(b)));
        Some(size)
    }

    fn build_pruned(&self, a: RedId, memo: &HashMap<RedId, (usize, Option<BlueId>)>) -> ProofTree {
        let r = self.red(a);
        match (r.hyp, memo[&a].1) {
            (Some(label), _) => ProofTree::Hyp { expr: r.expr.clone(), label },
            (None, Some(b)) => {
                let node = self.blue(b);
                ProofTree::Step {
                    expr: r.expr.clone(),
                    theorem: node.theorem.as_ref().expect("proven blue node has a theorem").id,
                    subst: node.subst.clone(),
                    children: node.children.iter().map(|c| self.build_pruned(*c, memo)).collect(),
                }
            }
            (None, None) => unreachable!("pruned node without a proof"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priority_matches_hand_values() {
        let p = SearchParams::default();
        let v = blue_priority(0.5, 1, 1.0, 0, 2, &p);
        assert!((v - (0.5 + 0.5 + 2f64.ln().sqrt())).abs() < 1e-12);
        assert!((v - 1.8326).abs() < 1e-4);
        let first = blue_priority(1.0, 1, 0.0, 1, 1, &p);
        assert!((first - 0.25).abs() < 1e-12);
        // exploration terms vanish as n_b grows
        let big = 1u64 << 40;
        let avg = blue_priority(0.3 * big as f64, big, 1.0, 0, big, &p);
        assert!((avg - 0.3).abs() < 1e-4);
    }

    #[test]
    fn child_cap_arithmetic() {
        assert_eq!(child_cap(1, 3), 1);
        assert_eq!(child_cap(2, 3), 1);
        assert_eq!(child_cap(4, 3), 2);
        assert_eq!(child_cap(6, 3), 2);
        assert_eq!(child_cap(7, 3), 3);
    }
}
