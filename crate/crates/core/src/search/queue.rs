//! Lazily valued expansion queue of a red node.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::frame::TheoremFrame;
use crate::guidance::ViableTheorem;
use crate::unify::Substitution;

#[derive(Clone, Debug)]
pub enum Entry {
    /// A viable theorem whose substitutions have not been generated yet.
    /// `ratio` is `p_T / p_best`, an upper bound on its candidates' values.
    Theorem { frame: Arc<TheoremFrame>, constrained: Substitution, ratio: f64 },
    /// A complete substitution with its value `v_b`.
    Candidate { frame: Arc<TheoremFrame>, subst: Substitution, value: f64 },
}

impl Entry {
    pub fn value(&self) -> f64 {
        match self {
            Entry::Theorem { ratio, .. } => *ratio,
            Entry::Candidate { value, .. } => *value,
        }
    }
}

#[derive(Debug)]
struct Keyed {
    seq: u64,
    entry: Entry,
}

impl Keyed {
    // candidates win ties against theorems, then earlier insertion wins
    fn key(&self) -> (f64, u8, std::cmp::Reverse<u64>) {
        let kind = matches!(self.entry, Entry::Candidate { .. }) as u8;
        (self.entry.value(), kind, std::cmp::Reverse(self.seq))
    }
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    }
}

#[derive(Debug, Default)]
pub struct ExpansionQueue {
    heap: BinaryHeap<Keyed>,
    seq: u64,
}

impl ExpansionQueue {
    /// Queue over `viable` theorems with relevance `probs`.
    pub fn new(viable: &[ViableTheorem], probs: &[f64]) -> ExpansionQueue {
        let best = probs.iter().copied().fold(0.0, f64::max);
        let mut q = ExpansionQueue::default();
        for ((frame, s), p) in viable.iter().zip(probs) {
            let ratio = if best > 0.0 { p / best } else { 1.0 };
            q.push(Entry::Theorem { frame: frame.clone(), constrained: s.clone(), ratio });
        }
        q
    }

    pub fn push(&mut self, entry: Entry) {
        self.seq += 1;
        self.heap.push(Keyed { seq: self.seq, entry });
    }

    pub fn pop(&mut self) -> Option<Entry> {
        self.heap.pop().map(|k| k.entry)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}

/// `v_b = (p_T / p_best) * (p_phi / p_best_phi)`.
pub fn candidate_value(theorem_ratio: f64, p: f64, p_best: f64) -> f64 {
    if p_best > 0.0 {
        theorem_ratio * p / p_best
    } else {
        theorem_ratio
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_arithmetic() {
        assert_eq!(candidate_value(1.0, 0.3, 0.3), 1.0);
        assert!((candidate_value(0.2 / 0.4, 0.1, 0.2) - 0.25).abs() < 1e-12);
    }
}
