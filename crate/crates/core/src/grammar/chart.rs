//! Memoized span chart that counts derivations (saturating at 2).

use std::collections::{HashMap, HashSet};

use super::{Grammar, Tree, VarTypes};
use crate::database::Sym;

pub(super) struct Chart<'a> {
    g: &'a Grammar,
    s: &'a [Sym],
    vars: &'a VarTypes,
    spans: HashMap<(Sym, u32, u32), u8>,
    seqs: HashMap<(u32, u32, u32, u32), u8>,
    active: HashSet<(Sym, u32, u32)>,
}

fn sat(x: u32) -> u8 {
    x.min(2) as u8
}

impl<'a> Chart<'a> {
    pub(super) fn new(g: &'a Grammar, s: &'a [Sym], vars: &'a VarTypes) -> Chart<'a> {
        Chart { g, s, vars, spans: HashMap::new(), seqs: HashMap::new(), active: HashSet::new() }
    }

    fn leaf(&self, nt: Sym, i: usize, j: usize) -> bool {
        j == i + 1 && self.g.variables[self.s[i].index()] && self.vars.get(&self.s[i]) == Some(&nt)
    }

    /// Number of derivations of `s[i..j]` from category `nt`.
    pub(super) fn count(&mut self, nt: Sym, i: usize, j: usize) -> u8 {
        let key = (nt, i as u32, j as u32);
        if let Some(c) = self.spans.get(&key) {
            return *c;
        }
        if !self.active.insert(key) {
            // only reachable through a cycle of unit productions, which the
            // grammar flags separately
            return 0;
        }
        let mut total = u32::from(self.leaf(nt, i, j));
        if let Some(list) = self.g.by_typecode.get(&nt) {
            for &c in list {
                total += u32::from(self.count_seq(c, 0, i, j));
                if total >= 2 {
                    break;
                }
            }
        }
        self.active.remove(&key);
        let c = sat(total);
        self.spans.insert(key, c);
        c
    }

    fn count_seq(&mut self, c: usize, pos: usize, i: usize, j: usize) -> u8 {
        let ctor = &self.g.ctors[c];
        let len = ctor.body.len();
        if pos == len {
            return u8::from(i == j);
        }
        let remaining = len - pos;
        if j - i < remaining {
            return 0;
        }
        if pos == 0 {
            if let (Some(last), None) = (ctor.body.last(), ctor.body_slots[len - 1]) {
                if self.s[j - 1] != *last {
                    return 0;
                }
            }
        }
        let key = (c as u32, pos as u32, i as u32, j as u32);
        if let Some(v) = self.seqs.get(&key) {
            return *v;
        }
        let result = match ctor.body_slots[pos] {
            None => {
                if self.s[i] == ctor.body[pos] {
                    self.count_seq(c, pos + 1, i + 1, j)
                } else {
                    0
                }
            }
            Some(slot) => {
                let t = ctor.slot_types[slot];
                let mut total = 0u32;
                for k in i + 1..=j - (remaining - 1) {
                    let a = self.count(t, i, k);
                    if a == 0 {
                        continue;
                    }
                    let b = self.count_seq(c, pos + 1, k, j);
                    total += u32::from(a) * u32::from(b);
                    if total >= 2 {
                        break;
                    }
                }
                sat(total)
            }
        };
        self.seqs.insert(key, result);
        result
    }

    /// Build the unique tree for a span whose count is exactly 1.
    pub(super) fn build(&mut self, nt: Sym, i: usize, j: usize) -> Tree {
        if self.leaf(nt, i, j) {
            return Tree::var(self.s[i], nt);
        }
        let list = self.g.by_typecode.get(&nt).cloned().unwrap_or_default();
        for c in list {
            if self.count_seq(c, 0, i, j) == 1 {
                let ctor = &self.g.ctors[c];
                let mut args: Vec<Option<Tree>> = vec![None; ctor.arity()];
                self.build_seq(c, 0, i, j, &mut args);
                let args = args.into_iter().map(|a| a.expect("slot filled")).collect();
                return Tree::ctor(self.g.ctors[c].id, nt, args);
            }
        }
        unreachable!("build called on a span without a unique derivation")
    }

    fn build_seq(&mut self, c: usize, pos: usize, i: usize, j: usize, args: &mut [Option<Tree>]) {
        let len = self.g.ctors[c].body.len();
        if pos == len {
            return;
        }
        match self.g.ctors[c].body_slots[pos] {
            None => self.build_seq(c, pos + 1, i + 1, j, args),
            Some(slot) => {
                let t = self.g.ctors[c].slot_types[slot];
                let remaining = len - pos;
                for k in i + 1..=j - (remaining - 1) {
                    if self.count(t, i, k) == 1 && self.count_seq(c, pos + 1, k, j) == 1 {
                        args[slot] = Some(self.build(t, i, k));
                        self.build_seq(c, pos + 1, k, j, args);
                        return;
                    }
                }
                unreachable!("no split for a unique derivation")
            }
        }
    }
}
