#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use mmprove::database::{parse_database, Database};
use mmprove::frame::Library;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load_db(name: &str) -> Database {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    parse_database(&text).expect("fixture parses")
}

pub fn load_library(name: &str) -> Library {
    Library::new(Arc::new(load_db(name)))
}

/// `label -> ok?` from a reference verdict file.
pub fn load_verdicts(name: &str) -> Vec<(String, bool)> {
    let text = std::fs::read_to_string(fixture_path(name)).expect("verdicts readable");
    text.lines()
        .map(|l| {
            let (label, v) = l.split_once('\t').expect("tab-separated verdict");
            (label.to_string(), v == "ok")
        })
        .collect()
}

pub fn verdict_map(name: &str) -> HashMap<String, bool> {
    load_verdicts(name).into_iter().collect()
}

use mmprove::grammar::{Head, Tree, VarTypes};
use mmprove::search::{child_cap, RedId, SearchTree};

/// Typecode of every variable declared by a `$f`.
pub fn var_types(db: &Database) -> VarTypes {
    let mut vars = VarTypes::new();
    for f in db.floating_hyps() {
        let m = &db.statement(*f).math;
        vars.insert(m[1], m[0]);
    }
    vars
}

/// Bottom-up recomputation of `(x, n, proven, dead)` and least-promising
/// children, compared against the incremental values of `tree`.
pub fn check_statistics(tree: &SearchTree, divisor: u64) -> Result<(), String> {
    let mut all = HashMap::new();
    recompute(tree, tree.root(), &mut all)?;
    for (id, (x, n, proven, dead)) in all {
        let r = tree.red(id);
        if (r.x - x).abs() > 1e-9 {
            return Err(format!("x of {id}: {} vs {x}", r.x));
        }
        if r.n != n || r.proven != proven || r.dead != dead {
            return Err(format!("{id}: ({}, {}, {}) vs ({n}, {proven}, {dead})", r.n, r.proven, r.dead));
        }
        if r.children.len() > child_cap(r.n, divisor).max(1) {
            return Err(format!("child cap exceeded at {id}"));
        }
    }
    Ok(())
}

type Stats = (f64, u64, bool, bool);

fn recompute(tree: &SearchTree, a: RedId, out: &mut HashMap<RedId, Stats>) -> Result<Stats, String> {
    let r = tree.red(a);
    let (mut x, mut n, mut proven) = (r.y, 1, r.hyp.is_some());
    for b in &r.children {
        let blue = tree.blue(*b);
        if blue.dead {
            return Err(format!("dead blue node {b} still attached"));
        }
        let (bx, bn, bp) = if blue.is_dummy() {
            (0.0, blue.n, false)
        } else {
            let mut stats = Vec::new();
            for c in &blue.children {
                stats.push((*c, recompute(tree, *c, out)?));
            }
            let pick = |only_unproven: bool| {
                let mut least: Option<(RedId, f64, u64)> = None;
                for (c, (cx, cn, cp, _)) in &stats {
                    if only_unproven && *cp {
                        continue;
                    }
                    if least.is_some_and(|(_, lx, ln)| cx / *cn as f64 >= lx / ln as f64) {
                        continue;
                    }
                    least = Some((*c, *cx, *cn));
                }
                least
            };
            let least = pick(true).or_else(|| pick(false));
            if blue.least != least.map(|l| l.0) {
                return Err(format!("least-promising child of {b}: {:?} vs {:?}", blue.least, least));
            }
            let all = stats.iter().all(|(_, s)| s.2);
            match least {
                Some((_, lx, ln)) => (lx, ln, all),
                None => (1.0, 1, all),
            }
        };
        x += bx;
        n += bn;
        proven |= bp;
    }
    let dead = !proven && r.children.is_empty() && r.queue_exhausted();
    out.insert(a, (x, n, proven, dead));
    Ok((x, n, proven, dead))
}

/// Live nodes never repeat the expression of a red ancestor.
pub fn check_no_cycles(tree: &SearchTree) -> Result<(), String> {
    for id in tree.live_reds() {
        for anc in tree.red_ancestors(id) {
            if tree.red(anc).expr == tree.red(id).expr {
                return Err(format!("{id} repeats ancestor {anc}"));
            }
        }
    }
    Ok(())
}

/// Naive first-order matching of `pattern` against `target`, written
/// independently of the library matcher.
pub fn naive_match(pattern: &Tree, target: &Tree, s: &mut HashMap<mmprove::database::Sym, Tree>) -> bool {
    if pattern.typecode() != target.typecode() {
        return false;
    }
    match pattern.head() {
        Head::Var(v) => match s.get(&v) {
            Some(t) => t == target,
            None => {
                s.insert(v, target.clone());
                true
            }
        },
        Head::Ctor(c) => {
            target.head() == Head::Ctor(c)
                && pattern.args().len() == target.args().len()
                && pattern.args().iter().zip(target.args()).all(|(p, t)| naive_match(p, t, s))
        }
    }
}
