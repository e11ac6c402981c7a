use std::collections::HashMap;
use std::sync::Arc;

use super::*;
use crate::database::{decompress_proof, parse_database};
use crate::guidance::{Baseline, Generated, GuidanceError, Oracle};
use crate::verifier::{emit_rpn, tree_from_rpn, verify_rpn_proof};

const DB: &str = "
    $c ( ) -> wff |- $.
    $v ph ps ch $.
    wph $f wff ph $.
    wps $f wff ps $.
    wch $f wff ch $.
    wi $a wff ( ph -> ps ) $.
    ${
      ax-mp.1 $e |- ph $.
      ax-mp.2 $e |- ( ph -> ps ) $.
      ax-mp $a |- ps $.
    $}
    ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
    ax-2 $a |- ( ( ph -> ( ps -> ch ) ) -> ( ( ph -> ps ) -> ( ph -> ch ) ) ) $.
    ${
      hyp.1 $e |- ( ph -> ps ) $.
      hyp $p |- ( ph -> ps ) $= hyp.1 $.
    $}
    ${
      a1i.1 $e |- ph $.
      a1i $p |- ( ps -> ph ) $= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.
    $}
    ${
      mp2.1 $e |- ph $.
      mp2.2 $e |- ( ph -> ps ) $.
      mp2.3 $e |- ( ps -> ch ) $.
      mp2 $p |- ch $= wps wch wph wps mp2.1 mp2.2 ax-mp mp2.3 ax-mp $.
    $}
    th1 $p |- ( ph -> ( ph -> ph ) ) $= wph wph ax-1 $.
    id $p |- ( ph -> ph ) $=
      wph wph wph wi wi wph wph wi wph wph ax-1 wph wph wph wi wph wi wi
      wph wph wph wi wi wph wph wi wi wph wph wph wi ax-1 wph wph wph wi wph ax-2
      ax-mp ax-mp $.
    ${
      mpd.1 $e |- ph $.
      mpd.2 $e |- ( ph -> ps ) $.
      mpd $p |- ps $= wph wps mpd.1 mpd.2 ax-mp $.
    $}
    ${
      none.1 $e |- ph $.
      none $p |- ps $= ? $.
    $}
";

fn lib() -> Arc<Library> {
    Arc::new(Library::new(Arc::new(parse_database(DB).unwrap())))
}

fn ctx(lib: &Library, label: &str) -> Arc<Context> {
    Arc::new(lib.context(label).unwrap())
}

fn oracle_for(lib: &Arc<Library>, label: &str) -> Arc<dyn Guidance> {
    let c = ctx(lib, label);
    let labels = decompress_proof(lib.db(), c.db_position()).unwrap();
    let pt = tree_from_rpn(&labels, &c, lib).unwrap();
    Arc::new(Oracle::new(&pt, Baseline::uniform(lib.clone())))
}

fn params(passes: u64) -> SearchParams {
    SearchParams { pass_limit: passes, wall_clock_limit: Duration::from_secs(60), ..SearchParams::default() }
}

/// Statistics recomputed from the leaves up, independent of the
/// incremental bookkeeping.
fn recompute(tree: &SearchTree, a: RedId, out: &mut HashMap<RedId, (f64, u64, bool, bool)>) -> (f64, u64, bool, bool) {
    let r = tree.red(a);
    let mut x = r.y;
    let mut n = 1;
    let mut proven = r.hyp.is_some();
    for b in &r.children {
        let blue = tree.blue(*b);
        assert!(!blue.dead, "dead blue node {b} still attached");
        let (bx, bn, bp) = if blue.is_dummy() {
            (0.0, blue.n, false)
        } else {
            let stats: Vec<(RedId, (f64, u64, bool, bool))> =
                blue.children.iter().map(|c| (*c, recompute(tree, *c, out))).collect();
            let mut least: Option<(RedId, f64, u64)> = None;
            for only_unproven in [true, false] {
                for (c, (cx, cn, cp, _)) in &stats {
                    if only_unproven && *cp {
                        continue;
                    }
                    let avg = cx / *cn as f64;
                    if least.is_none_or(|(_, lx, ln)| avg < lx / ln as f64) {
                        least = Some((*c, *cx, *cn));
                    }
                }
                if least.is_some() {
                    break;
                }
            }
            assert_eq!(blue.least, least.map(|l| l.0), "least-promising child of {b}");
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
    (x, n, proven, dead)
}

fn check_stats(tree: &SearchTree) {
    let mut all = HashMap::new();
    recompute(tree, tree.root(), &mut all);
    for (id, (x, n, proven, dead)) in all {
        let r = tree.red(id);
        assert!((r.x - x).abs() < 1e-9, "x of {id}: {} vs {x}", r.x);
        assert_eq!(r.n, n, "n of {id}");
        assert_eq!(r.proven, proven, "proven of {id}");
        assert_eq!(r.dead, dead, "dead of {id}");
        assert!(r.children.len() <= child_cap(r.n, 3).max(1), "child cap at {id}");
    }
}

fn check_no_cycles(tree: &SearchTree) {
    for id in tree.live_reds() {
        let e = &tree.red(id).expr;
        for anc in tree.red_ancestors(id) {
            assert_ne!(&tree.red(anc).expr, e, "{id} repeats ancestor {anc}");
        }
    }
}

fn check_proof(lib: &Library, c: &Context, pt: &ProofTree) {
    verify_proof_tree(pt, c, lib).unwrap();
    let rpn = emit_rpn(pt, c, lib).unwrap();
    verify_rpn_proof(lib.db(), c.db_position(), &rpn).unwrap();
}

#[test]
fn hypothesis_root_is_proven_without_passes() {
    let lib = lib();
    let c = ctx(&lib, "hyp");
    let s = Search::new(lib.clone(), c.clone(), Arc::new(Baseline::uniform(lib.clone())), params(10));
    assert!(s.is_finished());
    let ok = s.run().unwrap();
    assert_eq!(ok.passes, 0);
    assert!(matches!(ok.proof, ProofTree::Hyp { .. }));
}

#[test]
fn last_step_proves_at_root_creation() {
    let lib = lib();
    for label in ["mpd", "th1"] {
        let c = ctx(&lib, label);
        let ok = prove(lib.clone(), c.clone(), Arc::new(Baseline::uniform(lib.clone())), params(10)).unwrap();
        assert_eq!(ok.passes, 0, "{label}");
        check_proof(&lib, &c, &ok.proof);
    }
    // two steps are needed here, so the rule does not fire
    let s = Search::new(lib.clone(), ctx(&lib, "a1i"), Arc::new(Baseline::uniform(lib.clone())), params(10));
    assert!(!s.is_finished());
}

#[test]
fn first_pass_visits_second_expands() {
    let lib = lib();
    let c = ctx(&lib, "mp2");
    let s = Search::new(lib.clone(), c, Arc::new(Baseline::uniform(lib.clone())), params(10));
    assert_eq!(s.step(), PassOutcome::FirstVisit);
    assert!(s.tree().red(RedId(0)).children.is_empty());
    assert!(matches!(s.step(), PassOutcome::Expanded(_)));
    let t = s.tree();
    assert_eq!(t.red(t.root()).children.len(), 1);
    check_stats(&t);
}

#[test]
fn oracle_guidance_proves() {
    let lib = lib();
    for label in ["mp2", "id"] {
        let c = ctx(&lib, label);
        let ok = prove(lib.clone(), c.clone(), oracle_for(&lib, label), params(200)).unwrap();
        check_proof(&lib, &c, &ok.proof);
        assert!(ok.passes <= 40, "{label}: {} passes", ok.passes);
    }
}

#[test]
fn statistics_match_recomputation_after_every_pass() {
    let lib = lib();
    let c = ctx(&lib, "none");
    let s = Search::new(lib.clone(), c, Arc::new(Baseline::uniform(lib.clone())), params(300));
    for _ in 0..300 {
        if s.step() == PassOutcome::Finished {
            break;
        }
        let t = s.tree();
        check_stats(&t);
        check_no_cycles(&t);
        // selection agrees with a naive argmax
        for id in t.live_reds() {
            let r = t.red(id);
            let mut best: Option<(BlueId, f64)> = None;
            for b in &r.children {
                let node = t.blue(*b);
                if node.proven {
                    continue;
                }
                let p = node.x / node.n as f64 + 0.5 * node.value / node.n as f64 + ((r.n as f64).ln() / node.n as f64).sqrt();
                if best.is_none_or(|(_, q)| p > q) {
                    best = Some((*b, p));
                }
            }
            assert_eq!(t.best_child(id, s.params()), best.map(|b| b.0));
        }
    }
    assert!(s.passes() > 100);
}

const CYCLE: &str = "
    $c ( ) -> wff |- $.
    $v ph ps $.
    wph $f wff ph $.
    wps $f wff ps $.
    wi $a wff ( ph -> ps ) $.
    ${
      i.1 $e |- ph $.
      i $a |- ph $.
    $}
    ${
      s.1 $e |- ( ph -> ps ) $.
      s $a |- ( ps -> ph ) $.
    $}
    goal $p |- ( ph -> ps ) $= ? $.
    bare $p |- ph $= ? $.
";

#[test]
fn cycles_and_empty_queues_kill_the_root() {
    let lib = Arc::new(Library::new(Arc::new(parse_database(CYCLE).unwrap())));
    for label in ["goal", "bare"] {
        let c = ctx(&lib, label);
        let s = Search::new(lib.clone(), c, Arc::new(Baseline::uniform(lib.clone())), params(1000));
        let err = s.run().unwrap_err();
        assert!(err.root_dead, "{label}: {err:?}");
        assert_eq!(err.reason, FailureReason::RootDead);
        let t = s.tree();
        check_no_cycles(&t);
        check_stats(&t);
        assert!(s.passes() < 20);
    }
}

/// Generation always runs into the token limit.
struct Truncating;

impl Guidance for Truncating {
    fn relevance(&self, _: &Context, _: &Tree, viable: &[ViableTheorem]) -> Result<Vec<f64>, GuidanceError> {
        Ok(vec![1.0 / viable.len() as f64; viable.len()])
    }

    fn generate(
        &self,
        _: &Context,
        _: &Tree,
        _: &TheoremFrame,
        _: &Substitution,
        _: usize,
        _: usize,
    ) -> Result<Generated, GuidanceError> {
        Ok(Generated { candidates: Vec::new(), truncated: true })
    }

    fn payoff(&self, _: &Context, _: &Tree) -> Result<f64, GuidanceError> {
        Err(GuidanceError::Timeout)
    }
}

#[test]
fn truncated_generation_adds_one_dummy_child() {
    let lib = lib();
    let c = ctx(&lib, "none");
    let s = Search::new(lib.clone(), c, Arc::new(Truncating), params(50));
    let err = s.run().unwrap_err();
    assert_eq!(err.reason, FailureReason::PassLimit);
    let t = s.tree();
    let root = t.red(t.root());
    let dummies: Vec<_> = root.children.iter().filter(|b| t.blue(**b).is_dummy()).collect();
    assert_eq!(dummies.len(), 1);
    assert!(root.has_dummy);
    assert!(!root.dead);
    assert!(t.blue(*dummies[0]).n > 1);
    check_stats(&t);
}

#[test]
fn trace_records_every_pass() {
    let lib = lib();
    let c = ctx(&lib, "mp2");
    let buf = Arc::new(Mutex::new(Vec::new()));
    struct Sink(Arc<Mutex<Vec<u8>>>);
    impl Write for Sink {
        fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(b);
            Ok(b.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }
    let s = Search::new(lib.clone(), c, oracle_for(&lib, "mp2"), params(100)).with_trace(Box::new(Sink(buf.clone())));
    s.run().unwrap();
    let text = String::from_utf8(buf.lock().unwrap().clone()).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len() as u64, s.passes());
    assert_eq!(lines[0]["action"], "first_visit");
    assert_eq!(lines[0]["pass"], 1);
    assert_eq!(lines[1]["action"], "expand");
}

#[test]
fn parallel_search_proves() {
    let lib = lib();
    for label in ["mp2", "id"] {
        let c = ctx(&lib, label);
        let p = SearchParams { threads: 4, ..params(2000) };
        let ok = prove(lib.clone(), c.clone(), oracle_for(&lib, label), p).unwrap();
        check_proof(&lib, &c, &ok.proof);
    }
    let c = ctx(&lib, "none");
    let p = SearchParams { threads: 4, ..params(400) };
    let s = Search::new(lib.clone(), c, Arc::new(Baseline::uniform(lib.clone())), p);
    let _ = s.run();
    let t = s.tree();
    check_stats(&t);
    assert!(t.blue_ids().all(|b| t.blue(b).in_flight == 0));
}

#[test]
fn prune_prefers_the_smaller_proof() {
    let lib = lib();
    let c = ctx(&lib, "mp2");
    let s = Search::new(lib.clone(), c.clone(), Arc::new(Baseline::uniform(lib.clone())), params(3000));
    if let Ok(ok) = s.run() {
        check_proof(&lib, &c, &ok.proof);
        assert!(ok.proof.red_count() <= 7);
    }
}
