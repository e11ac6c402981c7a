use std::sync::Arc;

use super::*;
use crate::database::{decompress_proof, parse_database};

const DB: &str = "
    $c ( ) -> wff |- set A. $.
    $v ph ps ch x y $.
    wph $f wff ph $.
    wps $f wff ps $.
    wch $f wff ch $.
    vx $f set x $.
    vy $f set y $.
    wi $a wff ( ph -> ps ) $.
    wal $a wff A. x ph $.
    wi2 $p wff ( ph -> ( ps -> ch ) ) $= wph wps wch wi wi $.
    ${
      ax-mp.1 $e |- ph $.
      ax-mp.2 $e |- ( ph -> ps ) $.
      ax-mp $a |- ps $.
    $}
    ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
    ${
      $d x ph $.
      ax-5 $a |- ( ph -> A. x ph ) $.
    $}
    ${
      mp2b.1 $e |- ph $.
      mp2b.2 $e |- ( ph -> ps ) $.
      mp2b.3 $e |- ( ps -> ch ) $.
      mp2b $p |- ch $= ( ax-mp ) BCABDEGFG $.
    $}
    ${
      a1i.1 $e |- ph $.
      a1i $p |- ( ps -> ph ) $= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.
    $}
    ${
      leaf.1 $e |- ph $.
      leaf $p |- ph $= leaf.1 $.
    $}
    ${
      syn.1 $e |- ( ph -> ( ps -> ch ) ) $.
      syn $p |- ( ph -> ( ps -> ch ) ) $= syn.1 $.
    $}
    ${
      usesyn.1 $e |- ( ( ph -> ( ps -> ph ) ) -> ch ) $.
      usesyn $p |- ch $= wph wps wph wi2 wch wph wps ax-1 usesyn.1 ax-mp $.
    $}
    ${
      $d x ph $.
      dv $p |- ( ph -> A. x ph ) $= wph vx ax-5 $.
    $}
    ${
      nodv $p |- ( ph -> A. x ph ) $= wph vx ax-5 $.
    $}
";

fn lib() -> Library {
    Library::new(Arc::new(parse_database(DB).unwrap()))
}

fn proof(lib: &Library, label: &str) -> Vec<StmtId> {
    decompress_proof(lib.db(), lib.db().lookup(label).unwrap()).unwrap()
}

#[test]
fn rpn_verification() {
    let lib = lib();
    let db = lib.db();
    for label in ["wi2", "mp2b", "a1i", "leaf", "syn", "usesyn", "dv"] {
        let id = db.lookup(label).unwrap();
        verify_proposition(db, id).unwrap_or_else(|e| panic!("{label}: {e}"));
    }
    let nodv = db.lookup("nodv").unwrap();
    assert!(matches!(verify_proposition(db, nodv), Err(VerifyError::Disjoint { .. })));
}

#[test]
fn corrupted_rpn_proofs_fail() {
    let lib = lib();
    let db = lib.db();
    let id = db.lookup("a1i").unwrap();
    let mut labels = proof(&lib, "a1i");
    assert!(verify_rpn_proof(db, id, &[]).is_err());
    labels.remove(2);
    assert!(verify_rpn_proof(db, id, &labels).is_err());
    let mut swapped = proof(&lib, "a1i");
    swapped.swap(0, 1);
    assert!(verify_rpn_proof(db, id, &swapped).is_err());
}

#[test]
fn forward_and_out_of_scope_references_fail() {
    let lib = lib();
    let db = lib.db();
    let leaf = db.lookup("leaf").unwrap();
    let a1i = db.lookup("a1i").unwrap();
    assert!(matches!(
        verify_rpn_proof(db, a1i, &[db.lookup("leaf.1").unwrap()]),
        Err(VerifyError::ForwardReference { .. })
    ));
    assert!(matches!(
        verify_rpn_proof(db, leaf, &[db.lookup("a1i.1").unwrap()]),
        Err(VerifyError::InactiveHypothesis { .. })
    ));
}

#[test]
fn mp2b_tree_applies_ax_mp_twice() {
    let lib = lib();
    let ctx = lib.context("mp2b").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "mp2b"), &ctx, &lib).unwrap();
    let ax_mp = lib.db().lookup("ax-mp").unwrap();
    let steps: Vec<StmtId> = pt
        .nodes()
        .iter()
        .filter_map(|n| match n {
            ProofTree::Step { theorem, .. } => Some(*theorem),
            ProofTree::Hyp { .. } => None,
        })
        .collect();
    assert_eq!(steps, vec![ax_mp, ax_mp]);
    verify_proof_tree(&pt, &ctx, &lib).unwrap();
}

#[test]
fn single_step_tree_has_depth_two() {
    let lib = lib();
    let ctx = lib.context("a1i").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "a1i"), &ctx, &lib).unwrap();
    assert_eq!(pt.red_count(), 3);
    assert!(matches!(pt.children()[0], ProofTree::Hyp { .. }));
    assert!(matches!(pt.children()[1], ProofTree::Step { .. }));
    verify_proof_tree(&pt, &ctx, &lib).unwrap();
}

#[test]
fn leaf_tree_emits_hypothesis_label() {
    let lib = lib();
    let ctx = lib.context("leaf").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "leaf"), &ctx, &lib).unwrap();
    assert!(matches!(pt, ProofTree::Hyp { .. }));
    verify_proof_tree(&pt, &ctx, &lib).unwrap();
    let rpn = emit_rpn(&pt, &ctx, &lib).unwrap();
    assert_eq!(rpn, vec![lib.db().lookup("leaf.1").unwrap()]);
}

#[test]
fn emit_round_trip_verifies() {
    let lib = lib();
    for label in ["mp2b", "a1i", "usesyn", "dv"] {
        let ctx = lib.context(label).unwrap();
        let pt = tree_from_rpn(&proof(&lib, label), &ctx, &lib).unwrap();
        let rpn = emit_rpn(&pt, &ctx, &lib).unwrap();
        verify_rpn_proof(lib.db(), ctx.db_position(), &rpn).unwrap_or_else(|e| panic!("{label}: {e}"));
        let again = tree_from_rpn(&rpn, &ctx, &lib).unwrap();
        assert_eq!(again, pt);
    }
}

#[test]
fn syntax_theorem_is_folded_into_substitution() {
    let lib = lib();
    let ctx = lib.context("usesyn").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "usesyn"), &ctx, &lib).unwrap();
    // wi2 disappears; only ax-mp and ax-1 remain as blue nodes
    assert_eq!(pt.red_count(), 3);
}

#[test]
fn corrupted_tree_reports_path() {
    let lib = lib();
    let ctx = lib.context("a1i").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "a1i"), &ctx, &lib).unwrap();
    let ProofTree::Step { expr, theorem, subst, mut children } = pt else { panic!() };
    if let ProofTree::Step { subst: inner, .. } = &mut children[1] {
        let ps = lib.db().symbol("ps").unwrap();
        let ph = inner.get(lib.db().symbol("ph").unwrap()).unwrap().clone();
        inner.insert(ps, ph);
    }
    let bad = ProofTree::Step { expr, theorem, subst, children };
    let err = verify_proof_tree(&bad, &ctx, &lib).unwrap_err();
    assert_eq!(err.path, vec![1]);
    assert_eq!(err.kind, TreeErrorKind::WrongResult);
}

#[test]
fn hypothesis_leaf_outside_context_is_rejected() {
    let lib = lib();
    let ctx = lib.context("a1i").unwrap();
    let bad = ProofTree::Hyp { expr: ctx.assertion().clone(), label: lib.db().lookup("a1i.1").unwrap() };
    let err = verify_proof_tree(&bad, &ctx, &lib).unwrap_err();
    assert_eq!(err.kind, TreeErrorKind::LeafNotHypothesis);
}

#[test]
fn disjoint_violation_in_tree() {
    let lib = lib();
    let ctx = lib.context("dv").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "dv"), &ctx, &lib).unwrap();
    verify_proof_tree(&pt, &ctx, &lib).unwrap();
    let ctx2 = lib.context("nodv").unwrap();
    let err = verify_proof_tree(&pt, &ctx2, &lib).unwrap_err();
    assert_eq!(err.kind, TreeErrorKind::Disjoint);
}

#[test]
fn appended_block_reverifies() {
    let lib = lib();
    let ctx = lib.context("mp2b").unwrap();
    let pt = tree_from_rpn(&proof(&lib, "mp2b"), &ctx, &lib).unwrap();
    let rpn = emit_rpn(&pt, &ctx, &lib).unwrap();
    let block = proof_block(lib.db(), &ctx, &rpn, "mp2b.auto");
    let source = format!("{DB}\n{block}");
    let db2 = parse_database(&source).unwrap();
    let id = db2.lookup("mp2b.auto").unwrap();
    verify_proposition(&db2, id).unwrap();
    let dv = lib.context("dv").unwrap();
    let rpn = emit_rpn(&tree_from_rpn(&proof(&lib, "dv"), &dv, &lib).unwrap(), &dv, &lib).unwrap();
    let block = proof_block(lib.db(), &dv, &rpn, "dv.auto");
    assert!(block.contains("$d"));
    let db3 = parse_database(&format!("{DB}\n{block}")).unwrap();
    verify_proposition(&db3, db3.lookup("dv.auto").unwrap()).unwrap();
}
