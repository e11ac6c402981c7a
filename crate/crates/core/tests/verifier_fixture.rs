mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmprove::database::decompress_proof;
use mmprove::verifier::{emit_rpn, tree_from_rpn, verify_database, verify_proof_tree, verify_rpn_proof};

#[test]
fn fixture_agrees_with_reference_verdicts() {
    for (mm, verdicts) in [
        ("setmm-slice.mm", "setmm-slice.verdicts"),
        ("setmm-slice-corrupt.mm", "setmm-slice-corrupt.verdicts"),
    ] {
        let db = common::load_db(mm);
        let expected = common::load_verdicts(verdicts);
        let got = verify_database(&db);
        assert_eq!(got.len(), expected.len(), "{mm}");
        for ((id, res), (label, ok)) in got.iter().zip(&expected) {
            assert_eq!(db.label(*id), label);
            assert_eq!(res.is_ok(), *ok, "{mm}: {label}: {res:?}");
        }
    }
}

#[test]
fn deleting_a_step_breaks_every_sampled_proof() {
    let db = common::load_db("setmm-slice.mm");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut props: Vec<_> = db.provable_propositions().collect();
    props.shuffle(&mut rng);
    for id in props.into_iter().take(100) {
        let mut labels = decompress_proof(&db, id).unwrap();
        if labels.len() < 2 {
            continue;
        }
        let k = labels.len() / 2;
        labels.remove(k);
        assert!(verify_rpn_proof(&db, id, &labels).is_err(), "{}", db.label(id));
    }
}

#[test]
fn proof_trees_of_sampled_propositions_verify_and_round_trip() {
    let lib = common::load_library("setmm-slice.mm");
    let db = lib.db();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut props: Vec<_> = db.provable_propositions().collect();
    props.shuffle(&mut rng);
    for id in props.into_iter().take(200) {
        let ctx = lib.context_at(id).unwrap();
        let labels = decompress_proof(db, id).unwrap();
        let pt = tree_from_rpn(&labels, &ctx, &lib).unwrap();
        verify_proof_tree(&pt, &ctx, &lib).unwrap();
        let rpn = emit_rpn(&pt, &ctx, &lib).unwrap();
        verify_rpn_proof(db, id, &rpn).unwrap();
        assert_eq!(tree_from_rpn(&rpn, &ctx, &lib).unwrap(), pt);
    }
}
