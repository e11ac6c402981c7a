use std::collections::HashSet;
use std::path::Path;

use super::*;
use crate::database::parse_database;
use crate::grammar::{dummy_counts, Special, TokenSequence, Vocabulary};
use crate::guidance::{Baseline, Generated, Oracle};

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

/// Every proposition in the training split.
fn all_train(lib: &Library) -> Splits {
    Splits { assignment: lib.db().provable_propositions().map(|id| (id, Split::Train)).collect() }
}

struct Failing;

impl Guidance for Failing {
    fn relevance(&self, _: &Context, _: &Tree, _: &[crate::guidance::ViableTheorem]) -> Result<Vec<f64>, GuidanceError> {
        Err(GuidanceError::Remote("down".into()))
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
        Err(GuidanceError::Remote("down".into()))
    }
    fn payoff(&self, _: &Context, _: &Tree) -> Result<f64, GuidanceError> {
        Err(GuidanceError::Remote("down".into()))
    }
}

fn steps_for<'a>(steps: &'a [ProofStep], label: &str) -> Vec<&'a ProofStep> {
    steps.iter().filter(|s| s.context.label() == label).collect()
}

#[test]
fn split_sizes_follow_the_reference_proportions() {
    assert_eq!(split_sizes(27217), (21786, 2711, 2720));
    assert_eq!(split_sizes(0), (0, 0, 0));
    let (tr, va, te) = split_sizes(3000);
    assert_eq!((va, te), (299, 300));
    assert_eq!(tr + va + te, 3000);
}

#[test]
fn split_is_disjoint_exhaustive_and_seeded() {
    let lib = lib();
    let a = split_propositions(&lib, 7);
    let b = split_propositions(&lib, 7);
    assert_eq!(a, b);
    let props: Vec<StmtId> = lib.db().provable_propositions().collect();
    assert_eq!(a.len(), props.len());
    let mut seen = HashSet::new();
    for split in Split::ALL {
        for id in a.members(split) {
            assert!(seen.insert(id));
        }
    }
    assert_eq!(seen.len(), props.len());
}

#[test]
fn hand_counted_steps() {
    let lib = lib();
    let ex = extract_steps(&lib, &all_train(&lib), 1);
    let count = |l| steps_for(&ex.steps, l).len();
    assert_eq!(count("hyp"), 0);
    assert_eq!(count("th1"), 1);
    assert_eq!(count("mpd"), 1);
    assert_eq!(count("a1i"), 2);
    assert_eq!(count("mp2"), 2);
    assert_eq!(count("id"), 5);
    assert_eq!(ex.steps.len(), 11);
    assert_eq!(ex.skipped.len(), 1);
    assert_eq!(lib.db().label(ex.skipped[0].0), "none");
    let generative = ex.steps.iter().filter(|s| !s.theorem.unconstrained.is_empty()).count();
    assert_eq!(generative, 6);
    // threads do not change the result
    let par = extract_steps(&lib, &all_train(&lib), 4);
    let key = |s: &ProofStep| (s.context.label().to_string(), s.expr.clone(), s.theorem.id, s.subst.clone());
    assert_eq!(ex.steps.iter().map(key).collect::<Vec<_>>(), par.steps.iter().map(key).collect::<Vec<_>>());
}

#[test]
fn steps_replay_and_close_up() {
    let lib = lib();
    let ex = extract_steps(&lib, &all_train(&lib), 1);
    for (k, s) in ex.steps.iter().enumerate() {
        assert!(replay(s));
        for h in s.hyp_exprs() {
            let later = ex.steps[k + 1..].iter().any(|t| Arc::ptr_eq(&t.context, &s.context) && t.expr == h);
            assert!(later || s.context.hyps().contains(&h), "open hypothesis in {}", s.context.label());
        }
    }
    let mut broken = ex.steps[0].clone();
    broken.expr = ex.steps.iter().find(|s| s.expr != broken.expr).unwrap().expr.clone();
    assert!(!replay(&broken));
}

#[test]
fn failing_guidance_yields_positives_only() {
    let lib = lib();
    let ex = extract_steps(&lib, &all_train(&lib), 1);
    let payoff = make_payoff_examples(&lib, &ex.steps, &Failing, 5, 75, 1);
    assert!(payoff.iter().all(|p| p.positive));
    // id proves ( ph -> ph ) through five steps with distinct expressions
    let id: Vec<_> = payoff.iter().filter(|p| p.context.label() == "id").collect();
    assert_eq!(id.len(), 5);
}

#[test]
fn negatives_never_equal_positives_or_hypotheses() {
    let lib = lib();
    let ex = extract_steps(&lib, &all_train(&lib), 1);
    let g = Baseline::uniform(lib.clone());
    let payoff = make_payoff_examples(&lib, &ex.steps, &g, 5, 75, 2);
    assert!(payoff.iter().any(|p| !p.positive));
    for neg in payoff.iter().filter(|p| !p.positive) {
        assert!(!neg.context.hyps().contains(&neg.expr));
        let clash = payoff.iter().any(|p| p.positive && Arc::ptr_eq(&p.context, &neg.context) && p.expr == neg.expr);
        assert!(!clash);
    }
    let mut keys = HashSet::new();
    for p in &payoff {
        assert!(keys.insert((p.context.label().to_string(), p.expr.clone())), "duplicate example");
    }
}

#[test]
fn true_pair_hypotheses_are_filtered() {
    let lib = lib();
    let ex = extract_steps(&lib, &all_train(&lib), 1);
    let mp2: Vec<ProofStep> = steps_for(&ex.steps, "mp2").into_iter().cloned().collect();
    let ctx = mp2[0].context.clone();
    let labels = decompress_proof(lib.db(), ctx.db_position()).unwrap();
    let pt = tree_from_rpn(&labels, &ctx, &lib).unwrap();
    let oracle = Oracle::new(&pt, Baseline::uniform(lib.clone()));
    for s in &mp2 {
        let pairs = top_pairs(&lib, &oracle, &ctx, &s.expr, 2, 5, 75).unwrap();
        assert_eq!(pairs[0].0.id, s.theorem.id);
        assert_eq!(pairs[0].1, s.subst);
    }
    let payoff = make_payoff_examples(&lib, &mp2, &oracle, 5, 75, 1);
    for s in &mp2 {
        for h in s.hyp_exprs() {
            assert!(!payoff.iter().any(|p| !p.positive && p.expr == h));
        }
    }
}

fn emit_to(dir: &Path, seed: u64) -> (Manifest, Vec<ProofStep>) {
    let lib = lib();
    let ex = extract_steps(&lib, &all_train(&lib), 1);
    let payoff = make_payoff_examples(&lib, &ex.steps, &Baseline::uniform(lib.clone()), 5, 75, 1);
    let vocab = Vocabulary::build(lib.grammar(), &dummy_counts(lib.db()));
    (emit_tokenized(&lib, &ex.steps, &payoff, &vocab, seed, dir).unwrap(), ex.steps)
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn equal_seeds_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = emit_to(a.path(), 11);
    let (mb, _) = emit_to(b.path(), 11);
    assert_eq!(ma, mb);
    for name in ma.files.keys() {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    assert_eq!(ma.steps.train, 11);
    assert_eq!(ma.generative.train, 6);
}

#[test]
fn seeds_change_dummies_not_lengths() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_to(a.path(), 1);
    emit_to(b.path(), 2);
    let ra: Vec<RelevanceRecord> = read_lines(&a.path().join("relevance.train.jsonl"));
    let rb: Vec<RelevanceRecord> = read_lines(&b.path().join("relevance.train.jsonl"));
    assert_eq!(ra.len(), rb.len());
    let mut differ = false;
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x.goal.len(), y.goal.len());
        assert_eq!(x.goal.features, y.goal.features);
        differ |= x.goal.tokens != y.goal.tokens;
    }
    assert!(differ);
}

#[test]
fn separators_and_markers() {
    let dir = tempfile::tempdir().unwrap();
    emit_to(dir.path(), 3);
    let count = |seq: &TokenSequence, s: Special| seq.tokens.iter().filter(|t| **t == s.id()).count();
    let gen: Vec<GenerativeRecord> = read_lines(&dir.path().join("generative.train.jsonl"));
    for r in &gen {
        assert_eq!(r.theorem, "ax-mp");
        assert_eq!(r.variables, ["ph"]);
        assert_eq!(r.conditioning.len(), 1);
        // two hypotheses: one EOH between them, one EOS before the assertion
        assert_eq!(count(&r.conditioning[0], Special::Eoh), 1);
        assert_eq!(count(&r.conditioning[0], Special::Eos), 1);
        assert_eq!(count(&r.conditioning[0], Special::Target), 2);
        assert_eq!(r.targets.len(), 1);
    }
    let rel: Vec<RelevanceRecord> = read_lines(&dir.path().join("relevance.train.jsonl"));
    for r in rel.iter().filter(|r| r.context == "id" || r.context == "th1") {
        assert_eq!(count(&r.goal, Special::Eoh), 0);
        assert_eq!(r.goal.tokens[0], Special::Eos.id());
        assert!(r.viable.contains(&r.theorem));
    }
    for r in rel.iter().filter(|r| r.context == "mp2") {
        assert_eq!(count(&r.goal, Special::Eoh), 2);
        assert_eq!(count(&r.goal, Special::Eos), 1);
    }
}

#[test]
fn audit_finds_nothing_in_a_clean_extraction_and_flags_moved_contexts() {
    let lib = lib();
    let splits = split_propositions(&lib, 5);
    let dir = tempfile::tempdir().unwrap();
    let config = ExtractConfig {
        seed: 5,
        threads: 2,
        beam_width: 5,
        token_limit: 75,
        guidance: "baseline".into(),
        snapshot_sha256: sha256_hex(DB.as_bytes()),
    };
    let m = extract(&lib, &splits, &Baseline::uniform(lib.clone()), &config, dir.path()).unwrap();
    assert!(audit_split(dir.path(), &lib, &splits).unwrap().is_empty());
    assert_eq!(m.propositions.total(), 7);
    assert_eq!(m.skipped, ["none"]);
    let written: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(written, m);
    // declare every proposition a test proposition: the training files are now contaminated
    let moved = Splits { assignment: splits.iter().map(|(id, _)| (id, Split::Test)).collect() };
    let bad = audit_split(dir.path(), &lib, &moved).unwrap();
    assert_eq!(bad.len(), m.steps.train + m.generative.train + m.payoff_positive.train + m.payoff_negative.train);
}
