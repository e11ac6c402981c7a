use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mmprove::database::parse_database;
use mmprove::frame::Library;
use mmprove::grammar::Vocabulary;
use mmprove::guidance::wire::{serve_lines, Candidate, GeneratePayload, GenerateResult, Method, Request, Response};
use mmprove::guidance::{Guidance, GuidanceError, Remote};
use mmprove::unify::{check_disjoint, match_assertion, viable_theorems};

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
    ${
      ax-mp.1 $e |- ph $.
      ax-mp.2 $e |- ( ph -> ps ) $.
      ax-mp $a |- ps $.
    $}
    ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
    ${
      t.1 $e |- ( ps -> ch ) $.
      t.2 $e |- ps $.
      t $p |- ch $= wps wch t.2 t.1 ax-mp $.
    $}
";

fn setup() -> (Arc<Library>, Arc<Vocabulary>) {
    let db = Arc::new(parse_database(DB).unwrap());
    let lib = Arc::new(Library::new(db.clone()));
    let counts = BTreeMap::from([(db.symbol("wff").unwrap(), 4), (db.symbol("set").unwrap(), 2)]);
    let vocab = Arc::new(Vocabulary::build(lib.grammar(), &counts));
    (lib, vocab)
}

/// Listen on a loopback port and hand the first connection to `serve`.
fn stub<F>(serve: F) -> String
where
    F: FnOnce(TcpStream) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        serve(stream);
    });
    addr
}

fn connect(addr: &str, timeout: Duration) -> (Remote, Arc<Library>) {
    let (lib, vocab) = setup();
    (Remote::connect(addr, lib.clone(), vocab, timeout).unwrap(), lib)
}

#[test]
fn payoff_round_trip_is_a_probability() {
    let addr = stub(|s| {
        let r = BufReader::new(s.try_clone().unwrap());
        serve_lines(r, s, |req| {
            assert_eq!(req.method, Method::Payoff);
            let n = req.payload["goal"]["tokens"].as_array().unwrap().len();
            Ok(serde_json::json!({"payoff": 1.0 / (1.0 + n as f64)}))
        })
        .unwrap();
    });
    let (remote, lib) = connect(&addr, Duration::from_secs(5));
    let ctx = lib.context("t").unwrap();
    let p = remote.payoff(&ctx, ctx.assertion()).unwrap();
    assert!((0.0..=1.0).contains(&p));
    // hypotheses of 3 and 1 tokens, one EOH, one EOS, one goal token
    assert!((p - 1.0 / 8.0).abs() < 1e-12);
}

#[test]
fn unknown_response_id_is_a_protocol_violation() {
    let addr = stub(|s| {
        let mut w = s.try_clone().unwrap();
        let mut lines = BufReader::new(s).lines();
        let req: Request = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
        let resp = Response::ok(req.id + 1000, serde_json::json!({"payoff": 0.5}));
        writeln!(w, "{}", serde_json::to_string(&resp).unwrap()).unwrap();
        let _ = lines.next();
    });
    let (remote, lib) = connect(&addr, Duration::from_secs(5));
    let ctx = lib.context("t").unwrap();
    let err = remote.payoff(&ctx, ctx.assertion()).unwrap_err();
    assert!(matches!(err, GuidanceError::ProtocolViolation(_)), "{err:?}");
}

#[test]
fn concurrent_requests_are_matched_by_id() {
    let addr = stub(|s| {
        let mut w = s.try_clone().unwrap();
        let mut lines = BufReader::new(s).lines();
        let mut batch: Vec<Request> = Vec::new();
        for _ in 0..8 {
            batch.push(serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap());
        }
        // answer in reverse, echoing the goal length so callers can check
        for req in batch.iter().rev() {
            let n = req.payload["goal"]["tokens"].as_array().unwrap().len();
            let resp = Response::ok(req.id, serde_json::json!({"payoff": 1.0 / n as f64}));
            writeln!(w, "{}", serde_json::to_string(&resp).unwrap()).unwrap();
        }
    });
    let (remote, lib) = connect(&addr, Duration::from_secs(10));
    let remote = Arc::new(remote);
    let ctx = Arc::new(lib.context("t").unwrap());
    let handles: Vec<_> = (0..8)
        .map(|k| {
            let (remote, ctx) = (remote.clone(), ctx.clone());
            thread::spawn(move || {
                let goal = if k % 2 == 0 { ctx.assertion().clone() } else { ctx.hyps()[0].clone() };
                let expect = if k % 2 == 0 { 1.0 / 7.0 } else { 1.0 / 9.0 };
                let got = remote.payoff(&ctx, &goal).unwrap();
                assert!((got - expect).abs() < 1e-12, "request {k}: {got} vs {expect}");
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn silent_service_times_out() {
    let addr = stub(|s| {
        let mut lines = BufReader::new(s).lines();
        let _ = lines.next();
        thread::sleep(Duration::from_millis(500));
    });
    let (remote, lib) = connect(&addr, Duration::from_millis(100));
    let ctx = lib.context("t").unwrap();
    assert_eq!(remote.payoff(&ctx, ctx.assertion()).unwrap_err(), GuidanceError::Timeout);
}

#[test]
fn closed_service_is_a_connection_error() {
    let addr = stub(drop);
    let (remote, lib) = connect(&addr, Duration::from_secs(5));
    let ctx = lib.context("t").unwrap();
    let err = remote.payoff(&ctx, ctx.assertion()).unwrap_err();
    assert!(matches!(err, GuidanceError::Connection(_)), "{err:?}");
    assert!(matches!(
        Remote::connect("127.0.0.1:1", setup().0, setup().1, Duration::from_secs(1)),
        Err(GuidanceError::Connection(_))
    ));
}

#[test]
fn relevance_is_normalized() {
    let addr = stub(|s| {
        let r = BufReader::new(s.try_clone().unwrap());
        serve_lines(r, s, |req| {
            let n = req.payload["theorems"].as_array().unwrap().len();
            Ok(serde_json::json!({"probabilities": (1..=n).map(|k| k as f64).collect::<Vec<_>>()}))
        })
        .unwrap();
    });
    let (remote, lib) = connect(&addr, Duration::from_secs(5));
    let ctx = lib.context("t").unwrap();
    let viable = viable_theorems(ctx.assertion(), &ctx, &lib);
    let p = remote.relevance(&ctx, ctx.assertion(), &viable).unwrap();
    assert_eq!(p.len(), viable.len());
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn generated_tokens_are_decoded_and_revalidated() {
    let (lib, vocab) = setup();
    let db = lib.db().clone();
    let wff_dummies = vocab.dummies(db.symbol("wff").unwrap()).to_vec();
    let wi = vocab.lookup("wi").unwrap();
    let wal = vocab.lookup("wal").unwrap();
    let set_dummy = vocab.dummies(db.symbol("set").unwrap())[0];
    let addr = stub(move |s| {
        let r = BufReader::new(s.try_clone().unwrap());
        serve_lines(r, s, |req| {
            let p: GeneratePayload = serde_json::from_value(req.payload.clone()).map_err(|e| e.to_string())?;
            assert_eq!(p.variables, ["ph"]);
            assert_eq!(p.conditioning.len(), 1);
            let target = p.conditioning[0].tokens.iter().filter(|t| **t == 4).count();
            assert_eq!(target, 2);
            let c = |images: Vec<Vec<u32>>, probability| Candidate { images, probability };
            Ok(serde_json::to_value(GenerateResult {
                candidates: vec![
                    // the true hypothesis `ps`, first variable in the context
                    c(vec![vec![wff_dummies[0]]], 0.6),
                    // malformed: truncated tree
                    c(vec![vec![wi, wff_dummies[0]]], 0.2),
                    // `A. x ps` introduces a fresh set variable: allowed
                    c(vec![vec![wal, set_dummy, wff_dummies[0]]], 0.1),
                    // `( ps -> ch )`
                    c(vec![vec![wi, wff_dummies[0], wff_dummies[1]]], 0.1),
                ],
            })
            .unwrap())
        })
        .unwrap();
    });
    let remote = Remote::connect(&addr, lib.clone(), vocab, Duration::from_secs(5)).unwrap();
    let ctx = lib.context("t").unwrap();
    let frame = lib.frame_by_label("ax-mp").unwrap().clone();
    let s = match_assertion(&frame.assertion, ctx.assertion()).unwrap();
    let g = remote.generate(&ctx, ctx.assertion(), &frame, &s, 5, 75).unwrap();
    assert_eq!(g.candidates.len(), 3);
    assert!((g.candidates.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() < 1e-9);
    let ph = db.symbol("ph").unwrap();
    let first = lib.grammar().render_text(db.symbol("wff").unwrap(), g.candidates[0].0.get(ph).unwrap());
    assert_eq!(first, "wff ps");
    for (s, _) in &g.candidates {
        assert!(check_disjoint(s, &frame, &ctx));
    }
    // a token limit of 2 drops the 3-token images
    let g = remote.generate(&ctx, ctx.assertion(), &frame, &s, 5, 2).unwrap();
    assert_eq!(g.candidates.len(), 1);
    assert_eq!(g.candidates[0].1, 1.0);
}
