//! Client for a guidance service speaking the wire protocol.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::wire::{
    encode_conditioning, encode_goal, encode_theorem, ContextRenaming, GeneratePayload, GenerateResult, Method,
    PayoffPayload, PayoffResult, RelevancePayload, RelevanceResult, Request, Response,
};
use super::{admissible, normalize, Generated, Guidance, GuidanceError, ViableTheorem};
use crate::frame::{Context, Library, TheoremFrame};
use crate::grammar::{Tree, Vocabulary};
use crate::unify::Substitution;

type Reply = Result<Value, GuidanceError>;

struct Shared {
    pending: Mutex<HashMap<u64, Sender<Reply>>>,
    closed: Mutex<Option<GuidanceError>>,
}

impl Shared {
    fn fail_all(&self, err: GuidanceError) {
        for (_, tx) in self.pending.lock().expect("pending lock").drain() {
            let _ = tx.send(Err(err.clone()));
        }
    }
}

/// Guidance answered by a remote service. Concurrent queries share one
/// connection and are matched to responses by id.
pub struct Remote {
    lib: Arc<Library>,
    vocab: Arc<Vocabulary>,
    writer: Mutex<Box<dyn Write + Send>>,
    shared: Arc<Shared>,
    next_id: AtomicU64,
    timeout: Duration,
}

impl Remote {
    /// Connect to `endpoint`: `host:port`, or `unix:<path>` for a local
    /// socket.
    pub fn connect(
        endpoint: &str,
        lib: Arc<Library>,
        vocab: Arc<Vocabulary>,
        timeout: Duration,
    ) -> Result<Remote, GuidanceError> {
        let conn = |e: std::io::Error| GuidanceError::Connection(format!("{endpoint}: {e}"));
        let (reader, writer): (Box<dyn Read + Send>, Box<dyn Write + Send>) = match endpoint.strip_prefix("unix:") {
            #[cfg(unix)]
            Some(path) => {
                let s = std::os::unix::net::UnixStream::connect(path).map_err(conn)?;
                (Box::new(s.try_clone().map_err(conn)?), Box::new(s))
            }
            #[cfg(not(unix))]
            Some(_) => return Err(GuidanceError::Connection("local sockets are unsupported".into())),
            None => {
                let s = TcpStream::connect(endpoint).map_err(conn)?;
                s.set_nodelay(true).map_err(conn)?;
                (Box::new(s.try_clone().map_err(conn)?), Box::new(s))
            }
        };
        Ok(Remote::from_streams(reader, writer, lib, vocab, timeout))
    }

    /// Speak the protocol over an already open byte stream pair.
    pub fn from_streams(
        reader: Box<dyn Read + Send>,
        writer: Box<dyn Write + Send>,
        lib: Arc<Library>,
        vocab: Arc<Vocabulary>,
        timeout: Duration,
    ) -> Remote {
        let shared = Arc::new(Shared { pending: Mutex::new(HashMap::new()), closed: Mutex::new(None) });
        let bg = shared.clone();
        thread::spawn(move || read_loop(BufReader::new(reader), &bg));
        Remote { lib, vocab, writer: Mutex::new(writer), shared, next_id: AtomicU64::new(1), timeout }
    }

    fn call<P: Serialize, R: DeserializeOwned>(&self, method: Method, payload: &P) -> Result<R, GuidanceError> {
        if let Some(e) = self.shared.closed.lock().expect("closed lock").clone() {
            return Err(e);
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let payload = serde_json::to_value(payload).map_err(|e| GuidanceError::Encoding(e.to_string()))?;
        let mut line = serde_json::to_vec(&Request { id, method, payload }).expect("serializable request");
        line.push(b'\n');
        let (tx, rx) = channel();
        self.shared.pending.lock().expect("pending lock").insert(id, tx);
        let sent = {
            let mut w = self.writer.lock().expect("writer lock");
            w.write_all(&line).and_then(|_| w.flush())
        };
        if let Err(e) = sent {
            self.shared.pending.lock().expect("pending lock").remove(&id);
            return Err(GuidanceError::Connection(e.to_string()));
        }
        let value = match rx.recv_timeout(self.timeout) {
            Ok(reply) => reply?,
            Err(RecvTimeoutError::Timeout) => {
                self.shared.pending.lock().expect("pending lock").remove(&id);
                return Err(GuidanceError::Timeout);
            }
            Err(RecvTimeoutError::Disconnected) => return Err(GuidanceError::Connection("connection closed".into())),
        };
        serde_json::from_value(value).map_err(|e| GuidanceError::ProtocolViolation(format!("bad {method:?} result: {e}")))
    }

    fn renaming(&self, ctx: &Context, a: &Tree) -> Result<ContextRenaming, GuidanceError> {
        ContextRenaming::new(ctx, a, &self.vocab).map_err(|e| GuidanceError::Encoding(e.to_string()))
    }
}

fn read_loop<R: BufRead>(reader: R, shared: &Shared) {
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Response>(&line) {
            Ok(r) => r,
            Err(e) => {
                shared.fail_all(GuidanceError::ProtocolViolation(format!("malformed response: {e}")));
                continue;
            }
        };
        let tx = shared.pending.lock().expect("pending lock").remove(&resp.id);
        let Some(tx) = tx else {
            shared.fail_all(GuidanceError::ProtocolViolation(format!("response for unknown id {}", resp.id)));
            continue;
        };
        let reply = match (resp.result, resp.error) {
            (_, Some(e)) => Err(GuidanceError::Remote(e)),
            (Some(v), None) => Ok(v),
            (None, None) => Err(GuidanceError::ProtocolViolation("response carries neither result nor error".into())),
        };
        let _ = tx.send(reply);
    }
    let err = GuidanceError::Connection("connection closed".into());
    *shared.closed.lock().expect("closed lock") = Some(err.clone());
    shared.fail_all(err);
}

fn encoding(e: impl std::fmt::Display) -> GuidanceError {
    GuidanceError::Encoding(e.to_string())
}

impl Guidance for Remote {
    fn relevance(&self, ctx: &Context, a: &Tree, viable: &[ViableTheorem]) -> Result<Vec<f64>, GuidanceError> {
        let r = self.renaming(ctx, a)?;
        let goal = encode_goal(ctx, a, &r, &self.vocab).map_err(encoding)?;
        let theorems =
            viable.iter().map(|(f, _)| encode_theorem(f, &self.vocab)).collect::<Result<Vec<_>, _>>().map_err(encoding)?;
        let res: RelevanceResult = self.call(Method::Relevance, &RelevancePayload { goal, theorems })?;
        if res.probabilities.len() != viable.len() || res.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(GuidanceError::ProtocolViolation("relevance scores do not match the theorem list".into()));
        }
        Ok(normalize(&res.probabilities))
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
        let free: Vec<_> = frame.free_vars.iter().copied().filter(|(v, _)| !constrained.contains(*v)).collect();
        if free.is_empty() {
            let ok = admissible(&self.lib, ctx, a, frame, constrained, token_limit);
            let candidates = if ok { vec![(constrained.clone(), 1.0)] } else { Vec::new() };
            return Ok(Generated { candidates, truncated: false });
        }
        let r = self.renaming(ctx, a)?;
        let grammar = self.lib.grammar();
        let vars: Vec<_> = free.iter().map(|(v, _)| *v).collect();
        let conditioning = vars
            .iter()
            .map(|t| encode_conditioning(frame, constrained, &vars, *t, &r, &self.vocab))
            .collect::<Result<Vec<_>, _>>()
            .map_err(encoding)?;
        let payload = GeneratePayload {
            goal: encode_goal(ctx, a, &r, &self.vocab).map_err(encoding)?,
            variables: vars.iter().map(|v| grammar.symbol_name(*v).to_string()).collect(),
            typecodes: free.iter().map(|(_, tc)| grammar.symbol_name(*tc).to_string()).collect(),
            conditioning,
            beam_width,
            token_limit,
        };
        let res: GenerateResult = self.call(Method::Generate, &payload)?;
        let mut kept = Vec::new();
        for c in res.candidates {
            if c.images.len() != free.len() || !(c.probability.is_finite() && c.probability >= 0.0) {
                return Err(GuidanceError::ProtocolViolation("candidate does not match the variable list".into()));
            }
            let mut s = constrained.clone();
            let mut decoded = true;
            for ((v, _), toks) in free.iter().zip(&c.images) {
                match self.vocab.decode(toks, grammar, &r.leaves) {
                    Ok((t, n)) if n == toks.len() => {
                        s.insert(*v, t);
                    }
                    _ => decoded = false,
                }
            }
            if decoded && admissible(&self.lib, ctx, a, frame, &s, token_limit) && !kept.iter().any(|(k, _)| *k == s) {
                kept.push((s, c.probability));
            }
        }
        kept.truncate(beam_width);
        let probs = normalize(&kept.iter().map(|c| c.1).collect::<Vec<_>>());
        let candidates = kept.into_iter().zip(probs).map(|((s, _), p)| (s, p)).collect();
        Ok(Generated { candidates, truncated: false })
    }

    fn payoff(&self, ctx: &Context, a: &Tree) -> Result<f64, GuidanceError> {
        let r = self.renaming(ctx, a)?;
        let goal = encode_goal(ctx, a, &r, &self.vocab).map_err(encoding)?;
        let res: PayoffResult = self.call(Method::Payoff, &PayoffPayload { goal })?;
        if !(0.0..=1.0).contains(&res.payoff) {
            return Err(GuidanceError::ProtocolViolation(format!("payoff {} outside [0, 1]", res.payoff)));
        }
        Ok(res.payoff)
    }
}
