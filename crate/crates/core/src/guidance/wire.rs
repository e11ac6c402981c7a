//! Newline-delimited JSON records exchanged with a guidance service.
//!
//! Every request is a single line `{"id": n, "method": m, "payload": {..}}`
//! and every response a single line `{"id": n, "result": {..}}` or
//! `{"id": n, "error": ".."}`. Expressions travel as [`TokenSequence`]s
//! over a shared vocabulary file.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::database::Sym;
use crate::frame::{Context, TheoremFrame};
use crate::grammar::{tokenize, Special, TokenSequence, TokenizeError, Tree, Vocabulary};
use crate::unify::{apply_substitution, Substitution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Relevance,
    Generate,
    Payoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub method: Method,
    pub payload: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok(id: u64, result: impl Serialize) -> Response {
        let result = serde_json::to_value(result).expect("serializable result");
        Response { id, result: Some(result), error: None }
    }

    pub fn err(id: u64, message: impl Into<String>) -> Response {
        Response { id, result: None, error: Some(message.into()) }
    }
}

/// `goal` is the context hypotheses, `EOS`, then the expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffPayload {
    pub goal: TokenSequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffResult {
    pub payoff: f64,
}

/// Each theorem is encoded as its hypotheses, `EOS`, then its assertion,
/// with its own variables renamed to dummies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevancePayload {
    pub goal: TokenSequence,
    pub theorems: Vec<TokenSequence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceResult {
    pub probabilities: Vec<f64>,
}

/// One conditioning sequence per unconstrained variable, in `variables`
/// order: the theorem hypotheses and assertion under the constrained
/// substitution, with that variable as `TARGET` and the other
/// unconstrained variables as `UV`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratePayload {
    pub goal: TokenSequence,
    pub variables: Vec<String>,
    pub typecodes: Vec<String>,
    pub conditioning: Vec<TokenSequence>,
    pub beam_width: usize,
    pub token_limit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Pre-order tokens of each image, in `variables` order.
    pub images: Vec<Vec<u32>>,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateResult {
    pub candidates: Vec<Candidate>,
}

/// Renaming of context variables to dummy tokens: variables of the goal and
/// hypotheses first, in order of occurrence, then the remaining context
/// variables while dummies remain.
#[derive(Clone, Debug, Default)]
pub struct ContextRenaming {
    pub forward: HashMap<Sym, u32>,
    pub leaves: HashMap<u32, Tree>,
}

impl ContextRenaming {
    pub fn new(ctx: &Context, a: &Tree, vocab: &Vocabulary) -> Result<ContextRenaming, TokenizeError> {
        let mut order: Vec<Sym> = Vec::new();
        for t in ctx.hyps().iter().chain(std::iter::once(a)) {
            for v in t.vars() {
                if !order.contains(&v) {
                    order.push(v);
                }
            }
        }
        let seen = order.len();
        let mut rest: Vec<Sym> = ctx.var_types.keys().copied().filter(|v| !order.contains(v)).collect();
        rest.sort();
        order.extend(rest);
        let mut used: BTreeMap<Sym, usize> = BTreeMap::new();
        let mut r = ContextRenaming::default();
        for (k, v) in order.into_iter().enumerate() {
            let tc = ctx.var_types.get(&v).copied().ok_or(TokenizeError::MissingRenaming(v))?;
            let n = used.entry(tc).or_insert(0);
            match vocab.dummies(tc).get(*n) {
                Some(tok) => {
                    *n += 1;
                    r.forward.insert(v, *tok);
                    r.leaves.insert(*tok, Tree::var(v, tc));
                }
                None if k < seen => return Err(TokenizeError::MissingRenaming(v)),
                None => {}
            }
        }
        Ok(r)
    }
}

/// Hypotheses, `EOS`, expression.
pub fn encode_goal(ctx: &Context, a: &Tree, r: &ContextRenaming, vocab: &Vocabulary) -> Result<TokenSequence, TokenizeError> {
    tokenize(&[ctx.hyps(), std::slice::from_ref(a)], &r.forward, vocab)
}

/// A theorem statement with its variables renamed in order of occurrence.
pub fn encode_theorem(frame: &TheoremFrame, vocab: &Vocabulary) -> Result<TokenSequence, TokenizeError> {
    let mut renaming = HashMap::new();
    let mut used: BTreeMap<Sym, usize> = BTreeMap::new();
    for t in frame.hyps.iter().chain(std::iter::once(&frame.assertion)) {
        for n in t.preorder() {
            if let Some(v) = n.as_var() {
                if renaming.contains_key(&v) {
                    continue;
                }
                let k = used.entry(n.typecode()).or_insert(0);
                let tok = *vocab.dummies(n.typecode()).get(*k).ok_or(TokenizeError::MissingRenaming(v))?;
                *k += 1;
                renaming.insert(v, tok);
            }
        }
    }
    tokenize(&[&frame.hyps, std::slice::from_ref(&frame.assertion)], &renaming, vocab)
}

/// Conditioning sequence for generating the image of `target`.
pub fn encode_conditioning(
    frame: &TheoremFrame,
    constrained: &Substitution,
    unconstrained: &[Sym],
    target: Sym,
    r: &ContextRenaming,
    vocab: &Vocabulary,
) -> Result<TokenSequence, TokenizeError> {
    // placeholder symbols outside the database keep theorem variables apart
    // from context variables of the same name
    let mut s = constrained.clone();
    let mut renaming = r.forward.clone();
    for (k, v) in unconstrained.iter().enumerate() {
        let tc = frame.var_type(*v).ok_or(TokenizeError::MissingRenaming(*v))?;
        let placeholder = Sym(u32::MAX - k as u32);
        s.insert(*v, Tree::var(placeholder, tc));
        let marker = if *v == target { Special::Target } else { Special::Uv };
        renaming.insert(placeholder, marker.id());
    }
    let apply = |t: &Tree| apply_substitution(t, &s).expect("well-typed substitution");
    let hyps: Vec<Tree> = frame.hyps.iter().map(apply).collect();
    let assertion = apply(&frame.assertion);
    tokenize(&[&hyps, std::slice::from_ref(&assertion)], &renaming, vocab)
}

/// Answer requests read from `input` until end of stream. Malformed lines
/// and handler failures are answered with error records.
pub fn serve_lines<R, W, H>(input: R, mut output: W, mut handler: H) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    H: FnMut(&Request) -> Result<Value, String>,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => match handler(&req) {
                Ok(v) => Response::ok(req.id, v),
                Err(e) => Response::err(req.id, e),
            },
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64))
                    .unwrap_or(0);
                Response::err(id, format!("malformed request: {e}"))
            }
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_round_trip() {
        let req = Request { id: 7, method: Method::Payoff, payload: serde_json::json!({"goal": {"tokens": [5], "features": [[0, 0, 0, 0]]}}) };
        let line = serde_json::to_string(&req).unwrap();
        assert!(line.contains("\"method\":\"payoff\""));
        assert!(!line.contains('\n'));
        let back: Request = serde_json::from_str(&line).unwrap();
        assert_eq!(back, req);
        let p: PayoffPayload = serde_json::from_value(back.payload).unwrap();
        assert_eq!(p.goal.tokens, vec![5]);
    }

    #[test]
    fn unknown_method_is_rejected() {
        let bad = r#"{"id": 3, "method": "train", "payload": {}}"#;
        assert!(serde_json::from_str::<Request>(bad).is_err());
        let mut out = Vec::new();
        serve_lines(bad.as_bytes(), &mut out, |_| Ok(Value::Null)).unwrap();
        let resp: Response = serde_json::from_slice(&out).unwrap();
        assert_eq!(resp.id, 3);
        assert!(resp.error.unwrap().contains("malformed"));
    }

    #[test]
    fn responses_mirror_ids() {
        let input = "{\"id\":1,\"method\":\"payoff\",\"payload\":{}}\n{\"id\":2,\"method\":\"relevance\",\"payload\":{}}\n";
        let mut out = Vec::new();
        serve_lines(input.as_bytes(), &mut out, |r| {
            if r.method == Method::Payoff {
                Ok(serde_json::json!({"payoff": 0.5}))
            } else {
                Err("unsupported".into())
            }
        })
        .unwrap();
        let lines: Vec<Response> =
            String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0], Response::ok(1, PayoffResult { payoff: 0.5 }));
        assert_eq!(lines[1], Response::err(2, "unsupported"));
    }
}
