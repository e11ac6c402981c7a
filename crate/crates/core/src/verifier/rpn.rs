//! Reverse-Polish stack-machine verification over raw symbol strings.
//!
//! This is the trusted kernel: it uses no grammar and no parse trees.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::database::{decompress_proof, normalize_pair, Database, ProofError, StatementKind, StmtId, Sym};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("statement {0} is not a proposition")]
    NotProvable(StmtId),
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error("step {step}: `{label}` is not defined before the proposition")]
    ForwardReference { step: usize, label: String },
    #[error("step {step}: hypothesis `{label}` is not in scope")]
    InactiveHypothesis { step: usize, label: String },
    #[error("step {step}: `{label}` cannot be used in a proof")]
    NotUsable { step: usize, label: String },
    #[error("step {step}: stack underflow applying `{label}`")]
    StackUnderflow { step: usize, label: String },
    #[error("step {step}: typecode mismatch for a floating hypothesis of `{label}`")]
    TypecodeMismatch { step: usize, label: String },
    #[error("step {step}: essential hypothesis of `{label}` does not match")]
    HypothesisMismatch { step: usize, label: String },
    #[error("step {step}: disjoint variable violation applying `{label}`")]
    Disjoint { step: usize, label: String },
    #[error("proof leaves {0} entries on the stack")]
    FinalStack(usize),
    #[error("proof proves a different statement")]
    WrongConclusion,
}

fn substitute(math: &[Sym], subst: &HashMap<Sym, &[Sym]>) -> Vec<Sym> {
    let mut out = Vec::with_capacity(math.len());
    for s in math {
        match subst.get(s) {
            Some(img) => out.extend_from_slice(img),
            None => out.push(*s),
        }
    }
    out
}

/// Verify a flat label sequence as a proof of `prop`.
pub fn verify_rpn_proof(db: &Database, prop: StmtId, labels: &[StmtId]) -> Result<(), VerifyError> {
    let stmt = db.statement(prop);
    if stmt.kind != StatementKind::Provable {
        return Err(VerifyError::NotProvable(prop));
    }
    let data = stmt.assertion.as_ref().expect("proposition frame");
    let mut dv: HashSet<(Sym, Sym)> = data.active_disjoint.iter().copied().collect();
    dv.extend(data.disjoint.iter().copied());
    let mut stack: Vec<Vec<Sym>> = Vec::new();
    for (step, &id) in labels.iter().enumerate() {
        let s = db.statement(id);
        let label = || s.label().to_string();
        if id >= prop {
            return Err(VerifyError::ForwardReference { step, label: label() });
        }
        match s.kind {
            StatementKind::Floating | StatementKind::Essential => {
                if !db.in_scope(id, prop) {
                    return Err(VerifyError::InactiveHypothesis { step, label: label() });
                }
                stack.push(s.math.clone());
            }
            StatementKind::Axiom | StatementKind::Provable => {
                let a = s.assertion.as_ref().expect("assertion frame");
                let n = a.hyps.len();
                if stack.len() < n {
                    return Err(VerifyError::StackUnderflow { step, label: label() });
                }
                let base = stack.len() - n;
                let mut subst: HashMap<Sym, &[Sym]> = HashMap::new();
                for (k, h) in a.hyps.iter().enumerate() {
                    let hs = db.statement(*h);
                    if hs.kind == StatementKind::Floating {
                        let entry = &stack[base + k];
                        if entry.first() != Some(&hs.math[0]) {
                            return Err(VerifyError::TypecodeMismatch { step, label: label() });
                        }
                        subst.insert(hs.math[1], &entry[1..]);
                    }
                }
                for (k, h) in a.hyps.iter().enumerate() {
                    let hs = db.statement(*h);
                    if hs.kind == StatementKind::Essential && substitute(&hs.math, &subst) != stack[base + k] {
                        return Err(VerifyError::HypothesisMismatch { step, label: label() });
                    }
                }
                for (x, y) in &a.disjoint {
                    let vx = subst[x].iter().filter(|t| db.is_variable(**t));
                    for z in vx {
                        for w in subst[y].iter().filter(|t| db.is_variable(**t)) {
                            if z == w || !dv.contains(&normalize_pair(*z, *w)) {
                                return Err(VerifyError::Disjoint { step, label: label() });
                            }
                        }
                    }
                }
                let result = substitute(&s.math, &subst);
                stack.truncate(base);
                stack.push(result);
            }
            _ => return Err(VerifyError::NotUsable { step, label: label() }),
        }
    }
    if stack.len() != 1 {
        return Err(VerifyError::FinalStack(stack.len()));
    }
    if stack[0] != stmt.math {
        return Err(VerifyError::WrongConclusion);
    }
    Ok(())
}

/// Decompress and verify the stored proof of `prop`.
pub fn verify_proposition(db: &Database, prop: StmtId) -> Result<(), VerifyError> {
    let labels = decompress_proof(db, prop)?;
    verify_rpn_proof(db, prop, &labels)
}

/// Verdict for every `$p` in the database, in order.
pub fn verify_database(db: &Database) -> Vec<(StmtId, Result<(), VerifyError>)> {
    db.ids()
        .filter(|id| db.statement(*id).kind == StatementKind::Provable)
        .map(|id| (id, verify_proposition(db, id)))
        .collect()
}
