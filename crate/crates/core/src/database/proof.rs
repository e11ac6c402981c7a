use thiserror::Error;

use super::{Database, Proof, StmtId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProofError {
    #[error("statement {0} is not a proposition")]
    NotProvable(StmtId),
    #[error("unknown label `{0}` in proof")]
    UnknownLabel(String),
    #[error("proof contains an unknown step `?`")]
    Incomplete,
    #[error("invalid character `{0}` in compressed proof")]
    BadCharacter(char),
    #[error("compressed reference {index} out of range ({available} available)")]
    IndexOutOfRange { index: usize, available: usize },
    #[error("compressed proof ends in the middle of a number")]
    DanglingDigits,
    #[error("`Z` tag with nothing to save")]
    BadSaveTag,
    #[error("stack underflow while expanding compressed proof")]
    StackUnderflow,
}

fn resolve(db: &Database, label: &str) -> Result<StmtId, ProofError> {
    if label == "?" {
        return Err(ProofError::Incomplete);
    }
    db.lookup(label).ok_or_else(|| ProofError::UnknownLabel(label.to_string()))
}

fn arity(db: &Database, id: StmtId) -> usize {
    db.assertion(id).map_or(0, |a| a.hyps.len())
}

/// Expand the proof of `prop` into a flat reverse-Polish label sequence.
///
/// Compressed back-references are replaced by a copy of the saved subproof,
/// so the result never depends on `Z` tags.
pub fn decompress_proof(db: &Database, prop: StmtId) -> Result<Vec<StmtId>, ProofError> {
    let stmt = db.statement(prop);
    let Some(proof) = &stmt.proof else {
        return Err(ProofError::NotProvable(prop));
    };
    match proof {
        Proof::Normal(labels) => labels.iter().map(|l| resolve(db, l)).collect(),
        Proof::Compressed { labels, steps } => {
            let mut table: Vec<StmtId> = stmt.assertion.as_ref().map(|a| a.hyps.clone()).unwrap_or_default();
            for l in labels {
                table.push(resolve(db, l)?);
            }
            expand(db, &table, steps)
        }
    }
}

fn expand(db: &Database, table: &[StmtId], steps: &str) -> Result<Vec<StmtId>, ProofError> {
    let mut out: Vec<StmtId> = Vec::new();
    // start offset in `out` of each stack entry's subproof
    let mut starts: Vec<usize> = Vec::new();
    let mut saved: Vec<Vec<StmtId>> = Vec::new();
    let mut acc = 0usize;
    let mut pending = false;
    for ch in steps.chars() {
        match ch {
            'U'..='Y' => {
                acc = acc * 5 + (ch as usize - 'U' as usize + 1);
                pending = true;
            }
            'A'..='T' => {
                let index = acc * 20 + (ch as usize - 'A' as usize + 1);
                acc = 0;
                pending = false;
                let k = index - 1;
                if k < table.len() {
                    let id = table[k];
                    let n = arity(db, id);
                    if starts.len() < n {
                        return Err(ProofError::StackUnderflow);
                    }
                    let start = if n == 0 { out.len() } else { starts[starts.len() - n] };
                    starts.truncate(starts.len() - n);
                    out.push(id);
                    starts.push(start);
                } else if k < table.len() + saved.len() {
                    let sub = &saved[k - table.len()];
                    starts.push(out.len());
                    out.extend_from_slice(sub);
                } else {
                    return Err(ProofError::IndexOutOfRange {
                        index,
                        available: table.len() + saved.len(),
                    });
                }
            }
            'Z' => {
                if pending {
                    return Err(ProofError::BadSaveTag);
                }
                let Some(&start) = starts.last() else {
                    return Err(ProofError::BadSaveTag);
                };
                saved.push(out[start..].to_vec());
            }
            '?' => return Err(ProofError::Incomplete),
            c => return Err(ProofError::BadCharacter(c)),
        }
    }
    if pending {
        return Err(ProofError::DanglingDigits);
    }
    Ok(out)
}
