//! Proof trees, their verification, and conversion to and from
//! reverse-Polish proofs.

mod rpn;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::database::{Database, StatementKind, StmtId, Sym};
use crate::frame::{Context, Library};
use crate::grammar::{Head, Tree, VarTypes};
use crate::unify::{apply_substitution, check_disjoint, Substitution};

pub use rpn::{verify_database, verify_proposition, verify_rpn_proof, VerifyError};

/// A red node of a proof tree together with its single blue child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofTree {
    /// The expression is a hypothesis of the context.
    Hyp { expr: Tree, label: StmtId },
    /// The expression is proven by applying `theorem` under `subst`; one
    /// child per essential hypothesis of the theorem.
    Step { expr: Tree, theorem: StmtId, subst: Substitution, children: Vec<ProofTree> },
}

impl ProofTree {
    pub fn expr(&self) -> &Tree {
        match self {
            ProofTree::Hyp { expr, .. } | ProofTree::Step { expr, .. } => expr,
        }
    }

    pub fn children(&self) -> &[ProofTree] {
        match self {
            ProofTree::Hyp { .. } => &[],
            ProofTree::Step { children, .. } => children,
        }
    }

    /// Number of red nodes.
    pub fn red_count(&self) -> usize {
        1 + self.children().iter().map(ProofTree::red_count).sum::<usize>()
    }

    /// Every red node in pre-order.
    pub fn nodes(&self) -> Vec<&ProofTree> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let n = out[i];
            out.extend(n.children());
            i += 1;
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeErrorKind {
    #[error("leaf is not a hypothesis of the context")]
    LeafNotHypothesis,
    #[error("theorem is not a usable provable-type assertion")]
    UnknownTheorem,
    #[error("theorem is not defined before the context")]
    ForwardReference,
    #[error("substitution does not bind every variable with a well-typed context expression")]
    BadSubstitution,
    #[error("substituted assertion differs from the node expression")]
    WrongResult,
    #[error("expected {expected} hypothesis children, found {found}")]
    ChildCount { expected: usize, found: usize },
    #[error("child {0} does not match the substituted hypothesis")]
    ChildMismatch(usize),
    #[error("disjoint variable violation")]
    Disjoint,
}

/// Failure at the node reached by following `path` (child indices) from
/// the root.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("proof tree node {path:?}: {kind}")]
pub struct TreeError {
    pub path: Vec<usize>,
    pub kind: TreeErrorKind,
}

/// Check every proof-tree invariant; the first failing node is reported.
pub fn verify_proof_tree(pt: &ProofTree, ctx: &Context, lib: &Library) -> Result<(), TreeError> {
    if pt.expr() != ctx.assertion() {
        return Err(TreeError { path: Vec::new(), kind: TreeErrorKind::WrongResult });
    }
    let mut path = Vec::new();
    verify_node(pt, ctx, lib, &mut path)
}

fn verify_node(pt: &ProofTree, ctx: &Context, lib: &Library, path: &mut Vec<usize>) -> Result<(), TreeError> {
    let fail = |path: &Vec<usize>, kind| Err(TreeError { path: path.clone(), kind });
    match pt {
        ProofTree::Hyp { expr, label } => {
            if ctx.hyp_label(expr) != Some(*label) {
                return fail(path, TreeErrorKind::LeafNotHypothesis);
            }
            Ok(())
        }
        ProofTree::Step { expr, theorem, subst, children } => {
            let Some(frame) = lib.frame(*theorem) else {
                return fail(path, TreeErrorKind::UnknownTheorem);
            };
            if frame.id >= ctx.db_position() {
                return fail(path, TreeErrorKind::ForwardReference);
            }
            for (v, tc) in &frame.free_vars {
                let ok = subst.get(*v).is_some_and(|t| {
                    t.typecode() == *tc && t.vars().iter().all(|z| ctx.var_types.contains_key(z))
                });
                if !ok {
                    return fail(path, TreeErrorKind::BadSubstitution);
                }
            }
            match apply_substitution(&frame.assertion, subst) {
                Ok(a) if a == *expr => {}
                _ => return fail(path, TreeErrorKind::WrongResult),
            }
            if children.len() != frame.hyps.len() {
                return fail(path, TreeErrorKind::ChildCount { expected: frame.hyps.len(), found: children.len() });
            }
            for (k, (h, c)) in frame.hyps.iter().zip(children).enumerate() {
                match apply_substitution(h, subst) {
                    Ok(e) if e == *c.expr() => {}
                    _ => return fail(path, TreeErrorKind::ChildMismatch(k)),
                }
            }
            if !check_disjoint(subst, frame, ctx) {
                return fail(path, TreeErrorKind::Disjoint);
            }
            for (k, c) in children.iter().enumerate() {
                path.push(k);
                verify_node(c, ctx, lib, path)?;
                path.pop();
            }
            Ok(())
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConvertError {
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("step {step}: `{label}` could not be converted: {reason}")]
    Step { step: usize, label: String, reason: String },
    #[error("proof does not end in a single provable-type expression")]
    BadFinalStack,
    #[error("variable {0:?} has no floating hypothesis in the context")]
    NoFloat(Sym),
}

enum Entry {
    Syntax(Tree),
    Proof(ProofTree),
}

/// Build the proof tree of an RPN proof. Non-provable steps are folded
/// into substitution trees.
pub fn tree_from_rpn(labels: &[StmtId], ctx: &Context, lib: &Library) -> Result<ProofTree, ConvertError> {
    let db = lib.db();
    verify_rpn_proof(db, ctx.db_position(), labels)?;
    let grammar = lib.grammar();
    let mut stack: Vec<Entry> = Vec::new();
    let mut syntax_frames: HashMap<StmtId, Tree> = HashMap::new();
    for (step, &id) in labels.iter().enumerate() {
        let s = db.statement(id);
        let err = |reason: &str| ConvertError::Step { step, label: s.label().to_string(), reason: reason.to_string() };
        match s.kind {
            StatementKind::Floating => stack.push(Entry::Syntax(Tree::var(s.math[1], s.math[0]))),
            StatementKind::Essential => {
                if s.typecode() == db.provable_typecode() {
                    let k = ctx.frame.hyp_ids.iter().position(|h| *h == id).ok_or_else(|| err("not a context hypothesis"))?;
                    stack.push(Entry::Proof(ProofTree::Hyp { expr: ctx.frame.hyps[k].clone(), label: id }));
                } else {
                    let t = grammar.parse_statement(&s.math, &ctx.var_types).map_err(|e| err(&e.to_string()))?;
                    stack.push(Entry::Syntax(t));
                }
            }
            StatementKind::Axiom | StatementKind::Provable => {
                let hyps = &s.assertion.as_ref().expect("assertion frame").hyps;
                let base = stack.len() - hyps.len();
                let popped: Vec<Entry> = stack.drain(base..).collect();
                if s.typecode() == db.provable_typecode() {
                    let frame = lib.frame(id).ok_or_else(|| err("theorem frame did not parse"))?;
                    let mut subst = Substitution::new();
                    let mut children = Vec::new();
                    for (h, e) in hyps.iter().zip(popped) {
                        match (db.statement(*h).kind, e) {
                            (StatementKind::Floating, Entry::Syntax(t)) => {
                                subst.insert(db.statement(*h).math[1], t);
                            }
                            (StatementKind::Essential, Entry::Proof(p)) => children.push(p),
                            _ => return Err(err("hypothesis kind mismatch")),
                        }
                    }
                    let expr = apply_substitution(&frame.assertion, &subst).map_err(|e| err(&e.to_string()))?;
                    stack.push(Entry::Proof(ProofTree::Step { expr, theorem: id, subst, children }));
                } else if let Some(c) = grammar.constructor(id) {
                    let mut args: Vec<Option<Tree>> = vec![None; c.arity()];
                    for (k, e) in popped.into_iter().enumerate() {
                        match e {
                            Entry::Syntax(t) => args[c.hyp_slots[k]] = Some(t),
                            Entry::Proof(_) => return Err(err("proof step used as syntax")),
                        }
                    }
                    let args = args.into_iter().map(|a| a.expect("slot")).collect();
                    stack.push(Entry::Syntax(Tree::ctor(id, c.typecode, args)));
                } else {
                    // a syntax theorem: substitute into its parsed statement
                    let pattern = match syntax_frames.get(&id) {
                        Some(t) => t.clone(),
                        None => {
                            let mut vars = VarTypes::new();
                            for h in hyps {
                                let m = &db.statement(*h).math;
                                vars.insert(m[1], m[0]);
                            }
                            let t = grammar.parse_statement(&s.math, &vars).map_err(|e| err(&e.to_string()))?;
                            syntax_frames.insert(id, t.clone());
                            t
                        }
                    };
                    let mut subst = Substitution::new();
                    for (h, e) in hyps.iter().zip(popped) {
                        match e {
                            Entry::Syntax(t) => {
                                subst.insert(db.statement(*h).math[1], t);
                            }
                            Entry::Proof(_) => return Err(err("proof step used as syntax")),
                        }
                    }
                    let t = apply_substitution(&pattern, &subst).map_err(|e| err(&e.to_string()))?;
                    stack.push(Entry::Syntax(t));
                }
            }
            _ => return Err(err("not usable in a proof")),
        }
    }
    match (stack.pop(), stack.is_empty()) {
        (Some(Entry::Proof(p)), true) => Ok(p),
        _ => Err(ConvertError::BadFinalStack),
    }
}

/// Serialize a proof tree as an uncompressed RPN label sequence.
pub fn emit_rpn(pt: &ProofTree, ctx: &Context, lib: &Library) -> Result<Vec<StmtId>, ConvertError> {
    let mut out = Vec::new();
    emit_node(pt, ctx, lib, &mut out)?;
    Ok(out)
}

fn emit_node(pt: &ProofTree, ctx: &Context, lib: &Library, out: &mut Vec<StmtId>) -> Result<(), ConvertError> {
    match pt {
        ProofTree::Hyp { label, .. } => out.push(*label),
        ProofTree::Step { theorem, subst, children, .. } => {
            let db = lib.db();
            let mut k = 0;
            let hyps = &db.assertion(*theorem).expect("assertion frame").hyps;
            for h in hyps {
                let hs = db.statement(*h);
                if hs.kind == StatementKind::Floating {
                    let img = subst.get(hs.math[1]).ok_or(ConvertError::NoFloat(hs.math[1]))?;
                    emit_syntax(img, ctx, lib, out)?;
                } else {
                    emit_node(&children[k], ctx, lib, out)?;
                    k += 1;
                }
            }
            out.push(*theorem);
        }
    }
    Ok(())
}

/// Append the constructor steps that build `t`.
pub fn emit_syntax(t: &Tree, ctx: &Context, lib: &Library, out: &mut Vec<StmtId>) -> Result<(), ConvertError> {
    match t.head() {
        Head::Var(v) => out.push(*ctx.float_labels.get(&v).ok_or(ConvertError::NoFloat(v))?),
        Head::Ctor(c) => {
            let ctor = lib.grammar().constructor(c).expect("constructor node");
            for slot in &ctor.hyp_slots {
                emit_syntax(&t.args()[*slot], ctx, lib, out)?;
            }
            out.push(c);
        }
    }
    Ok(())
}

/// Source text of a `${ ... $}` block restating `ctx` under `new_label`
/// with the given proof, suitable for appending to the database file.
///
/// Hypotheses are relabeled `<new_label>.<k>`; every disjoint pair of the
/// context is restated.
pub fn proof_block(db: &Database, ctx: &Context, proof: &[StmtId], new_label: &str) -> String {
    let mut out = String::from("${\n");
    let mut pairs: Vec<(Sym, Sym)> = ctx.disjoint.iter().copied().collect();
    pairs.sort();
    for (a, b) in pairs {
        let _ = writeln!(out, "  $d {} {} $.", db.symbol_name(a), db.symbol_name(b));
    }
    let mut rename: HashMap<StmtId, String> = HashMap::new();
    for (k, h) in ctx.frame.hyp_ids.iter().enumerate() {
        let name = format!("{new_label}.{}", k + 1);
        let _ = writeln!(out, "  {name} $e {} $.", db.render_symbols(&db.statement(*h).math));
        rename.insert(*h, name);
    }
    let stmt = db.statement(ctx.db_position());
    let _ = write!(out, "  {new_label} $p {} $=", db.render_symbols(&stmt.math));
    for (i, id) in proof.iter().enumerate() {
        if i % 12 == 0 {
            out.push_str("\n   ");
        }
        out.push(' ');
        match rename.get(id) {
            Some(n) => out.push_str(n),
            None => out.push_str(db.label(*id)),
        }
    }
    out.push_str(" $.\n$}\n");
    out
}

#[cfg(test)]
mod tests;
