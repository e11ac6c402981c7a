//! Theorem frames, proving contexts and the library of usable theorems.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::database::{normalize_pair, Database, StatementKind, StmtId, Sym};
use crate::grammar::{Grammar, GrammarError, Head, Tree, VarTypes};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("`{0}` is not an axiom or proposition")]
    NotAssertion(String),
    #[error("`{0}` is not of provable type")]
    NotProvableType(String),
    #[error("`{label}`: {source}")]
    Grammar {
        label: String,
        #[source]
        source: GrammarError,
    },
}

/// Assertion, essential hypotheses, typed free variables and disjoint pairs
/// of a provable-type theorem.
#[derive(Clone, Debug)]
pub struct TheoremFrame {
    pub id: StmtId,
    pub label: String,
    pub assertion: Tree,
    pub hyps: Vec<Tree>,
    pub hyp_ids: Vec<StmtId>,
    /// Mandatory variables with their typecodes, in hypothesis order.
    pub free_vars: Vec<(Sym, Sym)>,
    pub float_ids: Vec<StmtId>,
    /// Mandatory hypotheses in database order (floating and essential).
    pub mandatory: Vec<StmtId>,
    pub disjoint: Vec<(Sym, Sym)>,
    pub is_axiom: bool,
    pub constrained: Vec<Sym>,
    pub unconstrained: Vec<Sym>,
}

impl TheoremFrame {
    pub fn db_position(&self) -> StmtId {
        self.id
    }

    pub fn var_type(&self, v: Sym) -> Option<Sym> {
        self.free_vars.iter().find(|(x, _)| *x == v).map(|(_, t)| *t)
    }

    pub fn is_constrained(&self, v: Sym) -> bool {
        self.constrained.contains(&v)
    }
}

fn check_provable(db: &Database, id: StmtId) -> Result<(), FrameError> {
    let s = db.statement(id);
    if !s.kind.is_assertion() {
        return Err(FrameError::NotAssertion(s.label().to_string()));
    }
    if s.typecode() != db.provable_typecode() {
        return Err(FrameError::NotProvableType(s.label().to_string()));
    }
    Ok(())
}

/// Build the frame of the provable-type theorem `label`.
pub fn frame_of(db: &Database, grammar: &Grammar, label: &str) -> Result<TheoremFrame, FrameError> {
    let id = db.lookup(label).ok_or_else(|| FrameError::UnknownLabel(label.to_string()))?;
    frame_at(db, grammar, id)
}

pub fn frame_at(db: &Database, grammar: &Grammar, id: StmtId) -> Result<TheoremFrame, FrameError> {
    check_provable(db, id)?;
    let stmt = db.statement(id);
    let data = stmt.assertion.as_ref().expect("assertion frame");
    let mut vars = VarTypes::new();
    let mut free_vars = Vec::new();
    let mut float_ids = Vec::new();
    let mut hyp_ids = Vec::new();
    for h in &data.hyps {
        let hs = db.statement(*h);
        match hs.kind {
            StatementKind::Floating => {
                vars.insert(hs.math[1], hs.math[0]);
                free_vars.push((hs.math[1], hs.math[0]));
                float_ids.push(*h);
            }
            _ => hyp_ids.push(*h),
        }
    }
    let parse = |math: &[Sym], label: &str| {
        grammar
            .parse_statement(math, &vars)
            .map_err(|source| FrameError::Grammar { label: label.to_string(), source })
    };
    let assertion = parse(&stmt.math, stmt.label())?;
    let hyps = hyp_ids
        .iter()
        .map(|h| parse(&db.statement(*h).math, db.label(*h)))
        .collect::<Result<Vec<_>, _>>()?;
    let in_assertion = assertion.vars();
    let (constrained, unconstrained) = free_vars.iter().map(|(v, _)| *v).partition(|v| in_assertion.contains(v));
    Ok(TheoremFrame {
        id,
        label: stmt.label().to_string(),
        assertion,
        hyps,
        hyp_ids,
        free_vars,
        float_ids,
        mandatory: data.hyps.clone(),
        disjoint: data.disjoint.clone(),
        is_axiom: stmt.kind == StatementKind::Axiom,
        constrained,
        unconstrained,
    })
}

/// A proposition to be proven, with everything in scope at its position.
#[derive(Clone, Debug)]
pub struct Context {
    pub frame: Arc<TheoremFrame>,
    /// Typecodes of every variable with an active `$f`.
    pub var_types: VarTypes,
    /// Active `$f` label per variable.
    pub float_labels: HashMap<Sym, StmtId>,
    /// Every active disjoint pair, normalized.
    pub disjoint: HashSet<(Sym, Sym)>,
}

impl Context {
    pub fn new(db: &Database, grammar: &Grammar, id: StmtId) -> Result<Context, FrameError> {
        let frame = Arc::new(frame_at(db, grammar, id)?);
        Ok(Context::with_frame(db, id, frame))
    }

    pub fn from_label(db: &Database, grammar: &Grammar, label: &str) -> Result<Context, FrameError> {
        let id = db.lookup(label).ok_or_else(|| FrameError::UnknownLabel(label.to_string()))?;
        Context::new(db, grammar, id)
    }

    pub fn label(&self) -> &str {
        &self.frame.label
    }

    pub fn assertion(&self) -> &Tree {
        &self.frame.assertion
    }

    pub fn hyps(&self) -> &[Tree] {
        &self.frame.hyps
    }

    pub fn db_position(&self) -> StmtId {
        self.frame.id
    }

    /// Label of the essential hypothesis equal to `t`, if any.
    pub fn hyp_label(&self, t: &Tree) -> Option<StmtId> {
        self.frame.hyps.iter().position(|h| h == t).map(|i| self.frame.hyp_ids[i])
    }

    pub fn is_disjoint(&self, a: Sym, b: Sym) -> bool {
        a != b && self.disjoint.contains(&normalize_pair(a, b))
    }

    /// Variables of the given typecode available in this context.
    pub fn vars_of_type(&self, typecode: Sym) -> Vec<Sym> {
        let mut v: Vec<Sym> = self.var_types.iter().filter(|(_, t)| **t == typecode).map(|(v, _)| *v).collect();
        v.sort();
        v
    }
}

/// All provable-type theorems of a database with parsed frames, indexed
/// by the head of their assertion.
#[derive(Debug)]
pub struct Library {
    db: Arc<Database>,
    grammar: Arc<Grammar>,
    frames: Vec<Arc<TheoremFrame>>,
    by_id: HashMap<StmtId, usize>,
    by_head: HashMap<StmtId, Vec<usize>>,
    var_headed: Vec<usize>,
    errors: Vec<FrameError>,
}

impl Library {
    pub fn new(db: Arc<Database>) -> Library {
        let grammar = Arc::new(Grammar::build(&db));
        Library::with_grammar(db, grammar)
    }

    pub fn with_grammar(db: Arc<Database>, grammar: Arc<Grammar>) -> Library {
        let mut lib = Library {
            frames: Vec::new(),
            by_id: HashMap::new(),
            by_head: HashMap::new(),
            var_headed: Vec::new(),
            errors: Vec::new(),
            db,
            grammar,
        };
        let ids: Vec<StmtId> = lib.db.ids().collect();
        for id in ids {
            let s = lib.db.statement(id);
            if !s.kind.is_assertion() || s.typecode() != lib.db.provable_typecode() {
                continue;
            }
            match frame_at(&lib.db, &lib.grammar, id) {
                Ok(f) => {
                    let k = lib.frames.len();
                    match f.assertion.head() {
                        Head::Ctor(c) => lib.by_head.entry(c).or_default().push(k),
                        Head::Var(_) => lib.var_headed.push(k),
                    }
                    lib.by_id.insert(id, k);
                    lib.frames.push(Arc::new(f));
                }
                Err(e) => {
                    log::warn!("skipping theorem: {e}");
                    lib.errors.push(e);
                }
            }
        }
        lib
    }

    pub fn db(&self) -> &Arc<Database> {
        &self.db
    }

    pub fn grammar(&self) -> &Arc<Grammar> {
        &self.grammar
    }

    pub fn frames(&self) -> &[Arc<TheoremFrame>] {
        &self.frames
    }

    pub fn frame(&self, id: StmtId) -> Option<&Arc<TheoremFrame>> {
        self.by_id.get(&id).map(|k| &self.frames[*k])
    }

    pub fn frame_by_label(&self, label: &str) -> Option<&Arc<TheoremFrame>> {
        self.db.lookup(label).and_then(|id| self.frame(id))
    }

    /// Frames whose assertion could match an expression with this head,
    /// in database order.
    pub fn candidates(&self, head: Head) -> Vec<&Arc<TheoremFrame>> {
        let mut ks: Vec<usize> = self.var_headed.clone();
        if let Head::Ctor(c) = head {
            ks.extend(self.by_head.get(&c).into_iter().flatten().copied());
        }
        ks.sort_unstable();
        ks.into_iter().map(|k| &self.frames[k]).collect()
    }

    /// Theorems that failed to parse.
    pub fn errors(&self) -> &[FrameError] {
        &self.errors
    }

    pub fn context(&self, label: &str) -> Result<Context, FrameError> {
        let id = self.db.lookup(label).ok_or_else(|| FrameError::UnknownLabel(label.to_string()))?;
        self.context_at(id)
    }

    pub fn context_at(&self, id: StmtId) -> Result<Context, FrameError> {
        match self.frame(id) {
            Some(f) => Ok(Context::with_frame(&self.db, id, f.clone())),
            None => Context::new(&self.db, &self.grammar, id),
        }
    }
}

impl Context {
    fn with_frame(db: &Database, id: StmtId, frame: Arc<TheoremFrame>) -> Context {
        let mut var_types = VarTypes::new();
        let mut float_labels = HashMap::new();
        for f in db.floating_hyps() {
            if db.in_scope(*f, id) {
                let m = &db.statement(*f).math;
                var_types.insert(m[1], m[0]);
                float_labels.insert(m[1], *f);
            }
        }
        let data = db.assertion(id).expect("assertion frame");
        let mut disjoint: HashSet<(Sym, Sym)> = data.active_disjoint.iter().copied().collect();
        disjoint.extend(data.disjoint.iter().copied());
        Context { frame, var_types, float_labels, disjoint }
    }
}
