//! Expression grammar: non-provable axioms read as context-free productions.
//!
//! Each constructor axiom such as `wi $a wff ( ph -> ps ) $.` is a rule
//! `wff -> "(" wff "->" wff ")"`. Variables of the surrounding context are
//! extra terminals of their typecode. Expressions are parsed with a
//! memoized chart parser that counts derivations, so an ambiguous string
//! is reported instead of silently resolved.

mod chart;
mod tokens;
mod tree;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::database::{Database, StatementKind, StmtId, Sym};

pub use tokens::{
    dummy_counts, tokenize, Special, TokenSequence, TokenizeError, Vocabulary, VocabularyError, FEATURE_WIDTH,
};
pub use tree::{Head, Preorder, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("no parse for `{0}`")]
    NoParse(String),
    #[error("ambiguous parse for `{0}`")]
    Ambiguous(String),
    #[error("typecode `{0}` has no productions")]
    UnknownTypecode(String),
    #[error("variable `{0}` has no type in this context")]
    UntypedVariable(String),
    #[error("empty expression")]
    Empty,
}

/// A constructor axiom viewed as a production.
#[derive(Clone, Debug)]
pub struct Constructor {
    pub id: StmtId,
    pub label: String,
    pub typecode: Sym,
    /// Symbols after the typecode.
    pub body: Vec<Sym>,
    /// For each body symbol, the slot it fills if it is a variable.
    pub body_slots: Vec<Option<usize>>,
    /// Slot variables in order of first occurrence in the body.
    pub slots: Vec<Sym>,
    pub slot_types: Vec<Sym>,
    /// For each mandatory hypothesis (database order), its slot.
    pub hyp_slots: Vec<usize>,
}

impl Constructor {
    pub fn arity(&self) -> usize {
        self.slots.len()
    }
}

#[derive(Clone, Debug)]
pub struct Grammar {
    ctors: Vec<Constructor>,
    by_id: HashMap<StmtId, usize>,
    by_typecode: HashMap<Sym, Vec<usize>>,
    provable: Option<Sym>,
    expr_typecode: Option<Sym>,
    names: Vec<String>,
    variables: Vec<bool>,
    unit_cycle: bool,
}

/// Variable typing used while parsing: variable → typecode.
pub type VarTypes = HashMap<Sym, Sym>;

impl Grammar {
    /// Collect productions from every non-provable axiom.
    ///
    /// Axioms with essential hypotheses or a repeated variable are not
    /// productions and are skipped.
    pub fn build(db: &Database) -> Grammar {
        let provable = db.provable_typecode();
        let mut ctors = Vec::new();
        for id in db.ids() {
            let stmt = db.statement(id);
            if stmt.kind != StatementKind::Axiom || stmt.typecode() == provable {
                continue;
            }
            let data = stmt.assertion.as_ref().expect("axiom frame");
            let mut var_type = HashMap::new();
            let mut floats_only = true;
            for h in &data.hyps {
                let hs = db.statement(*h);
                if hs.kind == StatementKind::Floating {
                    var_type.insert(hs.math[1], hs.math[0]);
                } else {
                    floats_only = false;
                }
            }
            if !floats_only {
                log::warn!("axiom {} has essential hypotheses; not a production", stmt.label());
                continue;
            }
            let body = stmt.body().to_vec();
            let mut slots = Vec::new();
            let mut body_slots = Vec::new();
            let mut linear = true;
            for s in &body {
                if db.is_variable(*s) {
                    if slots.contains(s) {
                        linear = false;
                    }
                    body_slots.push(Some(slots.len()));
                    slots.push(*s);
                } else {
                    body_slots.push(None);
                }
            }
            if !linear || body.is_empty() {
                log::warn!("axiom {} is not a linear production; skipped", stmt.label());
                continue;
            }
            let slot_types = slots.iter().map(|v| var_type[v]).collect();
            let hyp_slots = data
                .hyps
                .iter()
                .map(|h| {
                    let v = db.statement(*h).math[1];
                    slots.iter().position(|s| *s == v).expect("hypothesis variable in body")
                })
                .collect();
            ctors.push(Constructor {
                id,
                label: stmt.label().to_string(),
                typecode: stmt.math[0],
                body,
                body_slots,
                slots,
                slot_types,
                hyp_slots,
            });
        }
        let mut by_id = HashMap::new();
        let mut by_typecode: HashMap<Sym, Vec<usize>> = HashMap::new();
        for (i, c) in ctors.iter().enumerate() {
            by_id.insert(c.id, i);
            by_typecode.entry(c.typecode).or_default().push(i);
        }
        let expr_typecode = db
            .symbol("wff")
            .filter(|s| by_typecode.contains_key(s))
            .or_else(|| {
                let mut best: Option<(Sym, usize)> = None;
                for tc in db.typecodes() {
                    let n = by_typecode.get(tc).map_or(0, Vec::len);
                    if n > 0 && best.is_none_or(|b| n > b.1) {
                        best = Some((*tc, n));
                    }
                }
                best.map(|b| b.0)
            });
        let names = (0..db.symbol_count() as u32).map(|i| db.symbol_name(Sym(i)).to_string()).collect();
        let variables = (0..db.symbol_count() as u32).map(|i| db.is_variable(Sym(i))).collect();
        let mut g = Grammar {
            ctors,
            by_id,
            by_typecode,
            provable,
            expr_typecode,
            names,
            variables,
            unit_cycle: false,
        };
        g.unit_cycle = g.has_unit_cycle();
        g
    }

    fn has_unit_cycle(&self) -> bool {
        // edges t -> t' for productions `t -> <var of type t'>`
        let mut edges: HashMap<Sym, Vec<Sym>> = HashMap::new();
        for c in &self.ctors {
            if c.body.len() == 1 && c.slot_types.len() == 1 {
                edges.entry(c.typecode).or_default().push(c.slot_types[0]);
            }
        }
        fn visit(n: Sym, edges: &HashMap<Sym, Vec<Sym>>, state: &mut HashMap<Sym, u8>) -> bool {
            match state.get(&n) {
                Some(1) => return true,
                Some(2) => return false,
                _ => {}
            }
            state.insert(n, 1);
            for m in edges.get(&n).into_iter().flatten() {
                if visit(*m, edges, state) {
                    return true;
                }
            }
            state.insert(n, 2);
            false
        }
        let mut state = HashMap::new();
        edges.keys().any(|k| visit(*k, &edges, &mut state))
    }

    pub fn constructors(&self) -> &[Constructor] {
        &self.ctors
    }

    pub fn constructor(&self, id: StmtId) -> Option<&Constructor> {
        self.by_id.get(&id).map(|i| &self.ctors[*i])
    }

    pub fn productions(&self, typecode: Sym) -> impl Iterator<Item = &Constructor> {
        self.by_typecode.get(&typecode).into_iter().flatten().map(|i| &self.ctors[*i])
    }

    pub fn provable_typecode(&self) -> Option<Sym> {
        self.provable
    }

    /// Syntactic category that the body of a provable statement is parsed as.
    pub fn expr_typecode(&self) -> Option<Sym> {
        self.expr_typecode
    }

    /// Map a statement typecode to the category its body is parsed as.
    pub fn category(&self, typecode: Sym) -> Sym {
        if Some(typecode) == self.provable {
            self.expr_typecode.unwrap_or(typecode)
        } else {
            typecode
        }
    }

    pub fn is_variable(&self, s: Sym) -> bool {
        self.variables[s.index()]
    }

    pub fn symbol_name(&self, s: Sym) -> &str {
        &self.names[s.index()]
    }

    fn text(&self, syms: &[Sym]) -> String {
        syms.iter().map(|s| self.symbol_name(*s)).collect::<Vec<_>>().join(" ")
    }

    /// Parse `body` as an expression of `typecode`'s category.
    pub fn parse(&self, typecode: Sym, body: &[Sym], vars: &VarTypes) -> Result<Tree, GrammarError> {
        if body.is_empty() {
            return Err(GrammarError::Empty);
        }
        let cat = self.category(typecode);
        for s in body {
            if self.variables[s.index()] && !vars.contains_key(s) {
                return Err(GrammarError::UntypedVariable(self.symbol_name(*s).to_string()));
            }
        }
        let mut chart = chart::Chart::new(self, body, vars);
        match chart.count(cat, 0, body.len()) {
            0 => Err(GrammarError::NoParse(self.text(body))),
            1 if !self.unit_cycle => Ok(chart.build(cat, 0, body.len())),
            _ => Err(GrammarError::Ambiguous(self.text(body))),
        }
    }

    /// Parse a full statement (`math[0]` is the typecode).
    pub fn parse_statement(&self, math: &[Sym], vars: &VarTypes) -> Result<Tree, GrammarError> {
        match math.split_first() {
            Some((tc, body)) => self.parse(*tc, body, vars),
            None => Err(GrammarError::Empty),
        }
    }

    /// Symbols of the expression, without typecode.
    pub fn render(&self, t: &Tree) -> Vec<Sym> {
        let mut out = Vec::with_capacity(t.size());
        self.render_into(t, &mut out);
        out
    }

    fn render_into(&self, t: &Tree, out: &mut Vec<Sym>) {
        match t.head() {
            Head::Var(v) => out.push(v),
            Head::Ctor(id) => {
                let c = self.constructor(id).expect("tree node is a constructor");
                for (s, slot) in c.body.iter().zip(&c.body_slots) {
                    match slot {
                        Some(k) => self.render_into(&t.args()[*k], out),
                        None => out.push(*s),
                    }
                }
            }
        }
    }

    /// Render with a leading typecode, as text.
    pub fn render_text(&self, typecode: Sym, t: &Tree) -> String {
        let mut syms = vec![typecode];
        syms.extend(self.render(t));
        self.text(&syms)
    }

    /// Apply constructor `id` to `args` given in slot order.
    pub fn apply(&self, id: StmtId, args: Vec<Tree>) -> Tree {
        let c = self.constructor(id).expect("constructor");
        debug_assert_eq!(c.arity(), args.len());
        Tree::ctor(id, c.typecode, args)
    }

    /// Random tree of the given category, for tests and benchmarks.
    ///
    /// Leaves are drawn from `vars` (variable, typecode); productions whose
    /// slots cannot be filled within `depth` are avoided.
    pub fn random_tree<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        typecode: Sym,
        depth: usize,
        vars: &[(Sym, Sym)],
    ) -> Option<Tree> {
        let leaves: Vec<Sym> = vars.iter().filter(|(_, t)| *t == typecode).map(|(v, _)| *v).collect();
        let prods: Vec<&Constructor> = self.productions(typecode).collect();
        let stop = depth == 0 || prods.is_empty() || (!leaves.is_empty() && rng.gen_bool(0.3));
        if stop {
            if let Some(v) = leaves.choose(rng) {
                return Some(Tree::var(*v, typecode));
            }
            if depth == 0 {
                return None;
            }
        }
        let mut order: Vec<&Constructor> = prods;
        order.shuffle(rng);
        for c in order {
            let mut args = Vec::with_capacity(c.arity());
            for t in &c.slot_types {
                match self.random_tree(rng, *t, depth - 1, vars) {
                    Some(a) => args.push(a),
                    None => break,
                }
            }
            if args.len() == c.arity() {
                return Some(Tree::ctor(c.id, c.typecode, args));
            }
        }
        leaves.choose(rng).map(|v| Tree::var(*v, typecode))
    }
}
