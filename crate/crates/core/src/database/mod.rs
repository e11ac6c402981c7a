//! Metamath database: statements, symbols, lexical scopes and frames.
//!
//! The parser accepts the subset of the Metamath language used by set.mm:
//! `$c $v $f $e $d $a $p ${ $}` and comments. File inclusion (`$[ ... $]`)
//! is rejected. Every assertion records its mandatory hypotheses and
//! disjoint-variable pairs at parse time, so a parsed [`Database`] is
//! immutable and can be shared freely between threads.

mod parser;
mod proof;

use std::collections::HashMap;
use std::fmt;

pub use parser::ParseError;
pub use proof::{decompress_proof, ProofError};

/// Interned math symbol (constant or variable).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub(crate) u32);

impl Sym {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Position of a statement in the database, in source order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StmtId(pub(crate) u32);

impl StmtId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Constant,
    Variable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StatementKind {
    Constant,
    Variable,
    Floating,
    Essential,
    Disjoint,
    Axiom,
    Provable,
}

impl StatementKind {
    pub fn is_assertion(self) -> bool {
        matches!(self, StatementKind::Axiom | StatementKind::Provable)
    }

    pub fn is_hypothesis(self) -> bool {
        matches!(self, StatementKind::Floating | StatementKind::Essential)
    }
}

/// Proof payload exactly as written in the source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proof {
    Normal(Vec<String>),
    Compressed { labels: Vec<String>, steps: String },
}

/// Data attached to `$a`/`$p` statements.
#[derive(Clone, Debug, Default)]
pub struct AssertionData {
    /// Mandatory hypotheses ($f and $e) in database order.
    pub hyps: Vec<StmtId>,
    /// Mandatory disjoint-variable pairs, each normalized to `(min, max)`.
    pub disjoint: Vec<(Sym, Sym)>,
    /// Every `$d` pair active at this statement (including ones that
    /// only mention dummy variables). Only filled for `$p`.
    pub active_disjoint: Vec<(Sym, Sym)>,
}

#[derive(Clone, Debug)]
pub struct Statement {
    pub label: Option<String>,
    pub kind: StatementKind,
    /// For `$f $e $a $p` the first symbol is the typecode; for
    /// `$c $v $d` these are the declared symbols.
    pub math: Vec<Sym>,
    pub proof: Option<Proof>,
    pub line: usize,
    /// Scope nesting depth (0 = outermost).
    pub depth: usize,
    /// Index one past the last statement in which this one is in scope.
    pub scope_end: u32,
    pub assertion: Option<AssertionData>,
}

impl Statement {
    pub fn typecode(&self) -> Option<Sym> {
        match self.kind {
            StatementKind::Floating
            | StatementKind::Essential
            | StatementKind::Axiom
            | StatementKind::Provable => self.math.first().copied(),
            _ => None,
        }
    }

    /// The symbols after the typecode.
    pub fn body(&self) -> &[Sym] {
        match self.typecode() {
            Some(_) => &self.math[1..],
            None => &self.math,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("")
    }
}

#[derive(Clone, Debug)]
pub struct Database {
    symbols: Vec<String>,
    symbol_kinds: Vec<SymbolKind>,
    symbol_index: HashMap<String, Sym>,
    statements: Vec<Statement>,
    label_index: HashMap<String, StmtId>,
    typecodes: Vec<Sym>,
    provable: Option<Sym>,
    floats: Vec<StmtId>,
}

/// Parse Metamath source text.
pub fn parse_database(source: &str) -> Result<Database, ParseError> {
    parser::parse(source)
}

impl Database {
    pub fn parse(source: &str) -> Result<Database, ParseError> {
        parse_database(source)
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn statement(&self, id: StmtId) -> &Statement {
        &self.statements[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = StmtId> + '_ {
        (0..self.statements.len() as u32).map(StmtId)
    }

    pub fn lookup(&self, label: &str) -> Option<StmtId> {
        self.label_index.get(label).copied()
    }

    pub fn label(&self, id: StmtId) -> &str {
        self.statement(id).label()
    }

    pub fn symbol(&self, name: &str) -> Option<Sym> {
        self.symbol_index.get(name).copied()
    }

    pub fn symbol_name(&self, sym: Sym) -> &str {
        &self.symbols[sym.index()]
    }

    pub fn symbol_kind(&self, sym: Sym) -> SymbolKind {
        self.symbol_kinds[sym.index()]
    }

    pub fn is_variable(&self, sym: Sym) -> bool {
        self.symbol_kind(sym) == SymbolKind::Variable
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    /// Typecodes used by `$f`, `$a` and `$p` statements, in order of first use.
    pub fn typecodes(&self) -> &[Sym] {
        &self.typecodes
    }

    /// The typecode that asserts provability ("|-" in set.mm).
    ///
    /// Detected as the typecode of assertions that is never the typecode
    /// of a variable; when several qualify, the one carrying the most
    /// proofs wins.
    pub fn provable_typecode(&self) -> Option<Sym> {
        self.provable
    }

    /// All `$f` statements in database order.
    pub fn floating_hyps(&self) -> &[StmtId] {
        &self.floats
    }

    /// Whether hypothesis `hyp` is in scope at statement `at`.
    pub fn in_scope(&self, hyp: StmtId, at: StmtId) -> bool {
        let s = self.statement(hyp);
        hyp < at && at.0 < s.scope_end
    }

    pub fn assertion(&self, id: StmtId) -> Option<&AssertionData> {
        self.statement(id).assertion.as_ref()
    }

    /// Render symbols back to text separated by single spaces.
    pub fn render_symbols(&self, syms: &[Sym]) -> String {
        let mut out = String::new();
        for (i, s) in syms.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.symbol_name(*s));
        }
        out
    }

    /// Propositions (`$p`) whose typecode is the provable typecode.
    pub fn provable_propositions(&self) -> impl Iterator<Item = StmtId> + '_ {
        let tc = self.provable;
        self.ids().filter(move |id| {
            let s = self.statement(*id);
            s.kind == StatementKind::Provable && s.typecode() == tc
        })
    }

    /// Re-serialize the statement list as Metamath source.
    ///
    /// Comments are gone and compressed proofs are kept compressed; the
    /// output parses back to an equivalent database.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        let mut depth = 0usize;
        for s in &self.statements {
            while depth > s.depth {
                depth -= 1;
                push_indent(&mut out, depth);
                out.push_str("$}\n");
            }
            while depth < s.depth {
                push_indent(&mut out, depth);
                out.push_str("${\n");
                depth += 1;
            }
            push_indent(&mut out, depth);
            if let Some(label) = &s.label {
                out.push_str(label);
                out.push(' ');
            }
            out.push_str(match s.kind {
                StatementKind::Constant => "$c",
                StatementKind::Variable => "$v",
                StatementKind::Floating => "$f",
                StatementKind::Essential => "$e",
                StatementKind::Disjoint => "$d",
                StatementKind::Axiom => "$a",
                StatementKind::Provable => "$p",
            });
            for sym in &s.math {
                out.push(' ');
                out.push_str(self.symbol_name(*sym));
            }
            if let Some(proof) = &s.proof {
                out.push_str(" $=");
                match proof {
                    Proof::Normal(labels) => {
                        for l in labels {
                            out.push(' ');
                            out.push_str(l);
                        }
                    }
                    Proof::Compressed { labels, steps } => {
                        out.push_str(" (");
                        for l in labels {
                            out.push(' ');
                            out.push_str(l);
                        }
                        out.push_str(" ) ");
                        out.push_str(steps);
                    }
                }
            }
            out.push_str(" $.\n");
        }
        while depth > 0 {
            depth -= 1;
            push_indent(&mut out, depth);
            out.push_str("$}\n");
        }
        out
    }
}

fn push_indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub(crate) fn normalize_pair(a: Sym, b: Sym) -> (Sym, Sym) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        $c ( ) -> wff |- $.
        $v ph ps $.
        wph $f wff ph $.
        wps $f wff ps $.
        ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
        th $p |- ( ph -> ( ps -> ph ) ) $= wph wps ax-1 $.
    ";

    #[test]
    fn minimal_database() {
        let db = parse_database(MINIMAL).unwrap();
        assert_eq!(db.statements().len(), 6);
        let labeled = db.statements().iter().filter(|s| s.label.is_some()).count();
        assert_eq!(labeled, 4);
        let ax = db.lookup("ax-1").unwrap();
        let data = db.assertion(ax).unwrap();
        assert_eq!(data.hyps.len(), 2);
        assert_eq!(db.symbol_name(db.provable_typecode().unwrap()), "|-");
    }

    #[test]
    fn unclosed_scope_is_an_error() {
        let err = parse_database("$c wff $. ${ $c x $.").unwrap_err();
        assert!(matches!(err, ParseError::Scope { .. }), "{err}");
    }

    #[test]
    fn undeclared_symbol_reports_line() {
        let err = parse_database("$c wff $.\n\nax $a wff foo $.").unwrap_err();
        match err {
            ParseError::UndeclaredSymbol { line, symbol } => {
                assert_eq!(line, 3);
                assert_eq!(symbol, "foo");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_label_is_rejected() {
        let err = parse_database("$c wff $. a $a wff $. a $a wff $.").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateLabel { .. }));
    }

    #[test]
    fn file_inclusion_is_rejected() {
        let err = parse_database("$[ set.mm $]").unwrap_err();
        assert!(matches!(err, ParseError::Unsupported { .. }));
    }

    #[test]
    fn source_round_trip() {
        let db = parse_database(MINIMAL).unwrap();
        let again = parse_database(&db.to_source()).unwrap();
        assert_eq!(db.to_source(), again.to_source());
        assert_eq!(db.statements().len(), again.statements().len());
    }
}
