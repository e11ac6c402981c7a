//! Token vocabulary and pre-order tokenization of parse trees.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Grammar, Head, Tree};
use crate::database::{Database, StmtId, Sym};

/// Per-token graph features: depth, degree, parent degree, position in parent.
pub const FEATURE_WIDTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Special {
    Eoh,
    Eos,
    Start,
    Uv,
    Target,
}

impl Special {
    pub const ALL: [Special; 5] = [Special::Eoh, Special::Eos, Special::Start, Special::Uv, Special::Target];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Special::Eoh => "EOH",
            Special::Eos => "EOS",
            Special::Start => "START",
            Special::Uv => "UV",
            Special::Target => "TARGET",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("line {line}: expected special token `{expected}`")]
    MissingSpecial { line: usize, expected: &'static str },
    #[error("line {line}: unknown token `{token}`")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: duplicate token `{token}`")]
    Duplicate { line: usize, token: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("variable {0:?} has no renaming")]
    MissingRenaming(Sym),
    #[error("variables {0:?} and {1:?} are renamed to the same token")]
    Collision(Sym, Sym),
    #[error("constructor {0} is not in the vocabulary")]
    UnknownConstructor(StmtId),
    #[error("token {0} cannot start a subtree here")]
    UnexpectedToken(u32),
    #[error("token sequence ended inside a tree")]
    Truncated,
    #[error("token {token} has typecode {found:?}, expected {expected:?}")]
    TypeMismatch { token: u32, expected: Sym, found: Sym },
}

/// Shared token ids: specials, one token per constructor, then dummy
/// variables per typecode.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    ctor_token: HashMap<StmtId, u32>,
    token_ctor: HashMap<u32, StmtId>,
    dummies: BTreeMap<Sym, Vec<u32>>,
    token_dummy: HashMap<u32, Sym>,
}

fn dummy_name(typecode: &str, k: usize) -> String {
    format!("VAR:{typecode}:{k}")
}

/// One dummy per distinct variable of each typecode declared by a `$f`,
/// enough to rename any context or theorem.
pub fn dummy_counts(db: &Database) -> BTreeMap<Sym, usize> {
    let mut vars: BTreeMap<Sym, std::collections::BTreeSet<Sym>> = BTreeMap::new();
    for f in db.floating_hyps() {
        let m = &db.statement(*f).math;
        vars.entry(m[0]).or_default().insert(m[1]);
    }
    vars.into_iter().map(|(tc, vs)| (tc, vs.len())).collect()
}

impl Vocabulary {
    /// `dummy_counts` gives the number of dummy variables per typecode.
    pub fn build(grammar: &Grammar, dummy_counts: &BTreeMap<Sym, usize>) -> Vocabulary {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            ctor_token: HashMap::new(),
            token_ctor: HashMap::new(),
            dummies: BTreeMap::new(),
            token_dummy: HashMap::new(),
        };
        for s in Special::ALL {
            v.push(s.name().to_string());
        }
        for c in grammar.constructors() {
            let id = v.push(c.label.clone());
            v.ctor_token.insert(c.id, id);
            v.token_ctor.insert(id, c.id);
        }
        for (tc, n) in dummy_counts {
            let name = grammar.symbol_name(*tc).to_string();
            for k in 1..=*n {
                let id = v.push(dummy_name(&name, k));
                v.dummies.entry(*tc).or_default().push(id);
                v.token_dummy.insert(id, *tc);
            }
        }
        v
    }

    fn push(&mut self, name: String) -> u32 {
        let id = self.tokens.len() as u32;
        self.index.insert(name.clone(), id);
        self.tokens.push(name);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn name(&self, token: u32) -> Option<&str> {
        self.tokens.get(token as usize).map(String::as_str)
    }

    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn ctor_token(&self, id: StmtId) -> Option<u32> {
        self.ctor_token.get(&id).copied()
    }

    pub fn token_ctor(&self, token: u32) -> Option<StmtId> {
        self.token_ctor.get(&token).copied()
    }

    /// Dummy variable tokens of a typecode.
    pub fn dummies(&self, typecode: Sym) -> &[u32] {
        self.dummies.get(&typecode).map_or(&[], Vec::as_slice)
    }

    pub fn dummy_typecode(&self, token: u32) -> Option<Sym> {
        self.token_dummy.get(&token).copied()
    }

    pub fn is_special(token: u32) -> bool {
        token < Special::ALL.len() as u32
    }

    /// One token per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Hex sha256 of [`Vocabulary::to_text`].
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Load a vocabulary file, resolving constructor labels against `db`.
    pub fn from_text(text: &str, db: &Database) -> Result<Vocabulary, VocabularyError> {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            ctor_token: HashMap::new(),
            token_ctor: HashMap::new(),
            dummies: BTreeMap::new(),
            token_dummy: HashMap::new(),
        };
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let name = line.trim_end();
            if v.index.contains_key(name) {
                return Err(VocabularyError::Duplicate { line: line_no, token: name.to_string() });
            }
            if n < Special::ALL.len() {
                let expected = Special::ALL[n].name();
                if name != expected {
                    return Err(VocabularyError::MissingSpecial { line: line_no, expected });
                }
                v.push(name.to_string());
                continue;
            }
            let unknown = || VocabularyError::UnknownToken { line: line_no, token: name.to_string() };
            if let Some(rest) = name.strip_prefix("VAR:") {
                let (tc, _) = rest.rsplit_once(':').ok_or_else(unknown)?;
                let tc = db.symbol(tc).ok_or_else(unknown)?;
                let id = v.push(name.to_string());
                v.dummies.entry(tc).or_default().push(id);
                v.token_dummy.insert(id, tc);
            } else {
                let stmt = db.lookup(name).ok_or_else(unknown)?;
                let id = v.push(name.to_string());
                v.ctor_token.insert(stmt, id);
                v.token_ctor.insert(id, stmt);
            }
        }
        if v.tokens.len() < Special::ALL.len() {
            let missing = Special::ALL[v.tokens.len()].name();
            return Err(VocabularyError::MissingSpecial { line: v.tokens.len() + 1, expected: missing });
        }
        Ok(v)
    }

    /// Decode one pre-order tree from the front of `tokens`.
    ///
    /// `leaves` maps non-constructor tokens (dummy variables, markers) to
    /// the tree they stand for. Returns the tree and the number of tokens
    /// consumed.
    pub fn decode(
        &self,
        tokens: &[u32],
        grammar: &Grammar,
        leaves: &HashMap<u32, Tree>,
    ) -> Result<(Tree, usize), TokenizeError> {
        let mut pos = 0;
        let t = self.decode_at(tokens, &mut pos, grammar, leaves, None)?;
        Ok((t, pos))
    }

    fn decode_at(
        &self,
        tokens: &[u32],
        pos: &mut usize,
        grammar: &Grammar,
        leaves: &HashMap<u32, Tree>,
        expected: Option<Sym>,
    ) -> Result<Tree, TokenizeError> {
        let &tok = tokens.get(*pos).ok_or(TokenizeError::Truncated)?;
        *pos += 1;
        let tree = if let Some(leaf) = leaves.get(&tok) {
            leaf.clone()
        } else if let Some(c) = self.token_ctor(tok).and_then(|id| grammar.constructor(id)) {
            let mut args = Vec::with_capacity(c.arity());
            for t in &c.slot_types {
                args.push(self.decode_at(tokens, pos, grammar, leaves, Some(*t))?);
            }
            Tree::ctor(c.id, c.typecode, args)
        } else {
            return Err(TokenizeError::UnexpectedToken(tok));
        };
        if let Some(e) = expected {
            if tree.typecode() != e {
                return Err(TokenizeError::TypeMismatch { token: tok, expected: e, found: tree.typecode() });
            }
        }
        Ok(tree)
    }
}

/// Token ids with their graph features.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub features: Vec<[u32; FEATURE_WIDTH]>,
}

impl TokenSequence {
    pub fn new() -> TokenSequence {
        TokenSequence::default()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn push_special(&mut self, s: Special) {
        self.tokens.push(s.id());
        self.features.push([0; FEATURE_WIDTH]);
    }

    /// Append `t` in depth-first pre-order. Variables are looked up in
    /// `renaming`; a variable renamed to a special token gets zero features.
    pub fn push_tree(
        &mut self,
        t: &Tree,
        renaming: &HashMap<Sym, u32>,
        vocab: &Vocabulary,
    ) -> Result<(), TokenizeError> {
        self.push_node(t, 0, 0, 0, renaming, vocab)
    }

    fn push_node(
        &mut self,
        t: &Tree,
        depth: u32,
        parent_degree: u32,
        position: u32,
        renaming: &HashMap<Sym, u32>,
        vocab: &Vocabulary,
    ) -> Result<(), TokenizeError> {
        let tok = match t.head() {
            Head::Var(v) => *renaming.get(&v).ok_or(TokenizeError::MissingRenaming(v))?,
            Head::Ctor(c) => vocab.ctor_token(c).ok_or(TokenizeError::UnknownConstructor(c))?,
        };
        let degree = t.args().len() as u32;
        self.tokens.push(tok);
        if Vocabulary::is_special(tok) {
            self.features.push([0; FEATURE_WIDTH]);
        } else {
            self.features.push([depth, degree, parent_degree, position]);
        }
        for (k, a) in t.args().iter().enumerate() {
            self.push_node(a, depth + 1, degree, k as u32, renaming, vocab)?;
        }
        Ok(())
    }
}

/// Check that `renaming` sends distinct variables to distinct non-special
/// tokens.
pub(crate) fn check_renaming(renaming: &HashMap<Sym, u32>) -> Result<(), TokenizeError> {
    let mut seen: HashMap<u32, Sym> = HashMap::new();
    let mut entries: Vec<(&Sym, &u32)> = renaming.iter().collect();
    entries.sort();
    for (v, t) in entries {
        if Vocabulary::is_special(*t) {
            continue;
        }
        if let Some(prev) = seen.insert(*t, *v) {
            return Err(TokenizeError::Collision(prev, *v));
        }
    }
    Ok(())
}

/// Tokenize groups of trees: trees within a group are separated by `EOH`,
/// groups by `EOS`. No separator follows the final group.
pub fn tokenize(
    groups: &[&[Tree]],
    renaming: &HashMap<Sym, u32>,
    vocab: &Vocabulary,
) -> Result<TokenSequence, TokenizeError> {
    check_renaming(renaming)?;
    let mut seq = TokenSequence::new();
    for (gi, group) in groups.iter().enumerate() {
        if gi > 0 {
            seq.push_special(Special::Eos);
        }
        for (ti, t) in group.iter().enumerate() {
            if ti > 0 {
                seq.push_special(Special::Eoh);
            }
            seq.push_tree(t, renaming, vocab)?;
        }
    }
    Ok(seq)
}
