use std::collections::HashMap;

use thiserror::Error;

use super::{
    normalize_pair, AssertionData, Database, Proof, Statement, StatementKind, StmtId, Sym,
    SymbolKind,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: lexical error: {msg}")]
    Lexical { line: usize, msg: String },
    #[error("line {line}: scope error: {msg}")]
    Scope { line: usize, msg: String },
    #[error("line {line}: undeclared symbol `{symbol}`")]
    UndeclaredSymbol { line: usize, symbol: String },
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: malformed statement: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unsupported construct: {msg}")]
    Unsupported { line: usize, msg: String },
}

struct Token<'a> {
    text: &'a str,
    line: usize,
}

fn lex(source: &str) -> Result<Vec<Token<'_>>, ParseError> {
    let mut out = Vec::new();
    let mut in_comment: Option<usize> = None;
    for (lineno, line) in source.lines().enumerate() {
        let line_no = lineno + 1;
        for text in line.split_ascii_whitespace() {
            if in_comment.is_some() {
                if text == "$)" {
                    in_comment = None;
                } else if text.contains("$)") || text.contains("$(") {
                    return Err(ParseError::Lexical {
                        line: line_no,
                        msg: format!("comment delimiter inside token `{text}`"),
                    });
                }
                continue;
            }
            if text == "$(" {
                in_comment = Some(line_no);
                continue;
            }
            if !text.is_ascii() {
                return Err(ParseError::Lexical {
                    line: line_no,
                    msg: format!("non-ASCII token `{text}`"),
                });
            }
            out.push(Token { text, line: line_no });
        }
    }
    if let Some(line) = in_comment {
        return Err(ParseError::Lexical { line, msg: "unterminated comment".into() });
    }
    Ok(out)
}

fn is_label(text: &str) -> bool {
    !text.is_empty()
        && text
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
}

#[derive(Default)]
struct Scope {
    vars: Vec<Sym>,
    floats: Vec<StmtId>,
    essentials: Vec<StmtId>,
    disjoint: Vec<(Sym, Sym)>,
    members: Vec<StmtId>,
}

struct Parser {
    symbols: Vec<String>,
    symbol_kinds: Vec<SymbolKind>,
    symbol_index: HashMap<String, Sym>,
    var_active: Vec<bool>,
    active_float: HashMap<Sym, StmtId>,
    statements: Vec<Statement>,
    label_index: HashMap<String, StmtId>,
    scopes: Vec<Scope>,
    typecodes: Vec<Sym>,
    float_typecodes: Vec<Sym>,
    floats: Vec<StmtId>,
}

pub(super) fn parse(source: &str) -> Result<Database, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        symbols: Vec::new(),
        symbol_kinds: Vec::new(),
        symbol_index: HashMap::new(),
        var_active: Vec::new(),
        active_float: HashMap::new(),
        statements: Vec::new(),
        label_index: HashMap::new(),
        scopes: vec![Scope::default()],
        typecodes: Vec::new(),
        float_typecodes: Vec::new(),
        floats: Vec::new(),
    };
    p.run(&tokens)?;
    let provable = p.detect_provable();
    Ok(Database {
        symbols: p.symbols,
        symbol_kinds: p.symbol_kinds,
        symbol_index: p.symbol_index,
        statements: p.statements,
        label_index: p.label_index,
        typecodes: p.typecodes,
        provable,
        floats: p.floats,
    })
}

impl Parser {
    fn run(&mut self, tokens: &[Token<'_>]) -> Result<(), ParseError> {
        let mut i = 0;
        let mut pending_label: Option<(&str, usize)> = None;
        while i < tokens.len() {
            let tok = &tokens[i];
            i += 1;
            match tok.text {
                "${" => {
                    self.no_label(pending_label.take())?;
                    self.scopes.push(Scope::default());
                }
                "$}" => {
                    self.no_label(pending_label.take())?;
                    if self.scopes.len() == 1 {
                        return Err(ParseError::Scope { line: tok.line, msg: "unmatched `$}`".into() });
                    }
                    self.close_scope();
                }
                "$c" | "$v" | "$d" => {
                    self.no_label(pending_label.take())?;
                    let (body, next) = read_until(tokens, i, "$.", tok.line)?;
                    i = next;
                    match tok.text {
                        "$c" => self.declare(&body, SymbolKind::Constant, tok.line)?,
                        "$v" => self.declare(&body, SymbolKind::Variable, tok.line)?,
                        _ => self.disjoint(&body, tok.line)?,
                    }
                }
                "$f" | "$e" | "$a" | "$p" => {
                    let Some((label, _)) = pending_label.take() else {
                        return Err(ParseError::Malformed {
                            line: tok.line,
                            msg: format!("`{}` without a label", tok.text),
                        });
                    };
                    let (body, next) = read_until(tokens, i, "$.", tok.line)?;
                    i = next;
                    match tok.text {
                        "$f" => self.floating(label, &body, tok.line)?,
                        "$e" => self.essential(label, &body, tok.line)?,
                        "$a" => self.assertion(label, &body, None, tok.line)?,
                        _ => {
                            let Some(split) = body.iter().position(|t| t.text == "$=") else {
                                return Err(ParseError::Malformed {
                                    line: tok.line,
                                    msg: "`$p` without `$=`".into(),
                                });
                            };
                            let proof = parse_proof(&body[split + 1..], tok.line)?;
                            self.assertion(label, &body[..split], Some(proof), tok.line)?;
                        }
                    }
                }
                "$[" | "$]" => {
                    return Err(ParseError::Unsupported {
                        line: tok.line,
                        msg: "file inclusion is not supported".into(),
                    })
                }
                "$)" => {
                    return Err(ParseError::Lexical { line: tok.line, msg: "`$)` outside comment".into() })
                }
                text if text.starts_with('$') => {
                    return Err(ParseError::Lexical {
                        line: tok.line,
                        msg: format!("unknown keyword `{text}`"),
                    })
                }
                text => {
                    if let Some((prev, line)) = pending_label {
                        return Err(ParseError::Malformed {
                            line,
                            msg: format!("label `{prev}` not followed by a statement"),
                        });
                    }
                    if !is_label(text) {
                        return Err(ParseError::Lexical {
                            line: tok.line,
                            msg: format!("invalid label `{text}`"),
                        });
                    }
                    pending_label = Some((text, tok.line));
                }
            }
        }
        if let Some((label, line)) = pending_label {
            return Err(ParseError::Malformed { line, msg: format!("dangling label `{label}`") });
        }
        if self.scopes.len() != 1 {
            let line = tokens.last().map_or(0, |t| t.line);
            return Err(ParseError::Scope { line, msg: "unclosed `${` at end of file".into() });
        }
        Ok(())
    }

    fn no_label(&self, pending: Option<(&str, usize)>) -> Result<(), ParseError> {
        match pending {
            None => Ok(()),
            Some((label, line)) => Err(ParseError::Malformed {
                line,
                msg: format!("label `{label}` on an unlabeled statement"),
            }),
        }
    }

    fn close_scope(&mut self) {
        let scope = self.scopes.pop().expect("scope stack underflow");
        let end = self.statements.len() as u32;
        for v in scope.vars {
            self.var_active[v.index()] = false;
        }
        for f in &scope.floats {
            let var = self.statements[f.index()].math[1];
            self.active_float.remove(&var);
        }
        for id in scope.members {
            self.statements[id.index()].scope_end = end;
        }
    }

    fn intern(&mut self, name: &str, kind: SymbolKind) -> Sym {
        if let Some(s) = self.symbol_index.get(name) {
            return *s;
        }
        let s = Sym(self.symbols.len() as u32);
        self.symbols.push(name.to_string());
        self.symbol_kinds.push(kind);
        self.var_active.push(false);
        self.symbol_index.insert(name.to_string(), s);
        s
    }

    fn push_statement(&mut self, stmt: Statement) -> Result<StmtId, ParseError> {
        let id = StmtId(self.statements.len() as u32);
        if let Some(label) = &stmt.label {
            if self.label_index.contains_key(label) || self.symbol_index.contains_key(label) {
                return Err(ParseError::DuplicateLabel { line: stmt.line, label: label.clone() });
            }
            self.label_index.insert(label.clone(), id);
        }
        self.statements.push(stmt);
        self.scopes.last_mut().unwrap().members.push(id);
        Ok(id)
    }

    fn new_statement(&self, label: Option<&str>, kind: StatementKind, math: Vec<Sym>, line: usize) -> Statement {
        Statement {
            label: label.map(str::to_string),
            kind,
            math,
            proof: None,
            line,
            depth: self.scopes.len() - 1,
            scope_end: u32::MAX,
            assertion: None,
        }
    }

    fn declare(&mut self, body: &[&Token<'_>], kind: SymbolKind, line: usize) -> Result<(), ParseError> {
        if body.is_empty() {
            return Err(ParseError::Malformed { line, msg: "empty declaration".into() });
        }
        let mut syms = Vec::new();
        for t in body {
            if t.text.starts_with('$') {
                return Err(ParseError::Lexical { line: t.line, msg: format!("bad math symbol `{}`", t.text) });
            }
            if self.label_index.contains_key(t.text) {
                return Err(ParseError::DuplicateLabel { line: t.line, label: t.text.to_string() });
            }
            if let Some(&existing) = self.symbol_index.get(t.text) {
                let ek = self.symbol_kinds[existing.index()];
                let clash = match kind {
                    SymbolKind::Constant => true,
                    SymbolKind::Variable => ek == SymbolKind::Constant || self.var_active[existing.index()],
                };
                if clash {
                    return Err(ParseError::Malformed {
                        line: t.line,
                        msg: format!("symbol `{}` redeclared", t.text),
                    });
                }
            }
            let s = self.intern(t.text, kind);
            if kind == SymbolKind::Variable {
                self.var_active[s.index()] = true;
                self.scopes.last_mut().unwrap().vars.push(s);
            }
            syms.push(s);
        }
        let skind = match kind {
            SymbolKind::Constant => StatementKind::Constant,
            SymbolKind::Variable => StatementKind::Variable,
        };
        let stmt = self.new_statement(None, skind, syms, line);
        self.push_statement(stmt)?;
        Ok(())
    }

    fn resolve(&self, t: &Token<'_>) -> Result<Sym, ParseError> {
        let Some(&s) = self.symbol_index.get(t.text) else {
            return Err(ParseError::UndeclaredSymbol { line: t.line, symbol: t.text.to_string() });
        };
        if self.symbol_kinds[s.index()] == SymbolKind::Variable && !self.var_active[s.index()] {
            return Err(ParseError::UndeclaredSymbol { line: t.line, symbol: t.text.to_string() });
        }
        Ok(s)
    }

    fn resolve_math(&self, body: &[&Token<'_>], line: usize) -> Result<Vec<Sym>, ParseError> {
        if body.is_empty() {
            return Err(ParseError::Malformed { line, msg: "empty math string".into() });
        }
        let syms = body.iter().map(|t| self.resolve(t)).collect::<Result<Vec<_>, _>>()?;
        if self.symbol_kinds[syms[0].index()] != SymbolKind::Constant {
            return Err(ParseError::Malformed { line, msg: "typecode must be a constant".into() });
        }
        for (s, t) in syms.iter().zip(body) {
            if self.symbol_kinds[s.index()] == SymbolKind::Variable && !self.active_float.contains_key(s) {
                return Err(ParseError::Malformed {
                    line: t.line,
                    msg: format!("variable `{}` has no active `$f`", t.text),
                });
            }
        }
        Ok(syms)
    }

    fn note_typecode(&mut self, tc: Sym) {
        if !self.typecodes.contains(&tc) {
            self.typecodes.push(tc);
        }
    }

    fn disjoint(&mut self, body: &[&Token<'_>], line: usize) -> Result<(), ParseError> {
        let syms = body.iter().map(|t| self.resolve(t)).collect::<Result<Vec<_>, _>>()?;
        for (s, t) in syms.iter().zip(body) {
            if self.symbol_kinds[s.index()] != SymbolKind::Variable {
                return Err(ParseError::Malformed { line: t.line, msg: format!("`$d` on constant `{}`", t.text) });
            }
        }
        for i in 0..syms.len() {
            for j in i + 1..syms.len() {
                if syms[i] == syms[j] {
                    return Err(ParseError::Malformed { line, msg: "repeated variable in `$d`".into() });
                }
                let pair = normalize_pair(syms[i], syms[j]);
                self.scopes.last_mut().unwrap().disjoint.push(pair);
            }
        }
        let stmt = self.new_statement(None, StatementKind::Disjoint, syms, line);
        self.push_statement(stmt)?;
        Ok(())
    }

    fn floating(&mut self, label: &str, body: &[&Token<'_>], line: usize) -> Result<(), ParseError> {
        if body.len() != 2 {
            return Err(ParseError::Malformed { line, msg: "`$f` must have a typecode and one variable".into() });
        }
        let tc = self.resolve(body[0])?;
        let var = self.resolve(body[1])?;
        if self.symbol_kinds[tc.index()] != SymbolKind::Constant {
            return Err(ParseError::Malformed { line, msg: "typecode must be a constant".into() });
        }
        if self.symbol_kinds[var.index()] != SymbolKind::Variable {
            return Err(ParseError::Malformed { line, msg: "`$f` on a constant".into() });
        }
        if self.active_float.contains_key(&var) {
            return Err(ParseError::Malformed {
                line,
                msg: format!("variable `{}` already has an active `$f`", body[1].text),
            });
        }
        let stmt = self.new_statement(Some(label), StatementKind::Floating, vec![tc, var], line);
        let id = self.push_statement(stmt)?;
        self.active_float.insert(var, id);
        self.scopes.last_mut().unwrap().floats.push(id);
        self.floats.push(id);
        self.note_typecode(tc);
        if !self.float_typecodes.contains(&tc) {
            self.float_typecodes.push(tc);
        }
        Ok(())
    }

    fn essential(&mut self, label: &str, body: &[&Token<'_>], line: usize) -> Result<(), ParseError> {
        let math = self.resolve_math(body, line)?;
        let stmt = self.new_statement(Some(label), StatementKind::Essential, math, line);
        let id = self.push_statement(stmt)?;
        self.scopes.last_mut().unwrap().essentials.push(id);
        Ok(())
    }

    fn assertion(
        &mut self,
        label: &str,
        body: &[&Token<'_>],
        proof: Option<Proof>,
        line: usize,
    ) -> Result<(), ParseError> {
        let math = self.resolve_math(body, line)?;
        let kind = if proof.is_some() { StatementKind::Provable } else { StatementKind::Axiom };
        let data = self.frame_for(&math, kind == StatementKind::Provable);
        self.note_typecode(math[0]);
        let mut stmt = self.new_statement(Some(label), kind, math, line);
        stmt.proof = proof;
        stmt.assertion = Some(data);
        self.push_statement(stmt)?;
        Ok(())
    }

    fn frame_for(&self, math: &[Sym], with_active: bool) -> AssertionData {
        let essentials: Vec<StmtId> = self.scopes.iter().flat_map(|s| s.essentials.iter().copied()).collect();
        let mut mandatory = vec![false; self.symbols.len()];
        let mut mark = |syms: &[Sym]| {
            for s in syms {
                if self.symbol_kinds[s.index()] == SymbolKind::Variable {
                    mandatory[s.index()] = true;
                }
            }
        };
        mark(math);
        for e in &essentials {
            mark(&self.statements[e.index()].math);
        }
        let mut hyps: Vec<StmtId> = essentials;
        for scope in &self.scopes {
            for f in &scope.floats {
                let var = self.statements[f.index()].math[1];
                if mandatory[var.index()] {
                    hyps.push(*f);
                }
            }
        }
        hyps.sort();
        let mut disjoint = Vec::new();
        let mut active = Vec::new();
        for scope in &self.scopes {
            for &(a, b) in &scope.disjoint {
                if mandatory[a.index()] && mandatory[b.index()] && !disjoint.contains(&(a, b)) {
                    disjoint.push((a, b));
                }
                if with_active && !active.contains(&(a, b)) {
                    active.push((a, b));
                }
            }
        }
        disjoint.sort();
        active.sort();
        AssertionData { hyps, disjoint, active_disjoint: active }
    }

    fn detect_provable(&self) -> Option<Sym> {
        let mut best: Option<(Sym, usize, usize)> = None;
        for &tc in &self.typecodes {
            if self.float_typecodes.contains(&tc) {
                continue;
            }
            let mut props = 0;
            let mut axioms = 0;
            for s in &self.statements {
                if s.math.first() == Some(&tc) {
                    match s.kind {
                        StatementKind::Provable => props += 1,
                        StatementKind::Axiom => axioms += 1,
                        _ => {}
                    }
                }
            }
            if props + axioms == 0 {
                continue;
            }
            match best {
                Some((_, bp, ba)) if (bp, ba) >= (props, axioms) => {}
                _ => best = Some((tc, props, axioms)),
            }
        }
        best.map(|b| b.0)
    }
}

fn read_until<'t, 'a>(
    tokens: &'t [Token<'a>],
    mut i: usize,
    end: &str,
    line: usize,
) -> Result<(Vec<&'t Token<'a>>, usize), ParseError> {
    let mut out = Vec::new();
    while i < tokens.len() {
        let t = &tokens[i];
        i += 1;
        if t.text == end {
            return Ok((out, i));
        }
        if t.text.starts_with('$') && t.text != "$=" {
            return Err(ParseError::Malformed {
                line: t.line,
                msg: format!("unexpected `{}` before `{end}`", t.text),
            });
        }
        out.push(t);
    }
    Err(ParseError::Malformed { line, msg: format!("statement not terminated by `{end}`") })
}

fn parse_proof(tokens: &[&Token<'_>], line: usize) -> Result<Proof, ParseError> {
    if tokens.first().map(|t| t.text) == Some("(") {
        let Some(close) = tokens.iter().position(|t| t.text == ")") else {
            return Err(ParseError::Malformed { line, msg: "compressed proof without `)`".into() });
        };
        let labels = tokens[1..close].iter().map(|t| t.text.to_string()).collect();
        let mut steps = String::new();
        for t in &tokens[close + 1..] {
            steps.push_str(t.text);
        }
        Ok(Proof::Compressed { labels, steps })
    } else {
        Ok(Proof::Normal(tokens.iter().map(|t| t.text.to_string()).collect()))
    }
}
