use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::database::{StmtId, Sym};

/// Label of a parse-tree node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Head {
    Var(Sym),
    Ctor(StmtId),
}

struct Node {
    head: Head,
    typecode: Sym,
    args: Vec<Tree>,
    size: u32,
    hash: u64,
}

/// Immutable, cheaply clonable parse tree.
///
/// Children of a constructor node follow the order in which the
/// constructor's variables first occur in its body.
#[derive(Clone)]
pub struct Tree(Arc<Node>);

impl Tree {
    pub fn var(sym: Sym, typecode: Sym) -> Tree {
        Tree::build(Head::Var(sym), typecode, Vec::new())
    }

    pub fn ctor(id: StmtId, typecode: Sym, args: Vec<Tree>) -> Tree {
        Tree::build(Head::Ctor(id), typecode, args)
    }

    fn build(head: Head, typecode: Sym, args: Vec<Tree>) -> Tree {
        let mut h = DefaultHasher::new();
        head.hash(&mut h);
        typecode.hash(&mut h);
        for a in &args {
            a.0.hash.hash(&mut h);
        }
        let size = 1 + args.iter().map(|a| a.0.size).sum::<u32>();
        Tree(Arc::new(Node { head, typecode, args, size, hash: h.finish() }))
    }

    pub fn head(&self) -> Head {
        self.0.head
    }

    pub fn typecode(&self) -> Sym {
        self.0.typecode
    }

    pub fn args(&self) -> &[Tree] {
        &self.0.args
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        self.0.size as usize
    }

    pub fn as_var(&self) -> Option<Sym> {
        match self.0.head {
            Head::Var(v) => Some(v),
            Head::Ctor(_) => None,
        }
    }

    pub fn ctor_id(&self) -> Option<StmtId> {
        match self.0.head {
            Head::Ctor(c) => Some(c),
            Head::Var(_) => None,
        }
    }

    pub fn ptr_eq(&self, other: &Tree) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Visit every node in depth-first pre-order.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    /// Variables in order of first pre-order occurrence, without repeats.
    pub fn vars(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        for node in self.preorder() {
            if let Some(v) = node.as_var() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn contains_var(&self, v: Sym) -> bool {
        self.preorder().any(|n| n.as_var() == Some(v))
    }

    /// Number of tokens this tree occupies in a pre-order token sequence.
    pub fn token_len(&self) -> usize {
        self.size()
    }

    /// All distinct subtrees (including `self`), largest first.
    pub fn subtrees(&self) -> Vec<Tree> {
        let mut out: Vec<Tree> = Vec::new();
        for node in self.preorder() {
            if !out.contains(node) {
                out.push(node.clone());
            }
        }
        out
    }
}

pub struct Preorder<'a> {
    stack: Vec<&'a Tree>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a Tree;

    fn next(&mut self) -> Option<&'a Tree> {
        let t = self.stack.pop()?;
        self.stack.extend(t.0.args.iter().rev());
        Some(t)
    }
}

impl PartialEq for Tree {
    fn eq(&self, other: &Tree) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        self.0.hash == other.0.hash
            && self.0.size == other.0.size
            && self.0.head == other.0.head
            && self.0.typecode == other.0.typecode
            && self.0.args == other.0.args
    }
}

impl Eq for Tree {}

impl Hash for Tree {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.head {
            Head::Var(v) => write!(f, "v{}", v.0),
            Head::Ctor(c) => {
                write!(f, "c{}(", c.0)?;
                for (i, a) in self.0.args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}
