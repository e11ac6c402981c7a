//! Partial-proof-tree search: repeated passes from the root that either
//! expand a red node with a new theorem application or descend through the
//! most promising existing one.

mod queue;
mod tree;

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::Serialize;

use crate::database::StmtId;
use crate::frame::{Context, Library, TheoremFrame};
use crate::grammar::Tree;
use crate::guidance::{Guidance, ViableTheorem};
use crate::unify::{apply_substitution, is_viable_full, match_into, viable_theorems, Substitution};
use crate::verifier::{verify_proof_tree, ProofTree};

pub use queue::{candidate_value, Entry, ExpansionQueue};
use tree::QueueState;
pub use tree::{blue_priority, child_cap, BlueId, BlueNode, RedId, RedNode, SearchTree};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub child_divisor: u64,
    pub pass_limit: u64,
    pub wall_clock_limit: Duration,
    pub beam_width: usize,
    pub token_limit: usize,
    pub threads: usize,
}

impl Default for SearchParams {
    fn default() -> SearchParams {
        SearchParams {
            alpha: 1.0,
            beta: 0.5,
            gamma: 3.0,
            child_divisor: 3,
            pass_limit: 10_000,
            wall_clock_limit: Duration::from_secs(300),
            beam_width: 5,
            token_limit: 75,
            threads: 1,
        }
    }
}

/// What a single pass did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassOutcome {
    /// The root received its initial payoff.
    FirstVisit,
    /// A blue node and its red children were created.
    Expanded(BlueId),
    /// Generation hit the token limit and a dummy child was added.
    DummyAdded(BlueId),
    DummyVisited(BlueId),
    /// The expansion queue of the node ran dry.
    Exhausted(RedId),
    /// The pass met a node another pass is expanding; nothing changed.
    Busy,
    /// The root is already proven or dead.
    Finished,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    RootDead,
    PassLimit,
    Timeout,
    /// The pruned tree did not verify; never expected.
    Unsound(String),
}

#[derive(Clone, Debug)]
pub struct Success {
    pub proof: ProofTree,
    pub passes: u64,
    pub nodes: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub passes: u64,
    pub nodes: usize,
    pub root_dead: bool,
    pub timeout: bool,
    pub reason: FailureReason,
}

/// One line of the optional search trace.
#[derive(Serialize)]
struct TraceRecord<'a> {
    pass: u64,
    path: &'a [String],
    action: &'a str,
    value: f64,
}

/// Theorem, substitution and hypothesis matches closing a goal in one step.
type LastStep = (Arc<TheoremFrame>, Substitution, Vec<(Tree, StmtId)>);

/// A red node built outside the lock, attached on completion.
struct NewRed {
    expr: Tree,
    hyp: Option<StmtId>,
    y: f64,
    last_step: Option<LastStep>,
}

enum Expansion {
    Blue { frame: Arc<TheoremFrame>, subst: Substitution, value: f64, children: Vec<NewRed> },
    Dummy { value: f64 },
    Exhausted,
}

pub struct Search {
    lib: Arc<Library>,
    ctx: Arc<Context>,
    guidance: Arc<dyn Guidance>,
    params: SearchParams,
    tree: Mutex<SearchTree>,
    viable: Mutex<HashMap<Tree, Arc<Vec<ViableTheorem>>>>,
    payoffs: Mutex<HashMap<Tree, f64>>,
    trace: Option<Mutex<Box<dyn Write + Send>>>,
    passes: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Search {
    /// Create the root for the context assertion, applying the hypothesis
    /// and last-step rules immediately.
    pub fn new(lib: Arc<Library>, ctx: Arc<Context>, guidance: Arc<dyn Guidance>, params: SearchParams) -> Search {
        let expr = ctx.assertion().clone();
        let hyp = ctx.hyp_label(&expr);
        let mut s = Search {
            lib,
            ctx,
            guidance,
            params,
            tree: Mutex::new(SearchTree::with_root(expr.clone(), hyp)),
            viable: Mutex::new(HashMap::new()),
            payoffs: Mutex::new(HashMap::new()),
            trace: None,
            passes: AtomicU64::new(0),
        };
        if hyp.is_none() {
            if let Some(ls) = s.last_step(&expr) {
                let tree = s.tree.get_mut().unwrap_or_else(|e| e.into_inner());
                attach_last_step(tree, tree.root(), ls);
                tree.refresh_path(tree.root());
            }
        }
        s
    }

    pub fn with_trace(mut self, out: Box<dyn Write + Send>) -> Search {
        self.trace = Some(Mutex::new(out));
        self
    }

    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    /// Lock the tree for inspection. Passes block while the guard lives.
    pub fn tree(&self) -> MutexGuard<'_, SearchTree> {
        lock(&self.tree)
    }

    /// Passes run so far, not counting passes that found their target busy.
    pub fn passes(&self) -> u64 {
        self.passes.load(Ordering::SeqCst)
    }

    pub fn is_finished(&self) -> bool {
        let t = self.tree();
        let r = t.red(t.root());
        r.proven || r.dead
    }

    fn payoff(&self, a: &Tree) -> f64 {
        if let Some(p) = lock(&self.payoffs).get(a) {
            return *p;
        }
        let p = match self.guidance.payoff(&self.ctx, a) {
            Ok(p) if p.is_finite() => p.clamp(0.0, 1.0),
            Ok(_) => 0.0,
            Err(e) => {
                debug!("payoff query failed: {e}");
                0.0
            }
        };
        lock(&self.payoffs).insert(a.clone(), p);
        p
    }

    fn viable(&self, a: &Tree) -> Arc<Vec<ViableTheorem>> {
        if let Some(v) = lock(&self.viable).get(a) {
            return v.clone();
        }
        let v = Arc::new(viable_theorems(a, &self.ctx, &self.lib));
        lock(&self.viable).insert(a.clone(), v.clone());
        v
    }

    /// A viable application at `a` whose hypotheses all lie in the context
    /// hypotheses, with the matched hypothesis labels.
    fn last_step(&self, a: &Tree) -> Option<LastStep> {
        let e_c = self.ctx.hyps();
        for (frame, s) in self.viable(a).iter() {
            let mut found = None;
            cover_hyps(&frame.hyps, e_c, s.clone(), &mut |phi| {
                if is_viable_full(&phi, frame, &self.ctx) {
                    found = Some(phi);
                    true
                } else {
                    false
                }
            });
            if let Some(phi) = found {
                let leaves = frame
                    .hyps
                    .iter()
                    .map(|h| {
                        let e = apply_substitution(h, &phi).expect("typed substitution");
                        let label = self.ctx.hyp_label(&e).expect("matched a context hypothesis");
                        (e, label)
                    })
                    .collect();
                return Some((frame.clone(), phi, leaves));
            }
        }
        None
    }

    fn new_red(&self, expr: Tree) -> NewRed {
        if let Some(label) = self.ctx.hyp_label(&expr) {
            return NewRed { expr, hyp: Some(label), y: 1.0, last_step: None };
        }
        let y = self.payoff(&expr);
        let last_step = self.last_step(&expr);
        NewRed { expr, hyp: None, y, last_step }
    }

    fn relevance_queue(&self, a: &Tree) -> ExpansionQueue {
        let viable = self.viable(a);
        if viable.is_empty() {
            return ExpansionQueue::default();
        }
        let probs = match self.guidance.relevance(&self.ctx, a, &viable) {
            Ok(p) if p.len() == viable.len() && p.iter().all(|x| x.is_finite() && *x >= 0.0) => p,
            Ok(_) => vec![1.0 / viable.len() as f64; viable.len()],
            Err(e) => {
                debug!("relevance query failed: {e}");
                vec![1.0 / viable.len() as f64; viable.len()]
            }
        };
        ExpansionQueue::new(&viable, &probs)
    }

    /// Pop candidates until one yields a blue node, a dummy, or the queue
    /// runs dry. `ancestors` holds the expressions of `a` and its ancestors.
    fn expand(&self, a: &Tree, q: &mut ExpansionQueue, ancestors: &[Tree], may_add_dummy: bool) -> Expansion {
        while let Some(entry) = q.pop() {
            match entry {
                Entry::Theorem { frame, constrained, ratio } => {
                    if frame.unconstrained.is_empty() {
                        if is_viable_full(&constrained, &frame, &self.ctx) {
                            q.push(Entry::Candidate { frame, subst: constrained, value: ratio });
                        }
                        continue;
                    }
                    let generated = self.guidance.generate(
                        &self.ctx,
                        a,
                        &frame,
                        &constrained,
                        self.params.beam_width,
                        self.params.token_limit,
                    );
                    let (cands, truncated) = match generated {
                        Ok(g) => (g.candidates, g.truncated),
                        Err(e) => {
                            debug!("generate query failed: {e}");
                            (Vec::new(), true)
                        }
                    };
                    let best = cands.iter().map(|c| c.1).fold(0.0, f64::max);
                    let mut any = false;
                    for (s, p) in cands {
                        // guidance output is never trusted
                        let fits = apply_substitution(&frame.assertion, &s).is_ok_and(|t| t == *a);
                        if fits && is_viable_full(&s, &frame, &self.ctx) {
                            any = true;
                            q.push(Entry::Candidate { frame: frame.clone(), subst: s, value: candidate_value(ratio, p, best) });
                        }
                    }
                    if !any && truncated && may_add_dummy {
                        return Expansion::Dummy { value: ratio };
                    }
                }
                Entry::Candidate { frame, subst, value } => {
                    let exprs: Vec<Tree> =
                        frame.hyps.iter().map(|h| apply_substitution(h, &subst).expect("typed substitution")).collect();
                    if exprs.iter().any(|e| ancestors.contains(e)) {
                        continue;
                    }
                    let children = exprs.into_iter().map(|e| self.new_red(e)).collect();
                    return Expansion::Blue { frame, subst, value, children };
                }
            }
        }
        Expansion::Exhausted
    }

    /// Run one pass.
    pub fn step(&self) -> PassOutcome {
        let mut tree = self.tree();
        let root = tree.root();
        if tree.red(root).proven || tree.red(root).dead {
            return PassOutcome::Finished;
        }
        let mut path_blues: Vec<BlueId> = Vec::new();
        let mut a = root;
        enum Action {
            FirstVisit,
            Expand,
            Dummy(BlueId),
        }
        let action = loop {
            let r = tree.red(a);
            if !r.visited {
                break Action::FirstVisit;
            }
            if r.is_busy() {
                return PassOutcome::Busy;
            }
            let pending = matches!(r.queue, QueueState::Pending);
            if pending || (r.children.len() < child_cap(r.n, self.params.child_divisor) && !r.queue_exhausted()) {
                break Action::Expand;
            }
            let Some(b) = tree.best_child(a, &self.params) else {
                // no live children and nothing left to try
                tree.refresh_path(a);
                drop(tree);
                self.finish_pass(&[], "dead", 0.0);
                return PassOutcome::Exhausted(a);
            };
            if tree.blue(b).is_dummy() {
                break Action::Dummy(b);
            }
            path_blues.push(b);
            a = tree.blue(b).least.expect("unproven blue node has an unproven child");
        };
        for b in &path_blues {
            tree.blue_mut(*b).in_flight += 1;
        }
        let path = self.path_names(&tree, a, &path_blues);
        let outcome = match action {
            Action::Dummy(b) => {
                tree.blue_mut(b).n += 1;
                PassOutcome::DummyVisited(b)
            }
            Action::FirstVisit => {
                let expr = tree.red(a).expr.clone();
                tree.red_mut(a).queue = QueueState::Taken;
                drop(tree);
                let y = self.payoff(&expr);
                tree = self.tree();
                let r = tree.red_mut(a);
                r.queue = QueueState::Pending;
                r.visited = true;
                r.y = y;
                PassOutcome::FirstVisit
            }
            Action::Expand => {
                let r = tree.red_mut(a);
                let expr = r.expr.clone();
                let may_dummy = !r.has_dummy;
                let taken = std::mem::replace(&mut r.queue, QueueState::Taken);
                let mut ancestors: Vec<Tree> = tree.red_ancestors(a).into_iter().map(|r| tree.red(r).expr.clone()).collect();
                ancestors.push(expr.clone());
                drop(tree);
                let mut q = match taken {
                    QueueState::Ready(q) => q,
                    _ => self.relevance_queue(&expr),
                };
                let result = self.expand(&expr, &mut q, &ancestors, may_dummy);
                tree = self.tree();
                tree.red_mut(a).queue = QueueState::Ready(q);
                match result {
                    Expansion::Blue { frame, subst, value, children } => {
                        PassOutcome::Expanded(attach_blue(&mut tree, a, Some(frame), subst, value, children))
                    }
                    Expansion::Dummy { value } => {
                        tree.red_mut(a).has_dummy = true;
                        PassOutcome::DummyAdded(attach_blue(&mut tree, a, None, Substitution::new(), value, Vec::new()))
                    }
                    Expansion::Exhausted => PassOutcome::Exhausted(a),
                }
            }
        };
        for b in &path_blues {
            tree.blue_mut(*b).in_flight -= 1;
        }
        tree.refresh_path(a);
        let (action, value) = match outcome {
            PassOutcome::FirstVisit => ("first_visit", tree.red(a).y),
            PassOutcome::Expanded(b) => ("expand", tree.blue(b).value),
            PassOutcome::DummyAdded(b) => ("dummy", tree.blue(b).value),
            PassOutcome::DummyVisited(b) => ("dummy_visit", tree.blue(b).n as f64),
            PassOutcome::Exhausted(_) => ("exhausted", 0.0),
            PassOutcome::Busy | PassOutcome::Finished => unreachable!(),
        };
        drop(tree);
        self.finish_pass(&path, action, value);
        outcome
    }

    fn path_names(&self, tree: &SearchTree, a: RedId, blues: &[BlueId]) -> Vec<String> {
        if self.trace.is_none() {
            return Vec::new();
        }
        let mut names = vec![tree.root().to_string()];
        for b in blues {
            names.push(b.to_string());
            names.push(tree.blue(*b).least.map(|r| r.to_string()).unwrap_or_default());
        }
        if names.last() != Some(&a.to_string()) {
            names.push(a.to_string());
        }
        names
    }

    fn finish_pass(&self, path: &[String], action: &str, value: f64) {
        let pass = self.passes.fetch_add(1, Ordering::SeqCst) + 1;
        if let Some(out) = &self.trace {
            let rec = TraceRecord { pass, path, action, value };
            let mut w = lock(out);
            let mut line = serde_json::to_vec(&rec).expect("serializable trace record");
            line.push(b'\n');
            if w.write_all(&line).is_err() {
                warn!("could not write search trace");
            }
        }
    }

    /// Run passes until the root is proven or dead, or a limit is reached.
    pub fn run(&self) -> Result<Success, Failure> {
        let start = Instant::now();
        let deadline = start + self.params.wall_clock_limit;
        let timed_out = AtomicBool::new(false);
        let worker = || loop {
            if self.is_finished() || self.passes() >= self.params.pass_limit {
                break;
            }
            if Instant::now() >= deadline {
                timed_out.store(true, Ordering::SeqCst);
                break;
            }
            match self.step() {
                PassOutcome::Finished => break,
                PassOutcome::Busy => std::thread::sleep(Duration::from_micros(50)),
                _ => {}
            }
        };
        if self.params.threads <= 1 {
            worker();
        } else {
            std::thread::scope(|s| {
                for _ in 0..self.params.threads {
                    s.spawn(worker);
                }
            });
        }
        self.result(start.elapsed(), timed_out.load(Ordering::SeqCst))
    }

    fn result(&self, elapsed: Duration, timed_out: bool) -> Result<Success, Failure> {
        let tree = self.tree();
        let root = tree.red(tree.root());
        let passes = self.passes();
        let nodes = tree.red_count() + tree.blue_count();
        let failure = |reason: FailureReason| Failure {
            passes,
            nodes,
            root_dead: root.dead,
            timeout: reason == FailureReason::Timeout,
            reason,
        };
        if root.proven {
            let proof = tree.prune(tree.root()).expect("proven root prunes");
            if let Err(e) = verify_proof_tree(&proof, &self.ctx, &self.lib) {
                return Err(failure(FailureReason::Unsound(e.to_string())));
            }
            return Ok(Success { proof, passes, nodes, elapsed });
        }
        if root.dead {
            return Err(failure(FailureReason::RootDead));
        }
        if timed_out {
            return Err(failure(FailureReason::Timeout));
        }
        Err(failure(FailureReason::PassLimit))
    }
}

/// Search for a proof of the context assertion.
pub fn prove(
    lib: Arc<Library>,
    ctx: Arc<Context>,
    guidance: Arc<dyn Guidance>,
    params: SearchParams,
) -> Result<Success, Failure> {
    Search::new(lib, ctx, guidance, params).run()
}

/// Extend `s` so every pattern in `hyps` becomes a member of `e_c`,
/// calling `accept` on each complete extension until it returns true.
fn cover_hyps(hyps: &[Tree], e_c: &[Tree], s: Substitution, accept: &mut dyn FnMut(Substitution) -> bool) -> bool {
    let Some((h, rest)) = hyps.split_first() else {
        return accept(s);
    };
    for e in e_c {
        let mut t = s.clone();
        if match_into(h, e, &mut t) && cover_hyps(rest, e_c, t, accept) {
            return true;
        }
    }
    false
}

fn attach_blue(
    tree: &mut SearchTree,
    a: RedId,
    frame: Option<Arc<TheoremFrame>>,
    subst: Substitution,
    value: f64,
    children: Vec<NewRed>,
) -> BlueId {
    let b = tree.add_blue(BlueNode {
        parent: a,
        theorem: frame,
        subst,
        value,
        children: Vec::new(),
        proven: false,
        dead: false,
        in_flight: 0,
        x: 0.0,
        n: 1,
        least: None,
    });
    for c in children {
        let mut node = RedNode::new(c.expr, Some(b), c.hyp);
        node.y = c.y;
        node.x = c.y;
        node.visited = true;
        let id = tree.add_red(node);
        if let Some(ls) = c.last_step {
            attach_last_step(tree, id, ls);
        }
        tree.refresh_red(id);
        tree.blue_mut(b).children.push(id);
    }
    tree.refresh_blue(b);
    tree.red_mut(a).children.push(b);
    b
}

fn attach_last_step(
    tree: &mut SearchTree,
    a: RedId,
    (frame, subst, leaves): (Arc<TheoremFrame>, Substitution, Vec<(Tree, StmtId)>),
) {
    let children =
        leaves.into_iter().map(|(expr, label)| NewRed { expr, hyp: Some(label), y: 1.0, last_step: None }).collect();
    attach_blue(tree, a, Some(frame), subst, 1.0, children);
}

#[cfg(test)]
mod tests;
