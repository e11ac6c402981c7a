//! Tokenized dataset files and the manifest.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    extract_steps, make_payoff_examples, DatasetError, PayoffExample, ProofStep, Split, Splits,
};
use crate::database::Sym;
use crate::frame::{Context, Library};
use crate::grammar::{dummy_counts, tokenize, TokenSequence, TokenizeError, Tree, Vocabulary};
use crate::guidance::wire::{encode_conditioning, encode_theorem, ContextRenaming};
use crate::guidance::Guidance;
use crate::unify::viable_theorems;

/// Per-split record files are named `{stem}.{split}.jsonl`.
pub const FILE_STEMS: [&str; 3] = ["relevance", "generative", "payoff"];

/// A dummy token used by a record and the typecode of the variable it
/// stands for, so loaders can draw a fresh renaming.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarTag {
    pub token: u32,
    pub typecode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRecord {
    pub context: String,
    pub theorem: String,
    /// Every viable theorem for the goal, in database order; includes
    /// `theorem`.
    pub viable: Vec<String>,
    pub goal: TokenSequence,
    pub vars: Vec<VarTag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeRecord {
    pub context: String,
    pub theorem: String,
    /// Unconstrained variables of the theorem, in generation order.
    pub variables: Vec<String>,
    pub typecodes: Vec<String>,
    pub goal: TokenSequence,
    /// One conditioning sequence per variable, that variable marked
    /// `TARGET` and the others `UV`.
    pub conditioning: Vec<TokenSequence>,
    /// The true image of each variable.
    pub targets: Vec<TokenSequence>,
    pub vars: Vec<VarTag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffRecord {
    pub context: String,
    pub goal: TokenSequence,
    pub positive: bool,
    pub vars: Vec<VarTag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremRecord {
    pub label: String,
    pub statement: TokenSequence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    fn bump(&mut self, split: Split) {
        *match split {
            Split::Train => &mut self.train,
            Split::Validation => &mut self.validation,
            Split::Test => &mut self.test,
        } += 1;
    }

    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Guidance used for payoff negatives.
    pub guidance: String,
    pub beam_width: usize,
    pub token_limit: usize,
    pub vocab_sha256: String,
    pub snapshot_sha256: String,
    pub propositions: SplitCounts,
    /// Propositions whose proofs could not be expanded.
    pub skipped: Vec<String>,
    pub steps: SplitCounts,
    pub generative: SplitCounts,
    pub payoff_positive: SplitCounts,
    pub payoff_negative: SplitCounts,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct ExtractConfig {
    pub seed: u64,
    pub threads: usize,
    pub beam_width: usize,
    pub token_limit: usize,
    /// Recorded in the manifest.
    pub guidance: String,
    pub snapshot_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Full pipeline: expand proofs, build payoff examples, write every file
/// and `manifest.json` into `dir`.
pub fn extract(
    lib: &Library,
    splits: &Splits,
    guidance: &dyn Guidance,
    config: &ExtractConfig,
    dir: &Path,
) -> Result<Manifest, DatasetError> {
    let extraction = extract_steps(lib, splits, config.threads);
    let payoff =
        make_payoff_examples(lib, &extraction.steps, guidance, config.beam_width, config.token_limit, config.threads);
    let vocab = Vocabulary::build(lib.grammar(), &dummy_counts(lib.db()));
    let mut manifest = emit_tokenized(lib, &extraction.steps, &payoff, &vocab, config.seed, dir)?;
    manifest.guidance = config.guidance.clone();
    manifest.beam_width = config.beam_width;
    manifest.token_limit = config.token_limit;
    manifest.snapshot_sha256 = config.snapshot_sha256.clone();
    for (_, split) in splits.iter() {
        manifest.propositions.bump(split);
    }
    manifest.skipped = extraction.skipped.iter().map(|(id, _)| lib.db().label(*id).to_string()).collect();
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}

struct Writers {
    files: BTreeMap<String, BufWriter<File>>,
}

impl Writers {
    fn line(&mut self, dir: &Path, name: String, record: &impl Serialize) -> Result<(), DatasetError> {
        let w = match self.files.entry(name) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                let f = File::create(dir.join(e.key()))?;
                e.insert(BufWriter::new(f))
            }
        };
        serde_json::to_writer(&mut *w, record)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Variables of `trees` in order of first occurrence, each sent to a
/// dummy of its typecode drawn at random.
fn seeded_renaming<'a, R: Rng>(
    trees: impl IntoIterator<Item = &'a Tree>,
    vocab: &Vocabulary,
    lib: &Library,
    rng: &mut R,
) -> Result<(HashMap<Sym, u32>, Vec<VarTag>), TokenizeError> {
    let mut renaming = HashMap::new();
    let mut tags = Vec::new();
    let mut pools: BTreeMap<Sym, Vec<u32>> = BTreeMap::new();
    for t in trees {
        for n in t.preorder() {
            let Some(v) = n.as_var() else { continue };
            if renaming.contains_key(&v) {
                continue;
            }
            let tc = n.typecode();
            let pool = pools.entry(tc).or_insert_with(|| {
                let mut p = vocab.dummies(tc).to_vec();
                p.shuffle(rng);
                p
            });
            let tok = pool.pop().ok_or(TokenizeError::MissingRenaming(v))?;
            renaming.insert(v, tok);
            tags.push(VarTag { token: tok, typecode: lib.grammar().symbol_name(tc).to_string() });
        }
    }
    Ok((renaming, tags))
}

fn goal_trees<'a>(ctx: &'a Context, a: &'a Tree) -> impl Iterator<Item = &'a Tree> {
    ctx.hyps().iter().chain(std::iter::once(a))
}

/// Write `vocab.txt`, `theorems.jsonl` and the per-split record files.
/// Variable renaming is drawn from one generator seeded with `seed`, so
/// equal inputs and seeds give byte-identical files. Returns a manifest
/// with counts, vocabulary hash and file hashes filled in.
pub fn emit_tokenized(
    lib: &Library,
    steps: &[ProofStep],
    payoff: &[PayoffExample],
    vocab: &Vocabulary,
    seed: u64,
    dir: &Path,
) -> Result<Manifest, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = Manifest { seed, vocab_sha256: vocab.sha256(), ..Manifest::default() };
    let mut out = Writers { files: BTreeMap::new() };
    // every split file exists even when empty
    for stem in FILE_STEMS {
        for split in Split::ALL {
            let name = format!("{stem}.{split}.jsonl");
            out.files.insert(name.clone(), BufWriter::new(File::create(dir.join(name))?));
        }
    }
    out.files.insert("theorems.jsonl".into(), BufWriter::new(File::create(dir.join("theorems.jsonl"))?));
    std::fs::write(dir.join("vocab.txt"), vocab.to_text())?;
    let db = lib.db();
    for frame in lib.frames() {
        let record = TheoremRecord { label: frame.label.clone(), statement: encode_theorem(frame, vocab)? };
        out.line(dir, "theorems.jsonl".into(), &record)?;
    }

    for step in steps {
        let ctx = &step.context;
        let (renaming, vars) = seeded_renaming(goal_trees(ctx, &step.expr), vocab, lib, &mut rng)?;
        let goal = tokenize(&[ctx.hyps(), std::slice::from_ref(&step.expr)], &renaming, vocab)?;
        let viable = viable_theorems(&step.expr, ctx, lib).iter().map(|(f, _)| f.label.clone()).collect();
        let record = RelevanceRecord {
            context: ctx.label().to_string(),
            theorem: step.theorem.label.clone(),
            viable,
            goal,
            vars,
        };
        out.line(dir, format!("relevance.{}.jsonl", step.split), &record)?;
        manifest.steps.bump(step.split);
    }

    for step in steps.iter().filter(|s| !s.theorem.unconstrained.is_empty()) {
        let ctx = &step.context;
        let frame = &step.theorem;
        let free: Vec<(Sym, Sym)> =
            frame.free_vars.iter().copied().filter(|(v, _)| !frame.is_constrained(*v)).collect();
        let vars: Vec<Sym> = free.iter().map(|(v, _)| *v).collect();
        let images: Vec<Tree> =
            vars.iter().map(|v| step.subst.get(*v).expect("complete substitution").clone()).collect();
        let (renaming, tags) = seeded_renaming(goal_trees(ctx, &step.expr).chain(&images), vocab, lib, &mut rng)?;
        let goal = tokenize(&[ctx.hyps(), std::slice::from_ref(&step.expr)], &renaming, vocab)?;
        let constrained = step.subst.restrict(&frame.constrained);
        let r = ContextRenaming { forward: renaming.clone(), leaves: HashMap::new() };
        let conditioning = vars
            .iter()
            .map(|t| encode_conditioning(frame, &constrained, &vars, *t, &r, vocab))
            .collect::<Result<Vec<_>, _>>()?;
        let targets = images
            .iter()
            .map(|t| {
                let mut seq = TokenSequence::new();
                seq.push_tree(t, &renaming, vocab).map(|_| seq)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let record = GenerativeRecord {
            context: ctx.label().to_string(),
            theorem: frame.label.clone(),
            variables: vars.iter().map(|v| db.symbol_name(*v).to_string()).collect(),
            typecodes: free.iter().map(|(_, tc)| db.symbol_name(*tc).to_string()).collect(),
            goal,
            conditioning,
            targets,
            vars: tags,
        };
        out.line(dir, format!("generative.{}.jsonl", step.split), &record)?;
        manifest.generative.bump(step.split);
    }

    for ex in payoff {
        let ctx = &ex.context;
        let (renaming, vars) = seeded_renaming(goal_trees(ctx, &ex.expr), vocab, lib, &mut rng)?;
        let goal = tokenize(&[ctx.hyps(), std::slice::from_ref(&ex.expr)], &renaming, vocab)?;
        let record = PayoffRecord { context: ctx.label().to_string(), goal, positive: ex.positive, vars };
        out.line(dir, format!("payoff.{}.jsonl", ex.split), &record)?;
        if ex.positive {
            manifest.payoff_positive.bump(ex.split);
        } else {
            manifest.payoff_negative.bump(ex.split);
        }
    }

    let mut names: Vec<String> = out.files.keys().cloned().collect();
    for (_, mut w) in std::mem::take(&mut out.files) {
        w.flush()?;
    }
    names.push("vocab.txt".into());
    for name in names {
        let bytes = std::fs::read(dir.join(&name))?;
        manifest.files.insert(name, sha256_hex(&bytes));
    }
    Ok(manifest)
}

/// Records in training files whose context is not a training
/// proposition, as `(file, context label)`.
pub fn audit_split(dir: &Path, lib: &Library, splits: &Splits) -> Result<Vec<(String, String)>, DatasetError> {
    let mut bad = Vec::new();
    for stem in FILE_STEMS {
        let name = format!("{stem}.{}.jsonl", Split::Train);
        let file = File::open(dir.join(&name))?;
        for line in BufReader::new(file).lines() {
            let v: serde_json::Value = serde_json::from_str(&line?)?;
            let label = v["context"].as_str().unwrap_or_default();
            let ok = lib.db().lookup(label).and_then(|id| splits.get(id)) == Some(Split::Train);
            if !ok {
                bad.push((name.clone(), label.to_string()));
            }
        }
    }
    Ok(bad)
}
