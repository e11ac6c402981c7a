use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use mmprove::database::{decompress_proof, parse_database, Database, StatementKind, StmtId};
use mmprove::dataset::{audit_split, extract as extract_dataset, sha256_hex, split_propositions, ExtractConfig, Split};
use mmprove::frame::{Context, Library};
use mmprove::grammar::{dummy_counts, Vocabulary};
use mmprove::guidance::{usage_counts, Baseline, Guidance, Oracle, Remote};
use mmprove::search::{FailureReason, Search, SearchParams};
use mmprove::verifier::{emit_rpn, proof_block, tree_from_rpn, verify_proposition};

use crate::{DbArgs, Exit, ExtractArgs, GuidanceArgs, GuidanceKind, ProveArgs};

struct Loaded {
    source: String,
    lib: Arc<Library>,
}

fn load(args: &DbArgs) -> Result<Loaded, Exit> {
    let source = std::fs::read_to_string(&args.db)
        .map_err(|e| Exit::Usage(format!("cannot read {}: {e}", args.db.display())))?;
    let db = parse_database(&source).map_err(|e| Exit::Usage(format!("{}: {e}", args.db.display())))?;
    Ok(Loaded { source, lib: Arc::new(Library::new(Arc::new(db))) })
}

fn proposition(db: &Database, label: &str) -> Result<StmtId, Exit> {
    match db.lookup(label) {
        Some(id) if db.statement(id).kind == StatementKind::Provable => Ok(id),
        Some(_) => Err(Exit::Usage(format!("{label} is not a $p statement"))),
        None => Err(Exit::Usage(format!("unknown label {label}"))),
    }
}

pub fn verify(args: &DbArgs, labels: &[String]) -> Result<(), Exit> {
    let loaded = load(args)?;
    let db = loaded.lib.db();
    let ids: Vec<StmtId> = if labels.is_empty() {
        db.ids().filter(|id| db.statement(*id).kind == StatementKind::Provable).collect()
    } else {
        labels.iter().map(|l| proposition(db, l)).collect::<Result<_, _>>()?
    };
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for id in ids {
        let line = match verify_proposition(db, id) {
            Ok(()) => format!("{}\tpass", db.label(id)),
            Err(e) => {
                failed += 1;
                format!("{}\tfail\t{e}", db.label(id))
            }
        };
        let _ = writeln!(out, "{line}");
    }
    if failed > 0 {
        Err(Exit::Failed)
    } else {
        Ok(())
    }
}

/// Builds the guidance for each theorem.
struct GuidanceSource {
    kind: GuidanceKind,
    lib: Arc<Library>,
    freq: HashMap<StmtId, f64>,
    baseline: Arc<Baseline>,
    vocab: Arc<Vocabulary>,
    endpoint: Option<String>,
    timeout: Duration,
}

impl GuidanceSource {
    fn new(lib: &Arc<Library>, args: &GuidanceArgs, seed: u64) -> Result<GuidanceSource, Exit> {
        if args.guidance == GuidanceKind::Remote && args.endpoint.is_none() {
            return Err(Exit::Usage("--guidance remote needs --endpoint".into()));
        }
        if !(args.request_timeout.is_finite() && args.request_timeout > 0.0) {
            return Err(Exit::Usage("--request-timeout must be positive".into()));
        }
        // theorem frequencies come from training proofs only
        let train = split_propositions(lib, seed).members(Split::Train);
        let freq = usage_counts(lib, train);
        Ok(GuidanceSource {
            kind: args.guidance,
            lib: lib.clone(),
            baseline: Arc::new(Baseline::new(lib.clone(), freq.clone())),
            freq,
            vocab: Arc::new(Vocabulary::build(lib.grammar(), &dummy_counts(lib.db()))),
            endpoint: args.endpoint.clone(),
            timeout: Duration::from_secs_f64(args.request_timeout),
        })
    }

    fn name(&self) -> String {
        match (self.kind, &self.endpoint) {
            (GuidanceKind::Baseline, _) => "baseline".into(),
            (GuidanceKind::Oracle, _) => "oracle".into(),
            (GuidanceKind::Remote, Some(e)) => format!("remote:{e}"),
            (GuidanceKind::Remote, None) => "remote".into(),
        }
    }

    fn remote(&self) -> Result<Arc<Remote>, String> {
        let endpoint = self.endpoint.as_deref().unwrap_or_default();
        Remote::connect(endpoint, self.lib.clone(), self.vocab.clone(), self.timeout)
            .map(Arc::new)
            .map_err(|e| e.to_string())
    }

    fn for_theorem(&self, ctx: &Context) -> Result<Arc<dyn Guidance>, String> {
        match self.kind {
            GuidanceKind::Baseline => Ok(self.baseline.clone()),
            GuidanceKind::Remote => Ok(self.remote()?),
            GuidanceKind::Oracle => {
                let labels = decompress_proof(self.lib.db(), ctx.db_position()).map_err(|e| e.to_string())?;
                let pt = tree_from_rpn(&labels, ctx, &self.lib).map_err(|e| e.to_string())?;
                Ok(Arc::new(Oracle::new(&pt, Baseline::new(self.lib.clone(), self.freq.clone()))))
            }
        }
    }
}

fn select(lib: &Library, args: &ProveArgs) -> Result<Vec<StmtId>, Exit> {
    let db = lib.db();
    let mut ids = match (args.theorems.is_empty(), args.all_test) {
        (false, true) => return Err(Exit::Usage("--theorem and --all-test are exclusive".into())),
        (true, false) => return Err(Exit::Usage("no theorems selected; use --theorem or --all-test".into())),
        (false, false) => args.theorems.iter().map(|l| proposition(db, l)).collect::<Result<Vec<_>, _>>()?,
        (true, true) => split_propositions(lib, args.seed).members(Split::Test),
    };
    if let Some(n) = args.limit {
        ids.truncate(n);
    }
    if ids.is_empty() {
        return Err(Exit::Usage("the proposition set is empty".into()));
    }
    Ok(ids)
}

struct Row {
    label: String,
    proved: bool,
    passes: u64,
    seconds: f64,
    note: String,
    block: Option<String>,
}

struct Prover<'a> {
    loaded: &'a Loaded,
    guidance: GuidanceSource,
    params: SearchParams,
    trace: Option<std::path::PathBuf>,
}

impl Prover<'_> {
    fn prove(&self, id: StmtId) -> Row {
        let lib = &self.loaded.lib;
        let label = lib.db().label(id).to_string();
        let start = Instant::now();
        let fail = |note: String, passes| Row {
            label: label.clone(),
            proved: false,
            passes,
            seconds: start.elapsed().as_secs_f64(),
            note,
            block: None,
        };
        let ctx = match lib.context_at(id) {
            Ok(c) => Arc::new(c),
            Err(e) => return fail(format!("context: {e}"), 0),
        };
        let guidance = match self.guidance.for_theorem(&ctx) {
            Ok(g) => g,
            Err(e) => return fail(format!("guidance: {e}"), 0),
        };
        let mut search = Search::new(lib.clone(), ctx.clone(), guidance, self.params.clone());
        if let Some(dir) = &self.trace {
            match File::create(dir.join(format!("{label}.jsonl"))) {
                Ok(f) => search = search.with_trace(Box::new(BufWriter::new(f))),
                Err(e) => return fail(format!("trace: {e}"), 0),
            }
        }
        let success = match search.run() {
            Ok(s) => s,
            Err(f) => {
                let note = match f.reason {
                    FailureReason::RootDead => "root dead".to_string(),
                    FailureReason::PassLimit => "pass limit".to_string(),
                    FailureReason::Timeout => "timeout".to_string(),
                    FailureReason::Unsound(e) => format!("unsound: {e}"),
                };
                return fail(note, f.passes);
            }
        };
        drop(search);
        match self.checked_block(&ctx, &success.proof, &label) {
            Ok(block) => Row {
                label: label.clone(),
                proved: true,
                passes: success.passes,
                seconds: start.elapsed().as_secs_f64(),
                note: "-".into(),
                block: Some(block),
            },
            Err(e) => fail(format!("re-verification: {e}"), success.passes),
        }
    }

    /// The proof as a `$p` block, accepted by a fresh parse of the
    /// database with the block appended.
    fn checked_block(&self, ctx: &Context, proof: &mmprove::verifier::ProofTree, label: &str) -> Result<String, String> {
        let db = self.loaded.lib.db();
        let rpn = emit_rpn(proof, ctx, &self.loaded.lib).map_err(|e| e.to_string())?;
        let mut new_label = format!("{label}-found");
        let mut k = 1;
        while db.lookup(&new_label).is_some() {
            k += 1;
            new_label = format!("{label}-found{k}");
        }
        let block = proof_block(db, ctx, &rpn, &new_label);
        let extended = parse_database(&format!("{}\n{block}", self.loaded.source)).map_err(|e| e.to_string())?;
        let id = extended.lookup(&new_label).ok_or("appended label missing")?;
        verify_proposition(&extended, id).map_err(|e| e.to_string())?;
        Ok(block)
    }
}

/// Prints rows in selection order as they complete.
struct Printer {
    next: usize,
    pending: BTreeMap<usize, String>,
}

impl Printer {
    fn push(&mut self, index: usize, line: String) {
        self.pending.insert(index, line);
        let mut out = std::io::stdout().lock();
        while let Some(line) = self.pending.remove(&self.next) {
            let _ = writeln!(out, "{line}");
            self.next += 1;
        }
        let _ = out.flush();
    }
}

pub fn prove(args: &ProveArgs, bench: bool) -> Result<(), Exit> {
    let params = args.search.params().map_err(Exit::Usage)?;
    if args.jobs == 0 {
        return Err(Exit::Usage("--jobs must be at least 1".into()));
    }
    let loaded = load(&args.db)?;
    let ids = select(&loaded.lib, args)?;
    let guidance = GuidanceSource::new(&loaded.lib, &args.guidance, args.seed)?;
    if let Some(dir) = &args.trace {
        std::fs::create_dir_all(dir).map_err(|e| Exit::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    let out = match &args.out {
        Some(p) => Some(Mutex::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Exit::Usage(format!("cannot open {}: {e}", p.display())))?,
        )),
        None => None,
    };
    let prover = Prover { loaded: &loaded, guidance, params, trace: args.trace.clone() };
    println!("theorem\tproved\tpasses\tseconds\tbeam\tnote");
    let printer = Mutex::new(Printer { next: 0, pending: BTreeMap::new() });
    let rows: Mutex<Vec<Option<Row>>> = Mutex::new((0..ids.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let write_error = Mutex::new(None);
    let worker = || loop {
        let k = cursor.fetch_add(1, Ordering::SeqCst);
        let Some(id) = ids.get(k) else { break };
        let row = prover.prove(*id);
        if let (Some(file), Some(block)) = (&out, &row.block) {
            let mut f = file.lock().expect("output lock");
            if let Err(e) = f.write_all(block.as_bytes()).and_then(|_| f.flush()) {
                *write_error.lock().expect("error lock") = Some(e.to_string());
            }
        }
        let line = format!(
            "{}\t{}\t{}\t{:.3}\t{}\t{}",
            row.label,
            if row.proved { "yes" } else { "no" },
            row.passes,
            row.seconds,
            prover.params.beam_width,
            row.note
        );
        printer.lock().expect("printer lock").push(k, line);
        rows.lock().expect("rows lock")[k] = Some(row);
    };
    std::thread::scope(|s| {
        for _ in 1..args.jobs.min(ids.len()) {
            s.spawn(worker);
        }
        worker();
    });
    if let Some(e) = write_error.into_inner().expect("error lock") {
        return Err(Exit::Usage(format!("cannot write proofs: {e}")));
    }
    let rows: Vec<Row> = rows.into_inner().expect("rows lock").into_iter().map(|r| r.expect("every row")).collect();
    if bench {
        print_bench(&rows, prover.guidance.name());
    }
    if rows.iter().all(|r| r.proved) {
        Ok(())
    } else {
        Err(Exit::Failed)
    }
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn print_bench(rows: &[Row], guidance: String) {
    let proved = rows.iter().filter(|r| r.proved).count();
    let mut passes: Vec<f64> = rows.iter().filter(|r| r.proved).map(|r| r.passes as f64).collect();
    passes.sort_by(f64::total_cmp);
    let mut secs: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    secs.sort_by(f64::total_cmp);
    println!("guidance\t{guidance}");
    println!("proved\t{proved}\t{}\t{:.4}", rows.len(), proved as f64 / rows.len() as f64);
    if passes.is_empty() {
        println!("median_passes\t-");
    } else {
        println!("median_passes\t{}", median(&passes));
    }
    for (name, q) in [("seconds_p50", 0.5), ("seconds_p90", 0.9), ("seconds_max", 1.0)] {
        println!("{name}\t{:.3}", percentile(&secs, q));
    }
}

pub fn extract(args: &ExtractArgs) -> Result<(), Exit> {
    if args.threads == 0 || args.beam == 0 || args.token_limit == 0 {
        return Err(Exit::Usage("--threads, --beam and --token-limit must be at least 1".into()));
    }
    if args.guidance.guidance == GuidanceKind::Oracle {
        return Err(Exit::Usage("extract takes baseline or remote guidance".into()));
    }
    let loaded = load(&args.db)?;
    let lib = &loaded.lib;
    let source = GuidanceSource::new(lib, &args.guidance, args.seed)?;
    let guidance: Arc<dyn Guidance> = match source.kind {
        GuidanceKind::Remote => source.remote().map_err(|e| Exit::Usage(format!("guidance: {e}")))?,
        _ => source.baseline.clone(),
    };
    let splits = split_propositions(lib, args.seed);
    let config = ExtractConfig {
        seed: args.seed,
        threads: args.threads,
        beam_width: args.beam,
        token_limit: args.token_limit,
        guidance: source.name(),
        snapshot_sha256: sha256_hex(loaded.source.as_bytes()),
    };
    let manifest = extract_dataset(lib, &splits, guidance.as_ref(), &config, &args.out)
        .map_err(|e| Exit::Usage(format!("extraction: {e}")))?;
    let leaks = audit_split(&args.out, lib, &splits).map_err(|e| Exit::Usage(format!("audit: {e}")))?;
    println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
    if leaks.is_empty() {
        Ok(())
    } else {
        eprintln!("{} training records come from non-training propositions", leaks.len());
        Err(Exit::Failed)
    }
}
