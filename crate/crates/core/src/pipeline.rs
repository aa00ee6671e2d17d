//! Batch pipeline: one reader, one controller per worker group, one writer.
//!
//! The reader cuts the input into batches and pushes them into a bounded
//! queue. Each controller pulls a batch, spreads its reads over the group's
//! workers in chunks, re-aligns deferred reads itself with an unlimited state
//! budget, resolves pairs and formats SAM text. The writer emits batches,
//! reordered by batch id when ordered output is on.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};
use serde::Serialize;
use thiserror::Error;

use crate::align::{align_read, AlignerConfig, ReadAlignment, ReadOutcome, Scratch};
use crate::index::ReferenceIndex;
use crate::io::fastx::{ParseError, ReadRecord, ReadUnit};
use crate::io::pair::{is_forward_reverse, resolve_pair, single_record, template_len, InsertModel};
use crate::io::sam::{AlignmentRecord, SamHeader};

/// Reads handed to a worker at a time.
pub const DISPATCH_CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("worker failure in batch {batch_id}: {message}")]
    Worker { batch_id: u64, message: String },
    #[error("output failed after {records_written} records (output is partial): {source}")]
    Sink {
        records_written: u64,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertSetting {
    Fixed(InsertModel),
    /// Estimated from the first `sample_pairs` uniquely placed forward-reverse
    /// pairs among at most `scan_limit` leading pairs.
    Auto { sample_pairs: usize, scan_limit: usize },
}

impl InsertSetting {
    pub fn auto() -> Self {
        InsertSetting::Auto { sample_pairs: 10_000, scan_limit: 200_000 }
    }
}

/// Four workers per available core.
pub fn default_workers_per_group() -> usize {
    4 * thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Read units (single reads or pairs) per batch.
    pub batch_size: usize,
    pub worker_groups: usize,
    pub workers_per_group: usize,
    pub aligner: AlignerConfig,
    /// Hit cap on the controller's re-alignment path.
    pub fallback_max_hits: usize,
    pub ordered_output: bool,
    pub insert: InsertSetting,
    /// Abort on the first malformed record instead of skipping it.
    pub strict: bool,
    /// Run workers on the calling controller thread instead of a pool.
    pub sequential: bool,
    /// Capacity of the batch queues.
    pub queue_capacity: usize,
    /// Recorded in the `@PG` header line.
    pub command_line: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            batch_size: 100_000,
            worker_groups: 1,
            workers_per_group: default_workers_per_group(),
            aligner: AlignerConfig::default(),
            fallback_max_hits: 1024,
            ordered_output: true,
            insert: InsertSetting::Fixed(InsertModel::default()),
            strict: false,
            sequential: !cfg!(feature = "parallel"),
            queue_capacity: 4,
            command_line: "wavemap".into(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let counts = [
            ("batch_size", self.batch_size),
            ("worker_groups", self.worker_groups),
            ("workers_per_group", self.workers_per_group),
            ("fallback_max_hits", self.fallback_max_hits),
            ("queue_capacity", self.queue_capacity),
            ("max_hits", self.aligner.budget.max_hits),
            ("max_states", self.aligner.budget.max_states),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(PipelineError::Config(format!("{name} must be at least 1")));
            }
        }
        if let InsertSetting::Auto { sample_pairs: 0, .. } = self.insert {
            return Err(PipelineError::Config("insert sample size must be at least 1".into()));
        }
        self.aligner.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Contiguous run of read units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub batch_id: u64,
    pub units: Vec<ReadUnit>,
}

impl Batch {
    pub fn reads(&self) -> impl Iterator<Item = &ReadRecord> {
        self.units.iter().flat_map(ReadUnit::reads)
    }

    pub fn read_count(&self) -> usize {
        self.units.iter().map(ReadUnit::read_count).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub reads: usize,
    pub states: u64,
    pub elapsed: Duration,
}

/// One outcome per read of the batch, in read order (mates adjacent).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchResult {
    pub batch_id: u64,
    pub outcomes: Vec<ReadOutcome>,
    pub stats: WorkerStats,
}

/// Where a group's per-read work runs.
pub enum Executor {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

impl Executor {
    /// A pool of `workers` threads, or sequential when the `parallel`
    /// feature is off.
    pub fn with_workers(workers: usize) -> Result<Self, PipelineError> {
        #[cfg(feature = "parallel")]
        {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .thread_name(|i| format!("wavemap-worker-{i}"))
                .build()
                .map(Executor::Pool)
                .map_err(|e| PipelineError::Config(e.to_string()))
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Ok(Executor::Sequential)
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Executor::Sequential => 1,
            #[cfg(feature = "parallel")]
            Executor::Pool(p) => p.current_num_threads(),
        }
    }

    fn map_reads(&self, reads: &[&ReadRecord], index: &ReferenceIndex, config: &AlignerConfig) -> Vec<ReadAlignment> {
        let run_chunk = |scratch: &mut Scratch, chunk: &[&ReadRecord]| {
            chunk
                .iter()
                .map(|r| align_read(index, &r.codes(), config, scratch))
                .collect::<Vec<_>>()
        };
        match self {
            Executor::Sequential => {
                let mut scratch = Scratch::new();
                reads
                    .chunks(DISPATCH_CHUNK)
                    .flat_map(|c| run_chunk(&mut scratch, c))
                    .collect()
            }
            #[cfg(feature = "parallel")]
            Executor::Pool(pool) => {
                use rayon::prelude::*;
                let chunks: Vec<Vec<ReadAlignment>> = pool.install(|| {
                    reads
                        .par_chunks(DISPATCH_CHUNK)
                        .map_init(Scratch::new, |s, c| run_chunk(s, c))
                        .collect()
                });
                chunks.into_iter().flatten().collect()
            }
        }
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}

/// Aligns every read of `batch` on the executor's workers. Reads that run
/// out of budget come back as [`ReadOutcome::Deferred`].
pub fn dispatch_batch(
    batch: &Batch,
    index: &ReferenceIndex,
    executor: &Executor,
    config: &AlignerConfig,
) -> Result<BatchResult, PipelineError> {
    let start = Instant::now();
    let reads: Vec<&ReadRecord> = batch.reads().collect();
    let results = catch_unwind(AssertUnwindSafe(|| executor.map_reads(&reads, index, config))).map_err(|p| {
        PipelineError::Worker {
            batch_id: batch.batch_id,
            message: panic_message(p),
        }
    })?;
    if results.len() != reads.len() {
        return Err(PipelineError::Worker {
            batch_id: batch.batch_id,
            message: format!("{} outcomes for {} reads", results.len(), reads.len()),
        });
    }
    let states = results.iter().map(|r| r.states as u64).sum();
    Ok(BatchResult {
        batch_id: batch.batch_id,
        outcomes: results.into_iter().map(|r| r.outcome).collect(),
        stats: WorkerStats {
            reads: reads.len(),
            states,
            elapsed: start.elapsed(),
        },
    })
}

/// Re-aligns a deferred read with no state cap and hits truncated at
/// `max_hits`. Never returns [`ReadOutcome::Deferred`].
pub fn fallback_align(read: &ReadRecord, index: &ReferenceIndex, config: &AlignerConfig, max_hits: usize) -> ReadOutcome {
    let fallback = config.fallback(max_hits);
    match align_read(index, &read.codes(), &fallback, &mut Scratch::new()).outcome {
        ReadOutcome::Deferred => ReadOutcome::Unmapped,
        other => other,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts {
    reads: u64,
    aligned: u64,
    unmapped: u64,
    deferred: u64,
    deferred_then_aligned: u64,
    deferred_then_unmapped: u64,
    paired_reads: u64,
    properly_paired_reads: u64,
    states: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.reads += o.reads;
        self.aligned += o.aligned;
        self.unmapped += o.unmapped;
        self.deferred += o.deferred;
        self.deferred_then_aligned += o.deferred_then_aligned;
        self.deferred_then_unmapped += o.deferred_then_unmapped;
        self.paired_reads += o.paired_reads;
        self.properly_paired_reads += o.properly_paired_reads;
        self.states += o.states;
    }
}

struct BatchOutput {
    batch_id: u64,
    sam: Vec<u8>,
    records: u64,
    counts: Counts,
}

struct GroupContext<'a> {
    index: &'a ReferenceIndex,
    config: &'a PipelineConfig,
    model: InsertModel,
}

/// Worker pass plus controller fallback; final outcome per read.
fn align_batch(batch: &Batch, ctx: &GroupContext<'_>, executor: &Executor) -> Result<(Vec<ReadOutcome>, Counts), PipelineError> {
    let result = dispatch_batch(batch, ctx.index, executor, &ctx.config.aligner)?;
    let mut counts = Counts { states: result.stats.states, ..Counts::default() };
    let mut outcomes = result.outcomes;
    for (read, outcome) in batch.reads().zip(outcomes.iter_mut()) {
        if outcome.is_deferred() {
            counts.deferred += 1;
            *outcome = fallback_align(read, ctx.index, &ctx.config.aligner, ctx.config.fallback_max_hits);
            match outcome {
                ReadOutcome::Mapped(_) => counts.deferred_then_aligned += 1,
                _ => counts.deferred_then_unmapped += 1,
            }
        }
    }
    Ok((outcomes, counts))
}

/// Primary records for every unit of a batch, in unit order.
pub fn batch_records(units: &[ReadUnit], outcomes: &[ReadOutcome], index: &ReferenceIndex, model: &InsertModel) -> Vec<AlignmentRecord> {
    let refs = index.sequences();
    let mut out = Vec::with_capacity(outcomes.len());
    let mut it = outcomes.iter();
    for unit in units {
        match unit {
            ReadUnit::Single(r) => {
                let o = it.next().expect("one outcome per read");
                out.push(single_record(r, o.candidates(), refs));
            }
            ReadUnit::Pair(a, b) => {
                let (oa, ob) = (it.next().expect("mate outcome"), it.next().expect("mate outcome"));
                let (ra, rb) = resolve_pair(a, oa.candidates(), b, ob.candidates(), model, refs);
                out.push(ra);
                out.push(rb);
            }
        }
    }
    out
}

fn process_batch(batch: &Batch, ctx: &GroupContext<'_>, executor: &Executor) -> Result<BatchOutput, PipelineError> {
    let (outcomes, mut counts) = align_batch(batch, ctx, executor)?;
    let records = batch_records(&batch.units, &outcomes, ctx.index, &ctx.model);
    let mut sam = Vec::with_capacity(records.len() * 300);
    for rec in &records {
        rec.write_line(&mut sam);
        counts.reads += 1;
        if rec.is_unmapped() {
            counts.unmapped += 1;
        } else {
            counts.aligned += 1;
        }
        if rec.flag & crate::io::sam::flags::PAIRED != 0 {
            counts.paired_reads += 1;
            if rec.is_proper_pair() {
                counts.properly_paired_reads += 1;
            }
        }
    }
    Ok(BatchOutput {
        batch_id: batch.batch_id,
        sam,
        records: records.len() as u64,
        counts,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PipelineReport {
    pub reads_total: u64,
    pub aligned: u64,
    pub unmapped: u64,
    pub deferred: u64,
    pub deferred_then_aligned: u64,
    pub deferred_then_unmapped: u64,
    pub paired_reads: u64,
    pub properly_paired_reads: u64,
    /// `properly_paired_reads / paired_reads`, 0 without pairs.
    pub properly_paired: f64,
    pub skipped_records: u64,
    pub batches: u64,
    pub search_states: u64,
    pub insert_min: usize,
    pub insert_max: usize,
    pub wall_seconds: f64,
    pub reads_per_second: f64,
}

impl PipelineReport {
    fn from_counts(c: &Counts, skipped: u64, batches: u64, model: InsertModel, wall: Duration) -> Self {
        let secs = wall.as_secs_f64();
        PipelineReport {
            reads_total: c.reads,
            aligned: c.aligned,
            unmapped: c.unmapped,
            deferred: c.deferred,
            deferred_then_aligned: c.deferred_then_aligned,
            deferred_then_unmapped: c.deferred_then_unmapped,
            paired_reads: c.paired_reads,
            properly_paired_reads: c.properly_paired_reads,
            properly_paired: if c.paired_reads == 0 {
                0.0
            } else {
                c.properly_paired_reads as f64 / c.paired_reads as f64
            },
            skipped_records: skipped,
            batches,
            search_states: c.states,
            insert_min: model.min_insert,
            insert_max: model.max_insert,
            wall_seconds: secs,
            reads_per_second: if secs > 0.0 { c.reads as f64 / secs } else { 0.0 },
        }
    }

    /// One `key=value` per line.
    pub fn to_key_value(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = value {
            // serde_json's map is sorted; keep declaration order instead.
            for key in REPORT_KEYS {
                out.push_str(&format!("{key}={}\n", map[*key]));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

const REPORT_KEYS: &[&str] = &[
    "reads_total",
    "aligned",
    "unmapped",
    "deferred",
    "deferred_then_aligned",
    "deferred_then_unmapped",
    "paired_reads",
    "properly_paired_reads",
    "properly_paired",
    "skipped_records",
    "batches",
    "search_states",
    "insert_min",
    "insert_max",
    "wall_seconds",
    "reads_per_second",
];

struct ReaderSummary {
    skipped: u64,
    batches: u64,
}

fn read_batches<I>(source: I, config: &PipelineConfig, tx: Sender<Batch>, abort: &AtomicBool) -> Result<ReaderSummary, ParseError>
where
    I: Iterator<Item = Result<ReadUnit, ParseError>>,
{
    let mut summary = ReaderSummary { skipped: 0, batches: 0 };
    let mut units = Vec::with_capacity(config.batch_size.min(1 << 16));
    let send = |units: Vec<ReadUnit>, summary: &mut ReaderSummary| {
        if abort.load(Ordering::Relaxed) {
            return false;
        }
        let batch = Batch { batch_id: summary.batches, units };
        summary.batches += 1;
        tx.send(batch).is_ok()
    };
    for item in source {
        match item {
            Ok(unit) => {
                units.push(unit);
                if units.len() == config.batch_size && !send(std::mem::take(&mut units), &mut summary) {
                    return Ok(summary);
                }
            }
            Err(e) if !config.strict && e.is_recoverable() => {
                log::warn!("skipping malformed record: {e}");
                summary.skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if !units.is_empty() {
        send(units, &mut summary);
    }
    Ok(summary)
}

fn run_controller(ctx: &GroupContext<'_>, executor: &Executor, rx: Receiver<Batch>, tx: Sender<BatchOutput>, abort: &AtomicBool) -> Result<(), PipelineError> {
    for batch in rx {
        if abort.load(Ordering::Relaxed) {
            break;
        }
        let out = match process_batch(&batch, ctx, executor) {
            Ok(out) => out,
            Err(e) => {
                abort.store(true, Ordering::Relaxed);
                return Err(e);
            }
        };
        if tx.send(out).is_err() {
            break;
        }
    }
    Ok(())
}

fn write_outputs<W: Write>(
    header: &SamHeader,
    rx: Receiver<BatchOutput>,
    sink: &mut W,
    ordered: bool,
    counts: &mut Counts,
) -> Result<(), PipelineError> {
    let mut written = 0u64;
    let sink_err = |written, source| PipelineError::Sink { records_written: written, source };
    header.write_to(sink).map_err(|e| sink_err(0, e))?;
    let mut pending = BTreeMap::new();
    let mut next_id = 0u64;
    let emit = |out: BatchOutput, sink: &mut W, written: &mut u64, counts: &mut Counts| {
        sink.write_all(&out.sam).map_err(|e| sink_err(*written, e))?;
        *written += out.records;
        counts.add(&out.counts);
        Ok::<(), PipelineError>(())
    };
    for out in rx {
        if !ordered {
            emit(out, sink, &mut written, counts)?;
            continue;
        }
        pending.insert(out.batch_id, out);
        while let Some(out) = pending.remove(&next_id) {
            emit(out, sink, &mut written, counts)?;
            next_id += 1;
        }
    }
    sink.flush().map_err(|e| sink_err(written, e))
}

/// Finds an insert window from the leading pairs and returns it together
/// with the units it consumed, which must still be processed.
fn calibrate_insert<I>(
    source: &mut I,
    index: &ReferenceIndex,
    config: &PipelineConfig,
    executor: &Executor,
    sample_pairs: usize,
    scan_limit: usize,
) -> Result<(InsertModel, Vec<Result<ReadUnit, ParseError>>), PipelineError>
where
    I: Iterator<Item = Result<ReadUnit, ParseError>>,
{
    let ctx = GroupContext { index, config, model: InsertModel::default() };
    let sanity = InsertModel::default().max_insert * 10;
    let mut buffered = Vec::new();
    let mut inserts = Vec::new();
    let mut scanned = 0;
    let chunk = config.batch_size.min(10_000);
    'scan: while inserts.len() < sample_pairs && scanned < scan_limit {
        let mut units = Vec::new();
        while units.len() < chunk {
            match source.next() {
                None => break,
                Some(Ok(u @ ReadUnit::Pair(..))) => {
                    units.push(u.clone());
                    buffered.push(Ok(u));
                }
                Some(item) => {
                    let stop = matches!(item, Ok(ReadUnit::Single(_))) || item.as_ref().is_err_and(|e| !e.is_recoverable());
                    buffered.push(item);
                    if stop {
                        break 'scan;
                    }
                }
            }
        }
        if units.is_empty() {
            break;
        }
        scanned += units.len();
        let batch = Batch { batch_id: 0, units };
        let (outcomes, _) = align_batch(&batch, &ctx, executor)?;
        for pair in outcomes.chunks(2) {
            let (a, b) = (pair[0].candidates(), pair[1].candidates());
            if let ([a], [b]) = (a, b) {
                if is_forward_reverse(a, b) {
                    match template_len(a, b) {
                        Some(t) if t <= sanity => inserts.push(t),
                        _ => {}
                    }
                }
            }
        }
    }
    inserts.truncate(sample_pairs);
    let model = InsertModel::estimate(&inserts).unwrap_or_default();
    log::info!(
        "insert window [{}, {}] from {} pairs",
        model.min_insert,
        model.max_insert,
        inserts.len()
    );
    Ok((model, buffered))
}

/// Aligns every read from `source` and writes SAM to `sink`.
///
/// Each input read yields exactly one primary record. With
/// `ordered_output`, records follow input order and the output does not
/// depend on worker counts.
pub fn run_pipeline<I, W>(source: I, index: &ReferenceIndex, config: &PipelineConfig, sink: &mut W) -> Result<PipelineReport, PipelineError>
where
    I: IntoIterator<Item = Result<ReadUnit, ParseError>>,
    I::IntoIter: Send,
    W: Write,
{
    config.validate()?;
    let start = Instant::now();
    let mut executors = Vec::with_capacity(config.worker_groups);
    for _ in 0..config.worker_groups {
        executors.push(if config.sequential {
            Executor::Sequential
        } else {
            Executor::with_workers(config.workers_per_group)?
        });
    }

    let mut source = source.into_iter();
    let (model, buffered) = match config.insert {
        InsertSetting::Fixed(m) => (m, Vec::new()),
        InsertSetting::Auto { sample_pairs, scan_limit } => {
            calibrate_insert(&mut source, index, config, &executors[0], sample_pairs, scan_limit)?
        }
    };
    let source = buffered.into_iter().chain(source);

    let header = SamHeader::from_index(index, config.command_line.clone());
    let ctx = GroupContext { index, config, model };
    let abort = AtomicBool::new(false);
    let mut counts = Counts::default();

    let (reader_result, controller_results, write_result) = thread::scope(|scope| {
        let (batch_tx, batch_rx) = bounded::<Batch>(config.queue_capacity);
        let (out_tx, out_rx) = bounded::<BatchOutput>(config.queue_capacity);
        let abort = &abort;
        let reader = scope.spawn(move || read_batches(source, config, batch_tx, abort));
        let controllers: Vec<_> = executors
            .iter()
            .map(|executor| {
                let (rx, tx, ctx) = (batch_rx.clone(), out_tx.clone(), &ctx);
                scope.spawn(move || run_controller(ctx, executor, rx, tx, abort))
            })
            .collect();
        drop(batch_rx);
        drop(out_tx);
        let write_result = write_outputs(&header, out_rx, sink, config.ordered_output, &mut counts);
        if write_result.is_err() {
            abort.store(true, Ordering::Relaxed);
        }
        let controller_results: Vec<_> = controllers
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|p| {
                    Err(PipelineError::Worker {
                        batch_id: u64::MAX,
                        message: panic_message(p),
                    })
                })
            })
            .collect();
        let reader_result = reader.join().expect("reader thread panicked");
        (reader_result, controller_results, write_result)
    });

    write_result?;
    for r in controller_results {
        r?;
    }
    let summary = reader_result?;
    Ok(PipelineReport::from_counts(&counts, summary.skipped, summary.batches, model, start.elapsed()))
}
