use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wavemap_core::align::AlignerConfig;
use wavemap_core::dp::ScoringScheme;
use wavemap_core::index::{DEFAULT_AMBIGUITY_SEED, DEFAULT_SAMPLING_RATE};
use wavemap_core::io::pair::InsertModel;
use wavemap_core::io::FormatHint;
use wavemap_core::pipeline::{default_workers_per_group, InsertSetting, PipelineConfig};
use wavemap_core::seed::{HitOverflow, SearchBudget};

#[derive(Debug, Parser)]
#[command(name = "wavemap", version, about = "Short-read DNA aligner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a FASTA reference.
    Index(IndexArgs),
    /// Align FASTA/FASTQ reads (optionally gzipped) and write SAM.
    Align(AlignArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Reference FASTA (plain or gzip).
    pub reference: PathBuf,
    /// Index file to write.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Keep one suffix-array sample per this many text positions.
    #[arg(long, default_value_t = DEFAULT_SAMPLING_RATE)]
    pub sampling_rate: u32,
    /// Seed for replacing ambiguous reference bases.
    #[arg(long, default_value_t = DEFAULT_AMBIGUITY_SEED)]
    pub ambiguity_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Auto,
    Fasta,
    Fastq,
}

impl From<Format> for FormatHint {
    fn from(f: Format) -> Self {
        match f {
            Format::Auto => FormatHint::Auto,
            Format::Fasta => FormatHint::Fasta,
            Format::Fastq => FormatHint::Fastq,
        }
    }
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Index built by `wavemap index`.
    #[arg(short, long)]
    pub index: PathBuf,
    /// One read file, or two mate files for paired-end input.
    #[arg(required = true, num_args = 1..=2)]
    pub reads: Vec<PathBuf>,
    /// SAM output; `-` for standard output.
    #[arg(short, long, default_value = "-")]
    pub output: String,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
    /// Read units (reads or pairs) per batch.
    #[arg(long, default_value_t = 100_000)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub worker_groups: usize,
    /// Defaults to four per available core.
    #[arg(long, default_value_t = default_workers_per_group())]
    pub workers_per_group: usize,
    /// Run each group's workers on its controller thread.
    #[arg(long)]
    pub sequential: bool,
    /// Substitutions allowed in the whole-read search.
    #[arg(short = 'k', long, default_value_t = 2)]
    pub mismatches: u32,
    /// Hits beyond this defer the read to the controller.
    #[arg(long, default_value_t = 64)]
    pub max_hits: usize,
    /// Search steps beyond this defer the read to the controller.
    #[arg(long, default_value_t = 8192)]
    pub max_states: usize,
    /// Hit cap when re-aligning deferred reads.
    #[arg(long, default_value_t = 1024)]
    pub fallback_max_hits: usize,
    #[arg(long, default_value_t = 17)]
    pub min_seed_len: usize,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub match_bonus: i32,
    #[arg(long, default_value_t = -4, allow_negative_numbers = true)]
    pub mismatch_penalty: i32,
    #[arg(long, default_value_t = -6, allow_negative_numbers = true)]
    pub gap_open: i32,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub gap_extend: i32,
    /// Alignments scoring below this are reported unmapped.
    #[arg(long, default_value_t = 20, allow_negative_numbers = true)]
    pub min_report_score: i32,
    /// Extra reference bases allowed in a DP window beyond twice the read length.
    #[arg(long, default_value_t = 256)]
    pub window_slack: usize,
    /// Reference bases added on each side of a seeded placement.
    #[arg(long, default_value_t = 16)]
    pub margin: usize,
    /// Cells filled per DP step: 1, 4, 8 or 16.
    #[arg(long, default_value_t = 16)]
    pub lanes: usize,
    #[arg(long, default_value_t = 100)]
    pub insert_min: usize,
    #[arg(long, default_value_t = 1000)]
    pub insert_max: usize,
    /// Estimate the insert window from the leading unique pairs instead.
    #[arg(long)]
    pub insert_auto: bool,
    /// Emit batches as they finish rather than in input order.
    #[arg(long)]
    pub unordered: bool,
    /// Abort on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Treat two read files as consecutive single-end inputs.
    #[arg(long)]
    pub single_end: bool,
    /// Write the run report as key=value lines here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the run report as JSON here.
    #[arg(long)]
    pub report_json: Option<PathBuf>,
}

impl AlignArgs {
    pub fn paired(&self) -> bool {
        self.reads.len() == 2 && !self.single_end
    }

    pub fn pipeline_config(&self) -> anyhow::Result<PipelineConfig> {
        let insert = if self.insert_auto {
            InsertSetting::auto()
        } else {
            InsertSetting::Fixed(InsertModel::new(self.insert_min, self.insert_max)?)
        };
        Ok(PipelineConfig {
            batch_size: self.batch_size,
            worker_groups: self.worker_groups,
            workers_per_group: self.workers_per_group,
            aligner: AlignerConfig {
                budget: SearchBudget {
                    max_mismatches: self.mismatches,
                    max_hits: self.max_hits,
                    max_states: self.max_states,
                    overflow: HitOverflow::Exceed,
                },
                scoring: ScoringScheme {
                    match_bonus: self.match_bonus,
                    mismatch_penalty: self.mismatch_penalty,
                    gap_open_penalty: self.gap_open,
                    gap_extend_penalty: self.gap_extend,
                    min_report_score: self.min_report_score,
                    window_slack: self.window_slack,
                },
                lanes: self.lanes,
                margin: self.margin,
                min_seed_len: self.min_seed_len,
            },
            fallback_max_hits: self.fallback_max_hits,
            ordered_output: !self.unordered,
            insert,
            strict: self.strict,
            sequential: self.sequential || !cfg!(feature = "parallel"),
            queue_capacity: 4,
            command_line: self.canonical_command_line(),
        })
    }

    /// Every setting spelled out, so the line replays this exact run.
    pub fn canonical_command_line(&self) -> String {
        let mut words: Vec<String> = vec!["wavemap".into(), "align".into()];
        let mut opt = |name: &str, value: String| {
            words.push(format!("--{name}"));
            words.push(value);
        };
        opt("index", self.index.display().to_string());
        opt("output", self.output.clone());
        opt("format", format!("{:?}", self.format).to_lowercase());
        opt("batch-size", self.batch_size.to_string());
        opt("worker-groups", self.worker_groups.to_string());
        opt("workers-per-group", self.workers_per_group.to_string());
        opt("mismatches", self.mismatches.to_string());
        opt("max-hits", self.max_hits.to_string());
        opt("max-states", self.max_states.to_string());
        opt("fallback-max-hits", self.fallback_max_hits.to_string());
        opt("min-seed-len", self.min_seed_len.to_string());
        opt("match-bonus", self.match_bonus.to_string());
        opt("mismatch-penalty", self.mismatch_penalty.to_string());
        opt("gap-open", self.gap_open.to_string());
        opt("gap-extend", self.gap_extend.to_string());
        opt("min-report-score", self.min_report_score.to_string());
        opt("window-slack", self.window_slack.to_string());
        opt("margin", self.margin.to_string());
        opt("lanes", self.lanes.to_string());
        opt("insert-min", self.insert_min.to_string());
        opt("insert-max", self.insert_max.to_string());
        if let Some(p) = &self.report {
            opt("report", p.display().to_string());
        }
        if let Some(p) = &self.report_json {
            opt("report-json", p.display().to_string());
        }
        let flags = [
            ("insert-auto", self.insert_auto),
            ("unordered", self.unordered),
            ("strict", self.strict),
            ("sequential", self.sequential),
            ("single-end", self.single_end),
        ];
        for (name, on) in flags {
            if on {
                words.push(format!("--{name}"));
            }
        }
        words.push("--".into());
        words.extend(self.reads.iter().map(|p| p.display().to_string()));
        shell_words::join(words)
    }
}
