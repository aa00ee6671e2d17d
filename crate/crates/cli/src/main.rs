mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;

use args::{AlignArgs, Cli, Command, IndexArgs};
use wavemap_core::index::{load_index, save_index, ReferenceIndex};
use wavemap_core::io::fastx::read_reference;
use wavemap_core::io::ReadSource;
use wavemap_core::pipeline::run_pipeline;

const EXIT_SKIPPED: u8 = 1;
const EXIT_FATAL: u8 = 2;

fn cmd_index(args: &IndexArgs) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    let reference = read_reference(&args.reference)?;
    let index = ReferenceIndex::build_with_seed(&reference, args.sampling_rate, args.ambiguity_seed)
        .with_context(|| format!("building index from {}", args.reference.display()))?;
    save_index(&index, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    let replaced = index.replaced_count();
    if replaced > 0 {
        eprintln!("warning: replaced {replaced} ambiguous reference bases");
    }
    println!("sequences={}", index.sequences().len());
    println!("reference_length={}", index.reference_len());
    println!("replaced_bases={replaced}");
    println!("sampling_rate={}", args.sampling_rate);
    println!("build_seconds={:.3}", start.elapsed().as_secs_f64());
    Ok(ExitCode::SUCCESS)
}

fn cmd_align(args: &AlignArgs) -> anyhow::Result<ExitCode> {
    let config = args.pipeline_config()?;
    let index = load_index(&args.index).with_context(|| format!("loading index {}", args.index.display()))?;
    let hint = args.format.into();
    let source = if args.paired() {
        ReadSource::paired(&args.reads[0], &args.reads[1], hint)?
    } else {
        ReadSource::single(&args.reads, hint)?
    };
    let mut sink: Box<dyn Write> = if args.output == "-" {
        Box::new(BufWriter::new(io::stdout().lock()))
    } else {
        let f = File::create(&args.output).with_context(|| format!("creating {}", args.output))?;
        Box::new(BufWriter::new(f))
    };
    let report = run_pipeline(source, &index, &config, &mut sink)?;
    drop(sink);

    let kv = report.to_key_value();
    eprint!("{kv}");
    if let Some(p) = &args.report {
        std::fs::write(p, &kv).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.report_json {
        std::fs::write(p, report.to_json() + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    if report.skipped_records > 0 {
        eprintln!("warning: skipped {} malformed records", report.skipped_records);
        return Ok(ExitCode::from(EXIT_SKIPPED));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FATAL } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Align(a) => cmd_align(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_FATAL)
    })
}
