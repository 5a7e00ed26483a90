use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pem_core::error::{Error, ErrorCategory};
use pem_core::featmat::{write_dump, CodeMode, MatrixView, WindowConfig};
use pem_core::pipeline::{detect, AnalysisConfig, DetectConfig};
use pem_core::signal::{read_report, write_report, Ranking, ReportFormat};
use pem_core::stats::TestVariant;
use pem_core::synth::{evaluate, generate_cohort, SynthConfig};
use pem_core::{parse_readcode, rollup};

/// Prescription-event monitoring: detect candidate adverse drug reactions
/// from before/after event windows around first prescription.
#[derive(Debug, Parser)]
#[command(name = "pem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the detection pipeline and write a ranked signal report.
    Detect(DetectArgs),
    /// Generate a synthetic cohort with planted reactions.
    Simulate(SimulateArgs),
    /// Score a report against the planted reactions of a synthetic cohort.
    Evaluate(EvaluateArgs),
    /// Roll codes read from stdin up to a hierarchy level.
    Rollup(RollupArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "level15")]
    Level15,
    #[value(name = "level13")]
    Level13,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(name = "pooled_unpaired")]
    PooledUnpaired,
    #[value(name = "paired")]
    Paired,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RankingArg {
    P,
    R1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Pretty,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Therapy (prescription) file: patient_id, drug_code, date.
    #[arg(long)]
    therapy: PathBuf,
    /// Medical (event) file: patient_id, event_code, date.
    #[arg(long)]
    medical: PathBuf,
    /// Term dictionary: code TAB description per line.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Keep prescriptions whose drug code starts with this prefix.
    #[arg(long)]
    drug_prefix: String,
    #[arg(long, default_value_t = 60)]
    window_days: u32,
    #[arg(long, default_value_t = 100)]
    group_size: usize,
    #[arg(long, value_enum, default_value = "level15")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "pooled_unpaired")]
    variant: VariantArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "p")]
    ranking: RankingArg,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    /// Keep only events whose code starts with this prefix (e.g. B for neoplasms).
    #[arg(long)]
    prefix_filter: Option<String>,
    /// Also report significant decreases (N_A <= N_B).
    #[arg(long, default_value_t = false)]
    allow_decrease: bool,
    /// Input field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
    /// Report destination.
    #[arg(long, short)]
    output: PathBuf,
    /// Also write the A, B, X and Y matrices into this directory.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving therapy.csv, medical.csv, dictionary.tsv, synth.toml.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config patient count.
    #[arg(long)]
    n_patients: Option<usize>,
    /// Overrides the config null event count.
    #[arg(long)]
    n_null_events: Option<usize>,
    /// Sets every effect multiplier to 1.
    #[arg(long, default_value_t = false)]
    null: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// TSV report written by `detect`.
    #[arg(long)]
    report: PathBuf,
    /// synth.toml written by `simulate`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, short, default_value_t = 20)]
    k: usize,
}

#[derive(Debug, Args)]
struct RollupArgs {
    #[arg(long, default_value_t = 3)]
    level: u8,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn run_detect(args: DetectArgs) -> Result<(), Error> {
    if !args.delimiter.is_ascii() {
        return Err(usage("delimiter must be a single ASCII character"));
    }
    let mut cfg = DetectConfig::new(&args.therapy, &args.medical, args.drug_prefix);
    cfg.dictionary = args.dictionary;
    cfg.analysis = AnalysisConfig {
        window: WindowConfig {
            window_days: args.window_days,
            group_size: args.group_size,
        },
        mode: match args.mode {
            ModeArg::Level15 => CodeMode::Level15,
            ModeArg::Level13 => CodeMode::Level13,
        },
        variant: match args.variant {
            VariantArg::PooledUnpaired => TestVariant::PooledUnpaired,
            VariantArg::Paired => TestVariant::Paired,
        },
    };
    cfg.ranking = match args.ranking {
        RankingArg::P => Ranking::ByP,
        RankingArg::R1 => Ranking::ByR1,
    };
    cfg.alpha = args.alpha;
    cfg.top_k = args.top_k;
    cfg.prefix_filter = args.prefix_filter;
    cfg.require_increase = !args.allow_decrease;
    cfg.delimiter = args.delimiter as u8;
    cfg.validate()?;

    let outcome = detect(&cfg)?;
    let format = match args.format {
        FormatArg::Tsv => ReportFormat::Tsv,
        FormatArg::Pretty => ReportFormat::Pretty,
    };
    write_report(&outcome.report, &args.output, format)?;
    if let Some(dir) = &args.dump_dir {
        let a = &outcome.analysis;
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        dump(&a.matrices.before, &dir.join("A.tsv"))?;
        dump(&a.matrices.after, &dir.join("B.tsv"))?;
        dump(&a.grouped_before, &dir.join("X.tsv"))?;
        dump(&a.grouped_after, &dir.join("Y.tsv"))?;
    }
    let s = outcome.summary;
    eprintln!(
        "therapy kept={} skipped={} filtered={}; medical kept={} skipped={}",
        s.therapy.kept, s.therapy.skipped, s.therapy.filtered, s.medical.kept, s.medical.skipped
    );
    eprintln!(
        "patients={} events={} groups={} signals={} universe_misses={}",
        s.patients, s.events, s.groups, s.signals, s.universe_misses
    );
    Ok(())
}

fn dump(m: &impl MatrixView, path: &Path) -> Result<(), Error> {
    let io_err = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = io::BufWriter::new(file);
    write_dump(m, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut cfg = match &args.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_patients {
        cfg.n_patients = n;
    }
    if let Some(n) = args.n_null_events {
        cfg.n_null_events = n;
    }
    if args.null {
        cfg.planted.iter_mut().for_each(|p| p.effect_multiplier = 1.0);
    }
    cfg.validate()?;
    let cohort = generate_cohort(&cfg)?;
    let paths = cohort.write_to(&args.out_dir, &cfg)?;
    eprintln!(
        "patients={} prescriptions={} events={} -> {}",
        cfg.n_patients,
        cohort.prescriptions.len(),
        cohort.events.len(),
        args.out_dir.display()
    );
    println!("therapy\t{}", paths.therapy.display());
    println!("medical\t{}", paths.medical.display());
    println!("dictionary\t{}", paths.dictionary.display());
    println!("config\t{}", paths.config.display());
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    if args.k == 0 {
        return Err(usage("k must be at least 1"));
    }
    let cfg = SynthConfig::load(&args.config)?;
    let report = read_report(&args.report)?;
    let result = evaluate(&report, &cfg, args.k);
    println!("recall_at_{}\t{:.4}", result.k, result.recall_at_k);
    for (key, rank) in &result.planted_ranks {
        let rank = rank.map_or_else(|| "-".to_string(), |r| r.to_string());
        println!("{key}\t{rank}");
    }
    Ok(())
}

fn run_rollup(args: RollupArgs) -> Result<(), Error> {
    if !(1..=5).contains(&args.level) {
        return Err(usage(format!("level must be in 1..=5, got {}", args.level)));
    }
    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let io_err = |e| Error::Io {
        path: PathBuf::from("-"),
        source: e,
    };
    for line in stdin.lock().lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let code = rollup(parse_readcode(&line)?, args.level)?;
        writeln!(out, "{code}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ErrorCategory::Usage.exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => run_detect(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Rollup(a) => run_rollup(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{}", category.as_str(), msg);
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
