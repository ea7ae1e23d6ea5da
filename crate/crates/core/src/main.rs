use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use x3::bench::{self, ReferenceTable};
use x3::optimizer::{self, MatchStrategy, SearchSpace};
use x3::{codec, Error, SearchParams};

const EXIT_IO: u8 = 3;
const EXIT_CORRUPT: u8 = 4;
const EXIT_CAP: u8 = 5;
const EXIT_ROUNDTRIP: u8 = 6;
const EXIT_PARAMS: u8 = 7;

#[derive(Parser)]
#[command(
    name = "x3",
    version,
    about = "Dictionary compressor with context-modeled range coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a file
    #[command(visible_alias = "c")]
    Compress {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Write compression statistics as JSON
        #[arg(long, value_name = "PATH")]
        stats: Option<PathBuf>,
    },
    /// Decompress a file
    #[command(visible_alias = "d")]
    Decompress { input: PathBuf, output: PathBuf },
    /// Compress every file in a directory and report ratios
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the report as CSV
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// CSV of other codecs' ratios (name,<codec>...) shown alongside
        #[arg(long, value_name = "PATH")]
        reference: Option<PathBuf>,
        /// Show published Silesia ratios of lz4, gzip, xz, zstd and brotli
        #[arg(long, conflicts_with = "reference")]
        silesia_reference: bool,
    },
    /// Search for the best parameters for one file
    #[command(visible_alias = "optimize")]
    Opt {
        input: PathBuf,
        /// Window sizes in bytes
        #[arg(long, value_delimiter = ',', default_values_t = [1024, 2048, 4096, 8192, 16384, 32768, 65536])]
        windows: Vec<usize>,
        /// Try exactly these match budgets instead of hill-climbing
        #[arg(long, value_delimiter = ',', conflicts_with = "exhaustive")]
        matches: Vec<usize>,
        /// Try every match budget from 1 to N
        #[arg(long, value_name = "N")]
        exhaustive: Option<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [64])]
        max_lens: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Choice::Both)]
        guard_dict: Choice,
        #[arg(long, value_enum, default_value_t = Choice::Off)]
        guard_window: Choice,
        /// Stop after this many seconds and report the best point so far
        #[arg(long, value_name = "SECONDS")]
        budget: Option<f64>,
        /// Write every trial as CSV
        #[arg(long, value_name = "PATH")]
        log: Option<PathBuf>,
        /// Compress with the best parameters into PATH
        #[arg(long, value_name = "PATH")]
        apply: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Choice {
    On,
    Off,
    Both,
}

impl Choice {
    fn values(self) -> &'static [bool] {
        match self {
            Choice::On => &[true],
            Choice::Off => &[false],
            Choice::Both => &[false, true],
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Look-ahead window in bytes
    #[arg(long, default_value_t = 8192)]
    window: usize,
    /// Match budget M
    #[arg(long, default_value_t = 28)]
    max_matches: usize,
    /// Longest fragment considered
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    guard_dict: Toggle,
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    guard_window: Toggle,
}

impl SearchArgs {
    fn params(&self) -> SearchParams {
        SearchParams {
            window_size: self.window,
            max_matches: self.max_matches,
            max_match_len: self.max_len,
            guard_dictionary: self.guard_dict == Toggle::On,
            guard_window: self.guard_window == Toggle::On,
        }
    }
}

fn threads() -> Option<usize> {
    std::env::var("X3_THREADS").ok()?.parse().ok()
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> x3::Result<()> {
    let body = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(io::Error::other(e)))?;
    fs::write(path, body)?;
    Ok(())
}

fn run(cli: Cli) -> x3::Result<()> {
    match cli.command {
        Command::Compress {
            input,
            output,
            search,
            stats,
        } => {
            let data = fs::read(&input)?;
            let (packed, report) = codec::compress_with_stats(&data, &search.params())?;
            fs::write(&output, &packed)?;
            if let Some(path) = stats {
                write_json(&path, &report)?;
            }
            println!("{} -> {} bytes, ratio {:.4}", data.len(), packed.len(), report.ratio);
        }
        Command::Decompress { input, output } => {
            let packed = fs::read(&input)?;
            let data = codec::decompress(&packed)?;
            fs::write(&output, data)?;
        }
        Command::Bench {
            dir,
            search,
            csv,
            reference,
            silesia_reference,
        } => {
            let reference = match reference {
                Some(path) => Some(ReferenceTable::from_csv(fs::File::open(path)?)?),
                None if silesia_reference => Some(ReferenceTable::silesia()),
                None => None,
            };
            let report = bench::run_bench(&dir, &search.params(), threads())?;
            print!("{}", bench::render_table(&report, reference.as_ref()));
            if let Some(path) = csv {
                bench::write_csv(&report, fs::File::create(path)?)?;
            }
        }
        Command::Opt {
            input,
            windows,
            matches,
            exhaustive,
            max_lens,
            guard_dict,
            guard_window,
            budget,
            log,
            apply,
        } => {
            let data = fs::read(&input)?;
            let strategy = match (exhaustive, matches.is_empty()) {
                (Some(max), _) => MatchStrategy::Exhaustive { max },
                (None, false) => MatchStrategy::Fixed(matches),
                (None, true) => MatchStrategy::HillClimb,
            };
            let guards = guard_dict
                .values()
                .iter()
                .flat_map(|&d| guard_window.values().iter().map(move |&w| (d, w)))
                .collect();
            let space = SearchSpace {
                windows,
                matches: strategy,
                max_lens,
                guards,
                time_budget: budget.map(Duration::from_secs_f64),
                threads: threads(),
            };
            let outcome = optimizer::optimize(&data, &space)?;
            if let Some(path) = log {
                optimizer::write_trial_log(&outcome.trials, fs::File::create(path)?)?;
            }
            let b = &outcome.best;
            let p = &b.params;
            println!(
                "best: --window {} --max-matches {} --max-len {} --guard-dict {} --guard-window {}",
                p.window_size,
                p.max_matches,
                p.max_match_len,
                if p.guard_dictionary { "on" } else { "off" },
                if p.guard_window { "on" } else { "off" },
            );
            println!(
                "{} -> {} bytes, ratio {:.4} ({} trials{})",
                b.input_bytes,
                b.compressed_bytes,
                b.ratio,
                outcome.trials.len(),
                if outcome.partial { ", time budget reached" } else { "" }
            );
            if let Some(path) = apply {
                fs::write(path, codec::compress(&data, p)?)?;
            }
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::DictionaryFull { .. } => EXIT_CAP,
        Error::RoundtripMismatch(_) => EXIT_ROUNDTRIP,
        Error::InvalidParams(_) => EXIT_PARAMS,
        e if e.is_corrupt_stream() => EXIT_CORRUPT,
        _ => EXIT_CORRUPT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let _ = writeln!(io::stderr(), "x3: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
