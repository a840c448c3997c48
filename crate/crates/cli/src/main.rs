//! `hybridsim`: builds the explicit decoders and runs the verification,
//! census and probe harnesses, writing reproducible JSON or CSV reports.
//!
//! Exit codes: 0 all checks passed, 1 failures or witnesses found,
//! 2 usage error, 3 runtime error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "hybridsim", version, about = "Bit-exact hybrid GA/GDN decoder harnesses")]
struct Cli {
    /// Worker threads for instance enumeration (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone, Debug)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Report path; defaults to a file under the output directory, else stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "HYBRIDSIM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Precision `s`; the grid needs `s ≥ 2` and the accumulators `s ≤ 16`.
fn precision(text: &str) -> Result<u32, String> {
    let s: u32 = text.parse().map_err(|_| format!("`{text}` is not an integer"))?;
    if (2..=16).contains(&s) {
        Ok(s)
    } else {
        Err(format!("s must lie in 2..=16, got {s}"))
    }
}

fn table_size(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(0) => Err("n must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(_) => Err(format!("`{text}` is not a table size")),
    }
}

/// Table sizes from `3`, `1..6` (inclusive), `1..=6` or `1,4,16`.
#[derive(Clone, Debug)]
pub struct SizeList(pub Vec<usize>);

pub fn size_list(text: &str) -> Result<SizeList, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once("..") {
            let (lo, hi) = (table_size(lo)?, table_size(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty range {part}"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(table_size(part)?);
        }
    }
    Ok(SizeList(out))
}

#[derive(Subcommand)]
enum Command {
    /// Build the hybrid decoder for each n and check every PCR instance
    VerifyHybrid {
        #[arg(long, value_parser = size_list)]
        n: SizeList,
        #[arg(long, value_parser = precision, default_value = "2")]
        s: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        budget: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recurrent-state census of a pure GDN decoder loaded from JSON
    Census {
        #[arg(long)]
        decoder: PathBuf,
        #[arg(long, value_parser = table_size)]
        n: usize,
        /// Scratch budget when executing witnesses
        #[arg(long, default_value_t = 0)]
        budget: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The parity-cell rounding identities at precision s
    RoundTable {
        #[arg(long, value_parser = precision, default_value = "2")]
        s: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compute m0(s), sample an address code and write it as text
    CodeSearch {
        #[arg(long, value_parser = precision, default_value = "2")]
        s: u32,
        #[arg(long, value_parser = table_size)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Code table path; defaults to the output directory or the working directory
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the hybrid decoder as DecoderSpec JSON
    BuildHybrid {
        #[arg(long, value_parser = table_size)]
        n: usize,
        #[arg(long, value_parser = precision, default_value = "2")]
        s: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the pure GDN parity-only decoder as DecoderSpec JSON
    BuildParityOnly {
        #[arg(long, value_parser = table_size)]
        n: usize,
        #[arg(long, value_parser = precision, default_value = "2")]
        s: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Parity probe of a pure GA decoder (default: the hybrid without its GDN layer)
    GaProbe {
        #[arg(long)]
        r: usize,
        #[arg(long, value_parser = precision, default_value = "2")]
        s: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        budget: usize,
        /// Pure GA decoder JSON to probe instead of the default
        #[arg(long)]
        decoder: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// How a command ended, mapped onto the exit code.
pub enum Status {
    Pass,
    Findings,
    Usage(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::VerifyHybrid { n, s, seed, budget, output } => {
            commands::verify_hybrid(&n.0, s, seed, budget, &output)
        }
        Command::Census { decoder, n, budget, output } => commands::census(&decoder, n, budget, &output),
        Command::RoundTable { s, output } => commands::round_table(s, &output),
        Command::CodeSearch { s, n, seed, table, output } => {
            commands::code_search(s, n, seed, table.as_deref(), &output)
        }
        Command::BuildHybrid { n, s, seed, output } => commands::build_hybrid(n, s, seed, &output),
        Command::BuildParityOnly { n, s, output } => commands::build_parity_only(n, s, &output),
        Command::GaProbe { r, s, seed, budget, decoder, output } => {
            commands::ga_probe(r, s, seed, budget, decoder.as_deref(), &output)
        }
    };
    match result {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Findings) => ExitCode::from(1),
        Ok(Status::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
