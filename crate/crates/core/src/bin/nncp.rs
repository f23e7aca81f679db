use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nncp::cli::{
    cmd_gen, cmd_grid, cmd_run, parse_dims, GridSpec, InputSource, RankSweep, RunSpec,
    SyntheticSpec,
};
use nncp::nncp::NlsMethod;
use nncp::par::{ExecMode, ProcessGrid};

#[derive(Parser)]
#[command(name = "nncp", version, about = "Dense nonnegative CP decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an exact low-rank synthetic tensor and its generating model.
    Gen {
        #[arg(long)]
        dims: String,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use all-ones generating factors.
        #[arg(long)]
        ones: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose a tensor file or a synthetic tensor.
    Run {
        #[arg(long, conflicts_with = "synthetic")]
        input: Option<PathBuf>,
        /// Synthetic tensor as DIMS:RANK[:SEED], e.g. 32x32x32:4:1.
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, required_unless_present = "rank_sweep")]
        rank: Option<usize>,
        /// Ranks a:b[:step], one run and one set of outputs per rank.
        #[arg(long, conflicts_with = "rank")]
        rank_sweep: Option<String>,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Processor grid PxQx..., or "auto" together with --procs.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        procs: Option<usize>,
        #[arg(long, default_value = "bpp")]
        nls: String,
        #[arg(long)]
        no_dimtree: bool,
        /// sim or threads.
        #[arg(long, default_value = "sim")]
        workers: String,
        /// Zero-pad extents the grid does not divide.
        #[arg(long)]
        pad: bool,
        /// Write zeros instead of measured timers to the trace.
        #[arg(long)]
        no_timings: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Model output file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List processor grids for a tensor shape and worker count.
    Grid {
        #[arg(long)]
        dims: String,
        #[arg(long)]
        procs: usize,
        /// Show one grid per set of permutations.
        #[arg(long)]
        distinct: bool,
    },
}

fn parse_synthetic(s: &str) -> nncp::Result<SyntheticSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || nncp::Error::InvalidArgument(format!("bad synthetic spec {s:?}"));
    let (dims, rank, seed) = match parts.as_slice() {
        [d, r] => (*d, *r, "0"),
        [d, r, seed] => (*d, *r, *seed),
        _ => return Err(bad()),
    };
    Ok(SyntheticSpec {
        dims: parse_dims(dims)?,
        true_rank: rank.parse().map_err(|_| bad())?,
        seed: seed.parse().map_err(|_| bad())?,
    })
}

fn run(cli: Cli) -> nncp::Result<()> {
    let stdout = &mut std::io::stdout().lock();
    match cli.command {
        Command::Gen { dims, rank, seed, ones, out } => {
            cmd_gen(&parse_dims(&dims)?, rank, seed, ones, &out, stdout)?;
        }
        Command::Run {
            input,
            synthetic,
            rank,
            rank_sweep,
            iters,
            tol,
            seed,
            grid,
            procs,
            nls,
            no_dimtree,
            workers,
            pad,
            no_timings,
            trace,
            ledger,
            out,
        } => {
            let source = match (input, synthetic) {
                (Some(p), None) => InputSource::File(p),
                (None, Some(s)) => InputSource::Synthetic(parse_synthetic(&s)?),
                _ => {
                    return Err(nncp::Error::InvalidArgument(
                        "give exactly one of --input or --synthetic".into(),
                    ))
                }
            };
            let ranks = match (rank, rank_sweep) {
                (Some(r), None) => vec![r],
                (None, Some(s)) => RankSweep::parse(&s)?.ranks(),
                _ => return Err(nncp::Error::InvalidArgument("give --rank or --rank-sweep".into())),
            };
            let grid = match (grid.as_deref(), procs) {
                (None, None) => None,
                (Some("auto"), Some(p)) | (None, Some(p)) => Some(GridSpec::Auto { procs: p }),
                (Some("auto"), None) => {
                    return Err(nncp::Error::InvalidArgument("--grid auto needs --procs".into()))
                }
                (Some(g), _) => Some(GridSpec::Explicit(ProcessGrid::parse(g)?)),
            };
            let mut spec = RunSpec::new(source, ranks[0]);
            spec.ranks = ranks;
            spec.iters = iters;
            spec.tol = tol;
            spec.nls = nls.parse::<NlsMethod>()?;
            spec.seed = seed;
            spec.grid = grid;
            spec.dimtree = !no_dimtree;
            spec.workers = workers.parse::<ExecMode>()?;
            spec.pad = pad;
            spec.timings = !no_timings;
            spec.model_out = out;
            spec.trace_out = trace;
            spec.ledger_out = ledger;
            cmd_run(&spec, stdout)?;
        }
        Command::Grid { dims, procs, distinct } => {
            cmd_grid(&parse_dims(&dims)?, procs, distinct, stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
