//! Command implementations behind the `nncp` binary.
//!
//! Each command writes its human-readable report to a caller-supplied
//! writer so that it can be driven and checked from tests.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{read_tensor, write_model, write_tensor};
use crate::kruskal::KruskalModel;
use crate::matrix::Matrix;
use crate::nncp::{nncp, NlsMethod, NncpConfig};
use crate::par::{ExecMode, ProcessGrid};
use crate::par_nncp::{enumerate_grids, optimize_grid, par_nncp, GridChoice, ParConfig};
use crate::tensor::DenseTensor;

/// Parses extents written as `8x8x8` or `8,8,8`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let dims = s
        .split(['x', 'X', ','])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad extent {p:?} in {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("extents {s:?} must be positive")));
    }
    Ok(dims)
}

/// Inclusive rank range `a:b:step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankSweep {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl RankSweep {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad rank sweep {s:?}")))
        };
        let sweep = match parts.as_slice() {
            [a, b] => Self { start: num(a)?, end: num(b)?, step: 1 },
            [a, b, c] => Self { start: num(a)?, end: num(b)?, step: num(c)? },
            _ => return Err(Error::InvalidArgument(format!("rank sweep {s:?} is not a:b[:step]"))),
        };
        if sweep.start == 0 || sweep.step == 0 || sweep.end < sweep.start {
            return Err(Error::InvalidArgument(format!("empty or invalid rank sweep {s:?}")));
        }
        Ok(sweep)
    }

    pub fn ranks(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    pub true_rank: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Explicit(ProcessGrid),
    /// Pick the best grid for this many workers.
    Auto { procs: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub input: InputSource,
    pub ranks: Vec<usize>,
    pub iters: usize,
    pub tol: f64,
    pub nls: NlsMethod,
    pub seed: u64,
    /// `None` runs the sequential driver.
    pub grid: Option<GridSpec>,
    pub dimtree: bool,
    pub workers: ExecMode,
    pub pad: bool,
    /// Write measured timers to the trace instead of zeros.
    pub timings: bool,
    pub model_out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub ledger_out: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(input: InputSource, rank: usize) -> Self {
        Self {
            input,
            ranks: vec![rank],
            iters: 100,
            tol: 0.0,
            nls: NlsMethod::Bpp,
            seed: 0,
            grid: None,
            dimtree: true,
            workers: ExecMode::Simulated,
            pad: false,
            timings: true,
            model_out: None,
            trace_out: None,
            ledger_out: None,
        }
    }
}

/// Generating model with uniform `[0, 1)` factors (or all ones) and unit
/// weights, drawn mode by mode from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn synthetic_model(dims: &[usize], rank: usize, seed: u64, ones: bool) -> Result<KruskalModel> {
    if rank == 0 {
        return Err(Error::InvalidArgument("true rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = dims
        .iter()
        .map(|&d| {
            if ones {
                Matrix::filled(d, rank, 1.0)
            } else {
                Matrix::from_fn(d, rank, |_, _| rng.gen::<f64>())
            }
        })
        .collect();
    KruskalModel::from_factors(factors)
}

/// Path of the generating-model file written next to a tensor.
pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    let mut s = tensor_path.as_os_str().to_owned();
    s.push(".model");
    PathBuf::from(s)
}

/// Writes the synthetic tensor to `out` and its generating model to the
/// sidecar path.
pub fn cmd_gen(
    dims: &[usize],
    true_rank: usize,
    seed: u64,
    ones: bool,
    out: &Path,
    report: &mut impl Write,
) -> Result<DenseTensor> {
    let model = synthetic_model(dims, true_rank, seed, ones)?;
    let tensor = model.full()?;
    write_tensor(out, &tensor)?;
    let side = sidecar_path(out);
    write_model(&side, &model)?;
    writeln!(
        report,
        "wrote {} ({} entries, rank {true_rank}) and {}",
        out.display(),
        tensor.len(),
        side.display()
    )?;
    Ok(tensor)
}

/// `path` with `.r{rank}` inserted before the extension.
pub fn with_rank_suffix(path: &Path, rank: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.r{rank}.{}", ext.to_string_lossy()),
        None => format!("{stem}.r{rank}"),
    };
    path.with_file_name(name)
}

/// Outcome of one decomposition in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub rank: usize,
    pub grid: Option<ProcessGrid>,
    pub final_eps: f64,
    pub iterations: usize,
    pub model: KruskalModel,
    pub trace_csv: String,
    pub ledger_csv: Option<String>,
}

fn load_input(input: &InputSource) -> Result<DenseTensor> {
    match input {
        InputSource::File(p) => read_tensor(p),
        InputSource::Synthetic(s) => synthetic_model(&s.dims, s.true_rank, s.seed, false)?.full(),
    }
}

fn resolve_grid(spec: &GridSpec, dims: &[usize]) -> Result<ProcessGrid> {
    match spec {
        GridSpec::Explicit(g) => Ok(g.clone()),
        GridSpec::Auto { procs } => ProcessGrid::new(&optimize_grid(dims, *procs)?.grid),
    }
}

fn out_path(base: &Option<PathBuf>, rank: usize, sweep: bool) -> Option<PathBuf> {
    base.as_ref().map(|p| if sweep { with_rank_suffix(p, rank) } else { p.clone() })
}

/// Runs every requested rank and writes the requested artifacts.
pub fn cmd_run(spec: &RunSpec, report: &mut impl Write) -> Result<Vec<RunOutcome>> {
    if spec.ranks.is_empty() {
        return Err(Error::InvalidArgument("no rank requested".into()));
    }
    if spec.ledger_out.is_some() && spec.grid.is_none() {
        return Err(Error::InvalidArgument("a ledger needs a parallel run (--grid)".into()));
    }
    let tensor = load_input(&spec.input)?;
    let grid = spec.grid.as_ref().map(|g| resolve_grid(g, tensor.dims())).transpose()?;
    let sweep = spec.ranks.len() > 1;
    let mut outcomes = Vec::new();
    for &rank in &spec.ranks {
        let mut cfg = NncpConfig::new(rank);
        cfg.max_outer_iters = spec.iters;
        cfg.tolerance = spec.tol;
        cfg.nls = spec.nls;
        cfg.use_dimension_tree = spec.dimtree;
        cfg.seed = spec.seed;

        let (model, trace_csv, ledger_csv, eps, iters, totals) = match &grid {
            None => {
                let (model, trace) = nncp(&tensor, &cfg)?;
                let t = trace.total_times();
                let totals = [
                    t.mttkrp().as_secs_f64(),
                    t.krp.as_secs_f64(),
                    0.0,
                    t.nls.as_secs_f64(),
                    t.gram.as_secs_f64(),
                    t.error.as_secs_f64(),
                ];
                let eps = trace.final_eps().unwrap_or(f64::NAN);
                (model, trace.to_csv(spec.timings), None, eps, trace.records.len(), totals)
            }
            Some(g) => {
                let mut pc = ParConfig::new(cfg);
                pc.exec = spec.workers;
                pc.pad = spec.pad;
                let (model, trace, ledger) = par_nncp(&tensor, g, &pc)?;
                let t = trace.to_sequential().total_times();
                let comm: f64 = trace.records.iter().map(|r| r.t_factor_comm).sum();
                let totals = [
                    t.mttkrp().as_secs_f64(),
                    t.krp.as_secs_f64(),
                    comm,
                    t.nls.as_secs_f64(),
                    t.gram.as_secs_f64(),
                    t.error.as_secs_f64(),
                ];
                let eps = trace.final_eps().unwrap_or(f64::NAN);
                let n = trace.records.len();
                (model, trace.to_csv(spec.timings), Some(ledger.to_csv()), eps, n, totals)
            }
        };

        if let Some(p) = out_path(&spec.model_out, rank, sweep) {
            write_model(&p, &model)?;
        }
        if let Some(p) = out_path(&spec.trace_out, rank, sweep) {
            std::fs::write(&p, &trace_csv)?;
        }
        if let (Some(p), Some(csv)) = (out_path(&spec.ledger_out, rank, sweep), &ledger_csv) {
            std::fs::write(&p, csv)?;
        }

        let where_ = grid.as_ref().map_or("sequential".to_string(), |g| format!("grid {g}"));
        writeln!(report, "rank {rank} ({where_}): {iters} iterations, final eps = {eps}")?;
        let labels = ["MTTKRP", "KRP", "Factor Comm", "NLS", "Gram", "Error"];
        for (label, secs) in labels.iter().zip(totals) {
            writeln!(report, "  {label:<12} {secs:.6} s")?;
        }
        outcomes.push(RunOutcome {
            rank,
            grid: grid.clone(),
            final_eps: eps,
            iterations: iters,
            model,
            trace_csv,
            ledger_csv,
        });
    }
    Ok(outcomes)
}

/// Prints every factorization of `procs` with its objective and marks the
/// optimum. With `distinct`, grids that are permutations of an earlier one
/// are skipped.
pub fn cmd_grid(
    dims: &[usize],
    procs: usize,
    distinct: bool,
    report: &mut impl Write,
) -> Result<Vec<GridChoice>> {
    let best = optimize_grid(dims, procs)?;
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    for c in enumerate_grids(dims, procs)? {
        if distinct {
            let mut key = c.grid.clone();
            key.sort_unstable_by(|a, b| b.cmp(a));
            if !seen.insert(key) {
                continue;
            }
        }
        rows.push(c);
    }
    writeln!(report, "{:<20} {:>16}", "grid", "sum I_n/P_n")?;
    for c in &rows {
        let name = c.grid.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
        let mark = if c.grid == best.grid { "  *" } else { "" };
        writeln!(report, "{name:<20} {:>16}{mark}", c.objective)?;
    }
    Ok(rows)
}
