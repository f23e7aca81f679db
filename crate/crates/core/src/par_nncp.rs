//! Distributed NNCP on the virtual runtime, grid selection and the
//! leading-order cost model.
//!
//! Every worker owns one block of the tensor and runs a dimension tree on
//! it. For mode `n` the local MTTKRP results are reduce-scattered over the
//! mode-`n` slice, each worker solves the subproblem for its owned rows,
//! column norms and Grams are all-reduced over the whole grid, and the new
//! rows are all-gathered back over the slice. On the all-ones grid every
//! step performs exactly the arithmetic of [`crate::nncp::nncp`].

use std::borrow::Cow;
use std::fmt::Write as _;
use std::ops::Range;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::matrix::{gram, hadamard_all_but, Matrix};
use crate::mttkrp::FlopLedger;
use crate::nls::{hals_update_rows, nnls_bpp, ZERO_COLUMN_GUARD};
use crate::nncp::{
    column_sum_squares, ensure_finite, initial_factors, model_norm_sq, relative_error,
    scale_columns, trace_csv_fields, warm_start, ErrorAccumulators, IterationRecord, IterationTrace,
    MttkrpBackend, NlsMethod, NncpConfig, PhaseTimes, TRACE_CSV_HEADER,
};
use crate::par::{
    for_each_worker, pad_tensor, predicted_time, spawn_grid, CollectiveKind, CommLedger,
    CostModel, ExecMode, Fabric, Group, Partition, ProcessGrid, RowLayout, WorkerContext,
};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct ParConfig {
    pub nncp: NncpConfig,
    pub exec: ExecMode,
    /// Zero-pad extents that the grid does not divide.
    pub pad: bool,
    /// Prices the communication columns of the trace.
    pub cost_model: CostModel,
}

impl ParConfig {
    pub fn new(nncp: NncpConfig) -> Self {
        Self { nncp, exec: ExecMode::Simulated, pad: false, cost_model: CostModel::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParIterationRecord {
    pub base: IterationRecord,
    /// Predicted seconds for reduce-scatters and all-gathers of factors.
    pub t_factor_comm: f64,
    /// Predicted seconds for the norm, Gram and error all-reduces.
    pub t_gram_comm: f64,
    pub words_factor: f64,
    pub words_gram: f64,
}

impl ParIterationRecord {
    pub fn words(&self) -> f64 {
        self.words_factor + self.words_gram
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParTrace {
    pub records: Vec<ParIterationRecord>,
}

impl ParTrace {
    pub fn eps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.base.eps).collect()
    }

    pub fn final_eps(&self) -> Option<f64> {
        self.records.last().map(|r| r.base.eps)
    }

    /// The columns shared with the sequential trace.
    pub fn to_sequential(&self) -> IterationTrace {
        IterationTrace { records: self.records.iter().map(|r| r.base.clone()).collect() }
    }

    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = format!("{TRACE_CSV_HEADER},t_factor_comm,t_gram_comm,words_factor,words_gram\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                trace_csv_fields(&r.base, timings),
                r.t_factor_comm,
                r.t_gram_comm,
                r.words_factor,
                r.words_gram
            );
        }
        out
    }
}

struct Worker {
    ctx: WorkerContext,
    backend: MttkrpBackend,
    /// Owned rows of `M^(n)` after the reduce-scatter.
    m: Matrix,
    /// Unnormalized owned rows of the new factor.
    h_hat: Matrix,
    s: Matrix,
    times: PhaseTimes,
    /// Leading owned rows per mode that are not padding.
    valid: Vec<usize>,
}

fn pack_rows(m: &Matrix, part: &Partition) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..part.parts() {
        let r = part.range(j);
        out.extend_from_slice(m.row_block(r.start, r.end).as_slice());
    }
    out
}

fn unpack_rows(buf: &[f64], part: &Partition, cols: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(part.total(), cols);
    for j in 0..part.parts() {
        let r = part.range(j);
        let piece = &buf[r.start * cols..r.end * cols];
        out.set_row_block(r.start, &Matrix::from_col_major(r.len(), cols, piece.to_vec())?);
    }
    Ok(out)
}

fn pad_rows(m: &Matrix, rows: usize) -> Matrix {
    let mut out = Matrix::zeros(rows, m.cols());
    out.set_row_block(0, m);
    out
}

fn max_times(workers: &[Worker]) -> PhaseTimes {
    let mut t = PhaseTimes::default();
    for w in workers {
        let x = &w.times;
        t.partial_mttkrp = t.partial_mttkrp.max(x.partial_mttkrp);
        t.multi_ttv = t.multi_ttv.max(x.multi_ttv);
        t.krp = t.krp.max(x.krp);
        t.naive_mttkrp = t.naive_mttkrp.max(x.naive_mttkrp);
        t.nls = t.nls.max(x.nls);
        t.gram = t.gram.max(x.gram);
        t.error = t.error.max(x.error);
    }
    t
}

fn total_flops(workers: &[Worker]) -> FlopLedger {
    let mut f = FlopLedger::default();
    for w in workers {
        let x = w.backend.flops();
        f.partial_mttkrp += x.partial_mttkrp;
        f.multi_ttv += x.multi_ttv;
        f.krp += x.krp;
        f.naive += x.naive;
    }
    f
}

fn gather_slices(
    fabric: &mut Fabric,
    grid: &ProcessGrid,
    layout: &RowLayout,
    workers: &mut [Worker],
    n: usize,
    rank: usize,
) -> Result<()> {
    let part = layout.member_partition(n);
    let words = part.scaled(rank);
    for group in grid.slices(n) {
        let members = grid.members(group)?;
        let pieces: Vec<Vec<f64>> =
            members.iter().map(|&r| workers[r].ctx.owned[n - 1].as_slice().to_vec()).collect();
        let buf = fabric.all_gather(group, &pieces, &words)?;
        let mut first: Option<Matrix> = None;
        for &r in &members {
            let slice = unpack_rows(&buf, &part, rank)?;
            match &first {
                None => first = Some(slice.clone()),
                Some(f) => {
                    let same = f.as_slice().iter().zip(slice.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
                    if !same {
                        return Err(Error::Internal(format!(
                            "replicas of factor {n} diverge within {group}"
                        )));
                    }
                }
            }
            workers[r].ctx.slices[n - 1] = slice;
        }
    }
    Ok(())
}

fn all_reduce_matrix(fabric: &mut Fabric, parts: Vec<Vec<f64>>, r: usize) -> Result<Matrix> {
    Matrix::from_col_major(r, r, fabric.all_reduce(Group::All, &parts)?)
}

/// Runs NNCP on `grid`, returning the model, the per-iteration trace and the
/// full communication ledger.
pub fn par_nncp(
    tensor: &DenseTensor,
    grid: &ProcessGrid,
    config: &ParConfig,
) -> Result<(KruskalModel, ParTrace, CommLedger)> {
    let cfg = &config.nncp;
    cfg.validate()?;
    let order = tensor.order();
    if order < 2 {
        return Err(Error::InvalidArgument("NNCP needs at least a 2-way tensor".into()));
    }
    if grid.order() != order {
        return Err(Error::Grid(format!("grid {grid} has {} modes, tensor has {order}", grid.order())));
    }
    let rank = cfg.rank;
    let exec = config.exec;
    let data: Cow<'_, DenseTensor> =
        if config.pad { Cow::Owned(pad_tensor(tensor, grid)?) } else { Cow::Borrowed(tensor) };
    let layout = RowLayout::new(grid, data.dims(), tensor.dims())?;
    let (ctxs, mut fabric) = spawn_grid(grid, &data)?;
    drop(data);

    let mut workers = ctxs
        .into_iter()
        .map(|ctx| {
            let backend = MttkrpBackend::new(ctx.block.dims(), rank, cfg.use_dimension_tree)?;
            let valid = (1..=order).map(|n| layout.valid_owned(ctx.rank, n)).collect::<Result<_>>()?;
            Ok(Worker {
                ctx,
                backend,
                m: Matrix::zeros(0, rank),
                h_hat: Matrix::zeros(0, rank),
                s: Matrix::zeros(rank, rank),
                times: PhaseTimes::default(),
                valid,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let local_sq: Vec<Vec<f64>> = workers.iter().map(|w| vec![w.ctx.block.norm_squared()]).collect();
    let a_sq = fabric.all_reduce(Group::All, &local_sq)?[0];
    if a_sq == 0.0 {
        return Err(Error::ZeroTensor);
    }
    if !a_sq.is_finite() {
        return Err(Error::NonFinite { phase: "input" });
    }

    let global = initial_factors(tensor.dims(), cfg)?;
    let owned_ranges: Vec<Vec<Range<usize>>> = workers
        .iter()
        .map(|w| (1..=order).map(|n| layout.owned_range(w.ctx.rank, n)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    for (w, ranges) in workers.iter_mut().zip(&owned_ranges) {
        w.ctx.owned = (1..=order)
            .map(|n| {
                let full = pad_rows(&global[n - 1], layout.dims()[n - 1]);
                let r = &ranges[n - 1];
                full.row_block(r.start, r.end)
            })
            .collect();
        w.ctx.slices = (1..=order).map(|n| Matrix::zeros(layout.slice_rows(n), rank)).collect();
        w.ctx.grams = vec![Matrix::zeros(rank, rank); order];
    }
    for n in 2..=order {
        let parts = workers.iter().map(|w| gram(&w.ctx.owned[n - 1]).into_vec()).collect();
        let g = all_reduce_matrix(&mut fabric, parts, rank)?;
        for w in workers.iter_mut() {
            w.ctx.grams[n - 1] = g.clone();
        }
        gather_slices(&mut fabric, grid, &layout, &mut workers, n, rank)?;
    }

    let mut trace = ParTrace::default();
    let mut lambda = vec![1.0; rank];
    let mut prev_eps: Option<f64> = None;

    for iter in 1..=cfg.max_outer_iters {
        fabric.set_iter(iter);
        for w in workers.iter_mut() {
            w.times = PhaseTimes::default();
        }
        let flops_before = total_flops(&workers);
        let mut acc = ErrorAccumulators { a_sq, inner_prod: 0.0, model_sq: 0.0 };

        for n in 1..=order {
            let part = layout.member_partition(n);
            let words = part.scaled(rank);

            let packed = for_each_worker(exec, &mut workers, |w| {
                let m = w.backend.mttkrp(&w.ctx.block, &w.ctx.slices, n, &mut w.times)?;
                ensure_finite(&m, "mttkrp")?;
                Ok(pack_rows(&m, &part))
            })?;
            let mut packed: Vec<Option<Vec<f64>>> = packed.into_iter().map(Some).collect();
            for group in grid.slices(n) {
                let members = grid.members(group)?;
                let inputs: Vec<Vec<f64>> =
                    members.iter().map(|&r| packed[r].take().expect("one buffer per worker")).collect();
                let out = fabric.reduce_scatter(group, &inputs, &words)?;
                for (j, (&r, piece)) in members.iter().zip(out).enumerate() {
                    workers[r].m = Matrix::from_col_major(part.range(j).len(), rank, piece)?;
                }
            }

            let nls = cfg.nls;
            let local_sq = for_each_worker(exec, &mut workers, |w| {
                let t0 = Instant::now();
                w.s = hadamard_all_but(&w.ctx.grams, n)?;
                w.h_hat = match nls {
                    NlsMethod::Bpp => nnls_bpp(&w.s, &w.m)?,
                    NlsMethod::Hals => {
                        let mut h = warm_start(&w.ctx.owned[n - 1], &lambda);
                        hals_update_rows(&mut h, &w.m, &w.s)?;
                        h
                    }
                };
                ensure_finite(&w.h_hat, "nls")?;
                let sq = column_sum_squares(&w.h_hat);
                w.times.nls += t0.elapsed();
                Ok(sq)
            })?;
            let mut sq = fabric.all_reduce(Group::All, &local_sq)?;
            let zero: Vec<usize> = (0..rank).filter(|&c| sq[c] == 0.0).collect();

            let mut candidates = for_each_worker(exec, &mut workers, |w| {
                let mut h = w.h_hat.clone();
                let valid = w.valid[n - 1];
                for &c in &zero {
                    h.column_mut(c)[..valid].fill(ZERO_COLUMN_GUARD);
                }
                Ok(h)
            })?;
            if !zero.is_empty() {
                let guarded: Vec<Vec<f64>> = candidates.iter().map(column_sum_squares).collect();
                let gsq = fabric.all_reduce(Group::All, &guarded)?;
                for &c in &zero {
                    sq[c] = gsq[c];
                }
            }
            let norms: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();

            for (w, h) in workers.iter_mut().zip(candidates.iter_mut()) {
                std::mem::swap(&mut w.ctx.owned[n - 1], h);
            }
            let local_grams = for_each_worker(exec, &mut workers, |w| {
                let t0 = Instant::now();
                scale_columns(&mut w.ctx.owned[n - 1], &norms);
                w.times.nls += t0.elapsed();
                let t1 = Instant::now();
                let g = gram(&w.ctx.owned[n - 1]).into_vec();
                w.times.gram += t1.elapsed();
                Ok(g)
            })?;
            let g = all_reduce_matrix(&mut fabric, local_grams, rank)?;
            ensure_finite(&g, "gram")?;
            for w in workers.iter_mut() {
                w.ctx.grams[n - 1] = g.clone();
            }
            lambda = norms;

            if n == order {
                let partial = for_each_worker(exec, &mut workers, |w| {
                    let t0 = Instant::now();
                    let b = w.h_hat.inner_product(&w.m);
                    w.times.error += t0.elapsed();
                    Ok(vec![b])
                })?;
                acc.inner_prod = fabric.all_reduce(Group::All, &partial)?[0];
                let t0 = Instant::now();
                acc.model_sq = model_norm_sq(&lambda, &workers[0].s, &g);
                workers[0].times.error += t0.elapsed();
            }

            gather_slices(&mut fabric, grid, &layout, &mut workers, n, rank)?;
            for_each_worker(exec, &mut workers, |w| {
                w.backend.factor_updated(n);
                Ok(())
            })?;
        }

        let t0 = Instant::now();
        let eps = relative_error(&acc)?;
        if !eps.is_finite() {
            return Err(Error::NonFinite { phase: "error" });
        }
        workers[0].times.error += t0.elapsed();

        let mine = fabric.ledger().iteration(iter).for_worker(grid, 0);
        let (mut factor, mut gram_comm) = (CommLedger::new(), CommLedger::new());
        for e in mine.entries() {
            match e.kind {
                CollectiveKind::AllReduce => gram_comm.push(*e),
                _ => factor.push(*e),
            }
        }
        let flops = total_flops(&workers).since(&flops_before);
        trace.records.push(ParIterationRecord {
            base: IterationRecord { iter, eps, times: max_times(&workers), flops },
            t_factor_comm: predicted_time(&factor, &config.cost_model),
            t_gram_comm: predicted_time(&gram_comm, &config.cost_model),
            words_factor: factor.bandwidth_words(),
            words_gram: gram_comm.bandwidth_words(),
        });
        if let Some(p) = prev_eps {
            if (eps - p).abs() < cfg.tolerance {
                break;
            }
        }
        prev_eps = Some(eps);
    }

    let factors = (1..=order)
        .map(|n| {
            let mut full = Matrix::zeros(layout.dims()[n - 1], rank);
            for group in grid.slices(n) {
                let Group::Slice { coord, .. } = group else { unreachable!() };
                let first = grid.members(group)?[0];
                full.set_row_block(layout.slice_range(n, coord).start, &workers[first].ctx.slices[n - 1]);
            }
            Ok(full.row_block(0, tensor.dims()[n - 1]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((KruskalModel::new(factors, lambda)?, trace, fabric.into_ledger()))
}

/// One candidate processor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridChoice {
    pub grid: Vec<usize>,
    /// `sum_n I_n / P_n`: per unit rank, both the words each worker moves
    /// for the factors in one outer iteration and its factor-replica memory.
    pub objective: f64,
}

impl GridChoice {
    fn new(dims: &[usize], grid: Vec<usize>) -> Self {
        let objective = dims.iter().zip(&grid).map(|(&i, &p)| i as f64 / p as f64).sum();
        Self { grid, objective }
    }

    /// Predicted factor words per worker and outer iteration at rank `r`.
    pub fn comm_words(&self, r: usize) -> f64 {
        r as f64 * self.objective
    }

    pub fn memory_words(&self, r: usize) -> f64 {
        r as f64 * self.objective
    }
}

fn divisors(p: usize) -> Vec<usize> {
    (1..=p).filter(|d| p % d == 0).collect()
}

fn ordered_factorizations(p: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(p);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for d in divisors(p) {
        prefix.push(d);
        ordered_factorizations(p / d, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Every ordered factorization of `p` into `dims.len()` factors, in
/// lexicographic order.
pub fn enumerate_grids(dims: &[usize], p: usize) -> Result<Vec<GridChoice>> {
    if p == 0 || dims.is_empty() {
        return Err(Error::InvalidArgument("need P >= 1 and at least one mode".into()));
    }
    let mut out = Vec::new();
    ordered_factorizations(p, dims.len(), &mut Vec::new(), &mut out);
    Ok(out.into_iter().map(|g| GridChoice::new(dims, g)).collect())
}

fn better(a: f64, b: f64) -> bool {
    a < b - 1e-12 * b.abs().max(1.0)
}

/// Grid minimizing `sum_n I_n / P_n`; ties go to the lexicographically
/// smallest grid.
pub fn optimize_grid(dims: &[usize], p: usize) -> Result<GridChoice> {
    let mut best: Option<GridChoice> = None;
    for c in enumerate_grids(dims, p)? {
        if best.as_ref().map_or(true, |b| better(c.objective, b.objective)) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::Internal("no factorization found".into()))
}

/// Leading-order per-iteration costs with constants dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    /// `IR/P`, or `NIR/P` without the dimension tree.
    pub computation: f64,
    /// `R sum_n I_n / P_n`.
    pub communication: f64,
    /// Factor replicas, `R sum_n I_n / P_n`.
    pub memory_replicas: f64,
    /// Local MTTKRP temporary: `R sqrt(I/P)` with the dimension tree,
    /// `max_n R (I/I_n) / (P/P_n)` without.
    pub memory_temp: f64,
}

pub fn estimate_costs(dims: &[usize], grid: &[usize], r: usize, dimtree: bool) -> Result<CostEstimate> {
    if dims.len() != grid.len() || dims.is_empty() {
        return Err(Error::Grid(format!("grid {grid:?} does not match dims {dims:?}")));
    }
    if grid.contains(&0) {
        return Err(Error::Grid("grid dimensions must be positive".into()));
    }
    let r = r as f64;
    let n = dims.len() as f64;
    let i: f64 = dims.iter().map(|&d| d as f64).product();
    let p: f64 = grid.iter().map(|&d| d as f64).product();
    let per_rank: f64 = dims.iter().zip(grid).map(|(&a, &b)| a as f64 / b as f64).sum();
    let computation = if dimtree { i * r / p } else { n * i * r / p };
    let memory_temp = if dimtree {
        r * (i / p).sqrt()
    } else {
        dims.iter()
            .zip(grid)
            .map(|(&a, &b)| r * (i / a as f64) / (p / b as f64))
            .fold(0.0, f64::max)
    };
    Ok(CostEstimate {
        computation,
        communication: r * per_rank,
        memory_replicas: r * per_rank,
        memory_temp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncp::{nncp, Init};

    fn low_rank(dims: &[usize], r: usize, seed: u64) -> DenseTensor {
        let factors = crate::nncp::random_init(dims, r, seed)
            .into_iter()
            .enumerate()
            .map(|(m, f)| if m == 0 { Matrix::from_fn(dims[0], r, |i, j| ((i * 7 + j * 3) % 5) as f64 / 4.0) } else { f })
            .collect();
        KruskalModel::from_factors(factors).unwrap().full().unwrap()
    }

    fn cfg(rank: usize, iters: usize) -> NncpConfig {
        let mut c = NncpConfig::new(rank);
        c.max_outer_iters = iters;
        c.seed = 11;
        c
    }

    #[test]
    fn trivial_grid_is_bitwise_sequential() {
        let t = low_rank(&[6, 5, 4], 2, 3);
        for nls in [NlsMethod::Bpp, NlsMethod::Hals] {
            for tree in [true, false] {
                let mut c = cfg(3, 5);
                c.nls = nls;
                c.use_dimension_tree = tree;
                let (sm, st) = nncp(&t, &c).unwrap();
                let grid = ProcessGrid::trivial(3).unwrap();
                let (pm, pt, _) = par_nncp(&t, &grid, &ParConfig::new(c)).unwrap();
                assert_eq!(st.to_csv(false), pt.to_sequential().to_csv(false));
                for (a, b) in sm.factors.iter().zip(&pm.factors) {
                    assert_eq!(a, b);
                }
                assert_eq!(sm.lambda, pm.lambda);
            }
        }
    }

    #[test]
    fn small_grids_track_sequential() {
        let t = low_rank(&[8, 6, 4], 2, 5);
        let c = cfg(2, 6);
        let (_, st) = nncp(&t, &c).unwrap();
        for g in [[2, 1, 1], [2, 3, 2], [1, 2, 4], [4, 2, 1]] {
            let grid = ProcessGrid::new(&g).unwrap();
            let (_, pt, ledger) = par_nncp(&t, &grid, &ParConfig::new(c.clone())).unwrap();
            for (a, b) in st.eps().iter().zip(pt.eps()) {
                assert!((a - b).abs() <= 1e-10, "{g:?}: {a} vs {b}");
            }
            assert!(!ledger.is_empty());
        }
    }

    #[test]
    fn threads_agree_with_simulation() {
        let t = low_rank(&[4, 4, 4], 2, 8);
        let grid = ProcessGrid::new(&[2, 2, 1]).unwrap();
        let mut pc = ParConfig::new(cfg(2, 3));
        let (a, at, al) = par_nncp(&t, &grid, &pc).unwrap();
        pc.exec = ExecMode::Threads;
        let (b, bt, bl) = par_nncp(&t, &grid, &pc).unwrap();
        assert_eq!(a, b);
        assert_eq!(at.to_csv(false), bt.to_csv(false));
        assert_eq!(al, bl);
    }

    #[test]
    fn padding_handles_uneven_extents() {
        let t = low_rank(&[5, 3, 4], 2, 2);
        let grid = ProcessGrid::new(&[2, 2, 1]).unwrap();
        let c = cfg(2, 5);
        assert!(par_nncp(&t, &grid, &ParConfig::new(c.clone())).is_err());
        let mut pc = ParConfig::new(c.clone());
        pc.pad = true;
        let (model, pt, _) = par_nncp(&t, &grid, &pc).unwrap();
        assert_eq!(model.dims(), vec![5, 3, 4]);
        let (_, st) = nncp(&t, &c).unwrap();
        for (a, b) in st.eps().iter().zip(pt.eps()) {
            assert!((a - b).abs() <= 1e-10);
        }
        assert!((model.relative_error_to(&t).unwrap() - pt.final_eps().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn given_init_and_ledger_shape() {
        let t = low_rank(&[4, 4, 4], 1, 1);
        let mut c = cfg(1, 2);
        c.init = Init::Given(vec![Matrix::filled(4, 1, 1.0); 3]);
        let grid = ProcessGrid::new(&[2, 2, 2]).unwrap();
        let (_, trace, ledger) = par_nncp(&t, &grid, &ParConfig::new(c)).unwrap();
        let it = ledger.iteration(1);
        let count = |k| it.entries().iter().filter(|e| e.kind == k).count();
        assert_eq!(count(CollectiveKind::ReduceScatter), 3 * 2);
        assert_eq!(count(CollectiveKind::AllGather), 3 * 2);
        assert_eq!(count(CollectiveKind::AllReduce), 3 * 2 + 1);
        assert!(trace.records[0].words_factor > 0.0);
        let csv = trace.to_csv(false);
        assert!(csv.lines().next().unwrap().ends_with("words_gram"));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(optimize_grid(&[1024, 1024, 1024], 64).unwrap().grid, vec![4, 4, 4]);
        let g = optimize_grid(&[1024, 1344, 33], 16).unwrap();
        assert_eq!(g.grid, vec![4, 4, 1]);
        assert_eq!(g.objective, 625.0);
        assert_eq!(optimize_grid(&[5, 6, 7], 1).unwrap().grid, vec![1, 1, 1]);
        assert_eq!(enumerate_grids(&[9, 9], 1).unwrap().len(), 1);
        assert_eq!(enumerate_grids(&[9, 9, 9], 12).unwrap().len(), 18);
        assert!(optimize_grid(&[4], 0).is_err());
    }

    #[test]
    fn grid_ties_pick_lexicographic_first() {
        assert_eq!(optimize_grid(&[4, 4], 2).unwrap().grid, vec![1, 2]);
    }

    #[test]
    fn cost_examples() {
        let (n, p, r) = (64usize, 4usize, 8usize);
        let e = estimate_costs(&[n, n, n], &[p, p, p], r, true).unwrap();
        assert_eq!(e.computation, (n * n * n * r / (p * p * p)) as f64);
        assert_eq!(e.communication, (3 * r * n / p) as f64);
        let off = estimate_costs(&[n; 4], &[p; 4], r, false).unwrap();
        let on = estimate_costs(&[n; 4], &[p; 4], r, true).unwrap();
        assert_eq!(off.computation / on.computation, 4.0);
        let doubled = estimate_costs(&[n; 4], &[p; 4], 2 * r, true).unwrap();
        assert_eq!(doubled.computation, 2.0 * on.computation);
        assert_eq!(doubled.communication, 2.0 * on.communication);
        assert_eq!(doubled.memory_temp, 2.0 * on.memory_temp);
        assert_eq!(doubled.memory_replicas, 2.0 * on.memory_replicas);
        assert!(estimate_costs(&[4, 4], &[2], 1, true).is_err());
    }
}
