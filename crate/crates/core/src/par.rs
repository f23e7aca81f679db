//! Virtual distributed runtime.
//!
//! Workers live on an N-dimensional [`ProcessGrid`]. Ranks are 0-based and
//! coordinates are 1-based, with rank `r` mapped to coordinates in
//! generalized column-major order. The collectives are bulk-synchronous
//! functions over member-ordered inputs: every reduction uses the same
//! recursive-halves tree over ascending member rank, so all results are
//! independent of how the workers were scheduled.
//!
//! Every collective call made through a [`Fabric`] is appended to a
//! [`CommLedger`], which can be priced with an alpha-beta [`CostModel`].

use std::fmt::{self, Write as _};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{decode_offset, DenseTensor};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcessGrid {
    dims: Vec<usize>,
}

impl ProcessGrid {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Grid("grid needs at least one dimension".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Grid(format!("grid dimension {} is zero", pos + 1)));
        }
        dims.iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Grid("grid size overflows".into()))?;
        Ok(Self { dims: dims.to_vec() })
    }

    /// All-ones grid of the given order.
    pub fn trivial(order: usize) -> Result<Self> {
        Self::new(&vec![1; order])
    }

    /// Parses `"2x2x2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X'])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Grid(format!("bad grid component {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// 1-based coordinates of `rank`.
    pub fn coords(&self, rank: usize) -> Result<Vec<usize>> {
        if rank >= self.size() {
            return Err(Error::Grid(format!("rank {rank} outside grid {self}")));
        }
        decode_offset(&self.dims, rank)
    }

    pub fn rank_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dims.len()
            || coords.iter().zip(&self.dims).any(|(&c, &d)| c == 0 || c > d)
        {
            return Err(Error::Grid(format!("coordinates {coords:?} outside grid {self}")));
        }
        let mut rank = 0;
        for (&c, &d) in coords.iter().zip(&self.dims).rev() {
            rank = rank * d + (c - 1);
        }
        Ok(rank)
    }

    /// Ranks in `group`, ascending.
    pub fn members(&self, group: Group) -> Result<Vec<usize>> {
        match group {
            Group::All => Ok((0..self.size()).collect()),
            Group::Slice { mode, coord } => {
                if mode == 0 || mode > self.order() || coord == 0 || coord > self.dims[mode - 1] {
                    return Err(Error::Grid(format!("{group} is not a slice of grid {self}")));
                }
                Ok((0..self.size())
                    .filter(|&r| {
                        decode_offset(&self.dims, r).map(|c| c[mode - 1] == coord).unwrap_or(false)
                    })
                    .collect())
            }
        }
    }

    /// The mode-`mode` slice containing `rank`.
    pub fn slice_of(&self, rank: usize, mode: usize) -> Result<Group> {
        if mode == 0 || mode > self.order() {
            return Err(Error::InvalidMode { mode, order: self.order() });
        }
        Ok(Group::Slice { mode, coord: self.coords(rank)?[mode - 1] })
    }

    pub fn group_size(&self, group: Group) -> usize {
        match group {
            Group::All => self.size(),
            Group::Slice { mode, .. } => self.size() / self.dims[mode - 1],
        }
    }

    pub fn contains(&self, group: Group, rank: usize) -> bool {
        match group {
            Group::All => rank < self.size(),
            Group::Slice { mode, coord } => self
                .coords(rank)
                .map(|c| c.get(mode - 1) == Some(&coord))
                .unwrap_or(false),
        }
    }

    /// Every mode-`mode` slice, by ascending coordinate.
    pub fn slices(&self, mode: usize) -> Vec<Group> {
        (1..=self.dims[mode - 1]).map(|coord| Group::Slice { mode, coord }).collect()
    }
}

impl fmt::Display for ProcessGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// A communicator: every worker, or the workers sharing one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    All,
    Slice { mode: usize, coord: usize },
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::All => f.write_str("all"),
            Group::Slice { mode, coord } => write!(f, "m{mode}c{coord}"),
        }
    }
}

/// Contiguous cover of `0..total` by consecutive parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    offsets: Vec<usize>,
}

impl Partition {
    /// `offsets` lists part starts followed by the total.
    pub fn new(offsets: Vec<usize>) -> Result<Self> {
        if offsets.len() < 2 || offsets[0] != 0 {
            return Err(Error::Partition(format!(
                "offsets {offsets:?} must start at 0 and define at least one part"
            )));
        }
        if offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Partition(format!("offsets {offsets:?} decrease")));
        }
        Ok(Self { offsets })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        let mut acc = 0;
        for &s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Self::new(offsets)
    }

    /// Near-equal parts; the first `total % parts` get one extra element.
    pub fn balanced(total: usize, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::Partition("cannot split into zero parts".into()));
        }
        let (q, r) = (total / parts, total % parts);
        Self::from_sizes(&(0..parts).map(|i| q + usize::from(i < r)).collect::<Vec<_>>())
    }

    pub fn parts(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().expect("partition has offsets")
    }

    pub fn range(&self, part: usize) -> Range<usize> {
        self.offsets[part]..self.offsets[part + 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Same cut points with every size multiplied by `k`.
    pub fn scaled(&self, k: usize) -> Self {
        Self { offsets: self.offsets.iter().map(|o| o * k).collect() }
    }
}

fn tree_sum_range(inputs: &[&[f64]]) -> Vec<f64> {
    match inputs.len() {
        1 => inputs[0].to_vec(),
        n => {
            let (lo, hi) = inputs.split_at(n / 2);
            let mut left = tree_sum_range(lo);
            let right = tree_sum_range(hi);
            for (a, b) in left.iter_mut().zip(&right) {
                *a += b;
            }
            left
        }
    }
}

/// Elementwise sum over member-ordered buffers with the canonical
/// recursive-halves tree: the lower half of the members is summed, then the
/// upper half, then the two partial sums are added.
pub fn tree_sum(inputs: &[&[f64]]) -> Result<Vec<f64>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("reduction over an empty group".into()))?;
    if let Some(bad) = inputs.iter().find(|b| b.len() != first.len()) {
        return Err(Error::DimensionMismatch(format!(
            "buffer lengths differ across the group: {} vs {}",
            first.len(),
            bad.len()
        )));
    }
    Ok(tree_sum_range(inputs))
}

fn as_slices(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

/// Sum every member's buffer; the result is what each member ends up with.
pub fn all_reduce(inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    tree_sum(&as_slices(inputs))
}

/// Sum, then hand member `i` the `i`-th part of `partition`.
pub fn reduce_scatter(inputs: &[Vec<f64>], partition: &Partition) -> Result<Vec<Vec<f64>>> {
    let sum = tree_sum(&as_slices(inputs))?;
    if partition.total() != sum.len() || partition.parts() != inputs.len() {
        return Err(Error::Partition(format!(
            "partition with {} parts over {} words does not cover {} buffers of {} words",
            partition.parts(),
            partition.total(),
            inputs.len(),
            sum.len()
        )));
    }
    Ok((0..partition.parts()).map(|i| sum[partition.range(i)].to_vec()).collect())
}

/// Concatenate member-ordered pieces, checking each against `partition`.
pub fn all_gather(pieces: &[Vec<f64>], partition: &Partition) -> Result<Vec<f64>> {
    if pieces.len() != partition.parts() {
        return Err(Error::Partition(format!(
            "{} pieces for a partition with {} parts",
            pieces.len(),
            partition.parts()
        )));
    }
    let mut out = Vec::with_capacity(partition.total());
    for (i, p) in pieces.iter().enumerate() {
        if p.len() != partition.range(i).len() {
            return Err(Error::Partition(format!(
                "piece {i} has {} words, partition expects {}",
                p.len(),
                partition.range(i).len()
            )));
        }
        out.extend_from_slice(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectiveKind {
    AllReduce,
    ReduceScatter,
    AllGather,
}

impl fmt::Display for CollectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AllReduce => "AR",
            Self::ReduceScatter => "RS",
            Self::AllGather => "AG",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommEntry {
    pub iter: usize,
    pub kind: CollectiveKind,
    pub group: Group,
    pub group_size: usize,
    /// Full buffer for AR and RS, total gathered size for AG.
    pub words: usize,
}

impl CommEntry {
    /// Words each member moves under recursive halving/doubling:
    /// `2W(P'-1)/P'` for AR and `W(P'-1)/P'` for RS and AG.
    pub fn bandwidth_words(&self) -> f64 {
        let p = self.group_size as f64;
        let w = self.words as f64 * (p - 1.0) / p;
        match self.kind {
            CollectiveKind::AllReduce => 2.0 * w,
            _ => w,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLedger {
    entries: Vec<CommEntry>,
}

pub const LEDGER_CSV_HEADER: &str = "iter,collective,group_size,words,subgroup";

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: CommEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[CommEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of iteration `iter` only.
    pub fn iteration(&self, iter: usize) -> CommLedger {
        Self { entries: self.entries.iter().copied().filter(|e| e.iter == iter).collect() }
    }

    /// Entries whose group contains `rank`: the traffic one worker sees.
    pub fn for_worker(&self, grid: &ProcessGrid, rank: usize) -> CommLedger {
        Self {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|e| grid.contains(e.group, rank))
                .collect(),
        }
    }

    pub fn total_words(&self) -> usize {
        self.entries.iter().map(|e| e.words).sum()
    }

    pub fn bandwidth_words(&self) -> f64 {
        self.entries.iter().map(CommEntry::bandwidth_words).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LEDGER_CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{},{}", e.iter, e.kind, e.group_size, e.words, e.group);
        }
        out
    }
}

/// Alpha-beta cost model: `alpha` seconds per message, `beta` per word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub alpha: f64,
    pub beta: f64,
}

impl CostModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost model needs alpha, beta >= 0, got {alpha}, {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `2 alpha ceil(log2 P') + 2 beta W (P'-1)/P'` for AR and
    /// `alpha ceil(log2 P') + beta W (P'-1)/P'` for RS and AG.
    pub fn cost(&self, e: &CommEntry) -> f64 {
        if e.group_size <= 1 {
            return 0.0;
        }
        let steps = ceil_log2(e.group_size) as f64;
        let latency = match e.kind {
            CollectiveKind::AllReduce => 2.0 * self.alpha * steps,
            _ => self.alpha * steps,
        };
        latency + self.beta * e.bandwidth_words()
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self { alpha: 1e-6, beta: 1e-9 }
    }
}

pub fn ceil_log2(p: usize) -> u32 {
    if p <= 1 {
        0
    } else {
        usize::BITS - (p - 1).leading_zeros()
    }
}

pub fn predicted_time(ledger: &CommLedger, model: &CostModel) -> f64 {
    ledger.entries().iter().map(|e| model.cost(e)).sum()
}

/// Collectives bound to a grid, recording every call.
#[derive(Debug, Clone)]
pub struct Fabric {
    grid: ProcessGrid,
    ledger: CommLedger,
    iter: usize,
}

impl Fabric {
    pub fn new(grid: ProcessGrid) -> Self {
        Self { grid, ledger: CommLedger::new(), iter: 0 }
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> CommLedger {
        self.ledger
    }

    /// Tags subsequent ledger entries with outer iteration `iter`.
    pub fn set_iter(&mut self, iter: usize) {
        self.iter = iter;
    }

    fn record(&mut self, kind: CollectiveKind, group: Group, members: usize, words: usize) {
        self.ledger.push(CommEntry { iter: self.iter, kind, group, group_size: members, words });
    }

    fn check_members(&self, group: Group, n: usize) -> Result<()> {
        let expected = self.grid.members(group)?.len();
        if n != expected {
            return Err(Error::Grid(format!("{group} has {expected} members, got {n} buffers")));
        }
        Ok(())
    }

    pub fn all_reduce(&mut self, group: Group, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_members(group, inputs.len())?;
        let out = all_reduce(inputs)?;
        self.record(CollectiveKind::AllReduce, group, inputs.len(), out.len());
        Ok(out)
    }

    pub fn reduce_scatter(
        &mut self,
        group: Group,
        inputs: &[Vec<f64>],
        partition: &Partition,
    ) -> Result<Vec<Vec<f64>>> {
        self.check_members(group, inputs.len())?;
        let out = reduce_scatter(inputs, partition)?;
        self.record(CollectiveKind::ReduceScatter, group, inputs.len(), partition.total());
        Ok(out)
    }

    pub fn all_gather(
        &mut self,
        group: Group,
        pieces: &[Vec<f64>],
        partition: &Partition,
    ) -> Result<Vec<f64>> {
        self.check_members(group, pieces.len())?;
        let out = all_gather(pieces, partition)?;
        self.record(CollectiveKind::AllGather, group, pieces.len(), out.len());
        Ok(out)
    }
}

/// How worker-local phases are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// One thread steps every worker in rank order.
    #[default]
    Simulated,
    /// One scoped thread per worker for every local phase.
    Threads,
}

impl std::str::FromStr for ExecMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" | "simulated" => Ok(Self::Simulated),
            "threads" => Ok(Self::Threads),
            other => Err(Error::InvalidArgument(format!("unknown worker mode {other:?}"))),
        }
    }
}

/// Runs `f` on every worker and returns the results in rank order.
pub fn for_each_worker<W, T, F>(mode: ExecMode, workers: &mut [W], f: F) -> Result<Vec<T>>
where
    W: Send,
    T: Send,
    F: Fn(&mut W) -> Result<T> + Sync,
{
    match mode {
        ExecMode::Simulated => workers.iter_mut().map(f).collect(),
        ExecMode::Threads => std::thread::scope(|s| {
            let f = &f;
            let handles: Vec<_> = workers.iter_mut().map(|w| s.spawn(move || f(w))).collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| Error::Internal("worker thread panicked".into()))?)
                .collect()
        }),
    }
}

/// Zero-pads every extent up to the next multiple of the grid dimension.
pub fn pad_tensor(tensor: &DenseTensor, grid: &ProcessGrid) -> Result<DenseTensor> {
    check_grid_order(tensor, grid)?;
    let padded: Vec<usize> = tensor
        .dims()
        .iter()
        .zip(grid.dims())
        .map(|(&i, &p)| i.div_ceil(p) * p)
        .collect();
    if padded == tensor.dims() {
        return Ok(tensor.clone());
    }
    let mut data = vec![0.0; padded.iter().product()];
    let ranges: Vec<Range<usize>> = tensor.dims().iter().map(|&i| 0..i).collect();
    let src = tensor.data();
    copy_block(&padded, tensor.dims(), &ranges, |l, g| data[g] = src[l]);
    DenseTensor::new(padded, data)
}

fn check_grid_order(tensor: &DenseTensor, grid: &ProcessGrid) -> Result<()> {
    if tensor.order() != grid.order() {
        return Err(Error::Grid(format!(
            "grid {grid} has {} modes, tensor has {}",
            grid.order(),
            tensor.order()
        )));
    }
    Ok(())
}

fn check_divisible(dims: &[usize], grid: &ProcessGrid) -> Result<()> {
    for (n, (&i, &p)) in dims.iter().zip(grid.dims()).enumerate() {
        if i % p != 0 {
            return Err(Error::Partition(format!(
                "mode {} extent {i} is not divisible by grid dimension {p}; enable padding",
                n + 1
            )));
        }
    }
    Ok(())
}

/// Global index range (0-based, half-open) of block `coords` per mode.
pub fn block_ranges(dims: &[usize], grid: &ProcessGrid, coords: &[usize]) -> Vec<Range<usize>> {
    dims.iter()
        .zip(grid.dims())
        .zip(coords)
        .map(|((&i, &p), &c)| {
            let b = i / p;
            (c - 1) * b..c * b
        })
        .collect()
}

fn copy_block(
    src_dims: &[usize],
    dst_dims: &[usize],
    ranges: &[Range<usize>],
    mut visit: impl FnMut(usize, usize),
) {
    // Walks the block in its own column-major order, visiting
    // (offset in block, offset in global tensor).
    let n = dst_dims.len();
    let fiber = dst_dims[0];
    let mut idx = vec![0usize; n];
    let fibers = dst_dims[1..].iter().product::<usize>();
    let mut strides = vec![1usize; n];
    for m in 1..n {
        strides[m] = strides[m - 1] * src_dims[m - 1];
    }
    let mut local = 0;
    for _ in 0..fibers {
        let base: usize = (0..n).map(|m| (ranges[m].start + idx[m]) * strides[m]).sum();
        for i in 0..fiber {
            visit(local + i, base + i);
        }
        local += fiber;
        for m in 1..n {
            idx[m] += 1;
            if idx[m] < dst_dims[m] {
                break;
            }
            idx[m] = 0;
        }
    }
}

/// Cartesian block partition: block `k` belongs to rank `k`.
pub fn distribute_tensor(tensor: &DenseTensor, grid: &ProcessGrid) -> Result<Vec<DenseTensor>> {
    check_grid_order(tensor, grid)?;
    check_divisible(tensor.dims(), grid)?;
    let local_dims: Vec<usize> =
        tensor.dims().iter().zip(grid.dims()).map(|(&i, &p)| i / p).collect();
    (0..grid.size())
        .map(|rank| {
            let ranges = block_ranges(tensor.dims(), grid, &grid.coords(rank)?);
            let mut data = vec![0.0; local_dims.iter().product()];
            let src = tensor.data();
            copy_block(tensor.dims(), &local_dims, &ranges, |l, g| data[l] = src[g]);
            DenseTensor::new(local_dims.clone(), data)
        })
        .collect()
}

/// Inverse of [`distribute_tensor`].
pub fn gather_tensor(blocks: &[DenseTensor], grid: &ProcessGrid) -> Result<DenseTensor> {
    if blocks.len() != grid.size() {
        return Err(Error::Grid(format!(
            "{} blocks for a grid of {} workers",
            blocks.len(),
            grid.size()
        )));
    }
    let local_dims = blocks[0].dims().to_vec();
    if local_dims.len() != grid.order() || blocks.iter().any(|b| b.dims() != local_dims) {
        return Err(Error::DimensionMismatch("blocks must share one shape".into()));
    }
    let dims: Vec<usize> = local_dims.iter().zip(grid.dims()).map(|(&b, &p)| b * p).collect();
    let mut data = vec![0.0; dims.iter().product()];
    for (rank, block) in blocks.iter().enumerate() {
        let ranges = block_ranges(&dims, grid, &grid.coords(rank)?);
        let src = block.data();
        copy_block(&dims, &local_dims, &ranges, |l, g| data[g] = src[l]);
    }
    DenseTensor::new(dims, data)
}

/// State held by one worker.
#[derive(Debug, Clone)]
pub struct WorkerContext {
    pub rank: usize,
    /// 1-based grid coordinates.
    pub coords: Vec<usize>,
    /// Local block of the data tensor.
    pub block: DenseTensor,
    /// Owned factor rows `H^(n)_p` per mode.
    pub owned: Vec<Matrix>,
    /// Gathered slice rows `H^(n)_{p_n}` per mode.
    pub slices: Vec<Matrix>,
    /// Replicated Grams per mode.
    pub grams: Vec<Matrix>,
}

/// Creates one worker per grid position holding its tensor block, plus the
/// fabric connecting them. Factor state starts empty.
pub fn spawn_grid(grid: &ProcessGrid, tensor: &DenseTensor) -> Result<(Vec<WorkerContext>, Fabric)> {
    let blocks = distribute_tensor(tensor, grid)?;
    let workers = blocks
        .into_iter()
        .enumerate()
        .map(|(rank, block)| {
            Ok(WorkerContext {
                rank,
                coords: grid.coords(rank)?,
                block,
                owned: Vec::new(),
                slices: Vec::new(),
                grams: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((workers, Fabric::new(grid.clone())))
}

/// Where each worker's factor rows live.
///
/// For mode `n` the global rows are cut into `P_n` equal slice blocks, and
/// slice block `c` is split among the `P / P_n` slice members (ascending
/// rank) by [`Partition::balanced`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLayout {
    grid: ProcessGrid,
    dims: Vec<usize>,
    valid_dims: Vec<usize>,
}

impl RowLayout {
    /// `dims` must be divisible by the grid; rows at or beyond `valid_dims`
    /// are padding.
    pub fn new(grid: &ProcessGrid, dims: &[usize], valid_dims: &[usize]) -> Result<Self> {
        if dims.len() != grid.order() || valid_dims.len() != dims.len() {
            return Err(Error::Grid(format!("grid {grid} does not match dims {dims:?}")));
        }
        check_divisible(dims, grid)?;
        if valid_dims.iter().zip(dims).any(|(v, d)| v > d) {
            return Err(Error::InvalidArgument("valid extents exceed padded extents".into()));
        }
        Ok(Self { grid: grid.clone(), dims: dims.to_vec(), valid_dims: valid_dims.to_vec() })
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn valid_dims(&self) -> &[usize] {
        &self.valid_dims
    }

    pub fn slice_rows(&self, n: usize) -> usize {
        self.dims[n - 1] / self.grid.dims()[n - 1]
    }

    pub fn slice_range(&self, n: usize, coord: usize) -> Range<usize> {
        let b = self.slice_rows(n);
        (coord - 1) * b..coord * b
    }

    /// Row split of one mode-`n` slice block among its members.
    pub fn member_partition(&self, n: usize) -> Partition {
        Partition::balanced(self.slice_rows(n), self.grid.group_size(Group::Slice { mode: n, coord: 1 }))
            .expect("slice groups are nonempty")
    }

    /// Position of `rank` among its mode-`n` slice members.
    pub fn member_index(&self, rank: usize, n: usize) -> Result<usize> {
        let group = self.grid.slice_of(rank, n)?;
        let members = self.grid.members(group)?;
        Ok(members.binary_search(&rank).expect("rank is in its own slice"))
    }

    /// Rows of the slice block owned by `rank`, relative to the slice start.
    pub fn owned_in_slice(&self, rank: usize, n: usize) -> Result<Range<usize>> {
        Ok(self.member_partition(n).range(self.member_index(rank, n)?))
    }

    /// Global rows owned by `rank`.
    pub fn owned_range(&self, rank: usize, n: usize) -> Result<Range<usize>> {
        let coord = self.grid.coords(rank)?[n - 1];
        let start = self.slice_range(n, coord).start;
        let r = self.owned_in_slice(rank, n)?;
        Ok(start + r.start..start + r.end)
    }

    /// How many leading owned rows of `rank` are real (not padding).
    pub fn valid_owned(&self, rank: usize, n: usize) -> Result<usize> {
        let r = self.owned_range(rank, n)?;
        Ok(self.valid_dims[n - 1].saturating_sub(r.start).min(r.len()))
    }
}
