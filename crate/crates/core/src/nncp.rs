//! Sequential nonnegative CP by block coordinate descent.
//!
//! Each outer iteration updates the factors in mode order. For mode `n` the
//! driver forms `M^(n)` (dimension tree or naive), `S^(n)` from the other
//! modes' Grams, solves the nonnegative subproblem, normalizes the columns
//! into `lambda` and refreshes `G^(n)`. After the last mode the relative
//! error comes from the identity
//! `||A - X||^2 = ||A||^2 - 2 <M^(N), H^(N)> + lambda^T (S^(N) .* G^(N)) lambda`.
//!
//! Factors other than the one being updated always have unit-norm columns,
//! so `lambda` is just the column norms of the most recent update and
//! `diag(S^(n)) = 1`, which the HALS rule relies on.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dimtree::DimTreeMttkrp;
use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::matrix::{gram, hadamard_all_but, Matrix};
use crate::mttkrp::{mttkrp_naive_counted, FlopLedger};
use crate::nls::{hals_update_rows, nnls_bpp, ZERO_COLUMN_GUARD};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsMethod {
    Bpp,
    Hals,
}

impl std::str::FromStr for NlsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpp" => Ok(Self::Bpp),
            "hals" => Ok(Self::Hals),
            other => Err(Error::InvalidArgument(format!("unknown NLS method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// i.i.d. uniform `[0, 1)` entries from a seeded ChaCha8 stream.
    Random,
    /// Explicit starting factors for every mode; mode 1 is ignored.
    Given(Vec<Matrix>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NncpConfig {
    pub rank: usize,
    pub max_outer_iters: usize,
    /// Stop once `|eps_t - eps_{t-1}| < tolerance`; `0` runs every iteration.
    pub tolerance: f64,
    pub nls: NlsMethod,
    pub use_dimension_tree: bool,
    pub seed: u64,
    pub init: Init,
}

impl NncpConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_outer_iters: 100,
            tolerance: 0.0,
            nls: NlsMethod::Bpp,
            use_dimension_tree: true,
            seed: 0,
            init: Init::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Wall-clock time per phase within one outer iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub partial_mttkrp: Duration,
    pub multi_ttv: Duration,
    pub krp: Duration,
    /// Naive MTTKRP products (dimension tree disabled).
    pub naive_mttkrp: Duration,
    pub nls: Duration,
    pub gram: Duration,
    pub error: Duration,
}

impl PhaseTimes {
    pub fn mttkrp(&self) -> Duration {
        self.partial_mttkrp + self.multi_ttv + self.naive_mttkrp
    }

    pub fn accumulate(&mut self, other: &PhaseTimes) {
        self.partial_mttkrp += other.partial_mttkrp;
        self.multi_ttv += other.multi_ttv;
        self.krp += other.krp;
        self.naive_mttkrp += other.naive_mttkrp;
        self.nls += other.nls;
        self.gram += other.gram;
        self.error += other.error;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub eps: f64,
    pub times: PhaseTimes,
    pub flops: FlopLedger,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

pub const TRACE_CSV_HEADER: &str =
    "iter,eps,t_pm,t_mttv,t_krp,t_nls,t_gram,t_err,flops_pm,flops_mttv,flops_krp,t_naive,flops_naive";

fn secs(d: Duration, timings: bool) -> f64 {
    if timings {
        d.as_secs_f64()
    } else {
        0.0
    }
}

pub(crate) fn trace_csv_fields(rec: &IterationRecord, timings: bool) -> String {
    let t = &rec.times;
    let f = &rec.flops;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        rec.iter,
        rec.eps,
        secs(t.partial_mttkrp, timings),
        secs(t.multi_ttv, timings),
        secs(t.krp, timings),
        secs(t.nls, timings),
        secs(t.gram, timings),
        secs(t.error, timings),
        f.partial_mttkrp,
        f.multi_ttv,
        f.krp,
        secs(t.naive_mttkrp, timings),
        f.naive
    )
}

impl IterationTrace {
    pub fn eps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }

    pub fn final_eps(&self) -> Option<f64> {
        self.records.last().map(|r| r.eps)
    }

    pub fn total_times(&self) -> PhaseTimes {
        let mut acc = PhaseTimes::default();
        for r in &self.records {
            acc.accumulate(&r.times);
        }
        acc
    }

    /// CSV with one row per outer iteration. With `timings` off every
    /// timer column is written as `0`, making the file reproducible.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for rec in &self.records {
            let _ = writeln!(out, "{}", trace_csv_fields(rec, timings));
        }
        out
    }
}

/// Scalars for the cheap relative-error identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorAccumulators {
    /// `||A||^2`
    pub a_sq: f64,
    /// `<M^(N), H^(N)>` with the unnormalized mode-N update.
    pub inner_prod: f64,
    /// `lambda^T (S^(N) .* G^(N)) lambda` with the normalized Gram.
    pub model_sq: f64,
}

/// `sqrt((a_sq - 2 inner_prod + model_sq) / a_sq)` with the radicand clamped
/// at zero.
pub fn relative_error(acc: &ErrorAccumulators) -> Result<f64> {
    if acc.a_sq == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let radicand = (acc.a_sq - 2.0 * acc.inner_prod + acc.model_sq) / acc.a_sq;
    Ok(radicand.max(0.0).sqrt())
}

/// `lambda^T (S .* G) lambda`.
pub fn model_norm_sq(lambda: &[f64], s: &Matrix, g: &Matrix) -> f64 {
    let r = lambda.len();
    let mut total = 0.0;
    for b in 0..r {
        for a in 0..r {
            total += lambda[a] * s.get(a, b) * g.get(a, b) * lambda[b];
        }
    }
    total
}

/// Per-column sums of squares, each summed top to bottom.
pub fn column_sum_squares(h: &Matrix) -> Vec<f64> {
    (0..h.cols())
        .map(|c| h.column(c).iter().map(|v| v * v).sum())
        .collect()
}

/// Current iterate of the mode-`n` subproblem: the unit-norm factor with
/// the model weights folded back into its columns.
pub(crate) fn warm_start(h: &Matrix, lambda: &[f64]) -> Matrix {
    let mut out = h.clone();
    for (c, &l) in lambda.iter().enumerate() {
        for v in out.column_mut(c) {
            *v *= l;
        }
    }
    out
}

pub(crate) fn scale_columns(h: &mut Matrix, norms: &[f64]) {
    for (c, &n) in norms.iter().enumerate() {
        for v in h.column_mut(c) {
            *v /= n;
        }
    }
}

/// Scales every column to unit 2-norm and returns the original norms.
///
/// An identically-zero column is first replaced by the zero-column guard
/// value; its reported norm is then the guard column's tiny norm.
pub fn normalize_columns(h: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = h.clone();
    let mut sq = column_sum_squares(&out);
    for (c, s) in sq.iter_mut().enumerate() {
        if *s == 0.0 {
            let col = out.column_mut(c);
            col.fill(ZERO_COLUMN_GUARD);
            *s = col.iter().map(|v| v * v).sum();
        }
    }
    let norms: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    scale_columns(&mut out, &norms);
    (out, norms)
}

/// Starting factors for `dims`: mode 1 is a zero placeholder that is
/// overwritten before it is read, modes `2..N` are uniform `[0, 1)` drawn
/// from `ChaCha8Rng::seed_from_u64(seed)` mode by mode in column-major order.
pub fn random_init(dims: &[usize], rank: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dims.iter()
        .enumerate()
        .map(|(m, &d)| {
            if m == 0 {
                Matrix::zeros(d, rank)
            } else {
                Matrix::from_fn(d, rank, |_, _| rng.gen::<f64>())
            }
        })
        .collect()
}

/// Validated, column-normalized starting factors.
pub(crate) fn initial_factors(dims: &[usize], config: &NncpConfig) -> Result<Vec<Matrix>> {
    let mut factors = match &config.init {
        Init::Random => random_init(dims, config.rank, config.seed),
        Init::Given(f) => {
            if f.len() != dims.len()
                || f.iter()
                    .zip(dims)
                    .skip(1)
                    .any(|(m, &d)| m.rows() != d || m.cols() != config.rank)
            {
                return Err(Error::DimensionMismatch(
                    "initial factors do not match tensor dims and rank".into(),
                ));
            }
            let mut f = f.clone();
            f[0] = Matrix::zeros(dims[0], config.rank);
            f
        }
    };
    for f in factors.iter_mut().skip(1) {
        if f.min_entry() < 0.0 || !f.is_finite() {
            return Err(Error::InvalidArgument(
                "initial factors must be finite and nonnegative".into(),
            ));
        }
        *f = normalize_columns(f).0;
    }
    Ok(factors)
}

pub(crate) fn ensure_finite(m: &Matrix, phase: &'static str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { phase })
    }
}

pub(crate) enum MttkrpBackend {
    Tree(DimTreeMttkrp),
    Naive(FlopLedger),
}

impl MttkrpBackend {
    pub(crate) fn new(dims: &[usize], rank: usize, use_tree: bool) -> Result<Self> {
        Ok(if use_tree {
            Self::Tree(DimTreeMttkrp::new(dims, rank)?)
        } else {
            Self::Naive(FlopLedger::default())
        })
    }

    /// Computes `M^(n)`, adding elapsed kernel time to `times`.
    pub(crate) fn mttkrp(
        &mut self,
        tensor: &DenseTensor,
        factors: &[Matrix],
        n: usize,
        times: &mut PhaseTimes,
    ) -> Result<Matrix> {
        match self {
            Self::Tree(engine) => {
                let before = *engine.times();
                let m = engine.mttkrp(tensor, factors, n)?;
                let d = engine.times().since(&before);
                times.partial_mttkrp += d.partial_mttkrp;
                times.multi_ttv += d.multi_ttv;
                times.krp += d.krp;
                Ok(m)
            }
            Self::Naive(ledger) => {
                let t0 = Instant::now();
                let m = mttkrp_naive_counted(tensor, factors, n, ledger)?;
                times.naive_mttkrp += t0.elapsed();
                Ok(m)
            }
        }
    }

    pub(crate) fn factor_updated(&mut self, n: usize) {
        if let Self::Tree(engine) = self {
            engine.factor_updated(n);
        }
    }

    pub(crate) fn flops(&self) -> FlopLedger {
        match self {
            Self::Tree(engine) => *engine.flops(),
            Self::Naive(ledger) => *ledger,
        }
    }
}

/// Runs sequential NNCP on `tensor`.
pub fn nncp(tensor: &DenseTensor, config: &NncpConfig) -> Result<(KruskalModel, IterationTrace)> {
    config.validate()?;
    let dims = tensor.dims().to_vec();
    let order = dims.len();
    if order < 2 {
        return Err(Error::InvalidArgument("NNCP needs at least a 2-way tensor".into()));
    }
    let rank = config.rank;
    let a_sq = tensor.norm_squared();
    if a_sq == 0.0 {
        return Err(Error::ZeroTensor);
    }
    if !a_sq.is_finite() {
        return Err(Error::NonFinite { phase: "input" });
    }

    let mut factors = initial_factors(&dims, config)?;
    let mut grams: Vec<Matrix> = factors.iter().map(gram).collect();
    let mut lambda = vec![1.0; rank];
    let mut backend = MttkrpBackend::new(&dims, rank, config.use_dimension_tree)?;
    let mut trace = IterationTrace::default();
    let mut prev_eps: Option<f64> = None;

    for iter in 1..=config.max_outer_iters {
        let mut times = PhaseTimes::default();
        let flops_before = backend.flops();
        let mut acc = ErrorAccumulators {
            a_sq,
            inner_prod: 0.0,
            model_sq: 0.0,
        };
        for n in 1..=order {
            let m = backend.mttkrp(tensor, &factors, n, &mut times)?;
            ensure_finite(&m, "mttkrp")?;

            let t0 = Instant::now();
            let s = hadamard_all_but(&grams, n)?;
            let h_hat = match config.nls {
                NlsMethod::Bpp => nnls_bpp(&s, &m)?,
                NlsMethod::Hals => {
                    let mut h = warm_start(&factors[n - 1], &lambda);
                    hals_update_rows(&mut h, &m, &s)?;
                    h
                }
            };
            ensure_finite(&h_hat, "nls")?;
            let (h, norms) = normalize_columns(&h_hat);
            times.nls += t0.elapsed();

            let t1 = Instant::now();
            grams[n - 1] = gram(&h);
            ensure_finite(&grams[n - 1], "gram")?;
            times.gram += t1.elapsed();
            lambda = norms;

            if n == order {
                let t2 = Instant::now();
                acc.inner_prod = h_hat.inner_product(&m);
                acc.model_sq = model_norm_sq(&lambda, &s, &grams[n - 1]);
                times.error += t2.elapsed();
            }
            factors[n - 1] = h;
            backend.factor_updated(n);
        }
        let t3 = Instant::now();
        let eps = relative_error(&acc)?;
        if !eps.is_finite() {
            return Err(Error::NonFinite { phase: "error" });
        }
        times.error += t3.elapsed();
        trace.records.push(IterationRecord {
            iter,
            eps,
            times,
            flops: backend.flops().since(&flops_before),
        });
        if let Some(p) = prev_eps {
            if (eps - p).abs() < config.tolerance {
                break;
            }
        }
        prev_eps = Some(eps);
    }

    Ok((KruskalModel::new(factors, lambda)?, trace))
}
