//! Runs the distributed driver on a simulated 2x2x2 grid and compares it with
//! the sequential run: error traces, communication ledger and predicted
//! communication time.

use nncp::cli::synthetic_model;
use nncp::nncp::{nncp, NncpConfig};
use nncp::par::{predicted_time, CostModel, ExecMode, ProcessGrid};
use nncp::par_nncp::{par_nncp, ParConfig};

pub fn run_example() -> nncp::Result<()> {
    let tensor = synthetic_model(&[16, 16, 16], 2, 9, false)?.full()?;
    let mut cfg = NncpConfig::new(2);
    cfg.max_outer_iters = 10;
    cfg.seed = 4;
    let (_, seq) = nncp(&tensor, &cfg)?;

    let grid = ProcessGrid::new(&[2, 2, 2])?;
    let mut pc = ParConfig::new(cfg);
    pc.exec = ExecMode::Simulated;
    let (_, par, ledger) = par_nncp(&tensor, &grid, &pc)?;
    let worst = seq
        .eps()
        .iter()
        .zip(par.eps())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("final eps {:.3e}, max trace difference {worst:e}", par.final_eps().unwrap_or(f64::NAN));

    let first = ledger.iteration(1);
    println!("iteration 1: {} collectives, {} words", first.len(), first.total_words());
    let r = &par.records[0];
    println!("worker 0 moves {} factor words and {} gram words", r.words_factor, r.words_gram);
    let model = CostModel::new(1e-6, 1e-9)?;
    println!("predicted communication time {:.3e} s", predicted_time(&ledger.for_worker(&grid, 0), &model));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
