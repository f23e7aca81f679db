//! Shares partial MTTKRP results across modes and compares the flop count
//! with the naive per-mode products.

use nncp::dimtree::{tree_mttkrp_sweep, DimTreeMttkrp};
use nncp::mttkrp::{mttkrp_naive, mttkrp_naive_counted, FlopLedger};
use nncp::nncp::random_init;
use nncp::{DenseTensor, Matrix};

pub fn run_example() -> nncp::Result<()> {
    let dims = [12, 10, 8, 6];
    let rank = 4;
    let t = DenseTensor::from_fn(&dims, |i| ((i[0] * 3 + i[1] * 5 + i[2] * 7 + i[3]) % 11) as f64)?;
    let mut factors = random_init(&dims, rank, 1);
    factors[0] = Matrix::from_fn(dims[0], rank, |i, j| ((i + 2 * j) % 5) as f64 / 5.0);

    let engine = DimTreeMttkrp::new(&dims, rank)?;
    for node in engine.tree().nodes() {
        println!("node {} children {:?}", node.modes, node.children);
    }

    let mut max_diff: f64 = 0.0;
    let tree_flops = tree_mttkrp_sweep(&t, &mut factors, |n, m, fs| {
        let reference = mttkrp_naive(&t, fs, n)?;
        for (x, y) in m.as_slice().iter().zip(reference.as_slice()) {
            max_diff = max_diff.max((x - y).abs());
        }
        Ok(fs[n - 1].clone())
    })?;
    let mut naive = FlopLedger::default();
    for n in 1..=dims.len() {
        mttkrp_naive_counted(&t, &factors, n, &mut naive)?;
    }
    println!("max |tree - naive| = {max_diff:e}");
    println!(
        "flops per sweep: tree {}, naive {}, ratio {:.3}",
        tree_flops.mttkrp_total(),
        naive.naive,
        naive.naive as f64 / tree_flops.mttkrp_total() as f64
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
