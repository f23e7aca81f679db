//! Processor-grid selection and leading-order cost estimates.

use nncp::cli::cmd_grid;
use nncp::par_nncp::{estimate_costs, optimize_grid};

pub fn run_example() -> nncp::Result<()> {
    for (dims, p) in [(vec![1024, 1024, 1024], 64), (vec![1024, 1344, 33], 16)] {
        let best = optimize_grid(&dims, p)?;
        println!("{dims:?} on {p}: best grid {:?}, sum I_n/P_n = {}", best.grid, best.objective);
        for tree in [true, false] {
            let c = estimate_costs(&dims, &best.grid, 16, tree)?;
            println!(
                "  dimtree {tree}: flops {:.3e}, words {:.3e}, temp {:.3e}",
                c.computation, c.communication, c.memory_temp
            );
        }
    }
    cmd_grid(&[243; 4], 81, true, &mut std::io::stdout())?;
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
