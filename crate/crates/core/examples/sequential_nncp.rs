//! Recovers an exact rank-3 nonnegative tensor with the sequential driver,
//! once with BPP and once with HALS, and checks the cheap error formula
//! against a full reconstruction.

use nncp::cli::synthetic_model;
use nncp::nncp::{nncp, NlsMethod, NncpConfig};

pub fn run_example() -> nncp::Result<()> {
    let truth = synthetic_model(&[20, 18, 16], 3, 5, false)?;
    let tensor = truth.full()?;
    for nls in [NlsMethod::Bpp, NlsMethod::Hals] {
        let mut cfg = NncpConfig::new(3);
        cfg.nls = nls;
        cfg.max_outer_iters = 200;
        cfg.tolerance = 1e-10;
        cfg.seed = 2;
        let (model, trace) = nncp(&tensor, &cfg)?;
        let fast = trace.final_eps().unwrap_or(f64::NAN);
        let brute = model.relative_error_to(&tensor)?;
        println!(
            "{nls:?}: {} iterations, eps {fast:.3e} (reconstruction {brute:.3e}), lambda {:?}",
            trace.records.len(),
            model.lambda
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
