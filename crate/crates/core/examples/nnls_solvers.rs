//! The nonnegative subproblem `min_{H >= 0} 1/2 h^T S h - m^T h` per row,
//! solved exactly by block principal pivoting and approximately by HALS.

use nncp::nls::{hals_update, nnls_bpp_detailed, subproblem_objective};
use nncp::Matrix;

pub fn run_example() -> nncp::Result<()> {
    let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]])?;
    let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [-1.0, -1.0]])?;

    let sol = nnls_bpp_detailed(&s, &m)?;
    for r in 0..sol.h.rows() {
        println!("bpp row {r}: {:?}", sol.h.row(r));
    }
    println!("pivot iterations {:?}, flagged rows {:?}", sol.iterations, sol.flagged_rows);

    // HALS needs unit diagonal in S.
    let s_unit = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]])?;
    let mut h = Matrix::filled(3, 2, 0.5);
    for sweep in 0..5 {
        hals_update(&mut h, &m, &s_unit)?;
        println!("hals sweep {sweep}: objective {:.6}", subproblem_objective(&s_unit, &m, &h));
    }
    let exact = nnls_bpp_detailed(&s_unit, &m)?.h;
    println!("bpp objective {:.6}", subproblem_objective(&s_unit, &m, &exact));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
