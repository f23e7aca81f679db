//! Dense tensors, matricizations and the Khatri-Rao product.

use nncp::matrix::{gram, khatri_rao};
use nncp::tensor::mode_n_matricize;
use nncp::{DenseTensor, Matrix};

pub fn run_example() -> nncp::Result<()> {
    // Entries are addressed by 1-based multi-indices; the first index varies fastest.
    let t = DenseTensor::from_fn(&[2, 3, 2], |i| (100 * i[0] + 10 * i[1] + i[2]) as f64)?;
    println!("dims {:?}, A(2,3,1) = {}", t.dims(), t.get(&[2, 3, 1])?);

    let split = t.split_matricization(2)?;
    println!("split view after mode 2: {} x {}", split.rows(), split.cols());

    let a2 = mode_n_matricize(&t, 2)?;
    println!("mode-2 unfolding is {} x {}, first row {:?}", a2.rows(), a2.cols(), a2.row(0));

    let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]])?;
    let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]])?;
    let k = khatri_rao(&[&a, &b])?;
    for r in 0..k.rows() {
        println!("krp row {r}: {:?}", k.row(r));
    }
    println!("gram of krp: {:?}", gram(&k).as_slice());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
