//! Collectives on a process grid, their ledger, and alpha-beta pricing.

use nncp::par::{
    distribute_tensor, gather_tensor, CostModel, Fabric, Group, Partition, ProcessGrid,
};
use nncp::DenseTensor;

pub fn run_example() -> nncp::Result<()> {
    let grid = ProcessGrid::new(&[2, 2])?;
    let mut fabric = Fabric::new(grid.clone());
    fabric.set_iter(1);

    let inputs: Vec<Vec<f64>> = (0..4).map(|r| vec![r as f64, 1.0]).collect();
    println!("all-reduce: {:?}", fabric.all_reduce(Group::All, &inputs)?);

    let slice = grid.slice_of(3, 1)?;
    println!("slice of rank 3 in mode 1: {slice} = {:?}", grid.members(slice)?);
    let halves = Partition::balanced(4, 2)?;
    let rs = fabric.reduce_scatter(slice, &[vec![1.0, 2.0, 3.0, 4.0], vec![10.0, 20.0, 30.0, 40.0]], &halves)?;
    println!("reduce-scatter: {rs:?}");
    println!("all-gather: {:?}", fabric.all_gather(slice, &rs, &halves)?);

    print!("{}", fabric.ledger().to_csv());
    let model = CostModel::new(1.0, 0.1)?;
    for e in fabric.ledger().entries() {
        println!("{} over {} members: cost {:.3}", e.kind, e.group_size, model.cost(e));
    }

    let t = DenseTensor::from_fn(&[4, 6], |i| (i[0] * 10 + i[1]) as f64)?;
    let blocks = distribute_tensor(&t, &grid)?;
    println!("block of rank 1: {:?}", blocks[1].data());
    assert_eq!(gather_tensor(&blocks, &grid)?, t);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
