//! Runs every example end to end.

#[allow(dead_code)]
#[path = "../examples/tensor_basics.rs"]
mod tensor_basics;

#[allow(dead_code)]
#[path = "../examples/dimension_tree.rs"]
mod dimension_tree;

#[allow(dead_code)]
#[path = "../examples/nnls_solvers.rs"]
mod nnls_solvers;

#[allow(dead_code)]
#[path = "../examples/sequential_nncp.rs"]
mod sequential_nncp;

#[allow(dead_code)]
#[path = "../examples/parallel_nncp.rs"]
mod parallel_nncp;

#[allow(dead_code)]
#[path = "../examples/grid_search.rs"]
mod grid_search;

#[allow(dead_code)]
#[path = "../examples/collectives.rs"]
mod collectives;

#[test]
fn tensor_basics_runs() {
    tensor_basics::run_example().unwrap();
}

#[test]
fn dimension_tree_runs() {
    dimension_tree::run_example().unwrap();
}

#[test]
fn nnls_solvers_runs() {
    nnls_solvers::run_example().unwrap();
}

#[test]
fn sequential_nncp_runs() {
    sequential_nncp::run_example().unwrap();
}

#[test]
fn parallel_nncp_runs() {
    parallel_nncp::run_example().unwrap();
}

#[test]
fn grid_search_runs() {
    grid_search::run_example().unwrap();
}

#[test]
fn collectives_runs() {
    collectives::run_example().unwrap();
}
