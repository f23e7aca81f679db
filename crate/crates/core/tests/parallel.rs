//! Distributed driver against the sequential one on assorted grids.

mod common;

use common::*;
use nncp::nncp::{nncp, NlsMethod, NncpConfig};
use nncp::par::{CollectiveKind, ExecMode, Group, ProcessGrid};
use nncp::par_nncp::{par_nncp, ParConfig};

fn cfg(rank: usize, iters: usize, nls: NlsMethod) -> NncpConfig {
    let mut c = NncpConfig::new(rank);
    c.max_outer_iters = iters;
    c.nls = nls;
    c.seed = 21;
    c
}

#[test]
fn grids_of_two_four_and_eight_track_sequential() {
    let t = uniform_tensor(&mut rng(1), &[8, 8, 8]);
    for nls in [NlsMethod::Bpp, NlsMethod::Hals] {
        let c = cfg(3, 8, nls);
        let (_, seq) = nncp(&t, &c).unwrap();
        for g in [[2, 1, 1], [1, 2, 2], [2, 2, 2], [4, 2, 1], [1, 1, 8]] {
            let grid = ProcessGrid::new(&g).unwrap();
            let (_, par, _) = par_nncp(&t, &grid, &ParConfig::new(c.clone())).unwrap();
            for (a, b) in seq.eps().iter().zip(par.eps()) {
                assert!((a - b).abs() <= 1e-10, "{nls:?} {grid}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn threads_and_simulation_are_bitwise_equal() {
    let t = uniform_tensor(&mut rng(2), &[6, 4, 4, 2]);
    let grid = ProcessGrid::new(&[3, 2, 1, 2]).unwrap();
    let mut pc = ParConfig::new(cfg(2, 4, NlsMethod::Bpp));
    let sim = par_nncp(&t, &grid, &pc).unwrap();
    pc.exec = ExecMode::Threads;
    let thr = par_nncp(&t, &grid, &pc).unwrap();
    assert_eq!(sim.0, thr.0);
    assert_eq!(sim.1.to_csv(false), thr.1.to_csv(false));
    assert_eq!(sim.2, thr.2);
}

#[test]
fn ledger_counts_one_entry_per_subgroup_call() {
    let t = uniform_tensor(&mut rng(3), &[8, 8, 8]);
    let grid = ProcessGrid::new(&[2, 2, 2]).unwrap();
    let (_, trace, ledger) = par_nncp(&t, &grid, &ParConfig::new(cfg(2, 3, NlsMethod::Bpp))).unwrap();
    for iter in 1..=3 {
        let it = ledger.iteration(iter);
        let rs: Vec<_> = it.entries().iter().filter(|e| e.kind == CollectiveKind::ReduceScatter).collect();
        assert_eq!(rs.len(), 6);
        assert!(rs.iter().all(|e| e.group_size == 4 && e.words == 4 * 2));
        assert!(it
            .entries()
            .iter()
            .filter(|e| e.kind == CollectiveKind::AllReduce)
            .all(|e| e.group == Group::All && e.group_size == 8));
        let mine = it.for_worker(&grid, 0);
        let words: f64 = mine.entries().iter().map(|e| e.bandwidth_words()).sum();
        assert!((words - trace.records[iter - 1].words()).abs() < 1e-9);
    }
}

#[test]
fn recovers_exact_low_rank_on_a_grid() {
    let truth = nncp::cli::synthetic_model(&[12, 12, 12], 2, 5, false).unwrap();
    let t = truth.full().unwrap();
    let grid = ProcessGrid::new(&[2, 3, 2]).unwrap();
    let (model, trace, _) = par_nncp(&t, &grid, &ParConfig::new(cfg(2, 150, NlsMethod::Bpp))).unwrap();
    assert!(trace.final_eps().unwrap() <= 1e-3);
    assert!((model.relative_error_to(&t).unwrap() - trace.final_eps().unwrap()).abs() <= 1e-8);
}
