//! Property tests over randomly drawn shapes and data.

mod common;

use common::*;
use nncp::dimtree::DimTreeMttkrp;
use nncp::matrix::{gram, khatri_rao};
use nncp::mttkrp::mttkrp_naive;
use nncp::nls::{hals_update_rows, nnls_bpp, subproblem_objective};
use nncp::nncp::normalize_columns;
use nncp::par::{all_gather, all_reduce, distribute_tensor, gather_tensor, reduce_scatter, Partition, ProcessGrid};
use proptest::prelude::*;

fn dims_strategy(min_order: usize, max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, min_order..=max_order)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_mttkrp_matches_naive_after_updates(dims in dims_strategy(2, 5, 5), r in 1usize..4, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let t = uniform_tensor(&mut rng, &dims);
        let mut factors: Vec<_> = dims.iter().map(|&d| uniform_matrix(&mut rng, d, r, 0.0, 1.0)).collect();
        let mut engine = DimTreeMttkrp::new(&dims, r).unwrap();
        for _ in 0..2 {
            for n in 1..=dims.len() {
                let m = engine.mttkrp(&t, &factors, n).unwrap();
                prop_assert!(rel_diff(&m, &mttkrp_naive(&t, &factors, n).unwrap()) <= 1e-12);
                factors[n - 1] = uniform_matrix(&mut rng, dims[n - 1], r, 0.0, 1.0);
                engine.factor_updated(n);
            }
        }
    }

    #[test]
    fn gram_of_krp_is_hadamard_of_grams(rows in prop::collection::vec(1usize..5, 2..4), r in 1usize..4, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let ms: Vec<_> = rows.iter().map(|&k| uniform_matrix(&mut rng, k, r, -1.0, 1.0)).collect();
        let refs: Vec<_> = ms.iter().collect();
        let lhs = gram(&khatri_rao(&refs).unwrap());
        let mut rhs = gram(&ms[0]);
        for m in &ms[1..] {
            rhs = rhs.hadamard(&gram(m)).unwrap();
        }
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-13);
    }

    #[test]
    fn bpp_satisfies_kkt(r in 1usize..6, k in 1usize..6, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let s = random_spd(&mut rng, r);
        let m = uniform_matrix(&mut rng, k, r, -2.0, 2.0);
        let h = nnls_bpp(&s, &m).unwrap();
        for i in 0..k {
            prop_assert!(kkt_violation(&s, &m.row(i), &h.row(i)) <= 1e-8);
        }
    }

    #[test]
    fn hals_never_increases_objective(r in 1usize..6, k in 1usize..6, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let s = gram(&normalize_columns(&uniform_matrix(&mut rng, r + 2, r, 0.0, 1.0)).0);
        let m = uniform_matrix(&mut rng, k, r, -1.0, 2.0);
        let mut h = uniform_matrix(&mut rng, k, r, 0.0, 1.0);
        for _ in 0..3 {
            let before = subproblem_objective(&s, &m, &h);
            hals_update_rows(&mut h, &m, &s).unwrap();
            prop_assert!(subproblem_objective(&s, &m, &h) <= before + 1e-12 * before.abs().max(1.0));
        }
    }

    #[test]
    fn reduce_scatter_then_gather_is_all_reduce(p in 1usize..9, w in 0usize..20, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let inputs: Vec<Vec<f64>> = (0..p).map(|_| uniform_matrix(&mut rng, w, 1, -1.0, 1.0).into_vec()).collect();
        let part = Partition::balanced(w, p).unwrap();
        let rs = reduce_scatter(&inputs, &part).unwrap();
        let ag = all_gather(&rs, &part).unwrap();
        let ar = all_reduce(&inputs).unwrap();
        prop_assert_eq!(ag.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), ar.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn grid_rank_round_trip(grid in dims_strategy(1, 4, 4)) {
        let g = ProcessGrid::new(&grid).unwrap();
        for r in 0..g.size() {
            prop_assert_eq!(g.rank_of(&g.coords(r).unwrap()).unwrap(), r);
        }
        for n in 1..=g.order() {
            let mut seen = vec![0; g.size()];
            for slice in g.slices(n) {
                for m in g.members(slice).unwrap() {
                    seen[m] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn scatter_gather_identity(grid in dims_strategy(1, 4, 3), mult in dims_strategy(4, 4, 3), seed in any::<u64>()) {
        let g = ProcessGrid::new(&grid).unwrap();
        let dims: Vec<usize> = grid.iter().zip(&mult).map(|(p, m)| p * m).collect();
        let t = uniform_tensor(&mut rng(seed), &dims);
        prop_assert_eq!(gather_tensor(&distribute_tensor(&t, &g).unwrap(), &g).unwrap(), t);
    }
}
