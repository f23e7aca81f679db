//! Dimension trees: a binary tree over contiguous mode ranges whose internal
//! nodes hold reusable partial-MTTKRP temporaries.
//!
//! The root splits `{1..N}` into `{1..s}` and `{s+1..N}`, with `s` chosen so
//! the two sides have extents as close as possible. Below the root every node
//! `{i..j}` splits off its lowest mode: `{i}` and `{i+1..j}`.
//!
//! [`DimTreeMttkrp`] caches node temporaries and recomputes one only when a
//! factor it was contracted against has changed, so a sweep over modes
//! `1..N` that updates each factor right after its MTTKRP computes each root
//! temporary once, always from the freshest factors.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mttkrp::{krp_of_modes, multi_ttv_into, partial_mttkrp_into, FlopLedger, ModeRange};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub modes: ModeRange,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionTree {
    dims: Vec<usize>,
    rank: usize,
    nodes: Vec<TreeNode>,
}

fn extent(dims: &[usize], modes: ModeRange) -> u128 {
    dims[modes.first - 1..modes.last]
        .iter()
        .fold(1u128, |a, &d| a.saturating_mul(d as u128))
}

/// Root split point minimizing `|prod_{n<=s} I_n - prod_{n>s} I_n|`; ties go
/// to the smaller `s`.
pub fn balanced_split(dims: &[usize]) -> Result<usize> {
    let order = dims.len();
    if order < 2 {
        return Err(Error::InvalidArgument(format!(
            "a dimension tree needs at least two modes, got {order}"
        )));
    }
    let mut best = (u128::MAX, 1);
    for s in 1..order {
        let left = extent(dims, ModeRange::new(1, s));
        let right = extent(dims, ModeRange::new(s + 1, order));
        let gap = left.abs_diff(right);
        if gap < best.0 {
            best = (gap, s);
        }
    }
    Ok(best.1)
}

/// Builds the tree for a tensor with extents `dims` and CP rank `rank`.
pub fn build_tree(dims: &[usize], rank: usize) -> Result<DimensionTree> {
    let order = dims.len();
    let s = balanced_split(dims)?;
    let mut nodes = vec![TreeNode {
        modes: ModeRange::new(1, order),
        parent: None,
        children: None,
    }];
    let left = push_chain(&mut nodes, ModeRange::new(1, s), 0);
    let right = push_chain(&mut nodes, ModeRange::new(s + 1, order), 0);
    nodes[0].children = Some((left, right));
    Ok(DimensionTree {
        dims: dims.to_vec(),
        rank,
        nodes,
    })
}

fn push_chain(nodes: &mut Vec<TreeNode>, modes: ModeRange, parent: usize) -> usize {
    let id = nodes.len();
    nodes.push(TreeNode {
        modes,
        parent: Some(parent),
        children: None,
    });
    if !modes.is_leaf() {
        let leaf = push_chain(nodes, ModeRange::single(modes.first), id);
        let rest = push_chain(nodes, ModeRange::new(modes.first + 1, modes.last), id);
        nodes[id].children = Some((leaf, rest));
    }
    id
}

impl DimensionTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn children_of(&self, id: usize) -> Option<(ModeRange, ModeRange)> {
        self.nodes[id]
            .children
            .map(|(a, b)| (self.nodes[a].modes, self.nodes[b].modes))
    }

    pub fn find(&self, modes: ModeRange) -> Option<usize> {
        self.nodes.iter().position(|n| n.modes == modes)
    }

    /// Node ids from the root down to leaf `{n}`.
    pub fn path_to_leaf(&self, n: usize) -> Vec<usize> {
        let mut path = vec![self.root()];
        let mut cur = self.root();
        while let Some((a, b)) = self.nodes[cur].children {
            cur = if self.nodes[a].modes.contains(n) { a } else { b };
            path.push(cur);
        }
        path
    }

    /// Entries in the payload of `id`: the node's extents times the rank.
    pub fn payload_len(&self, id: usize) -> usize {
        extent(&self.dims, self.nodes[id].modes) as usize * self.rank
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelTimes {
    pub partial_mttkrp: Duration,
    pub multi_ttv: Duration,
    pub krp: Duration,
}

impl KernelTimes {
    pub fn since(&self, earlier: &KernelTimes) -> KernelTimes {
        KernelTimes {
            partial_mttkrp: self.partial_mttkrp - earlier.partial_mttkrp,
            multi_ttv: self.multi_ttv - earlier.multi_ttv,
            krp: self.krp - earlier.krp,
        }
    }
}

#[derive(Debug)]
struct Payload {
    tensor: DenseTensor,
    /// Factor versions at the time the payload was computed.
    snapshot: Vec<u64>,
}

/// MTTKRP server backed by a dimension tree with cached temporaries.
#[derive(Debug)]
pub struct DimTreeMttkrp {
    tree: DimensionTree,
    payloads: Vec<Option<Payload>>,
    versions: Vec<u64>,
    flops: FlopLedger,
    times: KernelTimes,
    allocations: Vec<(ModeRange, usize)>,
}

impl DimTreeMttkrp {
    pub fn new(dims: &[usize], rank: usize) -> Result<Self> {
        let tree = build_tree(dims, rank)?;
        let n_nodes = tree.nodes.len();
        Ok(Self {
            tree,
            payloads: (0..n_nodes).map(|_| None).collect(),
            versions: vec![0; dims.len()],
            flops: FlopLedger::default(),
            times: KernelTimes::default(),
            allocations: Vec::new(),
        })
    }

    pub fn tree(&self) -> &DimensionTree {
        &self.tree
    }

    pub fn flops(&self) -> &FlopLedger {
        &self.flops
    }

    pub fn times(&self) -> &KernelTimes {
        &self.times
    }

    /// Every temporary buffer allocated so far, with the node it belongs to.
    pub fn allocations(&self) -> &[(ModeRange, usize)] {
        &self.allocations
    }

    /// Marks factor `n` (1-indexed) as changed.
    pub fn factor_updated(&mut self, n: usize) {
        self.versions[n - 1] += 1;
    }

    /// Forgets every cached temporary (e.g. after swapping the tensor).
    pub fn invalidate_all(&mut self) {
        for v in &mut self.versions {
            *v += 1;
        }
    }

    fn is_fresh(&self, id: usize) -> bool {
        let modes = self.tree.nodes[id].modes;
        match &self.payloads[id] {
            None => false,
            Some(p) => (1..=self.tree.order())
                .filter(|&m| !modes.contains(m))
                .all(|m| p.snapshot[m - 1] == self.versions[m - 1]),
        }
    }

    fn check_inputs(&self, tensor: &DenseTensor, factors: &[Matrix], n: usize) -> Result<()> {
        let order = self.tree.order();
        if tensor.dims() != self.tree.dims() {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {:?}, tree built for {:?}",
                tensor.dims(),
                self.tree.dims()
            )));
        }
        if n == 0 || n > order {
            return Err(Error::InvalidMode { mode: n, order });
        }
        if factors.len() != order {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for a {}-way tensor",
                factors.len(),
                order
            )));
        }
        for (m, f) in factors.iter().enumerate() {
            if m + 1 != n && (f.rows() != tensor.dims()[m] || f.cols() != self.tree.rank()) {
                return Err(Error::DimensionMismatch(format!(
                    "factor {} is {}x{}, expected {}x{}",
                    m + 1,
                    f.rows(),
                    f.cols(),
                    tensor.dims()[m],
                    self.tree.rank()
                )));
            }
        }
        Ok(())
    }

    /// Computes node `id`'s values from its parent into `out`.
    fn compute_from_parent(
        &mut self,
        tensor: &DenseTensor,
        factors: &[Matrix],
        id: usize,
        out: &mut [f64],
    ) -> Result<()> {
        let node = self.tree.nodes[id].clone();
        let parent = node.parent.expect("root has no parent");
        let pmodes = self.tree.nodes[parent].modes;
        let contracted: Vec<usize> = pmodes.modes().filter(|&m| !node.modes.contains(m)).collect();

        let t0 = Instant::now();
        let krp = krp_of_modes(factors, contracted.into_iter(), &mut self.flops)?;
        self.times.krp += t0.elapsed();

        let t1 = Instant::now();
        if parent == self.tree.root() {
            partial_mttkrp_into(tensor, &krp, node.modes, &mut self.flops, out)?;
            self.times.partial_mttkrp += t1.elapsed();
        } else {
            let src = &self.payloads[parent]
                .as_ref()
                .ok_or_else(|| Error::Internal(format!("parent of {} not computed", node.modes)))?
                .tensor;
            multi_ttv_into(src, pmodes, &krp, node.modes, &mut self.flops, out)?;
            self.times.multi_ttv += t1.elapsed();
        }
        Ok(())
    }

    fn ensure(&mut self, tensor: &DenseTensor, factors: &[Matrix], id: usize) -> Result<()> {
        if self.is_fresh(id) {
            return Ok(());
        }
        let modes = self.tree.nodes[id].modes;
        let mut payload = match self.payloads[id].take() {
            Some(p) => p,
            None => {
                let mut dims: Vec<usize> = tensor.dims()[modes.first - 1..modes.last].to_vec();
                dims.push(self.tree.rank());
                let t = DenseTensor::zeros(&dims)?;
                self.allocations.push((modes, t.len()));
                Payload {
                    tensor: t,
                    snapshot: Vec::new(),
                }
            }
        };
        let res = self.compute_from_parent(tensor, factors, id, payload.tensor.data_mut());
        payload.snapshot = self.versions.clone();
        self.payloads[id] = Some(payload);
        res
    }

    /// `M^(n)` for the current factors. `factors[n-1]` is never read.
    pub fn mttkrp(&mut self, tensor: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
        self.check_inputs(tensor, factors, n)?;
        let path = self.tree.path_to_leaf(n);
        for &id in &path[1..path.len() - 1] {
            self.ensure(tensor, factors, id)?;
        }
        let leaf = *path.last().expect("path has a leaf");
        let rows = tensor.dims()[n - 1];
        let mut out = vec![0.0; rows * self.tree.rank()];
        self.compute_from_parent(tensor, factors, leaf, &mut out)?;
        Matrix::from_col_major(rows, self.tree.rank(), out)
    }

    /// Runs one sweep over modes `1..N`: computes `M^(n)`, hands it to
    /// `visit`, stores the returned factor and invalidates what depends on it.
    pub fn sweep<F>(&mut self, tensor: &DenseTensor, factors: &mut [Matrix], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, Matrix, &[Matrix]) -> Result<Matrix>,
    {
        for n in 1..=self.tree.order() {
            let m = self.mttkrp(tensor, factors, n)?;
            let updated = visit(n, m, factors)?;
            factors[n - 1] = updated;
            self.factor_updated(n);
        }
        Ok(())
    }
}

/// One dimension-tree sweep with a fresh cache; see [`DimTreeMttkrp::sweep`].
pub fn tree_mttkrp_sweep<F>(tensor: &DenseTensor, factors: &mut [Matrix], visit: F) -> Result<FlopLedger>
where
    F: FnMut(usize, Matrix, &[Matrix]) -> Result<Matrix>,
{
    let rank = factors
        .iter()
        .skip(1)
        .map(Matrix::cols)
        .next()
        .ok_or_else(|| Error::InvalidArgument("sweep needs at least two factors".into()))?;
    let mut engine = DimTreeMttkrp::new(tensor.dims(), rank)?;
    engine.sweep(tensor, factors, visit)?;
    Ok(*engine.flops())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mttkrp::mttkrp_naive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(tree: &DimensionTree) -> Vec<(String, Option<(String, String)>)> {
        tree.nodes()
            .iter()
            .map(|n| {
                (
                    n.modes.to_string(),
                    n.children.map(|(a, b)| {
                        (tree.node(a).modes.to_string(), tree.node(b).modes.to_string())
                    }),
                )
            })
            .collect()
    }

    #[test]
    fn five_way_cubical_shape() {
        let tree = build_tree(&[64; 5], 4).unwrap();
        assert_eq!(
            tree.children_of(tree.root()),
            Some((ModeRange::new(1, 2), ModeRange::new(3, 5)))
        );
        let n345 = tree.find(ModeRange::new(3, 5)).unwrap();
        assert_eq!(
            tree.children_of(n345),
            Some((ModeRange::single(3), ModeRange::new(4, 5)))
        );
        let n45 = tree.find(ModeRange::new(4, 5)).unwrap();
        assert_eq!(
            tree.children_of(n45),
            Some((ModeRange::single(4), ModeRange::single(5)))
        );
        let n12 = tree.find(ModeRange::new(1, 2)).unwrap();
        assert_eq!(
            tree.children_of(n12),
            Some((ModeRange::single(1), ModeRange::single(2)))
        );
        assert_eq!(tree.nodes().len(), 9);
    }

    #[test]
    fn unbalanced_three_way_split() {
        let dims = [1024, 1344, 33];
        let s1 = (1024i64 - 1344 * 33).abs();
        let s2 = (1024i64 * 1344 - 33).abs();
        assert!(s1 < s2);
        let tree = build_tree(&dims, 2).unwrap();
        assert_eq!(
            tree.children_of(tree.root()),
            Some((ModeRange::single(1), ModeRange::new(2, 3)))
        );
    }

    #[test]
    fn two_way_tree_has_only_leaves() {
        let tree = build_tree(&[5, 7], 3).unwrap();
        assert_eq!(labels(&tree).len(), 3);
        assert_eq!(
            tree.children_of(0),
            Some((ModeRange::single(1), ModeRange::single(2)))
        );
        assert!(build_tree(&[5], 1).is_err());
    }

    #[test]
    fn structural_invariants() {
        for dims in [vec![2, 3], vec![4, 4, 4], vec![2, 9, 3, 5], vec![3, 3, 3, 3, 3, 3]] {
            let tree = build_tree(&dims, 2).unwrap();
            let order = dims.len();
            assert_eq!(tree.node(0).modes, ModeRange::new(1, order));
            for node in tree.nodes() {
                match node.children {
                    None => assert!(node.modes.is_leaf()),
                    Some((a, b)) => {
                        let (a, b) = (tree.node(a).modes, tree.node(b).modes);
                        assert_eq!(a.first, node.modes.first);
                        assert_eq!(a.last + 1, b.first);
                        assert_eq!(b.last, node.modes.last);
                    }
                }
            }
            for n in 1..=order {
                let path = tree.path_to_leaf(n);
                assert_eq!(tree.node(*path.last().unwrap()).modes, ModeRange::single(n));
            }
        }
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        let d: f64 = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        d.sqrt() / b.frobenius_norm()
    }

    #[test]
    fn sweep_matches_naive_with_factor_snapshots() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dims in [vec![3, 4, 5], vec![4, 2, 3, 5], vec![2, 3, 2, 3, 2]] {
            let r = 3;
            let x = DenseTensor::from_fn(&dims, |_| rng.gen()).unwrap();
            let mut factors: Vec<Matrix> = dims
                .iter()
                .map(|&d| Matrix::from_fn(d, r, |_, _| rng.gen()))
                .collect();
            let mut engine = DimTreeMttkrp::new(&dims, r).unwrap();
            for _ in 0..3 {
                let mut rng2 = ChaCha8Rng::seed_from_u64(rng.gen());
                engine
                    .sweep(&x, &mut factors, |n, m, current| {
                        let reference = mttkrp_naive(&x, current, n)?;
                        assert!(rel_err(&m, &reference) < 1e-12, "mode {n}");
                        Ok(Matrix::from_fn(m.rows(), r, |_, _| rng2.gen()))
                    })
                    .unwrap();
            }
        }
    }

    #[test]
    fn root_temporaries_computed_once_per_sweep() {
        let dims = [4, 4, 4, 4];
        let r = 2;
        let x = DenseTensor::from_fn(&dims, |i| i.iter().sum::<usize>() as f64).unwrap();
        let mut factors: Vec<Matrix> = dims.iter().map(|&d| Matrix::filled(d, r, 0.5)).collect();
        let mut engine = DimTreeMttkrp::new(&dims, r).unwrap();
        engine.sweep(&x, &mut factors, |_, m, _| Ok(m)).unwrap();
        let first = *engine.flops();
        engine.sweep(&x, &mut factors, |_, m, _| Ok(m)).unwrap();
        let second = engine.flops().since(&first);
        // two partial MTTKRPs per sweep, each 2*I*R
        assert_eq!(second.partial_mttkrp, 2 * 2 * 256 * 2);
        // {1,2} and {3,4} each feed two leaves: 4 multi-TTVs of 2*16*R
        assert_eq!(second.multi_ttv, 4 * 2 * 16 * 2);
        // temporaries allocated once, sized prod(subset) * R
        assert_eq!(engine.allocations().len(), 2);
        for &(modes, len) in engine.allocations() {
            let ext: usize = dims[modes.first - 1..modes.last].iter().product();
            assert_eq!(len, ext * r);
        }
    }

    #[test]
    fn ones_give_fiber_sums() {
        let dims = [2, 3, 4];
        let x = DenseTensor::from_fn(&dims, |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64).unwrap();
        let mut factors: Vec<Matrix> = dims.iter().map(|&d| Matrix::filled(d, 1, 1.0)).collect();
        let mut delivered = Vec::new();
        tree_mttkrp_sweep(&x, &mut factors, |n, m, _| {
            delivered.push((n, m));
            Ok(Matrix::filled(dims[n - 1], 1, 1.0))
        })
        .unwrap();
        assert_eq!(delivered.iter().map(|d| d.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        for (n, m) in delivered {
            for i in 1..=dims[n - 1] {
                let mut s = 0.0;
                for off in 0..x.len() {
                    let idx = crate::tensor::decode_offset(&dims, off).unwrap();
                    if idx[n - 1] == i {
                        s += x.data()[off];
                    }
                }
                assert_eq!(m.get(i - 1, 0), s);
            }
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let mut engine = DimTreeMttkrp::new(&[2, 3, 4], 2).unwrap();
        let x = DenseTensor::zeros(&[2, 3, 5]).unwrap();
        let f = vec![Matrix::zeros(2, 2), Matrix::zeros(3, 2), Matrix::zeros(5, 2)];
        assert!(engine.mttkrp(&x, &f, 1).is_err());
        let x = DenseTensor::zeros(&[2, 3, 4]).unwrap();
        let f = vec![Matrix::zeros(2, 2), Matrix::zeros(3, 1), Matrix::zeros(4, 2)];
        assert!(engine.mttkrp(&x, &f, 1).is_err());
        assert!(engine.mttkrp(&x, &f, 4).is_err());
    }
}
