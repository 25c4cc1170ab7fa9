//! Finite filtered probability spaces as rooted scenario trees, and the
//! adapted strategies that live on them.
//!
//! A [`ScenarioTree`] is a rooted tree whose nodes at depth `t` are the atoms
//! of the sigma-algebra `F_t`. Leaves sit at the horizon `T` and carry
//! strictly positive probabilities, so "almost surely" always means "at every
//! leaf". Everything else in this crate is parameterized by a tree.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node within a [`ScenarioTree`].
pub type NodeId = usize;

/// Tolerance for child conditional probabilities summing to one at build time.
pub const PROB_BUILD_TOL: f64 = 1e-12;

/// Tolerance for leaf probabilities summing to one when auditing a tree.
pub const PROB_AUDIT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("probability error: {0}")]
    ProbabilityError(String),
    #[error("strategy enumeration budget exceeded: {count} strategies > cap {cap}")]
    BudgetExceeded { count: u128, cap: u128 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Node description used to build a tree; mirrors the JSON model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub time: usize,
    pub parent: Option<NodeId>,
    /// Conditional transition probability from the parent (1.0 at the root).
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub time: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub cond_prob: f64,
}

/// A finite filtered probability space: rooted tree, horizon `T`, strategy
/// dimension `d` per step, strictly positive transition probabilities.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    nodes: Vec<TreeNode>,
    root: NodeId,
    horizon: usize,
    dim: usize,
    leaves: Vec<NodeId>,
    leaf_probs: Vec<f64>,
    /// Root-to-leaf node paths, one per leaf (each has `horizon + 1` entries).
    paths: Vec<Vec<NodeId>>,
}

impl ScenarioTree {
    /// Builds and validates a tree from node specs.
    ///
    /// Node ids must be dense `0..n`. Leaf absolute probabilities are the
    /// products of conditional probabilities along root-to-leaf paths.
    pub fn build(dim: usize, specs: &[NodeSpec]) -> Result<Arc<Self>, TreeError> {
        if dim == 0 {
            return Err(TreeError::MalformedTree("dimension d must be >= 1".into()));
        }
        let n = specs.len();
        if n == 0 {
            return Err(TreeError::MalformedTree("empty node list".into()));
        }
        let mut seen = vec![false; n];
        let mut nodes: Vec<TreeNode> = vec![
            TreeNode {
                time: 0,
                parent: None,
                children: Vec::new(),
                cond_prob: 0.0
            };
            n
        ];
        for s in specs {
            if s.id >= n {
                return Err(TreeError::MalformedTree(format!(
                    "node id {} out of range (ids must be dense 0..{})",
                    s.id, n
                )));
            }
            if seen[s.id] {
                return Err(TreeError::MalformedTree(format!("duplicate node id {}", s.id)));
            }
            seen[s.id] = true;
            if s.prob.is_nan() || s.prob <= 0.0 || s.prob > 1.0 + PROB_BUILD_TOL {
                return Err(TreeError::ProbabilityError(format!(
                    "node {} has conditional probability {} outside (0, 1]",
                    s.id, s.prob
                )));
            }
            nodes[s.id] = TreeNode {
                time: s.time,
                parent: s.parent,
                children: Vec::new(),
                cond_prob: s.prob,
            };
        }
        // Wire children in spec order so artifacts are deterministic.
        let mut root = None;
        for s in specs {
            match s.parent {
                None => {
                    if s.time != 0 {
                        return Err(TreeError::MalformedTree(format!(
                            "root node {} must be at time 0, found {}",
                            s.id, s.time
                        )));
                    }
                    if root.is_some() {
                        return Err(TreeError::MalformedTree("more than one root".into()));
                    }
                    root = Some(s.id);
                }
                Some(p) => {
                    if p >= n || !seen[p] {
                        return Err(TreeError::MalformedTree(format!(
                            "node {} has dangling parent {}",
                            s.id, p
                        )));
                    }
                    if nodes[p].time + 1 != s.time {
                        return Err(TreeError::MalformedTree(format!(
                            "time gap: node {} at time {} has parent at time {}",
                            s.id, s.time, nodes[p].time
                        )));
                    }
                    nodes[p].children.push(s.id);
                }
            }
        }
        let root = root.ok_or_else(|| TreeError::MalformedTree("no root node".into()))?;

        let horizon = nodes.iter().map(|nd| nd.time).max().unwrap();
        if horizon == 0 {
            return Err(TreeError::MalformedTree("horizon T must be >= 1".into()));
        }
        for (id, nd) in nodes.iter().enumerate() {
            if nd.children.is_empty() {
                if nd.time != horizon {
                    return Err(TreeError::MalformedTree(format!(
                        "leaf node {} at time {} but horizon is {}",
                        id, nd.time, horizon
                    )));
                }
            } else {
                let sum: f64 = nd.children.iter().map(|&c| nodes[c].cond_prob).sum();
                if (sum - 1.0).abs() > PROB_BUILD_TOL {
                    return Err(TreeError::ProbabilityError(format!(
                        "children of node {} have probabilities summing to {}, expected 1",
                        id, sum
                    )));
                }
            }
        }
        // Reachability: every node must descend from the root.
        let mut reach = vec![false; n];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            reach[v] = true;
            stack.extend(nodes[v].children.iter().copied());
        }
        if reach.iter().any(|r| !r) {
            return Err(TreeError::MalformedTree("unreachable nodes present".into()));
        }

        let leaves: Vec<NodeId> = (0..n).filter(|&id| nodes[id].children.is_empty()).collect();
        let mut paths = Vec::with_capacity(leaves.len());
        let mut leaf_probs = Vec::with_capacity(leaves.len());
        for &leaf in &leaves {
            let mut path = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = nodes[cur].parent {
                path.push(p);
                cur = p;
            }
            path.reverse();
            let mut prob = 1.0;
            for &node in &path[1..] {
                prob *= nodes[node].cond_prob;
            }
            paths.push(path);
            leaf_probs.push(prob);
        }
        let total: f64 = leaf_probs.iter().sum();
        if (total - 1.0).abs() > PROB_AUDIT_TOL {
            return Err(TreeError::ProbabilityError(format!(
                "leaf probabilities sum to {}, expected 1",
                total
            )));
        }

        Ok(Arc::new(ScenarioTree {
            nodes,
            root,
            horizon,
            dim,
            leaves,
            leaf_probs,
            paths,
        }))
    }

    /// One-step tree: root plus one leaf per entry of `probs`.
    pub fn one_step(dim: usize, probs: &[f64]) -> Result<Arc<Self>, TreeError> {
        let mut specs = vec![NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 }];
        for (i, &p) in probs.iter().enumerate() {
            specs.push(NodeSpec { id: i + 1, time: 1, parent: Some(0), prob: p });
        }
        Self::build(dim, &specs)
    }

    /// Full `branching`-ary tree of depth `horizon` with uniform transitions.
    pub fn uniform(dim: usize, horizon: usize, branching: usize) -> Result<Arc<Self>, TreeError> {
        let mut specs = vec![NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 }];
        let mut frontier = vec![0usize];
        let mut next_id = 1;
        for t in 1..=horizon {
            let mut new_frontier = Vec::new();
            for &parent in &frontier {
                for _ in 0..branching {
                    specs.push(NodeSpec {
                        id: next_id,
                        time: t,
                        parent: Some(parent),
                        prob: 1.0 / branching as f64,
                    });
                    new_frontier.push(next_id);
                    next_id += 1;
                }
            }
            frontier = new_frontier;
        }
        Self::build(dim, &specs)
    }

    /// Single-path tree (one child per node): the deterministic filtration.
    pub fn single_path(dim: usize, horizon: usize) -> Result<Arc<Self>, TreeError> {
        let mut specs = vec![NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 }];
        for t in 1..=horizon {
            specs.push(NodeSpec { id: t, time: t, parent: Some(t - 1), prob: 1.0 });
        }
        Self::build(dim, &specs)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Strategy dimension per time step.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaves in increasing id order; index into this slice is the "leaf index"
    /// used by per-leaf value vectors throughout the crate.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_index(&self, leaf: NodeId) -> Option<usize> {
        self.leaves.iter().position(|&l| l == leaf)
    }

    /// Absolute probability of the leaf with the given leaf index.
    pub fn leaf_prob(&self, leaf_idx: usize) -> f64 {
        self.leaf_probs[leaf_idx]
    }

    /// Root-to-leaf node path for the given leaf index (`horizon + 1` nodes).
    pub fn path(&self, leaf_idx: usize) -> &[NodeId] {
        &self.paths[leaf_idx]
    }

    /// Non-terminal (decision) nodes in increasing id order.
    pub fn decision_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&id| !self.is_leaf(id)).collect()
    }

    /// Nodes at a fixed time, in increasing id order.
    pub fn nodes_at(&self, t: usize) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&id| self.nodes[id].time == t).collect()
    }

    /// Atoms of `F_t`: for each time-`t` node, the set of leaves below it.
    /// Any `F_t`-measurable set is a union of these.
    pub fn ft_atoms(&self, t: usize) -> Vec<Atom> {
        assert!(t <= self.horizon, "time {} beyond horizon {}", t, self.horizon);
        self.nodes_at(t)
            .into_iter()
            .map(|node| {
                let leaf_indices = (0..self.leaves.len())
                    .filter(|&li| self.paths[li][t] == node)
                    .collect();
                Atom { node, time: t, leaf_indices }
            })
            .collect()
    }

    /// Number of adapted strategies with one grid point per decision node.
    pub fn strategy_count(&self, points_per_node: &BTreeMap<NodeId, usize>) -> u128 {
        self.decision_nodes()
            .iter()
            .map(|id| *points_per_node.get(id).unwrap_or(&0) as u128)
            .product()
    }
}

/// An atom of `F_t`: a time-`t` node together with the leaves below it.
#[derive(Debug, Clone)]
pub struct Atom {
    pub node: NodeId,
    pub time: usize,
    pub leaf_indices: Vec<usize>,
}

/// A strategy vector in `R^d` per non-terminal node. Adaptedness is
/// structural: a node is an atom of `F_t`, so assigning one value per node is
/// exactly `F_t`-measurability.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedStrategy {
    /// Indexed by node id; empty at leaves.
    values: Vec<Vec<f64>>,
}

impl AdaptedStrategy {
    pub fn zero(tree: &ScenarioTree) -> Self {
        let mut values = vec![Vec::new(); tree.num_nodes()];
        for id in tree.decision_nodes() {
            values[id] = vec![0.0; tree.dim()];
        }
        AdaptedStrategy { values }
    }

    /// Same vector at every decision node (a deterministic strategy when the
    /// vector is constant in time would instead use [`AdaptedStrategy::deterministic`]).
    pub fn constant(tree: &ScenarioTree, v: &[f64]) -> Self {
        assert_eq!(v.len(), tree.dim());
        let mut s = Self::zero(tree);
        for id in tree.decision_nodes() {
            s.values[id].copy_from_slice(v);
        }
        s
    }

    /// Deterministic strategy from a path vector `x` of length `d * T`:
    /// every time-`t` node gets `x[t*d..(t+1)*d]`.
    pub fn deterministic(tree: &ScenarioTree, x: &[f64]) -> Self {
        let d = tree.dim();
        assert_eq!(x.len(), d * tree.horizon());
        let mut s = Self::zero(tree);
        for id in tree.decision_nodes() {
            let t = tree.node(id).time;
            s.values[id].copy_from_slice(&x[t * d..(t + 1) * d]);
        }
        s
    }

    pub fn from_fn(tree: &ScenarioTree, mut f: impl FnMut(NodeId) -> Vec<f64>) -> Self {
        let mut s = Self::zero(tree);
        for id in tree.decision_nodes() {
            let v = f(id);
            assert_eq!(v.len(), tree.dim());
            s.values[id] = v;
        }
        s
    }

    pub fn get(&self, node: NodeId) -> &[f64] {
        &self.values[node]
    }

    pub fn set(&mut self, node: NodeId, v: Vec<f64>) {
        assert_eq!(v.len(), self.values[node].len(), "dimension mismatch at node {node}");
        self.values[node] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|&x| x == 0.0))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        AdaptedStrategy {
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|&x| lambda * x).collect())
                .collect(),
        }
    }

    /// Restriction to the root-to-leaf path: `(theta_0, ..., theta_{T-1})`
    /// concatenated by time. This is the argument the integrand `V(omega, x)`
    /// consumes.
    pub fn restrict_to_path(&self, tree: &ScenarioTree, leaf_idx: usize) -> Vec<f64> {
        let path = tree.path(leaf_idx);
        let mut x = Vec::with_capacity(tree.dim() * tree.horizon());
        for &node in &path[..tree.horizon()] {
            x.extend_from_slice(&self.values[node]);
        }
        x
    }
}

/// Streams every adapted strategy whose node values lie in per-node grids.
///
/// The count is the product of grid sizes over non-terminal nodes; a
/// [`TreeError::BudgetExceeded`] is raised up front when it exceeds the cap.
pub struct AdaptedGridIter<'a> {
    tree: &'a ScenarioTree,
    decision: Vec<NodeId>,
    grids: Vec<&'a [Vec<f64>]>,
    odometer: Vec<usize>,
    done: bool,
}

impl<'a> AdaptedGridIter<'a> {
    /// `node_grids` maps each decision node id to its finite set of `R^d` points.
    pub fn new(
        tree: &'a ScenarioTree,
        node_grids: &'a BTreeMap<NodeId, Vec<Vec<f64>>>,
        cap: u128,
    ) -> Result<Self, TreeError> {
        let decision = tree.decision_nodes();
        let mut grids = Vec::with_capacity(decision.len());
        let mut count: u128 = 1;
        for &id in &decision {
            let g = node_grids
                .get(&id)
                .ok_or_else(|| TreeError::InvalidGrid(format!("no grid at node {id}")))?;
            if g.is_empty() {
                return Err(TreeError::InvalidGrid(format!("empty grid at node {id}")));
            }
            for p in g {
                if p.len() != tree.dim() {
                    return Err(TreeError::InvalidGrid(format!(
                        "grid point of dimension {} at node {id}, expected {}",
                        p.len(),
                        tree.dim()
                    )));
                }
            }
            count = count.saturating_mul(g.len() as u128);
            grids.push(g.as_slice());
        }
        if count > cap {
            return Err(TreeError::BudgetExceeded { count, cap });
        }
        Ok(AdaptedGridIter {
            tree,
            decision,
            grids,
            odometer: Vec::new(),
            done: false,
        })
    }

    /// Number of strategies this iterator will yield.
    pub fn total(&self) -> u128 {
        self.grids.iter().map(|g| g.len() as u128).product()
    }
}

impl Iterator for AdaptedGridIter<'_> {
    type Item = AdaptedStrategy;

    fn next(&mut self) -> Option<AdaptedStrategy> {
        if self.done {
            return None;
        }
        if self.odometer.is_empty() {
            self.odometer = vec![0; self.decision.len()];
        } else {
            // Advance the odometer, last node fastest; keeps enumeration in
            // lexicographic order over (node id, grid index).
            let mut i = self.decision.len();
            loop {
                if i == 0 {
                    self.done = true;
                    return None;
                }
                i -= 1;
                self.odometer[i] += 1;
                if self.odometer[i] < self.grids[i].len() {
                    break;
                }
                self.odometer[i] = 0;
            }
        }
        let mut s = AdaptedStrategy::zero(self.tree);
        for (i, &id) in self.decision.iter().enumerate() {
            s.set(id, self.grids[i][self.odometer[i]].clone());
        }
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binomial() -> Arc<ScenarioTree> {
        ScenarioTree::one_step(1, &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn one_step_binomial_builds() {
        let t = binomial();
        assert_eq!(t.horizon(), 1);
        assert_eq!(t.leaves().len(), 2);
        assert_eq!(t.leaf_prob(0), 0.5);
        assert_eq!(t.leaf_prob(1), 0.5);
    }

    #[test]
    fn single_path_leaf_prob_is_one() {
        let t = ScenarioTree::single_path(1, 3).unwrap();
        assert_eq!(t.leaves().len(), 1);
        assert_eq!(t.leaf_prob(0), 1.0);
    }

    #[test]
    fn trinomial_two_step_leaf_probs() {
        // Leaf probabilities are products of conditionals and sum to 1.
        let t = ScenarioTree::uniform(1, 2, 3).unwrap();
        assert_eq!(t.leaves().len(), 9);
        let total: f64 = (0..9).map(|i| t.leaf_prob(i)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for i in 0..9 {
            assert!((t.leaf_prob(i) - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dangling_parent_rejected() {
        let specs = vec![
            NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 },
            NodeSpec { id: 1, time: 1, parent: Some(7), prob: 1.0 },
        ];
        assert!(matches!(
            ScenarioTree::build(1, &specs),
            Err(TreeError::MalformedTree(_))
        ));
    }

    #[test]
    fn time_gap_rejected() {
        let specs = vec![
            NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 },
            NodeSpec { id: 1, time: 2, parent: Some(0), prob: 1.0 },
        ];
        assert!(matches!(
            ScenarioTree::build(1, &specs),
            Err(TreeError::MalformedTree(_))
        ));
    }

    #[test]
    fn nonpositive_prob_rejected() {
        let specs = vec![
            NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 },
            NodeSpec { id: 1, time: 1, parent: Some(0), prob: 0.0 },
            NodeSpec { id: 2, time: 1, parent: Some(0), prob: 1.0 },
        ];
        assert!(matches!(
            ScenarioTree::build(1, &specs),
            Err(TreeError::ProbabilityError(_))
        ));
    }

    #[test]
    fn non_normalized_children_rejected() {
        let specs = vec![
            NodeSpec { id: 0, time: 0, parent: None, prob: 1.0 },
            NodeSpec { id: 1, time: 1, parent: Some(0), prob: 0.6 },
            NodeSpec { id: 2, time: 1, parent: Some(0), prob: 0.6 },
        ];
        assert!(matches!(
            ScenarioTree::build(1, &specs),
            Err(TreeError::ProbabilityError(_))
        ));
    }

    #[test]
    fn restrict_constant_strategy() {
        let t = binomial();
        let s = AdaptedStrategy::constant(&t, &[3.5]);
        assert_eq!(s.restrict_to_path(&t, 0), vec![3.5]);
        assert_eq!(s.restrict_to_path(&t, 1), vec![3.5]);
    }

    #[test]
    fn restrict_zero_strategy() {
        let t = ScenarioTree::uniform(2, 2, 2).unwrap();
        let s = AdaptedStrategy::zero(&t);
        for li in 0..t.leaves().len() {
            assert_eq!(s.restrict_to_path(&t, li), vec![0.0; 4]);
        }
    }

    #[test]
    fn restrict_traces_the_path() {
        // Node-index-valued strategy on a 2-step binary tree: the up-up leaf
        // sees (val(root), val(up node)).
        let t = ScenarioTree::uniform(1, 2, 2).unwrap();
        let s = AdaptedStrategy::from_fn(&t, |id| vec![id as f64]);
        let li = t.leaf_index(t.path(0)[2]).unwrap();
        let path = t.path(li);
        assert_eq!(s.restrict_to_path(&t, li), vec![path[0] as f64, path[1] as f64]);
    }

    #[test]
    fn ft_atoms_partition_and_refine() {
        let t = ScenarioTree::uniform(1, 2, 3).unwrap();
        // t = 0: a single atom holding all leaves.
        let a0 = t.ft_atoms(0);
        assert_eq!(a0.len(), 1);
        assert_eq!(a0[0].leaf_indices.len(), 9);
        // t = 1: three atoms of three leaves each.
        let a1 = t.ft_atoms(1);
        assert_eq!(a1.len(), 3);
        for a in &a1 {
            assert_eq!(a.leaf_indices.len(), 3);
        }
    }

    #[test]
    fn binomial_atoms() {
        let t = binomial();
        assert_eq!(t.ft_atoms(0).len(), 1);
        let a1 = t.ft_atoms(1);
        assert_eq!(a1.len(), 2);
        assert_eq!(a1[0].leaf_indices, vec![0]);
        assert_eq!(a1[1].leaf_indices, vec![1]);
    }

    #[test]
    fn grid_enumeration_counts() {
        let t = binomial();
        let mut grids = BTreeMap::new();
        grids.insert(0usize, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let iter = AdaptedGridIter::new(&t, &grids, 1_000).unwrap();
        assert_eq!(iter.total(), 3);
        assert_eq!(iter.collect::<Vec<_>>().len(), 3);

        let t2 = ScenarioTree::uniform(1, 2, 2).unwrap();
        let mut grids2 = BTreeMap::new();
        for id in t2.decision_nodes() {
            grids2.insert(id, vec![vec![0.0], vec![1.0]]);
        }
        let iter2 = AdaptedGridIter::new(&t2, &grids2, 1_000).unwrap();
        assert_eq!(iter2.total(), 8);
        assert_eq!(iter2.collect::<Vec<_>>().len(), 8);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let t = binomial();
        let mut grids = BTreeMap::new();
        grids.insert(0usize, Vec::<Vec<f64>>::new());
        assert!(matches!(
            AdaptedGridIter::new(&t, &grids, 1_000),
            Err(TreeError::InvalidGrid(_))
        ));
    }

    #[test]
    fn budget_cap_enforced() {
        let t = ScenarioTree::uniform(1, 2, 2).unwrap();
        let mut grids = BTreeMap::new();
        for id in t.decision_nodes() {
            grids.insert(id, vec![vec![0.0], vec![1.0]]);
        }
        assert!(matches!(
            AdaptedGridIter::new(&t, &grids, 7),
            Err(TreeError::BudgetExceeded { count: 8, cap: 7 })
        ));
    }

    proptest! {
        #[test]
        fn leaf_probs_positive_and_normalized(branching in 1usize..4, horizon in 1usize..4) {
            let t = ScenarioTree::uniform(1, horizon, branching).unwrap();
            let mut total = 0.0;
            for i in 0..t.leaves().len() {
                prop_assert!(t.leaf_prob(i) > 0.0);
                total += t.leaf_prob(i);
            }
            prop_assert!((total - 1.0).abs() < PROB_AUDIT_TOL);
        }

        #[test]
        fn atoms_partition_leaves_and_refine(branching in 1usize..4, horizon in 1usize..4) {
            let t = ScenarioTree::uniform(1, horizon, branching).unwrap();
            for tt in 0..=horizon {
                let atoms = t.ft_atoms(tt);
                let mut seen: Vec<usize> = atoms.iter().flat_map(|a| a.leaf_indices.clone()).collect();
                seen.sort_unstable();
                prop_assert_eq!(seen, (0..t.leaves().len()).collect::<Vec<_>>());
                if tt + 1 <= horizon {
                    // Every atom of F_{t+1} sits inside a single atom of F_t.
                    for fine in t.ft_atoms(tt + 1) {
                        let hits = atoms
                            .iter()
                            .filter(|a| fine.leaf_indices.iter().all(|li| a.leaf_indices.contains(li)))
                            .count();
                        prop_assert_eq!(hits, 1);
                    }
                }
            }
        }

        #[test]
        fn strategies_equal_on_path_give_equal_path_vectors(vals in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let t = ScenarioTree::uniform(1, 2, 2).unwrap();
            let s1 = AdaptedStrategy::from_fn(&t, |id| vec![vals[t.node(id).time.min(2)]]);
            // s2 agrees with s1 on the path to leaf 0 but differs elsewhere.
            let path = t.path(0).to_vec();
            let s2 = AdaptedStrategy::from_fn(&t, |id| {
                if path.contains(&id) {
                    s1.get(id).to_vec()
                } else {
                    vec![99.0]
                }
            });
            prop_assert_eq!(s1.restrict_to_path(&t, 0), s2.restrict_to_path(&t, 0));
        }
    }
}
