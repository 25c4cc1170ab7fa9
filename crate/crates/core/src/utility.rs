//! Expected-utility maximization over possibly non-concave models, with a
//! backward dynamic program for additive models and an exhaustive
//! enumeration oracle that the program must match exactly.
//!
//! Exactness is arranged structurally: both optimizers accumulate wealth
//! through [`MarketModel::additive_step`] and reduce leaf utilities with the
//! same subtree-shaped weighted sum, so their objective values agree bitwise
//! and the maxima coincide.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{axis_points, symmetric_axis};
use crate::model::MarketModel;
use crate::tree::{AdaptedGridIter, AdaptedStrategy, NodeId, ScenarioTree, TreeError};

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("objective is -inf for every strategy on the grid")]
    AllInfeasible,
    #[error(transparent)]
    Budget(#[from] TreeError),
}

type CustomUtility = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Per-leaf utility of terminal wealth; must be nondecreasing in wealth.
#[derive(Clone)]
pub enum UtilityFunction {
    /// Risk-neutral: `U(w) = w`.
    Linear,
    /// Exponential: `U(w) = -exp(-a w)`, `a > 0`.
    Exp { a: f64 },
    /// `ln(1 + w)` for `w >= 0`, `-inf` below.
    Log,
    /// Non-concave step: `1` once wealth reaches the threshold, else `0`.
    Digital { threshold: f64 },
    /// Arbitrary per-leaf utility `(leaf index, wealth) -> value`.
    Custom(CustomUtility),
}

impl std::fmt::Debug for UtilityFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UtilityFunction::Linear => write!(f, "Linear"),
            UtilityFunction::Exp { a } => write!(f, "Exp({a})"),
            UtilityFunction::Log => write!(f, "Log"),
            UtilityFunction::Digital { threshold } => write!(f, "Digital({threshold})"),
            UtilityFunction::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl UtilityFunction {
    /// Infeasible wealth is absorbing: `U(-inf) = -inf` for every kind.
    pub fn eval(&self, leaf_idx: usize, wealth: f64) -> f64 {
        if wealth == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        match self {
            UtilityFunction::Linear => wealth,
            UtilityFunction::Exp { a } => -(-a * wealth).exp(),
            UtilityFunction::Log => {
                if wealth >= 0.0 {
                    (1.0 + wealth).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            UtilityFunction::Digital { threshold } => {
                if wealth >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            UtilityFunction::Custom(f) => f(leaf_idx, wealth),
        }
    }
}

/// Monotonicity audit of a utility function on a wealth grid.
#[derive(Debug, Clone)]
pub struct UtilityAxiomReport {
    pub nondecreasing: bool,
    /// `(leaf, w_low, w_high, u_low, u_high)` with `u_low > u_high`.
    pub violations: Vec<(usize, f64, f64, f64, f64)>,
}

pub fn check_utility_axioms(
    u: &UtilityFunction,
    tree: &ScenarioTree,
    wealth_grid: &[f64],
) -> UtilityAxiomReport {
    let mut violations = Vec::new();
    for li in 0..tree.leaves().len() {
        for w in wealth_grid.windows(2) {
            let (a, b) = (u.eval(li, w[0]), u.eval(li, w[1]));
            let ok = a <= b || (a == f64::NEG_INFINITY && b == f64::NEG_INFINITY);
            if !ok {
                violations.push((li, w[0], w[1], a, b));
            }
        }
    }
    UtilityAxiomReport { nondecreasing: violations.is_empty(), violations }
}

/// Box and grid for the maximization programs.
#[derive(Debug, Clone)]
pub struct UtilityConfig {
    pub box_radius: f64,
    pub grid_points: usize,
    /// Cap on the implied strategy count.
    pub budget: u128,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig { box_radius: 2.0, grid_points: 11, budget: 200_000 }
    }
}

/// Expected utility of per-leaf wealths, reduced as a subtree-shaped sum of
/// `P(leaf) * U(leaf, wealth)`. Both optimizers share this reduction so
/// their values agree bitwise.
pub fn expected_utility(tree: &ScenarioTree, u: &UtilityFunction, wealth: &[f64]) -> f64 {
    fn rec(tree: &ScenarioTree, u: &UtilityFunction, wealth: &[f64], node: NodeId) -> f64 {
        if tree.is_leaf(node) {
            let li = tree.leaf_index(node).unwrap();
            let uv = u.eval(li, wealth[li]);
            if uv == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            return tree.leaf_prob(li) * uv;
        }
        let mut acc = 0.0;
        for &c in &tree.node(node).children {
            let v = rec(tree, u, wealth, c);
            if v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            acc += v;
        }
        acc
    }
    rec(tree, u, wealth, tree.root())
}

/// Maximizes `E[U(V(theta))]` over grid-adapted strategies in the box.
///
/// Additive models run a backward dynamic program over `(node, previous
/// position, accumulated wealth)`; wealth states are carried exactly (a
/// finite grid reaches finitely many values) and keyed by their bits, so
/// there is no discretization error. Other models are enumerated.
/// Strategies hitting `-inf` on any leaf are excluded; ties break to the
/// lexicographically smallest strategy.
pub fn maximize_utility(
    model: &MarketModel,
    u: &UtilityFunction,
    cfg: &UtilityConfig,
) -> Result<(f64, AdaptedStrategy), UtilityError> {
    if model.flags().additive {
        dp_maximize(model, u, cfg)
    } else {
        brute_force_value(model, u, cfg)
    }
}

/// Exhaustive maximization over the same grid; the oracle the dynamic
/// program must match exactly.
pub fn brute_force_value(
    model: &MarketModel,
    u: &UtilityFunction,
    cfg: &UtilityConfig,
) -> Result<(f64, AdaptedStrategy), UtilityError> {
    let tree = model.tree().clone();
    let axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
    let points = axis_points(&axis, tree.dim());
    let grids: BTreeMap<NodeId, Vec<Vec<f64>>> =
        tree.decision_nodes().into_iter().map(|n| (n, points.clone())).collect();
    let iter = AdaptedGridIter::new(&tree, &grids, cfg.budget)?;
    let mut best = f64::NEG_INFINITY;
    let mut witness = None;
    for strategy in iter {
        let wealth = model.evaluate_hat(&strategy);
        let value = expected_utility(&tree, u, &wealth);
        if value > best {
            best = value;
            witness = Some(strategy);
        }
    }
    match witness {
        Some(w) if best > f64::NEG_INFINITY => Ok((best, w)),
        _ => Err(UtilityError::AllInfeasible),
    }
}

fn dp_maximize(
    model: &MarketModel,
    u: &UtilityFunction,
    cfg: &UtilityConfig,
) -> Result<(f64, AdaptedStrategy), UtilityError> {
    let tree = model.tree().clone();
    let axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
    let points = axis_points(&axis, tree.dim());

    // Same precondition as the oracle: the implied enumeration must fit.
    let count: u128 =
        tree.decision_nodes().iter().map(|_| points.len() as u128).product();
    if count > cfg.budget {
        return Err(UtilityError::Budget(TreeError::BudgetExceeded { count, cap: cfg.budget }));
    }

    // Subtree value: sum over leaves below of P(leaf) * U(leaf, wealth).
    // prev_idx == usize::MAX encodes the initial zero position at the root;
    // wealth states are hash-consed by their exact bits.
    struct Dp<'a> {
        model: &'a MarketModel,
        tree: Arc<ScenarioTree>,
        u: &'a UtilityFunction,
        points: &'a [Vec<f64>],
        memo: HashMap<(NodeId, usize, u64), (f64, usize)>,
    }
    impl Dp<'_> {
        fn subtree(&mut self, node: NodeId, prev_idx: usize, wealth: f64) -> (f64, usize) {
            let key = (node, prev_idx, wealth.to_bits());
            if let Some(&hit) = self.memo.get(&key) {
                return hit;
            }
            let t = self.tree.node(node).time;
            let children = self.tree.node(node).children.clone();
            let prev: &[f64] = if prev_idx == usize::MAX { &[] } else { &self.points[prev_idx] };
            let mut best = f64::NEG_INFINITY;
            let mut best_idx = 0usize;
            for (theta_idx, theta) in self.points.iter().enumerate() {
                let mut total = 0.0;
                for &c in &children {
                    let step = self.model.additive_step(t, node, c, theta, prev);
                    if step == f64::NEG_INFINITY {
                        total = f64::NEG_INFINITY;
                        break;
                    }
                    let w_child = wealth + step;
                    let v = if self.tree.is_leaf(c) {
                        let li = self.tree.leaf_index(c).unwrap();
                        let uv = self.u.eval(li, w_child);
                        if uv == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            self.tree.leaf_prob(li) * uv
                        }
                    } else {
                        self.subtree(c, theta_idx, w_child).0
                    };
                    if v == f64::NEG_INFINITY {
                        total = f64::NEG_INFINITY;
                        break;
                    }
                    total += v;
                }
                if total > best {
                    best = total;
                    best_idx = theta_idx;
                }
            }
            self.memo.insert(key, (best, best_idx));
            (best, best_idx)
        }
    }

    let mut dp = Dp { model, tree: tree.clone(), u, points: &points, memo: HashMap::new() };
    let (value, _) = dp.subtree(tree.root(), usize::MAX, 0.0);
    if value == f64::NEG_INFINITY {
        return Err(UtilityError::AllInfeasible);
    }

    // Backtrace the witness, replaying wealth along each path.
    let mut witness = AdaptedStrategy::zero(&tree);
    let mut stack: Vec<(NodeId, usize, f64)> = vec![(tree.root(), usize::MAX, 0.0)];
    while let Some((node, prev_idx, wealth)) = stack.pop() {
        let (_, theta_idx) = dp.subtree(node, prev_idx, wealth);
        witness.set(node, points[theta_idx].clone());
        let t = tree.node(node).time;
        let prev: &[f64] = if prev_idx == usize::MAX { &[] } else { &points[prev_idx] };
        for &c in &tree.node(node).children {
            if !tree.is_leaf(c) {
                let step = model.additive_step(t, node, c, &points[theta_idx], prev);
                stack.push((c, theta_idx, wealth + step));
            }
        }
    }
    Ok((value, witness))
}
