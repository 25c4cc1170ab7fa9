//! Superhedging: the set of superhedgeable claims, membership, the price
//! `rho(f)` (least cash making `f - p` superhedgeable), per-step strategy
//! bounds, and a closedness probe.
//!
//! Additive models are priced by backward dynamic programming over
//! `(node, previous position)` on a strategy grid; everything else falls
//! back to budgeted exhaustive enumeration. Grids are user-supplied boxes
//! standing in for the almost-sure strategy bound that no-arbitrage
//! guarantees but does not compute.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{axis_points, refine_axis, symmetric_axis};
use crate::model::{CostFunction, MarketModel, ModelKind};
use crate::tree::{AdaptedGridIter, AdaptedStrategy, NodeId, TreeError};

#[derive(Debug, Error)]
pub enum SuperhedgeError {
    #[error("grid too coarse: price moved {gap:e} on the last refinement (tol {tol:e})")]
    GridTooCoarse { gap: f64, tol: f64 },
    #[error("no strategy on the grid superhedges the claim")]
    EmptyFeasibleSet,
    #[error(transparent)]
    Budget(#[from] TreeError),
}

/// Strategy box and grid for the pricing programs.
#[derive(Debug, Clone)]
pub struct SuperhedgeConfig {
    /// Positions range over `[-box_radius, box_radius]` per coordinate.
    pub box_radius: f64,
    /// Points per axis (0 is always included).
    pub grid_points: usize,
    /// Cap on enumerated strategies for the generic path.
    pub budget: u128,
    /// Slack accepted when testing superhedge feasibility.
    pub feas_tol: f64,
}

impl Default for SuperhedgeConfig {
    fn default() -> Self {
        SuperhedgeConfig { box_radius: 5.0, grid_points: 101, budget: 2_000_000, feas_tol: 1e-9 }
    }
}

/// Price, witness, and audit data for one superhedging run.
#[derive(Debug, Clone)]
pub struct SuperhedgeResult {
    /// `rho(f)`; `+inf` when no grid strategy is feasible at any price.
    pub price: f64,
    pub witness: Option<AdaptedStrategy>,
    /// Per-leaf `price + V(witness) - f`, nonnegative up to tolerance.
    pub slack: Vec<f64>,
    /// `[price - L*h/2, price]` when a Lipschitz constant is available.
    pub price_interval: Option<(f64, f64)>,
    /// The axis actually used (after 0-insertion).
    pub axis: Vec<f64>,
}

impl SuperhedgeResult {
    /// Least witness slack over leaves (`+inf` with no witness).
    pub fn min_slack(&self) -> f64 {
        self.slack.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Superhedging price of the claim `f` (per leaf, leaf order) over
/// grid-adapted strategies in the box.
///
/// `rho = min_theta max_leaf (f - V(theta))`, with the additive dynamic
/// program `W(node, prev) = min_theta max_child [g(theta, prev) -
/// <theta, dS_child> + W(child, theta)]`, `W(leaf) = f(leaf)`, `rho =
/// W(root, 0)`. Argmin ties break to the lexicographically smallest
/// position so witnesses are reproducible.
pub fn superhedge_price(
    model: &MarketModel,
    claim: &[f64],
    cfg: &SuperhedgeConfig,
) -> Result<SuperhedgeResult, SuperhedgeError> {
    let axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
    price_on_axis(model, claim, &axis, cfg)
}

/// Doubles the grid until the price stabilizes; the refined axis is a
/// superset of the coarse one, so the price sequence is non-increasing.
pub fn superhedge_price_refined(
    model: &MarketModel,
    claim: &[f64],
    cfg: &SuperhedgeConfig,
    max_rounds: usize,
    stab_tol: f64,
) -> Result<SuperhedgeResult, SuperhedgeError> {
    let mut axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
    let mut result = price_on_axis(model, claim, &axis, cfg)?;
    let mut gap = f64::INFINITY;
    for _ in 0..max_rounds {
        axis = refine_axis(&axis);
        let refined = price_on_axis(model, claim, &axis, cfg)?;
        gap = (result.price - refined.price).abs();
        result = refined;
        if gap <= stab_tol {
            return Ok(result);
        }
    }
    if gap <= stab_tol {
        Ok(result)
    } else {
        Err(SuperhedgeError::GridTooCoarse { gap, tol: stab_tol })
    }
}

fn price_on_axis(
    model: &MarketModel,
    claim: &[f64],
    axis: &[f64],
    cfg: &SuperhedgeConfig,
) -> Result<SuperhedgeResult, SuperhedgeError> {
    let tree = model.tree().clone();
    assert_eq!(claim.len(), tree.leaves().len(), "one claim value per leaf");
    let points = axis_points(axis, tree.dim());

    let (price, witness) = if model.flags().additive {
        dp_price(model, claim, &points)
    } else {
        enumeration_price(model, claim, &points, cfg.budget)?
    };

    let slack = match &witness {
        Some(w) => {
            let values = model.evaluate_hat(w);
            values.iter().zip(claim).map(|(&v, &f)| price + v - f).collect()
        }
        None => Vec::new(),
    };
    let spacing = axis.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    let price_interval = lipschitz_constant(model)
        .filter(|_| price.is_finite())
        .map(|l| (price - l * spacing * 0.5, price));
    Ok(SuperhedgeResult { price, witness, slack, price_interval, axis: axis.to_vec() })
}

/// Conservative sup-norm Lipschitz constant of `V` for models whose costs
/// are at most linear in the trade (frictionless and proportional).
fn lipschitz_constant(model: &MarketModel) -> Option<f64> {
    let tree = model.tree();
    let ModelKind::Additive { prices, costs } = model.kind() else {
        return None;
    };
    if !costs
        .iter()
        .all(|c| matches!(c, CostFunction::Zero | CostFunction::Proportional(_)))
    {
        return None;
    }
    let mut worst = 0.0f64;
    for li in 0..tree.leaves().len() {
        let path = tree.path(li);
        let mut l = 0.0;
        for t in 0..tree.horizon() {
            let ds_l1: f64 = (0..tree.dim())
                .map(|i| (prices[path[t + 1]][i] - prices[path[t]][i]).abs())
                .sum();
            let lam = match &costs[t] {
                CostFunction::Proportional(lambda) => lambda[path[t]],
                _ => 0.0,
            };
            l += ds_l1 + 2.0 * lam * tree.dim() as f64;
        }
        worst = worst.max(l);
    }
    Some(worst)
}

/// Backward dynamic program over `(node, previous-position index)`.
fn dp_price(
    model: &MarketModel,
    claim: &[f64],
    points: &[Vec<f64>],
) -> (f64, Option<AdaptedStrategy>) {
    let tree = model.tree().clone();
    let zero_idx = points
        .iter()
        .position(|p| p.iter().all(|&c| c == 0.0))
        .expect("strategy grid contains the zero position");

    // cash[(node, prev_idx)] = least cash needed from this node on.
    let mut cash: HashMap<(NodeId, usize), f64> = HashMap::new();
    let mut choice: HashMap<(NodeId, usize), usize> = HashMap::new();

    // Decision nodes in decreasing time, so children are always ready.
    let mut decision = tree.decision_nodes();
    decision.sort_by_key(|&n| std::cmp::Reverse(tree.node(n).time));

    for &node in &decision {
        let t = tree.node(node).time;
        let children = tree.node(node).children.clone();
        let prev_candidates: Vec<usize> =
            if node == tree.root() { vec![zero_idx] } else { (0..points.len()).collect() };
        for prev_idx in prev_candidates {
            let prev = if node == tree.root() { &[][..] } else { &points[prev_idx] };
            let mut best = f64::INFINITY;
            let mut best_idx = 0usize;
            for (theta_idx, theta) in points.iter().enumerate() {
                let mut need = f64::NEG_INFINITY;
                for &c in &children {
                    let step = model.additive_step(t, node, c, theta, prev);
                    if step == f64::NEG_INFINITY {
                        need = f64::INFINITY;
                        break;
                    }
                    let tail = if tree.is_leaf(c) {
                        claim[tree.leaf_index(c).unwrap()]
                    } else {
                        cash[&(c, theta_idx)]
                    };
                    let candidate = tail - step;
                    if candidate > need {
                        need = candidate;
                    }
                }
                if need < best {
                    best = need;
                    best_idx = theta_idx;
                }
            }
            cash.insert((node, prev_idx), best);
            choice.insert((node, prev_idx), best_idx);
        }
    }

    let price = cash[&(tree.root(), zero_idx)];
    if !price.is_finite() {
        return (f64::INFINITY, None);
    }
    // Backtrace the witness from the root.
    let mut witness = AdaptedStrategy::zero(&tree);
    let mut stack = vec![(tree.root(), zero_idx)];
    while let Some((node, prev_idx)) = stack.pop() {
        let theta_idx = choice[&(node, prev_idx)];
        witness.set(node, points[theta_idx].clone());
        for &c in &tree.node(node).children {
            if !tree.is_leaf(c) {
                stack.push((c, theta_idx));
            }
        }
    }
    (price, Some(witness))
}

/// Exhaustive minimization over grid-adapted strategies; first minimum in
/// lexicographic enumeration order wins, matching the DP tie-break.
fn enumeration_price(
    model: &MarketModel,
    claim: &[f64],
    points: &[Vec<f64>],
    budget: u128,
) -> Result<(f64, Option<AdaptedStrategy>), SuperhedgeError> {
    let tree = model.tree().clone();
    let grids: BTreeMap<NodeId, Vec<Vec<f64>>> =
        tree.decision_nodes().into_iter().map(|n| (n, points.to_vec())).collect();
    let iter = AdaptedGridIter::new(&tree, &grids, budget)?;
    let mut best = f64::INFINITY;
    let mut witness = None;
    for strategy in iter {
        let values = model.evaluate_hat(&strategy);
        let mut need = f64::NEG_INFINITY;
        for (li, &v) in values.iter().enumerate() {
            let candidate = if v == f64::NEG_INFINITY { f64::INFINITY } else { claim[li] - v };
            if candidate > need {
                need = candidate;
            }
        }
        if need < best {
            best = need;
            witness = Some(strategy);
        }
    }
    if best.is_finite() {
        Ok((best, witness))
    } else {
        Ok((f64::INFINITY, None))
    }
}

/// Membership in the superhedgeable set: true iff some grid strategy
/// dominates the claim at every leaf, equivalently `rho(claim) <= feas_tol`.
pub fn superhedge_feasible(
    model: &MarketModel,
    claim: &[f64],
    cfg: &SuperhedgeConfig,
) -> Result<(bool, Option<AdaptedStrategy>), SuperhedgeError> {
    let result = superhedge_price(model, claim, cfg)?;
    if result.price <= cfg.feas_tol {
        Ok((true, result.witness))
    } else {
        Ok((false, None))
    }
}

/// Per-atom strategy bounds over the superhedgers of `f` within the box.
#[derive(Debug, Clone)]
pub struct StrategyBounds {
    /// `(time, node) -> max sup-norm of the time-t position` over feasible
    /// strategies, within box and grid.
    pub per_atom: BTreeMap<(usize, NodeId), f64>,
    /// Per leaf: sum of the per-atom bounds along its path.
    pub per_leaf_total: Vec<f64>,
    pub feasible_count: usize,
}

/// Enumerates `A_f` (grid strategies superhedging `f` up to `feas_tol`) and
/// reports, per atom of each `F_t`, the largest position norm used. The
/// bounds hold within the box and grid only.
pub fn strategy_bounds(
    model: &MarketModel,
    claim: &[f64],
    cfg: &SuperhedgeConfig,
) -> Result<StrategyBounds, SuperhedgeError> {
    let tree = model.tree().clone();
    let axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
    let points = axis_points(&axis, tree.dim());
    let grids: BTreeMap<NodeId, Vec<Vec<f64>>> =
        tree.decision_nodes().into_iter().map(|n| (n, points.clone())).collect();
    let iter = AdaptedGridIter::new(&tree, &grids, cfg.budget)?;

    let mut per_atom: BTreeMap<(usize, NodeId), f64> = tree
        .decision_nodes()
        .into_iter()
        .map(|n| ((tree.node(n).time, n), f64::NEG_INFINITY))
        .collect();
    let mut feasible_count = 0usize;
    for strategy in iter {
        let values = model.evaluate_hat(&strategy);
        if values.iter().zip(claim).all(|(&v, &f)| v >= f - cfg.feas_tol) {
            feasible_count += 1;
            for node in tree.decision_nodes() {
                let t = tree.node(node).time;
                let norm = strategy.get(node).iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                let entry = per_atom.get_mut(&(t, node)).unwrap();
                if norm > *entry {
                    *entry = norm;
                }
            }
        }
    }
    if feasible_count == 0 {
        return Err(SuperhedgeError::EmptyFeasibleSet);
    }
    let per_leaf_total = (0..tree.leaves().len())
        .map(|li| {
            let path = tree.path(li);
            (0..tree.horizon()).map(|t| per_atom[&(t, path[t])]).sum()
        })
        .collect();
    Ok(StrategyBounds { per_atom, per_leaf_total, feasible_count })
}

/// Closedness probe: convergent sequences inside the superhedgeable set
/// must have superhedgeable limits.
#[derive(Debug, Clone)]
pub struct ClosednessReport {
    pub sequences: usize,
    pub violations: Vec<ClosednessViolation>,
}

#[derive(Debug, Clone)]
pub struct ClosednessViolation {
    pub sequence: usize,
    pub limit: Vec<f64>,
    pub price_at_limit: f64,
}

impl ClosednessReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Generates `sequences` convergent sequences `h_k` inside the claim set
/// (each dominated by the gains of a fixed grid strategy, or of the form
/// `f - rho(f) - 1/k`) and verifies the limit is still superhedgeable.
pub fn closedness_probe(
    model: &MarketModel,
    cfg: &SuperhedgeConfig,
    sequences: usize,
    seed: u64,
) -> Result<ClosednessReport, SuperhedgeError> {
    let tree = model.tree().clone();
    let axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
    let points = axis_points(&axis, tree.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for s in 0..sequences {
        let limit: Vec<f64> = if s % 2 == 0 {
            // Attained pattern: V(theta*) minus a nonnegative slack.
            let strategy = AdaptedStrategy::from_fn(&tree, |_| {
                points[rng.random_range(0..points.len())].clone()
            });
            let values = model.evaluate_hat(&strategy);
            if values.contains(&f64::NEG_INFINITY) {
                continue;
            }
            let slack: Vec<f64> =
                (0..values.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            values.iter().zip(&slack).map(|(&v, &sl)| v - sl).collect()
        } else {
            // Price-shifted pattern: f - rho(f) is the boundary claim reached
            // by the sequence f - rho(f) - 1/k.
            let f: Vec<f64> =
                (0..tree.leaves().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rho = superhedge_price(model, &f, cfg)?.price;
            if !rho.is_finite() {
                continue;
            }
            f.iter().map(|&fi| fi - rho).collect()
        };
        // The sequence h_k = limit - 1/k sits in the set; check the limit.
        let tol = cfg.feas_tol.max(1e-7);
        let feasible_cfg = SuperhedgeConfig { feas_tol: tol, ..cfg.clone() };
        let (ok, _) = superhedge_feasible(model, &limit, &feasible_cfg)?;
        if !ok {
            let price = superhedge_price(model, &limit, cfg)?.price;
            violations.push(ClosednessViolation { sequence: s, limit, price_at_limit: price });
        }
    }
    Ok(ClosednessReport { sequences, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;

    fn call_claim() -> Vec<f64> {
        // Call struck at 1 on the binomial tree: payoffs (1, 0).
        vec![1.0, 0.0]
    }

    #[test]
    fn binomial_call_price_is_one_third() {
        // Exact hedge: p + theta * dS >= f binds at both leaves:
        // p + theta = 1 and p - 0.5 theta = 0 give theta = 2/3, p = 1/3.
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 7, ..Default::default() };
        // Axis {-2,...,2/3,...}: contains the exact hedge.
        let result = superhedge_price(&model, &call_claim(), &cfg).unwrap();
        assert!((result.price - 1.0 / 3.0).abs() < 1e-12, "price {}", result.price);
        let w = result.witness.as_ref().unwrap();
        assert!((w.get(0)[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(result.min_slack() >= -1e-9);
    }

    #[test]
    fn zero_claim_prices_to_zero_with_zero_witness() {
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 1.0, grid_points: 11, ..Default::default() };
        let result = superhedge_price(&model, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(result.price, 0.0);
        assert!(result.witness.as_ref().unwrap().is_zero());
    }

    #[test]
    fn fixed_cost_call_price_adds_the_fee() {
        // Trading pays the fee once: the hedge at 2/3 costs 1/3 + 0.1; doing
        // nothing costs 1. The cheaper branch wins.
        let (_, model) = binomial_fixed_cost(0.1);
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 1201, ..Default::default() };
        let result = superhedge_price(&model, &call_claim(), &cfg).unwrap();
        let oracle = enumeration_oracle(&model, &call_claim(), &cfg);
        assert!((result.price - oracle).abs() < 1e-12, "dp {} vs oracle {oracle}", result.price);
        assert!((result.price - (1.0 / 3.0 + 0.1)).abs() < 2e-3, "price {}", result.price);
    }

    fn enumeration_oracle(model: &MarketModel, claim: &[f64], cfg: &SuperhedgeConfig) -> f64 {
        let axis = symmetric_axis(cfg.box_radius, cfg.grid_points);
        let points = axis_points(&axis, model.tree().dim());
        enumeration_price(model, claim, &points, cfg.budget).unwrap().0
    }

    #[test]
    fn dp_matches_enumeration_on_two_step_tree() {
        let tree = crate::tree::ScenarioTree::uniform(1, 2, 2).unwrap();
        let mut prices = vec![vec![1.0]; tree.num_nodes()];
        for (i, node) in tree.nodes_at(1).into_iter().enumerate() {
            prices[node] = vec![if i == 0 { 1.4 } else { 0.8 }];
        }
        for &leaf in tree.leaves() {
            let parent = tree.node(leaf).parent.unwrap();
            let sibling_rank =
                tree.node(parent).children.iter().position(|&c| c == leaf).unwrap();
            prices[leaf] = vec![prices[parent][0] * if sibling_rank == 0 { 1.5 } else { 0.6 }];
        }
        let model = crate::model::frictionless(&tree, prices).unwrap();
        let claim: Vec<f64> = (0..4).map(|i| (i as f64) * 0.3 - 0.5).collect();
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 9, ..Default::default() };
        let dp = superhedge_price(&model, &claim, &cfg).unwrap();
        let brute = enumeration_oracle(&model, &claim, &cfg);
        assert!((dp.price - brute).abs() < 1e-9, "dp {} vs brute {brute}", dp.price);
    }

    #[test]
    fn feasibility_matches_price_sign() {
        let (tree, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 9, ..Default::default() };
        // Attained claim: gains of a fixed grid strategy.
        let theta = AdaptedStrategy::constant(&tree, &[0.5]);
        let attained = model.evaluate_hat(&theta);
        let (ok, w) = superhedge_feasible(&model, &attained, &cfg).unwrap();
        assert!(ok);
        assert!(w.is_some());
        // Constant +1 is not superhedgeable at zero cost under no-arbitrage.
        let (ok, _) = superhedge_feasible(&model, &[1.0, 1.0], &cfg).unwrap();
        assert!(!ok);
        // Constant -1 is dominated by doing nothing.
        let (ok, w) = superhedge_feasible(&model, &[-1.0, -1.0], &cfg).unwrap();
        assert!(ok);
        assert!(w.unwrap().is_zero());
    }

    #[test]
    fn infeasible_constraint_prices_to_infinity() {
        // Position forced to {0} but the claim requires gains: no price works.
        let (tree, _) = binomial_frictionless();
        let costs = vec![crate::model::CostFunction::constraint_const(
            &tree,
            crate::model::BoxUnion::single(vec![5.0], vec![5.0]),
        )];
        let model =
            crate::model::additive_costs(&tree, binomial_prices(&tree), costs).unwrap();
        let cfg = SuperhedgeConfig { box_radius: 1.0, grid_points: 5, ..Default::default() };
        let result = superhedge_price(&model, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(result.price, f64::INFINITY);
        assert!(result.witness.is_none());
    }

    #[test]
    fn translation_identity_exact_on_dyadic_data() {
        // Dyadic prices, claims, and grid keep every DP intermediate exact,
        // so the translation identity holds bitwise.
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 4.0, grid_points: 257, ..Default::default() };
        let f = call_claim();
        let base = superhedge_price(&model, &f, &cfg).unwrap().price;
        for c in [1.0, 0.25, -0.5, 2.0] {
            let shifted: Vec<f64> = f.iter().map(|&x| x + c).collect();
            let rho = superhedge_price(&model, &shifted, &cfg).unwrap().price;
            assert_eq!(rho, base + c, "c = {c}");
        }
    }

    #[test]
    fn monotone_in_the_claim() {
        let (_, model) = binomial_proportional(0.1);
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 21, ..Default::default() };
        let f = vec![0.3, -0.2];
        let g = vec![0.5, -0.1]; // g >= f
        let rf = superhedge_price(&model, &f, &cfg).unwrap().price;
        let rg = superhedge_price(&model, &g, &cfg).unwrap().price;
        assert!(rf <= rg + 1e-12);
    }

    #[test]
    fn refinement_never_increases_price() {
        let (_, model) = binomial_fixed_cost(0.1);
        let f = call_claim();
        let mut axis = symmetric_axis(2.0, 9);
        let cfg = SuperhedgeConfig::default();
        let mut prev = f64::INFINITY;
        for _ in 0..5 {
            let r = price_on_axis(&model, &f, &axis, &cfg).unwrap();
            assert!(r.price <= prev + 1e-15, "{} then {}", prev, r.price);
            prev = r.price;
            axis = refine_axis(&axis);
        }
    }

    #[test]
    fn refined_price_stabilizes() {
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 7, ..Default::default() };
        let r = superhedge_price_refined(&model, &call_claim(), &cfg, 8, 1e-9).unwrap();
        assert!((r.price - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn price_interval_brackets_continuum_price() {
        let (_, model) = binomial_frictionless();
        // Coarse grid missing 2/3: the grid price overshoots but the
        // Lipschitz interval still brackets the true price 1/3.
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 11, ..Default::default() };
        let r = superhedge_price(&model, &call_claim(), &cfg).unwrap();
        let (lo, hi) = r.price_interval.unwrap();
        assert!(lo <= 1.0 / 3.0 + 1e-12 && 1.0 / 3.0 <= hi + 1e-12, "[{lo}, {hi}]");
    }

    #[test]
    fn bounds_identify_unique_superhedger() {
        // At the exact price the only superhedger on the grid is 2/3.
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig {
            box_radius: 2.0,
            grid_points: 7,
            feas_tol: 1e-9,
            ..Default::default()
        };
        let f: Vec<f64> = call_claim().iter().map(|&x| x - 1.0 / 3.0).collect();
        let bounds = strategy_bounds(&model, &f, &cfg).unwrap();
        assert_eq!(bounds.feasible_count, 1);
        assert!((bounds.per_atom[&(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        for &k in &bounds.per_leaf_total {
            assert!((k - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_saturate_box_for_huge_negative_claim() {
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 1.0, grid_points: 5, ..Default::default() };
        let bounds = strategy_bounds(&model, &[-1e6, -1e6], &cfg).unwrap();
        assert_eq!(bounds.per_atom[&(0, 0)], 1.0);
    }

    #[test]
    fn bounds_forced_zero_under_point_constraint() {
        let (tree, _) = binomial_frictionless();
        let costs = vec![crate::model::CostFunction::constraint_const(
            &tree,
            crate::model::BoxUnion::single(vec![0.0], vec![0.0]),
        )];
        let model = crate::model::additive_costs(&tree, binomial_prices(&tree), costs).unwrap();
        let cfg = SuperhedgeConfig { box_radius: 1.0, grid_points: 5, ..Default::default() };
        let bounds = strategy_bounds(&model, &[-1.0, -1.0], &cfg).unwrap();
        assert_eq!(bounds.per_atom[&(0, 0)], 0.0);
    }

    #[test]
    fn empty_feasible_set_reported() {
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 1.0, grid_points: 5, ..Default::default() };
        assert!(matches!(
            strategy_bounds(&model, &[10.0, 10.0], &cfg),
            Err(SuperhedgeError::EmptyFeasibleSet)
        ));
    }

    #[test]
    fn closedness_probe_clean() {
        let (_, model) = binomial_frictionless();
        let cfg = SuperhedgeConfig { box_radius: 2.0, grid_points: 9, ..Default::default() };
        let report = closedness_probe(&model, &cfg, 40, 31).unwrap();
        assert!(report.ok(), "violations: {:?}", report.violations.first());
    }
}
