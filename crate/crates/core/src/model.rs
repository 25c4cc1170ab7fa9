//! Market models: the gains-from-trading abstraction `V(omega, x)` and the
//! built-in examples (frictionless, additive transaction costs, limit order
//! book impact, consumption, the two-state homogeneous model, and the
//! vector-valued currency-exchange model).
//!
//! Every model satisfies the two axioms checked by [`crate::represent`]:
//! doing nothing earns exactly zero (normalization), and gains depend on the
//! strategy only through its values along the realized path (locality).
//! The value `-inf` marks infeasible strategies and propagates absorbingly.

use std::sync::Arc;

use thiserror::Error;

use crate::tree::{AdaptedStrategy, NodeId, ScenarioTree};

/// Prices (or any per-node vector data), indexed by node id.
pub type Prices = Vec<Vec<f64>>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative order not allowed: transfer matrices must be componentwise >= 0")]
    NegativeOrderNotAllowed,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Structural metadata consumed by the recession, superhedging, and
/// arbitrage modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelFlags {
    /// `V(omega, a*x) = a * V(omega, x)` for `a > 0`.
    pub positively_homogeneous: bool,
    /// `V = sum_t [<x_t, dS_{t+1}> - g_t(...)]`; enables the dynamic programs.
    pub additive: bool,
    /// A closed-form recession model is available.
    pub has_analytic_recession: bool,
}

/// A closed box in `R^d`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ClosedBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        ClosedBox { lo, hi }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }

    /// Membership of a direction in the horizon (recession) cone of the box.
    pub fn horizon_contains(&self, z: &[f64], tol: f64) -> bool {
        z.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(&zi, (&lo, &hi))| {
                let down_ok = lo == f64::NEG_INFINITY || zi >= -tol;
                let up_ok = hi == f64::INFINITY || zi <= tol;
                down_ok && up_ok
            })
    }
}

/// Finite union of closed boxes; the exactly-computable constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxUnion {
    pub boxes: Vec<ClosedBox>,
}

impl BoxUnion {
    pub fn single(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        BoxUnion { boxes: vec![ClosedBox::new(lo, hi)] }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    /// Horizon cone of a finite union is the union of the boxes' horizon cones.
    pub fn horizon_contains(&self, z: &[f64], tol: f64) -> bool {
        self.boxes.iter().any(|b| b.horizon_contains(z, tol))
    }
}

/// Per-step trading friction.
#[derive(Debug, Clone)]
pub enum CostFunction {
    Zero,
    /// `g(trade) = lambda_node * |trade|_1`, rate per node id.
    Proportional(Vec<f64>),
    /// Flat fee per rebalancing, regardless of size.
    Fixed(f64),
    /// Allowed position set per node id; positions off it are infeasible.
    Constraint(Vec<BoxUnion>),
}

impl CostFunction {
    pub fn proportional_const(tree: &ScenarioTree, lambda: f64) -> Self {
        CostFunction::Proportional(vec![lambda; tree.num_nodes()])
    }

    pub fn constraint_const(tree: &ScenarioTree, set: BoxUnion) -> Self {
        CostFunction::Constraint(vec![set; tree.num_nodes()])
    }
}

/// Utility over a consumption stream `(c_1, ..., c_T)`, normalized to 0 at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsumptionUtility {
    /// Total consumption.
    Sum,
    /// `sum_t sqrt(c_t)`; concave with infinite marginal utility at 0.
    Sqrt,
}

impl ConsumptionUtility {
    pub fn eval(&self, c: &[f64]) -> f64 {
        match self {
            ConsumptionUtility::Sum => c.iter().sum(),
            ConsumptionUtility::Sqrt => c.iter().map(|&x| x.sqrt()).sum(),
        }
    }
}

type CustomEval = Arc<dyn Fn(&ScenarioTree, usize, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ModelKind {
    /// `V = sum_t <x_t, S_{t+1} - S_t>` plus per-step costs.
    Additive { prices: Prices, costs: Vec<CostFunction> },
    /// Price-impact model: quadratic execution cost and decaying impact state.
    Lob { kappa: f64, depth: Vec<f64>, prices: Vec<f64> },
    /// Trade in the frictionless market and consume; value is utility of the
    /// consumption stream, `-inf` unless the terminal position is solvent.
    Consumption { prices: Prices, utility: ConsumptionUtility, initial_wealth: f64 },
    /// One-step two-scenario model: `|x|` on the first leaf, `-|x|` on the second.
    TwoState,
    /// Arbitrary pathwise evaluator `(tree, leaf index, path vector) -> value`.
    Custom(CustomEval),
}

impl std::fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Additive { .. } => f.write_str("Additive"),
            ModelKind::Lob { .. } => f.write_str("Lob"),
            ModelKind::Consumption { .. } => f.write_str("Consumption"),
            ModelKind::TwoState => f.write_str("TwoState"),
            ModelKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A scalar market model on a fixed tree: evaluator `(leaf, path vector) ->
/// R u {-inf}` plus structural flags. Immutable and cheap to clone; safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct MarketModel {
    tree: Arc<ScenarioTree>,
    kind: ModelKind,
    flags: ModelFlags,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn l1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

fn validate_prices(tree: &ScenarioTree, prices: &Prices, d: usize) -> Result<(), ModelError> {
    if prices.len() != tree.num_nodes() {
        return Err(ModelError::DimensionMismatch(format!(
            "prices given for {} nodes, tree has {}",
            prices.len(),
            tree.num_nodes()
        )));
    }
    for (id, p) in prices.iter().enumerate() {
        if p.len() != d {
            return Err(ModelError::DimensionMismatch(format!(
                "price at node {id} has dimension {}, expected {d}",
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("non-finite price at node {id}")));
        }
    }
    Ok(())
}

/// Frictionless market driven by the price process `S`.
pub fn frictionless(tree: &Arc<ScenarioTree>, prices: Prices) -> Result<MarketModel, ModelError> {
    let costs = vec![CostFunction::Zero; tree.horizon()];
    additive_costs(tree, prices, costs)
}

/// Frictionless gains minus per-step transaction costs, one
/// [`CostFunction`] per time step `t = 0..T-1`.
pub fn additive_costs(
    tree: &Arc<ScenarioTree>,
    prices: Prices,
    costs: Vec<CostFunction>,
) -> Result<MarketModel, ModelError> {
    validate_prices(tree, &prices, tree.dim())?;
    if costs.len() != tree.horizon() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} cost functions for horizon {}",
            costs.len(),
            tree.horizon()
        )));
    }
    let homogeneous = costs
        .iter()
        .all(|c| matches!(c, CostFunction::Zero | CostFunction::Proportional(_)));
    Ok(MarketModel {
        tree: Arc::clone(tree),
        kind: ModelKind::Additive { prices, costs },
        flags: ModelFlags {
            positively_homogeneous: homogeneous,
            additive: true,
            has_analytic_recession: true,
        },
    })
}

/// Limit-order-book model: scalar position, quadratic execution cost against
/// per-node book depth, and price impact that decays at rate `kappa`.
pub fn limit_order_book(
    tree: &Arc<ScenarioTree>,
    kappa: f64,
    depth: Vec<f64>,
    prices: Vec<f64>,
) -> Result<MarketModel, ModelError> {
    if tree.dim() != 1 {
        return Err(ModelError::DimensionMismatch(
            "limit order book model requires strategy dimension 1".into(),
        ));
    }
    if kappa.is_nan() || kappa <= 0.0 || kappa >= 1.0 {
        return Err(ModelError::InvalidParameter(format!("kappa = {kappa} outside (0, 1)")));
    }
    if depth.len() != tree.num_nodes() || prices.len() != tree.num_nodes() {
        return Err(ModelError::DimensionMismatch(
            "depth and prices must be given at every node".into(),
        ));
    }
    if depth.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(ModelError::InvalidParameter("book depth must be > 0 at every node".into()));
    }
    Ok(MarketModel {
        tree: Arc::clone(tree),
        kind: ModelKind::Lob { kappa, depth, prices },
        flags: ModelFlags {
            positively_homogeneous: false,
            additive: false,
            has_analytic_recession: true,
        },
    })
}

/// Consumption model: per-step decision is `(position in R^{d-1}, consumption)`,
/// the consumption chosen at `t` is paid at `t+1`, and the terminal position
/// must be solvent. Requires `tree.dim() >= 2`.
pub fn consumption_model(
    tree: &Arc<ScenarioTree>,
    prices: Prices,
    utility: ConsumptionUtility,
    initial_wealth: f64,
) -> Result<MarketModel, ModelError> {
    if tree.dim() < 2 {
        return Err(ModelError::DimensionMismatch(
            "consumption model needs dim >= 2 (positions plus a consumption slot)".into(),
        ));
    }
    validate_prices(tree, &prices, tree.dim() - 1)?;
    if initial_wealth.is_nan() || initial_wealth <= 0.0 {
        return Err(ModelError::InvalidParameter("initial wealth must be > 0".into()));
    }
    Ok(MarketModel {
        tree: Arc::clone(tree),
        kind: ModelKind::Consumption { prices, utility, initial_wealth },
        flags: ModelFlags {
            positively_homogeneous: false,
            additive: false,
            has_analytic_recession: false,
        },
    })
}

/// The one-step, two-scenario positively homogeneous model `(|x|, -|x|)`,
/// together with its own tree. No frictionless model dominates it.
pub fn two_state_model() -> (Arc<ScenarioTree>, MarketModel) {
    let tree = ScenarioTree::one_step(1, &[0.5, 0.5]).expect("static tree");
    let model = two_state_on(&tree).expect("tree shape is right by construction");
    (tree, model)
}

/// The two-scenario model on a caller-supplied tree, which must be a
/// one-step, two-leaf tree with scalar positions.
pub fn two_state_on(tree: &Arc<ScenarioTree>) -> Result<MarketModel, ModelError> {
    if tree.horizon() != 1 || tree.leaves().len() != 2 || tree.dim() != 1 {
        return Err(ModelError::DimensionMismatch(
            "the two-state model needs a one-step, two-leaf tree with d = 1".into(),
        ));
    }
    Ok(MarketModel {
        tree: Arc::clone(tree),
        kind: ModelKind::TwoState,
        flags: ModelFlags {
            positively_homogeneous: true,
            additive: false,
            has_analytic_recession: true,
        },
    })
}

impl MarketModel {
    /// Wraps an arbitrary pathwise evaluator; the caller vouches for the flags.
    pub fn custom(
        tree: &Arc<ScenarioTree>,
        flags: ModelFlags,
        eval: impl Fn(&ScenarioTree, usize, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        MarketModel { tree: Arc::clone(tree), kind: ModelKind::Custom(Arc::new(eval)), flags }
    }

    pub fn tree(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    pub fn flags(&self) -> ModelFlags {
        self.flags
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Short human-readable model description.
    pub fn describe(&self) -> &'static str {
        match &self.kind {
            ModelKind::Additive { costs, .. } => {
                if costs.iter().all(|c| matches!(c, CostFunction::Zero)) {
                    "frictionless"
                } else {
                    "additive with costs"
                }
            }
            ModelKind::Lob { .. } => "limit order book",
            ModelKind::Consumption { .. } => "consumption",
            ModelKind::TwoState => "two-state",
            ModelKind::Custom(_) => "custom",
        }
    }

    /// Evaluates `V(omega, x)` at the given leaf index for a path vector of
    /// length `d * T`. Total: returns a finite value or `-inf`, never fails.
    pub fn eval(&self, leaf_idx: usize, x: &[f64]) -> f64 {
        let d = self.tree.dim();
        debug_assert_eq!(x.len(), d * self.tree.horizon());
        match &self.kind {
            ModelKind::Additive { .. } => {
                let mut acc = 0.0;
                for t in 0..self.tree.horizon() {
                    let prev: &[f64] = if t == 0 { &[] } else { &x[(t - 1) * d..t * d] };
                    let step = self.additive_step_inner(t, leaf_idx, &x[t * d..(t + 1) * d], prev);
                    if step == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    acc += step;
                }
                acc
            }
            ModelKind::Lob { kappa, depth, prices } => {
                lob_value(&self.tree, *kappa, depth, Some(prices), leaf_idx, x)
            }
            ModelKind::Consumption { prices, utility, initial_wealth } => {
                let path = self.tree.path(leaf_idx);
                let assets = d - 1;
                let mut wealth = *initial_wealth;
                let mut stream = Vec::with_capacity(self.tree.horizon());
                for t in 0..self.tree.horizon() {
                    let xt = &x[t * d..(t + 1) * d];
                    let consumption = xt[assets];
                    if consumption < 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let ds: Vec<f64> = (0..assets)
                        .map(|i| prices[path[t + 1]][i] - prices[path[t]][i])
                        .collect();
                    wealth += dot(&xt[..assets], &ds) - consumption;
                    stream.push(consumption);
                }
                if wealth < 0.0 {
                    return f64::NEG_INFINITY;
                }
                utility.eval(&stream)
            }
            ModelKind::TwoState => {
                if leaf_idx == 0 {
                    x[0].abs()
                } else {
                    -x[0].abs()
                }
            }
            ModelKind::Custom(f) => f(&self.tree, leaf_idx, x),
        }
    }

    /// One-step gain minus cost for additive models, keyed by the tree edge
    /// `node -> child` at time `t`. The path evaluator and the dynamic
    /// programs all accumulate through this function, so their wealths agree
    /// bitwise. `prev` is the position held before time `t` (an empty slice
    /// means the all-zero initial position).
    pub fn additive_step(
        &self,
        t: usize,
        node: NodeId,
        child: NodeId,
        pos: &[f64],
        prev: &[f64],
    ) -> f64 {
        let ModelKind::Additive { prices, costs } = &self.kind else {
            panic!("additive_step on a non-additive model");
        };
        let ds: Vec<f64> = (0..pos.len()).map(|i| prices[child][i] - prices[node][i]).collect();
        let trade: Vec<f64> = if prev.is_empty() {
            pos.to_vec()
        } else {
            pos.iter().zip(prev).map(|(a, b)| a - b).collect()
        };
        let cost = match &costs[t] {
            CostFunction::Zero => 0.0,
            CostFunction::Proportional(lambda) => lambda[node] * l1(&trade),
            CostFunction::Fixed(fee) => {
                if trade.iter().any(|&c| c != 0.0) {
                    *fee
                } else {
                    0.0
                }
            }
            CostFunction::Constraint(sets) => {
                if sets[node].contains(pos) {
                    0.0
                } else {
                    return f64::NEG_INFINITY;
                }
            }
        };
        dot(pos, &ds) - cost
    }

    fn additive_step_inner(&self, t: usize, leaf_idx: usize, pos: &[f64], prev: &[f64]) -> f64 {
        let path = self.tree.path(leaf_idx);
        self.additive_step(t, path[t], path[t + 1], pos, prev)
    }

    /// Per-leaf values of the strategy: `V(omega, theta(omega))` in leaf order.
    pub fn evaluate_hat(&self, strategy: &AdaptedStrategy) -> Vec<f64> {
        (0..self.tree.leaves().len())
            .map(|li| self.eval(li, &strategy.restrict_to_path(&self.tree, li)))
            .collect()
    }

    /// Numeric local bound `sup { V(omega, x) : |x|_inf <= radius }` at one leaf.
    pub fn local_bound(&self, leaf_idx: usize, radius: f64) -> f64 {
        let n = self.tree.dim() * self.tree.horizon();
        let cfg = crate::grid::BoxSearchConfig {
            points_per_axis: 9,
            refine_rounds: 12,
            budget: 2_000_000,
            ..Default::default()
        };
        let (_, v) = crate::grid::maximize_on_box(&vec![-radius; n], &vec![radius; n], &cfg, |x| {
            self.eval(leaf_idx, x)
        })
        .expect("local bound search within budget");
        v
    }
}

/// Runs the impact-model recursions along a path. With `prices` absent the
/// equilibrium price is held flat, which isolates the quadratic part of the
/// model (the piece that decides the recession behavior).
pub(crate) fn lob_value(
    tree: &ScenarioTree,
    kappa: f64,
    depth: &[f64],
    prices: Option<&[f64]>,
    leaf_idx: usize,
    x: &[f64],
) -> f64 {
    let path = tree.path(leaf_idx);
    let horizon = tree.horizon();
    let mut value = 0.0;
    let mut impact_prev = 0.0; // state before the previous step
    let mut impact = 0.0; // state entering step t (starts at 0)
    let mut pos_prev = 0.0;
    for t in 0..horizon {
        let pos = x[t];
        let trade = pos - pos_prev;
        let ds = match prices {
            Some(s) => s[path[t + 1]] - s[path[t]],
            None => 0.0,
        };
        let d_impact = impact - impact_prev;
        value += pos * (ds + kappa * d_impact) - depth[path[t]] * trade * trade;
        let trade_next = if t + 1 < horizon { x[t + 1] - pos } else { 0.0 };
        impact_prev = impact;
        impact = kappa * impact + 2.0 * depth[path[t + 1]] * trade_next;
        pos_prev = pos;
    }
    value
}

/// Strategy-level market functional: the black-box form consumed by the
/// axiom audits and the integrand reconstruction. Path-defined models
/// satisfy locality by construction; a [`FunctionalModel`] need not, which
/// is how violations are planted in tests.
pub trait MarketFunctional: Send + Sync {
    fn tree(&self) -> &Arc<ScenarioTree>;

    /// Per-leaf outcome of trading the given adapted strategy.
    fn evaluate(&self, strategy: &AdaptedStrategy) -> Vec<f64>;

    /// Evaluation at the deterministic strategy given by a path vector.
    fn evaluate_deterministic(&self, x: &[f64]) -> Vec<f64> {
        let s = AdaptedStrategy::deterministic(self.tree(), x);
        self.evaluate(&s)
    }
}

impl MarketFunctional for MarketModel {
    fn tree(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    fn evaluate(&self, strategy: &AdaptedStrategy) -> Vec<f64> {
        self.evaluate_hat(strategy)
    }
}

type FunctionalEval = Arc<dyn Fn(&ScenarioTree, &AdaptedStrategy) -> Vec<f64> + Send + Sync>;

/// A market functional given directly at the strategy level.
#[derive(Clone)]
pub struct FunctionalModel {
    tree: Arc<ScenarioTree>,
    eval: FunctionalEval,
}

impl FunctionalModel {
    pub fn new(
        tree: &Arc<ScenarioTree>,
        eval: impl Fn(&ScenarioTree, &AdaptedStrategy) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FunctionalModel { tree: Arc::clone(tree), eval: Arc::new(eval) }
    }
}

impl MarketFunctional for FunctionalModel {
    fn tree(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    fn evaluate(&self, strategy: &AdaptedStrategy) -> Vec<f64> {
        (self.eval)(&self.tree, strategy)
    }
}

// ---------------------------------------------------------------------------
// Vector-valued models
// ---------------------------------------------------------------------------

type VectorEval = Arc<dyn Fn(&ScenarioTree, usize, &[f64]) -> Option<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
enum VectorKind {
    /// Currency-market exchange model: orders are matrices with zero
    /// diagonal, entry `(i, j)` transfers shares of asset `i` into asset `j`
    /// against a proportional fee.
    Exchange { assets: usize, fees: Vec<Vec<f64>> },
    Custom(VectorEval),
}

/// A market model with values in `R^n u {-inf}`; `None` encodes `-inf`.
#[derive(Clone)]
pub struct VectorModel {
    tree: Arc<ScenarioTree>,
    n: usize,
    kind: VectorKind,
    pub positively_homogeneous: bool,
}

/// Applies one proportional-cost transfer order: receiving asset `j` gains
/// `a_ij`, paying asset `i` loses `(1 + fee_ij) * a_ij`. Fails on negative
/// order entries.
pub fn exchange_transfer(assets: usize, fees: &[f64], order: &[f64]) -> Result<Vec<f64>, ModelError> {
    debug_assert_eq!(fees.len(), assets * assets);
    debug_assert_eq!(order.len(), assets * (assets - 1));
    let mut out = vec![0.0; assets];
    let mut k = 0;
    for i in 0..assets {
        for j in 0..assets {
            if i == j {
                continue;
            }
            let a = order[k];
            k += 1;
            if a < 0.0 {
                return Err(ModelError::NegativeOrderNotAllowed);
            }
            if a != 0.0 {
                out[i] -= (1.0 + fees[i * assets + j]) * a;
                out[j] += a;
            }
        }
    }
    Ok(out)
}

impl VectorModel {
    /// Exchange model with one fee matrix per node (row-major `n x n`, zero
    /// diagonal, entries `>= 0`). The order placed at time `t` settles with
    /// the fees of the time-`t+1` node. Strategy dimension is `n * (n - 1)`.
    pub fn exchange(tree: &Arc<ScenarioTree>, assets: usize, fees: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if assets < 2 {
            return Err(ModelError::DimensionMismatch("need at least two assets".into()));
        }
        if tree.dim() != assets * (assets - 1) {
            return Err(ModelError::DimensionMismatch(format!(
                "exchange model with {assets} assets needs strategy dimension {}, tree has {}",
                assets * (assets - 1),
                tree.dim()
            )));
        }
        if fees.len() != tree.num_nodes() {
            return Err(ModelError::DimensionMismatch("fees must be given at every node".into()));
        }
        for f in &fees {
            if f.len() != assets * assets {
                return Err(ModelError::DimensionMismatch("fee matrix must be n x n".into()));
            }
            for i in 0..assets {
                if f[i * assets + i] != 0.0 {
                    return Err(ModelError::InvalidParameter("fee matrix diagonal must be 0".into()));
                }
            }
            if f.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(ModelError::InvalidParameter("fees must be finite and >= 0".into()));
            }
        }
        Ok(VectorModel {
            tree: Arc::clone(tree),
            n: assets,
            kind: VectorKind::Exchange { assets, fees },
            positively_homogeneous: true,
        })
    }

    /// Exchange model with the same fee matrix at every node.
    pub fn exchange_const(tree: &Arc<ScenarioTree>, assets: usize, fees: Vec<f64>) -> Result<Self, ModelError> {
        let per_node = vec![fees; tree.num_nodes()];
        Self::exchange(tree, assets, per_node)
    }

    pub fn custom(
        tree: &Arc<ScenarioTree>,
        n: usize,
        positively_homogeneous: bool,
        eval: impl Fn(&ScenarioTree, usize, &[f64]) -> Option<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        VectorModel {
            tree: Arc::clone(tree),
            n,
            kind: VectorKind::Custom(Arc::new(eval)),
            positively_homogeneous,
        }
    }

    pub fn tree(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    /// Codomain dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Evaluates `V(omega, x) in R^n u {-inf}`; `None` is `-inf` (infeasible).
    pub fn eval(&self, leaf_idx: usize, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.tree.dim();
        debug_assert_eq!(x.len(), d * self.tree.horizon());
        match &self.kind {
            VectorKind::Exchange { assets, fees } => {
                let path = self.tree.path(leaf_idx);
                let mut total = vec![0.0; *assets];
                for t in 0..self.tree.horizon() {
                    let order = &x[t * d..(t + 1) * d];
                    let settle = path[t + 1];
                    let delta = exchange_transfer(*assets, &fees[settle], order).ok()?;
                    for i in 0..*assets {
                        total[i] += delta[i];
                    }
                }
                Some(total)
            }
            VectorKind::Custom(f) => f(&self.tree, leaf_idx, x),
        }
    }

    /// Per-leaf values of the strategy, in leaf order.
    pub fn evaluate_hat(&self, strategy: &AdaptedStrategy) -> Vec<Option<Vec<f64>>> {
        (0..self.tree.leaves().len())
            .map(|li| self.eval(li, &strategy.restrict_to_path(&self.tree, li)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;

    #[test]
    fn frictionless_binomial_values() {
        let (tree, model) = binomial_frictionless();
        assert_eq!(model.eval(0, &[1.0]), 1.0);
        assert_eq!(model.eval(1, &[1.0]), -0.5);
        // Normalization and linearity.
        assert_eq!(model.eval(0, &[0.0]), 0.0);
        assert_eq!(model.eval(1, &[0.0]), 0.0);
        for li in 0..2 {
            assert_eq!(model.eval(li, &[2.0 * 0.7]), 2.0 * model.eval(li, &[0.7]));
        }
        let _ = tree;
    }

    #[test]
    fn fixed_cost_binomial_values() {
        let (_, model) = binomial_fixed_cost(0.1);
        assert!((model.eval(0, &[1.0]) - 0.9).abs() < 1e-15);
        assert!((model.eval(1, &[1.0]) + 0.6).abs() < 1e-15);
        assert_eq!(model.eval(0, &[0.0]), 0.0);
    }

    #[test]
    fn zero_proportional_cost_matches_frictionless() {
        let (tree, fl) = binomial_frictionless();
        let costs = vec![CostFunction::proportional_const(&tree, 0.0)];
        let prop = additive_costs(&tree, binomial_prices(&tree), costs).unwrap();
        for li in 0..2 {
            for x in [-2.0, -0.5, 0.0, 0.3, 1.7] {
                assert_eq!(prop.eval(li, &[x]), fl.eval(li, &[x]));
            }
        }
    }

    #[test]
    fn constraint_infeasible_is_neg_inf() {
        let (tree, _) = binomial_frictionless();
        let costs =
            vec![CostFunction::constraint_const(&tree, BoxUnion::single(vec![0.0], vec![1.0]))];
        let model = additive_costs(&tree, binomial_prices(&tree), costs).unwrap();
        assert_eq!(model.eval(0, &[-1.0]), f64::NEG_INFINITY);
        assert_eq!(model.eval(1, &[-1.0]), f64::NEG_INFINITY);
        assert_eq!(model.eval(0, &[0.5]), 0.5);
    }

    #[test]
    fn lob_zero_strategy_is_zero() {
        let tree = ScenarioTree::uniform(1, 2, 2).unwrap();
        let model =
            limit_order_book(&tree, 0.3, vec![1.0; tree.num_nodes()], vec![5.0; tree.num_nodes()])
                .unwrap();
        for li in 0..tree.leaves().len() {
            assert_eq!(model.eval(li, &[0.0, 0.0]), 0.0);
        }
    }

    #[test]
    fn lob_single_step_pure_impact_cost() {
        // Flat price, unit depth, buy one share: value is the execution cost.
        let tree = ScenarioTree::single_path(1, 1).unwrap();
        let model = limit_order_book(&tree, 0.5, vec![1.0, 1.0], vec![3.0, 3.0]).unwrap();
        assert_eq!(model.eval(0, &[1.0]), -1.0);
    }

    #[test]
    fn lob_quadratic_in_trade_when_price_flat() {
        let tree = ScenarioTree::single_path(1, 2).unwrap();
        let model = limit_order_book(&tree, 0.3, vec![1.0; 3], vec![2.0; 3]).unwrap();
        for x in [[0.5, 1.0], [1.0, -1.0], [0.2, 0.0]] {
            let v1 = model.eval(0, &x);
            let v2 = model.eval(0, &[2.0 * x[0], 2.0 * x[1]]);
            assert!((v2 - 4.0 * v1).abs() < 1e-12, "expected quadratic scaling: {v1} vs {v2}");
        }
    }

    #[test]
    fn consumption_model_examples() {
        // dim = 2: (position, consumption); single-path tree with flat price.
        let tree = ScenarioTree::single_path(2, 1).unwrap();
        let prices = vec![vec![1.0], vec![1.0]];
        let model = consumption_model(&tree, prices, ConsumptionUtility::Sum, 1.0).unwrap();
        // Do nothing: utility 0.
        assert_eq!(model.eval(0, &[0.0, 0.0]), 0.0);
        // Consume exactly the endowment.
        assert_eq!(model.eval(0, &[0.0, 1.0]), 1.0);
        // Consume more than the endowment: insolvent.
        assert_eq!(model.eval(0, &[0.0, 1.5]), f64::NEG_INFINITY);
        // Negative consumption is infeasible.
        assert_eq!(model.eval(0, &[0.0, -0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn two_state_values() {
        let (_, model) = two_state_model();
        assert_eq!(model.eval(0, &[3.0]), 3.0);
        assert_eq!(model.eval(1, &[3.0]), -3.0);
        assert_eq!(model.eval(0, &[0.0]), 0.0);
        assert_eq!(model.eval(1, &[0.0]), 0.0);
        assert_eq!(model.eval(0, &[-2.0]), 2.0);
        assert_eq!(model.eval(1, &[-2.0]), -2.0);
    }

    #[test]
    fn exchange_zero_orders_zero_vector() {
        let tree = ScenarioTree::one_step(2, &[0.5, 0.5]).unwrap();
        let model = VectorModel::exchange_const(&tree, 2, vec![0.0, 0.1, 0.1, 0.0]).unwrap();
        for li in 0..2 {
            assert_eq!(model.eval(li, &[0.0, 0.0]), Some(vec![0.0, 0.0]));
        }
    }

    #[test]
    fn exchange_single_transfer() {
        // Transfer one unit of asset 0 into asset 1 at 10% cost.
        let tree = ScenarioTree::one_step(2, &[0.5, 0.5]).unwrap();
        let model = VectorModel::exchange_const(&tree, 2, vec![0.0, 0.1, 0.1, 0.0]).unwrap();
        let v = model.eval(0, &[1.0, 0.0]).unwrap();
        assert!((v[0] + 1.1).abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exchange_round_trip_loses_both_legs() {
        // Transfer 0 -> 1 then back 1 -> 0, both at 10%: strict loss overall.
        let tree = ScenarioTree::single_path(2, 2).unwrap();
        let model = VectorModel::exchange_const(&tree, 2, vec![0.0, 0.1, 0.1, 0.0]).unwrap();
        let v = model.eval(0, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((v[0] + 0.1).abs() < 1e-12, "asset 0 leg: {}", v[0]);
        assert!((v[1] + 0.1).abs() < 1e-12, "asset 1 leg: {}", v[1]);
    }

    #[test]
    fn exchange_negative_order_infeasible() {
        let tree = ScenarioTree::one_step(2, &[0.5, 0.5]).unwrap();
        let model = VectorModel::exchange_const(&tree, 2, vec![0.0, 0.1, 0.1, 0.0]).unwrap();
        assert_eq!(model.eval(0, &[-1.0, 0.0]), None);
        assert!(matches!(
            exchange_transfer(2, &[0.0, 0.1, 0.1, 0.0], &[-1.0, 0.0]),
            Err(ModelError::NegativeOrderNotAllowed)
        ));
    }

    #[test]
    fn evaluate_hat_matches_pathwise_eval() {
        let (tree, model) = binomial_fixed_cost(0.1);
        let theta = AdaptedStrategy::constant(&tree, &[1.0]);
        assert_eq!(model.evaluate_hat(&theta), vec![0.9, -0.6]);
        let zero = AdaptedStrategy::zero(&tree);
        assert_eq!(model.evaluate_hat(&zero), vec![0.0, 0.0]);
    }

    #[test]
    fn local_bound_frictionless() {
        let (_, model) = binomial_frictionless();
        // sup over |x| <= 2 of x * 1 on the up leaf.
        let b = model.local_bound(0, 2.0);
        assert!((b - 2.0).abs() < 1e-6);
    }

    mod flag_honesty {
        use super::super::*;
        use crate::testutil::*;
        use proptest::prelude::*;

        proptest! {
            // Models flagged positively homogeneous scale exactly.
            #[test]
            fn homogeneity_flag(x in -3.0f64..3.0, lambda in 0.01f64..8.0) {
                let flagged: Vec<MarketModel> = vec![
                    binomial_frictionless().1,
                    binomial_proportional(0.2).1,
                    two_state_model().1,
                ];
                for model in &flagged {
                    prop_assert!(model.flags().positively_homogeneous);
                    for li in 0..2 {
                        let v = model.eval(li, &[x]);
                        let vs = model.eval(li, &[lambda * x]);
                        prop_assert!(
                            (vs - lambda * v).abs() <= 1e-9 * (1.0 + v.abs() * lambda),
                            "V({}) = {}, V({}) = {}", x, v, lambda * x, vs
                        );
                    }
                }
            }

            // Models flagged additive equal the explicit per-step sum.
            #[test]
            fn additive_flag(x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, fee in 0.0f64..0.5) {
                let tree = crate::tree::ScenarioTree::uniform(1, 2, 2).unwrap();
                let mut prices = vec![vec![1.0]; tree.num_nodes()];
                for (i, node) in tree.nodes_at(1).into_iter().enumerate() {
                    prices[node] = vec![1.0 + 0.3 * (i as f64 - 0.5)];
                }
                for (i, &leaf) in tree.leaves().iter().enumerate() {
                    prices[leaf] = vec![0.8 + 0.2 * i as f64];
                }
                let model = additive_costs(
                    &tree,
                    prices.clone(),
                    vec![CostFunction::Fixed(fee); 2],
                )
                .unwrap();
                prop_assert!(model.flags().additive);
                let x = [x0, x1];
                for li in 0..tree.leaves().len() {
                    let path = tree.path(li);
                    let mut expected = 0.0;
                    let mut prev = 0.0;
                    for t in 0..2 {
                        let ds = prices[path[t + 1]][0] - prices[path[t]][0];
                        let cost = if x[t] != prev { fee } else { 0.0 };
                        expected += x[t] * ds - cost;
                        prev = x[t];
                    }
                    let got = model.eval(li, &x);
                    prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
                }
            }
        }
    }
}
