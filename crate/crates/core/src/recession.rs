//! Recession models: the positively homogeneous map that captures market
//! behavior along rays of large positions.
//!
//! `recession_numeric` discretizes the defining decreasing limit
//! `lim_{lambda -> inf} sup { V(omega, delta x) / delta : delta > lambda,
//! |x - z| < 1/lambda }` on a dyadic ladder. `recession_analytic` returns
//! closed forms for the built-ins, and `cross_validate_recession` reconciles
//! the two routes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

use crate::model::{lob_value, BoxUnion, CostFunction, MarketModel, ModelKind, Prices};
use crate::tree::ScenarioTree;

#[derive(Debug, Error)]
pub enum RecessionError {
    #[error("no analytic recession form for this model")]
    NoAnalyticForm,
}

/// How a numeric ladder ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Finite,
    PlusInf,
    MinusInf,
    /// Ladder exhausted without stagnation or divergence.
    Unconverged,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Finite => "finite",
            Classification::PlusInf => "+inf",
            Classification::MinusInf => "-inf",
            Classification::Unconverged => "unconverged",
        };
        f.write_str(s)
    }
}

/// Numeric recession estimate at one leaf.
#[derive(Debug, Clone)]
pub struct RecessionEstimate {
    pub classification: Classification,
    /// Converged value (finite case), `+-inf`, or the last rung when unconverged.
    pub value: f64,
    /// Last sampled rung: a from-below discretization of a quantity that
    /// overestimates the limit.
    pub lower_sample: f64,
    /// Monotone upper envelope of the sampled rungs.
    pub monotone_upper: f64,
    /// `(lambda, sampled sup)` pairs actually visited.
    pub rungs: Vec<(f64, f64)>,
}

/// Ladder and sampling plan for the numeric recession.
#[derive(Debug, Clone)]
pub struct RecessionSchedule {
    /// `lambda = 2^k` for `k` in this inclusive range.
    pub k_min: u32,
    pub k_max: u32,
    /// Multipliers applied to `lambda` to sample `delta > lambda`.
    pub delta_multipliers: Vec<f64>,
    /// Random samples inside the shrinking cube around `z` (plus axis probes).
    pub ball_samples: usize,
    /// Two successive rung gaps below this declare convergence.
    pub stagnation_tol: f64,
    /// Two successive rungs beyond this magnitude declare divergence.
    pub divergence_cap: f64,
    /// Sustained geometric growth beyond this magnitude also declares
    /// divergence; catches super-linear scaling long before the hard cap.
    pub growth_cap: f64,
    pub seed: u64,
}

impl Default for RecessionSchedule {
    fn default() -> Self {
        RecessionSchedule {
            k_min: 4,
            k_max: 44,
            delta_multipliers: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            ball_samples: 4,
            stagnation_tol: 1e-7,
            divergence_cap: 1e12,
            growth_cap: 1e6,
            seed: 2718,
        }
    }
}

/// Samples the defining limit at one leaf. Estimates carry a bracket: each
/// rung under-samples a supremum that overestimates the limit, and the
/// monotone envelope of rungs bounds the converged value from above.
pub fn recession_numeric_leaf(
    model: &MarketModel,
    leaf_idx: usize,
    z: &[f64],
    schedule: &RecessionSchedule,
) -> RecessionEstimate {
    let dims = z.len();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let scale = 1.0 + z.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let mut rungs: Vec<(f64, f64)> = Vec::new();
    let mut classification = Classification::Unconverged;
    let mut stagnant = 0u32;

    for k in schedule.k_min..=schedule.k_max {
        let lambda = 2.0f64.powi(k as i32);
        let radius = 1.0 / lambda;
        // Cube sample around z: center, axis probes, seeded fill-ins.
        let mut points: Vec<Vec<f64>> = vec![z.to_vec()];
        for i in 0..dims {
            for sgn in [-1.0, 1.0] {
                let mut p = z.to_vec();
                p[i] += sgn * 0.5 * radius;
                points.push(p);
            }
        }
        for _ in 0..schedule.ball_samples {
            points
                .push((0..dims).map(|i| z[i] + radius * rng.random_range(-0.99..0.99)).collect());
        }
        let mut est = f64::NEG_INFINITY;
        for x in &points {
            for &m in &schedule.delta_multipliers {
                let delta = lambda * m;
                let scaled: Vec<f64> = x.iter().map(|&c| delta * c).collect();
                let v = model.eval(leaf_idx, &scaled);
                let ratio = if v == f64::NEG_INFINITY { f64::NEG_INFINITY } else { v / delta };
                if ratio > est {
                    est = ratio;
                }
            }
        }
        rungs.push((lambda, est));
        let n = rungs.len();
        if n >= 2 {
            let prev = rungs[n - 2].1;
            // Hard divergence cap.
            if est.abs() > schedule.divergence_cap && prev.abs() > schedule.divergence_cap {
                classification =
                    if est > 0.0 { Classification::PlusInf } else { Classification::MinusInf };
                break;
            }
            if est == f64::NEG_INFINITY && prev == f64::NEG_INFINITY {
                classification = Classification::MinusInf;
                break;
            }
            // Sustained near-doubling past the growth cap: super-linear model.
            if n >= 4 {
                let window: Vec<f64> = rungs[n - 4..].iter().map(|r| r.1).collect();
                let same_sign = window.iter().all(|&w| w > 0.0) || window.iter().all(|&w| w < 0.0);
                let growing = window.windows(2).all(|w| w[1].abs() > 1.6 * w[0].abs());
                if same_sign && growing && est.abs() > schedule.growth_cap * scale {
                    classification =
                        if est > 0.0 { Classification::PlusInf } else { Classification::MinusInf };
                    break;
                }
            }
            if est.is_finite() && prev.is_finite() {
                if (est - prev).abs() <= schedule.stagnation_tol * (1.0 + est.abs()) {
                    stagnant += 1;
                    if stagnant >= 2 {
                        classification = Classification::Finite;
                        break;
                    }
                } else {
                    stagnant = 0;
                }
            }
        }
    }

    let monotone_upper = rungs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let last = rungs.last().map(|r| r.1).unwrap_or(f64::NEG_INFINITY);
    let value = match classification {
        Classification::PlusInf => f64::INFINITY,
        Classification::MinusInf => f64::NEG_INFINITY,
        _ => last,
    };
    RecessionEstimate { classification, value, lower_sample: last, monotone_upper, rungs }
}

/// Per-leaf numeric recession along the ray direction `z`.
pub fn recession_numeric(
    model: &MarketModel,
    z: &[f64],
    schedule: &RecessionSchedule,
) -> Vec<RecessionEstimate> {
    (0..model.tree().leaves().len())
        .map(|li| recession_numeric_leaf(model, li, z, schedule))
        .collect()
}

#[derive(Clone)]
enum RecessionKind {
    /// Frictionless gains (also the recession of fixed-cost models).
    Linear { prices: Prices },
    /// Proportional costs survive scaling: gains minus `lambda |trade|_1`.
    Proportional { prices: Prices, lambda: Vec<f64> },
    /// Frictionless part (minus surviving proportional costs) plus the
    /// indicator of per-node horizon cones of the constraint sets.
    Constrained {
        prices: Prices,
        /// Per time step: per-node constraint sets, when that step is constrained.
        horizons: Vec<Option<Vec<BoxUnion>>>,
        /// Per time step: per-node proportional rate, when that step has one.
        lambdas: Vec<Option<Vec<f64>>>,
    },
    /// Quadratic impact model: the sign of the quadratic part decides everything.
    LobQuadratic { kappa: f64, depth: Vec<f64>, prices: Vec<f64> },
    /// Positively homogeneous usc models equal their own recession.
    SelfHomogeneous { model: MarketModel },
}

/// Closed-form recession model with evaluation per `(leaf, direction)`.
#[derive(Clone)]
pub struct RecessionIntegrand {
    tree: Arc<ScenarioTree>,
    kind: RecessionKind,
}

impl RecessionIntegrand {
    /// The price process when this recession is exactly the frictionless
    /// form `sum <x_t, dS>`.
    pub fn linear_prices(&self) -> Option<&Prices> {
        match &self.kind {
            RecessionKind::Linear { prices } => Some(prices),
            _ => None,
        }
    }

    /// True when the integrand is positively homogeneous by construction
    /// (every variant is).
    pub fn positively_homogeneous(&self) -> bool {
        true
    }

    pub fn tree(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    pub fn eval(&self, leaf_idx: usize, z: &[f64]) -> f64 {
        let d = self.tree.dim();
        let horizon = self.tree.horizon();
        match &self.kind {
            RecessionKind::Linear { prices } => linear_gains(&self.tree, prices, leaf_idx, z),
            RecessionKind::Proportional { prices, lambda } => {
                let path = self.tree.path(leaf_idx);
                let mut acc = linear_gains(&self.tree, prices, leaf_idx, z);
                for t in 0..horizon {
                    let node = path[t];
                    let trade: f64 = (0..d)
                        .map(|i| {
                            let prev = if t == 0 { 0.0 } else { z[(t - 1) * d + i] };
                            (z[t * d + i] - prev).abs()
                        })
                        .sum();
                    acc -= lambda[node] * trade;
                }
                acc
            }
            RecessionKind::Constrained { prices, horizons, lambdas } => {
                let path = self.tree.path(leaf_idx);
                // Directions outside a horizon cone are infeasible at scale.
                for t in 0..horizon {
                    if let Some(sets) = &horizons[t] {
                        if !sets[path[t]].horizon_contains(&z[t * d..(t + 1) * d], 1e-12) {
                            return f64::NEG_INFINITY;
                        }
                    }
                }
                let mut acc = linear_gains(&self.tree, prices, leaf_idx, z);
                for t in 0..horizon {
                    if let Some(lam) = &lambdas[t] {
                        let trade: f64 = (0..d)
                            .map(|i| {
                                let prev = if t == 0 { 0.0 } else { z[(t - 1) * d + i] };
                                (z[t * d + i] - prev).abs()
                            })
                            .sum();
                        acc -= lam[path[t]] * trade;
                    }
                }
                acc
            }
            RecessionKind::LobQuadratic { kappa, depth, prices } => {
                lob_recession(&self.tree, *kappa, depth, prices, leaf_idx, z)
            }
            RecessionKind::SelfHomogeneous { model } => model.eval(leaf_idx, z),
        }
    }

    /// Per-leaf evaluation in leaf order.
    pub fn eval_all(&self, z: &[f64]) -> Vec<f64> {
        (0..self.tree.leaves().len()).map(|li| self.eval(li, z)).collect()
    }
}

fn linear_gains(tree: &ScenarioTree, prices: &Prices, leaf_idx: usize, z: &[f64]) -> f64 {
    let d = tree.dim();
    let path = tree.path(leaf_idx);
    let mut acc = 0.0;
    for t in 0..tree.horizon() {
        for i in 0..d {
            acc += z[t * d + i] * (prices[path[t + 1]][i] - prices[path[t]][i]);
        }
    }
    acc
}

/// Quadratic part of the impact model along a direction (the equilibrium
/// price held flat isolates it).
pub(crate) fn lob_quadratic_part(
    tree: &ScenarioTree,
    kappa: f64,
    depth: &[f64],
    leaf_idx: usize,
    z: &[f64],
) -> f64 {
    lob_value(tree, kappa, depth, None, leaf_idx, z)
}

fn lob_recession(
    tree: &ScenarioTree,
    kappa: f64,
    depth: &[f64],
    prices: &[f64],
    leaf_idx: usize,
    z: &[f64],
) -> f64 {
    // V(delta z) / delta = linear(z) + delta * q(z): the sign of the
    // quadratic part q decides the limit. On the null set {q = 0} the
    // defining sup over a shrinking neighborhood still hits nearby positive
    // directions, so those points are bumped to +inf.
    let norm = z.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let q = lob_quadratic_part(tree, kappa, depth, leaf_idx, z);
    let qtol = 1e-12 * (1.0 + norm * norm);
    if q > qtol {
        return f64::INFINITY;
    }
    if q < -qtol {
        return f64::NEG_INFINITY;
    }
    let dims = z.len();
    let probe_radius = 1e-3 * (1.0 + norm);
    for i in 0..dims {
        for sgn in [-1.0, 1.0] {
            let mut p = z.to_vec();
            p[i] += sgn * probe_radius;
            let qp = lob_quadratic_part(tree, kappa, depth, leaf_idx, &p);
            if qp > 1e-12 + probe_radius * probe_radius * 1e-9 {
                return f64::INFINITY;
            }
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        let path = tree.path(leaf_idx);
        (0..tree.horizon()).map(|t| z[t] * (prices[path[t + 1]] - prices[path[t]])).sum()
    }
}

/// Closed-form recession for models that carry one.
///
/// Frictionless models recede to themselves; proportional costs survive
/// (they are already positively homogeneous); fixed fees vanish in the
/// limit, leaving the frictionless part; box constraints turn into their
/// horizon cones; the impact model is classified by the sign of its
/// quadratic part; positively homogeneous usc models are their own
/// recession.
pub fn recession_analytic(model: &MarketModel) -> Result<RecessionIntegrand, RecessionError> {
    let tree = model.tree().clone();
    if !model.flags().has_analytic_recession {
        return Err(RecessionError::NoAnalyticForm);
    }
    let kind = match model.kind() {
        ModelKind::Additive { prices, costs } => {
            let has_constraint = costs.iter().any(|c| matches!(c, CostFunction::Constraint(_)));
            let has_proportional =
                costs.iter().any(|c| matches!(c, CostFunction::Proportional(_)));
            if !has_constraint && !has_proportional {
                // Zero or fixed costs only: fees vanish in the limit.
                RecessionKind::Linear { prices: prices.clone() }
            } else if !has_constraint {
                let mut lambda = vec![0.0; tree.num_nodes()];
                for node in 0..tree.num_nodes() {
                    let t = tree.node(node).time;
                    if t < tree.horizon() {
                        if let CostFunction::Proportional(l) = &costs[t] {
                            lambda[node] = l[node];
                        }
                    }
                }
                RecessionKind::Proportional { prices: prices.clone(), lambda }
            } else {
                let horizons: Vec<Option<Vec<BoxUnion>>> = costs
                    .iter()
                    .map(|c| match c {
                        CostFunction::Constraint(sets) => Some(sets.clone()),
                        _ => None,
                    })
                    .collect();
                let lambdas: Vec<Option<Vec<f64>>> = costs
                    .iter()
                    .map(|c| match c {
                        CostFunction::Proportional(l) => Some(l.clone()),
                        _ => None,
                    })
                    .collect();
                RecessionKind::Constrained { prices: prices.clone(), horizons, lambdas }
            }
        }
        ModelKind::Lob { kappa, depth, prices } => RecessionKind::LobQuadratic {
            kappa: *kappa,
            depth: depth.clone(),
            prices: prices.clone(),
        },
        ModelKind::TwoState => RecessionKind::SelfHomogeneous { model: model.clone() },
        ModelKind::Custom(_) if model.flags().positively_homogeneous => {
            RecessionKind::SelfHomogeneous { model: model.clone() }
        }
        _ => return Err(RecessionError::NoAnalyticForm),
    };
    Ok(RecessionIntegrand { tree, kind })
}

/// A purely linear recession integrand from explicit prices (for feeding
/// external price processes straight into the arbitrage checks).
pub fn linear_recession(tree: &Arc<ScenarioTree>, prices: Prices) -> RecessionIntegrand {
    RecessionIntegrand { tree: Arc::clone(tree), kind: RecessionKind::Linear { prices } }
}

/// One disagreement between the numeric ladder and the closed form.
#[derive(Debug, Clone)]
pub struct RecessionMismatch {
    pub leaf_idx: usize,
    pub z: Vec<f64>,
    pub analytic: f64,
    pub numeric: f64,
    pub classification: Classification,
}

/// Cross-validation report: gaps on finite values, classification
/// disagreements on `+-inf`, and a homogeneity spot-check on rays.
#[derive(Debug, Clone)]
pub struct CrossValidationReport {
    pub max_finite_gap: f64,
    pub mismatches: Vec<RecessionMismatch>,
    pub homogeneity_max_err: f64,
    pub points_checked: usize,
}

impl CrossValidationReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.mismatches.is_empty() && self.max_finite_gap <= tol
    }
}

/// Runs the numeric ladder against the analytic form on a lattice of
/// directions.
pub fn cross_validate_recession(
    model: &MarketModel,
    axes: &[Vec<f64>],
    schedule: &RecessionSchedule,
) -> Result<CrossValidationReport, RecessionError> {
    let analytic = recession_analytic(model)?;
    let tree = model.tree().clone();
    let lattice = crate::grid::cartesian(axes);
    let mut max_gap = 0.0f64;
    let mut mismatches = Vec::new();
    let mut points = 0usize;
    for z in &lattice {
        let numeric = recession_numeric(model, z, schedule);
        for (li, est) in numeric.iter().enumerate() {
            points += 1;
            let a = analytic.eval(li, z);
            let agrees = match est.classification {
                Classification::Finite => a.is_finite(),
                Classification::PlusInf | Classification::MinusInf => a == est.value,
                Classification::Unconverged => false,
            };
            if !agrees {
                mismatches.push(RecessionMismatch {
                    leaf_idx: li,
                    z: z.clone(),
                    analytic: a,
                    numeric: est.value,
                    classification: est.classification,
                });
            } else if est.classification == Classification::Finite {
                max_gap = max_gap.max((a - est.value).abs());
            }
        }
    }

    // Homogeneity on rays: the analytic eval must scale exactly.
    let mut homo_err = 0.0f64;
    let dims = tree.dim() * tree.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed ^ 0x9e37);
    for _ in 0..16 {
        let z: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        for scale in [2.0, 3.0, 0.5] {
            let zs: Vec<f64> = z.iter().map(|&c| scale * c).collect();
            for li in 0..tree.leaves().len() {
                let a = analytic.eval(li, &z);
                let b = analytic.eval(li, &zs);
                if a.is_finite() && b.is_finite() {
                    homo_err = homo_err.max((b - scale * a).abs() / (1.0 + a.abs()));
                } else if a.is_finite() != b.is_finite() {
                    homo_err = f64::INFINITY;
                }
            }
        }
    }

    Ok(CrossValidationReport {
        max_finite_gap: max_gap,
        mismatches,
        homogeneity_max_err: homo_err,
        points_checked: points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::model::{additive_costs, limit_order_book, two_state_model};
    use crate::testutil::*;

    #[test]
    fn frictionless_recession_is_itself() {
        let (_, model) = binomial_frictionless();
        let sched = RecessionSchedule::default();
        for z in [[-1.5], [0.0], [0.7]] {
            let est = recession_numeric(&model, &z, &sched);
            for li in 0..2 {
                assert_eq!(est[li].classification, Classification::Finite);
                assert!((est[li].value - model.eval(li, &z)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fixed_cost_recession_is_frictionless_part() {
        let (_, fc) = binomial_fixed_cost(0.1);
        let (_, fl) = binomial_frictionless();
        let sched = RecessionSchedule::default();
        let z = [1.3];
        let est = recession_numeric(&fc, &z, &sched);
        for li in 0..2 {
            assert_eq!(est[li].classification, Classification::Finite);
            assert!(
                (est[li].value - fl.eval(li, &z)).abs() < 1e-4,
                "leaf {li}: {} vs {}",
                est[li].value,
                fl.eval(li, &z)
            );
        }
        let rec = recession_analytic(&fc).unwrap();
        for li in 0..2 {
            assert_eq!(rec.eval(li, &z), fl.eval(li, &z));
        }
    }

    #[test]
    fn proportional_recession_keeps_costs() {
        let (_, model) = binomial_proportional(0.2);
        let rec = recession_analytic(&model).unwrap();
        for li in 0..2 {
            for z in [[-1.0], [0.5], [2.0]] {
                assert!((rec.eval(li, &z) - model.eval(li, &z)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounded_constraint_recession_is_zero_cone() {
        // D = [0, 1]: the horizon cone is {0}, so the recession is -inf off 0.
        let (tree, _) = binomial_frictionless();
        let costs = vec![CostFunction::constraint_const(
            &tree,
            BoxUnion::single(vec![0.0], vec![1.0]),
        )];
        let model = additive_costs(&tree, binomial_prices(&tree), costs).unwrap();
        let rec = recession_analytic(&model).unwrap();
        assert_eq!(rec.eval(0, &[0.5]), f64::NEG_INFINITY);
        assert_eq!(rec.eval(0, &[-0.5]), f64::NEG_INFINITY);
        assert_eq!(rec.eval(0, &[0.0]), 0.0);
        // Half-bounded box keeps its ray.
        let costs = vec![CostFunction::constraint_const(
            &tree,
            BoxUnion::single(vec![0.0], vec![f64::INFINITY]),
        )];
        let model = additive_costs(&tree, binomial_prices(&tree), costs).unwrap();
        let rec = recession_analytic(&model).unwrap();
        assert_eq!(rec.eval(0, &[2.0]), 2.0);
        assert_eq!(rec.eval(0, &[-2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn lob_recession_minus_inf_off_zero() {
        let tree = crate::tree::ScenarioTree::single_path(1, 2).unwrap();
        let model = limit_order_book(&tree, 0.3, vec![1.0; 3], vec![5.0; 3]).unwrap();
        let rec = recession_analytic(&model).unwrap();
        assert_eq!(rec.eval(0, &[0.0, 0.0]), 0.0);
        assert_eq!(rec.eval(0, &[1.0, 0.5]), f64::NEG_INFINITY);
        assert_eq!(rec.eval(0, &[0.0, -1.0]), f64::NEG_INFINITY);
        // The numeric route classifies the same way.
        let sched = RecessionSchedule::default();
        let est = recession_numeric_leaf(&model, 0, &[1.0, 0.5], &sched);
        assert_eq!(est.classification, Classification::MinusInf);
        let est0 = recession_numeric_leaf(&model, 0, &[0.0, 0.0], &sched);
        assert_eq!(est0.classification, Classification::Finite);
        assert!(est0.value.abs() < 1e-6);
    }

    #[test]
    fn two_state_recession_idempotent() {
        let (_, model) = two_state_model();
        let rec = recession_analytic(&model).unwrap();
        for x in linspace(-2.0, 2.0, 9) {
            assert_eq!(rec.eval(0, &[x]), x.abs());
            assert_eq!(rec.eval(1, &[x]), -x.abs());
        }
    }

    #[test]
    fn numeric_ladder_monotone_envelope() {
        let (_, model) = binomial_fixed_cost(0.1);
        let est = recession_numeric_leaf(&model, 0, &[1.0], &RecessionSchedule::default());
        assert!(est.monotone_upper >= est.value - 1e-12);
        for &(_, e) in &est.rungs {
            assert!(e <= est.monotone_upper + 1e-12);
        }
    }

    #[test]
    fn cross_validation_binomials() {
        let sched = RecessionSchedule::default();
        let axes = vec![linspace(-2.0, 2.0, 21)];
        for (_, model) in
            [binomial_frictionless(), binomial_fixed_cost(0.1), binomial_proportional(0.2)]
        {
            let report = cross_validate_recession(&model, &axes, &sched).unwrap();
            assert!(
                report.ok(1e-4),
                "gap {} mismatches {}",
                report.max_finite_gap,
                report.mismatches.len()
            );
            assert!(report.homogeneity_max_err < 1e-9);
        }
    }

    #[test]
    fn cross_validation_lob_classifications() {
        let tree = crate::tree::ScenarioTree::single_path(1, 2).unwrap();
        let model = limit_order_book(&tree, 0.3, vec![1.0; 3], vec![5.0; 3]).unwrap();
        let axes = vec![linspace(-2.0, 2.0, 7), linspace(-2.0, 2.0, 7)];
        let report =
            cross_validate_recession(&model, &axes, &RecessionSchedule::default()).unwrap();
        assert!(report.ok(1e-4), "mismatches: {:?}", report.mismatches.first());
    }

    #[test]
    fn no_analytic_form_for_consumption() {
        let tree = crate::tree::ScenarioTree::single_path(2, 1).unwrap();
        let model = crate::model::consumption_model(
            &tree,
            vec![vec![1.0], vec![1.0]],
            crate::model::ConsumptionUtility::Sum,
            1.0,
        )
        .unwrap();
        assert!(matches!(recession_analytic(&model), Err(RecessionError::NoAnalyticForm)));
    }
}
