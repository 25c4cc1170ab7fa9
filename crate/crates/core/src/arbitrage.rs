//! No-arbitrage decisions and certificates.
//!
//! A model admits arbitrage when some nonzero adapted strategy has
//! nonnegative recession gains at every leaf. For linear recession models
//! the decision is exact: per-node strictly positive martingale weights
//! certify no-arbitrage, a failed node yields an explicit one-step
//! buy-and-hold witness, and a per-node rank test rules out redundant
//! assets (zero-margin strategies count as arbitrage here). For general
//! positively homogeneous models the decision is a budgeted sphere search
//! with local refinement, reported as such.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lp::{Builder, LpOutcome};
use crate::model::{MarketModel, ModelKind, Prices};
use crate::recession::{linear_recession, RecessionIntegrand};
use crate::tree::{AdaptedStrategy, NodeId, ScenarioTree};

#[derive(Debug, Error)]
pub enum ArbitrageError {
    #[error("recession model is not linear: {0}")]
    NotLinear(String),
    #[error("sphere search budget exceeded: {candidates} candidates > cap {cap}")]
    SearchBudgetExceeded { candidates: usize, cap: usize },
}

/// How an arbitrage witness was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// Classical one-step buy-and-hold from a violated node.
    OneStep { node: NodeId },
    /// Kernel direction of the child-increment matrix: gains identically 0.
    Redundancy { node: NodeId },
    /// Found by the homogeneous sphere search.
    SphereSearch,
}

/// A validated arbitrage strategy: nonzero, recession gains `>= 0` at every leaf.
#[derive(Debug, Clone)]
pub struct ArbitrageWitness {
    pub strategy: AdaptedStrategy,
    pub kind: WitnessKind,
    /// Minimum recession gain over leaves (0 for pure redundancy).
    pub margin: f64,
}

/// Strictly positive one-step martingale weights plus the redundancy report.
#[derive(Debug, Clone)]
pub struct MartingaleCertificate {
    /// Per decision node: one strictly positive weight per child, summing to
    /// 1, under which the one-step increments have zero mean.
    pub weights: BTreeMap<NodeId, Vec<f64>>,
    pub min_weight: f64,
    /// Per decision node: (rank of the child-increment matrix, smallest
    /// singular value); full rank means no redundant assets.
    pub rank_report: BTreeMap<NodeId, (usize, f64)>,
}

/// Verdict of a no-arbitrage check.
#[derive(Debug, Clone)]
pub enum NaVerdict {
    Arbitrage(ArbitrageWitness),
    NaCertified(MartingaleCertificate),
    /// No arbitrage found up to the search budget; the worst (largest)
    /// margin over candidates is strictly negative.
    NaUpToSearch { worst_margin: f64, at: AdaptedStrategy, candidates: usize },
}

impl NaVerdict {
    pub fn is_arbitrage(&self) -> bool {
        matches!(self, NaVerdict::Arbitrage(_))
    }
}

/// Minimum recession gain of a strategy over all leaves.
pub fn margin(rec: &RecessionIntegrand, strategy: &AdaptedStrategy) -> f64 {
    let tree = rec.tree();
    (0..tree.leaves().len())
        .map(|li| rec.eval(li, &strategy.restrict_to_path(tree, li)))
        .fold(f64::INFINITY, f64::min)
}

fn validate_witness(rec: &RecessionIntegrand, w: &ArbitrageWitness) {
    assert!(!w.strategy.is_zero(), "arbitrage witness must be nonzero");
    let m = margin(rec, &w.strategy);
    assert!(m >= -1e-12, "arbitrage witness has negative margin {m}");
}

const RANK_TOL: f64 = 1e-9;
const WEIGHT_TOL: f64 = 1e-10;

/// Exact no-arbitrage decision for linear recession models.
///
/// Certifies by exhibiting strictly positive martingale weights and a
/// full-rank increment matrix at every decision node; otherwise returns an
/// explicit witness. The linearity precondition is re-verified by sampling.
pub fn na_check_linear(rec: &RecessionIntegrand) -> Result<NaVerdict, ArbitrageError> {
    let tree = rec.tree().clone();
    let prices = rec
        .linear_prices()
        .ok_or_else(|| ArbitrageError::NotLinear("no frictionless price form".into()))?
        .clone();
    audit_linearity(rec)?;

    let d = tree.dim();
    let mut weights = BTreeMap::new();
    let mut min_weight = f64::INFINITY;
    let mut rank_report = BTreeMap::new();

    for node in tree.decision_nodes() {
        let children = &tree.node(node).children;
        let k = children.len();
        let incr: Vec<Vec<f64>> = children
            .iter()
            .map(|&c| (0..d).map(|i| prices[c][i] - prices[node][i]).collect())
            .collect();

        // Redundancy: a nonzero position orthogonal to every increment.
        // Zero-row padding keeps the full right-singular basis available.
        let mut mat = DMatrix::zeros(k.max(d), d);
        for (r, row) in incr.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                mat[(r, c)] = v;
            }
        }
        let svd = mat.svd(false, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let tol = RANK_TOL * (1.0 + smax);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        rank_report.insert(node, (rank, if smin.is_finite() { smin } else { 0.0 }));
        if rank < d {
            let vt = svd.v_t.as_ref().expect("svd with v_t");
            // Rows of V^T beyond the rank span the kernel.
            let kernel: Vec<f64> = (0..d).map(|i| vt[(rank, i)]).collect();
            let sup = kernel.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            let theta: Vec<f64> = kernel.iter().map(|&x| x / sup).collect();
            let mut strategy = AdaptedStrategy::zero(&tree);
            strategy.set(node, theta);
            let w = ArbitrageWitness {
                margin: margin(rec, &strategy),
                strategy,
                kind: WitnessKind::Redundancy { node },
            };
            validate_witness(rec, &w);
            return Ok(NaVerdict::Arbitrage(w));
        }

        match martingale_weights(&incr, d) {
            Some((w, eps)) if eps > WEIGHT_TOL => {
                min_weight = min_weight.min(w.iter().cloned().fold(f64::INFINITY, f64::min));
                weights.insert(node, w);
            }
            _ => {
                let theta = one_step_witness(&incr, d);
                let mut strategy = AdaptedStrategy::zero(&tree);
                strategy.set(node, theta);
                let w = ArbitrageWitness {
                    margin: margin(rec, &strategy),
                    strategy,
                    kind: WitnessKind::OneStep { node },
                };
                validate_witness(rec, &w);
                return Ok(NaVerdict::Arbitrage(w));
            }
        }
    }
    Ok(NaVerdict::NaCertified(MartingaleCertificate { weights, min_weight, rank_report }))
}

fn audit_linearity(rec: &RecessionIntegrand) -> Result<(), ArbitrageError> {
    let tree = rec.tree();
    let dims = tree.dim() * tree.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..8 {
        let x: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        for li in 0..tree.leaves().len() {
            let lhs = rec.eval(li, &xy);
            let rhs = rec.eval(li, &x) + rec.eval(li, &y);
            if (lhs - rhs).abs() > 1e-9 * (1.0 + lhs.abs()) {
                return Err(ArbitrageError::NotLinear(format!(
                    "additivity fails at leaf {li}: {lhs} vs {rhs}"
                )));
            }
        }
    }
    Ok(())
}

/// Strictly positive weights `w` with `sum w = 1` and `sum w_c dS_c = 0`,
/// found by maximizing the smallest weight. Returns `(w, best min weight)`.
fn martingale_weights(incr: &[Vec<f64>], d: usize) -> Option<(Vec<f64>, f64)> {
    let k = incr.len();
    // Variables: w_1..w_k, eps, s_1..s_k with w_c - eps - s_c = 0.
    let n = 2 * k + 1;
    let mut cost = vec![0.0; n];
    cost[k] = -1.0;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut row = vec![0.0; n];
    row[..k].fill(1.0);
    a.push(row);
    b.push(1.0);
    for i in 0..d {
        let mut row = vec![0.0; n];
        for (c, inc) in incr.iter().enumerate() {
            row[c] = inc[i];
        }
        a.push(row);
        b.push(0.0);
    }
    for c in 0..k {
        let mut row = vec![0.0; n];
        row[c] = 1.0;
        row[k] = -1.0;
        row[k + 1 + c] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    match crate::lp::solve(&cost, &a, &b) {
        LpOutcome::Optimal { x, value } => Some((x[..k].to_vec(), -value)),
        _ => None,
    }
}

/// A position with nonnegative gain against every child increment and
/// strictly positive total gain; exists exactly when the weights LP fails.
fn one_step_witness(incr: &[Vec<f64>], d: usize) -> Vec<f64> {
    let k = incr.len();
    // Variables: u_1..u_d, v_1..v_d (theta = u - v), g_1..g_k.
    let n = 2 * d + k;
    let mut cost = vec![0.0; n];
    for c in 0..k {
        cost[2 * d + c] = -1.0;
    }
    let mut lp = Builder::new(n);
    lp.cost(cost);
    for c in 0..k {
        let mut row = vec![0.0; n];
        for i in 0..d {
            row[i] = incr[c][i];
            row[d + i] = -incr[c][i];
        }
        row[2 * d + c] = -1.0;
        lp.eq(row, 0.0);
    }
    for i in 0..2 * d {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        lp.le(row, 1.0);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, value } => {
            assert!(value < -1e-10, "one-step witness sought where none exists (gain {value})");
            let theta: Vec<f64> = (0..d).map(|i| x[i] - x[d + i]).collect();
            let sup = theta.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
            theta.iter().map(|&t| t / sup).collect()
        }
        other => panic!("witness LP must be bounded and feasible, got {other:?}"),
    }
}

/// Sphere-search configuration for homogeneous no-arbitrage checks.
#[derive(Debug, Clone)]
pub struct SphereSearchConfig {
    /// Cap on deterministic sign-lattice candidates (`3^D - 1` when it fits).
    pub sign_lattice_cap: usize,
    /// Additional seeded random directions on the unit sup-norm sphere.
    pub random_candidates: usize,
    /// Candidates refined by coordinate descent, best margins first.
    pub refine_top: usize,
    pub refine_rounds: usize,
    /// Certification slack: refined margins in `[-eps_cert, 0)` are treated
    /// as no-arbitrage but sit on the numerical boundary.
    pub eps_cert: f64,
    /// Hard cap on total candidates.
    pub budget: usize,
    pub seed: u64,
}

impl Default for SphereSearchConfig {
    fn default() -> Self {
        SphereSearchConfig {
            sign_lattice_cap: 20_000,
            random_candidates: 256,
            refine_top: 8,
            refine_rounds: 48,
            eps_cert: 1e-7,
            budget: 200_000,
            seed: 99,
        }
    }
}

fn flat_to_strategy(
    tree: &Arc<ScenarioTree>,
    decision: &[NodeId],
    flat: &[f64],
) -> AdaptedStrategy {
    let d = tree.dim();
    let mut s = AdaptedStrategy::zero(tree);
    for (i, &node) in decision.iter().enumerate() {
        s.set(node, flat[i * d..(i + 1) * d].to_vec());
    }
    s
}

/// No-arbitrage search for positively homogeneous recession models.
///
/// Scans nonzero strategies of unit sup-norm (scaling cannot change the
/// verdict) and refines the best candidates by coordinate descent. A
/// refined margin `>= 0` is an arbitrage, zero margins included; otherwise
/// the verdict is no-arbitrage up to the search, with the worst margin found.
pub fn na_check_homogeneous(
    rec: &RecessionIntegrand,
    cfg: &SphereSearchConfig,
) -> Result<NaVerdict, ArbitrageError> {
    let tree = rec.tree().clone();
    let decision = tree.decision_nodes();
    let dims = tree.dim() * decision.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let lattice_size = 3usize.checked_pow(dims as u32).unwrap_or(usize::MAX);
    if lattice_size.saturating_sub(1) <= cfg.sign_lattice_cap {
        let mut pattern = vec![-1.0f64; dims];
        'outer: loop {
            if pattern.iter().any(|&p| p != 0.0) {
                candidates.push(pattern.clone());
            }
            let mut i = 0;
            loop {
                if i == dims {
                    break 'outer;
                }
                pattern[i] += 1.0;
                if pattern[i] <= 1.0 {
                    break;
                }
                pattern[i] = -1.0;
                i += 1;
            }
        }
    } else {
        for _ in 0..cfg.sign_lattice_cap {
            candidates
                .push((0..dims).map(|_| [-1.0, 0.0, 1.0][rng.random_range(0..3)]).collect());
        }
    }
    for _ in 0..cfg.random_candidates {
        let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().any(|&x| x != 0.0) {
            candidates.push(v);
        }
    }
    if candidates.len() > cfg.budget {
        return Err(ArbitrageError::SearchBudgetExceeded {
            candidates: candidates.len(),
            cap: cfg.budget,
        });
    }

    let normalize = |v: &[f64]| -> Vec<f64> {
        let sup = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        v.iter().map(|&x| x / sup).collect()
    };
    let eval_flat =
        |flat: &[f64]| -> f64 { margin(rec, &flat_to_strategy(&tree, &decision, flat)) };

    let mut scored: Vec<(Vec<f64>, f64)> = candidates
        .into_iter()
        .map(|v| {
            let v = normalize(&v);
            let m = eval_flat(&v);
            (v, m)
        })
        .collect();
    let total = scored.len();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    scored.truncate(cfg.refine_top.max(1));

    let mut best = scored[0].clone();
    for (start, start_margin) in scored {
        if start_margin == f64::NEG_INFINITY {
            continue;
        }
        let mut point = start;
        let mut value = start_margin;
        let mut step = 0.5;
        for _ in 0..cfg.refine_rounds {
            let mut improved = false;
            for i in 0..dims {
                for sgn in [1.0, -1.0] {
                    let mut probe = point.clone();
                    probe[i] += sgn * step;
                    if probe.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let probe = normalize(&probe);
                    let m = eval_flat(&probe);
                    if m > value {
                        value = m;
                        point = probe;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
        if value > best.1 {
            best = (point, value);
        }
    }

    let (flat, best_margin) = best;
    let strategy = flat_to_strategy(&tree, &decision, &flat);
    if best_margin >= 0.0 {
        let w =
            ArbitrageWitness { strategy, kind: WitnessKind::SphereSearch, margin: best_margin };
        validate_witness(rec, &w);
        Ok(NaVerdict::Arbitrage(w))
    } else {
        Ok(NaVerdict::NaUpToSearch { worst_margin: best_margin, at: strategy, candidates: total })
    }
}

/// Closed-form no-arbitrage certificate for the two-state model: the margin
/// of any position `x` is exactly `-|x|`, strictly negative off zero.
#[derive(Debug, Clone)]
pub struct TwoStateCertificate {
    /// Probe points on which the margin identity was verified exactly.
    pub verified_points: usize,
}

/// Verifies the two-state margin identity on a probe grid; `None` for any
/// other model kind.
pub fn certify_two_state(model: &MarketModel, probes: &[f64]) -> Option<TwoStateCertificate> {
    if !matches!(model.kind(), ModelKind::TwoState) {
        return None;
    }
    let mut checked = 0;
    for &x in probes {
        let worst = model.eval(0, &[x]).min(model.eval(1, &[x]));
        if worst != -x.abs() {
            return None;
        }
        checked += 1;
    }
    Some(TwoStateCertificate { verified_points: checked })
}

/// Viability probe configuration: strategies of growing norm, feasibility
/// against a floor claim, and a cap marking suspicion of unboundedness.
#[derive(Debug, Clone)]
pub struct ViabilityConfig {
    /// Norm ladder `2^0 .. 2^max_norm_exp`.
    pub max_norm_exp: u32,
    pub samples_per_rung: usize,
    /// Guaranteed gains beyond this flag the model as unbounded.
    pub cap: f64,
    pub seed: u64,
}

impl Default for ViabilityConfig {
    fn default() -> Self {
        ViabilityConfig { max_norm_exp: 21, samples_per_rung: 24, cap: 1e6, seed: 17 }
    }
}

#[derive(Debug, Clone)]
pub struct ViabilityReport {
    /// Per norm rung: (norm, best min-over-leaves gain among feasible samples).
    pub rungs: Vec<(f64, Option<f64>)>,
    pub unbounded_suspect: bool,
}

/// Samples strategies of growing norm and tracks the best guaranteed
/// (minimum-over-leaves) gain among those dominating the floor claim.
pub fn viability_probe(
    model: &MarketModel,
    floor: &[f64],
    cfg: &ViabilityConfig,
) -> ViabilityReport {
    let tree = model.tree().clone();
    let decision = tree.decision_nodes();
    let dims = tree.dim() * decision.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rungs = Vec::new();
    let mut unbounded = false;
    for k in 0..=cfg.max_norm_exp {
        let norm = 2.0f64.powi(k as i32);
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for i in 0..dims {
            let mut e = vec![0.0; dims];
            e[i] = 1.0;
            directions.push(e.clone());
            e[i] = -1.0;
            directions.push(e);
        }
        for _ in 0..cfg.samples_per_rung {
            let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sup = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if sup > 0.0 {
                directions.push(v.iter().map(|&x| x / sup).collect());
            }
        }
        let mut best: Option<f64> = None;
        for dir in &directions {
            let flat: Vec<f64> = dir.iter().map(|&x| norm * x).collect();
            let s = flat_to_strategy(&tree, &decision, &flat);
            let values = model.evaluate_hat(&s);
            // The dominated-claim constraint: V(theta) >= g >= floor.
            let feasible = values.iter().zip(floor).all(|(&v, &f)| v >= f - 1e-9);
            if feasible {
                let min_gain = values.iter().cloned().fold(f64::INFINITY, f64::min);
                best = Some(best.map_or(min_gain, |b: f64| b.max(min_gain)));
            }
        }
        if let Some(b) = best {
            if b > cfg.cap {
                unbounded = true;
            }
        }
        rungs.push((norm, best));
        if unbounded {
            break;
        }
    }
    ViabilityReport { rungs, unbounded_suspect: unbounded }
}

/// Pointwise domination report on a lattice of path vectors.
#[derive(Debug, Clone)]
pub struct DominationReport {
    pub dominated: bool,
    /// Largest `V_a - V_b` observed (0 when dominated everywhere).
    pub max_violation: f64,
    pub witness: Option<(usize, Vec<f64>)>,
    pub points_checked: usize,
}

/// Checks `V_a <= V_b` at every `(leaf, lattice point)`.
pub fn domination_check(a: &MarketModel, b: &MarketModel, axes: &[Vec<f64>]) -> DominationReport {
    let tree = a.tree().clone();
    let lattice = crate::grid::cartesian(axes);
    let mut max_violation = 0.0f64;
    let mut witness = None;
    let mut points = 0;
    for x in &lattice {
        for li in 0..tree.leaves().len() {
            points += 1;
            let va = a.eval(li, x);
            let vb = b.eval(li, x);
            if va == f64::NEG_INFINITY {
                continue;
            }
            let gap = va - vb; // +inf when vb = -inf and va finite
            if gap > 1e-12 * (1.0 + va.abs()) && gap > max_violation {
                max_violation = gap;
                witness = Some((li, x.clone()));
            }
        }
    }
    DominationReport {
        dominated: witness.is_none(),
        max_violation,
        witness,
        points_checked: points,
    }
}

/// Outcome of the search for an arbitrage-free frictionless dominator.
#[derive(Debug, Clone)]
pub enum DominatorSearch {
    /// No frictionless model dominates on the lattice at all.
    Infeasible,
    /// A dominating price process exists; its own no-arbitrage verdict is attached.
    Found { prices: Prices, na: NaVerdict },
}

/// Searches for a frictionless model dominating `model` on the lattice, by
/// linear-program feasibility over per-node price increments. Shows that
/// certain non-convex models (the two-state example) cannot be dominated by
/// any arbitrage-free frictionless market.
pub fn frictionless_dominator(model: &MarketModel, axes: &[Vec<f64>]) -> DominatorSearch {
    let tree = model.tree().clone();
    let d = tree.dim();
    let lattice = crate::grid::cartesian(axes);
    // Variables: per non-root node, d increments split into +/- parts.
    let non_root: Vec<NodeId> = (0..tree.num_nodes()).filter(|&id| id != tree.root()).collect();
    let var_of = |node: NodeId, i: usize| -> usize {
        let pos = non_root.iter().position(|&n| n == node).unwrap();
        2 * (pos * d + i)
    };
    let n_vars = 2 * non_root.len() * d;
    let mut lp = Builder::new(n_vars);
    // Small-increment regularization keeps the found dominator deterministic.
    lp.cost(vec![1.0; n_vars]);
    for x in &lattice {
        for li in 0..tree.leaves().len() {
            let va = model.eval(li, x);
            if va == f64::NEG_INFINITY {
                continue;
            }
            // sum_t <x_t, dS_{path[t+1]}> >= va  as  -sum ... <= -va
            let mut row = vec![0.0; n_vars];
            let path = tree.path(li);
            for t in 0..tree.horizon() {
                for i in 0..d {
                    let v = var_of(path[t + 1], i);
                    row[v] -= x[t * d + i];
                    row[v + 1] += x[t * d + i];
                }
            }
            lp.le(row, -va);
        }
    }
    match lp.solve() {
        LpOutcome::Infeasible => DominatorSearch::Infeasible,
        LpOutcome::Unbounded => unreachable!("regularized feasibility LP cannot be unbounded"),
        LpOutcome::Optimal { x, .. } => {
            let mut prices = vec![vec![0.0; d]; tree.num_nodes()];
            // Root at 0; accumulate increments down the tree.
            let mut stack = vec![tree.root()];
            while let Some(node) = stack.pop() {
                let parent_price = prices[node].clone();
                for &c in &tree.node(node).children {
                    for (i, base) in parent_price.iter().enumerate() {
                        let v = var_of(c, i);
                        prices[c][i] = base + x[v] - x[v + 1];
                    }
                    stack.push(c);
                }
            }
            let rec = linear_recession(&tree, prices.clone());
            let na = na_check_linear(&rec).expect("linear recession");
            DominatorSearch::Found { prices, na }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::model::two_state_model;
    use crate::recession::recession_analytic;
    use crate::testutil::*;
    use crate::tree::ScenarioTree;

    #[test]
    fn binomial_certified_with_third_weights() {
        let (_, model) = binomial_frictionless();
        let rec = recession_analytic(&model).unwrap();
        match na_check_linear(&rec).unwrap() {
            NaVerdict::NaCertified(cert) => {
                let w = &cert.weights[&0];
                assert!((w[0] - 1.0 / 3.0).abs() < 1e-9);
                assert!((w[1] - 2.0 / 3.0).abs() < 1e-9);
                assert!(cert.min_weight > 0.0);
                assert_eq!(cert.rank_report[&0].0, 1);
            }
            other => panic!("expected certificate, got {other:?}"),
        }
    }

    #[test]
    fn certificate_weights_are_martingale_weights() {
        let (tree, model) = binomial_frictionless();
        let rec = recession_analytic(&model).unwrap();
        let NaVerdict::NaCertified(cert) = na_check_linear(&rec).unwrap() else {
            panic!("expected certificate");
        };
        // Soundness: strictly positive, sum to 1, zero-mean increments.
        for (node, w) in &cert.weights {
            let children = &tree.node(*node).children;
            assert!(w.iter().all(|&wi| wi > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let prices = rec.linear_prices().unwrap();
            let mean: f64 = children
                .iter()
                .zip(w)
                .map(|(&c, &wi)| wi * (prices[c][0] - prices[*node][0]))
                .sum();
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_tree_yields_witness() {
        let (_, model) = monotone_frictionless();
        let rec = recession_analytic(&model).unwrap();
        match na_check_linear(&rec).unwrap() {
            NaVerdict::Arbitrage(w) => {
                assert!(matches!(w.kind, WitnessKind::OneStep { node: 0 }));
                assert!(w.margin > 0.0);
                assert!(w.strategy.get(0)[0] > 0.0, "long position expected");
            }
            other => panic!("expected arbitrage, got {other:?}"),
        }
    }

    #[test]
    fn duplicated_asset_yields_redundancy_witness() {
        // Two identical assets: kernel direction (1, -1), gains identically 0.
        let tree = ScenarioTree::one_step(2, &[0.5, 0.5]).unwrap();
        let mut prices = vec![vec![0.0, 0.0]; 3];
        prices[0] = vec![1.0, 1.0];
        prices[1] = vec![2.0, 2.0];
        prices[2] = vec![0.5, 0.5];
        let model = crate::model::frictionless(&tree, prices).unwrap();
        let rec = recession_analytic(&model).unwrap();
        match na_check_linear(&rec).unwrap() {
            NaVerdict::Arbitrage(w) => {
                assert!(matches!(w.kind, WitnessKind::Redundancy { node: 0 }));
                let theta = w.strategy.get(0);
                assert!((theta[0] + theta[1]).abs() < 1e-9, "kernel is the (1,-1) direction");
                assert!(w.margin.abs() < 1e-12, "redundancy margin is zero");
            }
            other => panic!("expected redundancy witness, got {other:?}"),
        }
    }

    #[test]
    fn not_linear_rejected() {
        let (_, model) = binomial_proportional(0.1);
        let rec = recession_analytic(&model).unwrap();
        assert!(matches!(na_check_linear(&rec), Err(ArbitrageError::NotLinear(_))));
    }

    #[test]
    fn two_state_na_up_to_search_with_certificate() {
        let (_, model) = two_state_model();
        let rec = recession_analytic(&model).unwrap();
        match na_check_homogeneous(&rec, &SphereSearchConfig::default()).unwrap() {
            NaVerdict::NaUpToSearch { worst_margin, .. } => {
                assert!(worst_margin < -0.5, "margin should be -1 on the sphere: {worst_margin}");
            }
            other => panic!("expected search verdict, got {other:?}"),
        }
        let probes = linspace(-3.0, 3.0, 41);
        let cert = certify_two_state(&model, &probes).expect("closed-form certificate");
        assert_eq!(cert.verified_points, 41);
    }

    #[test]
    fn sphere_search_finds_monotone_arbitrage() {
        let (_, model) = monotone_frictionless();
        let rec = recession_analytic(&model).unwrap();
        match na_check_homogeneous(&rec, &SphereSearchConfig::default()).unwrap() {
            NaVerdict::Arbitrage(w) => {
                assert!(w.margin >= 0.5 - 1e-9);
            }
            other => panic!("expected arbitrage, got {other:?}"),
        }
    }

    #[test]
    fn sphere_search_lob_margin_minus_inf() {
        let tree = ScenarioTree::single_path(1, 2).unwrap();
        let model =
            crate::model::limit_order_book(&tree, 0.3, vec![1.0; 3], vec![5.0; 3]).unwrap();
        let rec = recession_analytic(&model).unwrap();
        match na_check_homogeneous(&rec, &SphereSearchConfig::default()).unwrap() {
            NaVerdict::NaUpToSearch { worst_margin, .. } => {
                assert_eq!(worst_margin, f64::NEG_INFINITY);
            }
            other => panic!("expected search verdict, got {other:?}"),
        }
    }

    #[test]
    fn linear_and_homogeneous_agree_on_random_frictionless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..24 {
            let horizon = 1 + case % 3;
            let branching = 2 + case % 2;
            let d = 1 + (case / 3) % 2;
            let tree = ScenarioTree::uniform(d, horizon, branching).unwrap();
            let mut prices = vec![vec![0.0; d]; tree.num_nodes()];
            for node in 0..tree.num_nodes() {
                prices[node] = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
            }
            let model = crate::model::frictionless(&tree, prices).unwrap();
            let rec = recession_analytic(&model).unwrap();
            let linear = na_check_linear(&rec).unwrap();
            let search = na_check_homogeneous(&rec, &SphereSearchConfig::default()).unwrap();
            assert_eq!(
                linear.is_arbitrage(),
                search.is_arbitrage(),
                "case {case}: linear {linear:?} vs search {search:?}"
            );
        }
    }

    #[test]
    fn search_verdict_scale_invariant() {
        // The margin scales linearly, so the sign is scale-invariant and the
        // unit-sphere search loses nothing.
        let (_, model) = two_state_model();
        let rec = recession_analytic(&model).unwrap();
        let tree = rec.tree().clone();
        let mut s = AdaptedStrategy::zero(&tree);
        s.set(0, vec![0.4]);
        let m1 = margin(&rec, &s);
        let m2 = margin(&rec, &s.scaled(5.0));
        assert!((m2 - 5.0 * m1).abs() < 1e-12);
        assert_eq!(m1 < 0.0, m2 < 0.0);
    }

    #[test]
    fn viability_probe_examples() {
        // NA binomial with floor -1: guaranteed gains stay bounded.
        let (_, model) = binomial_frictionless();
        let report = viability_probe(&model, &[-1.0, -1.0], &ViabilityConfig::default());
        assert!(!report.unbounded_suspect);

        // Monotone tree: scaling the arbitrage blows past the cap.
        let (_, model) = monotone_frictionless();
        let report = viability_probe(&model, &[-1.0, -1.0], &ViabilityConfig::default());
        assert!(report.unbounded_suspect);

        // V = 0: not arbitrage-free (zero margins) yet clearly viable.
        let (tree, _) = binomial_frictionless();
        let zero_model = crate::model::frictionless(&tree, vec![vec![1.0]; 3]).unwrap();
        let report = viability_probe(&zero_model, &[0.0, 0.0], &ViabilityConfig::default());
        assert!(!report.unbounded_suspect);
        let rec = recession_analytic(&zero_model).unwrap();
        assert!(na_check_linear(&rec).unwrap().is_arbitrage());
    }

    #[test]
    fn proportional_costs_dominated_by_frictionless() {
        let (_, prop) = binomial_proportional(0.2);
        let (_, fl) = binomial_frictionless();
        let axes = vec![linspace(-2.0, 2.0, 21)];
        let report = domination_check(&prop, &fl, &axes);
        assert!(report.dominated);
        // And reflexivity.
        let report = domination_check(&fl, &fl, &axes);
        assert!(report.dominated);
    }

    #[test]
    fn two_state_has_no_arbitrage_free_frictionless_dominator() {
        let (_, model) = two_state_model();
        let axes = vec![linspace(-2.0, 2.0, 21)];
        match frictionless_dominator(&model, &axes) {
            DominatorSearch::Infeasible => {}
            DominatorSearch::Found { .. } => panic!("two-state model admits no dominator"),
        }
    }

    #[test]
    fn dominated_model_inherits_no_arbitrage() {
        // Proportional costs <= frictionless and frictionless passes, so the
        // dominated model must also pass; record the implication instance-wise.
        let (_, prop) = binomial_proportional(0.2);
        let (_, fl) = binomial_frictionless();
        let axes = vec![linspace(-2.0, 2.0, 21)];
        let dom = domination_check(&prop, &fl, &axes);
        let na_fl = na_check_linear(&recession_analytic(&fl).unwrap()).unwrap();
        if dom.dominated && !na_fl.is_arbitrage() {
            let rec = recession_analytic(&prop).unwrap();
            let na_prop = na_check_homogeneous(&rec, &SphereSearchConfig::default()).unwrap();
            assert!(!na_prop.is_arbitrage(), "dominated model cannot have arbitrage");
        }
    }
}
