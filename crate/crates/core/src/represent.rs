//! Executable representation theory: axiom audits, localized suprema
//! `p_{q,r}`, reconstruction of an upper-semicontinuous integrand from a
//! black-box functional, sequential semicontinuity checks, and the
//! usc/lsc envelope pair.
//!
//! On a finite tree the essential supremum over adapted strategies inside a
//! sup-norm ball localizes per leaf: any point of the ball is attained by
//! pasting it into an adapted strategy, and locality makes the paste
//! invisible off the leaf's atom. So `p_{q,r}` reduces to one scalar
//! maximization per leaf, which is what this module computes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{cartesian, linspace, BoxSearchConfig, GridError};
use crate::model::MarketFunctional;
use crate::tree::AdaptedStrategy;

#[derive(Debug, Error)]
pub enum RepresentError {
    #[error("refinement budget exceeded during ball maximization")]
    RefinementBudgetExceeded,
    #[error("grid too coarse: ladder did not stabilize (worst tail gap {worst_gap:e} > {tol:e})")]
    GridTooCoarse { worst_gap: f64, tol: f64 },
}

impl From<GridError> for RepresentError {
    fn from(_: GridError) -> Self {
        RepresentError::RefinementBudgetExceeded
    }
}

/// Outcome of the normalization (A1) and locality (A2) audit.
#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub a1_ok: bool,
    /// Leaves where the zero strategy earns a nonzero value.
    pub a1_violations: Vec<(usize, f64)>,
    pub a2_ok: bool,
    pub a2_violations: Vec<A2Violation>,
    /// Random strategies sampled per (time, atom) pair.
    pub samples_per_atom: usize,
}

impl AxiomReport {
    pub fn ok(&self) -> bool {
        self.a1_ok && self.a2_ok
    }
}

/// A failed locality identity: modifying the strategy off the atom changed
/// the outcome on the atom.
#[derive(Debug, Clone)]
pub struct A2Violation {
    pub time: usize,
    pub atom_node: usize,
    pub leaf_idx: usize,
    pub lhs: f64,
    pub rhs: f64,
}

fn ext_eq(a: f64, b: f64) -> bool {
    (a == b) || (a == f64::NEG_INFINITY && b == f64::NEG_INFINITY)
}

/// Audits A1 exactly and A2 exhaustively over all `(t, atom)` pairs with
/// `budget` random strategies per pair. Both identities are required to hold
/// exactly, up to extended-real equality; failures are report entries, not
/// errors.
pub fn check_axioms(model: &dyn MarketFunctional, budget: usize, seed: u64) -> AxiomReport {
    let tree = model.tree().clone();
    let zero = AdaptedStrategy::zero(&tree);
    let v0 = model.evaluate(&zero);
    let a1_violations: Vec<(usize, f64)> =
        v0.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a2_violations = Vec::new();
    for t in 0..tree.horizon() {
        for atom in tree.ft_atoms(t) {
            for _ in 0..budget {
                let theta = AdaptedStrategy::from_fn(&tree, |_| {
                    (0..tree.dim()).map(|_| rng.random_range(-2.0..2.0)).collect()
                });
                // Zero the time-t decision off the atom.
                let mut masked = theta.clone();
                for node in tree.nodes_at(t) {
                    if node != atom.node && !tree.is_leaf(node) {
                        masked.set(node, vec![0.0; tree.dim()]);
                    }
                }
                let lhs = model.evaluate(&theta);
                let rhs = model.evaluate(&masked);
                for &li in &atom.leaf_indices {
                    if !ext_eq(lhs[li], rhs[li]) {
                        a2_violations.push(A2Violation {
                            time: t,
                            atom_node: atom.node,
                            leaf_idx: li,
                            lhs: lhs[li],
                            rhs: rhs[li],
                        });
                    }
                }
            }
        }
    }
    AxiomReport {
        a1_ok: a1_violations.is_empty(),
        a1_violations,
        a2_ok: a2_violations.is_empty(),
        a2_violations,
        samples_per_atom: budget,
    }
}

/// Controls the per-leaf ball maximization behind `p_{q,r}`.
#[derive(Debug, Clone)]
pub struct PqrConfig {
    pub search: BoxSearchConfig,
    /// Open balls are realized as closed balls shrunk by this relative amount.
    pub open_shrink: f64,
}

impl Default for PqrConfig {
    fn default() -> Self {
        PqrConfig {
            search: BoxSearchConfig {
                points_per_axis: 17,
                refine_rounds: 28,
                top_k: 3,
                ..Default::default()
            },
            open_shrink: 1e-9,
        }
    }
}

/// Localized supremum `p_{q,r}` per leaf: the essential supremum of the
/// functional over adapted strategies in the open sup-norm ball of radius
/// `r` around the deterministic strategy `q`.
pub fn p_qr(
    model: &dyn MarketFunctional,
    q: &[f64],
    r: f64,
    cfg: &PqrConfig,
) -> Result<Vec<f64>, RepresentError> {
    assert!(r > 0.0, "radius must be positive");
    let tree = model.tree().clone();
    let n = tree.dim() * tree.horizon();
    assert_eq!(q.len(), n);
    let shrunk = r * (1.0 - cfg.open_shrink);
    let lo: Vec<f64> = q.iter().map(|&c| c - shrunk).collect();
    let hi: Vec<f64> = q.iter().map(|&c| c + shrunk).collect();
    let leaves = tree.leaves().len();
    let mut out = Vec::with_capacity(leaves);
    for li in 0..leaves {
        let (_, mut best) = crate::grid::maximize_on_box(&lo, &hi, &cfg.search, |x| {
            model.evaluate_deterministic(x)[li]
        })?;
        // The center is in every ball; it pins the lower bound exactly.
        let center = model.evaluate_deterministic(q)[li];
        if center > best {
            best = center;
        }
        out.push(best);
    }
    Ok(out)
}

/// Finite truncation of the countable reconstruction index set: a lattice of
/// centers and a dyadic radius ladder `2^-1, ..., 2^-depth`.
#[derive(Debug, Clone)]
pub struct ReconstructionGrid {
    /// One axis per path-vector coordinate (`d * T` of them).
    pub axes: Vec<Vec<f64>>,
    /// Strictly decreasing radii in `(0, 1)`.
    pub radii: Vec<f64>,
}

impl ReconstructionGrid {
    /// Uniform lattice with `points` per axis on `[-b, b]` and ladder depth `depth`.
    pub fn symmetric(n_axes: usize, b: f64, points: usize, depth: usize) -> Self {
        assert!(depth >= 2, "need at least two rungs to take a limit");
        let axes = vec![linspace(-b, b, points); n_axes];
        let radii = (1..=depth).map(|k| 0.5f64.powi(k as i32)).collect();
        ReconstructionGrid { axes, radii }
    }

    pub fn lattice(&self) -> Vec<Vec<f64>> {
        cartesian(&self.axes)
    }
}

/// Tabulated reconstruction of the integrand from ball suprema.
#[derive(Debug, Clone)]
pub struct ReconstructionTable {
    pub lattice: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// `p[leaf][lattice point][rung]`.
    pub p: Vec<Vec<Vec<f64>>>,
    /// Reconstructed value per `[leaf][lattice point]`.
    pub values: Vec<Vec<f64>>,
    /// Functional evaluated at the lattice point, per `[leaf][lattice point]`.
    pub direct: Vec<Vec<f64>>,
}

impl ReconstructionTable {
    pub fn value(&self, leaf_idx: usize, point_idx: usize) -> f64 {
        self.values[leaf_idx][point_idx]
    }

    /// Largest |reconstructed - direct| over finite entries.
    pub fn max_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for (vr, vd) in self.values.iter().zip(&self.direct) {
            for (&a, &b) in vr.iter().zip(vd) {
                if a.is_finite() && b.is_finite() {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}

/// Limit of a monotone dyadic ladder as `r -> 0`: linear tail extrapolation,
/// exact whenever the tail is affine in `r` (every piecewise-linear model
/// once the last rung clears the kinks).
fn ladder_limit(values: &[f64]) -> f64 {
    let m = values.len();
    let last = values[m - 1];
    let prev = values[m - 2];
    if last.is_finite() && prev.is_finite() {
        2.0 * last - prev
    } else {
        last
    }
}

/// Stabilization config for [`reconstruct_integrand`] and [`envelopes`].
#[derive(Debug, Clone)]
pub struct ReconstructConfig {
    pub pqr: PqrConfig,
    /// Maximum movement of the extrapolated limit across the last two rungs
    /// before the grid is declared too coarse.
    pub stabilization_tol: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig { pqr: PqrConfig::default(), stabilization_tol: 1e-6 }
    }
}

/// Reconstructs the upper-semicontinuous integrand on the lattice from ball
/// suprema only: per lattice point the infimum over the truncated index set,
/// refined by extrapolating the radius ladder to zero and clamped between
/// the center evaluation (a certain lower bound) and the smallest-ball
/// supremum (a certain upper bound).
pub fn reconstruct_integrand(
    model: &dyn MarketFunctional,
    grid: &ReconstructionGrid,
    cfg: &ReconstructConfig,
) -> Result<ReconstructionTable, RepresentError> {
    let tree = model.tree().clone();
    let leaves = tree.leaves().len();
    let lattice = grid.lattice();
    let rungs = grid.radii.len();

    let mut p = vec![vec![vec![0.0; rungs]; lattice.len()]; leaves];
    let mut direct = vec![vec![0.0; lattice.len()]; leaves];
    for (qi, q) in lattice.iter().enumerate() {
        let center = model.evaluate_deterministic(q);
        for (k, &r) in grid.radii.iter().enumerate() {
            let vals = p_qr(model, q, r, &cfg.pqr)?;
            for li in 0..leaves {
                p[li][qi][k] = vals[li];
            }
        }
        for li in 0..leaves {
            direct[li][qi] = center[li];
        }
    }

    let mut values = vec![vec![0.0; lattice.len()]; leaves];
    let mut worst_gap = 0.0f64;
    for li in 0..leaves {
        for (xi, x) in lattice.iter().enumerate() {
            // Infimum over all table pairs whose ball contains x.
            let mut table_min = f64::INFINITY;
            for (qi, q) in lattice.iter().enumerate() {
                let dist = x.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
                for (k, &r) in grid.radii.iter().enumerate() {
                    if dist < r {
                        table_min = table_min.min(p[li][qi][k]);
                    }
                }
            }
            let ladder = &p[li][xi];
            let ext = ladder_limit(ladder);
            // Stabilization: the extrapolated limit must have stopped moving.
            if rungs >= 3 {
                let prev_ext = ladder_limit(&ladder[..rungs - 1]);
                if ext.is_finite() && prev_ext.is_finite() {
                    worst_gap = worst_gap.max((ext - prev_ext).abs());
                }
            }
            let mut v = table_min.min(ext);
            let lower = direct[li][xi];
            let upper = ladder[rungs - 1];
            if v < lower {
                v = lower;
            }
            if v > upper {
                v = upper;
            }
            values[li][xi] = v;
        }
    }
    if worst_gap > cfg.stabilization_tol {
        return Err(RepresentError::GridTooCoarse { worst_gap, tol: cfg.stabilization_tol });
    }
    Ok(ReconstructionTable { lattice, radii: grid.radii.clone(), p, values, direct })
}

/// The usc reconstruction together with its lsc mirror and the pointwise gap.
#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub lattice: Vec<Vec<f64>>,
    /// Upper-semicontinuous reconstruction per `[leaf][lattice point]`.
    pub upper: Vec<Vec<f64>>,
    /// Lower-semicontinuous reconstruction per `[leaf][lattice point]`.
    pub lower: Vec<Vec<f64>>,
    /// `upper - lower` per `[leaf][lattice point]` (0 where both infinite).
    pub gap: Vec<Vec<f64>>,
}

impl EnvelopePair {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().flat_map(|g| g.iter().copied()).fold(0.0f64, f64::max)
    }

    pub fn gap_at(&self, leaf_idx: usize, point_idx: usize) -> f64 {
        self.gap[leaf_idx][point_idx]
    }
}

/// Builds the envelope pair: `upper` from ball suprema (inf over covers),
/// `lower` from the mirrored construction (ball infima, sup over covers).
/// A continuous model has gap 0; a fixed-fee model shows the fee as the gap
/// at the kink.
pub fn envelopes(
    model: &dyn MarketFunctional,
    grid: &ReconstructionGrid,
    cfg: &ReconstructConfig,
) -> Result<EnvelopePair, RepresentError> {
    let upper_table = reconstruct_integrand(model, grid, cfg)?;

    // Mirror: minimize over balls instead of maximizing.
    let tree = model.tree().clone();
    let leaves = tree.leaves().len();
    let lattice = upper_table.lattice.clone();
    let rungs = grid.radii.len();
    let mut lower = vec![vec![0.0; lattice.len()]; leaves];
    for (xi, x) in lattice.iter().enumerate() {
        let n = x.len();
        let center = model.evaluate_deterministic(x);
        let mut ladders = vec![Vec::with_capacity(rungs); leaves];
        for &r in &grid.radii {
            let shrunk = r * (1.0 - cfg.pqr.open_shrink);
            let lo: Vec<f64> = (0..n).map(|i| x[i] - shrunk).collect();
            let hi: Vec<f64> = (0..n).map(|i| x[i] + shrunk).collect();
            for (li, ladder) in ladders.iter_mut().enumerate() {
                let (_, mut m) = crate::grid::minimize_on_box(&lo, &hi, &cfg.pqr.search, |p| {
                    model.evaluate_deterministic(p)[li]
                })?;
                if center[li] < m {
                    m = center[li];
                }
                ladder.push(m);
            }
        }
        for li in 0..leaves {
            // Ball infima increase as r -> 0; extrapolate and clamp from above
            // by the center value, from below by the last rung.
            let ladder = &ladders[li];
            let ext = ladder_limit(ladder);
            let mut v = ext.max(ladder[rungs - 1]);
            if v > center[li] {
                v = center[li];
            }
            lower[li][xi] = v;
        }
    }

    let mut gap = vec![vec![0.0; lattice.len()]; leaves];
    for li in 0..leaves {
        for xi in 0..lattice.len() {
            let u = upper_table.values[li][xi];
            let l = lower[li][xi];
            gap[li][xi] = if u == l { 0.0 } else { u - l };
        }
    }
    Ok(EnvelopePair { lattice, upper: upper_table.values, lower, gap })
}

/// Sequential upper-semicontinuity probe.
#[derive(Debug, Clone)]
pub struct UscReport {
    pub ok: bool,
    pub violations: Vec<UscViolation>,
    pub sequences_checked: usize,
}

#[derive(Debug, Clone)]
pub struct UscViolation {
    pub leaf_idx: usize,
    /// Estimated limsup of values along the sequence.
    pub limsup: f64,
    /// Value at the limit strategy.
    pub at_limit: f64,
    /// Sup-norm of the direction along which the sequence approaches.
    pub direction_norm: f64,
}

/// Checks `limsup V(theta_n) <= V(theta)` per leaf for sampled strategy
/// sequences `theta_n = theta + 2^-n * u` converging uniformly. Reports a
/// witness sequence per violation.
pub fn check_usc(model: &dyn MarketFunctional, targets: usize, seed: u64, tol: f64) -> UscReport {
    let tree = model.tree().clone();
    let dims = tree.dim() * tree.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut sequences = 0usize;

    let mut base_points: Vec<Vec<f64>> = vec![vec![0.0; dims]];
    for _ in 1..targets.max(1) {
        base_points.push((0..dims).map(|_| rng.random_range(-1.5..1.5)).collect());
    }
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..dims {
        let mut e = vec![0.0; dims];
        e[i] = 1.0;
        directions.push(e.clone());
        e[i] = -1.0;
        directions.push(e);
    }
    directions.push((0..dims).map(|_| rng.random_range(-1.0..1.0)).collect());

    for base in &base_points {
        let at_limit = model.evaluate_deterministic(base);
        for u in &directions {
            sequences += 1;
            let mut tail: Vec<Vec<f64>> = Vec::new();
            for n in 8..=32 {
                let step = 0.5f64.powi(n);
                let x: Vec<f64> = base.iter().zip(u).map(|(b, d)| b + step * d).collect();
                tail.push(model.evaluate_deterministic(&x));
            }
            for li in 0..tree.leaves().len() {
                // limsup along the sequence is governed by its tail.
                let limsup =
                    tail.iter().rev().take(4).map(|v| v[li]).fold(f64::NEG_INFINITY, f64::max);
                let limit_v = at_limit[li];
                let bound = if limit_v == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    limit_v + tol * (1.0 + limit_v.abs())
                };
                if limsup > bound {
                    violations.push(UscViolation {
                        leaf_idx: li,
                        limsup,
                        at_limit: limit_v,
                        direction_norm: u.iter().fold(0.0f64, |m, &d| m.max(d.abs())),
                    });
                }
            }
        }
    }
    UscReport { ok: violations.is_empty(), violations, sequences_checked: sequences }
}
