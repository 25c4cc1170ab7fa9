//! Random polyhedral cones and vector-valued market machinery: polars,
//! Castaing families, relative-interior selections, interior ball radii,
//! cone partial orders, scalarization, vector no-arbitrage, Gram
//! reconstruction, and vector superhedging membership.
//!
//! Everything is per-leaf and exactly polyhedral: cones are given by finite
//! generator lists, polars are computed by extreme-ray enumeration, and
//! membership is decided both through polar inner products and through
//! conic-combination feasibility.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arbitrage::{ArbitrageError, ArbitrageWitness, NaVerdict, WitnessKind};
use crate::grid::axis_points;
use crate::lp::LpOutcome;
use crate::model::{MarketModel, ModelFlags, VectorModel};
use crate::recession::{recession_numeric_leaf, RecessionSchedule};
use crate::tree::{AdaptedStrategy, NodeId, ScenarioTree};

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("degenerate cone at leaf {leaf_idx}: {reason}")]
    DegenerateCone { leaf_idx: usize, reason: String },
    #[error("point is not in the interior of the cone at leaf {0}")]
    NotInterior(usize),
    #[error("point is not in the relative interior of the cone at leaf {0}")]
    NotRelativeInterior(usize),
    #[error("cone mismatch: {0}")]
    ConeMismatch(String),
    #[error("selection misses its target set: {0}")]
    TargetMismatch(String),
    #[error("supplied selections do not span the polar at leaf {leaf_idx}")]
    SingularGram { leaf_idx: usize },
    #[error("scalarizations are not simultaneously representable (residual {residual:e})")]
    InconsistentScalarizations { residual: f64 },
}

const MEMBER_TOL: f64 = 1e-9;
const RAY_TOL: f64 = 1e-10;

/// Orthonormal basis of the nullspace of `m` (empty matrix gives all of `R^n`).
///
/// The matrix is padded with zero rows to at least `n x n` so the SVD
/// carries the full right-singular basis (thin SVDs of wide matrices drop
/// the kernel rows).
fn nullspace(m: &DMatrix<f64>, n: usize) -> Vec<DVector<f64>> {
    if m.nrows() == 0 {
        return (0..n).map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })).collect();
    }
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = RAY_TOL * (1.0 + smax);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    (rank..vt.nrows()).map(|r| vt.row(r).transpose()).collect()
}

/// Extreme rays of `{ y in R^n : C y >= 0 }`, lineality included as +/- pairs.
fn extreme_rays(constraints: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let m = constraints.len();
    let cmat = DMatrix::from_fn(m, n, |r, c| constraints[r][c]);
    let lineality = nullspace(&cmat, n);

    // Work in the orthogonal complement of the lineality space, where the
    // cone is pointed and every extreme ray has n'-1 independent active
    // constraints.
    let l_dim = lineality.len();
    let k = n - l_dim;
    let mut rays: Vec<DVector<f64>> = Vec::new();
    for l in &lineality {
        rays.push(l.clone());
        rays.push(-l.clone());
    }
    if k > 0 {
        // Orthonormal basis of the complement from the full SVD of the
        // lineality basis matrix.
        let q = complement_basis(&lineality, n);
        let qmat = DMatrix::from_fn(n, k, |r, c| q[c][r]);
        let cq = &cmat * &qmat; // m x k

        let rows: Vec<DVector<f64>> = (0..m).map(|r| cq.row(r).transpose()).collect();
        let subset_size = k.saturating_sub(1);
        let mut candidates: Vec<DVector<f64>> = Vec::new();
        for subset in subsets(m, subset_size) {
            let sub = DMatrix::from_fn(subset.len(), k, |r, c| rows[subset[r]][c]);
            let null = nullspace(&sub, k);
            if null.len() != 1 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let w = &null[0] * dir;
                let feasible = rows.iter().all(|row| row.dot(&w) >= -RAY_TOL);
                if feasible {
                    candidates.push(w);
                }
            }
        }
        for w in candidates {
            let lifted = &qmat * &w;
            rays.push(lifted);
        }
    }

    // Normalize and deduplicate.
    let mut out: Vec<DVector<f64>> = Vec::new();
    for r in rays {
        let norm = r.norm();
        if norm < RAY_TOL {
            continue;
        }
        let u = r / norm;
        if !out.iter().any(|v| v.dot(&u) > 1.0 - 1e-9) {
            out.push(u);
        }
    }
    out
}

fn complement_basis(vectors: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    if vectors.is_empty() {
        return (0..n).map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })).collect();
    }
    let m = DMatrix::from_fn(vectors.len(), n, |r, c| vectors[r][c]);
    nullspace(&m, n)
}

fn subsets(m: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, m: usize, size: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            rec(i + 1, m, size, current, out);
            current.pop();
        }
    }
    rec(0, m, size, &mut current, &mut out);
    out
}

/// A single polyhedral cone: generators plus the cached polar generators
/// (which double as facet normals) and an orthonormal basis of its span.
#[derive(Debug, Clone)]
pub struct Cone {
    pub n: usize,
    generators: Vec<DVector<f64>>,
    polar_gens: Vec<DVector<f64>>,
    span: Vec<DVector<f64>>,
}

impl Cone {
    /// Builds from generators; zero generators are stripped. An empty list
    /// yields the zero cone `{0}` (valid internally, rejected for inputs).
    pub fn from_generators(n: usize, gens: &[Vec<f64>]) -> Self {
        let generators: Vec<DVector<f64>> = gens
            .iter()
            .map(|g| DVector::from_column_slice(g))
            .filter(|g| g.norm() > 1e-12)
            .collect();
        for g in &generators {
            assert_eq!(g.len(), n, "generator dimension mismatch");
        }
        let polar_gens = extreme_rays(&generators, n);
        let gen_mat = DMatrix::from_fn(generators.len(), n, |r, c| generators[r][c]);
        let span = if generators.is_empty() {
            Vec::new()
        } else {
            // Row space basis = orthogonal complement of the nullspace.
            complement_basis(&nullspace(&gen_mat, n), n)
        };
        Cone { n, generators, polar_gens, span }
    }

    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    /// Generators of the positive polar `{ y : <x, y> >= 0 for all x in K }`.
    pub fn polar_generators(&self) -> &[DVector<f64>] {
        &self.polar_gens
    }

    pub fn polar(&self) -> Cone {
        let gens: Vec<Vec<f64>> =
            self.polar_gens.iter().map(|g| g.iter().cloned().collect()).collect();
        Cone::from_generators(self.n, &gens)
    }

    /// Dimension of the linear span of the cone.
    pub fn span_dim(&self) -> usize {
        self.span.len()
    }

    /// Solid cones have nonempty interior.
    pub fn is_solid(&self) -> bool {
        self.span_dim() == self.n
    }

    /// Signed membership margin: `min_j <polar_gen_j, x>` (normalized
    /// normals); `+inf` for the full space. Nonnegative means `x in K`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        self.polar_gens.iter().map(|g| g.dot(&v)).fold(f64::INFINITY, f64::min)
    }

    /// Membership through the polar (bipolar theorem route).
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let scale = 1.0 + x.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        self.margin(x) >= -tol * scale
    }

    /// Membership as conic-combination feasibility (the V-representation
    /// route); must agree with [`Cone::contains`] away from the boundary.
    pub fn contains_by_combination(&self, x: &[f64]) -> bool {
        let m = self.generators.len();
        if m == 0 {
            return x.iter().all(|&c| c.abs() <= MEMBER_TOL);
        }
        // Feasibility of G' mu = x, mu >= 0 with slack tolerance absorbed by
        // phase-1: scale x to unit size first.
        let scale = 1.0 + x.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        let a: Vec<Vec<f64>> = (0..self.n)
            .map(|i| (0..m).map(|j| self.generators[j][i]).collect())
            .collect();
        let b: Vec<f64> = x.iter().map(|&c| c / scale).collect();
        let a_scaled: Vec<Vec<f64>> = a;
        matches!(
            crate::lp::solve(&vec![0.0; m], &a_scaled, &b),
            LpOutcome::Optimal { .. }
        )
    }
}

/// A per-leaf polyhedral cone on a tree.
#[derive(Debug, Clone)]
pub struct RandomCone {
    tree: Arc<ScenarioTree>,
    cones: Vec<Cone>,
}

impl RandomCone {
    /// Per-leaf generator lists (leaf order). Zero generators are stripped;
    /// an empty list is a degenerate cone and rejected.
    pub fn build(
        tree: &Arc<ScenarioTree>,
        per_leaf: Vec<Vec<Vec<f64>>>,
        n: usize,
    ) -> Result<Self, ConeError> {
        if per_leaf.len() != tree.leaves().len() {
            return Err(ConeError::ConeMismatch(format!(
                "{} generator lists for {} leaves",
                per_leaf.len(),
                tree.leaves().len()
            )));
        }
        let mut cones = Vec::with_capacity(per_leaf.len());
        for (li, gens) in per_leaf.into_iter().enumerate() {
            let cone = Cone::from_generators(n, &gens);
            if cone.generators.is_empty() {
                return Err(ConeError::DegenerateCone {
                    leaf_idx: li,
                    reason: "no nonzero generators".into(),
                });
            }
            cones.push(cone);
        }
        Ok(RandomCone { tree: Arc::clone(tree), cones })
    }

    /// The same cone at every leaf.
    pub fn constant(tree: &Arc<ScenarioTree>, gens: Vec<Vec<f64>>, n: usize) -> Result<Self, ConeError> {
        let per_leaf = vec![gens; tree.leaves().len()];
        Self::build(tree, per_leaf, n)
    }

    pub fn tree(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    pub fn n(&self) -> usize {
        self.cones[0].n
    }

    pub fn cone(&self, leaf_idx: usize) -> &Cone {
        &self.cones[leaf_idx]
    }

    pub fn leaves(&self) -> usize {
        self.cones.len()
    }

    /// Per-leaf positive polar. May be lower-dimensional (even `{0}`), so
    /// the result is built without the nonempty-generator validation.
    pub fn polar(&self) -> RandomCone {
        RandomCone { tree: self.tree.clone(), cones: self.cones.iter().map(Cone::polar).collect() }
    }
}

/// Where a selection is claimed to live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionTarget {
    PolarCone,
    RiPolarCone,
    RiCone,
}

/// A per-leaf vector selection.
#[derive(Debug, Clone)]
pub struct ConeSelection {
    pub values: Vec<Vec<f64>>,
    pub target: SelectionTarget,
}

impl ConeSelection {
    pub fn value(&self, leaf_idx: usize) -> &[f64] {
        &self.values[leaf_idx]
    }
}

/// Relative-interior selection of the cone: the dyadically weighted sum
/// `sum_k 2^-k g_k` over normalized generators. Positive weights on a full
/// generating set land strictly inside the relative interior.
pub fn ri_selection(cone: &RandomCone) -> Result<ConeSelection, ConeError> {
    let mut values = Vec::with_capacity(cone.leaves());
    for li in 0..cone.leaves() {
        let c = cone.cone(li);
        if c.generators.is_empty() {
            return Err(ConeError::DegenerateCone { leaf_idx: li, reason: "zero cone".into() });
        }
        let mut rho = DVector::zeros(cone.n());
        for (k, g) in c.generators.iter().enumerate() {
            rho += g / g.norm() * 0.5f64.powi(k as i32 + 1);
        }
        values.push(rho.iter().cloned().collect());
    }
    let sel = ConeSelection { values, target: SelectionTarget::RiCone };
    // The construction guarantees relative interiority; verify anyway.
    let radii = affine_ball_radius(cone, &sel)?;
    debug_assert!(radii.iter().all(|&r| r > 0.0));
    Ok(sel)
}

/// Castaing family of the polar cone: selections whose conic rational
/// combinations are dense in (here: exactly generate) each `K°(omega)`.
/// Contains the normalized polar generators, the relative-interior
/// selection, and the ri-shifted family `(1/m) rho + (1 - 1/m) phi`.
pub fn castaing(cone: &RandomCone) -> Result<Vec<ConeSelection>, ConeError> {
    let polar = cone.polar();
    let rho = ri_selection(&polar)?;
    let leaves = cone.leaves();
    let max_gens = (0..leaves).map(|li| polar.cone(li).generators.len()).max().unwrap_or(0);
    let mut family = Vec::new();
    // Generator selections (cycled so every leaf has a value at index k).
    for k in 0..max_gens {
        let values: Vec<Vec<f64>> = (0..leaves)
            .map(|li| {
                let gens = &polar.cone(li).generators;
                let g = &gens[k % gens.len()];
                (g / g.norm()).iter().cloned().collect()
            })
            .collect();
        family.push(ConeSelection { values, target: SelectionTarget::PolarCone });
    }
    // The ri selection itself.
    family.push(ConeSelection { values: rho.values.clone(), target: SelectionTarget::RiPolarCone });
    // ri-shifted copies of the generator selections: strictly inside ri K°.
    for m in [2.0f64, 4.0] {
        for k in 0..max_gens {
            let values: Vec<Vec<f64>> = (0..leaves)
                .map(|li| {
                    let gens = &polar.cone(li).generators;
                    let g = &gens[k % gens.len()];
                    let gn = g / g.norm();
                    let r = DVector::from_column_slice(&rho.values[li]);
                    ((r / m) + gn * (1.0 - 1.0 / m)).iter().cloned().collect()
                })
                .collect();
            family.push(ConeSelection { values, target: SelectionTarget::RiPolarCone });
        }
    }
    Ok(family)
}

/// Largest `r` (halved for safety) with `B_r(point)` inside the cone:
/// half the minimum distance to a facet plane. Requires a solid cone and an
/// interior point; `+inf` for the full space.
pub fn interior_ball_radius(
    cone: &RandomCone,
    point: &ConeSelection,
) -> Result<Vec<f64>, ConeError> {
    let mut out = Vec::with_capacity(cone.leaves());
    for li in 0..cone.leaves() {
        let c = cone.cone(li);
        if !c.is_solid() {
            return Err(ConeError::NotInterior(li));
        }
        out.push(interior_radius_one(c, point.value(li)).ok_or(ConeError::NotInterior(li))?);
    }
    Ok(out)
}

fn interior_radius_one(cone: &Cone, p: &[f64]) -> Option<f64> {
    if cone.polar_gens.is_empty() {
        return Some(f64::INFINITY);
    }
    let v = DVector::from_column_slice(p);
    let mut min_dist = f64::INFINITY;
    for g in &cone.polar_gens {
        // Polar generators are unit vectors: the inner product is the
        // signed distance to the facet hyperplane.
        min_dist = min_dist.min(g.dot(&v));
    }
    if min_dist > 1e-12 {
        Some(0.5 * min_dist)
    } else {
        None
    }
}

/// Ball radius within the affine hull (the linear span, for cones): the
/// facet test projected onto the span. Same halving convention as
/// [`interior_ball_radius`], to which it reduces for solid cones.
pub fn affine_ball_radius(
    cone: &RandomCone,
    point: &ConeSelection,
) -> Result<Vec<f64>, ConeError> {
    let mut out = Vec::with_capacity(cone.leaves());
    for li in 0..cone.leaves() {
        let c = cone.cone(li);
        let p = DVector::from_column_slice(point.value(li));
        if c.generators.is_empty() {
            return Err(ConeError::NotRelativeInterior(li));
        }
        // The point must lie in the span.
        let mut residual = p.clone();
        for b in &c.span {
            let coef = b.dot(&p);
            residual -= b * coef;
        }
        if residual.norm() > 1e-9 * (1.0 + p.norm()) {
            return Err(ConeError::NotRelativeInterior(li));
        }
        // Project everything onto span coordinates and reuse the solid case.
        let s = c.span.len();
        let proj = |v: &DVector<f64>| -> Vec<f64> { c.span.iter().map(|b| b.dot(v)).collect() };
        let gens: Vec<Vec<f64>> = c.generators.iter().map(&proj).collect();
        let projected = Cone::from_generators(s, &gens);
        let p_proj = proj(&p);
        out.push(
            interior_radius_one(&projected, &p_proj).ok_or(ConeError::NotRelativeInterior(li))?,
        );
    }
    Ok(out)
}

/// Cone partial order `X >= Y` iff `X - Y in K(omega)` at every leaf,
/// decided through polar inner products.
pub fn cone_leq(
    y: &[Vec<f64>],
    x: &[Vec<f64>],
    cone: &RandomCone,
) -> Result<bool, ConeError> {
    Ok(order_margin(y, x, cone)? >= -MEMBER_TOL)
}

/// Smallest polar margin of `X - Y` over leaves; nonnegative means
/// `X` dominates `Y` in the cone order.
pub fn order_margin(
    y: &[Vec<f64>],
    x: &[Vec<f64>],
    cone: &RandomCone,
) -> Result<f64, ConeError> {
    if x.len() != cone.leaves() || y.len() != cone.leaves() {
        return Err(ConeError::ConeMismatch("per-leaf vector count".into()));
    }
    let n = cone.n();
    let mut worst = f64::INFINITY;
    for li in 0..cone.leaves() {
        if x[li].len() != n || y[li].len() != n {
            return Err(ConeError::ConeMismatch(format!("vector dimension at leaf {li}")));
        }
        let diff: Vec<f64> = x[li].iter().zip(&y[li]).map(|(a, b)| a - b).collect();
        worst = worst.min(cone.cone(li).margin(&diff));
    }
    Ok(worst)
}

/// Scalarizes a vector model along a polar selection: `V_Z = <Z, V>` with
/// `<Z, -inf> = -inf`. The selection must lie in the relative interior of
/// the polar cone at every leaf.
pub fn scalarize(
    model: &VectorModel,
    selection: &ConeSelection,
    cone: &RandomCone,
) -> Result<MarketModel, ConeError> {
    let polar = cone.polar();
    for li in 0..cone.leaves() {
        if !polar.cone(li).contains(selection.value(li), MEMBER_TOL) {
            return Err(ConeError::TargetMismatch(format!(
                "selection leaves the polar cone at leaf {li}"
            )));
        }
    }
    // Relative interiority of the whole selection.
    let probe = ConeSelection { values: selection.values.clone(), target: selection.target };
    affine_ball_radius(&polar, &probe)
        .map_err(|_| ConeError::TargetMismatch("selection is not in ri of the polar".into()))?;

    let vm = model.clone();
    let z = selection.values.clone();
    let flags = ModelFlags {
        positively_homogeneous: model.positively_homogeneous,
        additive: false,
        has_analytic_recession: model.positively_homogeneous,
    };
    Ok(MarketModel::custom(model.tree(), flags, move |_, li, x| match vm.eval(li, x) {
        None => f64::NEG_INFINITY,
        Some(v) => z[li].iter().zip(&v).map(|(a, b)| a * b).sum(),
    }))
}

/// Sphere-search configuration for the vector no-arbitrage check.
#[derive(Debug, Clone)]
pub struct VectorNaConfig {
    pub sign_lattice_cap: usize,
    pub random_candidates: usize,
    pub refine_top: usize,
    pub refine_rounds: usize,
    /// Size of the polar selection family for the scalarized route.
    pub family_size: usize,
    pub seed: u64,
}

impl Default for VectorNaConfig {
    fn default() -> Self {
        VectorNaConfig {
            sign_lattice_cap: 20_000,
            random_candidates: 128,
            refine_top: 6,
            refine_rounds: 40,
            family_size: 64,
            seed: 7,
        }
    }
}

fn sphere_candidates(dims: usize, cfg: &VectorNaConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let lattice_size = 3usize.checked_pow(dims as u32).unwrap_or(usize::MAX);
    if lattice_size.saturating_sub(1) <= cfg.sign_lattice_cap {
        let mut pattern = vec![-1.0f64; dims];
        'outer: loop {
            if pattern.iter().any(|&p| p != 0.0) {
                out.push(pattern.clone());
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
            out.push((0..dims).map(|_| [-1.0, 0.0, 1.0][rng.random_range(0..3)]).collect());
        }
    }
    for _ in 0..cfg.random_candidates {
        let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().any(|&c| c != 0.0) {
            out.push(v);
        }
    }
    out
}

fn normalize_sup(v: &[f64]) -> Vec<f64> {
    let sup = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    v.iter().map(|&x| x / sup).collect()
}

fn flat_to_strategy(tree: &Arc<ScenarioTree>, decision: &[NodeId], flat: &[f64]) -> AdaptedStrategy {
    let d = tree.dim();
    let mut s = AdaptedStrategy::zero(tree);
    for (i, &node) in decision.iter().enumerate() {
        s.set(node, flat[i * d..(i + 1) * d].to_vec());
    }
    s
}

/// Vector no-arbitrage: no nonzero adapted strategy ends with outcomes in
/// the cone at every leaf.
///
/// For positively homogeneous models this is the direct search for
/// `V(theta) >=_K 0`; margins are polar inner products and refined by
/// coordinate descent, zero margins counting as arbitrage. For general
/// models the quantifier over polar selections is approximated by a finite
/// Castaing-derived family plus random strictly positive combinations, and
/// the verdict is only ever no-arbitrage-up-to-search.
pub fn vector_na_check(
    model: &VectorModel,
    cone: &RandomCone,
    cfg: &VectorNaConfig,
) -> Result<NaVerdict, ConeError> {
    if model.positively_homogeneous {
        vector_na_direct(model, cone, cfg)
    } else {
        vector_na_scalarized(model, cone, cfg, &RecessionSchedule::default())
            .map_err(|e| ConeError::ConeMismatch(format!("scalarized search failed: {e}")))
    }
}

fn candidate_margin(model: &VectorModel, cone: &RandomCone, strategy: &AdaptedStrategy) -> f64 {
    let tree = model.tree();
    let mut worst = f64::INFINITY;
    for li in 0..tree.leaves().len() {
        let x = strategy.restrict_to_path(tree, li);
        match model.eval(li, &x) {
            None => return f64::NEG_INFINITY,
            Some(v) => worst = worst.min(cone.cone(li).margin(&v)),
        }
    }
    worst
}

fn vector_na_direct(
    model: &VectorModel,
    cone: &RandomCone,
    cfg: &VectorNaConfig,
) -> Result<NaVerdict, ConeError> {
    let tree = model.tree().clone();
    let decision = tree.decision_nodes();
    let dims = tree.dim() * decision.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let candidates = sphere_candidates(dims, cfg, &mut rng);
    let eval_flat = |flat: &[f64]| -> f64 {
        candidate_margin(model, cone, &flat_to_strategy(&tree, &decision, flat))
    };
    let mut scored: Vec<(Vec<f64>, f64)> = candidates
        .into_iter()
        .map(|v| {
            let v = normalize_sup(&v);
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
                    let probe = normalize_sup(&probe);
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
        Ok(NaVerdict::Arbitrage(ArbitrageWitness {
            strategy,
            kind: WitnessKind::SphereSearch,
            margin: best_margin,
        }))
    } else {
        Ok(NaVerdict::NaUpToSearch { worst_margin: best_margin, at: strategy, candidates: total })
    }
}

/// The scalarized route: margins are infima of `V_Z^inf` over a finite
/// family of relative-interior polar selections. For positively homogeneous
/// models `V_Z^inf = V_Z` and the evaluation is direct; otherwise each
/// scalarization runs the numeric recession ladder.
pub fn vector_na_scalarized(
    model: &VectorModel,
    cone: &RandomCone,
    cfg: &VectorNaConfig,
    schedule: &RecessionSchedule,
) -> Result<NaVerdict, ArbitrageError> {
    let tree = model.tree().clone();
    let decision = tree.decision_nodes();
    let dims = tree.dim() * decision.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xabcd);

    // Family: Castaing-derived ri selections plus random strictly positive
    // combinations of the polar generators.
    let base = castaing(cone).map_err(|e| ArbitrageError::NotLinear(e.to_string()))?;
    let polar = cone.polar();
    let mut family: Vec<ConeSelection> =
        base.into_iter().filter(|s| s.target != SelectionTarget::PolarCone).collect();
    while family.len() < cfg.family_size {
        let values: Vec<Vec<f64>> = (0..cone.leaves())
            .map(|li| {
                let gens = &polar.cone(li).generators();
                let mut v = DVector::zeros(cone.n());
                for g in gens.iter() {
                    v += g * rng.random_range(0.05..1.0);
                }
                v.iter().cloned().collect()
            })
            .collect();
        family.push(ConeSelection { values, target: SelectionTarget::RiPolarCone });
    }

    let scalar_models: Vec<MarketModel> = family
        .iter()
        .map(|z| scalarize(model, z, cone))
        .collect::<Result<_, _>>()
        .map_err(|e| ArbitrageError::NotLinear(e.to_string()))?;

    let margin_of = |strategy: &AdaptedStrategy| -> f64 {
        let mut worst = f64::INFINITY;
        for sm in &scalar_models {
            for li in 0..tree.leaves().len() {
                let x = strategy.restrict_to_path(&tree, li);
                let v = if model.positively_homogeneous {
                    sm.eval(li, &x)
                } else {
                    recession_numeric_leaf(sm, li, &x, schedule).value
                };
                worst = worst.min(v);
                if worst == f64::NEG_INFINITY {
                    return worst;
                }
            }
        }
        worst
    };

    let candidates = sphere_candidates(
        dims,
        &VectorNaConfig { random_candidates: cfg.random_candidates.min(64), ..cfg.clone() },
        &mut rng,
    );
    let mut best_margin = f64::NEG_INFINITY;
    let mut best_strategy = None;
    let total = candidates.len();
    for c in candidates {
        let flat = normalize_sup(&c);
        let s = flat_to_strategy(&tree, &decision, &flat);
        let m = margin_of(&s);
        if m > best_margin {
            best_margin = m;
            best_strategy = Some(s);
        }
    }
    let at = best_strategy.expect("at least one candidate");
    if best_margin >= 0.0 {
        Ok(NaVerdict::Arbitrage(ArbitrageWitness {
            strategy: at,
            kind: WitnessKind::SphereSearch,
            margin: best_margin,
        }))
    } else {
        Ok(NaVerdict::NaUpToSearch { worst_margin: best_margin, at, candidates: total })
    }
}

/// A reconstructed vector model together with the basis bookkeeping.
pub struct GramReconstruction {
    pub model: VectorModel,
    /// Per leaf: indices (into the supplied selection list) of the basis used.
    pub basis: Vec<Vec<usize>>,
    /// Worst verification residual over samples, selections, and leaves.
    pub residual: f64,
}

/// Rebuilds a vector model from scalarizations: per leaf, pick a linearly
/// independent basis `Z_1..Z_s` spanning the polar, solve the Gram system
/// `[<Z_i, Z_j>] alpha = [V_i]` pointwise, and set `V = sum alpha_k Z_k`.
/// Every supplied scalarization is then re-verified against the rebuilt
/// model on the given sample strategies.
pub fn gram_reconstruct(
    scalars: &[(ConeSelection, MarketModel)],
    cone: &RandomCone,
    samples: &[AdaptedStrategy],
) -> Result<GramReconstruction, ConeError> {
    let tree = cone.tree().clone();
    let polar = cone.polar();
    let n = cone.n();
    let leaves = cone.leaves();

    let mut basis_indices: Vec<Vec<usize>> = Vec::with_capacity(leaves);
    let mut gram_inverses: Vec<DMatrix<f64>> = Vec::with_capacity(leaves);
    let mut basis_vectors: Vec<Vec<DVector<f64>>> = Vec::with_capacity(leaves);
    for li in 0..leaves {
        let span_dim = polar.cone(li).span_dim();
        let mut chosen = Vec::new();
        let mut ortho: Vec<DVector<f64>> = Vec::new();
        let mut vectors = Vec::new();
        for (idx, (sel, _)) in scalars.iter().enumerate() {
            let v = DVector::from_column_slice(sel.value(li));
            let mut r = v.clone();
            for b in &ortho {
                let coef = b.dot(&v);
                r -= b * coef;
            }
            if r.norm() > 1e-9 * (1.0 + v.norm()) {
                ortho.push(r.clone() / r.norm());
                chosen.push(idx);
                vectors.push(v);
            }
            if chosen.len() == span_dim {
                break;
            }
        }
        if chosen.len() < span_dim {
            return Err(ConeError::SingularGram { leaf_idx: li });
        }
        let s = chosen.len();
        let gram = DMatrix::from_fn(s, s, |i, j| vectors[i].dot(&vectors[j]));
        let inv = gram.try_inverse().ok_or(ConeError::SingularGram { leaf_idx: li })?;
        basis_indices.push(chosen);
        gram_inverses.push(inv);
        basis_vectors.push(vectors);
    }

    let scalar_models: Vec<MarketModel> = scalars.iter().map(|(_, m)| m.clone()).collect();
    let basis_for_eval = basis_indices.clone();
    let vectors_for_eval = basis_vectors.clone();
    let inverses_for_eval = gram_inverses.clone();
    let homogeneous = scalar_models.iter().all(|m| m.flags().positively_homogeneous);
    let model = VectorModel::custom(&tree, n, homogeneous, move |_, li, x| {
        let chosen = &basis_for_eval[li];
        let mut rhs = DVector::zeros(chosen.len());
        for (k, &idx) in chosen.iter().enumerate() {
            let v = scalar_models[idx].eval(li, x);
            if v == f64::NEG_INFINITY {
                return None;
            }
            rhs[k] = v;
        }
        let alpha = &inverses_for_eval[li] * rhs;
        let mut out = DVector::zeros(n);
        for (k, v) in vectors_for_eval[li].iter().enumerate() {
            out += v * alpha[k];
        }
        Some(out.iter().cloned().collect())
    });

    // Verification: every supplied scalarization must match the rebuilt
    // model on the samples.
    let mut residual = 0.0f64;
    for strategy in samples {
        for li in 0..leaves {
            let x = strategy.restrict_to_path(&tree, li);
            let rebuilt = model.eval(li, &x);
            for (sel, sm) in scalars {
                let direct = sm.eval(li, &x);
                match (&rebuilt, direct) {
                    (None, v) if v == f64::NEG_INFINITY => {}
                    (Some(vec), v) if v.is_finite() => {
                        let dot: f64 =
                            sel.value(li).iter().zip(vec.iter()).map(|(a, b)| a * b).sum();
                        residual = residual.max((dot - v).abs());
                    }
                    _ => {
                        return Err(ConeError::InconsistentScalarizations {
                            residual: f64::INFINITY,
                        });
                    }
                }
            }
        }
    }
    if residual > 1e-8 {
        return Err(ConeError::InconsistentScalarizations { residual });
    }
    Ok(GramReconstruction { model, basis: basis_indices, residual })
}

/// Rebuilds with the supplied selections in reverse order and reports the
/// largest componentwise deviation between the two reconstructions on the
/// samples. The construction is basis-dependent in general; this measures
/// how much that matters for the instance at hand.
pub fn basis_sensitivity(
    scalars: &[(ConeSelection, MarketModel)],
    cone: &RandomCone,
    samples: &[AdaptedStrategy],
) -> Result<f64, ConeError> {
    let forward = gram_reconstruct(scalars, cone, samples)?;
    let reversed: Vec<(ConeSelection, MarketModel)> = scalars.iter().rev().cloned().collect();
    let backward = gram_reconstruct(&reversed, cone, samples)?;
    let tree = cone.tree().clone();
    let mut worst = 0.0f64;
    for strategy in samples {
        for li in 0..cone.leaves() {
            let x = strategy.restrict_to_path(&tree, li);
            match (forward.model.eval(li, &x), backward.model.eval(li, &x)) {
                (Some(a), Some(b)) => {
                    for (ai, bi) in a.iter().zip(&b) {
                        worst = worst.max((ai - bi).abs());
                    }
                }
                (None, None) => {}
                _ => worst = f64::INFINITY,
            }
        }
    }
    Ok(worst)
}

/// Vector superhedging membership: some grid-adapted strategy dominates the
/// per-leaf claim in the cone order.
pub fn vector_superhedge_feasible(
    model: &VectorModel,
    cone: &RandomCone,
    claim: &[Vec<f64>],
    axis: &[f64],
    budget: u128,
) -> Result<(bool, Option<AdaptedStrategy>), ConeError> {
    let tree = model.tree().clone();
    if claim.len() != tree.leaves().len() {
        return Err(ConeError::ConeMismatch("one claim vector per leaf".into()));
    }
    let points = axis_points(axis, tree.dim());
    let grids: std::collections::BTreeMap<NodeId, Vec<Vec<f64>>> =
        tree.decision_nodes().into_iter().map(|nd| (nd, points.clone())).collect();
    let iter = crate::tree::AdaptedGridIter::new(&tree, &grids, budget)
        .map_err(|e| ConeError::ConeMismatch(e.to_string()))?;
    for strategy in iter {
        let mut ok = true;
        for (li, claim_li) in claim.iter().enumerate() {
            let x = strategy.restrict_to_path(&tree, li);
            match model.eval(li, &x) {
                None => {
                    ok = false;
                    break;
                }
                Some(v) => {
                    let diff: Vec<f64> = v.iter().zip(claim_li).map(|(a, b)| a - b).collect();
                    if !cone.cone(li).contains(&diff, MEMBER_TOL) {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            return Ok((true, Some(strategy)));
        }
    }
    Ok((false, None))
}

/// Diagnostic lower element `g = -(rho / r) x` with `x` an interior
/// selection and `r` its interior ball radius: every claim of norm at most
/// `rho` dominates `g` in the cone order.
pub fn lower_element(cone: &RandomCone, rho: f64) -> Result<Vec<Vec<f64>>, ConeError> {
    let sel = ri_selection(cone)?;
    let radii = interior_ball_radius(cone, &sel)?;
    Ok((0..cone.leaves())
        .map(|li| {
            let r = radii[li];
            sel.value(li)
                .iter()
                .map(|&c| if r.is_finite() { -(rho / r) * c } else { 0.0 })
                .collect()
        })
        .collect())
}
