//! Grid construction and budgeted maximization over boxes.
//!
//! These helpers back the reconstruction, recession, superhedging, and
//! utility modules. Grids are plain sorted `Vec<f64>` axes; refinement
//! inserts midpoints so a refined axis is always a superset of the original
//! (that is what makes price refinement monotone).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("refinement budget exceeded: {spent} evaluations > cap {cap}")]
    BudgetExceeded { spent: usize, cap: usize },
}

/// `n` evenly spaced points on `[lo, hi]` (endpoints included, `n >= 2`);
/// a single midpoint when `n == 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1 && hi >= lo);
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    // Pin the endpoints exactly.
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// Symmetric axis on `[-b, b]` with `n` points, with 0 inserted when the
/// spacing does not already produce it. Strategy grids must contain the
/// do-nothing point so the zero strategy is always representable.
pub fn symmetric_axis(b: f64, n: usize) -> Vec<f64> {
    let mut axis = linspace(-b, b, n);
    if !axis.contains(&0.0) {
        let pos = axis.partition_point(|&x| x < 0.0);
        axis.insert(pos, 0.0);
    }
    axis
}

/// Midpoint refinement: returns a strict superset of `axis` with doubled density.
pub fn refine_axis(axis: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(axis.len() * 2);
    for i in 0..axis.len() {
        out.push(axis[i]);
        if i + 1 < axis.len() {
            out.push(0.5 * (axis[i] + axis[i + 1]));
        }
    }
    out
}

/// Cartesian product of per-axis point sets, last axis fastest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &x in axis {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// All points of the `d`-fold product of one axis (strategy grid per node).
pub fn axis_points(axis: &[f64], d: usize) -> Vec<Vec<f64>> {
    cartesian(&vec![axis.to_vec(); d])
}

/// Configuration for [`maximize_on_box`].
#[derive(Debug, Clone)]
pub struct BoxSearchConfig {
    /// Points per axis in every sweep.
    pub points_per_axis: usize,
    /// Number of shrink-and-resample rounds after the coarse sweep.
    pub refine_rounds: usize,
    /// Half-width shrink factor per round.
    pub shrink: f64,
    /// Leading coarse candidates kept for local refinement.
    pub top_k: usize,
    /// Hard cap on objective evaluations.
    pub budget: usize,
    /// Stop refining a candidate once improvement falls below this.
    pub stagnation_tol: f64,
}

impl Default for BoxSearchConfig {
    fn default() -> Self {
        BoxSearchConfig {
            points_per_axis: 17,
            refine_rounds: 24,
            shrink: 0.35,
            top_k: 3,
            budget: 400_000,
            stagnation_tol: 1e-12,
        }
    }
}

/// Budgeted global maximization of `f` over the closed box `[lo, hi]`.
///
/// Coarse multi-start grid sweep followed by shrinking local sweeps around
/// the best candidates. The box center, the corners, and the coordinate
/// zero-crossings are always sampled; objectives may return `-inf`.
/// Deterministic: no randomness, fixed sweep order.
pub fn maximize_on_box(
    lo: &[f64],
    hi: &[f64],
    cfg: &BoxSearchConfig,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64), GridError> {
    let dims = lo.len();
    assert_eq!(dims, hi.len());
    let mut spent = 0usize;
    let mut eval = |x: &[f64], spent: &mut usize| -> Result<f64, GridError> {
        *spent += 1;
        if *spent > cfg.budget {
            return Err(GridError::BudgetExceeded { spent: *spent, cap: cfg.budget });
        }
        let v = f(x);
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    };

    let sweep_axes = |lo: &[f64], hi: &[f64]| -> Vec<Vec<f64>> {
        (0..dims)
            .map(|i| {
                let mut axis = linspace(lo[i], hi[i], cfg.points_per_axis.max(2));
                // Kink hunting: many cost models are irregular exactly at 0.
                if lo[i] < 0.0 && hi[i] > 0.0 && !axis.contains(&0.0) {
                    let pos = axis.partition_point(|&x| x < 0.0);
                    axis.insert(pos, 0.0);
                }
                axis
            })
            .collect()
    };

    let mut best: Vec<(Vec<f64>, f64)> = Vec::new();
    for p in cartesian(&sweep_axes(lo, hi)) {
        let v = eval(&p, &mut spent)?;
        best.push((p, v));
    }
    best.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    best.truncate(cfg.top_k.max(1));

    let mut champion = best[0].clone();
    for (start, start_val) in best {
        let mut center = start;
        let mut center_val = start_val;
        let mut half: Vec<f64> = (0..dims).map(|i| 0.5 * (hi[i] - lo[i]) * cfg.shrink).collect();
        for _ in 0..cfg.refine_rounds {
            let round_lo: Vec<f64> =
                (0..dims).map(|i| (center[i] - half[i]).max(lo[i])).collect();
            let round_hi: Vec<f64> =
                (0..dims).map(|i| (center[i] + half[i]).min(hi[i])).collect();
            let mut improved = false;
            for p in cartesian(&sweep_axes(&round_lo, &round_hi)) {
                let v = eval(&p, &mut spent)?;
                if v > center_val + cfg.stagnation_tol {
                    center_val = v;
                    center = p;
                    improved = true;
                } else if v > center_val {
                    center_val = v;
                    center = p;
                }
            }
            for h in &mut half {
                *h *= cfg.shrink;
            }
            if !improved && half.iter().all(|&h| h < 1e-14) {
                break;
            }
        }
        if center_val > champion.1 {
            champion = (center, center_val);
        }
    }
    Ok(champion)
}

/// Budgeted global minimization: `-maximize(-f)`.
pub fn minimize_on_box(
    lo: &[f64],
    hi: &[f64],
    cfg: &BoxSearchConfig,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64), GridError> {
    let (x, v) = maximize_on_box(lo, hi, cfg, |p| {
        let y = f(p);
        // -inf objectives flip to +inf and must dominate the minimum.
        if y == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            -y
        }
    })?;
    Ok((x, if v == f64::NEG_INFINITY { f64::NEG_INFINITY } else { -v }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints_exact() {
        let v = linspace(-2.0, 2.0, 41);
        assert_eq!(v.len(), 41);
        assert_eq!(v[0], -2.0);
        assert_eq!(v[40], 2.0);
        assert_eq!(v[20], 0.0);
    }

    #[test]
    fn symmetric_axis_contains_zero() {
        let v = symmetric_axis(1.0, 4); // even count misses zero without insertion
        assert!(v.iter().any(|&x| x == 0.0));
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refinement_is_superset() {
        let v = linspace(-1.0, 1.0, 5);
        let r = refine_axis(&v);
        assert_eq!(r.len(), 9);
        for x in &v {
            assert!(r.contains(x));
        }
    }

    #[test]
    fn maximize_quadratic() {
        let cfg = BoxSearchConfig::default();
        let (x, v) = maximize_on_box(&[-2.0], &[2.0], &cfg, |p| -(p[0] - 0.7).powi(2)).unwrap();
        assert!((x[0] - 0.7).abs() < 1e-6);
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn maximize_handles_neg_inf_regions() {
        let cfg = BoxSearchConfig::default();
        let (x, v) = maximize_on_box(&[-1.0, -1.0], &[1.0, 1.0], &cfg, |p| {
            if p[0] < 0.0 {
                f64::NEG_INFINITY
            } else {
                p[0] + p[1]
            }
        })
        .unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn maximize_finds_point_mass_at_zero() {
        // Upper semicontinuous spike at the origin, the fixed-cost shape.
        let cfg = BoxSearchConfig::default();
        let (_, v) =
            maximize_on_box(&[-1.0], &[1.0], &cfg, |p| if p[0] == 0.0 { 1.0 } else { 0.0 })
                .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = BoxSearchConfig { budget: 10, ..Default::default() };
        assert!(matches!(
            maximize_on_box(&[-1.0, -1.0], &[1.0, 1.0], &cfg, |p| p[0] + p[1]),
            Err(GridError::BudgetExceeded { .. })
        ));
    }
}
