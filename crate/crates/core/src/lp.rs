//! A small dense linear-programming solver.
//!
//! Two-phase primal simplex with Bland's rule on problems in standard form
//! `min c'x  s.t.  Ax = b, x >= 0`. The arbitrage and domination checks only
//! ever pose tiny problems (a handful of variables per tree node), where a
//! deterministic dense tableau is both exact enough and reproducible.

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Minimizes `c'x` subject to `A x = b`, `x >= 0`.
pub fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    for row in a {
        assert_eq!(row.len(), n);
    }
    if m == 0 {
        return if c.iter().any(|&cj| cj < -EPS) {
            LpOutcome::Unbounded
        } else {
            LpOutcome::Optimal { x: vec![0.0; n], value: 0.0 }
        };
    }

    // Make b nonnegative.
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for v in a[i].iter_mut() {
                *v = -*v;
            }
        }
    }

    // Phase 1: artificial variables, minimize their sum.
    let total = n + m;
    let mut tableau = vec![vec![0.0; total + 1]; m];
    for i in 0..m {
        for j in 0..n {
            tableau[i][j] = a[i][j];
        }
        tableau[i][n + i] = 1.0;
        tableau[i][total] = b[i];
    }
    let mut basis: Vec<usize> = (n..total).collect();
    let phase1_cost: Vec<f64> = (0..total).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    if !run_simplex(&mut tableau, &mut basis, &phase1_cost, total) {
        // Phase 1 is always bounded below by 0.
        unreachable!("phase 1 cannot be unbounded");
    }
    let phase1_value: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &j)| j >= n)
        .map(|(i, _)| tableau[i][total])
        .sum();
    if phase1_value > EPS {
        return LpOutcome::Infeasible;
    }
    // Drive remaining artificial variables out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tableau[i][j].abs() > EPS) {
                pivot(&mut tableau, &mut basis, i, j);
            }
            // A row with no eligible pivot is redundant; its artificial stays
            // basic at value 0 and never re-enters.
        }
    }

    // Phase 2 on the original cost, artificial columns frozen.
    let mut phase2_cost = vec![0.0; total];
    phase2_cost[..n].copy_from_slice(c);
    if !run_simplex(&mut tableau, &mut basis, &phase2_cost, n) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = tableau[i][total];
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value }
}

/// Runs the simplex loop; columns `>= usable` never enter the basis.
/// Returns false on unboundedness.
fn run_simplex(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    usable: usize,
) -> bool {
    let m = tableau.len();
    let total = tableau[0].len() - 1;
    loop {
        // Reduced costs: c_j - c_B' B^-1 A_j.
        let mut entering = None;
        for j in 0..usable {
            if basis.contains(&j) {
                continue;
            }
            let mut reduced = cost[j];
            for i in 0..m {
                reduced -= cost[basis[i]] * tableau[i][j];
            }
            if reduced < -EPS {
                // Bland: smallest eligible index.
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return true;
        };
        // Ratio test, Bland tie-break on the leaving basic variable.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if tableau[i][j] > EPS {
                let ratio = tableau[i][total] / tableau[i][j];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio < lr + EPS && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return false;
        };
        pivot(tableau, basis, i, j);
    }
}

fn pivot(tableau: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = tableau[row][col];
    for v in tableau[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tableau[row].clone();
    for (i, target) in tableau.iter_mut().enumerate() {
        if i != row {
            let factor = target[col];
            if factor != 0.0 {
                for (t, &pv) in target.iter_mut().zip(&pivot_row) {
                    *t -= factor * pv;
                }
            }
        }
    }
    basis[row] = col;
}

/// Convenience wrapper for problems with inequality rows `A x <= b`
/// (slack variables appended) mixed with equality rows. Variables stay
/// nonnegative; callers split free variables themselves.
pub struct Builder {
    n: usize,
    rows_eq: Vec<(Vec<f64>, f64)>,
    rows_le: Vec<(Vec<f64>, f64)>,
    cost: Vec<f64>,
}

impl Builder {
    pub fn new(n: usize) -> Self {
        Builder { n, rows_eq: Vec::new(), rows_le: Vec::new(), cost: vec![0.0; n] }
    }

    pub fn cost(&mut self, c: Vec<f64>) -> &mut Self {
        assert_eq!(c.len(), self.n);
        self.cost = c;
        self
    }

    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        assert_eq!(row.len(), self.n);
        self.rows_eq.push((row, rhs));
        self
    }

    pub fn le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        assert_eq!(row.len(), self.n);
        self.rows_le.push((row, rhs));
        self
    }

    /// Solves `min cost' x` over the accumulated constraints, `x >= 0`.
    /// Returns only the original variables.
    pub fn solve(&self) -> LpOutcome {
        let slacks = self.rows_le.len();
        let total = self.n + slacks;
        let mut a = Vec::with_capacity(self.rows_eq.len() + slacks);
        let mut b = Vec::with_capacity(self.rows_eq.len() + slacks);
        for (row, rhs) in &self.rows_eq {
            let mut r = row.clone();
            r.resize(total, 0.0);
            a.push(r);
            b.push(*rhs);
        }
        for (k, (row, rhs)) in self.rows_le.iter().enumerate() {
            let mut r = row.clone();
            r.resize(total, 0.0);
            r[self.n + k] = 1.0;
            a.push(r);
            b.push(*rhs);
        }
        let mut c = self.cost.clone();
        c.resize(total, 0.0);
        match solve(&c, &a, &b) {
            LpOutcome::Optimal { x, value } => {
                LpOutcome::Optimal { x: x[..self.n].to_vec(), value }
            }
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_bounded_lp() {
        // min -x - y  s.t. x + y <= 1, x,y >= 0: optimum at any vertex of the
        // simplex face, value -1.
        let mut lp = Builder::new(2);
        lp.cost(vec![-1.0, -1.0]).le(vec![1.0, 1.0], 1.0);
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert!((value + 1.0).abs() < 1e-9),
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn infeasible_lp() {
        // x >= 0 with x <= -1 is infeasible.
        let mut lp = Builder::new(1);
        lp.cost(vec![1.0]).le(vec![1.0], -1.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_lp() {
        let mut lp = Builder::new(1);
        lp.cost(vec![-1.0]);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_constrained_lp() {
        // Martingale-weight shape: max eps s.t. w1 + w2 = 1,
        // 1*w1 - 0.5*w2 = 0, w_i >= eps. Unique w = (1/3, 2/3), eps = 1/3.
        // Variables [w1, w2, eps, s1, s2]: w_i - eps - s_i = 0.
        let c = vec![0.0, 0.0, -1.0, 0.0, 0.0];
        let a = vec![
            vec![1.0, 1.0, 0.0, 0.0, 0.0],
            vec![1.0, -0.5, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, -1.0, -1.0, 0.0],
            vec![0.0, 1.0, -1.0, 0.0, -1.0],
        ];
        let b = vec![1.0, 0.0, 0.0, 0.0];
        match solve(&c, &a, &b) {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 1.0 / 3.0).abs() < 1e-9);
                assert!((x[1] - 2.0 / 3.0).abs() < 1e-9);
                assert!((value + 1.0 / 3.0).abs() < 1e-9);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn degenerate_redundant_row() {
        // Duplicate equality rows must not break phase 1.
        let c = vec![1.0, 1.0];
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let b = vec![1.0, 2.0];
        match solve(&c, &a, &b) {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-9),
            other => panic!("unexpected outcome {other:?}"),
        }
    }
}
