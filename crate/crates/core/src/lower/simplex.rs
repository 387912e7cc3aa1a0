//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Used for the LP relaxations inside branch-and-bound. Problems here have
//! at most a few hundred columns, so a dense tableau is adequate.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize objective·x` subject to the constraints and
/// `lower <= x <= upper`. Lower bounds must be finite; upper bounds may be
/// `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Non-negative variables with no upper bound.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn bound(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidProgram(format!(
                "{n} objective coefficients but {} / {} bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::InvalidProgram(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidProgram(format!("constraint {i} is not finite")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProgram("objective is not finite".into()));
        }
        if self.lower.iter().any(|l| !l.is_finite()) || self.upper.iter().any(|u| u.is_nan()) {
            return Err(Error::InvalidProgram(
                "lower bounds must be finite and upper bounds not NaN".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry is minus the current objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    pivots: usize,
    pivot_budget: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.kinds.len()
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width()]
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.width();
        self.obj = vec![0.0; w + 1];
        self.obj[..w].copy_from_slice(costs);
        for i in 0..self.rows.len() {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=w {
                    self.obj[j] -= cb * self.rows[i][j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..=w {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (o, p) in self.obj.iter_mut().zip(&pivot_row).take(w + 1) {
                *o -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs primal simplex on the current cost row. Returns `false` when
    /// the problem is unbounded.
    fn optimize(&mut self, allow_artificial: bool) -> Result<bool> {
        loop {
            if self.pivots > self.pivot_budget {
                return Err(Error::NumericFailure(format!(
                    "pivot budget of {} exhausted",
                    self.pivot_budget
                )));
            }
            let entering = (0..self.width())
                .find(|&j| self.obj[j] < -COST_EPS && (allow_artificial || self.kinds[j] != ColKind::Artificial));
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves `lp` to optimality or reports infeasibility / unboundedness.
pub fn simplex_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.check()?;
    let n = lp.num_vars();
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return Ok(LpOutcome::Infeasible);
    }

    // Shift x = lower + x' so every structural column is x' >= 0.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            let shift: f64 = c.coeffs.iter().zip(&lp.lower).map(|(a, l)| a * l).sum();
            (c.coeffs.clone(), c.relation, c.rhs - shift)
        })
        .collect();
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Relation::Le, lp.upper[j] - lp.lower[j]));
        }
    }
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            coeffs.iter_mut().for_each(|a| *a = -*a);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let mut kinds = vec![ColKind::Structural; n];
    for (_, rel, _) in &rows {
        match rel {
            Relation::Le => kinds.push(ColKind::Slack),
            Relation::Ge => {
                kinds.push(ColKind::Slack);
                kinds.push(ColKind::Artificial);
            }
            Relation::Eq => kinds.push(ColKind::Artificial),
        }
    }
    let w = kinds.len();
    let mut table = vec![vec![0.0; w + 1]; m];
    let mut basis = vec![0; m];
    let mut col = n;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        table[i][..n].copy_from_slice(coeffs);
        table[i][w] = *rhs;
        match rel {
            Relation::Le => {
                table[i][col] = 1.0;
                basis[i] = col;
                col += 1;
            }
            Relation::Ge => {
                table[i][col] = -1.0;
                table[i][col + 1] = 1.0;
                basis[i] = col + 1;
                col += 2;
            }
            Relation::Eq => {
                table[i][col] = 1.0;
                basis[i] = col;
                col += 1;
            }
        }
    }

    let mut t = Tableau {
        rows: table,
        obj: Vec::new(),
        basis,
        kinds,
        pivots: 0,
        pivot_budget: 10_000 + 100 * (m + w),
    };

    if t.kinds.contains(&ColKind::Artificial) {
        let phase1: Vec<f64> = t
            .kinds
            .iter()
            .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
            .collect();
        t.set_costs(&phase1);
        t.optimize(true)?;
        if -t.obj[w] > FEAS_EPS {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.kinds[t.basis[i]] == ColKind::Artificial {
                let col = (0..w).find(|&j| t.kinds[j] != ColKind::Artificial && t.rows[i][j].abs() > PIVOT_EPS);
                match col {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut costs = vec![0.0; w];
    costs[..n].copy_from_slice(&lp.objective);
    t.set_costs(&costs);
    if !t.optimize(false)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = lp.lower.clone();
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] += t.rhs(i).max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal(LpSolution { x, objective }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(lp: &LinearProgram) -> LpSolution {
        simplex_solve(lp).unwrap().optimal().expect("optimal")
    }

    #[test]
    fn single_lower_bound_constraint() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 3.0);
        let s = solve(&lp);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        lp.constrain(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(simplex_solve(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(simplex_solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0)
            .constrain(vec![0.0, 2.0], Relation::Le, 12.0)
            .constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = solve(&lp);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_with_bounds_and_shift() {
        // min x - y, x + y = 5, 1 <= x <= 3, 2 <= y <= 10
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 5.0)
            .bound(0, 1.0, 3.0)
            .bound(1, 2.0, 10.0);
        let s = solve(&lp);
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_tolerated() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 2.0)
            .constrain(vec![2.0, 2.0], Relation::Eq, 4.0);
        let s = solve(&lp);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve(&lp);
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn malformed_program_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(simplex_solve(&lp), Err(Error::InvalidProgram(_))));
    }

    #[test]
    fn inverted_box_is_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.bound(0, 2.0, 1.0);
        assert_eq!(simplex_solve(&lp).unwrap(), LpOutcome::Infeasible);
    }
}
