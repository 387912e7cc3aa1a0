//! Best-bound branch-and-bound over the simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{simplex_solve, LinearProgram, LpOutcome};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbOptions {
    pub max_nodes: usize,
    /// Absolute optimality gap at which a node is pruned.
    pub gap_tolerance: f64,
    pub integrality_tolerance: f64,
}

impl Default for BbOptions {
    fn default() -> Self {
        BbOptions {
            max_nodes: 200_000,
            gap_tolerance: 1e-6,
            integrality_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BbOutcome {
    Optimal(MilpSolution),
    Infeasible,
    Unbounded,
    NodeLimit { incumbent: Option<MilpSolution> },
}

struct Node {
    bound: f64,
    seq: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound (then oldest node) ranks highest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Minimizes `problem` with integrality on the flagged variables.
///
/// Branches on the most fractional variable (lowest index on ties) and
/// always expands the open node with the smallest relaxation bound.
pub fn branch_and_bound(problem: &MilpProblem, opts: &BbOptions) -> Result<BbOutcome> {
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        lower: problem.lp.lower.clone(),
        upper: problem.lp.upper.clone(),
    });
    let mut seq = 1;
    let mut nodes = 0;
    let mut incumbent: Option<MilpSolution> = None;
    let mut relaxation = problem.lp.clone();

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - opts.gap_tolerance {
                break;
            }
        }
        if nodes >= opts.max_nodes {
            return Ok(BbOutcome::NodeLimit { incumbent });
        }
        nodes += 1;

        relaxation.lower.clone_from(&node.lower);
        relaxation.upper.clone_from(&node.upper);
        let sol = match simplex_solve(&relaxation)? {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                if nodes == 1 {
                    return Ok(BbOutcome::Unbounded);
                }
                continue;
            }
        };
        if let Some(inc) = &incumbent {
            if sol.objective >= inc.objective - opts.gap_tolerance {
                continue;
            }
        }

        let mut branch: Option<(usize, f64)> = None;
        let mut best_frac = opts.integrality_tolerance;
        for (j, &v) in sol.x.iter().enumerate() {
            if !problem.integer[j] {
                continue;
            }
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                branch = Some((j, v));
            }
        }

        match branch {
            None => {
                let mut x = sol.x;
                for (j, v) in x.iter_mut().enumerate() {
                    if problem.integer[j] {
                        *v = v.round();
                    }
                }
                let objective = problem.lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                incumbent = Some(MilpSolution { x, objective, nodes });
            }
            Some((j, v)) => {
                let mut down_upper = node.upper.clone();
                down_upper[j] = v.floor();
                let mut up_lower = node.lower.clone();
                up_lower[j] = v.ceil();
                heap.push(Node {
                    bound: sol.objective,
                    seq,
                    lower: node.lower.clone(),
                    upper: down_upper,
                });
                heap.push(Node {
                    bound: sol.objective,
                    seq: seq + 1,
                    lower: up_lower,
                    upper: node.upper,
                });
                seq += 2;
            }
        }
    }

    Ok(match incumbent {
        Some(mut s) => {
            s.nodes = nodes;
            BbOutcome::Optimal(s)
        }
        None => BbOutcome::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lower::simplex::Relation;

    fn int_problem(lp: LinearProgram) -> MilpProblem {
        let n = lp.num_vars();
        MilpProblem {
            lp,
            integer: vec![true; n],
        }
    }

    #[test]
    fn small_knapsack() {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut lp = LinearProgram::new(vec![-5.0, -4.0, -3.0]);
        lp.constrain(vec![2.0, 3.0, 1.0], Relation::Le, 5.0)
            .constrain(vec![4.0, 1.0, 2.0], Relation::Le, 11.0)
            .constrain(vec![3.0, 4.0, 2.0], Relation::Le, 8.0);
        let BbOutcome::Optimal(s) = branch_and_bound(&int_problem(lp), &BbOptions::default()).unwrap() else {
            panic!("expected optimum")
        };
        assert!((s.objective + 13.0).abs() < 1e-9, "{:?}", s);
    }

    #[test]
    fn fractional_relaxation_gets_branched() {
        // max x + y, 2x + 2y <= 3 -> LP 1.5, integer 1
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.constrain(vec![2.0, 2.0], Relation::Le, 3.0);
        let BbOutcome::Optimal(s) = branch_and_bound(&int_problem(lp), &BbOptions::default()).unwrap() else {
            panic!()
        };
        assert!((s.objective + 1.0).abs() < 1e-9);
        assert!(s.nodes > 1);
    }

    #[test]
    fn integer_infeasible_detected() {
        // 2x = 1 has no integer solution
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.constrain(vec![2.0], Relation::Eq, 1.0);
        assert_eq!(
            branch_and_bound(&int_problem(lp), &BbOptions::default()).unwrap(),
            BbOutcome::Infeasible
        );
    }

    #[test]
    fn node_cap_returns_incumbent_state() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.constrain(vec![2.0, 2.0], Relation::Le, 3.0);
        let opts = BbOptions {
            max_nodes: 1,
            ..BbOptions::default()
        };
        let out = branch_and_bound(&int_problem(lp), &opts).unwrap();
        assert!(matches!(out, BbOutcome::NodeLimit { incumbent: None }));
    }
}
