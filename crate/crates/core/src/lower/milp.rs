//! Follower problem with activation costs and capacities as a MILP.
//!
//! Variables are the integer unit counts `x_r` in `[0, capacity_r]`, then
//! one binary `y_t` per technology carrying a positive activation cost.
//! Rows: `sum x = demand` and `x_r - capacity_r * y_t <= 0` linking each
//! route to its technology switch.

use std::collections::BTreeMap;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use super::branch_bound::{branch_and_bound, BbOptions, BbOutcome, MilpProblem, MilpSolution};
use super::simplex::{LinearProgram, Relation};
use super::Selection;
use crate::error::{Error, Result};
use crate::model::eval::{account, cost, outlay};
use crate::model::{Allocation, LowerResult, PolicyVector, Scenario, UpperObjective};

fn f(d: Decimal) -> f64 {
    d.to_f64().unwrap_or(f64::NAN)
}

struct FollowerModel {
    problem: MilpProblem,
    routes: usize,
}

impl FollowerModel {
    fn build(scenario: &Scenario, tax_rate: Decimal, subsidies: &[Decimal]) -> FollowerModel {
        let routes = scenario.len();
        let switches: BTreeMap<&str, usize> = scenario
            .fixed_costs()
            .iter()
            .filter(|(_, c)| **c > Decimal::ZERO)
            .enumerate()
            .map(|(k, (t, _))| (t.as_str(), routes + k))
            .collect();
        let width = routes + switches.len();

        let mut objective = vec![0.0; width];
        for (i, r) in scenario.routes().iter().enumerate() {
            objective[i] = f(r.unit_cost + tax_rate * r.unit_emissions - subsidies[i]);
        }
        for (t, &j) in &switches {
            objective[j] = f(scenario.fixed_costs()[*t]);
        }

        let mut lp = LinearProgram::new(objective);
        let mut total = vec![0.0; width];
        total[..routes].fill(1.0);
        lp.constrain(total, Relation::Eq, scenario.demand() as f64);
        for (i, r) in scenario.routes().iter().enumerate() {
            let cap = scenario.capacity(i) as f64;
            lp.bound(i, 0.0, cap);
            if let Some(&j) = switches.get(r.technology.as_str()) {
                let mut row = vec![0.0; width];
                row[i] = 1.0;
                row[j] = -cap;
                lp.constrain(row, Relation::Le, 0.0);
            }
        }
        for &j in switches.values() {
            lp.bound(j, 0.0, 1.0);
        }
        FollowerModel {
            problem: MilpProblem {
                lp,
                integer: vec![true; width],
            },
            routes,
        }
    }

    fn allocation(&self, scenario: &Scenario, x: &[f64]) -> Result<Allocation> {
        let units: Vec<u64> = x[..self.routes].iter().map(|v| v.round().max(0.0) as u64).collect();
        Allocation::from_units(scenario, units)
            .map_err(|e| Error::NumericFailure(format!("MILP returned a bad allocation: {e}")))
    }
}

fn solve(model: &FollowerModel, problem: &MilpProblem, scenario: &Scenario) -> Result<Option<MilpSolution>> {
    match branch_and_bound(problem, &BbOptions::default())? {
        BbOutcome::Optimal(s) => Ok(Some(s)),
        BbOutcome::Infeasible => Ok(None),
        BbOutcome::Unbounded => Err(Error::Unbounded("follower MILP is unbounded".into())),
        BbOutcome::NodeLimit { incumbent } => {
            let incumbent = match incumbent {
                Some(s) => Some(Box::new(model.allocation(scenario, &s.x)?)),
                None => None,
            };
            Err(Error::ResourceLimit {
                message: "branch-and-bound node limit reached".into(),
                incumbent,
            })
        }
    }
}

/// Exact follower optimum for any scenario, including activation costs and
/// capacities.
pub fn solve_lower_milp(scenario: &Scenario, policy: &PolicyVector) -> Result<LowerResult> {
    policy.validate(scenario)?;
    let subs = policy.dense_subsidies(scenario);
    let (allocation, _) = follower_dense(scenario, policy.tax_rate, &subs)?;
    Ok(account(scenario, allocation, policy.tax_rate, &subs))
}

pub(crate) fn follower_dense(
    scenario: &Scenario,
    tax_rate: Decimal,
    subsidies: &[Decimal],
) -> Result<(Allocation, Decimal)> {
    if scenario.is_empty() {
        return Err(Error::Infeasible("scenario has no routes".into()));
    }
    let model = FollowerModel::build(scenario, tax_rate, subsidies);
    let sol = solve(&model, &model.problem, scenario)?
        .ok_or_else(|| Error::Infeasible("no allocation meets demand within capacities".into()))?;
    let allocation = model.allocation(scenario, &sol.x)?;
    let objective = cost(scenario, &allocation, tax_rate, subsidies);
    Ok((allocation, objective))
}

/// Optimistic selection on the follower's optimal face: minimizes the
/// leader's objective over allocations whose follower cost is within
/// tolerance of the optimum and whose subsidy draw fits the budget.
pub(crate) fn select_milp(
    scenario: &Scenario,
    tax_rate: Decimal,
    subsidies: &[Decimal],
    objective: UpperObjective,
    budget: Decimal,
) -> Result<Selection> {
    let (best, opt) = follower_dense(scenario, tax_rate, subsidies)?;
    let funds_ok =
        |a: &Allocation| outlay(a, subsidies) - tax_rate * crate::model::eval::emissions(scenario, a) <= budget;
    if objective == UpperObjective::MostProfitable {
        let funds_feasible = funds_ok(&best);
        return Ok(Selection {
            allocation: best,
            funds_feasible,
        });
    }

    let model = FollowerModel::build(scenario, tax_rate, subsidies);
    let tol = 1e-9 * scenario.demand() as f64 + 1e-7;
    let mut face = model.problem.clone();
    let follower_row = face.lp.objective.clone();
    face.lp.constrain(follower_row, Relation::Le, f(opt) + tol);
    let mut leader = vec![0.0; face.lp.num_vars()];
    for (i, r) in scenario.routes().iter().enumerate() {
        leader[i] = f(objective.unit_value(r));
    }
    face.lp.objective = leader;

    let mut funded = face.clone();
    let mut draw = vec![0.0; face.lp.num_vars()];
    for (i, r) in scenario.routes().iter().enumerate() {
        draw[i] = f(subsidies[i] - tax_rate * r.unit_emissions);
    }
    funded.lp.constrain(draw, Relation::Le, f(budget) + 1e-7);

    if let Some(sol) = solve(&model, &funded, scenario)? {
        let allocation = model.allocation(scenario, &sol.x)?;
        let funds_feasible = funds_ok(&allocation);
        return Ok(Selection {
            allocation,
            funds_feasible,
        });
    }
    let allocation = match solve(&model, &face, scenario)? {
        Some(sol) => model.allocation(scenario, &sol.x)?,
        None => best,
    };
    Ok(Selection {
        allocation,
        funds_feasible: false,
    })
}
