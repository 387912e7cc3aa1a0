//! Exact solution of the follower's cost minimization for a fixed policy.
//!
//! Pure per-unit-linear scenarios are solved by inspection: every unit goes
//! to a route of minimal net unit cost, and any mixture over the tied
//! routes is optimal. [`optimistic_select`] then picks, among those
//! mixtures, the one the leader likes best within the available funds.
//! Scenarios with activation costs or binding capacities go through the
//! branch-and-bound MILP in [`milp`].

pub mod branch_bound;
pub mod milp;
pub mod simplex;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

use crate::error::{Error, Result};
use crate::model::{Allocation, PolicyVector, RouteId, RouteSpec, Scenario, UpperObjective};

pub use branch_bound::{branch_and_bound, BbOptions, BbOutcome, MilpProblem, MilpSolution};
pub use milp::solve_lower_milp;
pub use simplex::{simplex_solve, Constraint, LinearProgram, LpOutcome, LpSolution, Relation};

/// Two routes whose net unit costs differ by at most this much are tied.
pub const TIE_TOLERANCE: Decimal = dec!(0.000000001);

/// `unit_cost + tax_rate * unit_emissions - subsidy`.
pub fn net_unit_cost(route: &RouteSpec, policy: &PolicyVector) -> Decimal {
    route.unit_cost + policy.tax_rate * route.unit_emissions - policy.subsidy(&route.id)
}

/// Routes whose net unit cost is within [`TIE_TOLERANCE`] of the minimum,
/// ordered by route id.
#[derive(Debug, Clone, PartialEq)]
pub struct TieSet {
    members: Vec<usize>,
    min_cost: Decimal,
}

impl TieSet {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn min_cost(&self) -> Decimal {
        self.min_cost
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.contains(&idx)
    }

    pub fn route_ids(&self, scenario: &Scenario) -> Vec<RouteId> {
        self.members.iter().map(|&i| scenario.route(i).id.clone()).collect()
    }

    pub fn canonical(&self) -> usize {
        self.members[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySolution {
    pub tie: TieSet,
    /// All demand on the first tied route by id.
    pub allocation: Allocation,
    pub objective: Decimal,
}

/// Solves the follower exactly when the scenario is pure per-unit-linear.
pub fn solve_lower_greedy(scenario: &Scenario, policy: &PolicyVector) -> Result<GreedySolution> {
    policy.validate(scenario)?;
    if scenario.is_empty() {
        return Err(Error::Infeasible("scenario has no routes".into()));
    }
    if !scenario.is_pure_linear() {
        return Err(Error::Unsupported(
            "greedy follower needs a scenario without activation costs or binding capacities".into(),
        ));
    }
    let subs = policy.dense_subsidies(scenario);
    let tie = tie_set(scenario, policy.tax_rate, &subs);
    let allocation = Allocation::all_on(scenario, tie.canonical());
    let objective = tie.min_cost * Decimal::from(scenario.demand());
    Ok(GreedySolution {
        tie,
        allocation,
        objective,
    })
}

pub(crate) fn net_costs(scenario: &Scenario, tax_rate: Decimal, subsidies: &[Decimal]) -> Vec<Decimal> {
    scenario
        .routes()
        .iter()
        .zip(subsidies)
        .map(|(r, s)| r.unit_cost + tax_rate * r.unit_emissions - s)
        .collect()
}

pub(crate) fn tie_set(scenario: &Scenario, tax_rate: Decimal, subsidies: &[Decimal]) -> TieSet {
    let costs = net_costs(scenario, tax_rate, subsidies);
    let min_cost = costs.iter().copied().min().expect("non-empty catalog");
    let mut members: Vec<usize> = (0..costs.len())
        .filter(|&i| costs[i] - min_cost <= TIE_TOLERANCE)
        .collect();
    members.sort_by(|&a, &b| scenario.route(a).id.cmp(&scenario.route(b).id));
    TieSet { members, min_cost }
}

/// A follower-optimal allocation chosen in the leader's favor.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub allocation: Allocation,
    /// False when no follower-optimal allocation keeps subsidies within
    /// budget plus tax income.
    pub funds_feasible: bool,
}

/// Optimistic tie-breaking over the follower's optimal face.
///
/// Each tied route `r` draws `subsidy_r - tax_rate * emissions_r` per unit
/// from public funds (tax income counts as a negative draw). Among
/// allocations over the tied routes whose total draw stays within `budget`,
/// the one minimizing the leader's objective is returned. This is a
/// continuous knapsack with one resource, so the relaxed optimum mixes at
/// most two routes; the unit count on the costlier route is floored so the
/// integer allocation never exceeds the funds. When even the cheapest pure
/// allocation breaks the budget, the leader-best route is returned with
/// `funds_feasible = false`.
pub fn optimistic_select(
    scenario: &Scenario,
    policy: &PolicyVector,
    tie: &TieSet,
    objective: UpperObjective,
    budget: Decimal,
) -> Selection {
    let subs = policy.dense_subsidies(scenario);
    select_dense(scenario, policy.tax_rate, &subs, tie, objective, budget)
}

pub(crate) fn select_dense(
    scenario: &Scenario,
    tax_rate: Decimal,
    subsidies: &[Decimal],
    tie: &TieSet,
    objective: UpperObjective,
    budget: Decimal,
) -> Selection {
    let n = scenario.demand();
    let nd = Decimal::from(n);
    if tie.members.len() == 1 || objective == UpperObjective::MostProfitable {
        let idx = tie.canonical();
        let draw = nd * (subsidies[idx] - tax_rate * scenario.route(idx).unit_emissions);
        return Selection {
            allocation: Allocation::all_on(scenario, idx),
            funds_feasible: draw <= budget,
        };
    }

    let value = |i: usize| objective.unit_value(scenario.route(i));
    let draw = |i: usize| subsidies[i] - tax_rate * scenario.route(i).unit_emissions;

    // (value, draw, units) with units as (route, count) pairs.
    type Candidate = (Decimal, Decimal, [(usize, u64); 2]);
    let mut best: Option<Candidate> = None;
    let mut offer = |v: Decimal, d: Decimal, units: [(usize, u64); 2]| {
        let better = match &best {
            None => true,
            Some((bv, bd, _)) => v < *bv || (v == *bv && d < *bd),
        };
        if better {
            best = Some((v, d, units));
        }
    };

    for &a in &tie.members {
        let total_draw = nd * draw(a);
        if total_draw <= budget {
            offer(nd * value(a), total_draw, [(a, n), (a, 0)]);
        }
    }
    for &a in &tie.members {
        let base = nd * draw(a);
        if base > budget {
            continue;
        }
        for &b in &tie.members {
            let step = draw(b) - draw(a);
            if b == a || step <= Decimal::ZERO || value(b) >= value(a) {
                continue;
            }
            let fits = |k: u64| base + Decimal::from(k) * step <= budget;
            let mut k = ((budget - base) / step).floor().to_u64().unwrap_or(u64::MAX).min(n);
            while k < n && fits(k + 1) {
                k += 1;
            }
            while k > 0 && !fits(k) {
                k -= 1;
            }
            if k == 0 {
                continue;
            }
            let kd = Decimal::from(k);
            let v = (nd - kd) * value(a) + kd * value(b);
            offer(v, base + kd * step, [(a, n - k), (b, k)]);
        }
    }

    match best {
        Some((_, _, units)) => {
            let mut raw = vec![0; scenario.len()];
            for (i, u) in units {
                raw[i] += u;
            }
            Selection {
                allocation: Allocation::from_raw(raw),
                funds_feasible: true,
            }
        }
        None => {
            let idx = *tie
                .members
                .iter()
                .min_by(|&&a, &&b| value(a).cmp(&value(b)).then(draw(a).cmp(&draw(b))))
                .expect("non-empty tie set");
            Selection {
                allocation: Allocation::all_on(scenario, idx),
                funds_feasible: false,
            }
        }
    }
}
