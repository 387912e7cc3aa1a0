//! Upper-level policy search: a swarm over (tax, subsidies) with the
//! follower solved exactly at every point.

pub mod pso;

use std::cmp::Ordering;

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

use crate::error::{Error, Result};
use crate::lower::{milp, select_dense, tie_set};
use crate::model::eval::account;
use crate::model::{LowerResult, PolicyVector, Scenario, UpperObjective};

pub use pso::{pso_run, PsoParams, PsoResult, Score};

/// Added once per unit of funds violation, plus once as a floor so that
/// every infeasible point ranks below every feasible one.
pub const PENALTY_WEIGHT: f64 = 1e4;

pub const DEFAULT_TAX_MAX: Decimal = dec!(10);

/// Which instruments the leader may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyMode {
    SubsidyOnly,
    TaxOnly,
    Combined,
}

impl PolicyMode {
    pub fn name(self) -> &'static str {
        match self {
            PolicyMode::SubsidyOnly => "subsidy-only",
            PolicyMode::TaxOnly => "tax-only",
            PolicyMode::Combined => "combined",
        }
    }
}

impl std::str::FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subsidy-only" => Ok(PolicyMode::SubsidyOnly),
            "tax-only" => Ok(PolicyMode::TaxOnly),
            "combined" => Ok(PolicyMode::Combined),
            other => Err(Error::Unsupported(format!("unknown policy mode '{other}'"))),
        }
    }
}

/// Coordinates of the search: dimension 0 is the tax rate, then one
/// subsidy per subsidizable route in scenario order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpace {
    routes: Vec<usize>,
    bounds: Vec<(f64, f64)>,
}

impl PolicySpace {
    /// Default box for `mode`. Each subsidy may reach 1.5 times what it
    /// takes to make its route cheapest at the top tax rate.
    pub fn new(scenario: &Scenario, mode: PolicyMode, tax_max: Decimal) -> PolicySpace {
        let routes: Vec<usize> = (0..scenario.len())
            .filter(|&i| scenario.route(i).subsidizable)
            .collect();
        let tax_hi = match mode {
            PolicyMode::SubsidyOnly => Decimal::ZERO,
            _ => tax_max.max(Decimal::ZERO),
        };
        let min_cost = scenario.routes().iter().map(|r| r.unit_cost).min();
        let min_em = scenario.routes().iter().map(|r| r.unit_emissions).min();
        let mut bounds = vec![(0.0, tax_hi.to_f64().unwrap_or(0.0))];
        for &i in &routes {
            let hi = if mode == PolicyMode::TaxOnly {
                Decimal::ZERO
            } else {
                let r = scenario.route(i);
                let gap = (r.unit_cost - min_cost.unwrap_or_default()).max(Decimal::ZERO);
                let dirty = (r.unit_emissions - min_em.unwrap_or_default()).max(Decimal::ZERO);
                (dec!(1.5) * (gap + tax_max * dirty)).max(dec!(0.01))
            };
            bounds.push((0.0, hi.to_f64().unwrap_or(0.0)));
        }
        PolicySpace { routes, bounds }
    }

    /// Replaces the box, e.g. to pin the tax rate.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<PolicySpace> {
        if bounds.len() != self.bounds.len() {
            return Err(Error::InvalidPolicy(format!(
                "policy space has {} dimensions, got {} bounds",
                self.bounds.len(),
                bounds.len()
            )));
        }
        if let Some((i, _)) = bounds
            .iter()
            .enumerate()
            .find(|(_, (lo, hi))| !(*lo >= 0.0 && lo <= hi))
        {
            return Err(Error::InvalidPolicy(format!("bounds[{i}] must satisfy 0 <= lo <= hi")));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Route indices behind dimensions 1.. of the space.
    pub fn routes(&self) -> &[usize] {
        &self.routes
    }

    fn to_decimal(v: f64) -> Decimal {
        Decimal::from_f64(v)
            .unwrap_or_default()
            .round_dp(12)
            .max(Decimal::ZERO)
            .normalize()
    }

    fn dense(&self, scenario: &Scenario, x: &[f64]) -> (Decimal, Vec<Decimal>) {
        let mut subs = vec![Decimal::ZERO; scenario.len()];
        for (k, &i) in self.routes.iter().enumerate() {
            subs[i] = Self::to_decimal(x[k + 1]);
        }
        (Self::to_decimal(x[0]), subs)
    }

    pub fn decode(&self, scenario: &Scenario, x: &[f64]) -> PolicyVector {
        let (tax, subs) = self.dense(scenario, x);
        let mut p = PolicyVector::tax(tax);
        for &i in &self.routes {
            if !subs[i].is_zero() {
                p = p.with_subsidy(scenario.route(i).id.clone(), subs[i]);
            }
        }
        p
    }

    pub fn encode(&self, scenario: &Scenario, policy: &PolicyVector) -> Vec<f64> {
        let mut x = vec![policy.tax_rate.to_f64().unwrap_or(0.0)];
        for &i in &self.routes {
            x.push(policy.subsidy(&scenario.route(i).id).to_f64().unwrap_or(0.0));
        }
        x
    }

    /// The zero policy and, per subsidizable route, the subsidy that makes
    /// it tie with the cheapest route at zero tax; clamped into the box.
    pub fn domain_points(&self, scenario: &Scenario) -> Vec<Vec<f64>> {
        let clamp = |x: Vec<f64>| -> Vec<f64> {
            x.into_iter()
                .zip(&self.bounds)
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect()
        };
        let mut points = vec![clamp(vec![0.0; self.dim()])];
        let min_cost = scenario.routes().iter().map(|r| r.unit_cost).min().unwrap_or_default();
        for (k, &i) in self.routes.iter().enumerate() {
            let gap = (scenario.route(i).unit_cost - min_cost).max(Decimal::ZERO);
            let mut x = vec![0.0; self.dim()];
            x[k + 1] = gap.to_f64().unwrap_or(0.0);
            let x = clamp(x);
            if !points.contains(&x) {
                points.push(x);
            }
        }
        points
    }
}

/// The leader's view of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// Objective in natural units.
    pub upper_value: Decimal,
    pub response: LowerResult,
    pub feasible: bool,
    /// `max(0, outlay - budget - tax income)`.
    pub violation: Decimal,
    /// Minimization-form value with the funds penalty applied.
    pub penalized: f64,
}

fn natural_value(objective: UpperObjective, r: &LowerResult) -> Decimal {
    match objective {
        UpperObjective::MinGhg => r.total_emissions,
        UpperObjective::MaxCircularity => r.circularity_index,
        UpperObjective::MostProfitable => r.industry_cost,
    }
}

fn sign(objective: UpperObjective) -> f64 {
    if objective == UpperObjective::MaxCircularity {
        -1.0
    } else {
        1.0
    }
}

fn respond(
    scenario: &Scenario,
    tax_rate: Decimal,
    subsidies: &[Decimal],
    objective: UpperObjective,
    budget: Decimal,
) -> Result<PolicyEvaluation> {
    let allocation = if scenario.is_pure_linear() {
        if scenario.is_empty() {
            return Err(Error::Infeasible("scenario has no routes".into()));
        }
        let tie = tie_set(scenario, tax_rate, subsidies);
        select_dense(scenario, tax_rate, subsidies, &tie, objective, budget).allocation
    } else {
        milp::select_milp(scenario, tax_rate, subsidies, objective, budget)?.allocation
    };
    let response = account(scenario, allocation, tax_rate, subsidies);
    let violation = (response.subsidy_outlay - budget - response.tax_payment).max(Decimal::ZERO);
    let feasible = violation.is_zero();
    let upper_value = natural_value(objective, &response);
    let mut penalized = sign(objective) * upper_value.to_f64().unwrap_or(f64::INFINITY);
    if !feasible {
        penalized += PENALTY_WEIGHT * (1.0 + violation.to_f64().unwrap_or(f64::INFINITY));
    }
    Ok(PolicyEvaluation {
        upper_value,
        response,
        feasible,
        violation,
        penalized,
    })
}

/// Solves the follower exactly for `policy` and scores the response.
///
/// Ties on the follower side are broken for the leader with funds equal to
/// `budget` plus the tax income of the chosen allocation.
pub fn evaluate_policy(
    scenario: &Scenario,
    policy: &PolicyVector,
    objective: UpperObjective,
    budget: Decimal,
) -> Result<PolicyEvaluation> {
    policy.validate(scenario)?;
    let subs = policy.dense_subsidies(scenario);
    respond(scenario, policy.tax_rate, &subs, objective, budget)
}

/// Ranking used by the swarm: penalized value, then lower tax, then lower
/// outlay. The secondary keys pick the cheapest policy among those
/// inducing the same response.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Fitness {
    value: f64,
    tax: f64,
    outlay: f64,
    sign: f64,
}

impl Fitness {
    fn failed(sign: f64) -> Fitness {
        Fitness {
            value: f64::INFINITY,
            tax: f64::INFINITY,
            outlay: f64::INFINITY,
            sign,
        }
    }
}

impl Score for Fitness {
    fn better_than(&self, other: &Self) -> bool {
        self.value
            .total_cmp(&other.value)
            .then(self.tax.total_cmp(&other.tax))
            .then(self.outlay.total_cmp(&other.outlay))
            == Ordering::Less
    }

    fn trace_value(&self) -> f64 {
        self.sign * self.value
    }
}

/// A leader problem: what to optimize, with how much money, over which box.
#[derive(Debug, Clone)]
pub struct BilevelProblem<'a> {
    pub scenario: &'a Scenario,
    pub objective: UpperObjective,
    pub budget: Decimal,
    pub space: PolicySpace,
}

impl<'a> BilevelProblem<'a> {
    pub fn new(
        scenario: &'a Scenario,
        objective: UpperObjective,
        budget: Decimal,
        mode: PolicyMode,
    ) -> BilevelProblem<'a> {
        BilevelProblem {
            scenario,
            objective,
            budget,
            space: PolicySpace::new(scenario, mode, DEFAULT_TAX_MAX),
        }
    }

    /// Default swarm over this problem's box.
    pub fn params(&self, seed: u64) -> PsoParams {
        let mut p = PsoParams::new(self.space.bounds().to_vec());
        p.seed = seed;
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelOutcome {
    pub best_policy: PolicyVector,
    pub response: LowerResult,
    pub upper_value: Decimal,
    pub feasible: bool,
    /// Best-so-far value per iteration, natural units, penalties included.
    pub trace: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// Best policy found by the swarm across restarts.
///
/// The domain points of the space are always added to the swarm's
/// initial points, so the result is never worse than the zero policy.
pub fn optimize(problem: &BilevelProblem, params: &PsoParams) -> Result<BilevelOutcome> {
    let scenario = problem.scenario;
    let space = &problem.space;
    let objective = problem.objective;
    if params.bounds.len() != space.dim() {
        return Err(Error::InvalidPolicy(format!(
            "policy space has {} dimensions, params have {}",
            space.dim(),
            params.bounds.len()
        )));
    }
    params.validate()?;

    let zero = evaluate_policy(scenario, &PolicyVector::zero(), objective, problem.budget)?;
    if objective == UpperObjective::MostProfitable {
        return Ok(BilevelOutcome {
            best_policy: PolicyVector::zero(),
            trace: vec![(0, zero.penalized)],
            upper_value: zero.upper_value,
            feasible: zero.feasible,
            response: zero.response,
            evaluations: 1,
        });
    }

    let mut params = params.clone();
    let mut seeds = params.initial_points.clone();
    for p in space.domain_points(scenario) {
        if !seeds.contains(&p) {
            seeds.push(p);
        }
    }
    params.initial_points = seeds;

    let s = sign(objective);
    let fitness = |x: &[f64]| -> Fitness {
        let (tax, subs) = space.dense(scenario, x);
        match respond(scenario, tax, &subs, objective, problem.budget) {
            Ok(e) => Fitness {
                value: e.penalized,
                tax: tax.to_f64().unwrap_or(f64::INFINITY),
                outlay: e.response.subsidy_outlay.to_f64().unwrap_or(f64::INFINITY),
                sign: s,
            },
            Err(_) => Fitness::failed(s),
        }
    };
    let run = pso_run(fitness, &params)?;

    let best_policy = space.decode(scenario, &run.best_position);
    let eval = evaluate_policy(scenario, &best_policy, objective, problem.budget)?;
    Ok(BilevelOutcome {
        best_policy,
        upper_value: eval.upper_value,
        feasible: eval.feasible,
        response: eval.response,
        trace: run.trace,
        evaluations: run.evaluations + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RouteSpec;

    fn case() -> Scenario {
        Scenario::builder(1000)
            .route(RouteSpec::new(
                "strap",
                "bag",
                "strap",
                dec!(-0.00093),
                dec!(0.06424),
                dec!(1.275),
            ))
            .route(
                RouteSpec::new("landfill", "bag", "landfill", dec!(0.06007), dec!(0.04997), dec!(1.18))
                    .subsidizable(true),
            )
            .route(
                RouteSpec::new(
                    "glass",
                    "jar",
                    "glass_washing",
                    dec!(0.06607),
                    dec!(0.05008),
                    dec!(1.475),
                )
                .subsidizable(true),
            )
            .build()
            .unwrap()
    }

    #[test]
    fn zero_policy_value() {
        let e = evaluate_policy(&case(), &PolicyVector::zero(), UpperObjective::MinGhg, dec!(0)).unwrap();
        assert_eq!(e.upper_value, dec!(64.24));
        assert!(e.feasible);
    }

    #[test]
    fn unfunded_subsidy_is_penalized() {
        let s = case();
        let p = PolicyVector::zero().with_subsidy("landfill", dec!(0.0611));
        let e = evaluate_policy(&s, &p, UpperObjective::MinGhg, dec!(0)).unwrap();
        assert!(!e.feasible);
        assert_eq!(e.violation, dec!(61.1));
        assert!(e.penalized > PENALTY_WEIGHT + 64.24);
    }

    #[test]
    fn balanced_combined_policy() {
        let s = case();
        let p = PolicyVector::tax(dec!(0.9496)).with_subsidy("landfill", dec!(0.04745));
        let e = evaluate_policy(&s, &p, UpperObjective::MinGhg, dec!(0)).unwrap();
        assert!(e.feasible);
        assert_eq!(e.upper_value, dec!(49.97));
        assert_eq!(e.response.subsidy_outlay, dec!(47.45));
        assert!(e.response.tax_payment >= dec!(47.45));
    }

    #[test]
    fn domain_points_hit_indifference() {
        let s = case();
        let space = PolicySpace::new(&s, PolicyMode::Combined, DEFAULT_TAX_MAX);
        assert_eq!(space.routes(), &[1, 2]);
        let pts = space.domain_points(&s);
        assert_eq!(
            pts,
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.061, 0.0], vec![0.0, 0.0, 0.067]]
        );
        assert_eq!(
            space.decode(&s, &pts[1]),
            PolicyVector::zero().with_subsidy("landfill", dec!(0.061))
        );
        let tax_only = PolicySpace::new(&s, PolicyMode::TaxOnly, DEFAULT_TAX_MAX);
        assert_eq!(tax_only.domain_points(&s).len(), 1);
    }

    #[test]
    fn subsidy_only_reaches_landfill() {
        let s = case();
        let problem = BilevelProblem::new(&s, UpperObjective::MinGhg, dec!(61), PolicyMode::SubsidyOnly);
        let mut params = problem.params(3);
        params.restarts = 1;
        params.iterations = 20;
        let out = optimize(&problem, &params).unwrap();
        assert!(out.feasible);
        assert_eq!(out.upper_value, dec!(49.97));
        assert_eq!(out.best_policy.tax_rate, Decimal::ZERO);
        assert!(out.trace.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn most_profitable_reports_follower_optimum() {
        let s = case();
        let problem = BilevelProblem::new(&s, UpperObjective::MostProfitable, dec!(0), PolicyMode::Combined);
        let out = optimize(&problem, &problem.params(0)).unwrap();
        assert_eq!(out.upper_value, dec!(-0.93));
        assert!(out.best_policy.is_zero());
    }
}
