//! Brute-force references: exhaustive follower enumeration and dense
//! policy grids.

pub mod random;

use std::cmp::Ordering;

use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::engine::{evaluate_policy, PolicyEvaluation};
use crate::error::{Error, Result};
use crate::lower::TIE_TOLERANCE;
use crate::model::eval::cost;
use crate::model::{Allocation, PolicyVector, RouteId, Scenario, UpperObjective};

/// Largest number of compositions [`enumerate_lower`] will visit.
pub const MAX_COMPOSITIONS: u128 = 1_000_000;
/// Largest number of policies [`grid_bilevel`] will evaluate.
pub const MAX_GRID_POINTS: u128 = 10_000_000;

/// The exact minimum of the follower's cost and every allocation within
/// the tie tolerance of it, in lexicographic order of units.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerArgmin {
    pub objective: Decimal,
    pub allocations: Vec<Allocation>,
}

fn compositions(demand: u64, caps: &[u64]) -> u128 {
    // Upper bound ignoring capacities: C(demand + k - 1, k - 1).
    let k = caps.len() as u128;
    if k == 0 {
        return 0;
    }
    let n = demand as u128 + k - 1;
    let r = k - 1;
    let mut c: u128 = 1;
    for i in 0..r {
        c = c.saturating_mul(n - i) / (i + 1);
        if c > MAX_COMPOSITIONS * 1000 {
            return u128::MAX;
        }
    }
    c
}

/// Visits every integer allocation meeting demand within capacities and
/// keeps the exact argmin of the follower's cost.
pub fn enumerate_lower(scenario: &Scenario, policy: &PolicyVector) -> Result<LowerArgmin> {
    policy.validate(scenario)?;
    let caps: Vec<u64> = (0..scenario.len()).map(|i| scenario.capacity(i)).collect();
    let count = compositions(scenario.demand(), &caps);
    if count > MAX_COMPOSITIONS {
        return Err(Error::TooLarge(format!(
            "{} routes with demand {} exceed the enumeration bound",
            scenario.len(),
            scenario.demand()
        )));
    }
    if scenario.is_empty() {
        return Err(Error::Infeasible("scenario has no routes".into()));
    }
    let subs = policy.dense_subsidies(scenario);
    let tol = TIE_TOLERANCE * Decimal::from(scenario.demand().max(1));
    let mut min: Option<Decimal> = None;
    let mut near: Vec<(Decimal, Allocation)> = Vec::new();
    let mut units = vec![0u64; caps.len()];
    walk(0, scenario.demand(), &caps, &mut units, &mut |u| {
        let alloc = Allocation::from_raw(u.to_vec());
        let c = cost(scenario, &alloc, policy.tax_rate, &subs);
        if min.is_none_or(|m| c < m) {
            min = Some(c);
            near.retain(|(x, _)| *x - c <= tol);
        }
        if c - min.unwrap() <= tol {
            near.push((c, alloc));
        }
    });
    let objective = min.ok_or_else(|| Error::Infeasible("no allocation meets demand within capacities".into()))?;
    Ok(LowerArgmin {
        objective,
        allocations: near.into_iter().map(|(_, a)| a).collect(),
    })
}

fn walk(i: usize, left: u64, caps: &[u64], units: &mut [u64], visit: &mut impl FnMut(&[u64])) {
    if i + 1 == caps.len() {
        if left <= caps[i] {
            units[i] = left;
            visit(units);
        }
        return;
    }
    let rest: u64 = caps[i + 1..].iter().sum();
    let lo = left.saturating_sub(rest);
    for u in lo..=left.min(caps[i]) {
        units[i] = u;
        walk(i + 1, left - u, caps, units, visit);
    }
    units[i] = 0;
}

/// Evenly spaced values `lo, ..., hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lo: Decimal,
    pub hi: Decimal,
    pub steps: usize,
}

impl Axis {
    pub fn new(lo: Decimal, hi: Decimal, steps: usize) -> Result<Axis> {
        let a = Axis { lo, hi, steps };
        a.validate()?;
        Ok(a)
    }

    /// The single value `v`.
    pub fn point(v: Decimal) -> Axis {
        Axis { lo: v, hi: v, steps: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.lo > self.hi || self.lo < Decimal::ZERO {
            return Err(Error::InvalidPolicy(format!(
                "axis [{}, {}] must satisfy 0 <= lo <= hi",
                self.lo, self.hi
            )));
        }
        if self.steps < 2 && !(self.steps == 1 && self.lo == self.hi) {
            return Err(Error::InvalidPolicy(
                "an axis needs at least 2 steps unless lo == hi".into(),
            ));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> Decimal {
        if self.steps == 1 {
            return self.lo;
        }
        self.lo + (self.hi - self.lo) * Decimal::from(k) / Decimal::from(self.steps - 1)
    }

    /// Halves the spacing; the old points stay on the new axis.
    pub fn refined(&self) -> Axis {
        Axis {
            steps: if self.steps == 1 { 1 } else { 2 * self.steps - 1 },
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub tax: Axis,
    /// Routes without an axis get no subsidy.
    pub subsidies: Vec<(RouteId, Axis)>,
    pub budget: Decimal,
}

impl GridSpec {
    pub fn points(&self) -> u128 {
        self.subsidies
            .iter()
            .fold(self.tax.steps as u128, |n, (_, a)| n.saturating_mul(a.steps as u128))
    }

    pub fn refined(&self) -> GridSpec {
        GridSpec {
            tax: self.tax.refined(),
            subsidies: self.subsidies.iter().map(|(r, a)| (r.clone(), a.refined())).collect(),
            budget: self.budget,
        }
    }

    fn policy(&self, mut idx: u128) -> PolicyVector {
        let mut axes = Vec::with_capacity(self.subsidies.len());
        for (r, a) in self.subsidies.iter().rev() {
            let k = (idx % a.steps as u128) as usize;
            idx /= a.steps as u128;
            axes.push((r.clone(), a.value(k)));
        }
        let mut p = PolicyVector::tax(self.tax.value(idx as usize));
        for (r, v) in axes.into_iter().rev() {
            if !v.is_zero() {
                p = p.with_subsidy(r, v);
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub policy: PolicyVector,
    pub evaluation: PolicyEvaluation,
    pub points: u128,
}

fn rank(e: &PolicyEvaluation, p: &PolicyVector) -> (f64, Decimal, Decimal) {
    (e.penalized, p.tax_rate, e.response.subsidy_outlay)
}

fn better(a: &(f64, Decimal, Decimal), b: &(f64, Decimal, Decimal)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)) == Ordering::Less
}

/// Evaluates every grid policy and returns the best one, ranking like the
/// swarm does (penalized value, then tax, then outlay; first in grid order
/// on full ties). If no point is feasible the least-violating one comes
/// back with `feasible = false`.
pub fn grid_bilevel(scenario: &Scenario, objective: UpperObjective, grid: &GridSpec) -> Result<GridOutcome> {
    grid.tax.validate()?;
    for (r, a) in &grid.subsidies {
        scenario.require(r)?;
        a.validate()?;
    }
    let points = grid.points();
    if points > MAX_GRID_POINTS {
        return Err(Error::TooLarge(format!(
            "{points} grid points exceed {MAX_GRID_POINTS}"
        )));
    }
    let total = points.to_u64().unwrap_or(u64::MAX);
    const CHUNK: u64 = 4096;
    let chunks = total.div_ceil(CHUNK);

    // (point index, ranking key)
    type Best = Option<(u128, (f64, Decimal, Decimal))>;
    let bests: Vec<Result<Best>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut best: Best = None;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let p = grid.policy(idx as u128);
                let e = evaluate_policy(scenario, &p, objective, grid.budget)?;
                let r = rank(&e, &p);
                if best.as_ref().is_none_or(|(_, b)| better(&r, b)) {
                    best = Some((idx as u128, r));
                }
            }
            Ok(best)
        })
        .collect();

    let mut best: Best = None;
    for b in bests {
        if let Some((idx, r)) = b? {
            if best.as_ref().is_none_or(|(_, cur)| better(&r, cur)) {
                best = Some((idx, r));
            }
        }
    }
    let (idx, _) = best.ok_or_else(|| Error::InvalidPolicy("empty grid".into()))?;
    let policy = grid.policy(idx);
    let evaluation = evaluate_policy(scenario, &policy, objective, grid.budget)?;
    Ok(GridOutcome {
        policy,
        evaluation,
        points,
    })
}

#[cfg(test)]
mod tests {
    use rust_decimal_macros::dec;

    use super::*;
    use crate::model::RouteSpec;

    fn small(demand: u64) -> Scenario {
        Scenario::builder(demand)
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
    fn zero_policy_argmin_is_all_strap() {
        let a = enumerate_lower(&small(10), &PolicyVector::zero()).unwrap();
        assert_eq!(a.allocations.len(), 1);
        assert_eq!(a.allocations[0].units(), &[10, 0, 0]);
        assert_eq!(a.objective, dec!(-0.0093));
    }

    #[test]
    fn indifference_tax_ties_every_mixture() {
        let tax = dec!(0.061) / dec!(0.01427);
        let a = enumerate_lower(&small(10), &PolicyVector::tax(tax)).unwrap();
        assert_eq!(a.allocations.len(), 11);
        assert!(a.allocations.iter().all(|x| x.units()[2] == 0));
    }

    #[test]
    fn demand_one_picks_cheapest() {
        let p = PolicyVector::zero().with_subsidy("glass", dec!(0.08));
        let a = enumerate_lower(&small(1), &p).unwrap();
        assert_eq!(a.allocations[0].units(), &[0, 0, 1]);
    }

    #[test]
    fn too_many_compositions() {
        assert!(matches!(
            enumerate_lower(&small(5000), &PolicyVector::zero()),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn capacities_limit_enumeration() {
        let s = small(6).to_builder().capacity("strap", 2).build().unwrap();
        let a = enumerate_lower(&s, &PolicyVector::zero()).unwrap();
        assert_eq!(a.allocations[0].units(), &[2, 4, 0]);
    }

    #[test]
    fn axis_values_and_refinement() {
        let a = Axis::new(dec!(0), dec!(2), 5).unwrap();
        assert_eq!(a.value(1), dec!(0.5));
        let r = a.refined();
        assert_eq!(r.steps, 9);
        assert_eq!(r.value(2), a.value(1));
        assert!(Axis::new(dec!(1), dec!(2), 1).is_err());
        assert!(Axis::new(dec!(1), dec!(1), 1).is_ok());
    }

    #[test]
    fn single_point_grid_at_zero() {
        let g = GridSpec {
            tax: Axis::point(Decimal::ZERO),
            subsidies: vec![("landfill".into(), Axis::point(Decimal::ZERO))],
            budget: dec!(0),
        };
        let out = grid_bilevel(&small(1000), UpperObjective::MinGhg, &g).unwrap();
        assert_eq!(out.points, 1);
        assert_eq!(out.evaluation.upper_value, dec!(64.24));
        assert_eq!(out.evaluation.response.allocation.units(), &[1000, 0, 0]);
    }

    #[test]
    fn grid_rejects_oversized_and_unknown() {
        let g = GridSpec {
            tax: Axis::new(dec!(0), dec!(1), 10_000).unwrap(),
            subsidies: vec![("landfill".into(), Axis::new(dec!(0), dec!(1), 10_000).unwrap())],
            budget: dec!(0),
        };
        assert!(matches!(
            grid_bilevel(&small(10), UpperObjective::MinGhg, &g),
            Err(Error::TooLarge(_))
        ));
        let g = GridSpec {
            tax: Axis::point(Decimal::ZERO),
            subsidies: vec![("nope".into(), Axis::point(Decimal::ZERO))],
            budget: dec!(0),
        };
        assert!(grid_bilevel(&small(10), UpperObjective::MinGhg, &g).is_err());
    }
}
