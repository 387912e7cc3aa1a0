//! Closed-form thresholds and the sweeps behind the case-study figures.
//!
//! The closed forms assume the pure per-unit-linear follower: a route wins
//! when its net unit cost is minimal, so every threshold is a ratio of cost
//! and emission gaps.

mod calibrate;
mod sweep;

use rust_decimal::Decimal;

use crate::error::{Error, Result};
use crate::model::{PolicyVector, RouteId, RouteSpec, Scenario};

pub use calibrate::{
    calibrate_case_study, placeholder_routes, CalibrationAnchors, ROUTE_GLASS, ROUTE_LANDFILL, ROUTE_STRAP,
};
pub use sweep::{
    budget_sweep, fit_slope, sensitivity_distance, sensitivity_loss, SensitivityRun, SweepRecord, SweepSettings,
};

/// The route the follower picks with no policy: lowest unit cost, first id
/// on ties.
pub fn least_cost_route(scenario: &Scenario) -> Result<&RouteSpec> {
    scenario
        .routes()
        .iter()
        .min_by(|a, b| a.unit_cost.cmp(&b.unit_cost).then(a.id.cmp(&b.id)))
        .ok_or_else(|| Error::Infeasible("scenario has no routes".into()))
}

fn route<'a>(scenario: &'a Scenario, id: &RouteId) -> Result<&'a RouteSpec> {
    Ok(scenario.route(scenario.require(id)?))
}

/// Smallest tax that makes `to` weakly cheaper than `from`.
pub fn tax_threshold(scenario: &Scenario, from: &RouteId, to: &RouteId) -> Result<Decimal> {
    let a = route(scenario, from)?;
    let b = route(scenario, to)?;
    if b.unit_cost <= a.unit_cost {
        return Ok(Decimal::ZERO);
    }
    if b.unit_emissions >= a.unit_emissions {
        return Err(Error::NoThreshold {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    Ok((b.unit_cost - a.unit_cost) / (a.unit_emissions - b.unit_emissions))
}

/// Per-unit subsidy that makes `target` tie with the cheapest route at
/// zero tax.
pub fn subsidy_threshold(scenario: &Scenario, target: &RouteId) -> Result<Decimal> {
    let t = route(scenario, target)?;
    let least = least_cost_route(scenario)?;
    Ok((t.unit_cost - least.unit_cost).max(Decimal::ZERO))
}

/// `tax(B) = intercept + slope * B` for `B <= kink`, zero beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetLine {
    pub slope: Decimal,
    pub intercept: Decimal,
    pub kink: Decimal,
}

impl BudgetLine {
    pub fn tax_at(&self, budget: Decimal) -> Decimal {
        if budget >= self.kink {
            Decimal::ZERO
        } else {
            self.intercept + self.slope * budget
        }
    }
}

/// Minimal combined tax as a function of budget for moving all demand to
/// `target`, from the follower's indifference against the pre-policy
/// least-cost route together with funds exactly covering the subsidy:
/// `tax(B) = (N dc - B) / E_least` with `E_least` the least-cost route's
/// total emissions.
pub fn tax_budget_line(scenario: &Scenario, target: &RouteId) -> Result<BudgetLine> {
    let dc = subsidy_threshold(scenario, target)?;
    let least = least_cost_route(scenario)?;
    let n = Decimal::from(scenario.demand());
    if dc.is_zero() || least.unit_emissions.is_zero() || n.is_zero() {
        return Ok(BudgetLine {
            slope: Decimal::ZERO,
            intercept: Decimal::ZERO,
            kink: Decimal::ZERO,
        });
    }
    let e_least = n * least.unit_emissions;
    Ok(BudgetLine {
        slope: -Decimal::ONE / e_least,
        intercept: n * dc / e_least,
        kink: n * dc,
    })
}

/// Operating point for a fixed tax on the budget line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedTaxPoint {
    pub budget: Decimal,
    pub tax_income: Decimal,
    pub subsidy_outlay: Decimal,
}

/// Budget needed to reach `target` when the tax is fixed at `tax_rate`:
/// `max(0, N dc - tax * E_least)`. Income is the tax on the target's
/// emissions; outlay is what the two together pay for.
pub fn required_budget_for_fixed_tax(
    scenario: &Scenario,
    target: &RouteId,
    tax_rate: Decimal,
) -> Result<FixedTaxPoint> {
    if tax_rate < Decimal::ZERO {
        return Err(Error::InvalidPolicy(format!("tax rate must be >= 0, got {tax_rate}")));
    }
    let t = route(scenario, target)?;
    let dc = subsidy_threshold(scenario, target)?;
    let least = least_cost_route(scenario)?;
    let n = Decimal::from(scenario.demand());
    let budget = (n * dc - tax_rate * n * least.unit_emissions).max(Decimal::ZERO);
    let tax_income = tax_rate * n * t.unit_emissions;
    Ok(FixedTaxPoint {
        budget,
        tax_income,
        subsidy_outlay: budget + tax_income,
    })
}

/// Cheapest funded policy putting all demand on `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinTaxPolicy {
    pub policy: PolicyVector,
    pub tax_income: Decimal,
    pub subsidy_outlay: Decimal,
}

/// Smallest tax (with the matching minimal subsidy on `target`) at which
/// the target ties with every other route and `budget` plus tax income
/// covers the subsidy. Exact against all competitors, not just the
/// least-cost one. `None` when no tax works.
///
/// With subsidy `s(t) = max(0, max_j dc_j + t de_j)` the funds condition
/// for each competitor `j` reads `N dc_j - B - t N e_j <= 0`, so each one
/// contributes a lower bound on the tax.
pub fn min_tax_policy(scenario: &Scenario, target: &RouteId, budget: Decimal) -> Result<Option<MinTaxPolicy>> {
    let ti = scenario.require(target)?;
    let t = scenario.route(ti);
    if !t.subsidizable {
        return Err(Error::InvalidPolicy(format!("route {target} is not subsidizable")));
    }
    let n = Decimal::from(scenario.demand());
    // s = 0 branch: funds must cover nothing
    let mut lo = Decimal::ZERO;
    let mut pieces = vec![(-budget, -n * t.unit_emissions)];
    for (j, r) in scenario.routes().iter().enumerate() {
        if j != ti {
            pieces.push((n * (t.unit_cost - r.unit_cost) - budget, -n * r.unit_emissions));
        }
    }
    for (a, b) in pieces {
        if b.is_zero() {
            if a > Decimal::ZERO {
                return Ok(None);
            }
        } else {
            lo = lo.max(-a / b);
        }
    }
    let s = scenario
        .routes()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ti)
        .map(|(_, r)| t.unit_cost - r.unit_cost + lo * (t.unit_emissions - r.unit_emissions))
        .max()
        .unwrap_or(Decimal::ZERO)
        .max(Decimal::ZERO);
    let mut policy = PolicyVector::tax(lo);
    if !s.is_zero() {
        policy = policy.with_subsidy(target.clone(), s);
    }
    Ok(Some(MinTaxPolicy {
        policy,
        tax_income: lo * n * t.unit_emissions,
        subsidy_outlay: n * s,
    }))
}
