use rust_decimal::Decimal;

use super::{Allocation, PolicyVector, Scenario};
use crate::error::{Error, Result};

/// The follower's response to a policy together with its accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerResult {
    pub allocation: Allocation,
    /// Production + transport + waste management − revenue + activation
    /// costs + tax − subsidies. Negative means a net profit increase.
    pub industry_cost: Decimal,
    pub total_emissions: Decimal,
    pub circularity_index: Decimal,
    pub subsidy_outlay: Decimal,
    pub tax_payment: Decimal,
    pub fixed_cost: Decimal,
}

pub fn evaluate_emissions(scenario: &Scenario, allocation: &Allocation) -> Result<Decimal> {
    allocation.check(scenario)?;
    Ok(emissions(scenario, allocation))
}

/// Follower cost with activation costs and the policy applied.
pub fn evaluate_cost(scenario: &Scenario, allocation: &Allocation, policy: &PolicyVector) -> Result<Decimal> {
    allocation.check(scenario)?;
    policy.validate(scenario)?;
    let subs = policy.dense_subsidies(scenario);
    Ok(cost(scenario, allocation, policy.tax_rate, &subs))
}

pub fn evaluate_subsidy(scenario: &Scenario, allocation: &Allocation, policy: &PolicyVector) -> Result<Decimal> {
    allocation.check(scenario)?;
    policy.validate(scenario)?;
    Ok(outlay(allocation, &policy.dense_subsidies(scenario)))
}

/// Allocation-weighted mean of the routes' circularity.
pub fn evaluate_circularity(scenario: &Scenario, allocation: &Allocation) -> Result<Decimal> {
    allocation.check(scenario)?;
    circularity(scenario, allocation)
}

/// Full accounting for `allocation` under `policy`.
pub fn lower_result(scenario: &Scenario, allocation: Allocation, policy: &PolicyVector) -> Result<LowerResult> {
    allocation.check(scenario)?;
    policy.validate(scenario)?;
    let subs = policy.dense_subsidies(scenario);
    Ok(account(scenario, allocation, policy.tax_rate, &subs))
}

pub(crate) fn account(
    scenario: &Scenario,
    allocation: Allocation,
    tax_rate: Decimal,
    subsidies: &[Decimal],
) -> LowerResult {
    let total_emissions = emissions(scenario, &allocation);
    let tax_payment = tax_rate * total_emissions;
    let subsidy_outlay = outlay(&allocation, subsidies);
    let fixed_cost = activation_cost(scenario, &allocation);
    let industry_cost = base_cost(scenario, &allocation) + fixed_cost + tax_payment - subsidy_outlay;
    let circularity_index = circularity(scenario, &allocation).unwrap_or(Decimal::ZERO);
    LowerResult {
        allocation,
        industry_cost,
        total_emissions,
        circularity_index,
        subsidy_outlay,
        tax_payment,
        fixed_cost,
    }
}

pub(crate) fn emissions(scenario: &Scenario, allocation: &Allocation) -> Decimal {
    weighted(allocation, scenario.routes().iter().map(|r| r.unit_emissions))
}

pub(crate) fn base_cost(scenario: &Scenario, allocation: &Allocation) -> Decimal {
    weighted(allocation, scenario.routes().iter().map(|r| r.unit_cost))
}

pub(crate) fn outlay(allocation: &Allocation, subsidies: &[Decimal]) -> Decimal {
    weighted(allocation, subsidies.iter().copied())
}

pub(crate) fn cost(scenario: &Scenario, allocation: &Allocation, tax_rate: Decimal, subsidies: &[Decimal]) -> Decimal {
    base_cost(scenario, allocation) + activation_cost(scenario, allocation) + tax_rate * emissions(scenario, allocation)
        - outlay(allocation, subsidies)
}

/// Sum of activation costs over technologies carrying at least one unit.
pub(crate) fn activation_cost(scenario: &Scenario, allocation: &Allocation) -> Decimal {
    scenario
        .fixed_costs()
        .iter()
        .filter(|(tech, _)| {
            scenario
                .routes()
                .iter()
                .zip(allocation.units())
                .any(|(r, &u)| u > 0 && &r.technology == *tech)
        })
        .map(|(_, c)| *c)
        .sum()
}

fn circularity(scenario: &Scenario, allocation: &Allocation) -> Result<Decimal> {
    if scenario.demand() == 0 {
        return Err(Error::UndefinedIndex);
    }
    let total = weighted(allocation, scenario.routes().iter().map(|r| r.unit_circularity));
    Ok(total / Decimal::from(scenario.demand()))
}

fn weighted(allocation: &Allocation, coeffs: impl Iterator<Item = Decimal>) -> Decimal {
    allocation
        .units()
        .iter()
        .zip(coeffs)
        .filter(|(&u, _)| u > 0)
        .map(|(&u, c)| Decimal::from(u) * c)
        .sum()
}

#[cfg(test)]
mod tests {
    use rust_decimal_macros::dec;

    use super::*;
    use crate::model::RouteSpec;

    fn scenario(demand: u64) -> Scenario {
        Scenario::builder(demand)
            .route(RouteSpec::new("a", "bag", "strap", dec!(-0.001), dec!(0.06), dec!(1.2)))
            .route(RouteSpec::new("b", "bag", "landfill", dec!(0.06), dec!(0.05), dec!(1.1)).subsidizable(true))
            .build()
            .unwrap()
    }

    #[test]
    fn zero_demand_sums_are_empty() {
        let s = scenario(0);
        let a = Allocation::from_pairs(&s, Vec::<(&str, u64)>::new()).unwrap();
        assert_eq!(evaluate_emissions(&s, &a).unwrap(), Decimal::ZERO);
        assert_eq!(evaluate_cost(&s, &a, &PolicyVector::zero()).unwrap(), Decimal::ZERO);
        assert!(matches!(evaluate_circularity(&s, &a), Err(Error::UndefinedIndex)));
    }

    #[test]
    fn allocation_from_other_scenario_rejected() {
        let s = scenario(10);
        let other = scenario(5);
        let a = Allocation::from_pairs(&other, [("a", 5)]).unwrap();
        assert!(matches!(evaluate_emissions(&s, &a), Err(Error::InvalidAllocation(_))));
    }

    #[test]
    fn cost_identity_holds() {
        let s = scenario(10);
        let a = Allocation::from_pairs(&s, [("a", 3), ("b", 7)]).unwrap();
        let p = PolicyVector::tax(dec!(2)).with_subsidy("b", dec!(0.01));
        let r = lower_result(&s, a.clone(), &p).unwrap();
        assert_eq!(r.tax_payment, dec!(2) * r.total_emissions);
        assert_eq!(r.total_emissions, dec!(0.18) + dec!(0.35));
        assert_eq!(r.subsidy_outlay, dec!(0.07));
        assert_eq!(
            r.industry_cost,
            dec!(-0.003) + dec!(0.42) + r.tax_payment - r.subsidy_outlay
        );
        assert_eq!(r.industry_cost, evaluate_cost(&s, &a, &p).unwrap());
        assert_eq!(r.circularity_index, dec!(1.13));
    }

    #[test]
    fn activation_cost_counts_used_technologies_once() {
        let s = Scenario::builder(4)
            .route(RouteSpec::new("a", "bag", "strap", dec!(1), dec!(0), dec!(1)))
            .route(RouteSpec::new("b", "film", "strap", dec!(1), dec!(0), dec!(1)))
            .route(RouteSpec::new("c", "jar", "wash", dec!(1), dec!(0), dec!(1)))
            .fixed_cost("strap", dec!(5))
            .fixed_cost("wash", dec!(7))
            .build()
            .unwrap();
        let a = Allocation::from_pairs(&s, [("a", 2), ("b", 2)]).unwrap();
        assert_eq!(evaluate_cost(&s, &a, &PolicyVector::zero()).unwrap(), dec!(9));
    }
}
