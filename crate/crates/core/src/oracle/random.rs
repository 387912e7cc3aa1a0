//! Random small instances for cross-checking the solvers.
//!
//! Coefficients are drawn on coarse decimal grids (costs and emissions in
//! thousandths, tax in hundredths) so distinct allocations never differ by
//! less than the solvers' float tolerances.

use rand::Rng;
use rust_decimal::Decimal;

use crate::model::{PolicyVector, RouteSpec, Scenario};

const TECHS: [&str; 3] = ["tech_a", "tech_b", "tech_c"];

fn milli(rng: &mut impl Rng, lo: i64, hi: i64) -> Decimal {
    Decimal::new(rng.random_range(lo..=hi), 3)
}

/// A scenario with `routes` routes and the given demand. With `general`,
/// technologies get activation costs and some routes get capacities.
pub fn random_scenario(rng: &mut impl Rng, routes: usize, demand: u64, general: bool) -> Scenario {
    let mut b = Scenario::builder(demand);
    let mut used = Vec::new();
    for i in 0..routes {
        let tech = TECHS[rng.random_range(0..TECHS.len())];
        if !used.contains(&tech) {
            used.push(tech);
        }
        b = b.route(
            RouteSpec::new(
                format!("r{i}"),
                "pkg",
                tech,
                milli(rng, -50, 100),
                milli(rng, 0, 100),
                milli(rng, 0, 2000),
            )
            .subsidizable(rng.random_bool(0.6)),
        );
    }
    if general {
        for t in used {
            if rng.random_bool(0.5) {
                b = b.fixed_cost(t, milli(rng, 1, 60));
            }
        }
        // the last route stays uncapped so demand is always coverable
        for i in 0..routes.saturating_sub(1) {
            if rng.random_bool(0.5) {
                b = b.capacity(format!("r{i}"), rng.random_range(0..=demand));
            }
        }
    }
    b.build().expect("generated scenario is valid")
}

/// A valid policy for `scenario`: tax in hundredths up to 3, subsidies in
/// thousandths up to 0.08 on some subsidizable routes.
pub fn random_policy(rng: &mut impl Rng, scenario: &Scenario) -> PolicyVector {
    let mut p = PolicyVector::tax(Decimal::new(rng.random_range(0..=300), 2));
    for r in scenario.routes() {
        if r.subsidizable && rng.random_bool(0.5) {
            p = p.with_subsidy(r.id.clone(), milli(rng, 0, 80));
        }
    }
    p
}
