//! Budget sweeps and the distance/loss sensitivity runs built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::engine::{optimize, BilevelProblem, PolicyMode, PolicySpace, PsoParams, DEFAULT_TAX_MAX};
use crate::error::Result;
use crate::model::{RouteId, Scenario, UpperObjective};

/// Swarm settings shared by every cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub swarm_size: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tax_max: Decimal,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            swarm_size: 10,
            iterations: 200,
            restarts: 5,
            seed: 0,
            tax_max: DEFAULT_TAX_MAX,
        }
    }
}

impl SweepSettings {
    pub fn problem<'a>(
        &self,
        scenario: &'a Scenario,
        objective: UpperObjective,
        budget: Decimal,
        mode: PolicyMode,
    ) -> BilevelProblem<'a> {
        BilevelProblem {
            scenario,
            objective,
            budget,
            space: PolicySpace::new(scenario, mode, self.tax_max),
        }
    }

    pub fn params(&self, problem: &BilevelProblem) -> PsoParams {
        let mut p = problem.params(self.seed);
        p.swarm_size = self.swarm_size;
        p.iterations = self.iterations;
        p.restarts = self.restarts;
        p
    }
}

/// One optimized budget level.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub budget: Decimal,
    pub tax_rate: Decimal,
    pub tax_income: Decimal,
    pub subsidy_outlay: Decimal,
    pub upper_value: Decimal,
    /// Units per route, every route listed.
    pub allocation: BTreeMap<RouteId, u64>,
    pub industry_cost: Decimal,
    pub total_emissions: Decimal,
    pub circularity_index: Decimal,
    pub subsidies: BTreeMap<RouteId, Decimal>,
    pub feasible: bool,
    /// Route carrying the most units.
    pub pathway: Option<RouteId>,
}

/// Optimizes each budget independently; a failing cell does not stop the
/// others. Output order follows `budgets`.
pub fn budget_sweep(
    scenario: &Scenario,
    objective: UpperObjective,
    budgets: &[Decimal],
    mode: PolicyMode,
    settings: &SweepSettings,
) -> Vec<Result<SweepRecord>> {
    budgets
        .par_iter()
        .map(|&budget| {
            let problem = settings.problem(scenario, objective, budget, mode);
            let out = optimize(&problem, &settings.params(&problem))?;
            let r = &out.response;
            Ok(SweepRecord {
                budget,
                tax_rate: out.best_policy.tax_rate,
                tax_income: r.tax_payment,
                subsidy_outlay: r.subsidy_outlay,
                upper_value: out.upper_value,
                allocation: scenario
                    .routes()
                    .iter()
                    .zip(r.allocation.units())
                    .map(|(route, &u)| (route.id.clone(), u))
                    .collect(),
                industry_cost: r.industry_cost,
                total_emissions: r.total_emissions,
                circularity_index: r.circularity_index,
                subsidies: out.best_policy.subsidies.clone(),
                feasible: out.feasible,
                pathway: r.allocation.dominant_route().map(|i| scenario.route(i).id.clone()),
            })
        })
        .collect()
}

/// Least-squares slope of `y` on `x`; `None` with fewer than two distinct x.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// A budget sweep at one distance or loss value.
#[derive(Debug, Clone)]
pub struct SensitivityRun {
    pub parameter: Decimal,
    pub records: Vec<Result<SweepRecord>>,
    /// Most frequent pathway across the feasible records.
    pub pathway: Option<RouteId>,
    /// Slopes against budget, fitted over feasible records on the main
    /// pathway where the tax is still positive (left of the kink).
    pub tax_rate_slope: Option<f64>,
    pub revenue_slope: Option<f64>,
    pub subsidy_slope: Option<f64>,
    pub cost_slope: Option<f64>,
}

impl SensitivityRun {
    fn new(parameter: Decimal, records: Vec<Result<SweepRecord>>) -> SensitivityRun {
        let ok: Vec<&SweepRecord> = records
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .filter(|r| r.feasible)
            .collect();
        let mut counts: Vec<(RouteId, usize)> = Vec::new();
        for r in &ok {
            if let Some(p) = &r.pathway {
                match counts.iter_mut().find(|(q, _)| q == p) {
                    Some(c) => c.1 += 1,
                    None => counts.push((p.clone(), 1)),
                }
            }
        }
        let pathway = counts
            .iter()
            .fold(None::<&(RouteId, usize)>, |best, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            })
            .map(|c| c.0.clone());
        let interior: Vec<&&SweepRecord> = ok
            .iter()
            .filter(|r| r.pathway == pathway && r.tax_rate > Decimal::ZERO)
            .collect();
        let fit = |f: &dyn Fn(&SweepRecord) -> Decimal| {
            let pts: Vec<(f64, f64)> = interior
                .iter()
                .map(|r| (r.budget.to_f64().unwrap_or(0.0), f(r).to_f64().unwrap_or(0.0)))
                .collect();
            fit_slope(&pts)
        };
        SensitivityRun {
            parameter,
            pathway,
            tax_rate_slope: fit(&|r| r.tax_rate),
            revenue_slope: fit(&|r| r.tax_income),
            subsidy_slope: fit(&|r| r.subsidy_outlay),
            cost_slope: fit(&|r| r.industry_cost),
            records,
        }
    }
}

/// Combined-policy budget sweeps at each glass-washing distance, loss held
/// at the scenario's value.
pub fn sensitivity_distance(
    scenario: &Scenario,
    objective: UpperObjective,
    distances: &[Decimal],
    budgets: &[Decimal],
    settings: &SweepSettings,
) -> Result<Vec<SensitivityRun>> {
    let loss = scenario.modifiers().glass_loss_fraction;
    distances
        .iter()
        .map(|&d| {
            let s = scenario.apply_modifiers(d, loss)?;
            let records = budget_sweep(&s, objective, budgets, PolicyMode::Combined, settings);
            Ok(SensitivityRun::new(d, records))
        })
        .collect()
}

/// Combined-policy budget sweeps at each glass loss fraction, distance held
/// at the scenario's value.
pub fn sensitivity_loss(
    scenario: &Scenario,
    objective: UpperObjective,
    losses: &[Decimal],
    budgets: &[Decimal],
    settings: &SweepSettings,
) -> Result<Vec<SensitivityRun>> {
    let distance = scenario.modifiers().glass_wash_distance;
    losses
        .iter()
        .map(|&l| {
            let s = scenario.apply_modifiers(distance, l)?;
            let records = budget_sweep(&s, objective, budgets, PolicyMode::Combined, settings);
            Ok(SensitivityRun::new(l, records))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rust_decimal_macros::dec;

    use super::*;
    use crate::analysis::{calibrate_case_study, CalibrationAnchors, ROUTE_GLASS, ROUTE_LANDFILL};

    fn quick() -> SweepSettings {
        SweepSettings {
            iterations: 60,
            restarts: 2,
            ..SweepSettings::default()
        }
    }

    #[test]
    fn slope_fit() {
        assert_eq!(fit_slope(&[(0.0, 1.0), (2.0, 5.0), (4.0, 9.0)]), Some(2.0));
        assert_eq!(fit_slope(&[(1.0, 1.0)]), None);
        assert_eq!(fit_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
    }

    #[test]
    fn subsidy_only_sweep_is_ordered_and_monotone() {
        let s = calibrate_case_study(&CalibrationAnchors::default()).unwrap();
        let budgets: Vec<Decimal> = (0..=10).map(|k| Decimal::from(k * 10)).collect();
        let recs: Vec<SweepRecord> =
            budget_sweep(&s, UpperObjective::MinGhg, &budgets, PolicyMode::SubsidyOnly, &quick())
                .into_iter()
                .map(|r| r.unwrap())
                .collect();
        assert_eq!(recs[0].upper_value, dec!(64.24));
        assert_eq!(recs[10].upper_value, dec!(49.97));
        let landfill = RouteId::new(ROUTE_LANDFILL);
        assert!(recs
            .windows(2)
            .all(|w| w[0].allocation[&landfill] <= w[1].allocation[&landfill]));
        assert!(recs
            .iter()
            .zip(&budgets)
            .all(|(r, b)| r.budget == *b && r.tax_rate.is_zero()));
    }

    #[test]
    fn loss_runs_report_pathways() {
        let s = calibrate_case_study(&CalibrationAnchors::default()).unwrap();
        let runs = sensitivity_loss(
            &s,
            UpperObjective::MinGhg,
            &[dec!(0.01), dec!(0.1)],
            &[dec!(0), dec!(20)],
            &quick(),
        )
        .unwrap();
        assert_eq!(runs[0].pathway, Some(RouteId::new(ROUTE_GLASS)));
        assert_eq!(runs[1].pathway, Some(RouteId::new(ROUTE_LANDFILL)));
        assert!(runs[1].tax_rate_slope.unwrap() < 0.0);
    }
}
