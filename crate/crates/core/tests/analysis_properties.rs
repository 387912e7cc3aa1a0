use circpack::analysis::{
    budget_sweep, calibrate_case_study, subsidy_threshold, tax_budget_line, tax_threshold, CalibrationAnchors,
    SweepRecord, SweepSettings, ROUTE_GLASS, ROUTE_LANDFILL, ROUTE_STRAP,
};
use circpack::engine::PolicyMode;
use circpack::lower::solve_lower_greedy;
use circpack::model::{PolicyVector, RouteId, Scenario, UpperObjective};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

fn case() -> Scenario {
    calibrate_case_study(&CalibrationAnchors::default()).unwrap()
}

fn budgets() -> Vec<Decimal> {
    (0..17).map(|k| Decimal::from(-60 + 10 * k)).collect()
}

fn sweep(obj: UpperObjective) -> Vec<SweepRecord> {
    budget_sweep(
        &case(),
        obj,
        &budgets(),
        PolicyMode::Combined,
        &SweepSettings::default(),
    )
    .into_iter()
    .map(|r| r.unwrap())
    .collect()
}

#[test]
fn combined_sweeps_follow_the_budget_line() {
    let s = case();
    for (obj, target) in [
        (UpperObjective::MinGhg, ROUTE_LANDFILL),
        (UpperObjective::MaxCircularity, ROUTE_GLASS),
    ] {
        let line = tax_budget_line(&s, &RouteId::new(target)).unwrap();
        let tol = line.tax_at(Decimal::ZERO) / dec!(100);
        let recs = sweep(obj);
        for r in &recs {
            assert!(r.feasible);
            assert!((r.tax_income - r.tax_rate * r.total_emissions).abs() <= dec!(0.000001));
            assert!(
                (r.tax_rate - line.tax_at(r.budget)).abs() <= tol,
                "{obj:?} B={}: {}",
                r.budget,
                r.tax_rate
            );
            if r.budget < line.kink {
                assert!(
                    (r.subsidy_outlay - r.budget - r.tax_income).abs() <= dec!(0.001),
                    "B={}",
                    r.budget
                );
            }
        }
        let zero = recs.iter().find(|r| r.budget.is_zero()).unwrap();
        assert!((zero.tax_income - zero.subsidy_outlay).abs() <= dec!(0.001));

        let beyond: Vec<&SweepRecord> = recs.iter().filter(|r| r.budget >= line.kink).collect();
        assert!(beyond.len() >= 2);
        for r in &beyond {
            assert_eq!(r.upper_value, beyond[0].upper_value);
            assert_eq!(r.tax_rate, beyond[0].tax_rate);
            assert_eq!(r.subsidy_outlay, beyond[0].subsidy_outlay);
        }
    }
}

#[test]
fn subsidy_only_target_units_grow_with_budget() {
    let s = case();
    let b: Vec<Decimal> = (0..=14).map(|k| Decimal::from(5 * k)).collect();
    for (obj, target) in [
        (UpperObjective::MinGhg, ROUTE_LANDFILL),
        (UpperObjective::MaxCircularity, ROUTE_GLASS),
    ] {
        let recs = budget_sweep(&s, obj, &b, PolicyMode::SubsidyOnly, &SweepSettings::default());
        let units: Vec<u64> = recs
            .iter()
            .map(|r| r.as_ref().unwrap().allocation[&RouteId::new(target)])
            .collect();
        assert!(units.windows(2).all(|w| w[0] <= w[1]), "{units:?}");
    }
}

fn scaled(s: &Scenario, k: Decimal) -> Scenario {
    let routes = s.base_routes().iter().map(|r| {
        let mut r = r.clone();
        r.unit_cost *= k;
        r
    });
    let mut m = s.modifiers().clone();
    m.distance_cost_coeff *= k;
    m.loss_cost_coeff *= k;
    Scenario::builder(s.demand())
        .routes(routes)
        .modifiers(m)
        .build()
        .unwrap()
}

#[test]
fn scaling_costs_scales_thresholds_only() {
    let s = case();
    for k in [dec!(0.5), dec!(3)] {
        let t = scaled(&s, k);
        let (strap, landfill, glass) = (
            RouteId::new(ROUTE_STRAP),
            RouteId::new(ROUTE_LANDFILL),
            RouteId::new(ROUTE_GLASS),
        );
        assert_eq!(
            tax_threshold(&t, &strap, &landfill).unwrap(),
            k * tax_threshold(&s, &strap, &landfill).unwrap()
        );
        assert_eq!(
            subsidy_threshold(&t, &glass).unwrap(),
            k * subsidy_threshold(&s, &glass).unwrap()
        );
        for (tax, sub) in [
            (dec!(0), dec!(0)),
            (dec!(5), dec!(0)),
            (dec!(0.5), dec!(0.07)),
            (dec!(1), dec!(0.03)),
        ] {
            let p = PolicyVector::tax(tax).with_subsidy(glass.clone(), sub);
            let q = PolicyVector::tax(tax * k).with_subsidy(glass.clone(), sub * k);
            let a = solve_lower_greedy(&s, &p).unwrap();
            let b = solve_lower_greedy(&t, &q).unwrap();
            assert_eq!(a.allocation, b.allocation);
        }
    }
}
