use circpack::lower::{optimistic_select, solve_lower_greedy, solve_lower_milp, TIE_TOLERANCE};
use circpack::model::{evaluate_cost, Allocation, UpperObjective};
use circpack::oracle::enumerate_lower;
use circpack::oracle::random::{random_policy, random_scenario};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

fn instance(seed: u64, general: bool) -> (circpack::model::Scenario, circpack::model::PolicyVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let routes = 1 + (seed as usize % 8);
    let demand = 1 + (seed / 8 % 12);
    let s = random_scenario(&mut rng, routes, demand, general);
    let p = random_policy(&mut rng, &s);
    (s, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_milp_enumeration_agree(seed in any::<u64>()) {
        let (s, p) = instance(seed, false);
        let greedy = solve_lower_greedy(&s, &p).unwrap();
        let milp = solve_lower_milp(&s, &p).unwrap();
        let brute = enumerate_lower(&s, &p).unwrap();
        prop_assert_eq!(greedy.objective, brute.objective);
        prop_assert_eq!(milp.industry_cost, brute.objective);
        prop_assert_eq!(milp.allocation.total(), s.demand());
    }

    #[test]
    fn optimistic_choice_stays_on_optimal_face(seed in any::<u64>(), budget in -50i64..50) {
        let (s, p) = instance(seed, false);
        let g = solve_lower_greedy(&s, &p).unwrap();
        for obj in [UpperObjective::MinGhg, UpperObjective::MaxCircularity] {
            let sel = optimistic_select(&s, &p, &g.tie, obj, Decimal::new(budget, 2));
            let c = evaluate_cost(&s, &sel.allocation, &p).unwrap();
            prop_assert!((c - g.objective).abs() <= TIE_TOLERANCE * Decimal::from(s.demand()));
            prop_assert_eq!(sel.allocation.total(), s.demand());
        }
    }
}

#[test]
fn general_instances_match_enumeration() {
    for seed in 0..20u64 {
        let (s, p) = instance(1000 + seed, true);
        let milp = solve_lower_milp(&s, &p).unwrap();
        let brute = enumerate_lower(&s, &p).unwrap();
        assert_eq!(milp.industry_cost, brute.objective, "seed {seed}");
        assert!(brute.allocations.contains(&milp.allocation), "seed {seed}");
    }
}

/// No single-unit move between routes lowers the follower's cost.
#[test]
fn milp_allocations_pass_exchange_check() {
    for seed in 0..60u64 {
        let (s, p) = instance(5000 + seed, seed % 2 == 0);
        let r = solve_lower_milp(&s, &p).unwrap();
        let units = r.allocation.units().to_vec();
        for from in 0..units.len() {
            for to in 0..units.len() {
                if from == to || units[from] == 0 {
                    continue;
                }
                let mut moved = units.clone();
                moved[from] -= 1;
                moved[to] += 1;
                if let Ok(a) = Allocation::from_units(&s, moved) {
                    assert!(evaluate_cost(&s, &a, &p).unwrap() >= r.industry_cost, "seed {seed}");
                }
            }
        }
    }
}
