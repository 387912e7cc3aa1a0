//! Coffee-packaging case study from the published anchors.
//!
//! Route totals are divided by demand to get per-unit coefficients. The
//! distance and loss coefficients are solved from the pathway-switch
//! windows: each coefficient takes the midpoint of the interval that keeps
//! every switch where the anchors put it.

use rust_decimal::Decimal;
use rust_decimal_macros::dec;

use crate::error::{Error, Result};
use crate::model::{RouteId, RouteSpec, Scenario, SensitivityModifiers};

pub const ROUTE_STRAP: &str = "multilayer_bag_strap";
pub const ROUTE_LANDFILL: &str = "multilayer_bag_landfill";
pub const ROUTE_GLASS: &str = "glass_jar_washing";

/// Published constants of the case study. Totals are for `demand` units.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationAnchors {
    pub demand: u64,
    /// Total cost of the follower's unregulated choice (STRAP).
    pub least_cost_total: Decimal,
    pub strap_emissions: Decimal,
    pub landfill_emissions: Decimal,
    /// At the base distance and loss.
    pub glass_emissions: Decimal,
    pub strap_circularity: Decimal,
    pub landfill_circularity: Decimal,
    pub glass_circularity: Decimal,
    /// Per-unit subsidies that make each route tie with STRAP.
    pub landfill_subsidy: Decimal,
    pub glass_subsidy: Decimal,
    /// The rounded tax threshold quoted for STRAP to landfill.
    pub quoted_tax_threshold: Decimal,
    pub base_distance: Decimal,
    pub base_loss: Decimal,
    /// Shortest distance studied; glass must still cost more than landfill.
    pub shortest_distance: Decimal,
    /// Open interval holding the min-GHG glass/landfill switch in miles.
    pub distance_window: (Decimal, Decimal),
    /// Open interval holding the same switch in loss fraction.
    pub loss_window: (Decimal, Decimal),
    /// Loss at which glass emits more than STRAP.
    pub high_loss: Decimal,
    /// At the lowest studied loss, budget below which min-GHG needs no subsidy.
    pub low_loss_subsidy_free_budget: Decimal,
}

impl Default for CalibrationAnchors {
    fn default() -> Self {
        CalibrationAnchors {
            demand: 1000,
            least_cost_total: dec!(-0.93),
            strap_emissions: dec!(64.24),
            landfill_emissions: dec!(49.97),
            glass_emissions: dec!(50.08),
            strap_circularity: dec!(1.275),
            landfill_circularity: dec!(1.18),
            glass_circularity: dec!(1.475),
            landfill_subsidy: dec!(0.061),
            glass_subsidy: dec!(0.067),
            quoted_tax_threshold: dec!(4.3),
            base_distance: dec!(65),
            base_loss: dec!(0.0313),
            shortest_distance: dec!(7),
            distance_window: (dec!(15), dec!(65)),
            loss_window: (dec!(0.01), dec!(0.0313)),
            high_loss: dec!(0.10),
            low_loss_subsidy_free_budget: dec!(-25),
        }
    }
}

const DP: u32 = 7;

/// Dominated pathways that complete the superstructure. Each is strictly
/// worse than every calibrated route on every objective.
pub fn placeholder_routes() -> Vec<RouteSpec> {
    let p = |id: &str, product: &str, tech: &str, outs: &[&str], c, e, ci| {
        RouteSpec::new(id, product, tech, c, e, ci)
            .with_outputs(outs.iter().copied())
            .placeholder(true)
    };
    vec![
        p(
            "multilayer_bag_incineration",
            "multilayer_bag",
            "incineration",
            &["electricity"],
            dec!(0.072),
            dec!(0.095),
            dec!(0.85),
        ),
        p(
            "multilayer_bag_pyrolysis",
            "multilayer_bag",
            "pyrolysis",
            &["pyrolysis_oil"],
            dec!(0.041),
            dec!(0.088),
            dec!(1.05),
        ),
        p(
            "monolayer_bag_mechanical",
            "monolayer_bag",
            "mechanical_recycling",
            &["recycled_pe"],
            dec!(0.018),
            dec!(0.071),
            dec!(1.10),
        ),
        p(
            "monolayer_bag_landfill",
            "monolayer_bag",
            "landfill",
            &[],
            dec!(0.064),
            dec!(0.078),
            dec!(0.95),
        ),
        p(
            "rigid_container_mechanical",
            "rigid_container",
            "mechanical_recycling",
            &["recycled_pp"],
            dec!(0.085),
            dec!(0.112),
            dec!(1.12),
        ),
    ]
}

/// Builds the case-study scenario. Every violated relation among the
/// anchors is reported, not just the first.
pub fn calibrate_case_study(a: &CalibrationAnchors) -> Result<Scenario> {
    let mut bad = Vec::new();
    if a.demand == 0 {
        return Err(Error::Calibration(vec!["demand must be positive".into()]));
    }
    let n = Decimal::from(a.demand);
    let c_s = a.least_cost_total / n;
    let (e_s, e_l, e_g) = (a.strap_emissions / n, a.landfill_emissions / n, a.glass_emissions / n);
    let c_l = c_s + a.landfill_subsidy;
    let c_g = c_s + a.glass_subsidy;

    if e_l >= e_s {
        bad.push("threshold relation: landfill must emit less than STRAP".to_string());
    } else {
        let t = a.landfill_subsidy / (e_s - e_l);
        if ((t - a.quoted_tax_threshold) / a.quoted_tax_threshold).abs() > dec!(0.02) {
            bad.push(format!(
                "threshold relation: {} / {} = {} is not within 2% of {}",
                a.landfill_subsidy,
                e_s - e_l,
                t.round_dp(4),
                a.quoted_tax_threshold
            ));
        }
    }
    if !(e_l < e_g && e_g < e_s) {
        bad.push("emission order: expected landfill < glass < STRAP at the base case".into());
    }
    if a.landfill_subsidy <= Decimal::ZERO || a.glass_subsidy <= a.landfill_subsidy {
        bad.push("subsidy order: expected 0 < landfill subsidy < glass subsidy".into());
    }
    for (name, ci) in [
        ("strap_circularity", a.strap_circularity),
        ("landfill_circularity", a.landfill_circularity),
        ("glass_circularity", a.glass_circularity),
    ] {
        if ci < Decimal::ZERO || ci > dec!(2) {
            bad.push(format!("{name}: must lie in [0, 2]"));
        }
    }
    if !(a.glass_circularity > a.strap_circularity && a.strap_circularity > a.landfill_circularity) {
        bad.push("circularity order: expected landfill < STRAP < glass".into());
    }
    let (d_lo, d_hi) = a.distance_window;
    if !(a.shortest_distance < d_lo && d_lo < d_hi && d_hi <= a.base_distance) {
        bad.push("distance window: expected shortest < lo < hi <= base distance".into());
    }
    let (l_lo, l_hi) = a.loss_window;
    if !(Decimal::ZERO <= l_lo
        && l_lo < l_hi
        && l_hi <= a.base_loss
        && a.base_loss < a.high_loss
        && a.high_loss < Decimal::ONE)
    {
        bad.push("loss window: expected 0 <= lo < hi <= base loss < high loss < 1".into());
    }
    if a.low_loss_subsidy_free_budget >= Decimal::ZERO {
        bad.push("low-loss budget anchor must be negative".into());
    }
    if !bad.is_empty() {
        return Err(Error::Calibration(bad));
    }

    // Distance: emissions cross landfill at the window midpoint; cost keeps
    // glass above landfill down to the shortest distance.
    let d_mid = (d_lo + d_hi) / dec!(2);
    let k_de = ((e_g - e_l) / (a.base_distance - d_mid)).round_dp(DP);
    let k_dc = ((c_g - c_l) / (a.base_distance - a.shortest_distance) / dec!(2)).round_dp(DP);

    // Loss: glass must exceed STRAP at high loss, which bounds the slope
    // from below and the crossover from below.
    let k_min = (e_s - e_g) / (a.high_loss - a.base_loss);
    let x_lo = l_lo.max(a.base_loss - (e_g - e_l) / k_min);
    let x_hi = l_hi;
    let x_mid = (x_lo + x_hi) / dec!(2);
    let k_le = ((e_g - e_l) / (a.base_loss - x_mid)).round_dp(DP);

    // Loss cost: at the lowest loss the subsidy-free region starts at the
    // anchored budget, B = -N dc e_G / (e_S - e_G).
    let e_g_low = e_g - k_le * (a.base_loss - l_lo);
    if e_g_low >= e_s || e_g_low <= Decimal::ZERO {
        return Err(Error::Calibration(vec!["low-loss glass emissions out of range".into()]));
    }
    let dc_low = -a.low_loss_subsidy_free_budget * (e_s - e_g_low) / (n * e_g_low);
    let k_lc = ((c_g - (c_s + dc_low)) / (a.base_loss - l_lo)).round_dp(DP);

    let modifiers = SensitivityModifiers {
        glass_wash_distance: a.base_distance,
        glass_loss_fraction: a.base_loss,
        distance_cost_coeff: k_dc,
        distance_emission_coeff: k_de,
        loss_cost_coeff: k_lc,
        loss_emission_coeff: k_le,
        affected_routes: vec![RouteId::new(ROUTE_GLASS)],
    };
    let c_g0 = c_g - k_dc * a.base_distance - k_lc * a.base_loss;
    let e_g0 = e_g - k_de * a.base_distance - k_le * a.base_loss;

    let mut checks = Vec::new();
    let glass_e = |d: Decimal, l: Decimal| e_g0 + k_de * d + k_le * l;
    let glass_c = |d: Decimal, l: Decimal| c_g0 + k_dc * d + k_lc * l;
    let cross_d = (e_l - glass_e(Decimal::ZERO, a.base_loss)) / k_de;
    if !(d_lo < cross_d && cross_d < d_hi) {
        checks.push(format!("distance crossover {} outside the window", cross_d.round_dp(3)));
    }
    let cross_l = (e_l - glass_e(a.base_distance, Decimal::ZERO)) / k_le;
    if !(l_lo < cross_l && cross_l < l_hi) {
        checks.push(format!("loss crossover {} outside the window", cross_l.round_dp(5)));
    }
    if glass_c(a.shortest_distance, a.base_loss) <= c_l {
        checks.push("glass undercuts landfill at the shortest distance".into());
    }
    if glass_e(a.base_distance, a.high_loss) <= e_s {
        checks.push("glass does not out-emit STRAP at high loss".into());
    }
    if e_g0 < Decimal::ZERO || k_lc < Decimal::ZERO {
        checks.push("loss or distance terms exceed the base-case glass coefficients".into());
    }
    for p in placeholder_routes() {
        if !(p.unit_cost > c_s && p.unit_emissions > e_s && p.unit_circularity < a.landfill_circularity) {
            checks.push(format!("placeholder {} is not dominated", p.id));
        }
    }
    if !checks.is_empty() {
        return Err(Error::Calibration(checks));
    }

    let routes = vec![
        RouteSpec::new(ROUTE_STRAP, "multilayer_bag", "strap", c_s, e_s, a.strap_circularity)
            .with_outputs(["recycled_pe", "recycled_pet"]),
        RouteSpec::new(
            ROUTE_LANDFILL,
            "multilayer_bag",
            "landfill",
            c_l,
            e_l,
            a.landfill_circularity,
        )
        .subsidizable(true),
        RouteSpec::new(
            ROUTE_GLASS,
            "glass_jar",
            "glass_washing",
            c_g0,
            e_g0,
            a.glass_circularity,
        )
        .with_outputs(["washed_glass_jar"])
        .subsidizable(true),
    ];
    Scenario::builder(a.demand)
        .routes(routes)
        .routes(placeholder_routes())
        .modifiers(modifiers)
        .build()
        .map_err(|e| Error::Calibration(vec![e.to_string()]))
}

/// One anchor compared with what the calibrated scenario reproduces.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: &'static str,
    pub anchor: Decimal,
    pub model: Decimal,
}

impl CalibrationAnchors {
    /// Anchors recomputed from `scenario`, for the calibration report.
    pub fn residuals(&self, scenario: &Scenario) -> Result<Vec<Residual>> {
        let n = Decimal::from(scenario.demand());
        let get = |id: &str| {
            scenario
                .route_by_id(&RouteId::new(id))
                .ok_or(Error::InvalidAllocation(format!("missing route {id}")))
        };
        let (s, l, g) = (get(ROUTE_STRAP)?, get(ROUTE_LANDFILL)?, get(ROUTE_GLASS)?);
        let threshold = super::tax_threshold(scenario, &s.id, &l.id)?;
        let r = |name, anchor, model| Residual { name, anchor, model };
        Ok(vec![
            r("least_cost_total", self.least_cost_total, n * s.unit_cost),
            r("strap_emissions", self.strap_emissions, n * s.unit_emissions),
            r("landfill_emissions", self.landfill_emissions, n * l.unit_emissions),
            r("glass_emissions", self.glass_emissions, n * g.unit_emissions),
            r("strap_circularity", self.strap_circularity, s.unit_circularity),
            r("landfill_circularity", self.landfill_circularity, l.unit_circularity),
            r("glass_circularity", self.glass_circularity, g.unit_circularity),
            r("landfill_subsidy", self.landfill_subsidy, l.unit_cost - s.unit_cost),
            r("glass_subsidy", self.glass_subsidy, g.unit_cost - s.unit_cost),
            r("tax_threshold", self.quoted_tax_threshold, threshold),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tax_threshold;
    use crate::model::{evaluate_cost, Allocation, PolicyVector};

    #[test]
    fn default_anchors_reproduce_the_case() {
        let a = CalibrationAnchors::default();
        let s = calibrate_case_study(&a).unwrap();
        assert_eq!(s.demand(), 1000);
        assert_eq!(s.len(), 8);
        let strap = s.route_by_id(&ROUTE_STRAP.into()).unwrap();
        let glass = s.route_by_id(&ROUTE_GLASS.into()).unwrap();
        assert_eq!(strap.unit_cost, dec!(-0.00093));
        assert_eq!(glass.unit_cost, dec!(0.06607));
        assert_eq!(glass.unit_emissions, dec!(0.05008));
        let t = tax_threshold(&s, &ROUTE_STRAP.into(), &ROUTE_LANDFILL.into()).unwrap();
        assert_eq!(t.round_dp(4), dec!(4.2747));
        let all = Allocation::from_pairs(&s, [(ROUTE_STRAP, 1000)]).unwrap();
        assert_eq!(evaluate_cost(&s, &all, &PolicyVector::zero()).unwrap(), dec!(-0.93));
        for r in a.residuals(&s).unwrap() {
            if r.name != "tax_threshold" {
                assert_eq!(r.anchor, r.model, "{}", r.name);
            }
        }
    }

    #[test]
    fn coefficients_are_short_decimals() {
        let s = calibrate_case_study(&CalibrationAnchors::default()).unwrap();
        let m = s.modifiers();
        assert_eq!(m.distance_emission_coeff, dec!(0.0000044));
        assert_eq!(m.distance_cost_coeff, dec!(0.0000517));
        assert!(m.loss_emission_coeff > dec!(0.20611));
        assert!(m.loss_cost_coeff > dec!(2.4) && m.loss_cost_coeff < dec!(2.6));
        for c in [m.loss_cost_coeff, m.loss_emission_coeff] {
            assert!(c.scale() <= 7);
        }
    }

    #[test]
    fn landfill_above_strap_fails() {
        let a = CalibrationAnchors {
            landfill_emissions: dec!(65),
            ..CalibrationAnchors::default()
        };
        let Err(Error::Calibration(v)) = calibrate_case_study(&a) else {
            panic!("expected calibration failure")
        };
        assert!(v.iter().any(|m| m.contains("threshold relation")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("emission order")), "{v:?}");
    }

    #[test]
    fn threshold_far_from_quote_fails() {
        let a = CalibrationAnchors {
            quoted_tax_threshold: dec!(5),
            ..CalibrationAnchors::default()
        };
        assert!(matches!(calibrate_case_study(&a), Err(Error::Calibration(_))));
    }
}
