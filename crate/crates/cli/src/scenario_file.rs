//! JSON scenario files.
//!
//! Numbers are read and written as exact decimals. Route coefficients are
//! stored at zero distance and zero loss; the `modifiers` block carries the
//! operating distance and loss that the solvers apply.

use std::collections::BTreeMap;
use std::path::Path;

use circpack::model::{RouteId, RouteSpec, Scenario, SensitivityModifiers};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub demand: u64,
    pub routes: Vec<RouteRecord>,
    #[serde(default)]
    pub modifiers: ModifiersRecord,
    #[serde(default)]
    pub technology_fixed_costs: BTreeMap<String, Decimal>,
    #[serde(default)]
    pub capacity_limits: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRecord {
    pub route_id: String,
    pub product_id: String,
    pub technology_id: String,
    #[serde(default)]
    pub recovered_outputs: Vec<String>,
    pub unit_cost: Decimal,
    pub unit_emissions: Decimal,
    pub unit_circularity: Decimal,
    #[serde(default)]
    pub subsidizable: bool,
    #[serde(default)]
    pub placeholder: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stages: BTreeMap<String, Decimal>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModifiersRecord {
    #[serde(default)]
    pub glass_wash_distance: Decimal,
    #[serde(default)]
    pub glass_loss_fraction: Decimal,
    #[serde(default)]
    pub distance_cost_coeff: Decimal,
    #[serde(default)]
    pub distance_emission_coeff: Decimal,
    #[serde(default)]
    pub loss_cost_coeff: Decimal,
    #[serde(default)]
    pub loss_emission_coeff: Decimal,
    #[serde(default)]
    pub affected_route_ids: Vec<String>,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> ScenarioFile {
        let m = s.modifiers();
        ScenarioFile {
            demand: s.demand(),
            routes: s
                .base_routes()
                .iter()
                .map(|r| RouteRecord {
                    route_id: r.id.to_string(),
                    product_id: r.product.clone(),
                    technology_id: r.technology.clone(),
                    recovered_outputs: r.recovered_outputs.clone(),
                    unit_cost: r.unit_cost.normalize(),
                    unit_emissions: r.unit_emissions.normalize(),
                    unit_circularity: r.unit_circularity.normalize(),
                    subsidizable: r.subsidizable,
                    placeholder: r.placeholder,
                    stages: r.stages.clone(),
                })
                .collect(),
            modifiers: ModifiersRecord {
                glass_wash_distance: m.glass_wash_distance.normalize(),
                glass_loss_fraction: m.glass_loss_fraction.normalize(),
                distance_cost_coeff: m.distance_cost_coeff.normalize(),
                distance_emission_coeff: m.distance_emission_coeff.normalize(),
                loss_cost_coeff: m.loss_cost_coeff.normalize(),
                loss_emission_coeff: m.loss_emission_coeff.normalize(),
                affected_route_ids: m.affected_routes.iter().map(|r| r.to_string()).collect(),
            },
            technology_fixed_costs: s.fixed_costs().clone(),
            capacity_limits: s.capacities().iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Checks every invariant and reports all violations together.
    pub fn into_scenario(self) -> Result<Scenario, CliError> {
        let mut extra = Vec::new();
        if self.demand == 0 {
            extra.push("demand: must be at least 1".to_string());
        }
        let routes = self.routes.into_iter().map(|r| {
            let mut spec = RouteSpec::new(
                r.route_id,
                r.product_id,
                r.technology_id,
                r.unit_cost,
                r.unit_emissions,
                r.unit_circularity,
            )
            .with_outputs(r.recovered_outputs)
            .subsidizable(r.subsidizable)
            .placeholder(r.placeholder);
            spec.stages = r.stages;
            spec
        });
        let m = self.modifiers;
        let modifiers = SensitivityModifiers {
            glass_wash_distance: m.glass_wash_distance,
            glass_loss_fraction: m.glass_loss_fraction,
            distance_cost_coeff: m.distance_cost_coeff,
            distance_emission_coeff: m.distance_emission_coeff,
            loss_cost_coeff: m.loss_cost_coeff,
            loss_emission_coeff: m.loss_emission_coeff,
            affected_routes: m.affected_route_ids.into_iter().map(RouteId::new).collect(),
        };
        let mut b = Scenario::builder(self.demand).routes(routes).modifiers(modifiers);
        for (t, c) in self.technology_fixed_costs {
            b = b.fixed_cost(t, c);
        }
        for (r, c) in self.capacity_limits {
            b = b.capacity(r, c);
        }
        match b.build() {
            Ok(s) if extra.is_empty() => Ok(s),
            Ok(_) => Err(CliError::validation("scenario failed validation", extra)),
            Err(circpack::Error::InvalidScenario(v)) => {
                extra.extend(v);
                Err(CliError::validation("scenario failed validation", extra))
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Parses scenario text; syntax errors carry line and column.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| {
        CliError::validation(
            format!("parse error at line {}, column {}: {e}", e.line(), e.column()),
            Vec::new(),
        )
    })?;
    file.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display()), Vec::new()))?;
    parse_scenario(&text).map_err(|e| e.context(&path.display().to_string()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_scenario(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario serializes");
    out.push('\n');
    out
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<(), CliError> {
    crate::output::write_atomic(path, render_scenario(s).as_bytes())
}

/// The calibrated coffee-packaging case shipped with the tool.
pub const BUNDLED_SCENARIO: &str = include_str!("../scenarios/coffee_case.scenario");

pub fn bundled_scenario() -> Result<Scenario, CliError> {
    parse_scenario(BUNDLED_SCENARIO)
}
