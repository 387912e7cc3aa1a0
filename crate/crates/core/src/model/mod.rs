//! Domain types for the packaging supply chain and the per-route
//! evaluation equations shared by every solver.
//!
//! Every physical and monetary quantity is an exact decimal.
//! A route's coefficients are per packaging unit and already aggregate the
//! every life-cycle stage from production to end of life.

pub(crate) mod eval;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rust_decimal::Decimal;
use rust_decimal_macros::dec;

use crate::error::{Error, Result};

pub use eval::{evaluate_circularity, evaluate_cost, evaluate_emissions, evaluate_subsidy, lower_result, LowerResult};

/// Identifier of a (product, technology, recovered outputs) pathway.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouteId(String);

impl RouteId {
    pub fn new(id: impl Into<String>) -> Self {
        RouteId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RouteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RouteId {
    fn from(s: &str) -> Self {
        RouteId(s.to_owned())
    }
}

impl From<String> for RouteId {
    fn from(s: String) -> Self {
        RouteId(s)
    }
}

/// One packaging pathway with its per-unit coefficients.
///
/// `unit_cost` is net of recovered-product revenue and may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSpec {
    pub id: RouteId,
    pub product: String,
    pub technology: String,
    pub recovered_outputs: Vec<String>,
    pub unit_cost: Decimal,
    pub unit_emissions: Decimal,
    pub unit_circularity: Decimal,
    pub subsidizable: bool,
    /// Catalog entry kept for completeness; never selected on the case study.
    pub placeholder: bool,
    /// Optional stage-level breakdown (production, transport, ...). Metadata only.
    pub stages: BTreeMap<String, Decimal>,
}

impl RouteSpec {
    pub fn new(
        id: impl Into<RouteId>,
        product: impl Into<String>,
        technology: impl Into<String>,
        unit_cost: Decimal,
        unit_emissions: Decimal,
        unit_circularity: Decimal,
    ) -> Self {
        RouteSpec {
            id: id.into(),
            product: product.into(),
            technology: technology.into(),
            recovered_outputs: Vec::new(),
            unit_cost,
            unit_emissions,
            unit_circularity,
            subsidizable: false,
            placeholder: false,
            stages: BTreeMap::new(),
        }
    }

    pub fn with_outputs<I, S>(mut self, outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.recovered_outputs = outputs.into_iter().map(Into::into).collect();
        self
    }

    pub fn subsidizable(mut self, yes: bool) -> Self {
        self.subsidizable = yes;
        self
    }

    pub fn placeholder(mut self, yes: bool) -> Self {
        self.placeholder = yes;
        self
    }

    fn violations(&self, path: &str, out: &mut Vec<String>) {
        if self.id.as_str().is_empty() {
            out.push(format!("{path}.route_id: must not be empty"));
        }
        if self.unit_emissions < Decimal::ZERO {
            out.push(format!(
                "{path}.unit_emissions: must be >= 0, got {}",
                self.unit_emissions
            ));
        }
        if self.unit_circularity < Decimal::ZERO || self.unit_circularity > dec!(2) {
            out.push(format!(
                "{path}.unit_circularity: must lie in [0, 2], got {}",
                self.unit_circularity
            ));
        }
    }
}

/// Linear adjustments for the glass-washing distance and the glass loss
/// fraction. Affected routes get
/// `coefficient + per_mile * distance + per_loss * loss`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensitivityModifiers {
    pub glass_wash_distance: Decimal,
    pub glass_loss_fraction: Decimal,
    pub distance_cost_coeff: Decimal,
    pub distance_emission_coeff: Decimal,
    pub loss_cost_coeff: Decimal,
    pub loss_emission_coeff: Decimal,
    pub affected_routes: Vec<RouteId>,
}

impl SensitivityModifiers {
    fn violations(&self, out: &mut Vec<String>) {
        let nonneg = [
            ("glass_wash_distance", self.glass_wash_distance),
            ("glass_loss_fraction", self.glass_loss_fraction),
            ("distance_cost_coeff", self.distance_cost_coeff),
            ("distance_emission_coeff", self.distance_emission_coeff),
            ("loss_cost_coeff", self.loss_cost_coeff),
            ("loss_emission_coeff", self.loss_emission_coeff),
        ];
        for (name, v) in nonneg {
            if v < Decimal::ZERO {
                out.push(format!("modifiers.{name}: must be >= 0, got {v}"));
            }
        }
        if self.glass_loss_fraction >= Decimal::ONE {
            out.push(format!(
                "modifiers.glass_loss_fraction: must be < 1, got {}",
                self.glass_loss_fraction
            ));
        }
    }

    fn cost_shift(&self) -> Decimal {
        self.distance_cost_coeff * self.glass_wash_distance + self.loss_cost_coeff * self.glass_loss_fraction
    }

    fn emission_shift(&self) -> Decimal {
        self.distance_emission_coeff * self.glass_wash_distance + self.loss_emission_coeff * self.glass_loss_fraction
    }
}

/// A validated case. Activation costs and capacities are optional and
/// switch the follower to the MILP path.
///
/// `base_routes` hold the coefficients at zero distance and zero loss;
/// `routes` hold the effective coefficients with modifiers applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    demand: u64,
    base_routes: Vec<RouteSpec>,
    routes: Vec<RouteSpec>,
    modifiers: SensitivityModifiers,
    fixed_costs: BTreeMap<String, Decimal>,
    capacities: BTreeMap<RouteId, u64>,
    index: HashMap<RouteId, usize>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.demand == other.demand
            && self.base_routes == other.base_routes
            && self.modifiers == other.modifiers
            && self.fixed_costs == other.fixed_costs
            && self.capacities == other.capacities
    }
}

/// Collects the pieces of a [`Scenario`]; `build` checks every invariant
/// and reports all violations at once.
#[derive(Debug, Clone, Default)]
pub struct ScenarioBuilder {
    demand: u64,
    routes: Vec<RouteSpec>,
    modifiers: SensitivityModifiers,
    fixed_costs: BTreeMap<String, Decimal>,
    capacities: BTreeMap<RouteId, u64>,
}

impl ScenarioBuilder {
    pub fn route(mut self, route: RouteSpec) -> Self {
        self.routes.push(route);
        self
    }

    pub fn routes(mut self, routes: impl IntoIterator<Item = RouteSpec>) -> Self {
        self.routes.extend(routes);
        self
    }

    pub fn modifiers(mut self, modifiers: SensitivityModifiers) -> Self {
        self.modifiers = modifiers;
        self
    }

    pub fn fixed_cost(mut self, technology: impl Into<String>, cost: Decimal) -> Self {
        self.fixed_costs.insert(technology.into(), cost);
        self
    }

    pub fn capacity(mut self, route: impl Into<RouteId>, limit: u64) -> Self {
        self.capacities.insert(route.into(), limit);
        self
    }

    /// Demand zero is accepted here so that degenerate evaluation cases can
    /// be expressed; scenario files reject it.
    pub fn build(self) -> Result<Scenario> {
        let mut v = Vec::new();
        if self.routes.is_empty() {
            v.push("routes: at least one route is required".to_owned());
        }
        let mut index = HashMap::new();
        for (i, r) in self.routes.iter().enumerate() {
            r.violations(&format!("routes[{i}]"), &mut v);
            if index.insert(r.id.clone(), i).is_some() {
                v.push(format!("routes[{i}].route_id: duplicate id '{}'", r.id));
            }
        }
        self.modifiers.violations(&mut v);
        for id in &self.modifiers.affected_routes {
            if !index.contains_key(id) {
                v.push(format!("modifiers.affected_route_ids: unknown route '{id}'"));
            }
        }
        for (tech, cost) in &self.fixed_costs {
            if *cost < Decimal::ZERO {
                v.push(format!("technology_fixed_costs.{tech}: must be >= 0, got {cost}"));
            }
            if !self.routes.iter().any(|r| &r.technology == tech) {
                v.push(format!("technology_fixed_costs.{tech}: no route uses this technology"));
            }
        }
        for id in self.capacities.keys() {
            if !index.contains_key(id) {
                v.push(format!("capacity_limits.{id}: unknown route"));
            }
        }
        if !self.capacities.is_empty() {
            let total: u128 = self
                .routes
                .iter()
                .map(|r| self.capacities.get(&r.id).map_or(self.demand as u128, |&c| c as u128))
                .sum();
            if total < self.demand as u128 {
                v.push(format!(
                    "capacity_limits: total capacity {total} is below demand {}",
                    self.demand
                ));
            }
        }
        if !v.is_empty() {
            return Err(Error::InvalidScenario(v));
        }
        let routes = effective_routes(&self.routes, &self.modifiers);
        Ok(Scenario {
            demand: self.demand,
            base_routes: self.routes,
            routes,
            modifiers: self.modifiers,
            fixed_costs: self.fixed_costs,
            capacities: self.capacities,
            index,
        })
    }
}

fn effective_routes(base: &[RouteSpec], m: &SensitivityModifiers) -> Vec<RouteSpec> {
    let dc = m.cost_shift();
    let de = m.emission_shift();
    base.iter()
        .map(|r| {
            let mut r = r.clone();
            if m.affected_routes.contains(&r.id) {
                r.unit_cost += dc;
                r.unit_emissions += de;
            }
            r
        })
        .collect()
}

impl Scenario {
    pub fn builder(demand: u64) -> ScenarioBuilder {
        ScenarioBuilder {
            demand,
            ..ScenarioBuilder::default()
        }
    }

    pub fn demand(&self) -> u64 {
        self.demand
    }

    /// Routes with modifiers applied. Every evaluation uses these.
    pub fn routes(&self) -> &[RouteSpec] {
        &self.routes
    }

    pub fn base_routes(&self) -> &[RouteSpec] {
        &self.base_routes
    }

    pub fn route(&self, idx: usize) -> &RouteSpec {
        &self.routes[idx]
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn index_of(&self, id: &RouteId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn route_by_id(&self, id: &RouteId) -> Option<&RouteSpec> {
        self.index_of(id).map(|i| &self.routes[i])
    }

    pub fn require(&self, id: &RouteId) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::InvalidAllocation(format!("unknown route '{id}'")))
    }

    pub fn modifiers(&self) -> &SensitivityModifiers {
        &self.modifiers
    }

    pub fn fixed_costs(&self) -> &BTreeMap<String, Decimal> {
        &self.fixed_costs
    }

    pub fn capacities(&self) -> &BTreeMap<RouteId, u64> {
        &self.capacities
    }

    /// Upper bound on the units route `idx` may carry.
    pub fn capacity(&self, idx: usize) -> u64 {
        self.capacities
            .get(&self.routes[idx].id)
            .map_or(self.demand, |&c| c.min(self.demand))
    }

    /// True when the follower's problem is a plain per-unit-linear choice:
    /// no positive activation costs and no capacity below demand.
    pub fn is_pure_linear(&self) -> bool {
        self.fixed_costs.values().all(|c| c.is_zero()) && self.capacities.values().all(|&c| c >= self.demand)
    }

    /// Same routes and modifiers with a different demand.
    pub fn with_demand(&self, demand: u64) -> Result<Scenario> {
        self.to_builder().and_demand(demand).build()
    }

    /// Returns a copy whose modifier distance and loss are replaced.
    /// Calling it with the current values reproduces `self`.
    pub fn apply_modifiers(&self, distance: Decimal, loss: Decimal) -> Result<Scenario> {
        if distance < Decimal::ZERO || loss < Decimal::ZERO || loss >= Decimal::ONE {
            return Err(Error::InvalidScenario(vec![format!(
                "modifiers: distance must be >= 0 and loss in [0, 1), got {distance} / {loss}"
            )]));
        }
        let mut m = self.modifiers.clone();
        m.glass_wash_distance = distance;
        m.glass_loss_fraction = loss;
        let mut s = self.clone();
        s.routes = effective_routes(&s.base_routes, &m);
        s.modifiers = m;
        Ok(s)
    }

    pub fn to_builder(&self) -> ScenarioBuilder {
        ScenarioBuilder {
            demand: self.demand,
            routes: self.base_routes.clone(),
            modifiers: self.modifiers.clone(),
            fixed_costs: self.fixed_costs.clone(),
            capacities: self.capacities.clone(),
        }
    }
}

impl ScenarioBuilder {
    fn and_demand(mut self, demand: u64) -> Self {
        self.demand = demand;
        self
    }
}

/// The leader's decision: one carbon-tax rate ($/kg-CO2e) and per-route
/// subsidy rates ($/unit).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyVector {
    pub tax_rate: Decimal,
    pub subsidies: BTreeMap<RouteId, Decimal>,
}

impl PolicyVector {
    pub fn zero() -> Self {
        PolicyVector::default()
    }

    pub fn tax(tax_rate: Decimal) -> Self {
        PolicyVector {
            tax_rate,
            subsidies: BTreeMap::new(),
        }
    }

    pub fn with_subsidy(mut self, route: impl Into<RouteId>, rate: Decimal) -> Self {
        self.subsidies.insert(route.into(), rate);
        self
    }

    pub fn subsidy(&self, route: &RouteId) -> Decimal {
        self.subsidies.get(route).copied().unwrap_or(Decimal::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.tax_rate.is_zero() && self.subsidies.values().all(|s| s.is_zero())
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.tax_rate < Decimal::ZERO {
            return Err(Error::InvalidPolicy(format!(
                "tax rate must be >= 0, got {}",
                self.tax_rate
            )));
        }
        for (id, rate) in &self.subsidies {
            if *rate < Decimal::ZERO {
                return Err(Error::InvalidPolicy(format!(
                    "subsidy on '{id}' must be >= 0, got {rate}"
                )));
            }
            let route = scenario
                .route_by_id(id)
                .ok_or_else(|| Error::InvalidPolicy(format!("subsidy on unknown route '{id}'")))?;
            if !rate.is_zero() && !route.subsidizable {
                return Err(Error::InvalidPolicy(format!("route '{id}' is not subsidizable")));
            }
        }
        Ok(())
    }

    /// Subsidy rates laid out in scenario route order.
    pub fn dense_subsidies(&self, scenario: &Scenario) -> Vec<Decimal> {
        scenario.routes().iter().map(|r| self.subsidy(&r.id)).collect()
    }
}

/// The leader's goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpperObjective {
    MinGhg,
    MaxCircularity,
    /// Diagnostic: no policy, report the follower's own optimum.
    MostProfitable,
}

impl UpperObjective {
    /// Per-unit contribution in minimization form (lower is better for
    /// the leader).
    pub fn unit_value(self, route: &RouteSpec) -> Decimal {
        match self {
            UpperObjective::MinGhg => route.unit_emissions,
            UpperObjective::MaxCircularity => -route.unit_circularity,
            UpperObjective::MostProfitable => Decimal::ZERO,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UpperObjective::MinGhg => "min-ghg",
            UpperObjective::MaxCircularity => "max-circularity",
            UpperObjective::MostProfitable => "most-profitable",
        }
    }
}

impl std::str::FromStr for UpperObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-ghg" => Ok(UpperObjective::MinGhg),
            "max-circularity" => Ok(UpperObjective::MaxCircularity),
            "most-profitable" => Ok(UpperObjective::MostProfitable),
            other => Err(Error::Unsupported(format!("unknown objective '{other}'"))),
        }
    }
}

/// Units assigned to each route, in scenario route order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation {
    units: Vec<u64>,
}

impl Allocation {
    /// Checks demand satisfaction and capacities against `scenario`.
    pub fn from_units(scenario: &Scenario, units: Vec<u64>) -> Result<Allocation> {
        let a = Allocation { units };
        a.check(scenario)?;
        Ok(a)
    }

    pub fn from_pairs<I, R>(scenario: &Scenario, pairs: I) -> Result<Allocation>
    where
        I: IntoIterator<Item = (R, u64)>,
        R: Into<RouteId>,
    {
        let mut units = vec![0; scenario.len()];
        for (id, n) in pairs {
            let idx = scenario.require(&id.into())?;
            units[idx] += n;
        }
        Allocation::from_units(scenario, units)
    }

    /// All demand on route `idx`. Ignores capacities.
    pub(crate) fn all_on(scenario: &Scenario, idx: usize) -> Allocation {
        let mut units = vec![0; scenario.len()];
        units[idx] = scenario.demand();
        Allocation { units }
    }

    pub(crate) fn from_raw(units: Vec<u64>) -> Allocation {
        Allocation { units }
    }

    pub fn units(&self) -> &[u64] {
        &self.units
    }

    pub fn units_of(&self, scenario: &Scenario, id: &RouteId) -> u64 {
        scenario.index_of(id).map_or(0, |i| self.units[i])
    }

    pub fn total(&self) -> u64 {
        self.units.iter().sum()
    }

    /// Route carrying the most units; earliest route wins ties.
    pub fn dominant_route(&self) -> Option<usize> {
        let max = *self.units.iter().max()?;
        if max == 0 {
            return None;
        }
        self.units.iter().position(|&u| u == max)
    }

    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        if self.units.len() != scenario.len() {
            return Err(Error::InvalidAllocation(format!(
                "allocation has {} entries, scenario has {} routes",
                self.units.len(),
                scenario.len()
            )));
        }
        let total = self.total();
        if total != scenario.demand() {
            return Err(Error::InvalidAllocation(format!(
                "allocation covers {total} units, demand is {}",
                scenario.demand()
            )));
        }
        for (i, &u) in self.units.iter().enumerate() {
            if u > scenario.capacity(i) {
                return Err(Error::InvalidAllocation(format!(
                    "route '{}' carries {u} units over its capacity {}",
                    scenario.route(i).id,
                    scenario.capacity(i)
                )));
            }
        }
        Ok(())
    }

    /// Non-zero entries keyed by route id.
    pub fn summary(&self, scenario: &Scenario) -> BTreeMap<RouteId, u64> {
        scenario
            .routes()
            .iter()
            .zip(&self.units)
            .filter(|(_, &u)| u > 0)
            .map(|(r, &u)| (r.id.clone(), u))
            .collect()
    }
}
