//! District data model and ingestion.
//!
//! A scenario is the immutable description all other stages consume:
//! buildings with demand series, the candidate pipe-route graph, the
//! technology catalog, tariff/regulatory parameters and the time horizon.
//! Scenarios load from a single JSON document; time series are either inline
//! arrays or relative paths to CSV files. Units are fixed project-wide:
//! power kW, energy kWh, cost EUR, emissions kgCO2e, temperature degC,
//! mass flow t/h.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

/// Technology kinds of the catalog (district multi-energy technology set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TechKind {
    /// Photovoltaic plant
    Pv,
    /// Solarthermal plant
    Sol,
    /// Brine water heat pump
    Bwp,
    /// Lead-acid battery
    Lac,
    /// Gas condensing boiler
    Gcb,
    /// Air water heat pump
    Awp,
    /// Lithium-ion battery
    Lio,
    /// Heating rod
    Elh,
    /// Pellet heating
    Peh,
    /// Combined heat and power
    Chp,
    /// Woodchip heating
    Wch,
    /// Fuel cell
    Fcl,
    /// Buffer tank
    Ths,
    /// Electrolyzer
    Elz,
    /// Methanizer
    Mzr,
    /// Reformer
    Rfr,
    /// Hydrogen storage
    H2s,
    /// Heat exchanger (building-to-network interface)
    He,
    /// Electric grid connection
    Eg,
}

impl TechKind {
    pub const ALL: [TechKind; 19] = [
        TechKind::Pv,
        TechKind::Sol,
        TechKind::Bwp,
        TechKind::Lac,
        TechKind::Gcb,
        TechKind::Awp,
        TechKind::Lio,
        TechKind::Elh,
        TechKind::Peh,
        TechKind::Chp,
        TechKind::Wch,
        TechKind::Fcl,
        TechKind::Ths,
        TechKind::Elz,
        TechKind::Mzr,
        TechKind::Rfr,
        TechKind::H2s,
        TechKind::He,
        TechKind::Eg,
    ];

    pub fn parse(s: &str) -> Option<TechKind> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TechKind::Pv => "pv",
            TechKind::Sol => "sol",
            TechKind::Bwp => "bwp",
            TechKind::Lac => "lac",
            TechKind::Gcb => "gcb",
            TechKind::Awp => "awp",
            TechKind::Lio => "lio",
            TechKind::Elh => "elh",
            TechKind::Peh => "peh",
            TechKind::Chp => "chp",
            TechKind::Wch => "wch",
            TechKind::Fcl => "fcl",
            TechKind::Ths => "ths",
            TechKind::Elz => "elz",
            TechKind::Mzr => "mzr",
            TechKind::Rfr => "rfr",
            TechKind::H2s => "h2s",
            TechKind::He => "he",
            TechKind::Eg => "eg",
        }
    }

    /// Mutually exclusive heating technologies: at most one per building.
    /// The heat exchanger is deliberately not in this set: it is the
    /// network interface of producers and consumers alike, and blocking it
    /// next to a generator would make heat injection impossible.
    pub fn is_heating(self) -> bool {
        matches!(
            self,
            TechKind::Elh
                | TechKind::Gcb
                | TechKind::Chp
                | TechKind::Elz
                | TechKind::Fcl
                | TechKind::Bwp
                | TechKind::Awp
                | TechKind::Peh
                | TechKind::Wch
        )
    }

    /// Battery storage kinds: at most one per building.
    pub fn is_battery(self) -> bool {
        matches!(self, TechKind::Lac | TechKind::Lio)
    }

    /// Roof-mounted solar kinds competing for roof area.
    pub fn is_solar(self) -> bool {
        matches!(self, TechKind::Pv | TechKind::Sol)
    }
}

impl fmt::Display for TechKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Carrier {
    Electricity,
    Heat,
    Hydrogen,
    Gas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHorizon {
    pub steps: usize,
    pub step_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionOutput {
    pub carrier: Carrier,
    /// Output per unit of primary output.
    pub ratio: f64,
}

/// Input/output behavior of a conversion technology. The dispatch variable
/// of an option is its primary output flow in kW; `input` names the carrier
/// drawn from the building node (None for implicit fuels priced in opex_var
/// and for ambient sources like solar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    #[serde(default)]
    pub input: Option<Carrier>,
    /// Primary output per input unit. Heat pumps put their COP here, which
    /// exceeds 1.
    pub efficiency: f64,
    /// Primary output carrier.
    pub output: Carrier,
    /// Secondary outputs as (carrier, ratio to primary output), e.g. CHP
    /// heat per unit of electricity.
    #[serde(default)]
    pub secondary: Vec<ConversionOutput>,
    /// Per-step availability factor in [0, 1] scaling capacity (solar
    /// profiles). Defaults to 1 at every step.
    #[serde(default)]
    pub availability: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    /// Node the storage charges from and discharges to; defaults by kind.
    #[serde(default)]
    pub carrier: Option<Carrier>,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    /// Standing loss as a fraction of state of charge per step, in [0, 1).
    pub loss_per_step: f64,
    /// Max charge power as kW per kWh of sized capacity.
    pub c_rate_charge: f64,
    /// Max discharge power as kW per kWh of sized capacity.
    pub c_rate_discharge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyOption {
    pub id: String,
    pub kind: TechKind,
    #[serde(default)]
    pub size_class: Option<String>,
    /// Minimum nominal power/capacity if installed (kW, or kWh for storage).
    pub p_min: f64,
    pub p_max: f64,
    /// Fixed installation and commissioning cost, EUR.
    pub capex_fix: f64,
    /// Size-proportional cost, EUR/kW (EUR/kWh for storage).
    pub capex_var: f64,
    /// Variable operating cost per kWh of primary output (includes implicit
    /// fuel for options without an input carrier).
    pub opex_var: f64,
    pub lifetime_years: f64,
    /// Present-value factor annualizing investment costs.
    pub pvf: f64,
    /// Embodied emissions of the install decision, kgCO2e.
    pub gwp_fix: f64,
    /// Embodied emissions per sized kW, kgCO2e/kW.
    pub gwp_var: f64,
    /// Operating emissions per kWh of primary output, kgCO2e/kWh.
    pub gwp_op: f64,
    #[serde(default)]
    pub conversion: Option<Conversion>,
    #[serde(default)]
    pub storage: Option<StorageParams>,
}

impl TechnologyOption {
    pub fn storage_carrier(&self) -> Option<Carrier> {
        let s = self.storage.as_ref()?;
        Some(s.carrier.unwrap_or(match self.kind {
            TechKind::Ths => Carrier::Heat,
            TechKind::H2s => Carrier::Hydrogen,
            _ => Carrier::Electricity,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyCatalog {
    pub options: Vec<TechnologyOption>,
}

impl TechnologyCatalog {
    pub fn option(&self, id: &str) -> Option<&TechnologyOption> {
        self.options.iter().find(|o| o.id == id)
    }
}

/// One insulation-reinforcement measure and the demand it leaves behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrOption {
    pub id: String,
    pub capex_fix: f64,
    pub gwp_fix: f64,
    pub pvf: f64,
    /// Thermal demand series under this measure, kW per step.
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistingAsset {
    /// Catalog option id.
    pub option: String,
    /// Installed capacity, treated as fixed with no investment cost.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    /// Route-graph node this building sits on.
    pub node: String,
    /// Meters.
    pub position: [f64; 2],
    pub roof_area: f64,
    /// Max flow temperature required by the building's heating system, degC.
    pub max_flow_temperature: f64,
    /// kW per step.
    pub electric_demand: Vec<f64>,
    pub thermal_demand_by_ir: Vec<IrOption>,
    #[serde(default)]
    pub existing_assets: Vec<ExistingAsset>,
}

impl Building {
    /// The do-nothing insulation option (zero capex).
    pub fn no_reinforcement(&self) -> Option<&IrOption> {
        self.thermal_demand_by_ir
            .iter()
            .find(|ir| ir.capex_fix == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteNode {
    pub id: String,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeCandidate {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Trench length in meters; at least the Euclidean node distance.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RouteGraph {
    pub nodes: Vec<RouteNode>,
    pub edges: Vec<PipeCandidate>,
}

impl RouteGraph {
    pub fn node(&self, id: &str) -> Option<&RouteNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Subsidy {
    /// EUR knocked off the fixed installation cost.
    #[serde(default)]
    pub lump_sum: f64,
    /// EUR/kW knocked off the size-proportional cost.
    #[serde(default)]
    pub proportional: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatoryParams {
    /// EUR/kWh per step.
    pub grid_purchase_price: Vec<f64>,
    /// EUR/kW on the annual peak grid purchase.
    #[serde(default)]
    pub demand_charge: f64,
    /// EUR/kWh remuneration for direct marketing, per source kind.
    #[serde(default)]
    pub direct_marketing_remuneration: BTreeMap<TechKind, f64>,
    /// Spatial limit on the diameter of an energy-sharing group, meters.
    pub es_diameter_limit: f64,
    #[serde(default)]
    pub subsidies: BTreeMap<TechKind, Subsidy>,
    #[serde(default)]
    pub banned_kinds: BTreeSet<TechKind>,
}

impl RegulatoryParams {
    pub fn subsidy(&self, kind: TechKind) -> Subsidy {
        self.subsidies.get(&kind).copied().unwrap_or_default()
    }

    pub fn dm_remuneration(&self, kind: TechKind) -> f64 {
        self.direct_marketing_remuneration
            .get(&kind)
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhnPipeClass {
    /// Nominal width label, DN20..DN200.
    pub dn: String,
    /// t/h.
    pub max_mass_flow: f64,
    /// Heat transfer coefficient, W/(m2 K).
    pub u_value: f64,
    /// Outer pipe surface per meter of trench, m2/m.
    pub outer_area_per_m: f64,
    pub capex_fix_per_m: f64,
    pub capex_var_per_m: f64,
    /// Present-value factor for the 40-year pipe lifetime.
    pub pvf: f64,
}

/// Editable default pipe catalog. Only the 0.5 and 193 t/h endpoints are
/// fixed by the sizing range; intermediate rows are engineering defaults.
pub fn default_pipe_classes() -> Vec<DhnPipeClass> {
    let rows: [(&str, f64, f64, f64, f64, f64); 10] = [
        ("DN20", 0.5, 0.50, 0.28, 320.0, 55.0),
        ("DN25", 1.0, 0.48, 0.30, 330.0, 65.0),
        ("DN32", 2.1, 0.47, 0.33, 345.0, 80.0),
        ("DN40", 3.8, 0.46, 0.36, 360.0, 95.0),
        ("DN50", 7.2, 0.45, 0.40, 380.0, 115.0),
        ("DN65", 14.0, 0.44, 0.45, 405.0, 145.0),
        ("DN80", 24.0, 0.43, 0.50, 430.0, 175.0),
        ("DN100", 47.0, 0.42, 0.58, 465.0, 225.0),
        ("DN150", 120.0, 0.41, 0.75, 540.0, 330.0),
        ("DN200", 193.0, 0.40, 0.92, 620.0, 450.0),
    ];
    rows.iter()
        .map(|&(dn, flow, u, area, fix, var)| DhnPipeClass {
            dn: dn.to_string(),
            max_mass_flow: flow,
            u_value: u,
            outer_area_per_m: area,
            capex_fix_per_m: fix,
            capex_var_per_m: var,
            pvf: 19.79,
        })
        .collect()
}

/// Immutable district description; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub horizon: TimeHorizon,
    /// degC per step.
    pub earth_temperature: Vec<f64>,
    pub buildings: Vec<Building>,
    #[serde(default)]
    pub route_graph: RouteGraph,
    pub catalog: TechnologyCatalog,
    pub tariffs: RegulatoryParams,
    #[serde(default = "default_pipe_classes")]
    pub dhn_pipe_classes: Vec<DhnPipeClass>,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        self.horizon.steps
    }

    pub fn building_index(&self, id: &str) -> Option<usize> {
        self.buildings.iter().position(|b| b.id == id)
    }

    /// Content hash over the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Canonical JSON document with inline series.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    /// Machine-readable field path, e.g. `buildings[2].roof_area`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "scenario valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

/// Checks every data invariant; violations are data, not errors. The report
/// is empty exactly when `load_scenario` would accept the serialized form.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut r = ValidationReport::default();
    let t = s.horizon.steps;

    if s.format_version != FORMAT_VERSION {
        r.push(
            "format_version",
            format!("expected {}, found {}", FORMAT_VERSION, s.format_version),
        );
    }
    if t == 0 {
        r.push("horizon.steps", "must be at least 1");
    }
    if !(s.horizon.step_hours > 0.0) {
        r.push("horizon.step_hours", "must be positive");
    }
    if s.buildings.is_empty() {
        r.push("buildings", "at least one building required");
    }
    check_series(&mut r, "earth_temperature", &s.earth_temperature, t, false);

    let mut building_ids = BTreeSet::new();
    for (i, b) in s.buildings.iter().enumerate() {
        let p = format!("buildings[{i}]");
        if !building_ids.insert(b.id.clone()) {
            r.push(format!("{p}.id"), format!("duplicate building id '{}'", b.id));
        }
        if s.route_graph.node(&b.node).is_none() {
            r.push(
                format!("{p}.node"),
                format!("references unknown route node '{}'", b.node),
            );
        }
        if b.roof_area < 0.0 {
            r.push(format!("{p}.roof_area"), "must be non-negative");
        }
        check_series(
            &mut r,
            format!("{p}.electric_demand"),
            &b.electric_demand,
            t,
            true,
        );
        if b.thermal_demand_by_ir.is_empty() {
            r.push(
                format!("{p}.thermal_demand_by_ir"),
                "at least one insulation option required",
            );
        }
        if b.thermal_demand_by_ir.len() > 16 {
            r.push(
                format!("{p}.thermal_demand_by_ir"),
                "at most 16 insulation options",
            );
        }
        if !b.thermal_demand_by_ir.is_empty() && b.no_reinforcement().is_none() {
            r.push(
                format!("{p}.thermal_demand_by_ir"),
                "the zero-capex 'no reinforcement' option is required",
            );
        }
        let mut ir_ids = BTreeSet::new();
        for (k, ir) in b.thermal_demand_by_ir.iter().enumerate() {
            let q = format!("{p}.thermal_demand_by_ir[{k}]");
            if !ir_ids.insert(ir.id.clone()) {
                r.push(format!("{q}.id"), "duplicate insulation option id");
            }
            if !(ir.pvf > 0.0) {
                r.push(format!("{q}.pvf"), "must be positive");
            }
            check_series(&mut r, format!("{q}.series"), &ir.series, t, true);
        }
        for (k, a) in b.existing_assets.iter().enumerate() {
            if s.catalog.option(&a.option).is_none() {
                r.push(
                    format!("{p}.existing_assets[{k}].option"),
                    format!("references unknown catalog option '{}'", a.option),
                );
            }
            if a.capacity < 0.0 {
                r.push(
                    format!("{p}.existing_assets[{k}].capacity"),
                    "must be non-negative",
                );
            }
        }
    }

    let mut node_ids = BTreeSet::new();
    for (i, n) in s.route_graph.nodes.iter().enumerate() {
        if !node_ids.insert(n.id.clone()) {
            r.push(format!("route_graph.nodes[{i}].id"), "duplicate node id");
        }
    }
    for (i, e) in s.route_graph.edges.iter().enumerate() {
        let p = format!("route_graph.edges[{i}]");
        if e.from == e.to {
            r.push(p.clone(), "self-loop");
        }
        let (a, b) = (s.route_graph.node(&e.from), s.route_graph.node(&e.to));
        if a.is_none() {
            r.push(format!("{p}.from"), format!("unknown node '{}'", e.from));
        }
        if b.is_none() {
            r.push(format!("{p}.to"), format!("unknown node '{}'", e.to));
        }
        if !(e.length > 0.0) {
            r.push(format!("{p}.length"), "must be positive");
        } else if let (Some(a), Some(b)) = (a, b) {
            let dx = a.position[0] - b.position[0];
            let dy = a.position[1] - b.position[1];
            let euclid = (dx * dx + dy * dy).sqrt();
            if e.length < euclid - 1e-6 {
                r.push(
                    format!("{p}.length"),
                    format!(
                        "{} m is shorter than the {euclid:.3} m node distance",
                        e.length
                    ),
                );
            }
        }
    }

    let mut option_ids = BTreeSet::new();
    for (i, o) in s.catalog.options.iter().enumerate() {
        let p = format!("catalog.options[{i}]");
        if !option_ids.insert(o.id.clone()) {
            r.push(format!("{p}.id"), "duplicate option id");
        }
        if o.p_min > o.p_max {
            r.push(format!("{p}.p_min"), "p_min must not exceed p_max");
        }
        if !(o.pvf > 0.0) {
            r.push(format!("{p}.pvf"), "must be positive");
        }
        if let Some(c) = &o.conversion {
            if !(c.efficiency > 0.0 && c.efficiency <= 10.0) {
                r.push(format!("{p}.conversion.efficiency"), "must be in (0, 10]");
            }
            for (k, sec) in c.secondary.iter().enumerate() {
                if !(sec.ratio > 0.0 && sec.ratio <= 10.0) {
                    r.push(
                        format!("{p}.conversion.secondary[{k}].ratio"),
                        "must be in (0, 10]",
                    );
                }
            }
            if let Some(av) = &c.availability {
                check_series(&mut r, format!("{p}.conversion.availability"), av, t, true);
            }
        }
        if let Some(st) = &o.storage {
            if !(0.0..1.0).contains(&st.loss_per_step) {
                r.push(format!("{p}.storage.loss_per_step"), "must be in [0, 1)");
            }
            for (name, eta) in [
                ("eta_charge", st.eta_charge),
                ("eta_discharge", st.eta_discharge),
            ] {
                if !(eta > 0.0 && eta <= 1.0) {
                    r.push(format!("{p}.storage.{name}"), "must be in (0, 1]");
                }
            }
            if !(st.c_rate_charge > 0.0) || !(st.c_rate_discharge > 0.0) {
                r.push(format!("{p}.storage"), "c-rates must be positive");
            }
        }
        if o.conversion.is_none()
            && o.storage.is_none()
            && !matches!(o.kind, TechKind::He | TechKind::Eg)
        {
            r.push(
                p,
                "needs a conversion or storage model (only he/eg are pure interfaces)",
            );
        }
    }

    check_series(
        &mut r,
        "tariffs.grid_purchase_price",
        &s.tariffs.grid_purchase_price,
        t,
        true,
    );
    if s.tariffs.demand_charge < 0.0 {
        r.push("tariffs.demand_charge", "must be non-negative");
    }
    for (k, v) in &s.tariffs.direct_marketing_remuneration {
        if *v < 0.0 {
            r.push(
                format!("tariffs.direct_marketing_remuneration.{k}"),
                "must be non-negative",
            );
        }
    }
    if !(s.tariffs.es_diameter_limit > 0.0) {
        r.push("tariffs.es_diameter_limit", "must be positive");
    }

    if s.dhn_pipe_classes.is_empty() {
        r.push("dhn_pipe_classes", "at least one pipe class required");
    } else {
        for i in 1..s.dhn_pipe_classes.len() {
            if s.dhn_pipe_classes[i].max_mass_flow <= s.dhn_pipe_classes[i - 1].max_mass_flow {
                r.push(
                    format!("dhn_pipe_classes[{i}].max_mass_flow"),
                    "classes must be ordered by strictly increasing max mass flow",
                );
            }
        }
        let first = &s.dhn_pipe_classes[0];
        let last = s.dhn_pipe_classes.last().unwrap();
        if (first.max_mass_flow - 0.5).abs() > 1e-9 {
            r.push(
                "dhn_pipe_classes[0].max_mass_flow",
                "smallest class must carry 0.5 t/h",
            );
        }
        if (last.max_mass_flow - 193.0).abs() > 1e-9 {
            r.push(
                format!(
                    "dhn_pipe_classes[{}].max_mass_flow",
                    s.dhn_pipe_classes.len() - 1
                ),
                "largest class must carry 193 t/h",
            );
        }
        for (i, c) in s.dhn_pipe_classes.iter().enumerate() {
            if !(c.pvf > 0.0) {
                r.push(format!("dhn_pipe_classes[{i}].pvf"), "must be positive");
            }
            if !(c.u_value > 0.0) || !(c.outer_area_per_m > 0.0) {
                r.push(
                    format!("dhn_pipe_classes[{i}]"),
                    "u_value and outer_area_per_m must be positive",
                );
            }
        }
    }

    r
}

fn check_series(
    r: &mut ValidationReport,
    path: impl Into<String>,
    series: &[f64],
    t: usize,
    non_negative: bool,
) {
    let path = path.into();
    if series.len() != t {
        r.push(
            path,
            format!("has {} entries, horizon needs {}", series.len(), t),
        );
        return;
    }
    if non_negative {
        if let Some(k) = series.iter().position(|v| *v < 0.0) {
            r.push(format!("{path}[{k}]"), "must be non-negative");
        }
    }
    if let Some(k) = series.iter().position(|v| !v.is_finite()) {
        r.push(format!("{path}[{k}]"), "must be finite");
    }
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
    #[error("validation failed:\n{0}")]
    Validation(ValidationReport),
}

impl From<csv::Error> for ScenarioError {
    fn from(e: csv::Error) -> Self {
        ScenarioError::Parse(e.to_string())
    }
}

/// Raw series reference inside a document: inline values or a CSV column.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SeriesSpec {
    Inline(Vec<f64>),
    Csv { csv: String, column: String },
}

fn one() -> f64 {
    1.0
}

fn twenty() -> f64 {
    20.0
}

#[derive(Debug, Deserialize)]
struct IrOptionDoc {
    id: String,
    #[serde(default)]
    capex_fix: f64,
    #[serde(default)]
    gwp_fix: f64,
    #[serde(default = "one")]
    pvf: f64,
    series: SeriesSpec,
}

#[derive(Debug, Deserialize)]
struct BuildingDoc {
    id: String,
    node: String,
    position: [f64; 2],
    #[serde(default)]
    roof_area: f64,
    max_flow_temperature: f64,
    electric_demand: SeriesSpec,
    thermal_demand_by_ir: Vec<IrOptionDoc>,
    #[serde(default)]
    existing_assets: Vec<ExistingAsset>,
}

#[derive(Debug, Deserialize)]
struct ConversionDoc {
    #[serde(default)]
    input: Option<Carrier>,
    efficiency: f64,
    output: Carrier,
    #[serde(default)]
    secondary: Vec<ConversionOutput>,
    #[serde(default)]
    availability: Option<SeriesSpec>,
}

#[derive(Debug, Deserialize)]
struct TechnologyOptionDoc {
    id: String,
    kind: String,
    #[serde(default)]
    size_class: Option<String>,
    p_min: f64,
    p_max: f64,
    #[serde(default)]
    capex_fix: f64,
    #[serde(default)]
    capex_var: f64,
    #[serde(default)]
    opex_var: f64,
    #[serde(default = "twenty")]
    lifetime_years: f64,
    #[serde(default = "one")]
    pvf: f64,
    #[serde(default)]
    gwp_fix: f64,
    #[serde(default)]
    gwp_var: f64,
    #[serde(default)]
    gwp_op: f64,
    #[serde(default)]
    conversion: Option<ConversionDoc>,
    #[serde(default)]
    storage: Option<StorageParams>,
}

#[derive(Debug, Deserialize)]
struct TariffsDoc {
    grid_purchase_price: SeriesSpec,
    #[serde(default)]
    demand_charge: f64,
    #[serde(default)]
    direct_marketing_remuneration: BTreeMap<String, f64>,
    es_diameter_limit: f64,
    #[serde(default)]
    subsidies: BTreeMap<String, Subsidy>,
    #[serde(default)]
    banned_kinds: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct CatalogDoc {
    options: Vec<TechnologyOptionDoc>,
}

#[derive(Debug, Deserialize)]
struct ScenarioDoc {
    format_version: u32,
    horizon: TimeHorizon,
    earth_temperature: SeriesSpec,
    buildings: Vec<BuildingDoc>,
    #[serde(default)]
    route_graph: RouteGraph,
    catalog: CatalogDoc,
    tariffs: TariffsDoc,
    #[serde(default)]
    dhn_pipe_classes: Option<Vec<DhnPipeClass>>,
}

/// Loads, resolves and validates a scenario document.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let doc: ScenarioDoc =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(ScenarioError::Parse(format!(
            "unsupported format_version {} (expected {})",
            doc.format_version, FORMAT_VERSION
        )));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut report = ValidationReport::default();
    let scenario = resolve(doc, base, &mut report)?;
    let mut full = validate_scenario(&scenario);
    report.violations.append(&mut full.violations);
    if report.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(report))
    }
}

fn resolve(
    doc: ScenarioDoc,
    base: &Path,
    report: &mut ValidationReport,
) -> Result<Scenario, ScenarioError> {
    let mut parse_kind = |path: String, raw: &str| -> TechKind {
        TechKind::parse(raw).unwrap_or_else(|| {
            report.push(path, format!("unknown technology kind '{raw}'"));
            TechKind::Eg
        })
    };
    let mut catalog_options = Vec::new();
    for (i, o) in doc.catalog.options.into_iter().enumerate() {
        let kind = parse_kind(format!("catalog.options[{i}].kind"), &o.kind);
        let conversion = match o.conversion {
            Some(c) => Some(Conversion {
                input: c.input,
                efficiency: c.efficiency,
                output: c.output,
                secondary: c.secondary,
                availability: match c.availability {
                    Some(spec) => Some(read_series(&spec, base)?),
                    None => None,
                },
            }),
            None => None,
        };
        catalog_options.push(TechnologyOption {
            id: o.id,
            kind,
            size_class: o.size_class,
            p_min: o.p_min,
            p_max: o.p_max,
            capex_fix: o.capex_fix,
            capex_var: o.capex_var,
            opex_var: o.opex_var,
            lifetime_years: o.lifetime_years,
            pvf: o.pvf,
            gwp_fix: o.gwp_fix,
            gwp_var: o.gwp_var,
            gwp_op: o.gwp_op,
            conversion,
            storage: o.storage,
        });
    }
    let mut buildings = Vec::new();
    for b in doc.buildings {
        let mut irs = Vec::new();
        for ir in b.thermal_demand_by_ir {
            irs.push(IrOption {
                id: ir.id,
                capex_fix: ir.capex_fix,
                gwp_fix: ir.gwp_fix,
                pvf: ir.pvf,
                series: read_series(&ir.series, base)?,
            });
        }
        buildings.push(Building {
            id: b.id,
            node: b.node,
            position: b.position,
            roof_area: b.roof_area,
            max_flow_temperature: b.max_flow_temperature,
            electric_demand: read_series(&b.electric_demand, base)?,
            thermal_demand_by_ir: irs,
            existing_assets: b.existing_assets,
        });
    }
    let tariffs = RegulatoryParams {
        grid_purchase_price: read_series(&doc.tariffs.grid_purchase_price, base)?,
        demand_charge: doc.tariffs.demand_charge,
        direct_marketing_remuneration: doc
            .tariffs
            .direct_marketing_remuneration
            .into_iter()
            .map(|(k, v)| {
                (
                    parse_kind(format!("tariffs.direct_marketing_remuneration.{k}"), &k),
                    v,
                )
            })
            .collect(),
        es_diameter_limit: doc.tariffs.es_diameter_limit,
        subsidies: doc
            .tariffs
            .subsidies
            .into_iter()
            .map(|(k, v)| (parse_kind(format!("tariffs.subsidies.{k}"), &k), v))
            .collect(),
        banned_kinds: doc
            .tariffs
            .banned_kinds
            .into_iter()
            .map(|k| parse_kind(format!("tariffs.banned_kinds.{k}"), &k))
            .collect(),
    };
    Ok(Scenario {
        format_version: doc.format_version,
        horizon: doc.horizon,
        earth_temperature: read_series(&doc.earth_temperature, base)?,
        buildings,
        route_graph: doc.route_graph,
        catalog: TechnologyCatalog {
            options: catalog_options,
        },
        tariffs,
        dhn_pipe_classes: doc.dhn_pipe_classes.unwrap_or_else(default_pipe_classes),
    })
}

fn read_series(spec: &SeriesSpec, base: &Path) -> Result<Vec<f64>, ScenarioError> {
    match spec {
        SeriesSpec::Inline(v) => Ok(v.clone()),
        SeriesSpec::Csv { csv, column } => {
            let path = base.join(csv);
            let mut reader = csv::Reader::from_path(&path)?;
            let headers = reader
                .headers()
                .map_err(|e| ScenarioError::Parse(e.to_string()))?;
            let idx = headers.iter().position(|h| h == column).ok_or_else(|| {
                ScenarioError::Parse(format!(
                    "column '{}' not found in {}",
                    column,
                    path.display()
                ))
            })?;
            let mut out = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| ScenarioError::Parse(e.to_string()))?;
                let cell = record.get(idx).ok_or_else(|| {
                    ScenarioError::Parse(format!("short row in {}", path.display()))
                })?;
                let value: f64 = cell.trim().parse().map_err(|_| {
                    ScenarioError::Parse(format!(
                        "bad number '{}' in {} column '{}'",
                        cell,
                        path.display(),
                        column
                    ))
                })?;
                out.push(value);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn minimal_scenario() -> Scenario {
        Scenario {
            format_version: FORMAT_VERSION,
            horizon: TimeHorizon {
                steps: 2,
                step_hours: 1.0,
            },
            earth_temperature: vec![10.0, 10.0],
            buildings: vec![Building {
                id: "b1".into(),
                node: "n1".into(),
                position: [0.0, 0.0],
                roof_area: 20.0,
                max_flow_temperature: 70.0,
                electric_demand: vec![1.0, 2.0],
                thermal_demand_by_ir: vec![IrOption {
                    id: "none".into(),
                    capex_fix: 0.0,
                    gwp_fix: 0.0,
                    pvf: 1.0,
                    series: vec![3.0, 1.0],
                }],
                existing_assets: vec![],
            }],
            route_graph: RouteGraph {
                nodes: vec![RouteNode {
                    id: "n1".into(),
                    position: [0.0, 0.0],
                }],
                edges: vec![],
            },
            catalog: TechnologyCatalog {
                options: vec![TechnologyOption {
                    id: "gcb_s".into(),
                    kind: TechKind::Gcb,
                    size_class: None,
                    p_min: 0.0,
                    p_max: 20.0,
                    capex_fix: 1000.0,
                    capex_var: 100.0,
                    opex_var: 0.08,
                    lifetime_years: 20.0,
                    pvf: 10.0,
                    gwp_fix: 300.0,
                    gwp_var: 10.0,
                    gwp_op: 0.2,
                    conversion: Some(Conversion {
                        input: None,
                        efficiency: 0.95,
                        output: Carrier::Heat,
                        secondary: vec![],
                        availability: None,
                    }),
                    storage: None,
                }],
            },
            tariffs: RegulatoryParams {
                grid_purchase_price: vec![0.30, 0.30],
                demand_charge: 0.0,
                direct_marketing_remuneration: BTreeMap::new(),
                es_diameter_limit: 500.0,
                subsidies: BTreeMap::new(),
                banned_kinds: BTreeSet::new(),
            },
            dhn_pipe_classes: default_pipe_classes(),
        }
    }

    #[test]
    fn minimal_scenario_validates_clean() {
        let s = minimal_scenario();
        let report = validate_scenario(&s);
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn load_round_trips_serialized_form() {
        let s = minimal_scenario();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        std::fs::write(&path, s.to_json()).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(s, loaded);
        assert_eq!(s.digest(), loaded.digest());
    }

    #[test]
    fn short_series_names_the_field() {
        let mut s = minimal_scenario();
        s.buildings[0].electric_demand.pop();
        let report = validate_scenario(&s);
        assert!(!report.is_empty());
        assert!(report
            .violations
            .iter()
            .any(|v| v.path == "buildings[0].electric_demand"));
    }

    #[test]
    fn negative_roof_and_zero_length_edge_flagged() {
        let mut s = minimal_scenario();
        s.buildings[0].roof_area = -1.0;
        s.route_graph.nodes.push(RouteNode {
            id: "n2".into(),
            position: [10.0, 0.0],
        });
        s.route_graph.edges.push(PipeCandidate {
            id: "p1".into(),
            from: "n1".into(),
            to: "n2".into(),
            length: 0.0,
        });
        let report = validate_scenario(&s);
        let paths: Vec<&str> = report.violations.iter().map(|v| v.path.as_str()).collect();
        assert!(paths.contains(&"buildings[0].roof_area"));
        assert!(paths.contains(&"route_graph.edges[0].length"));
    }

    #[test]
    fn unknown_kind_is_a_validation_error() {
        let s = minimal_scenario();
        let mut json: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        json["catalog"]["options"][0]["kind"] = "xyz".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        match load_scenario(&path) {
            Err(ScenarioError::Validation(report)) => {
                assert!(report.violations.iter().any(|v| v.message.contains("xyz")));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn csv_series_resolve_relative_to_document() {
        let s = minimal_scenario();
        let mut json: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        json["buildings"][0]["electric_demand"] =
            serde_json::json!({"csv": "demand.csv", "column": "b1_el"});
        let dir = tempfile::tempdir().unwrap();
        let mut f = std::fs::File::create(dir.path().join("demand.csv")).unwrap();
        writeln!(f, "b1_el\n1.5\n2.5").unwrap();
        let path = dir.path().join("scenario.json");
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(loaded.buildings[0].electric_demand, vec![1.5, 2.5]);
    }

    #[test]
    fn missing_no_reinforcement_option_flagged() {
        let mut s = minimal_scenario();
        s.buildings[0].thermal_demand_by_ir[0].capex_fix = 500.0;
        let report = validate_scenario(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("no reinforcement")));
    }
}
