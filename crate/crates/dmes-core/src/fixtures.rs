//! Synthetic desk-scale districts used by the test suites and as CLI
//! examples. All values are plausible engineering defaults, chosen so the
//! toy instances have interesting trade-offs (self-supply vs. grid, boiler
//! vs. heat pump, sharing vs. islanding) while staying small enough for the
//! monolithic oracle.

use crate::scenario::{
    default_pipe_classes, Building, Carrier, Conversion, ConversionOutput, ExistingAsset,
    IrOption, PipeCandidate, RegulatoryParams, RouteGraph, RouteNode, Scenario, StorageParams,
    TechKind, TechnologyCatalog, TechnologyOption, TimeHorizon, FORMAT_VERSION,
};
use std::collections::{BTreeMap, BTreeSet};

fn conversion(
    input: Option<Carrier>,
    efficiency: f64,
    output: Carrier,
    secondary: Vec<(Carrier, f64)>,
    availability: Option<Vec<f64>>,
) -> Conversion {
    Conversion {
        input,
        efficiency,
        output,
        secondary: secondary
            .into_iter()
            .map(|(carrier, ratio)| ConversionOutput { carrier, ratio })
            .collect(),
        availability,
    }
}

/// The full toy technology catalog; scenarios pick subsets by id.
pub fn base_catalog(steps: usize) -> Vec<TechnologyOption> {
    let solar_profile: Vec<f64> = (0..steps)
        .map(|t| {
            // A crude diurnal bump peaking mid-horizon.
            let x = (t as f64 + 0.5) / steps as f64;
            (std::f64::consts::PI * x).sin().max(0.0) * 0.9
        })
        .collect();
    vec![
        TechnologyOption {
            id: "gcb_s".into(),
            kind: TechKind::Gcb,
            size_class: Some("S".into()),
            p_min: 2.0,
            p_max: 30.0,
            capex_fix: 1200.0,
            capex_var: 80.0,
            opex_var: 0.09,
            lifetime_years: 20.0,
            pvf: 10.0,
            gwp_fix: 400.0,
            gwp_var: 15.0,
            gwp_op: 0.24,
            conversion: Some(conversion(None, 0.95, Carrier::Heat, vec![], None)),
            storage: None,
        },
        TechnologyOption {
            id: "awp_s".into(),
            kind: TechKind::Awp,
            size_class: Some("S".into()),
            p_min: 2.0,
            p_max: 15.0,
            capex_fix: 4000.0,
            capex_var: 600.0,
            opex_var: 0.01,
            lifetime_years: 18.0,
            pvf: 10.0,
            gwp_fix: 800.0,
            gwp_var: 30.0,
            gwp_op: 0.0,
            conversion: Some(conversion(
                Some(Carrier::Electricity),
                3.0,
                Carrier::Heat,
                vec![],
                None,
            )),
            storage: None,
        },
        TechnologyOption {
            id: "pv_s".into(),
            kind: TechKind::Pv,
            size_class: Some("S".into()),
            p_min: 1.0,
            p_max: 10.0,
            capex_fix: 800.0,
            capex_var: 900.0,
            opex_var: 0.0,
            lifetime_years: 25.0,
            pvf: 13.0,
            gwp_fix: 500.0,
            gwp_var: 40.0,
            gwp_op: 0.0,
            conversion: Some(conversion(
                None,
                1.0,
                Carrier::Electricity,
                vec![],
                Some(solar_profile.clone()),
            )),
            storage: None,
        },
        TechnologyOption {
            id: "chp_s".into(),
            kind: TechKind::Chp,
            size_class: Some("S".into()),
            p_min: 2.0,
            p_max: 20.0,
            capex_fix: 6000.0,
            capex_var: 700.0,
            opex_var: 0.10,
            lifetime_years: 15.0,
            pvf: 9.0,
            gwp_fix: 1500.0,
            gwp_var: 60.0,
            gwp_op: 0.55,
            conversion: Some(conversion(
                None,
                0.35,
                Carrier::Electricity,
                vec![(Carrier::Heat, 1.4)],
                None,
            )),
            storage: None,
        },
        TechnologyOption {
            id: "lio_s".into(),
            kind: TechKind::Lio,
            size_class: Some("S".into()),
            p_min: 1.0,
            p_max: 12.0,
            capex_fix: 300.0,
            capex_var: 420.0,
            opex_var: 0.005,
            lifetime_years: 12.0,
            pvf: 8.0,
            gwp_fix: 150.0,
            gwp_var: 90.0,
            gwp_op: 0.0,
            conversion: None,
            storage: Some(StorageParams {
                carrier: Some(Carrier::Electricity),
                eta_charge: 0.95,
                eta_discharge: 0.95,
                loss_per_step: 0.001,
                c_rate_charge: 0.5,
                c_rate_discharge: 0.5,
            }),
        },
        TechnologyOption {
            id: "ths_s".into(),
            kind: TechKind::Ths,
            size_class: Some("S".into()),
            p_min: 2.0,
            p_max: 40.0,
            capex_fix: 400.0,
            capex_var: 35.0,
            opex_var: 0.0,
            lifetime_years: 25.0,
            pvf: 14.0,
            gwp_fix: 120.0,
            gwp_var: 8.0,
            gwp_op: 0.0,
            conversion: None,
            storage: Some(StorageParams {
                carrier: Some(Carrier::Heat),
                eta_charge: 0.98,
                eta_discharge: 0.98,
                loss_per_step: 0.01,
                c_rate_charge: 0.4,
                c_rate_discharge: 0.4,
            }),
        },
        TechnologyOption {
            id: "he_s".into(),
            kind: TechKind::He,
            size_class: Some("S".into()),
            p_min: 1.0,
            p_max: 60.0,
            capex_fix: 2200.0,
            capex_var: 55.0,
            opex_var: 0.002,
            lifetime_years: 30.0,
            pvf: 15.0,
            gwp_fix: 250.0,
            gwp_var: 6.0,
            gwp_op: 0.0,
            conversion: None,
            storage: None,
        },
        TechnologyOption {
            id: "eg".into(),
            kind: TechKind::Eg,
            size_class: None,
            p_min: 0.0,
            p_max: 0.0,
            capex_fix: 0.0,
            capex_var: 0.0,
            opex_var: 0.0,
            lifetime_years: 40.0,
            pvf: 1.0,
            gwp_fix: 0.0,
            gwp_var: 0.0,
            gwp_op: 0.42,
            conversion: None,
            storage: None,
        },
    ]
}

/// One building of a toy district.
#[derive(Debug, Clone)]
pub struct ToyBuilding {
    pub position: [f64; 2],
    pub roof_area: f64,
    pub max_flow_temperature: f64,
    pub electric_demand: Vec<f64>,
    pub thermal_demand: Vec<f64>,
    /// Adds a second insulation option: (capex, demand factor).
    pub reinforcement: Option<(f64, f64)>,
    pub existing: Vec<(String, f64)>,
}

impl ToyBuilding {
    pub fn new(position: [f64; 2], electric: Vec<f64>, thermal: Vec<f64>) -> Self {
        ToyBuilding {
            position,
            roof_area: 25.0,
            max_flow_temperature: 70.0,
            electric_demand: electric,
            thermal_demand: thermal,
            reinforcement: None,
            existing: Vec::new(),
        }
    }
}

/// Declarative toy district; `build` turns it into a validated scenario.
#[derive(Debug, Clone)]
pub struct ToyDistrict {
    pub steps: usize,
    pub step_hours: f64,
    pub buildings: Vec<ToyBuilding>,
    /// Extra route nodes beyond the one per building.
    pub junctions: Vec<[f64; 2]>,
    /// Candidate pipes between node indices (buildings first, then
    /// junctions); length defaults to the Euclidean distance when 0.
    pub edges: Vec<(usize, usize, f64)>,
    pub tech_ids: Vec<String>,
    pub grid_price: f64,
    pub demand_charge: f64,
    pub dm_pv_rate: f64,
    pub es_diameter_limit: f64,
    pub earth_temperature: f64,
}

impl ToyDistrict {
    pub fn new(steps: usize) -> Self {
        ToyDistrict {
            steps,
            step_hours: 1.0,
            buildings: Vec::new(),
            junctions: Vec::new(),
            edges: Vec::new(),
            tech_ids: vec!["gcb_s".into(), "pv_s".into(), "eg".into()],
            grid_price: 0.30,
            demand_charge: 0.0,
            dm_pv_rate: 0.08,
            es_diameter_limit: 500.0,
            earth_temperature: 10.0,
        }
    }

    pub fn node_positions(&self) -> Vec<[f64; 2]> {
        self.buildings
            .iter()
            .map(|b| b.position)
            .chain(self.junctions.iter().copied())
            .collect()
    }

    pub fn build(&self) -> Scenario {
        let steps = self.steps;
        let catalog: Vec<TechnologyOption> = base_catalog(steps)
            .into_iter()
            .filter(|o| self.tech_ids.iter().any(|id| id == &o.id))
            .collect();
        let positions = self.node_positions();
        let nodes: Vec<RouteNode> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| RouteNode {
                id: format!("n{i}"),
                position: *p,
            })
            .collect();
        let edges: Vec<PipeCandidate> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b, len))| {
                let dx = positions[a][0] - positions[b][0];
                let dy = positions[a][1] - positions[b][1];
                let euclid = (dx * dx + dy * dy).sqrt();
                PipeCandidate {
                    id: format!("p{i}"),
                    from: format!("n{a}"),
                    to: format!("n{b}"),
                    length: if len > 0.0 { len } else { euclid.max(1.0) },
                }
            })
            .collect();
        let buildings: Vec<Building> = self
            .buildings
            .iter()
            .enumerate()
            .map(|(i, tb)| {
                let mut irs = vec![IrOption {
                    id: "none".into(),
                    capex_fix: 0.0,
                    gwp_fix: 0.0,
                    pvf: 1.0,
                    series: tb.thermal_demand.clone(),
                }];
                if let Some((capex, factor)) = tb.reinforcement {
                    irs.push(IrOption {
                        id: "retrofit".into(),
                        capex_fix: capex,
                        gwp_fix: capex * 0.8,
                        pvf: 25.0,
                        series: tb.thermal_demand.iter().map(|v| v * factor).collect(),
                    });
                }
                Building {
                    id: format!("b{i}"),
                    node: format!("n{i}"),
                    position: tb.position,
                    roof_area: tb.roof_area,
                    max_flow_temperature: tb.max_flow_temperature,
                    electric_demand: tb.electric_demand.clone(),
                    thermal_demand_by_ir: irs,
                    existing_assets: tb
                        .existing
                        .iter()
                        .map(|(option, capacity)| ExistingAsset {
                            option: option.clone(),
                            capacity: *capacity,
                        })
                        .collect(),
                }
            })
            .collect();
        let mut dm = BTreeMap::new();
        if self.dm_pv_rate > 0.0 {
            dm.insert(TechKind::Pv, self.dm_pv_rate);
        }
        Scenario {
            format_version: FORMAT_VERSION,
            horizon: TimeHorizon {
                steps,
                step_hours: self.step_hours,
            },
            earth_temperature: vec![self.earth_temperature; steps],
            buildings,
            route_graph: RouteGraph { nodes, edges },
            catalog: TechnologyCatalog { options: catalog },
            tariffs: RegulatoryParams {
                grid_purchase_price: vec![self.grid_price; steps],
                demand_charge: self.demand_charge,
                direct_marketing_remuneration: dm,
                es_diameter_limit: self.es_diameter_limit,
                subsidies: BTreeMap::new(),
                banned_kinds: BTreeSet::new(),
            },
            dhn_pipe_classes: default_pipe_classes(),
        }
    }
}

/// Simple repeating demand profiles.
pub fn profile(steps: usize, base: f64, swing: f64, phase: usize) -> Vec<f64> {
    (0..steps)
        .map(|t| {
            let x = ((t + phase) % 4) as f64 / 4.0;
            base + swing * (2.0 * std::f64::consts::PI * x).sin().abs()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TwoBuildingLayout {
    pub steps: usize,
    pub ir_options_b0: usize,
    pub with_pipe: bool,
    pub tech_ids: Vec<String>,
}

impl Default for TwoBuildingLayout {
    fn default() -> Self {
        TwoBuildingLayout {
            steps: 4,
            ir_options_b0: 1,
            with_pipe: false,
            tech_ids: vec!["gcb_s".into(), "pv_s".into(), "he_s".into(), "eg".into()],
        }
    }
}

/// A 2-building district 60 m apart with configurable details.
pub fn two_building_scenario(layout: TwoBuildingLayout) -> Scenario {
    let steps = layout.steps;
    let mut d = ToyDistrict::new(steps);
    d.tech_ids = layout.tech_ids.clone();
    let mut b0 = ToyBuilding::new(
        [0.0, 0.0],
        profile(steps, 1.0, 1.0, 0),
        profile(steps, 3.0, 2.0, 1),
    );
    if layout.ir_options_b0 >= 2 {
        b0.reinforcement = Some((3000.0, 0.7));
    }
    let b1 = ToyBuilding::new(
        [60.0, 0.0],
        profile(steps, 1.5, 0.5, 2),
        profile(steps, 2.0, 1.5, 3),
    );
    d.buildings.push(b0);
    d.buildings.push(b1);
    if layout.with_pipe {
        d.edges.push((0, 1, 0.0));
    }
    d.build()
}

/// Two buildings joined by one candidate pipe where only b0 can supply heat
/// cheaply: b0 holds a paid-off boiler while new boilers are prohibitive,
/// which forces heat transport through the pipe.
pub fn transport_pair_scenario(steps: usize) -> Scenario {
    let mut d = ToyDistrict::new(steps);
    d.tech_ids = vec!["gcb_s".into(), "he_s".into(), "eg".into()];
    let mut b0 = ToyBuilding::new([0.0, 0.0], vec![0.5; steps], profile(steps, 4.0, 2.0, 0));
    b0.existing.push(("gcb_s".into(), 50.0));
    let mut b1 = ToyBuilding::new([40.0, 0.0], vec![0.5; steps], profile(steps, 6.0, 4.0, 2));
    b1.thermal_demand[steps.saturating_sub(1).min(1)] = 10.0;
    d.buildings.push(b0);
    d.buildings.push(b1);
    d.edges.push((0, 1, 0.0));
    let mut s = d.build();
    // New boilers are prohibitive; only the existing one supplies cheaply.
    for o in &mut s.catalog.options {
        if o.id == "gcb_s" {
            o.capex_fix = 1e5;
            o.capex_var = 1e4;
        }
    }
    s
}

/// A star of three buildings around a junction; only the center building
/// b0 can produce heat, forcing single-path flows to both leaves.
pub fn transport_star_scenario(steps: usize) -> Scenario {
    let mut d = ToyDistrict::new(steps);
    d.tech_ids = vec!["gcb_s".into(), "he_s".into(), "eg".into()];
    let mut b0 = ToyBuilding::new([0.0, 0.0], vec![0.5; steps], vec![1.0; steps]);
    b0.existing.push(("gcb_s".into(), 80.0));
    let b1 = ToyBuilding::new([50.0, 0.0], vec![0.5; steps], profile(steps, 3.0, 1.0, 0));
    let b2 = ToyBuilding::new([0.0, 70.0], vec![0.5; steps], profile(steps, 5.0, 2.0, 1));
    d.buildings.push(b0);
    d.buildings.push(b1);
    d.buildings.push(b2);
    d.edges.push((0, 1, 0.0));
    d.edges.push((0, 2, 0.0));
    let mut s = d.build();
    for o in &mut s.catalog.options {
        if o.id == "gcb_s" {
            o.capex_fix = 1e5;
            o.capex_var = 1e4;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::validate_scenario;

    #[test]
    fn toy_scenarios_validate() {
        let s = two_building_scenario(TwoBuildingLayout::default());
        assert!(validate_scenario(&s).is_empty(), "{}", validate_scenario(&s));
        let mut layout = TwoBuildingLayout::default();
        layout.with_pipe = true;
        layout.ir_options_b0 = 2;
        let s = two_building_scenario(layout);
        assert!(validate_scenario(&s).is_empty(), "{}", validate_scenario(&s));
    }
}
