//! Heat-network pre-optimization: maximum flows, pipe class sizing and
//! loss series for a fixed pipe layout.
//!
//! The heat supply task is solved as a transport problem (heat side only,
//! per-pipe directed flows); each pipe is then sized to the smallest
//! nominal width covering its peak mass flow, and the standing losses of
//! the sized classes feed the network balance of the investment stage.

use crate::benders::{self, BendersConfig, BendersError};
use crate::milp::MilpProblem;
use crate::model::{
    build_group_problem, EtaWeight, ModelConfig, ModelError, NetworkDecision, SizedPipe,
    StructureDecision,
};
use crate::scenario::{DhnPipeClass, Scenario};
use thiserror::Error;

/// Specific heat capacity of the transfer fluid, kJ/(kg K).
pub const DEFAULT_CP: f64 = 4.19;

/// Flow/return spread, K.
pub const TEMPERATURE_SPREAD: f64 = 25.0;

/// Margin of the network flow temperature above the hottest consumer, K.
pub const FLOW_TEMPERATURE_MARGIN: f64 = 20.0;

#[derive(Debug, Error)]
pub enum HeatnetError {
    #[error("network has no connected buildings")]
    EmptyNetwork,
    #[error("flow temperature {0} not above return temperature {1}")]
    DegenerateSpread(f64, f64),
    #[error("mass flow {0:.3} t/h exceeds the largest pipe class ({1:.3} t/h)")]
    FlowExceedsCatalog(f64, f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("pre-optimization failed: {0}")]
    Solve(String),
}

impl From<BendersError> for HeatnetError {
    fn from(e: BendersError) -> Self {
        HeatnetError::Solve(e.to_string())
    }
}

/// Network flow temperature: the hottest connected consumer plus the margin.
pub fn flow_temperature(max_flow_temperatures: &[f64]) -> Result<f64, HeatnetError> {
    max_flow_temperatures
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        })
        .map(|v| v + FLOW_TEMPERATURE_MARGIN)
        .ok_or(HeatnetError::EmptyNetwork)
}

/// Peak mass flow in t/h for a peak heat flow in kW over the given spread.
pub fn max_mass_flow(q_max_kw: f64, cp: f64, t_fl: f64, t_rf: f64) -> Result<f64, HeatnetError> {
    if t_fl <= t_rf {
        return Err(HeatnetError::DegenerateSpread(t_fl, t_rf));
    }
    debug_assert!(cp > 0.0);
    let kg_per_s = q_max_kw / (cp * (t_fl - t_rf));
    Ok(kg_per_s * 3.6)
}

/// Smallest class carrying the flow; equality admitted. Classes must be
/// ordered by increasing capacity.
pub fn size_pipe(mass_flow_tph: f64, classes: &[DhnPipeClass]) -> Result<usize, HeatnetError> {
    debug_assert!(!classes.is_empty());
    for (i, c) in classes.iter().enumerate() {
        if mass_flow_tph <= c.max_mass_flow {
            return Ok(i);
        }
    }
    Err(HeatnetError::FlowExceedsCatalog(
        mass_flow_tph,
        classes.last().unwrap().max_mass_flow,
    ))
}

/// Standing loss series in kW: mean network temperature against the earth
/// temperature, through the class's heat transfer coefficient and the outer
/// pipe surface. Negative losses (earth warmer than the fluid) are admitted
/// with a warning.
pub fn pipe_loss(
    class: &DhnPipeClass,
    length_m: f64,
    t_fl: f64,
    t_rf: f64,
    t_earth: &[f64],
) -> Vec<f64> {
    debug_assert!(length_m > 0.0);
    let area = class.outer_area_per_m * length_m;
    let mean = 0.5 * (t_fl + t_rf);
    let series: Vec<f64> = t_earth
        .iter()
        .map(|te| (mean - te) * class.u_value * area / 1000.0)
        .collect();
    if series.iter().any(|v| *v < 0.0) {
        log::warn!(
            "pipe loss negative for class {} (earth warmer than network)",
            class.dn
        );
    }
    series
}

#[derive(Debug, Clone)]
pub struct PresizeConfig {
    pub benders: BendersConfig,
    pub slack_penalty: f64,
    pub cp: f64,
}

impl Default for PresizeConfig {
    fn default() -> Self {
        PresizeConfig {
            benders: BendersConfig::default(),
            slack_penalty: 1e4,
            cp: DEFAULT_CP,
        }
    }
}

/// Pre-sizes one connected pipe layout (already repaired): solves the
/// heat-only transport problem, records each pipe's peak transported heat,
/// picks classes and computes the final loss series.
pub fn presize_network(
    scenario: &Scenario,
    members: &[usize],
    edge_indices: &[usize],
    eta: EtaWeight,
    config: &PresizeConfig,
) -> Result<NetworkDecision, HeatnetError> {
    if edge_indices.is_empty() {
        return Ok(NetworkDecision::default());
    }
    if members.is_empty() {
        return Err(HeatnetError::EmptyNetwork);
    }
    let temps: Vec<f64> = members
        .iter()
        .map(|&b| scenario.buildings[b].max_flow_temperature)
        .collect();
    let t_fl = flow_temperature(&temps)?;
    let t_rf = t_fl - TEMPERATURE_SPREAD;
    let classes = &scenario.dhn_pipe_classes;

    // Provisional losses from the smallest class feed the transport solve;
    // the final series comes from the sized classes afterwards.
    let provisional: Vec<SizedPipe> = edge_indices
        .iter()
        .map(|&e| SizedPipe {
            edge_index: e,
            class_index: 0,
            max_heat_flow_kw: 0.0,
            max_mass_flow_tph: 0.0,
            loss_series_kw: pipe_loss(
                &classes[0],
                scenario.route_graph.edges[e].length,
                t_fl,
                t_rf,
                &scenario.earth_temperature,
            ),
        })
        .collect();

    let structure = StructureDecision {
        buildings: members.to_vec(),
        groups: members.iter().map(|&b| vec![b]).collect(),
        networks: vec![NetworkDecision {
            members: members.to_vec(),
            pipes: provisional.clone(),
            flow_temperature: t_fl,
            return_temperature: t_rf,
        }],
    };
    let model_cfg = ModelConfig {
        slack_penalty: config.slack_penalty,
        heat_only: true,
        with_pipe_flows: true,
        ..ModelConfig::default()
    };
    let gp = build_group_problem(scenario, &structure, eta, &model_cfg)?;
    let run = match benders::run(&gp.milp, &config.benders) {
        Ok(run) => run,
        Err(BendersError::IterationCap { incumbent, .. }) => *incumbent,
        Err(e) => return Err(e.into()),
    };

    let mut pipes = Vec::with_capacity(edge_indices.len());
    for (flow_vars, prov) in gp.meta.pipe_flows.iter().zip(&provisional) {
        let q_max = flow_vars
            .pos
            .iter()
            .zip(&flow_vars.neg)
            .map(|(&p, &n)| (run.solution[p] - run.solution[n]).abs())
            .fold(0.0_f64, f64::max);
        let m_max = max_mass_flow(q_max, config.cp, t_fl, t_rf)?;
        let class_index = size_pipe(m_max, classes)?;
        let length = scenario.route_graph.edges[prov.edge_index].length;
        pipes.push(SizedPipe {
            edge_index: prov.edge_index,
            class_index,
            max_heat_flow_kw: q_max,
            max_mass_flow_tph: m_max,
            loss_series_kw: pipe_loss(
                &classes[class_index],
                length,
                t_fl,
                t_rf,
                &scenario.earth_temperature,
            ),
        });
    }
    Ok(NetworkDecision {
        members: members.to_vec(),
        pipes,
        flow_temperature: t_fl,
        return_temperature: t_rf,
    })
}

/// Directed per-pipe flow series of a transport solution, for tests and
/// diagnostics.
pub fn pipe_flow_series(
    meta: &crate::model::ProblemMeta,
    _problem: &MilpProblem,
    solution: &[f64],
) -> Vec<(usize, Vec<f64>)> {
    meta.pipe_flows
        .iter()
        .map(|fv| {
            let series: Vec<f64> = fv
                .pos
                .iter()
                .zip(&fv.neg)
                .map(|(&p, &n)| solution[p] - solution[n])
                .collect();
            (fv.edge_index, series)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_pipe_classes;

    #[test]
    fn flow_temperature_rule() {
        assert_eq!(flow_temperature(&[70.0]).unwrap(), 90.0);
        assert_eq!(flow_temperature(&[55.0, 70.0]).unwrap(), 90.0);
        assert!(matches!(
            flow_temperature(&[]),
            Err(HeatnetError::EmptyNetwork)
        ));
    }

    #[test]
    fn mass_flow_hand_value() {
        assert_eq!(max_mass_flow(0.0, 4.19, 90.0, 65.0).unwrap(), 0.0);
        let m = max_mass_flow(100.0, 4.19, 90.0, 65.0).unwrap();
        let expected = 100.0 / (4.19 * 25.0) * 3.6;
        assert!((m - expected).abs() <= 1e-9 * expected);
        // Matches the tabulated value at display precision.
        assert!((m - 3.4368).abs() < 5e-5);
        assert!(matches!(
            max_mass_flow(10.0, 4.19, 65.0, 65.0),
            Err(HeatnetError::DegenerateSpread(_, _))
        ));
    }

    #[test]
    fn pipe_sizing_covers_catalog_range() {
        let classes = default_pipe_classes();
        assert_eq!(size_pipe(0.4, &classes).unwrap(), 0);
        let last = classes.len() - 1;
        assert_eq!(size_pipe(193.0, &classes).unwrap(), last);
        assert!(matches!(
            size_pipe(200.0, &classes),
            Err(HeatnetError::FlowExceedsCatalog(_, _))
        ));
    }

    #[test]
    fn loss_hand_value_and_affinity() {
        let class = DhnPipeClass {
            dn: "DNX".into(),
            max_mass_flow: 10.0,
            u_value: 0.6,
            outer_area_per_m: 1.0,
            capex_fix_per_m: 0.0,
            capex_var_per_m: 0.0,
            pvf: 19.79,
        };
        // U 0.6, A_L 10 m^2, mean 77.5 degC vs earth 10 -> 405 W.
        let series = pipe_loss(&class, 10.0, 90.0, 65.0, &[10.0]);
        assert!((series[0] - 0.405).abs() < 1e-9);
        // Zero driving difference.
        let series = pipe_loss(&class, 10.0, 90.0, 65.0, &[77.5]);
        assert!(series[0].abs() < 1e-12);
        // Earth warmer than the mean: negative loss admitted.
        let series = pipe_loss(&class, 10.0, 90.0, 65.0, &[80.0]);
        assert!(series[0] < 0.0);
        // Affine in earth temperature with slope -U*A_L.
        let s1 = pipe_loss(&class, 10.0, 90.0, 65.0, &[10.0]);
        let s2 = pipe_loss(&class, 10.0, 90.0, 65.0, &[11.0]);
        let slope = (s2[0] - s1[0]) / 1.0;
        assert!((slope - (-0.6 * 10.0 / 1000.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_pipe_network_is_empty() {
        let s = crate::fixtures::two_building_scenario(Default::default());
        let net = presize_network(
            &s,
            &[0, 1],
            &[],
            EtaWeight::new(0.0).unwrap(),
            &PresizeConfig::default(),
        )
        .unwrap();
        assert!(net.pipes.is_empty());
        assert!(net.members.is_empty());
    }
}
