//! Translation of a scenario plus a structure decision (built pipes, sharing
//! groups) into the block-angular MILP, and the scalar objective-term
//! formulas as pure functions.
//!
//! The weighted objective scalarizes annual total expenditure (EUR/a) and
//! annual CO2-equivalent emissions (kg/a) as `(1-eps)*totex/ref_t +
//! eps*co2e/ref_c`; the reference magnitudes come from single-building
//! anchor solves so the weight sweep traverses the front usefully.

mod build;

pub use build::{build_closed_problem, build_group_problem, BalanceKind, ProblemMeta};

use crate::scenario::{DhnPipeClass, TechnologyOption};
use thiserror::Error;

/// Objective weighting factor of the weighted-sum sweep, in [0, 1]:
/// 0 is pure cost, 1 is pure emissions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaWeight(f64);

impl EtaWeight {
    pub fn new(eps: f64) -> Result<Self, ModelError> {
        if (0.0..=1.0).contains(&eps) {
            Ok(EtaWeight(eps))
        } else {
            Err(ModelError::BadWeight(eps))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Reference magnitudes dividing each objective before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRefs {
    pub totex: f64,
    pub co2e: f64,
}

impl Default for ScaleRefs {
    fn default() -> Self {
        ScaleRefs {
            totex: 1.0,
            co2e: 1.0,
        }
    }
}

impl ScaleRefs {
    /// Guards against degenerate anchors (zero-demand toys).
    pub fn sanitized(self) -> Self {
        let fix = |v: f64| if v.abs() < 1e-9 { 1.0 } else { v.abs() };
        ScaleRefs {
            totex: fix(self.totex),
            co2e: fix(self.co2e),
        }
    }
}

/// Both annual objective values of one design and dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct ObjectiveTerms {
    /// EUR/a.
    pub totex_annuity: f64,
    /// kgCO2e/a.
    pub co2e_annual: f64,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("weighting factor {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("structure error: {0}")]
    Structure(String),
}

/// One sized pipe of a heat network, as fixed before the investment stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SizedPipe {
    /// Index into `scenario.route_graph.edges`.
    pub edge_index: usize,
    /// Index into `scenario.dhn_pipe_classes`.
    pub class_index: usize,
    /// kW, max transported heat over all steps of the pre-optimization.
    pub max_heat_flow_kw: f64,
    /// t/h.
    pub max_mass_flow_tph: f64,
    /// kW per step fed into the network balance.
    pub loss_series_kw: Vec<f64>,
}

/// One connected heat network: member buildings and its sized pipes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkDecision {
    /// Building indices into `scenario.buildings`.
    pub members: Vec<usize>,
    pub pipes: Vec<SizedPipe>,
    /// Network flow temperature, degC.
    pub flow_temperature: f64,
    /// Return temperature, degC (25 K spread below flow).
    pub return_temperature: f64,
}

/// The structure fixed by the evolutionary stage for one cluster: which
/// buildings participate, how they share, and which pipes exist.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureDecision {
    /// Building indices into `scenario.buildings`, ascending.
    pub buildings: Vec<usize>,
    /// Energy-sharing groups; partition of `buildings`.
    pub groups: Vec<Vec<usize>>,
    pub networks: Vec<NetworkDecision>,
}

impl StructureDecision {
    /// A single detached building.
    pub fn singleton(building: usize) -> Self {
        StructureDecision {
            buildings: vec![building],
            groups: vec![vec![building]],
            networks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    /// Penalty on slack sources/sinks, applied as both EUR/kWh and
    /// kgCO2e/kWh; must dominate every catalog marginal cost.
    pub slack_penalty: f64,
    pub scale: ScaleRefs,
    /// Drop the electric side entirely (heat-network pre-optimization).
    /// Electric inputs of kept technologies are priced at the grid tariff.
    pub heat_only: bool,
    /// Replace each aggregate network balance with per-pipe directed flows
    /// and per-node conservation (the transport form used for pipe sizing).
    pub with_pipe_flows: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            slack_penalty: 1e4,
            scale: ScaleRefs::default(),
            heat_only: false,
            with_pipe_flows: false,
        }
    }
}

// ---------------------------------------------------------------------------
// Scalar objective-term formulas

/// Annualized pipe investment: zero when not built, otherwise fixed trench
/// cost plus the sized class's material cost, divided by the present-value
/// factor.
pub fn pipe_capex_annuity(build: bool, capex_fix: f64, capex_var_contribution: f64, pvf: f64) -> f64 {
    debug_assert!(pvf > 0.0);
    if !build {
        return 0.0;
    }
    (capex_fix + capex_var_contribution) / pvf
}

/// Annualized pipe investment for one sized candidate.
pub fn sized_pipe_capex_annuity(build: bool, class: &DhnPipeClass, length_m: f64) -> f64 {
    pipe_capex_annuity(
        build,
        class.capex_fix_per_m * length_m,
        class.capex_var_per_m * length_m,
        class.pvf,
    )
}

/// Annualized technology investment with subsidies netted off.
pub fn tech_capex_annuity(
    install: bool,
    dim: f64,
    option: &TechnologyOption,
    lump_sum_subsidy: f64,
    proportional_subsidy: f64,
) -> f64 {
    debug_assert!(option.pvf > 0.0);
    let fix = if install {
        option.capex_fix - lump_sum_subsidy
    } else {
        0.0
    };
    (fix + dim * (option.capex_var - proportional_subsidy)) / option.pvf
}

/// Demand-related operating cost: per-step energies (kWh) times prices
/// (EUR/kWh), annualized by the option's present-value factor.
pub fn opex_annuity(energies_kwh: &[f64], prices: &[f64], pvf: f64) -> f64 {
    debug_assert_eq!(energies_kwh.len(), prices.len());
    debug_assert!(pvf > 0.0);
    energies_kwh
        .iter()
        .zip(prices)
        .map(|(e, p)| e * p)
        .sum::<f64>()
        / pvf
}

/// Operating emissions: per-step energies (kWh) times factors (kgCO2e/kWh).
pub fn operation_emissions(energies_kwh: &[f64], gwp_op: &[f64]) -> f64 {
    debug_assert_eq!(energies_kwh.len(), gwp_op.len());
    energies_kwh.iter().zip(gwp_op).map(|(e, g)| e * g).sum()
}

/// Cradle-to-gate emissions of the install decision.
pub fn embodied_emissions(install: bool, gwp_fix: f64, dim: f64, gwp_var: f64) -> f64 {
    (if install { gwp_fix } else { 0.0 }) + dim * gwp_var
}

/// Operation plus embodied emissions of one technology.
pub fn emission_terms(
    energies_kwh: &[f64],
    gwp_op: &[f64],
    install: bool,
    gwp_fix: f64,
    dim: f64,
    gwp_var: f64,
) -> f64 {
    operation_emissions(energies_kwh, gwp_op) + embodied_emissions(install, gwp_fix, dim, gwp_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Carrier, Conversion, TechKind};

    fn option(capex_fix: f64, capex_var: f64, pvf: f64) -> TechnologyOption {
        TechnologyOption {
            id: "t".into(),
            kind: TechKind::Gcb,
            size_class: None,
            p_min: 0.0,
            p_max: 100.0,
            capex_fix,
            capex_var,
            opex_var: 0.0,
            lifetime_years: 20.0,
            pvf,
            gwp_fix: 0.0,
            gwp_var: 0.0,
            gwp_op: 0.0,
            conversion: Some(Conversion {
                input: None,
                efficiency: 1.0,
                output: Carrier::Heat,
                secondary: vec![],
                availability: None,
            }),
            storage: None,
        }
    }

    #[test]
    fn pipe_annuity_zero_when_unbuilt() {
        assert_eq!(pipe_capex_annuity(false, 1000.0, 500.0, 20.0), 0.0);
    }

    #[test]
    fn pipe_annuity_hand_value() {
        let a = pipe_capex_annuity(true, 1000.0, 500.0, 20.0);
        assert!((a - 75.0).abs() < 1e-12);
    }

    #[test]
    fn tech_annuity_hand_value() {
        let o = option(8000.0, 300.0, 10.0);
        let a = tech_capex_annuity(true, 10.0, &o, 0.0, 0.0);
        assert!((a - 1100.0).abs() < 1e-12);
        assert_eq!(tech_capex_annuity(false, 0.0, &o, 0.0, 0.0), 0.0);
    }

    #[test]
    fn full_lump_sum_subsidy_cancels_fixed_share() {
        let o = option(8000.0, 300.0, 10.0);
        let a = tech_capex_annuity(true, 10.0, &o, 8000.0, 0.0);
        assert!((a - 300.0).abs() < 1e-12);
    }

    #[test]
    fn opex_hand_sum() {
        let a = opex_annuity(&[1.0; 4], &[0.25; 4], 1.0);
        assert!((a - 1.0).abs() < 1e-12);
        assert_eq!(opex_annuity(&[0.0; 4], &[0.25; 4], 1.0), 0.0);
        // Negative prices (remuneration) flip the sign.
        assert!(opex_annuity(&[1.0; 2], &[-0.1; 2], 1.0) < 0.0);
    }

    #[test]
    fn emission_hand_values() {
        assert!((operation_emissions(&[100.0], &[0.2]) - 20.0).abs() < 1e-12);
        assert!((embodied_emissions(true, 500.0, 5.0, 10.0) - 550.0).abs() < 1e-12);
        assert_eq!(emission_terms(&[], &[], false, 500.0, 0.0, 10.0), 0.0);
    }

    #[test]
    fn eta_weight_rejects_out_of_range() {
        assert!(EtaWeight::new(-0.1).is_err());
        assert!(EtaWeight::new(1.1).is_err());
        assert_eq!(EtaWeight::new(0.5).unwrap().value(), 0.5);
    }
}
