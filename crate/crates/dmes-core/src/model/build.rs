//! Construction of the block-angular group MILP.
//!
//! Per building: investment binaries and sizes, insulation choice, per-step
//! dispatch of every catalog technology, storage states, market flows and
//! penalty slacks, tied together by per-carrier node balances. Groups add
//! one energy-sharing balance row per step, networks one heat balance row
//! per step carrying the pre-computed pipe losses; these are the coupling
//! rows later stages relax. All investment variables are first-stage.

use super::{EtaWeight, ModelConfig, ModelError, ObjectiveTerms, StructureDecision};
use crate::milp::{MilpProblem, ProblemBuilder, RowTag, Sense, Stage, VarKind};
use crate::scenario::{Carrier, Scenario, TechKind, TechnologyOption};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceKind {
    Electric,
    Thermal,
    Es,
    Dhn,
}

#[derive(Debug, Clone, Default)]
pub struct ExchangeVars {
    pub building: usize,
    pub to_es: Vec<usize>,
    pub from_es: Vec<usize>,
    pub to_dhn: Vec<usize>,
    pub from_dhn: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct InstallVars {
    pub building: usize,
    pub option_id: String,
    pub bin: usize,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct IrVars {
    pub building: usize,
    pub ir_id: String,
    pub var: usize,
}

#[derive(Debug, Clone)]
pub struct PipeFlowVars {
    pub edge_index: usize,
    /// Directed flow variables per step, from -> to.
    pub pos: Vec<usize>,
    /// Reverse direction per step.
    pub neg: Vec<usize>,
}

/// Physical validity of one dispatch: balance residuals and slack use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct ValidityReport {
    pub max_el_residual: f64,
    pub max_th_residual: f64,
    pub max_es_residual: f64,
    pub max_dhn_residual: f64,
    /// Total slack energy, kWh over the horizon.
    pub slack_total: f64,
}

impl ValidityReport {
    pub fn physically_valid(&self) -> bool {
        self.slack_total <= 1e-6
            && self.max_el_residual <= 1e-6
            && self.max_th_residual <= 1e-6
            && self.max_es_residual <= 1e-6
            && self.max_dhn_residual <= 1e-6
    }

    fn merge(&mut self, other: &ValidityReport) {
        self.max_el_residual = self.max_el_residual.max(other.max_el_residual);
        self.max_th_residual = self.max_th_residual.max(other.max_th_residual);
        self.max_es_residual = self.max_es_residual.max(other.max_es_residual);
        self.max_dhn_residual = self.max_dhn_residual.max(other.max_dhn_residual);
        self.slack_total += other.slack_total;
    }
}

/// Merge per-cluster validity reports into one district report.
pub fn merge_validity(reports: &[ValidityReport]) -> ValidityReport {
    let mut out = ValidityReport::default();
    for r in reports {
        out.merge(r);
    }
    out
}

/// Everything needed to interpret a solution of the built problem.
#[derive(Debug, Clone)]
pub struct ProblemMeta {
    pub eps: f64,
    pub step_hours: f64,
    /// Unscaled EUR/a objective as sparse terms plus a constant.
    pub totex_terms: Vec<(usize, f64)>,
    pub totex_const: f64,
    /// Unscaled kgCO2e/a objective as sparse terms plus a constant.
    pub co2e_terms: Vec<(usize, f64)>,
    pub co2e_const: f64,
    pub slack_vars: Vec<usize>,
    pub balance_rows: Vec<(BalanceKind, usize)>,
    pub exchange: Vec<ExchangeVars>,
    pub pipe_flows: Vec<PipeFlowVars>,
    pub installs: Vec<InstallVars>,
    pub ir_choices: Vec<IrVars>,
}

impl ProblemMeta {
    pub fn objectives(&self, x: &[f64]) -> ObjectiveTerms {
        ObjectiveTerms {
            totex_annuity: MilpProblem::eval_terms(&self.totex_terms, x) + self.totex_const,
            co2e_annual: MilpProblem::eval_terms(&self.co2e_terms, x) + self.co2e_const,
        }
    }

    /// Balance residuals and slack activation of a dispatch.
    pub fn validity(&self, problem: &MilpProblem, x: &[f64]) -> ValidityReport {
        let mut report = ValidityReport::default();
        for &(kind, row) in &self.balance_rows {
            let c = &problem.constraints[row];
            let residual = (MilpProblem::eval_terms(&c.terms, x) - c.rhs).abs();
            let slot = match kind {
                BalanceKind::Electric => &mut report.max_el_residual,
                BalanceKind::Thermal => &mut report.max_th_residual,
                BalanceKind::Es => &mut report.max_es_residual,
                BalanceKind::Dhn => &mut report.max_dhn_residual,
            };
            *slot = slot.max(residual);
        }
        report.slack_total = self
            .slack_vars
            .iter()
            .map(|&v| x[v].abs() * self.step_hours)
            .sum();
        report
    }
}

pub struct GroupProblem {
    pub milp: MilpProblem,
    pub meta: ProblemMeta,
}

/// Builds the group MILP for one cluster structure.
pub fn build_group_problem(
    scenario: &Scenario,
    structure: &StructureDecision,
    eta: EtaWeight,
    config: &ModelConfig,
) -> Result<GroupProblem, ModelError> {
    Builder::new(scenario, structure, eta, config)?.run()
}

/// The closed monolithic form: identical rows to the group problem; the
/// difference is entirely in how it is solved downstream.
pub fn build_closed_problem(
    scenario: &Scenario,
    structure: &StructureDecision,
    eta: EtaWeight,
    config: &ModelConfig,
) -> Result<GroupProblem, ModelError> {
    build_group_problem(scenario, structure, eta, config)
}

/// One dispatchable technology instance at a building: either a sizable
/// catalog option or an existing asset with fixed capacity.
struct TechInstance<'a> {
    option: &'a TechnologyOption,
    existing_capacity: Option<f64>,
    /// Index into `ProblemMeta::installs` when sizable.
    install_slot: Option<usize>,
    /// Dispatch variables per step: activity for conversions.
    activity: Vec<usize>,
    /// Storage variables per step.
    soc: Vec<usize>,
    charge: Vec<usize>,
    discharge: Vec<usize>,
}

struct Builder<'a> {
    scenario: &'a Scenario,
    structure: &'a StructureDecision,
    eps: f64,
    config: &'a ModelConfig,
    pb: ProblemBuilder,
    meta: ProblemMeta,
    /// Grid interface parameters from the `eg` catalog entry when present.
    eg_opex: f64,
    eg_gwp: f64,
    eg_pvf: f64,
}

impl<'a> Builder<'a> {
    fn new(
        scenario: &'a Scenario,
        structure: &'a StructureDecision,
        eta: EtaWeight,
        config: &'a ModelConfig,
    ) -> Result<Self, ModelError> {
        validate_structure(scenario, structure)?;
        let eg = scenario
            .catalog
            .options
            .iter()
            .find(|o| o.kind == TechKind::Eg);
        Ok(Builder {
            scenario,
            structure,
            eps: eta.value(),
            config,
            pb: ProblemBuilder::new(),
            meta: ProblemMeta {
                eps: eta.value(),
                step_hours: scenario.horizon.step_hours,
                totex_terms: Vec::new(),
                totex_const: 0.0,
                co2e_terms: Vec::new(),
                co2e_const: 0.0,
                slack_vars: Vec::new(),
                balance_rows: Vec::new(),
                exchange: Vec::new(),
                pipe_flows: Vec::new(),
                installs: Vec::new(),
                ir_choices: Vec::new(),
            },
            eg_opex: eg.map(|o| o.opex_var).unwrap_or(0.0),
            eg_gwp: eg.map(|o| o.gwp_op).unwrap_or(0.0),
            eg_pvf: eg.map(|o| o.pvf).unwrap_or(1.0),
        })
    }

    /// Adds an objective contribution: `totex` EUR/a and `co2e` kg/a per unit
    /// of the variable. The solver sees the scaled weighted sum.
    fn objective(&mut self, var: usize, totex: f64, co2e: f64) {
        let scale = self.config.scale.sanitized();
        if totex != 0.0 {
            self.meta.totex_terms.push((var, totex));
        }
        if co2e != 0.0 {
            self.meta.co2e_terms.push((var, co2e));
        }
        let coef = (1.0 - self.eps) * totex / scale.totex + self.eps * co2e / scale.co2e;
        self.pb.add_objective(var, coef);
    }

    fn run(mut self) -> Result<GroupProblem, ModelError> {
        self.assert_penalty_dominates();
        let t_steps = self.scenario.steps();

        // Pipe investment is fixed by the structure; it enters as constants.
        for net in &self.structure.networks {
            for pipe in &net.pipes {
                let class = &self.scenario.dhn_pipe_classes[pipe.class_index];
                let length = self.scenario.route_graph.edges[pipe.edge_index].length;
                self.meta.totex_const +=
                    super::sized_pipe_capex_annuity(true, class, length);
            }
        }

        let building_count = self.structure.buildings.len();
        let mut per_building: Vec<BuildingVars> = Vec::with_capacity(building_count);
        for &b in &self.structure.buildings.clone() {
            let vars = self.build_building(b, t_steps)?;
            per_building.push(vars);
        }

        // Energy-sharing balance per group and step (coupling rows).
        if !self.config.heat_only {
            for group in &self.structure.groups {
                if group.len() < 2 {
                    continue;
                }
                for t in 0..t_steps {
                    let mut terms = Vec::new();
                    for &b in group {
                        let slot = self.structure.buildings.iter().position(|&x| x == b).unwrap();
                        let ex = &self.meta.exchange[slot];
                        terms.push((ex.to_es[t], 1.0));
                        terms.push((ex.from_es[t], -1.0));
                    }
                    let row = self.pb.add_row(
                        format!("f21.g{}.t{}", group[0], t),
                        terms,
                        Sense::Eq,
                        0.0,
                        RowTag::CouplingEs,
                    );
                    self.meta.balance_rows.push((BalanceKind::Es, row));
                }
            }
        }

        // Heat-network balance per network and step.
        for (ni, net) in self.structure.networks.clone().iter().enumerate() {
            if self.config.with_pipe_flows {
                self.build_pipe_flow_rows(ni, net, t_steps)?;
            } else {
                for t in 0..t_steps {
                    let losses: f64 = net.pipes.iter().map(|p| p.loss_series_kw[t]).sum();
                    let mut terms = Vec::new();
                    for &b in &net.members {
                        let slot = self.structure.buildings.iter().position(|&x| x == b).unwrap();
                        let ex = &self.meta.exchange[slot];
                        if ex.to_dhn.is_empty() {
                            continue;
                        }
                        terms.push((ex.to_dhn[t], 1.0));
                        terms.push((ex.from_dhn[t], -1.0));
                    }
                    // Per-building network slacks keep the row feasible for
                    // any investment decision (no feasibility cuts needed).
                    for &b in &net.members {
                        let slot = self.structure.buildings.iter().position(|&x| x == b).unwrap();
                        let src = self.slack_var(format!("sl_dn_src.b{b}.t{t}"), b);
                        let snk = self.slack_var(format!("sl_dn_snk.b{b}.t{t}"), b);
                        terms.push((src, 1.0));
                        terms.push((snk, -1.0));
                        let _ = slot;
                    }
                    let row = self.pb.add_row(
                        format!("f22.n{ni}.t{t}"),
                        terms,
                        Sense::Eq,
                        losses,
                        RowTag::CouplingDhn,
                    );
                    self.meta.balance_rows.push((BalanceKind::Dhn, row));
                }
            }
        }

        let milp = self.pb.build();
        milp.check()
            .map_err(|e| ModelError::Structure(e.to_string()))?;
        Ok(GroupProblem {
            milp,
            meta: self.meta,
        })
    }

    /// Transport form: directed per-pipe flows with node conservation,
    /// replacing the aggregate network balance.
    fn build_pipe_flow_rows(
        &mut self,
        ni: usize,
        net: &super::NetworkDecision,
        t_steps: usize,
    ) -> Result<(), ModelError> {
        let graph = &self.scenario.route_graph;
        let mut nodes: Vec<usize> = Vec::new();
        for pipe in &net.pipes {
            let e = &graph.edges[pipe.edge_index];
            for id in [&e.from, &e.to] {
                let idx = graph
                    .node_index(id)
                    .ok_or_else(|| ModelError::Structure(format!("unknown node {id}")))?;
                if !nodes.contains(&idx) {
                    nodes.push(idx);
                }
            }
        }
        nodes.sort_unstable();

        let mut flows = Vec::new();
        for pipe in &net.pipes {
            let mut pos = Vec::with_capacity(t_steps);
            let mut neg = Vec::with_capacity(t_steps);
            for t in 0..t_steps {
                pos.push(self.pb.add_var(
                    format!("fp.e{}.t{}", pipe.edge_index, t),
                    VarKind::Continuous,
                    0.0,
                    f64::INFINITY,
                    Stage::Second,
                    None,
                ));
                neg.push(self.pb.add_var(
                    format!("fn.e{}.t{}", pipe.edge_index, t),
                    VarKind::Continuous,
                    0.0,
                    f64::INFINITY,
                    Stage::Second,
                    None,
                ));
            }
            flows.push(PipeFlowVars {
                edge_index: pipe.edge_index,
                pos,
                neg,
            });
        }

        for (n_pos, &node_idx) in nodes.iter().enumerate() {
            let node_id = &graph.nodes[node_idx].id;
            for t in 0..t_steps {
                let mut terms = Vec::new();
                let mut loss_here = 0.0;
                for (pi, pipe) in net.pipes.iter().enumerate() {
                    let e = &graph.edges[pipe.edge_index];
                    let fv = &flows[pi];
                    if &e.to == node_id {
                        terms.push((fv.pos[t], 1.0));
                        terms.push((fv.neg[t], -1.0));
                        loss_here += pipe.loss_series_kw[t] / 2.0;
                    }
                    if &e.from == node_id {
                        terms.push((fv.pos[t], -1.0));
                        terms.push((fv.neg[t], 1.0));
                        loss_here += pipe.loss_series_kw[t] / 2.0;
                    }
                }
                for &b in &net.members {
                    if self.scenario.buildings[b].node != *node_id {
                        continue;
                    }
                    let slot = self.structure.buildings.iter().position(|&x| x == b).unwrap();
                    let ex = &self.meta.exchange[slot];
                    if !ex.to_dhn.is_empty() {
                        terms.push((ex.to_dhn[t], 1.0));
                        terms.push((ex.from_dhn[t], -1.0));
                    }
                    let src = self.slack_var(format!("sl_dn_src.b{b}.t{t}"), b);
                    let snk = self.slack_var(format!("sl_dn_snk.b{b}.t{t}"), b);
                    terms.push((src, 1.0));
                    terms.push((snk, -1.0));
                }
                let row = self.pb.add_row(
                    format!("dhn_node.n{ni}.{n_pos}.t{t}"),
                    terms,
                    Sense::Eq,
                    loss_here,
                    RowTag::Local,
                );
                self.meta.balance_rows.push((BalanceKind::Dhn, row));
            }
        }
        self.meta.pipe_flows.extend(flows);
        Ok(())
    }

    fn slack_var(&mut self, id: String, block: usize) -> usize {
        let v = self.pb.add_var(
            id,
            VarKind::Continuous,
            0.0,
            f64::INFINITY,
            Stage::Second,
            Some(block as u32),
        );
        let p = self.config.slack_penalty * self.scenario.horizon.step_hours;
        self.objective(v, p, p);
        self.meta.slack_vars.push(v);
        v
    }

    fn assert_penalty_dominates(&self) {
        let mut max_marginal: f64 = self
            .scenario
            .tariffs
            .grid_purchase_price
            .iter()
            .fold(0.0_f64, |a, b| a.max(*b))
            + self.eg_opex;
        for o in &self.scenario.catalog.options {
            let mut m = o.opex_var.abs() + o.gwp_op.abs();
            if let Some(c) = &o.conversion {
                // Heat-only mode prices electric inputs at the grid tariff.
                if c.input == Some(Carrier::Electricity) {
                    m += max_marginal / c.efficiency;
                }
            }
            max_marginal = max_marginal.max(m);
        }
        for v in self.scenario.tariffs.direct_marketing_remuneration.values() {
            max_marginal = max_marginal.max(*v);
        }
        assert!(
            self.config.slack_penalty > max_marginal,
            "slack penalty {} does not dominate catalog marginal cost {}",
            self.config.slack_penalty,
            max_marginal
        );
    }

    fn in_network(&self, b: usize) -> bool {
        self.structure
            .networks
            .iter()
            .any(|n| n.members.contains(&b))
    }

    fn in_sharing_group(&self, b: usize) -> bool {
        self.structure
            .groups
            .iter()
            .any(|g| g.len() >= 2 && g.contains(&b))
    }

    /// Whether an option participates under the current mode at building b.
    fn include_option(&self, o: &TechnologyOption, b: usize) -> bool {
        if self.scenario.tariffs.banned_kinds.contains(&o.kind) {
            return false;
        }
        if o.kind == TechKind::Eg {
            return false;
        }
        if o.kind == TechKind::He {
            return self.in_network(b);
        }
        if self.config.heat_only {
            if let Some(st) = o.storage.as_ref() {
                let _ = st;
                return o.storage_carrier() == Some(Carrier::Heat);
            }
            if let Some(c) = &o.conversion {
                // Keep heat producers; electric inputs are priced at tariff.
                return c.output == Carrier::Heat;
            }
            return false;
        }
        o.conversion.is_some() || o.storage.is_some()
    }

    fn build_building(&mut self, b: usize, t_steps: usize) -> Result<BuildingVars, ModelError> {
        let scenario = self.scenario;
        let building = &scenario.buildings[b];
        let block = Some(b as u32);
        let dh = scenario.horizon.step_hours;

        let mut instances: Vec<TechInstance> = Vec::new();

        // Existing assets: dispatch-only instances with fixed capacity.
        for asset in &building.existing_assets {
            let option = scenario
                .catalog
                .option(&asset.option)
                .ok_or_else(|| ModelError::Structure(format!("unknown asset {}", asset.option)))?;
            if !self.include_option(option, b) {
                continue;
            }
            instances.push(TechInstance {
                option,
                existing_capacity: Some(asset.capacity),
                install_slot: None,
                activity: Vec::new(),
                soc: Vec::new(),
                charge: Vec::new(),
                discharge: Vec::new(),
            });
        }
        // Sizable catalog options.
        for option in &scenario.catalog.options {
            if !self.include_option(option, b) {
                continue;
            }
            instances.push(TechInstance {
                option,
                existing_capacity: None,
                install_slot: None,
                activity: Vec::new(),
                soc: Vec::new(),
                charge: Vec::new(),
                discharge: Vec::new(),
            });
        }

        // Investment variables and sizing rows (F17).
        for inst in &mut instances {
            if inst.existing_capacity.is_some() {
                continue;
            }
            let o = inst.option;
            let xb = self.pb.add_var(
                format!("xb.b{b}.{}", o.id),
                VarKind::Binary,
                0.0,
                1.0,
                Stage::First,
                block,
            );
            let xd = self.pb.add_var(
                format!("xd.b{b}.{}", o.id),
                VarKind::Continuous,
                0.0,
                o.p_max,
                Stage::First,
                block,
            );
            self.pb.add_row(
                format!("f17max.b{b}.{}", o.id),
                vec![(xd, 1.0), (xb, -o.p_max)],
                Sense::Le,
                0.0,
                RowTag::Local,
            );
            if o.p_min > 0.0 {
                self.pb.add_row(
                    format!("f17min.b{b}.{}", o.id),
                    vec![(xb, o.p_min), (xd, -1.0)],
                    Sense::Le,
                    0.0,
                    RowTag::Local,
                );
            }
            let sub = scenario.tariffs.subsidy(o.kind);
            self.objective(xb, (o.capex_fix - sub.lump_sum) / o.pvf, o.gwp_fix);
            self.objective(xd, (o.capex_var - sub.proportional) / o.pvf, o.gwp_var);
            inst.install_slot = Some(self.meta.installs.len());
            self.meta.installs.push(InstallVars {
                building: b,
                option_id: o.id.clone(),
                bin: xb,
                dim: xd,
            });
        }

        // Exclusivity rows: heating technologies, batteries, size classes.
        let existing_heating = instances
            .iter()
            .filter(|i| i.existing_capacity.is_some() && i.option.kind.is_heating())
            .count();
        let heating_bins: Vec<usize> = instances
            .iter()
            .filter(|i| i.install_slot.is_some() && i.option.kind.is_heating())
            .map(|i| self.meta.installs[i.install_slot.unwrap()].bin)
            .collect();
        if !heating_bins.is_empty() {
            let rhs = (1usize.saturating_sub(existing_heating)) as f64;
            self.pb.add_row(
                format!("excl_heat.b{b}"),
                heating_bins.iter().map(|&v| (v, 1.0)).collect(),
                Sense::Le,
                rhs,
                RowTag::Local,
            );
        }
        let existing_battery = instances
            .iter()
            .filter(|i| i.existing_capacity.is_some() && i.option.kind.is_battery())
            .count();
        let battery_bins: Vec<usize> = instances
            .iter()
            .filter(|i| i.install_slot.is_some() && i.option.kind.is_battery())
            .map(|i| self.meta.installs[i.install_slot.unwrap()].bin)
            .collect();
        if !battery_bins.is_empty() {
            let rhs = (1usize.saturating_sub(existing_battery)) as f64;
            self.pb.add_row(
                format!("excl_bat.b{b}"),
                battery_bins.iter().map(|&v| (v, 1.0)).collect(),
                Sense::Le,
                rhs,
                RowTag::Local,
            );
        }
        for kind in TechKind::ALL {
            if kind.is_heating() || kind.is_battery() {
                continue;
            }
            let bins: Vec<usize> = instances
                .iter()
                .filter(|i| i.install_slot.is_some() && i.option.kind == kind)
                .map(|i| self.meta.installs[i.install_slot.unwrap()].bin)
                .collect();
            if bins.len() >= 2 {
                self.pb.add_row(
                    format!("excl_{kind}.b{b}"),
                    bins.iter().map(|&v| (v, 1.0)).collect(),
                    Sense::Le,
                    1.0,
                    RowTag::Local,
                );
            }
        }

        // Roof area (F16) over solar size variables.
        let mut roof_terms = Vec::new();
        let mut existing_solar = 0.0;
        for inst in &instances {
            if !inst.option.kind.is_solar() {
                continue;
            }
            match inst.install_slot {
                Some(slot) => roof_terms.push((self.meta.installs[slot].dim, 1.0)),
                None => existing_solar += inst.existing_capacity.unwrap_or(0.0),
            }
        }
        if !roof_terms.is_empty() {
            self.pb.add_row(
                format!("f16roof.b{b}"),
                roof_terms,
                Sense::Le,
                (building.roof_area - existing_solar).max(0.0),
                RowTag::Local,
            );
        }

        // Insulation choice (F15) and thermal coverage (F19).
        let mut ir_vars = Vec::new();
        for ir in &building.thermal_demand_by_ir {
            let v = self.pb.add_var(
                format!("ir.b{b}.{}", ir.id),
                VarKind::Binary,
                0.0,
                1.0,
                Stage::First,
                block,
            );
            self.objective(v, ir.capex_fix / ir.pvf, ir.gwp_fix);
            self.meta.ir_choices.push(IrVars {
                building: b,
                ir_id: ir.id.clone(),
                var: v,
            });
            ir_vars.push(v);
        }
        self.pb.add_row(
            format!("f15.b{b}"),
            ir_vars.iter().map(|&v| (v, 1.0)).collect(),
            Sense::Eq,
            1.0,
            RowTag::Local,
        );

        let max_demand: f64 = building
            .thermal_demand_by_ir
            .iter()
            .flat_map(|ir| ir.series.iter())
            .fold(0.0, |a, b| a.max(*b));
        let big_m = 1.1 * max_demand;

        let mut to_tl = Vec::with_capacity(t_steps);
        for t in 0..t_steps {
            let cap = building
                .thermal_demand_by_ir
                .iter()
                .map(|ir| ir.series[t])
                .fold(0.0, f64::max);
            let v = self.pb.add_var(
                format!("tl.b{b}.t{t}"),
                VarKind::Continuous,
                0.0,
                cap,
                Stage::Second,
                block,
            );
            to_tl.push(v);
        }
        for (k, ir) in building.thermal_demand_by_ir.iter().enumerate() {
            for t in 0..t_steps {
                self.pb.add_row(
                    format!("f19.b{b}.{}.t{t}", ir.id),
                    vec![(to_tl[t], 1.0), (ir_vars[k], -big_m)],
                    Sense::Ge,
                    ir.series[t] - big_m,
                    RowTag::Local,
                );
            }
        }

        // Electric load coverage (F20) with the delivery variable pinned to
        // the demand by its bounds.
        let mut to_el = Vec::new();
        if !self.config.heat_only {
            for t in 0..t_steps {
                let demand = building.electric_demand[t];
                let v = self.pb.add_var(
                    format!("el.b{b}.t{t}"),
                    VarKind::Continuous,
                    0.0,
                    demand,
                    Stage::Second,
                    block,
                );
                self.pb.add_row(
                    format!("f20.b{b}.t{t}"),
                    vec![(v, 1.0)],
                    Sense::Ge,
                    demand,
                    RowTag::Local,
                );
                to_el.push(v);
            }
        }

        // Dispatch variables per technology instance.
        let grid_price = &scenario.tariffs.grid_purchase_price;
        for (inst_idx, inst) in instances.iter_mut().enumerate() {
            let o = inst.option;
            let cap = inst.existing_capacity;
            let dim_var = inst
                .install_slot
                .map(|slot| self.meta.installs[slot].dim);
            if let Some(conv) = &o.conversion {
                for t in 0..t_steps {
                    let avail = conv
                        .availability
                        .as_ref()
                        .map(|a| a[t])
                        .unwrap_or(1.0);
                    let upper = match cap {
                        Some(c) => avail * c,
                        None => f64::INFINITY,
                    };
                    let y = self.pb.add_var(
                        format!("y.b{b}.{}.{inst_idx}.t{t}", o.id),
                        VarKind::Continuous,
                        0.0,
                        upper,
                        Stage::Second,
                        block,
                    );
                    if let Some(xd) = dim_var {
                        // F18 linking dispatch to the sized capacity.
                        self.pb.add_row(
                            format!("f18.b{b}.{}.t{t}", o.id),
                            vec![(y, 1.0), (xd, -avail)],
                            Sense::Le,
                            0.0,
                            RowTag::Local,
                        );
                    }
                    // Heat-only mode folds the electric input price into the
                    // marginal cost instead of balancing electricity.
                    let mut opex = o.opex_var;
                    let mut gwp = o.gwp_op;
                    if self.config.heat_only && conv.input == Some(Carrier::Electricity) {
                        opex += (grid_price[t] + self.eg_opex) / conv.efficiency;
                        gwp += self.eg_gwp / conv.efficiency;
                    }
                    self.objective(y, opex * dh / o.pvf, gwp * dh);
                    inst.activity.push(y);
                }
            }
            if let Some(st) = &o.storage {
                let carrier = inst.option.storage_carrier().unwrap();
                if self.config.heat_only && carrier != Carrier::Heat {
                    continue;
                }
                for t in 0..t_steps {
                    let bound = |rate: f64| cap.map(|c| rate * c).unwrap_or(f64::INFINITY);
                    let soc = self.pb.add_var(
                        format!("soc.b{b}.{}.{inst_idx}.t{t}", o.id),
                        VarKind::Continuous,
                        0.0,
                        cap.unwrap_or(f64::INFINITY),
                        Stage::Second,
                        block,
                    );
                    let ch = self.pb.add_var(
                        format!("ch.b{b}.{}.{inst_idx}.t{t}", o.id),
                        VarKind::Continuous,
                        0.0,
                        bound(st.c_rate_charge),
                        Stage::Second,
                        block,
                    );
                    let dis = self.pb.add_var(
                        format!("dis.b{b}.{}.{inst_idx}.t{t}", o.id),
                        VarKind::Continuous,
                        0.0,
                        bound(st.c_rate_discharge),
                        Stage::Second,
                        block,
                    );
                    self.objective(dis, o.opex_var * dh / o.pvf, o.gwp_op * dh);
                    inst.soc.push(soc);
                    inst.charge.push(ch);
                    inst.discharge.push(dis);
                }
                let st = o.storage.as_ref().unwrap();
                for t in 0..t_steps {
                    let prev = (t + t_steps - 1) % t_steps;
                    // Cyclic SOC dynamics with standing loss.
                    self.pb.add_row(
                        format!("soc_dyn.b{b}.{}.{inst_idx}.t{t}", o.id),
                        vec![
                            (inst.soc[t], 1.0),
                            (inst.soc[prev], -(1.0 - st.loss_per_step)),
                            (inst.charge[t], -st.eta_charge * dh),
                            (inst.discharge[t], dh / st.eta_discharge),
                        ],
                        Sense::Eq,
                        0.0,
                        RowTag::Local,
                    );
                    if let Some(xd) = dim_var {
                        self.pb.add_row(
                            format!("soc_cap.b{b}.{}.{inst_idx}.t{t}", o.id),
                            vec![(inst.soc[t], 1.0), (xd, -1.0)],
                            Sense::Le,
                            0.0,
                            RowTag::Local,
                        );
                        self.pb.add_row(
                            format!("ch_cap.b{b}.{}.{inst_idx}.t{t}", o.id),
                            vec![(inst.charge[t], 1.0), (xd, -st.c_rate_charge)],
                            Sense::Le,
                            0.0,
                            RowTag::Local,
                        );
                        self.pb.add_row(
                            format!("dis_cap.b{b}.{}.{inst_idx}.t{t}", o.id),
                            vec![(inst.discharge[t], 1.0), (xd, -st.c_rate_discharge)],
                            Sense::Le,
                            0.0,
                            RowTag::Local,
                        );
                    }
                }
            }
        }

        // Market and exchange variables.
        let mut from_ep = Vec::new();
        let mut to_dm: Vec<(TechKind, Vec<usize>)> = Vec::new();
        let mut exchange = ExchangeVars {
            building: b,
            ..Default::default()
        };
        if !self.config.heat_only {
            for t in 0..t_steps {
                let v = self.pb.add_var(
                    format!("ep.b{b}.t{t}"),
                    VarKind::Continuous,
                    0.0,
                    f64::INFINITY,
                    Stage::Second,
                    block,
                );
                self.objective(
                    v,
                    (grid_price[t] + self.eg_opex) * dh / self.eg_pvf,
                    self.eg_gwp * dh,
                );
                from_ep.push(v);
            }
            if scenario.tariffs.demand_charge > 0.0 {
                let peak = self.pb.add_var(
                    format!("peak.b{b}"),
                    VarKind::Continuous,
                    0.0,
                    f64::INFINITY,
                    Stage::Second,
                    block,
                );
                self.objective(peak, scenario.tariffs.demand_charge, 0.0);
                for t in 0..t_steps {
                    self.pb.add_row(
                        format!("peak.b{b}.t{t}"),
                        vec![(peak, 1.0), (from_ep[t], -1.0)],
                        Sense::Ge,
                        0.0,
                        RowTag::Local,
                    );
                }
            }
            // Direct marketing per remunerated source kind.
            for (&kind, &rate) in &scenario.tariffs.direct_marketing_remuneration {
                let produces: Vec<(usize, f64)> = el_output_terms_of_kind(&instances, kind);
                if produces.is_empty() {
                    continue;
                }
                let mut vars = Vec::with_capacity(t_steps);
                for t in 0..t_steps {
                    let v = self.pb.add_var(
                        format!("dm.b{b}.{kind}.t{t}"),
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                        Stage::Second,
                        block,
                    );
                    self.objective(v, -rate * dh / self.eg_pvf, 0.0);
                    let mut terms = vec![(v, 1.0)];
                    for &(inst_idx, ratio) in &produces {
                        terms.push((instances[inst_idx].activity[t], -ratio));
                    }
                    self.pb.add_row(
                        format!("dm_cap.b{b}.{kind}.t{t}"),
                        terms,
                        Sense::Le,
                        0.0,
                        RowTag::Local,
                    );
                    vars.push(v);
                }
                to_dm.push((kind, vars));
            }
            if self.in_sharing_group(b) {
                for t in 0..t_steps {
                    exchange.to_es.push(self.pb.add_var(
                        format!("es_out.b{b}.t{t}"),
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                        Stage::Second,
                        block,
                    ));
                    exchange.from_es.push(self.pb.add_var(
                        format!("es_in.b{b}.t{t}"),
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                        Stage::Second,
                        block,
                    ));
                }
            }
        }
        if self.in_network(b) {
            let he_terms: Vec<(usize, f64)> = instances
                .iter()
                .filter(|i| i.option.kind == TechKind::He && i.install_slot.is_some())
                .map(|i| (self.meta.installs[i.install_slot.unwrap()].dim, -1.0))
                .collect();
            let existing_he: f64 = instances
                .iter()
                .filter(|i| i.option.kind == TechKind::He)
                .filter_map(|i| i.existing_capacity)
                .sum();
            if !he_terms.is_empty() || existing_he > 0.0 {
                for t in 0..t_steps {
                    let out = self.pb.add_var(
                        format!("dh_out.b{b}.t{t}"),
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                        Stage::Second,
                        block,
                    );
                    let inp = self.pb.add_var(
                        format!("dh_in.b{b}.t{t}"),
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                        Stage::Second,
                        block,
                    );
                    for (dir, v) in [("out", out), ("in", inp)] {
                        let mut terms = vec![(v, 1.0)];
                        terms.extend(he_terms.iter().copied());
                        self.pb.add_row(
                            format!("he_cap_{dir}.b{b}.t{t}"),
                            terms,
                            Sense::Le,
                            existing_he,
                            RowTag::Local,
                        );
                    }
                    exchange.to_dhn.push(out);
                    exchange.from_dhn.push(inp);
                }
            }
        }

        // Sellable-pool cap: shared energy and direct marketing come from
        // own generation and storage discharge, not from the grid.
        if !self.config.heat_only && (!exchange.to_es.is_empty() || !to_dm.is_empty()) {
            for t in 0..t_steps {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                if !exchange.to_es.is_empty() {
                    terms.push((exchange.to_es[t], 1.0));
                }
                for (_, vars) in &to_dm {
                    terms.push((vars[t], 1.0));
                }
                if terms.is_empty() {
                    continue;
                }
                for inst in &instances {
                    for (v, ratio) in el_outputs(inst, t) {
                        terms.push((v, -ratio));
                    }
                    if !inst.discharge.is_empty()
                        && inst.option.storage_carrier() == Some(Carrier::Electricity)
                    {
                        terms.push((inst.discharge[t], -1.0));
                    }
                }
                self.pb.add_row(
                    format!("sell_cap.b{b}.t{t}"),
                    terms,
                    Sense::Le,
                    0.0,
                    RowTag::Local,
                );
            }
        }

        // Node balances per carrier and step.
        let carriers: Vec<Carrier> = {
            let mut c = vec![Carrier::Heat];
            if !self.config.heat_only {
                c.push(Carrier::Electricity);
            }
            for inst in &instances {
                if let Some(conv) = &inst.option.conversion {
                    for carrier in conv
                        .input
                        .iter()
                        .chain(std::iter::once(&conv.output))
                        .chain(conv.secondary.iter().map(|s| &s.carrier))
                    {
                        if matches!(carrier, Carrier::Hydrogen | Carrier::Gas) && !c.contains(carrier)
                        {
                            c.push(*carrier);
                        }
                    }
                }
                if let Some(carrier) = inst.option.storage_carrier() {
                    if matches!(carrier, Carrier::Hydrogen | Carrier::Gas) && !c.contains(&carrier) {
                        c.push(carrier);
                    }
                }
            }
            c
        };

        for carrier in carriers {
            for t in 0..t_steps {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                for inst in &instances {
                    if let Some(conv) = &inst.option.conversion {
                        if inst.activity.is_empty() {
                            continue;
                        }
                        let y = inst.activity[t];
                        if conv.output == carrier {
                            terms.push((y, 1.0));
                        }
                        for sec in &conv.secondary {
                            if sec.carrier == carrier {
                                terms.push((y, sec.ratio));
                            }
                        }
                        if conv.input == Some(carrier)
                            && !(self.config.heat_only && carrier == Carrier::Electricity)
                        {
                            terms.push((y, -1.0 / conv.efficiency));
                        }
                    }
                    if inst.option.storage_carrier() == Some(carrier) && !inst.soc.is_empty() {
                        terms.push((inst.discharge[t], 1.0));
                        terms.push((inst.charge[t], -1.0));
                    }
                }
                let kind = match carrier {
                    Carrier::Electricity => {
                        terms.push((from_ep[t], 1.0));
                        if !exchange.to_es.is_empty() {
                            terms.push((exchange.from_es[t], 1.0));
                            terms.push((exchange.to_es[t], -1.0));
                        }
                        for (_, vars) in &to_dm {
                            terms.push((vars[t], -1.0));
                        }
                        terms.push((to_el[t], -1.0));
                        let src = self.slack_var(format!("sl_el_src.b{b}.t{t}"), b);
                        let snk = self.slack_var(format!("sl_el_snk.b{b}.t{t}"), b);
                        terms.push((src, 1.0));
                        terms.push((snk, -1.0));
                        Some(BalanceKind::Electric)
                    }
                    Carrier::Heat => {
                        if !exchange.to_dhn.is_empty() {
                            terms.push((exchange.from_dhn[t], 1.0));
                            terms.push((exchange.to_dhn[t], -1.0));
                        }
                        terms.push((to_tl[t], -1.0));
                        let src = self.slack_var(format!("sl_th_src.b{b}.t{t}"), b);
                        let snk = self.slack_var(format!("sl_th_snk.b{b}.t{t}"), b);
                        terms.push((src, 1.0));
                        terms.push((snk, -1.0));
                        Some(BalanceKind::Thermal)
                    }
                    // Internal carriers balance technology flows only.
                    Carrier::Hydrogen | Carrier::Gas => None,
                };
                if terms.is_empty() {
                    continue;
                }
                let row = self.pb.add_row(
                    format!("node_{carrier:?}.b{b}.t{t}").to_lowercase(),
                    terms,
                    Sense::Eq,
                    0.0,
                    RowTag::Local,
                );
                if let Some(kind) = kind {
                    self.meta.balance_rows.push((kind, row));
                }
            }
        }

        self.meta.exchange.push(exchange);
        Ok(BuildingVars {})
    }
}

/// Electric output terms of one instance at step t: (var, ratio).
fn el_outputs(inst: &TechInstance, t: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    if let Some(conv) = &inst.option.conversion {
        if inst.activity.is_empty() {
            return out;
        }
        let y = inst.activity[t];
        if conv.output == Carrier::Electricity {
            out.push((y, 1.0));
        }
        for sec in &conv.secondary {
            if sec.carrier == Carrier::Electricity {
                out.push((y, sec.ratio));
            }
        }
    }
    out
}

/// Instances of one kind producing electricity: (instance index, ratio).
fn el_output_terms_of_kind(instances: &[TechInstance], kind: TechKind) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        if inst.option.kind != kind {
            continue;
        }
        if let Some(conv) = &inst.option.conversion {
            if conv.output == Carrier::Electricity {
                out.push((i, 1.0));
            } else if let Some(sec) = conv
                .secondary
                .iter()
                .find(|s| s.carrier == Carrier::Electricity)
            {
                out.push((i, sec.ratio));
            }
        }
    }
    out
}

struct BuildingVars {}

fn validate_structure(scenario: &Scenario, s: &StructureDecision) -> Result<(), ModelError> {
    if s.buildings.is_empty() {
        return Err(ModelError::Structure("empty cluster".into()));
    }
    for w in s.buildings.windows(2) {
        if w[0] >= w[1] {
            return Err(ModelError::Structure(
                "cluster buildings must be ascending and unique".into(),
            ));
        }
    }
    for &b in &s.buildings {
        if b >= scenario.buildings.len() {
            return Err(ModelError::Structure(format!("unknown building index {b}")));
        }
    }
    let mut seen = vec![false; scenario.buildings.len()];
    for g in &s.groups {
        for &b in g {
            if !s.buildings.contains(&b) {
                return Err(ModelError::Structure(format!(
                    "group member {b} outside cluster"
                )));
            }
            if seen[b] {
                return Err(ModelError::Structure(format!(
                    "building {b} in two sharing groups"
                )));
            }
            seen[b] = true;
        }
    }
    for &b in &s.buildings {
        if !seen[b] {
            return Err(ModelError::Structure(format!(
                "building {b} missing from sharing groups"
            )));
        }
    }
    let mut in_net = vec![false; scenario.buildings.len()];
    for net in &s.networks {
        for &b in &net.members {
            if !s.buildings.contains(&b) {
                return Err(ModelError::Structure(format!(
                    "network member {b} outside cluster"
                )));
            }
            if in_net[b] {
                return Err(ModelError::Structure(format!(
                    "building {b} in two networks"
                )));
            }
            in_net[b] = true;
        }
        for p in &net.pipes {
            if p.edge_index >= scenario.route_graph.edges.len() {
                return Err(ModelError::Structure(format!(
                    "unknown edge index {}",
                    p.edge_index
                )));
            }
            if p.class_index >= scenario.dhn_pipe_classes.len() {
                return Err(ModelError::Structure(format!(
                    "unknown pipe class {}",
                    p.class_index
                )));
            }
            if p.loss_series_kw.len() != scenario.steps() {
                return Err(ModelError::Structure(
                    "pipe loss series length mismatch".into(),
                ));
            }
        }
    }
    Ok(())
}
