//! Price-coordinated decomposition of coupled dispatch problems.
//!
//! The inter-building balance rows (energy sharing, heat network) are
//! relaxed with per-step shadow prices, which fully separates the operation
//! problem into per-building LPs. An inner loop adjusts the prices with a
//! sign-based resilient step rule until the relaxed balances close; an
//! outer loop applies a proportional quantity adjustment when price
//! coordination alone stalls (the flat-cost case). At convergence the
//! coupling-row duals are the final prices, exact by strong duality of the
//! separable LP.

use crate::milp::{
    solve_lp_warm, Basis, LpConfig, LpStatus, MilpError, MilpProblem, RowTag,
};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct LrConfig {
    pub lp: LpConfig,
    /// Relative gap threshold of the coordination loop.
    pub eps_gap: f64,
    /// Residual tolerance per relaxed row, kWh-scale.
    pub eps_residual: f64,
    pub inner_cap: usize,
    pub outer_cap: usize,
    /// Initial price step size.
    pub alpha: f64,
    /// Step growth on repeated residual sign.
    pub eta_plus: f64,
    /// Step shrink on residual sign flip.
    pub eta_minus: f64,
    /// Initial price per carrier (applied with a negative sign so that
    /// sellers are paid; see `separate`).
    pub initial_price_el: f64,
    pub initial_price_th: f64,
    /// Price magnitude that triggers the shift rule.
    pub price_ceiling: f64,
    /// Slack penalty price the shift rule snaps to; also the price bound.
    pub slack_price: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            lp: LpConfig::default(),
            eps_gap: 1e-3,
            eps_residual: 1e-3,
            inner_cap: 500,
            outer_cap: 10,
            alpha: 0.1,
            eta_plus: 1.2,
            eta_minus: 0.5,
            initial_price_el: 0.3,
            initial_price_th: 0.2,
            price_ceiling: 2.0,
            slack_price: 1e4,
        }
    }
}

#[derive(Debug, Error)]
pub enum LrError {
    #[error("structure error: {0}")]
    Structure(String),
    #[error(transparent)]
    Solver(#[from] MilpError),
}

/// Carrier of one relaxed coupling row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingCarrier {
    Electric,
    Thermal,
}

/// Separable view of a subproblem: per-building blocks plus coupling rows.
#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub blocks: Vec<BlockDef>,
    pub coupling: Vec<CouplingRowDef>,
}

#[derive(Debug, Clone)]
pub struct BlockDef {
    pub id: u32,
    /// Variable indices in the subproblem.
    pub vars: Vec<usize>,
    /// Local row indices in the subproblem.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CouplingRowDef {
    /// Row index in the subproblem.
    pub row: usize,
    pub carrier: CouplingCarrier,
}

/// Builds the block structure of a subproblem, or explains why it is not
/// separable (a coupling row touching an unassigned variable, or a local
/// row spanning two blocks).
pub fn block_structure(sub: &MilpProblem) -> Result<BlockStructure, LrError> {
    let mut blocks: BTreeMap<u32, BlockDef> = BTreeMap::new();
    for (j, v) in sub.variables.iter().enumerate() {
        if let Some(b) = v.block {
            blocks.entry(b).or_insert_with(|| BlockDef {
                id: b,
                vars: Vec::new(),
                rows: Vec::new(),
            });
            blocks.get_mut(&b).unwrap().vars.push(j);
        }
    }
    let mut coupling = Vec::new();
    for (r, c) in sub.constraints.iter().enumerate() {
        match c.tag {
            RowTag::CouplingEs | RowTag::CouplingDhn => {
                for &(j, _) in &c.terms {
                    if sub.variables[j].block.is_none() {
                        return Err(LrError::Structure(format!(
                            "coupling row {} touches unassigned variable {}",
                            c.id, sub.variables[j].id
                        )));
                    }
                }
                coupling.push(CouplingRowDef {
                    row: r,
                    carrier: if c.tag == RowTag::CouplingEs {
                        CouplingCarrier::Electric
                    } else {
                        CouplingCarrier::Thermal
                    },
                });
            }
            RowTag::Local => {
                let mut owner: Option<u32> = None;
                for &(j, _) in &c.terms {
                    match sub.variables[j].block {
                        None => {
                            return Err(LrError::Structure(format!(
                                "local row {} touches unassigned variable {}",
                                c.id, sub.variables[j].id
                            )))
                        }
                        Some(b) => match owner {
                            None => owner = Some(b),
                            Some(o) if o != b => {
                                return Err(LrError::Structure(format!(
                                    "local row {} spans blocks {o} and {b}",
                                    c.id
                                )))
                            }
                            _ => {}
                        },
                    }
                }
                if let Some(b) = owner {
                    blocks.get_mut(&b).unwrap().rows.push(r);
                }
            }
        }
    }
    Ok(BlockStructure {
        blocks: blocks.into_values().collect(),
        coupling,
    })
}

/// Coordination prices per relaxed row. Sign convention: the relaxed
/// objective gains `+lambda * (row lhs - rhs)`, so at a market equilibrium
/// lambda is the negative of the energy price sellers receive.
#[derive(Debug, Clone)]
pub struct PriceVector {
    pub lambda: Vec<f64>,
    pub carrier: Vec<CouplingCarrier>,
}

impl PriceVector {
    pub fn price_el(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.carrier)
            .filter(|(_, c)| **c == CouplingCarrier::Electric)
            .map(|(l, _)| *l)
            .collect()
    }
}

/// Sign-based step state per relaxed row.
#[derive(Debug, Clone)]
pub struct RpropState {
    pub step: Vec<f64>,
    pub prev_sign: Vec<i8>,
    pub alpha: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub first_done: Vec<bool>,
}

impl RpropState {
    pub fn new(n: usize, cfg: &LrConfig) -> Self {
        RpropState {
            step: vec![cfg.alpha; n],
            prev_sign: vec![0; n],
            alpha: cfg.alpha,
            eta_plus: cfg.eta_plus,
            eta_minus: cfg.eta_minus,
            first_done: vec![false; n],
        }
    }
}

/// One resilient-step price update. Prices move only where the residual
/// exceeds the tolerance; the step grows on a repeated sign, shrinks on a
/// flip, and freezes on a zero residual. Prices beyond the ceiling snap to
/// the slack price (shift rule), and never exceed it.
pub fn rprop_update(
    prices: &mut PriceVector,
    state: &mut RpropState,
    residuals: &[f64],
    eps_residual: f64,
    price_ceiling: f64,
    slack_price: f64,
) {
    for (r, &res) in residuals.iter().enumerate() {
        if res.abs() <= eps_residual {
            state.prev_sign[r] = 0;
            continue;
        }
        let sign: i8 = if res > 0.0 { 1 } else { -1 };
        if state.first_done[r] {
            if state.prev_sign[r] != 0 {
                if state.prev_sign[r] == sign {
                    state.step[r] *= state.eta_plus;
                } else {
                    state.step[r] *= state.eta_minus;
                }
            }
        } else {
            state.step[r] = state.alpha;
            state.first_done[r] = true;
        }
        state.prev_sign[r] = sign;
        let l = &mut prices.lambda[r];
        *l += sign as f64 * state.step[r];
        if l.abs() > price_ceiling {
            *l = l.signum() * slack_price;
        }
        if l.abs() > slack_price {
            *l = l.signum() * slack_price;
        }
    }
}

/// Coordination bounds and convergence state.
#[derive(Debug, Clone)]
pub struct LrState {
    pub iteration: usize,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub gap_history: Vec<f64>,
    pub max_abs_residual: f64,
    pub lambda_max_el: f64,
    pub lambda_max_th: f64,
    pub eps_gap: f64,
    pub eps_residual: f64,
}

impl LrState {
    pub fn new(cfg: &LrConfig) -> Self {
        LrState {
            iteration: 0,
            upper_bound: f64::INFINITY,
            lower_bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            gap_history: Vec::new(),
            max_abs_residual: f64::INFINITY,
            lambda_max_el: 0.0,
            lambda_max_th: 0.0,
            eps_gap: cfg.eps_gap,
            eps_residual: cfg.eps_residual,
        }
    }

    /// Folds one iteration's relaxed objective and residuals into the
    /// monotone bounds: the upper bound is the price-weighted residual
    /// mass, the lower bound the best relaxed objective. The gap divides
    /// by the upper bound, falling back to the absolute difference at zero.
    pub fn update_bounds(
        &mut self,
        z_relaxed: f64,
        residuals: &[f64],
        carriers: &[CouplingCarrier],
        prices: &PriceVector,
    ) {
        self.iteration += 1;
        for (l, c) in prices.lambda.iter().zip(&prices.carrier) {
            match c {
                CouplingCarrier::Electric => {
                    self.lambda_max_el = self.lambda_max_el.max(l.abs())
                }
                CouplingCarrier::Thermal => {
                    self.lambda_max_th = self.lambda_max_th.max(l.abs())
                }
            }
        }
        let mut mass = 0.0;
        let mut max_res: f64 = 0.0;
        for (res, c) in residuals.iter().zip(carriers) {
            let lmax = match c {
                CouplingCarrier::Electric => self.lambda_max_el,
                CouplingCarrier::Thermal => self.lambda_max_th,
            };
            mass += res.abs() * lmax;
            max_res = max_res.max(res.abs());
        }
        self.upper_bound = self.upper_bound.min(mass);
        self.lower_bound = self.lower_bound.max(z_relaxed);
        self.max_abs_residual = max_res;
        self.gap = if self.upper_bound != 0.0 {
            (self.upper_bound - self.lower_bound) / self.upper_bound
        } else {
            (self.upper_bound - self.lower_bound).abs()
        };
        self.gap_history.push(self.gap);
    }

    /// (inner converged, outer converged). Inner accepts either the gap
    /// threshold or a three-iteration gap stall with all residuals inside
    /// tolerance; the outer loop accepts the gap threshold alone.
    pub fn converged(&self) -> (bool, bool) {
        let by_gap = self.gap < self.eps_gap;
        let n = self.gap_history.len();
        let stalled = n >= 4 && {
            let now = self.gap_history[n - 1];
            let then = self.gap_history[n - 4];
            (now - then).abs() <= 1e-9 * now.abs().max(1.0)
        };
        let inner = by_gap || (stalled && self.max_abs_residual <= self.eps_residual);
        (inner, by_gap)
    }
}

/// Initial coordination price from per-building levelized costs of energy:
/// the group's maximum.
pub fn initial_price_from_lcoe(lcoes: &[f64]) -> Option<f64> {
    lcoes.iter().copied().fold(None, |acc, v| {
        Some(match acc {
            None => v,
            Some(a) => a.max(v),
        })
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LrTraceRow {
    pub inner_iteration: usize,
    pub outer_iteration: usize,
    pub gap: f64,
    pub max_residual_el: f64,
    pub max_residual_th: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_mean: f64,
}

#[derive(Debug, Clone)]
pub struct LrResult {
    /// Subproblem objective of the assembled dispatch (original costs).
    pub w: f64,
    /// Dual value per subproblem row: coordination prices on coupling rows,
    /// per-building LP duals on local rows.
    pub row_duals: Vec<f64>,
    /// Assembled primal values over the subproblem variables.
    pub dispatch: Vec<f64>,
    pub converged: bool,
    /// Duals are exact (coordination converged without quantity caps).
    pub exact_duals: bool,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub trace: Vec<LrTraceRow>,
}

/// Warm-start data carried across Benders iterations of the same split.
#[derive(Debug, Default)]
pub struct LrWarm {
    pub lambda: Option<Vec<f64>>,
    pub bases: Vec<Option<Basis>>,
}

struct BlockProblem {
    problem: MilpProblem,
    /// Subproblem variable index per block variable.
    sub_vars: Vec<usize>,
    /// Subproblem row index per block row.
    sub_rows: Vec<usize>,
    /// (block var, coupling slot, coefficient) for the price terms.
    price_terms: Vec<(usize, usize, f64)>,
    base_objective: Vec<f64>,
    basis: Option<Basis>,
}

/// Solves a separable subproblem by price coordination. `rhs_eff` carries
/// the first-stage decision already substituted into every row.
pub fn solve(
    sub: &MilpProblem,
    rhs_eff: &[f64],
    structure: &BlockStructure,
    cfg: &LrConfig,
    warm: &mut LrWarm,
) -> Result<LrResult, LrError> {
    let n_coupling = structure.coupling.len();
    if structure.blocks.len() <= 1 || n_coupling == 0 {
        return Err(LrError::Structure(
            "nothing to relax: need >=2 blocks and coupling rows".into(),
        ));
    }

    // Per-block LPs with bounds we may cap in the outer loop.
    let mut blocks: Vec<BlockProblem> = structure
        .blocks
        .iter()
        .map(|def| build_block(sub, rhs_eff, structure, def))
        .collect();
    if warm.bases.len() == blocks.len() {
        for (bp, b) in blocks.iter_mut().zip(&warm.bases) {
            bp.basis = b.clone();
        }
    }

    let carriers: Vec<CouplingCarrier> = structure.coupling.iter().map(|c| c.carrier).collect();
    let mut prices = PriceVector {
        lambda: warm.lambda.clone().unwrap_or_else(|| {
            carriers
                .iter()
                .map(|c| match c {
                    CouplingCarrier::Electric => -cfg.initial_price_el,
                    CouplingCarrier::Thermal => -cfg.initial_price_th,
                })
                .collect()
        }),
        carrier: carriers.clone(),
    };
    let mut rprop = RpropState::new(n_coupling, cfg);
    let mut state = LrState::new(cfg);
    let mut trace = Vec::new();
    let mut quantity_capped = false;
    let mut inner_total = 0usize;
    let mut last_dispatch: Option<Vec<f64>> = None;
    let mut last_duals: Option<Vec<f64>> = None;
    let mut last_residuals = vec![f64::INFINITY; n_coupling];

    let base_obj = sub.objective_dense();

    let mut outer_used = 0usize;
    'outer: for outer in 0..cfg.outer_cap {
        outer_used = outer + 1;
        let mut inner_converged = false;
        for _ in 0..cfg.inner_cap {
            inner_total += 1;
            // Solve every block under the current prices.
            let mut dispatch = vec![0.0; sub.variables.len()];
            let mut duals = vec![0.0; sub.constraints.len()];
            let mut z = 0.0;
            for bp in blocks.iter_mut() {
                set_price_objective(bp, &prices.lambda);
                let (sol, basis) = solve_lp_warm(&bp.problem, &cfg.lp, bp.basis.as_ref())?;
                if sol.status != LpStatus::Optimal {
                    return Err(LrError::Structure(format!(
                        "building subproblem not optimal: {:?}",
                        sol.status
                    )));
                }
                bp.basis = Some(basis);
                z += sol.objective;
                for (k, &sv) in bp.sub_vars.iter().enumerate() {
                    dispatch[sv] = sol.x[k];
                }
                for (k, &sr) in bp.sub_rows.iter().enumerate() {
                    duals[sr] = sol.duals[k];
                }
            }
            // Constant price term: -lambda * rhs of each relaxed row.
            for (slot, c) in structure.coupling.iter().enumerate() {
                z -= prices.lambda[slot] * rhs_eff[c.row];
            }

            let residuals = coupling_residuals(sub, rhs_eff, structure, &dispatch);
            for (slot, c) in structure.coupling.iter().enumerate() {
                duals[c.row] = prices.lambda[slot];
            }
            state.update_bounds(z, &residuals, &carriers, &prices);
            push_trace(&mut trace, &state, inner_total, outer, &residuals, &carriers, &prices);
            last_dispatch = Some(dispatch);
            last_duals = Some(duals);
            last_residuals = residuals.clone();

            let (inner, _outer_ok) = state.converged();
            if inner {
                inner_converged = true;
                break;
            }
            rprop_update(
                &mut prices,
                &mut rprop,
                &residuals,
                cfg.eps_residual,
                cfg.price_ceiling,
                cfg.slack_price,
            );
        }

        let max_res = last_residuals.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if max_res <= cfg.eps_residual {
            // Residual certificate: the assembled dispatch satisfies the
            // relaxed rows, so it is feasible and optimal at these prices.
            break 'outer;
        }
        if !inner_converged && inner_total >= cfg.inner_cap * (outer + 1) {
            // Inner budget exhausted without small residuals; ration.
        }
        apply_quantity_adjustment(
            sub,
            rhs_eff,
            structure,
            &mut blocks,
            last_dispatch.as_ref().unwrap(),
            &last_residuals,
            cfg.eps_residual,
        );
        quantity_capped = true;
    }

    let dispatch = last_dispatch.unwrap_or_else(|| vec![0.0; sub.variables.len()]);
    let row_duals = last_duals.unwrap_or_else(|| vec![0.0; sub.constraints.len()]);
    let max_res = last_residuals.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let converged = max_res <= cfg.eps_residual;
    let w = base_obj
        .iter()
        .zip(&dispatch)
        .map(|(c, x)| c * x)
        .sum::<f64>();

    warm.lambda = Some(prices.lambda.clone());
    warm.bases = blocks.iter().map(|b| b.basis.clone()).collect();

    Ok(LrResult {
        w,
        row_duals,
        dispatch,
        converged,
        exact_duals: converged && !quantity_capped,
        inner_iterations: inner_total,
        outer_iterations: outer_used,
        trace,
    })
}

/// Per-building problems after removing the coupling rows: each block keeps
/// its variables, rows and objective slice; the price terms are added per
/// iteration by `set_price_objective`.
fn build_block(
    sub: &MilpProblem,
    rhs_eff: &[f64],
    structure: &BlockStructure,
    def: &BlockDef,
) -> BlockProblem {
    let mut local_of_sub = vec![usize::MAX; sub.variables.len()];
    let mut problem = MilpProblem {
        variables: Vec::with_capacity(def.vars.len()),
        constraints: Vec::with_capacity(def.rows.len()),
        objective: Vec::new(),
    };
    for (k, &sv) in def.vars.iter().enumerate() {
        local_of_sub[sv] = k;
        problem.variables.push(sub.variables[sv].clone());
    }
    for &sr in &def.rows {
        let src = &sub.constraints[sr];
        problem.constraints.push(crate::milp::Constraint {
            id: src.id.clone(),
            terms: src
                .terms
                .iter()
                .map(|&(j, a)| (local_of_sub[j], a))
                .collect(),
            sense: src.sense,
            rhs: rhs_eff[sr],
            tag: RowTag::Local,
        });
    }
    let dense = sub.objective_dense();
    let base_objective: Vec<f64> = def.vars.iter().map(|&sv| dense[sv]).collect();
    let mut price_terms = Vec::new();
    for (slot, c) in structure.coupling.iter().enumerate() {
        for &(j, a) in &sub.constraints[c.row].terms {
            if local_of_sub[j] != usize::MAX {
                price_terms.push((local_of_sub[j], slot, a));
            }
        }
    }
    BlockProblem {
        problem,
        sub_vars: def.vars.clone(),
        sub_rows: def.rows.clone(),
        price_terms,
        base_objective,
        basis: None,
    }
}

fn set_price_objective(bp: &mut BlockProblem, lambda: &[f64]) {
    let mut obj = bp.base_objective.clone();
    for &(v, slot, a) in &bp.price_terms {
        obj[v] += lambda[slot] * a;
    }
    bp.problem.objective = obj
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c != 0.0)
        .collect();
}

/// Signed violation of every relaxed row at the assembled dispatch.
pub fn coupling_residuals(
    sub: &MilpProblem,
    rhs_eff: &[f64],
    structure: &BlockStructure,
    dispatch: &[f64],
) -> Vec<f64> {
    structure
        .coupling
        .iter()
        .map(|c| {
            MilpProblem::eval_terms(&sub.constraints[c.row].terms, dispatch) - rhs_eff[c.row]
        })
        .collect()
}

/// Proportional rationing: a surplus residual scales every seller's upper
/// bound down to the traded volume, a deficit caps the buyers. This drives
/// the residual to zero while preserving the price signal.
fn apply_quantity_adjustment(
    sub: &MilpProblem,
    _rhs_eff: &[f64],
    structure: &BlockStructure,
    blocks: &mut [BlockProblem],
    dispatch: &[f64],
    residuals: &[f64],
    eps_residual: f64,
) {
    let mut sub_to_block: Vec<Option<(usize, usize)>> = vec![None; sub.variables.len()];
    for (bi, bp) in blocks.iter().enumerate() {
        for (k, &sv) in bp.sub_vars.iter().enumerate() {
            sub_to_block[sv] = Some((bi, k));
        }
    }
    for (slot, c) in structure.coupling.iter().enumerate() {
        let res = residuals[slot];
        if res.abs() <= eps_residual {
            continue;
        }
        let row = &sub.constraints[c.row];
        let seller_side = res > 0.0;
        let mut side_total = 0.0;
        for &(j, a) in &row.terms {
            if (a > 0.0) == seller_side {
                side_total += a.abs() * dispatch[j];
            }
        }
        if side_total <= eps_residual {
            continue;
        }
        let factor = (1.0 - res.abs() / side_total).max(0.0);
        for &(j, a) in &row.terms {
            if (a > 0.0) != seller_side {
                continue;
            }
            if let Some((bi, k)) = sub_to_block[j] {
                let v = &mut blocks[bi].problem.variables[k];
                let capped = dispatch[j] * factor;
                v.upper = v.upper.min(capped.max(0.0));
                // A capped bound invalidates the stored basis only rarely;
                // the warm path revalidates and falls back if needed.
            }
        }
    }
}

fn push_trace(
    trace: &mut Vec<LrTraceRow>,
    state: &LrState,
    inner: usize,
    outer: usize,
    residuals: &[f64],
    carriers: &[CouplingCarrier],
    prices: &PriceVector,
) {
    let mut max_el: f64 = 0.0;
    let mut max_th: f64 = 0.0;
    for (r, c) in residuals.iter().zip(carriers) {
        match c {
            CouplingCarrier::Electric => max_el = max_el.max(r.abs()),
            CouplingCarrier::Thermal => max_th = max_th.max(r.abs()),
        }
    }
    let n = prices.lambda.len().max(1) as f64;
    trace.push(LrTraceRow {
        inner_iteration: inner,
        outer_iteration: outer,
        gap: state.gap,
        max_residual_el: max_el,
        max_residual_th: max_th,
        lambda_min: prices.lambda.iter().copied().fold(f64::INFINITY, f64::min),
        lambda_max: prices
            .lambda
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        lambda_mean: prices.lambda.iter().sum::<f64>() / n,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, ProblemBuilder, Sense, Stage, VarKind};

    fn cfg() -> LrConfig {
        LrConfig::default()
    }

    /// Two buildings, one step: A generates up to 5 kWh at 0.10, B needs
    /// 5 kWh and can buy grid at 0.30 or shared energy.
    fn market_toy() -> MilpProblem {
        let mut b = ProblemBuilder::new();
        let gen_a = b.add_var("gen_a", VarKind::Continuous, 0.0, 5.0, Stage::Second, Some(0));
        let to_es = b.add_var("es_out_a", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, Some(0));
        let grid_b = b.add_var("ep_b", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, Some(1));
        let from_es = b.add_var("es_in_b", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, Some(1));
        // A: generated energy is either sold or dumped internally.
        b.add_row("a_balance", vec![(gen_a, 1.0), (to_es, -1.0)], Sense::Ge, 0.0, RowTag::Local);
        // B: demand coverage.
        b.add_row("b_demand", vec![(grid_b, 1.0), (from_es, 1.0)], Sense::Ge, 5.0, RowTag::Local);
        // Sharing balance.
        b.add_row("es", vec![(to_es, 1.0), (from_es, -1.0)], Sense::Eq, 0.0, RowTag::CouplingEs);
        b.add_objective(gen_a, 0.10);
        b.add_objective(grid_b, 0.30);
        b.build()
    }

    #[test]
    fn market_toy_clears_to_pooled_optimum() {
        let sub = market_toy();
        let rhs: Vec<f64> = sub.constraints.iter().map(|c| c.rhs).collect();
        let structure = block_structure(&sub).unwrap();
        let mut warm = LrWarm::default();
        let mut c = cfg();
        c.initial_price_el = 0.40;
        let result = solve(&sub, &rhs, &structure, &c, &mut warm).unwrap();
        assert!(result.converged, "did not converge");
        // Pooled optimum: A sells 5, B buys 5, cost 0.50.
        let pooled = solve_lp(&sub, &LpConfig::default()).unwrap();
        assert!((pooled.objective - 0.5).abs() < 1e-6);
        assert!((result.w - pooled.objective).abs() < 1e-3 * pooled.objective.abs().max(1.0));
        assert!((result.dispatch[1] - 5.0).abs() < 1e-3, "exchange {}", result.dispatch[1]);
        // Equilibrium price magnitude sits between marginal costs.
        let lambda = result.row_duals[2];
        assert!(
            (0.10..=0.30).contains(&lambda.abs()),
            "price {lambda} outside [0.10, 0.30]"
        );
    }

    #[test]
    fn single_coupling_residuals_are_signed() {
        let sub = market_toy();
        let rhs: Vec<f64> = sub.constraints.iter().map(|c| c.rhs).collect();
        let structure = block_structure(&sub).unwrap();
        // Seller 5, buyer 3 -> residual +2.
        let r = coupling_residuals(&sub, &rhs, &structure, &[5.0, 5.0, 2.0, 3.0]);
        assert!((r[0] - 2.0).abs() < 1e-12);
        // Balanced -> 0.
        let r = coupling_residuals(&sub, &rhs, &structure, &[5.0, 5.0, 0.0, 5.0]);
        assert!(r[0].abs() < 1e-12);
    }

    #[test]
    fn rprop_first_step_uses_alpha_then_scales() {
        let c = cfg();
        let mut prices = PriceVector {
            lambda: vec![0.0],
            carrier: vec![CouplingCarrier::Electric],
        };
        let mut st = RpropState::new(1, &c);
        rprop_update(&mut prices, &mut st, &[2.0], 1e-3, 10.0, 1e4);
        assert!((prices.lambda[0] - 0.1).abs() < 1e-12);
        // Same sign: step grows by eta_plus.
        rprop_update(&mut prices, &mut st, &[1.5], 1e-3, 10.0, 1e4);
        assert!((prices.lambda[0] - 0.22).abs() < 1e-12);
        // Sign flip: step halves.
        rprop_update(&mut prices, &mut st, &[-1.0], 1e-3, 10.0, 1e4);
        assert!((prices.lambda[0] - (0.22 - 0.06)).abs() < 1e-12);
        // Residual inside tolerance: frozen.
        let before = prices.lambda[0];
        rprop_update(&mut prices, &mut st, &[1e-6], 1e-3, 10.0, 1e4);
        assert_eq!(prices.lambda[0], before);
    }

    #[test]
    fn shift_rule_snaps_to_slack_price() {
        let c = cfg();
        let mut prices = PriceVector {
            lambda: vec![1.95],
            carrier: vec![CouplingCarrier::Electric],
        };
        let mut st = RpropState::new(1, &c);
        st.step[0] = 0.2;
        st.first_done[0] = true;
        st.prev_sign[0] = 1;
        rprop_update(&mut prices, &mut st, &[3.0], 1e-3, 2.0, 1e4);
        assert_eq!(prices.lambda[0], 1e4);
    }

    #[test]
    fn bounds_and_gap_formulas() {
        let c = cfg();
        let mut state = LrState::new(&c);
        let prices = PriceVector {
            lambda: vec![-0.4],
            carrier: vec![CouplingCarrier::Electric],
        };
        // UB = |R| * lambda_max = 5 * 0.4 = 2; LB = z.
        state.update_bounds(1.8, &[5.0], &[CouplingCarrier::Electric], &prices);
        assert!((state.upper_bound - 2.0).abs() < 1e-12);
        assert!((state.lower_bound - 1.8).abs() < 1e-12);
        assert!((state.gap - 0.1).abs() < 1e-12);
        // Decreasing z leaves the lower bound unchanged.
        state.update_bounds(1.0, &[5.0], &[CouplingCarrier::Electric], &prices);
        assert!((state.lower_bound - 1.8).abs() < 1e-12);
        // Zero residuals drive the upper bound to zero; absolute gap guard.
        state.update_bounds(1.8, &[0.0], &[CouplingCarrier::Electric], &prices);
        assert_eq!(state.upper_bound, 0.0);
        assert!((state.gap - 1.8).abs() < 1e-12);
    }

    #[test]
    fn convergence_rules() {
        let c = cfg();
        let mut state = LrState::new(&c);
        state.gap = 1e-5;
        state.gap_history = vec![1e-5];
        state.max_abs_residual = 1.0;
        let (inner, outer) = state.converged();
        assert!(inner && outer);

        // Stalled gap with small residuals: inner only.
        let mut state = LrState::new(&c);
        state.gap = 0.5;
        state.gap_history = vec![0.5, 0.5, 0.5, 0.5];
        state.max_abs_residual = 1e-4;
        let (inner, outer) = state.converged();
        assert!(inner && !outer);

        // Stalled gap with a large residual: neither.
        state.max_abs_residual = 1.0;
        let (inner, outer) = state.converged();
        assert!(!inner && !outer);
    }

    #[test]
    fn initial_price_takes_group_maximum() {
        assert_eq!(initial_price_from_lcoe(&[0.25, 0.40]), Some(0.40));
        assert_eq!(initial_price_from_lcoe(&[0.30, 0.30]), Some(0.30));
        assert_eq!(initial_price_from_lcoe(&[]), None);
    }
}
