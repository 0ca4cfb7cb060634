//! Benders decomposition: iterative master/subproblem solution of a staged
//! MILP with optimality cuts and Pareto-optimal cuts.
//!
//! The master holds the investment variables plus a scalar estimator of the
//! operation cost; each iteration fixes the investment, solves the
//! operation subproblem (directly, or by price coordination when it
//! separates into per-building blocks), and returns a cut from the
//! subproblem duals. Pareto-optimal cuts follow the Papadakos scheme: an
//! auxiliary subproblem solved at a running core point selects the
//! strongest dual solution without a normalization constraint.

use crate::lagrange::{self, BlockStructure, LrConfig, LrError, LrWarm};
use crate::milp::{
    solve_lp_warm, solve_milp, Basis, LpConfig, LpStatus, MilpConfig, MilpError, MilpProblem,
    MilpStatus, RowTag, Sense, Stage, VarKind,
};
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct BendersConfig {
    pub lp: LpConfig,
    pub master: MilpConfig,
    /// Relative convergence threshold on (UB - LB) / max(1, |UB|).
    pub eps_rel: f64,
    pub max_iterations: usize,
    pub poc_enabled: bool,
    /// Finite valid floor for the operation-cost estimator.
    pub theta_floor: f64,
    pub lr: LrConfig,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            lp: LpConfig::default(),
            master: MilpConfig::default(),
            eps_rel: 1e-4,
            max_iterations: 200,
            poc_enabled: true,
            theta_floor: -1e9,
            lr: LrConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("split error: {0}")]
    Split(String),
    #[error("master infeasible: the investment constraints are contradictory")]
    MasterInfeasible,
    #[error("master solve failed: {0}")]
    Master(String),
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error(transparent)]
    Lr(#[from] LrError),
    #[error("iteration cap exceeded at gap {gap:.3e}")]
    IterationCap {
        gap: f64,
        incumbent: Box<BendersRun>,
    },
}

/// Master/subproblem pair produced by `split`.
#[derive(Debug, Clone)]
pub struct BendersSplit {
    pub master: MilpProblem,
    /// Master variable index of the estimator.
    pub theta: usize,
    /// Closed variable index per master investment variable.
    pub x_closed: Vec<usize>,
    pub sub: SubTemplate,
    pub closed_nvars: usize,
}

/// Second-stage rows with the first-stage contribution factored out.
#[derive(Debug, Clone)]
pub struct SubTemplate {
    /// y-only problem; row rhs values are the closed rhs (before fixing x).
    pub problem: MilpProblem,
    /// Closed variable index per subproblem variable.
    pub closed_of_y: Vec<usize>,
    /// Per subproblem row: (master x index, coefficient) of first-stage terms.
    pub x_terms: Vec<Vec<(usize, f64)>>,
    /// Block separation when the subproblem splits per building.
    pub structure: Option<BlockStructure>,
}

impl SubTemplate {
    pub fn is_empty(&self) -> bool {
        self.problem.variables.is_empty()
    }

    /// Row rhs values with the investment decision substituted.
    pub fn rhs_for(&self, x_master: &[f64]) -> Vec<f64> {
        self.problem
            .constraints
            .iter()
            .enumerate()
            .map(|(r, c)| {
                let shift: f64 = self.x_terms[r]
                    .iter()
                    .map(|&(m, a)| a * x_master[m])
                    .sum();
                c.rhs - shift
            })
            .collect()
    }
}

/// Splits a staged problem into the investment master (plus estimator) and
/// the operation subproblem template.
pub fn split(closed: &MilpProblem) -> Result<BendersSplit, BendersError> {
    closed.check()?;
    let n = closed.variables.len();
    let mut master_of_closed = vec![usize::MAX; n];
    let mut x_closed = Vec::new();
    for (j, v) in closed.variables.iter().enumerate() {
        match v.stage {
            Stage::First => {
                master_of_closed[j] = x_closed.len();
                x_closed.push(j);
            }
            Stage::Second => {
                if v.kind != VarKind::Continuous {
                    return Err(BendersError::Split(format!(
                        "second-stage variable {} is not continuous",
                        v.id
                    )));
                }
            }
        }
    }
    let mut y_of_closed = vec![usize::MAX; n];
    let mut closed_of_y = Vec::new();
    for (j, v) in closed.variables.iter().enumerate() {
        if v.stage == Stage::Second {
            y_of_closed[j] = closed_of_y.len();
            closed_of_y.push(j);
            let _ = v;
        }
    }

    let mut master = MilpProblem {
        variables: x_closed
            .iter()
            .map(|&j| closed.variables[j].clone())
            .collect(),
        constraints: Vec::new(),
        objective: Vec::new(),
    };
    let theta = master.variables.len();
    master.variables.push(crate::milp::Variable {
        id: "theta".into(),
        kind: VarKind::Continuous,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        stage: Stage::First,
        block: None,
    });

    let mut sub_problem = MilpProblem {
        variables: closed_of_y
            .iter()
            .map(|&j| closed.variables[j].clone())
            .collect(),
        constraints: Vec::new(),
        objective: Vec::new(),
    };
    let mut x_terms: Vec<Vec<(usize, f64)>> = Vec::new();

    for c in &closed.constraints {
        let only_first = c
            .terms
            .iter()
            .all(|&(j, _)| closed.variables[j].stage == Stage::First);
        if only_first {
            master.constraints.push(crate::milp::Constraint {
                id: c.id.clone(),
                terms: c
                    .terms
                    .iter()
                    .map(|&(j, a)| (master_of_closed[j], a))
                    .collect(),
                sense: c.sense,
                rhs: c.rhs,
                tag: c.tag,
            });
        } else {
            let mut y_terms = Vec::new();
            let mut xs = Vec::new();
            for &(j, a) in &c.terms {
                if closed.variables[j].stage == Stage::Second {
                    y_terms.push((y_of_closed[j], a));
                } else {
                    xs.push((master_of_closed[j], a));
                }
            }
            sub_problem.constraints.push(crate::milp::Constraint {
                id: c.id.clone(),
                terms: y_terms,
                sense: c.sense,
                rhs: c.rhs,
                tag: c.tag,
            });
            x_terms.push(xs);
        }
    }

    for &(j, coef) in &closed.objective {
        match closed.variables[j].stage {
            Stage::First => master.objective.push((master_of_closed[j], coef)),
            Stage::Second => sub_problem.objective.push((y_of_closed[j], coef)),
        }
    }
    if sub_problem.variables.is_empty() {
        // Degenerate split: nothing to estimate.
        master.variables[theta].lower = 0.0;
        master.variables[theta].upper = 0.0;
    } else {
        master.objective.push((theta, 1.0));
    }

    let has_coupling = sub_problem
        .constraints
        .iter()
        .any(|c| c.tag.is_coupling());
    let structure = if has_coupling {
        match lagrange::block_structure(&sub_problem) {
            Ok(s) if s.blocks.len() >= 2 => Some(s),
            _ => None,
        }
    } else {
        None
    };

    Ok(BendersSplit {
        master,
        theta,
        x_closed,
        sub: SubTemplate {
            problem: sub_problem,
            closed_of_y,
            x_terms,
            structure,
        },
        closed_nvars: n,
    })
}

/// Geometric core-point update toward the latest master optimum.
pub fn update_core_point(previous: &[f64], x_opt: &[f64], tau: f64) -> Vec<f64> {
    previous
        .iter()
        .zip(x_opt)
        .map(|(p, x)| tau * p + (1.0 - tau) * x)
        .collect()
}

/// Cut coefficients from subproblem row duals: the estimator obeys
/// `theta >= e - E*x` with `E = duals^T T` and `e = w + E*xbar`, which
/// equals `duals^T h` plus the variable-bound dual contribution.
pub fn cut_from_duals(
    x_terms: &[Vec<(usize, f64)>],
    duals: &[f64],
    w: f64,
    x_master: &[f64],
) -> (f64, Vec<f64>) {
    let n = x_master.len();
    let mut coeffs = vec![0.0; n];
    for (r, xs) in x_terms.iter().enumerate() {
        let d = duals[r];
        if d == 0.0 {
            continue;
        }
        for &(m, a) in xs {
            coeffs[m] += d * a;
        }
    }
    let e = w + coeffs.iter().zip(x_master).map(|(c, x)| c * x).sum::<f64>();
    (e, coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutKind {
    Optimality,
    ParetoOptimal,
    Feasibility,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutRecord {
    pub kind: CutKind,
    pub iteration: usize,
    pub e: f64,
    /// Coefficient per master investment variable.
    pub coeffs: Vec<f64>,
    /// Core point the cut was generated at (Pareto-optimal cuts) or the
    /// master optimum (optimality cuts).
    pub at_point: Vec<f64>,
}

impl CutRecord {
    /// Estimator floor implied by this cut at a point.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.e - self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BendersTraceRow {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub cuts_added: usize,
    pub subproblem_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BendersRun {
    /// Best objective found (master investment cost plus operation cost).
    pub objective: f64,
    /// Solution over the closed problem's variable space.
    pub solution: Vec<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Subproblem duals were exact at the final incumbent.
    pub exact_duals: bool,
    pub cuts: Vec<CutRecord>,
    pub trace: Vec<BendersTraceRow>,
}

struct SubSolver {
    scratch: MilpProblem,
    basis: Option<Basis>,
    lr_warm: LrWarm,
}

impl SubSolver {
    fn new(template: &SubTemplate) -> Self {
        SubSolver {
            scratch: template.problem.clone(),
            basis: None,
            lr_warm: LrWarm::default(),
        }
    }
}

struct SubResult {
    feasible: bool,
    w: f64,
    duals: Vec<f64>,
    dispatch: Vec<f64>,
    exact_duals: bool,
}

/// Iterative master/subproblem engine over one split.
pub struct Benders {
    pub split: BendersSplit,
    config: BendersConfig,
    master_work: MilpProblem,
    core: Vec<f64>,
    main_solver: SubSolver,
    aux_solver: SubSolver,
    pub cuts: Vec<CutRecord>,
    pub trace: Vec<BendersTraceRow>,
    lower: f64,
    upper: f64,
    incumbent: Option<(Vec<f64>, Vec<f64>, bool)>,
    iterations: usize,
}

impl Benders {
    pub fn new(closed: &MilpProblem, config: BendersConfig) -> Result<Self, BendersError> {
        let mut split = split(closed)?;
        if !split.sub.is_empty() {
            split.master.variables[split.theta].lower = config.theta_floor;
        }
        let master_work = split.master.clone();
        // Initial core point: midpoint of every investment variable's
        // bounds, interior by construction.
        let core: Vec<f64> = split.master.variables[..split.theta]
            .iter()
            .map(|v| {
                let lo = if v.lower.is_finite() { v.lower } else { 0.0 };
                let hi = if v.upper.is_finite() { v.upper } else { lo + 1.0 };
                0.5 * (lo + hi)
            })
            .collect();
        let main_solver = SubSolver::new(&split.sub);
        let aux_solver = SubSolver::new(&split.sub);
        Ok(Benders {
            split,
            config,
            master_work,
            core,
            main_solver,
            aux_solver,
            cuts: Vec::new(),
            trace: Vec::new(),
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            incumbent: None,
            iterations: 0,
        })
    }

    fn solve_sub(&mut self, aux: bool, x_master: &[f64]) -> Result<SubResult, BendersError> {
        let template = &self.split.sub;
        let rhs = template.rhs_for(x_master);
        let solver = if aux {
            &mut self.aux_solver
        } else {
            &mut self.main_solver
        };
        if let Some(structure) = &template.structure {
            let r = lagrange::solve(&template.problem, &rhs, structure, &self.config.lr, &mut solver.lr_warm)?;
            return Ok(SubResult {
                feasible: true,
                w: r.w,
                duals: r.row_duals,
                dispatch: r.dispatch,
                exact_duals: r.exact_duals,
            });
        }
        for (c, r) in solver.scratch.constraints.iter_mut().zip(&rhs) {
            c.rhs = *r;
        }
        let (sol, basis) = solve_lp_warm(&solver.scratch, &self.config.lp, solver.basis.as_ref())?;
        solver.basis = Some(basis);
        match sol.status {
            LpStatus::Optimal => Ok(SubResult {
                feasible: true,
                w: sol.objective,
                duals: sol.duals,
                dispatch: sol.x,
                exact_duals: true,
            }),
            LpStatus::Infeasible => Ok(SubResult {
                feasible: false,
                // For an infeasible LP the solver reports the remaining
                // phase-1 infeasibility as the objective.
                w: sol.objective,
                duals: sol.duals,
                dispatch: Vec::new(),
                exact_duals: false,
            }),
            LpStatus::Unbounded => Err(BendersError::Solver(MilpError::NumericalFailure(
                "unbounded subproblem".into(),
            ))),
        }
    }

    fn master_cost(&self, x_master: &[f64]) -> f64 {
        self.split
            .master
            .objective
            .iter()
            .filter(|&&(j, _)| j != self.split.theta)
            .map(|&(j, c)| c * x_master[j])
            .sum()
    }

    fn add_cut(&mut self, kind: CutKind, e: f64, coeffs: Vec<f64>, at_point: Vec<f64>) {
        let mut terms: Vec<(usize, f64)> = coeffs
            .iter()
            .enumerate()
            .filter(|&(_, c)| *c != 0.0)
            .map(|(m, &c)| (m, c))
            .collect();
        if kind != CutKind::Feasibility {
            terms.push((self.split.theta, 1.0));
        }
        self.master_work.constraints.push(crate::milp::Constraint {
            id: format!("cut{}", self.cuts.len()),
            terms,
            sense: Sense::Ge,
            rhs: e,
            tag: RowTag::Local,
        });
        self.cuts.push(CutRecord {
            kind,
            iteration: self.iterations,
            e,
            coeffs,
            at_point,
        });
    }

    /// Master problem with all cuts added so far.
    pub fn master_problem(&self) -> &MilpProblem {
        &self.master_work
    }

    /// One master + subproblem round. Returns true when converged.
    pub fn iterate(&mut self) -> Result<bool, BendersError> {
        self.iterations += 1;
        let msol = solve_milp(&self.master_work, &self.config.master)?;
        match msol.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible => return Err(BendersError::MasterInfeasible),
            other => {
                return Err(BendersError::Master(format!(
                    "master status {other:?} after {} nodes",
                    msol.node_count
                )))
            }
        }
        let x_master: Vec<f64> = msol.x[..self.split.theta].to_vec();
        self.lower = self.lower.max(msol.objective);

        let t0 = Instant::now();
        let mut cuts_added = 0;
        if self.split.sub.is_empty() {
            self.upper = msol.objective;
            self.incumbent = Some((x_master, Vec::new(), true));
            self.push_trace(t0, cuts_added);
            return Ok(true);
        }

        let sub = self.solve_sub(false, &x_master)?;
        if !sub.feasible {
            // Dead path under the slack design; kept for stripped models.
            let (e, coeffs) = cut_from_duals(&self.split.sub.x_terms, &sub.duals, sub.w, &x_master);
            self.add_cut(CutKind::Feasibility, e, coeffs, x_master.clone());
            cuts_added += 1;
            self.push_trace(t0, cuts_added);
            return Ok(false);
        }

        let candidate = self.master_cost(&x_master) + sub.w;
        if candidate < self.upper {
            self.upper = candidate;
            self.incumbent = Some((x_master.clone(), sub.dispatch.clone(), sub.exact_duals));
        }

        let gap = self.gap();
        if gap <= self.config.eps_rel {
            self.push_trace(t0, cuts_added);
            return Ok(true);
        }

        let (e, coeffs) = cut_from_duals(&self.split.sub.x_terms, &sub.duals, sub.w, &x_master);
        self.add_cut(CutKind::Optimality, e, coeffs, x_master.clone());
        cuts_added += 1;

        if self.config.poc_enabled {
            self.core = update_core_point(&self.core, &x_master, 0.5);
            let core = self.core.clone();
            let aux = self.solve_sub(true, &core)?;
            if aux.feasible {
                let (e, coeffs) =
                    cut_from_duals(&self.split.sub.x_terms, &aux.duals, aux.w, &core);
                self.add_cut(CutKind::ParetoOptimal, e, coeffs, core);
                cuts_added += 1;
            }
        }
        self.push_trace(t0, cuts_added);
        Ok(false)
    }

    fn gap(&self) -> f64 {
        if !self.upper.is_finite() || !self.lower.is_finite() {
            return f64::INFINITY;
        }
        (self.upper - self.lower) / self.upper.abs().max(1.0)
    }

    fn push_trace(&mut self, t0: Instant, cuts_added: usize) {
        self.trace.push(BendersTraceRow {
            iteration: self.iterations,
            lower_bound: self.lower,
            upper_bound: self.upper,
            gap: self.gap(),
            cuts_added,
            subproblem_seconds: t0.elapsed().as_secs_f64(),
        });
    }

    fn finish(mut self, converged: bool) -> Result<BendersRun, BendersError> {
        let gap = self.gap();
        let (x_master, dispatch, exact) = match self.incumbent.take() {
            Some(t) => t,
            None => {
                return Err(BendersError::Master(
                    "no incumbent found".into(),
                ))
            }
        };
        let mut solution = vec![0.0; self.closed_nvars()];
        for (m, &j) in self.split.x_closed.iter().enumerate() {
            solution[j] = x_master[m];
        }
        for (y, &j) in self.split.sub.closed_of_y.iter().enumerate() {
            if y < dispatch.len() {
                solution[j] = dispatch[y];
            }
        }
        let run = BendersRun {
            objective: self.upper,
            solution,
            lower_bound: self.lower,
            upper_bound: self.upper,
            gap,
            iterations: self.iterations,
            converged,
            exact_duals: exact,
            cuts: self.cuts,
            trace: self.trace,
        };
        if converged {
            Ok(run)
        } else {
            Err(BendersError::IterationCap {
                gap,
                incumbent: Box::new(run),
            })
        }
    }

    fn closed_nvars(&self) -> usize {
        self.split.closed_nvars
    }
}

/// Runs the full loop to convergence or the iteration cap.
pub fn run(closed: &MilpProblem, config: &BendersConfig) -> Result<BendersRun, BendersError> {
    let mut engine = Benders::new(closed, config.clone())?;
    let cap = config.max_iterations;
    let mut converged = false;
    for _ in 0..cap {
        if engine.iterate()? {
            converged = true;
            break;
        }
    }
    engine.finish(converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, solve_milp, ProblemBuilder};

    /// min 2x + y with y >= 5 - x, x in [0, 4] first stage, y >= 0.
    fn staged_lp() -> MilpProblem {
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Continuous, 0.0, 4.0, Stage::First, None);
        let y = b.add_var("y", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        b.add_row("cover", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 5.0, RowTag::Local);
        b.add_objective(x, 2.0);
        b.add_objective(y, 1.0);
        b.build()
    }

    #[test]
    fn split_partitions_rows_and_counts() {
        let p = staged_lp();
        let s = split(&p).unwrap();
        assert_eq!(s.master.constraints.len() + s.sub.problem.constraints.len(), 1);
        assert_eq!(s.sub.problem.variables.len(), 1);
        assert_eq!(s.master.variables.len(), 2); // x + theta
        assert_eq!(s.sub.x_terms[0], vec![(0, 1.0)]);
    }

    #[test]
    fn split_rejects_integer_second_stage() {
        let mut b = ProblemBuilder::new();
        b.add_var("x", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        b.add_var("y", VarKind::Integer, 0.0, 5.0, Stage::Second, None);
        let p = b.build();
        assert!(matches!(split(&p), Err(BendersError::Split(_))));
    }

    #[test]
    fn degenerate_all_first_stage_split() {
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        b.add_row("r", vec![(x, 1.0)], Sense::Le, 1.0, RowTag::Local);
        b.add_objective(x, -2.0);
        let p = b.build();
        let s = split(&p).unwrap();
        assert!(s.sub.is_empty());
        assert_eq!(s.master.variables[s.theta].lower, 0.0);
        assert_eq!(s.master.variables[s.theta].upper, 0.0);
        let run = run(&p, &BendersConfig::default()).unwrap();
        assert!((run.objective + 2.0).abs() < 1e-9);
        assert_eq!(run.iterations, 1);
    }

    #[test]
    fn lp_toy_matches_direct_solve() {
        let p = staged_lp();
        let run = run(&p, &BendersConfig::default()).unwrap();
        let direct = solve_lp(&p, &LpConfig::default()).unwrap();
        assert!(run.converged);
        assert!(
            (run.objective - direct.objective).abs() <= 1e-6 * direct.objective.abs().max(1.0),
            "benders {} vs lp {}",
            run.objective,
            direct.objective
        );
        // LB never decreases, UB never increases in the trace.
        for w in run.trace.windows(2) {
            assert!(w[1].lower_bound >= w[0].lower_bound - 1e-9);
            assert!(w[1].upper_bound <= w[0].upper_bound + 1e-9);
        }
    }

    #[test]
    fn mixed_integer_master_matches_milp_oracle() {
        // Two designs x in {0,1}: x=1 costs 3 up front but halves operation.
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        let y = b.add_var("y", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        // y >= 10 - 6x
        b.add_row("demand", vec![(y, 1.0), (x, 6.0)], Sense::Ge, 10.0, RowTag::Local);
        b.add_objective(x, 3.0);
        b.add_objective(y, 1.0);
        let p = b.build();
        let nested = run(&p, &BendersConfig::default()).unwrap();
        let oracle = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert!((nested.objective - oracle.objective).abs() < 1e-6);
        assert!((nested.solution[0] - oracle.x[0]).abs() < 1e-6);
    }

    #[test]
    fn optimality_cut_from_hand_duals() {
        // Subproblem min y s.t. y >= 5 - x at xbar = 2: y = 3, dual 1.
        let x_terms = vec![vec![(0, 1.0)]];
        let (e, coeffs) = cut_from_duals(&x_terms, &[1.0], 3.0, &[2.0]);
        assert!((e - 5.0).abs() < 1e-12);
        assert!((coeffs[0] - 1.0).abs() < 1e-12);
        // All-zero duals with zero cost: vacuous cut.
        let (e, coeffs) = cut_from_duals(&x_terms, &[0.0], 0.0, &[2.0]);
        assert_eq!(e, 0.0);
        assert_eq!(coeffs[0], 0.0);
    }

    #[test]
    fn core_point_update_is_geometric() {
        let c1 = update_core_point(&[1.0, 0.0], &[0.0, 1.0], 0.5);
        assert_eq!(c1, vec![0.5, 0.5]);
        let same = update_core_point(&[0.3, 0.7], &[0.3, 0.7], 0.5);
        assert_eq!(same, vec![0.3, 0.7]);
        let mut c = vec![1.0];
        for _ in 0..40 {
            c = update_core_point(&c, &[0.0], 0.5);
        }
        assert!(c[0].abs() < 1e-9);
    }

    #[test]
    fn cut_at_generating_point_equals_w() {
        let p = staged_lp();
        let mut engine = Benders::new(&p, BendersConfig::default()).unwrap();
        // Drive one iteration manually and check the first optimality cut.
        let _ = engine.iterate().unwrap();
        if let Some(cut) = engine
            .cuts
            .iter()
            .find(|c| c.kind == CutKind::Optimality)
        {
            let x = &cut.at_point;
            let rhs = engine.split.sub.rhs_for(x);
            let mut scratch = engine.split.sub.problem.clone();
            for (c, r) in scratch.constraints.iter_mut().zip(&rhs) {
                c.rhs = *r;
            }
            let w = solve_lp(&scratch, &LpConfig::default()).unwrap().objective;
            assert!((cut.value_at(x) - w).abs() < 1e-8);
        } else {
            panic!("no optimality cut recorded");
        }
    }
}
