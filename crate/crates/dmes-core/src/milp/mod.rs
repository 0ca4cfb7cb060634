//! Generic mixed-integer linear programming with dual extraction.
//!
//! Problems are immutable once built; solves are pure functions of
//! `(problem, config)`. Variables carry a stage tag (investment vs. operation)
//! and an optional block id (building), constraints carry a local/coupling
//! tag; the decomposition stages are driven entirely by these annotations.
//! The embedded solver is the reference backend; [`Backend`] lets an external
//! solver be substituted behind the same contract.

mod branch_bound;
mod lp_format;
mod simplex;

pub use branch_bound::{solve_milp, MilpConfig, MilpSolution, MilpStatus};
pub use lp_format::write_lp;
pub use simplex::{solve_lp, solve_lp_warm, Basis, LpConfig, LpSolution, LpStatus};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

/// Decomposition stage of a variable: `First` holds investment/design
/// decisions fixed by the Benders master, `Second` holds dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Row tag. Coupling rows are the inter-building balance constraints that
/// Lagrange relaxation dualizes; everything else is local to one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowTag {
    Local,
    /// Electric energy-sharing balance of one group at one step.
    CouplingEs,
    /// Heat-network balance of one network at one step.
    CouplingDhn,
}

impl RowTag {
    pub fn is_coupling(self) -> bool {
        !matches!(self, RowTag::Local)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub stage: Stage,
    /// Block-angular metadata: which independent block (building) the
    /// variable belongs to, if any.
    pub block: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    /// `(variable index, coefficient)` pairs; indices into `MilpProblem::variables`.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
}

/// A minimization MILP. Objective constants are not represented; callers
/// track them separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpProblem {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sparse objective: `(variable index, coefficient)`.
    pub objective: Vec<(usize, f64)>,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("problem has no variables")]
    Empty,
    #[error("term references undeclared variable {0}")]
    BadVarRef(usize),
    #[error("variable {0} has lower bound {1} > upper bound {2}")]
    BadBounds(String, f64, f64),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl MilpProblem {
    /// Structural sanity check: every term resolves, bounds are ordered,
    /// binaries live inside [0, 1].
    pub fn check(&self) -> Result<(), MilpError> {
        if self.variables.is_empty() {
            return Err(MilpError::Empty);
        }
        for v in &self.variables {
            if v.lower > v.upper {
                return Err(MilpError::BadBounds(v.id.clone(), v.lower, v.upper));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::BadBounds(v.id.clone(), v.lower, v.upper));
            }
        }
        let n = self.variables.len();
        for c in &self.constraints {
            for &(j, _) in &c.terms {
                if j >= n {
                    return Err(MilpError::BadVarRef(j));
                }
            }
        }
        for &(j, _) in &self.objective {
            if j >= n {
                return Err(MilpError::BadVarRef(j));
            }
        }
        Ok(())
    }

    pub fn is_mip(&self) -> bool {
        self.variables
            .iter()
            .any(|v| matches!(v.kind, VarKind::Integer | VarKind::Binary))
    }

    /// Dense objective vector.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(j, coef) in &self.objective {
            c[j] += coef;
        }
        c
    }

    /// Evaluates `terms` at a primal point.
    pub fn eval_terms(terms: &[(usize, f64)], x: &[f64]) -> f64 {
        terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Signed violation of a row at a primal point: positive means violated.
    pub fn row_violation(c: &Constraint, x: &[f64]) -> f64 {
        let lhs = Self::eval_terms(&c.terms, x);
        match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        }
    }
}

/// Incremental construction of a [`MilpProblem`].
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, f64)>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        id: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        stage: Stage,
        block: Option<u32>,
    ) -> usize {
        self.variables.push(Variable {
            id: id.into(),
            kind,
            lower,
            upper,
            stage,
            block,
        });
        self.variables.len() - 1
    }

    pub fn add_row(
        &mut self,
        id: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
        tag: RowTag,
    ) -> usize {
        self.constraints.push(Constraint {
            id: id.into(),
            terms,
            sense,
            rhs,
            tag,
        });
        self.constraints.len() - 1
    }

    /// Adds to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: usize, coef: f64) {
        if coef != 0.0 {
            self.objective.push((var, coef));
        }
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn build(mut self) -> MilpProblem {
        // Merge duplicate objective entries so downstream dense conversion
        // and LP export see one coefficient per variable.
        self.objective.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.objective.len());
        for (j, c) in self.objective {
            match merged.last_mut() {
                Some((k, acc)) if *k == j => *acc += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        MilpProblem {
            variables: self.variables,
            constraints: self.constraints,
            objective: merged,
        }
    }
}

/// Solver backend contract. The embedded simplex/branch-and-bound is the
/// reference implementation.
pub trait Backend {
    fn lp(&self, problem: &MilpProblem, config: &LpConfig) -> Result<LpSolution, MilpError>;
    fn milp(&self, problem: &MilpProblem, config: &MilpConfig) -> Result<MilpSolution, MilpError>;
}

/// The embedded reference solver.
#[derive(Debug, Default, Clone, Copy)]
pub struct Embedded;

impl Backend for Embedded {
    fn lp(&self, problem: &MilpProblem, config: &LpConfig) -> Result<LpSolution, MilpError> {
        solve_lp(problem, config)
    }

    fn milp(&self, problem: &MilpProblem, config: &MilpConfig) -> Result<MilpSolution, MilpError> {
        solve_milp(problem, config)
    }
}
