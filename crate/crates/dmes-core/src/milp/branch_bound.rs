//! Branch and bound over the LP relaxation.
//!
//! Best-bound node selection, branching on the most fractional integer
//! variable with ties broken by lowest variable index, so search trees are
//! deterministic and reproducible. Child nodes warm-start the simplex from
//! the parent basis.

use super::simplex::{solve_lp_warm, Basis, LpConfig, LpStatus};
use super::{MilpError, MilpProblem, VarKind};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
pub struct MilpConfig {
    pub lp: LpConfig,
    /// Integrality tolerance.
    pub int_tol: f64,
    /// Absolute optimality gap.
    pub abs_gap: f64,
    /// Relative optimality gap.
    pub rel_gap: f64,
    /// Node cap; hitting it returns the incumbent flagged `ResourceLimit`.
    pub max_nodes: usize,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self {
            lp: LpConfig::default(),
            int_tol: 1e-6,
            abs_gap: 1e-6,
            rel_gap: 0.0,
            max_nodes: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node cap hit; solution carries the incumbent and the proven bound.
    ResourceLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub node_count: usize,
}

struct Node {
    bound: f64,
    seq: usize,
    overrides: Vec<(usize, f64, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for best-bound (lowest) first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn solve_milp(problem: &MilpProblem, config: &MilpConfig) -> Result<MilpSolution, MilpError> {
    problem.check()?;
    let int_vars: Vec<usize> = problem
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v.kind, VarKind::Integer | VarKind::Binary))
        .map(|(j, _)| j)
        .collect();

    let mut relaxed = problem.clone();
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        overrides: Vec::new(),
        basis: None,
    });
    let mut seq = 0usize;
    let mut node_count = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut limited = false;

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - gap_tol(config, *inc) {
                continue;
            }
        }
        if node_count >= config.max_nodes {
            limited = true;
            break;
        }
        node_count += 1;

        apply_overrides(&mut relaxed, problem, &node.overrides);
        let solved = solve_lp_warm(&relaxed, &config.lp, node.basis.as_ref());
        let (sol, basis) = match solved {
            Ok(pair) => pair,
            Err(MilpError::NumericalFailure(_)) if node.basis.is_some() => {
                // Retry cold before giving up on the node.
                solve_lp_warm(&relaxed, &config.lp, None)?
            }
            Err(e) => return Err(e),
        };
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node_count == 1 {
                    return Ok(MilpSolution {
                        status: MilpStatus::Unbounded,
                        x: Vec::new(),
                        objective: f64::NEG_INFINITY,
                        bound: f64::NEG_INFINITY,
                        node_count,
                    });
                }
                return Err(MilpError::NumericalFailure(
                    "unbounded node below bounded root".into(),
                ));
            }
            LpStatus::Optimal => {}
        }
        if let Some((inc, _)) = &incumbent {
            if sol.objective >= inc - gap_tol(config, *inc) {
                continue;
            }
        }

        // Most fractional integer variable; ties to the lowest index.
        let mut branch_var = None;
        let mut best_frac = config.int_tol;
        for &j in &int_vars {
            let f = (sol.x[j] - sol.x[j].round()).abs();
            if f > best_frac + 1e-12 {
                best_frac = f;
                branch_var = Some(j);
            }
        }
        if std::env::var_os("DMES_BB_DEBUG").is_some() {
            if let Some(j) = branch_var {
                eprintln!(
                    "node {node_count}: bound {:.4} branch {} = {:.6} overrides {:?}",
                    sol.objective, relaxed.variables[j].id, sol.x[j], node.overrides
                );
            }
        }

        match branch_var {
            None => {
                let mut x = sol.x.clone();
                for &j in &int_vars {
                    x[j] = x[j].round();
                }
                let better = incumbent
                    .as_ref()
                    .map(|(inc, _)| sol.objective < *inc)
                    .unwrap_or(true);
                if better {
                    incumbent = Some((sol.objective, x));
                }
            }
            Some(j) => {
                let val = sol.x[j];
                let floor = val.floor();
                for (lo, hi) in [
                    (f64::NEG_INFINITY, floor),
                    (floor + 1.0, f64::INFINITY),
                ] {
                    let (lo, hi) = clamp_override(problem, &node.overrides, j, lo, hi);
                    if lo > hi {
                        continue;
                    }
                    let mut overrides = node.overrides.clone();
                    overrides.push((j, lo, hi));
                    seq += 1;
                    heap.push(Node {
                        bound: sol.objective,
                        seq,
                        overrides,
                        basis: Some(basis.clone()),
                    });
                }
            }
        }
    }

    let bound = if limited {
        heap.iter()
            .map(|n| n.bound)
            .fold(incumbent.as_ref().map(|(o, _)| *o).unwrap_or(f64::INFINITY), f64::min)
    } else {
        incumbent
            .as_ref()
            .map(|(o, _)| *o)
            .unwrap_or(f64::INFINITY)
    };

    match incumbent {
        Some((objective, x)) => Ok(MilpSolution {
            status: if limited {
                MilpStatus::ResourceLimit
            } else {
                MilpStatus::Optimal
            },
            x,
            objective,
            bound,
            node_count,
        }),
        None => Ok(MilpSolution {
            status: if limited {
                MilpStatus::ResourceLimit
            } else {
                MilpStatus::Infeasible
            },
            x: Vec::new(),
            objective: f64::INFINITY,
            bound,
            node_count,
        }),
    }
}

fn gap_tol(config: &MilpConfig, incumbent: f64) -> f64 {
    config.abs_gap.max(config.rel_gap * incumbent.abs())
}

fn apply_overrides(relaxed: &mut MilpProblem, original: &MilpProblem, ovr: &[(usize, f64, f64)]) {
    for (v, o) in relaxed.variables.iter_mut().zip(&original.variables) {
        v.lower = o.lower;
        v.upper = o.upper;
    }
    for &(j, lo, hi) in ovr {
        let v = &mut relaxed.variables[j];
        v.lower = v.lower.max(lo);
        v.upper = v.upper.min(hi);
    }
}

fn clamp_override(
    original: &MilpProblem,
    prior: &[(usize, f64, f64)],
    j: usize,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let mut l = original.variables[j].lower;
    let mut u = original.variables[j].upper;
    for &(k, plo, phi) in prior {
        if k == j {
            l = l.max(plo);
            u = u.min(phi);
        }
    }
    (l.max(lo), u.min(hi))
}

#[cfg(test)]
mod tests {
    use super::super::{ProblemBuilder, RowTag, Sense, Stage, VarKind};
    use super::*;

    #[test]
    fn knapsack_two_items() {
        // max 3a + 2b s.t. a + b <= 1, binary -> as min of negation: a=1.
        let mut b = ProblemBuilder::new();
        let a = b.add_var("a", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        let bb = b.add_var("b", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        b.add_row("cap", vec![(a, 1.0), (bb, 1.0)], Sense::Le, 1.0, RowTag::Local);
        b.add_objective(a, -3.0);
        b.add_objective(bb, -2.0);
        let p = b.build();
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!(s.x[1].abs() < 1e-9);
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn continuous_problem_matches_lp() {
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Continuous, 0.0, 10.0, Stage::Second, None);
        b.add_row("r", vec![(x, 1.0)], Sense::Ge, 2.5, RowTag::Local);
        b.add_objective(x, 1.0);
        let p = b.build();
        let milp = solve_milp(&p, &MilpConfig::default()).unwrap();
        let lp = super::super::solve_lp(&p, &LpConfig::default()).unwrap();
        assert_eq!(milp.status, MilpStatus::Optimal);
        assert!((milp.objective - lp.objective).abs() < 1e-9);
        assert_eq!(milp.node_count, 1);
    }

    #[test]
    fn integral_relaxation_solves_at_root() {
        // Totally unimodular: x + y = 1 over binaries with distinct costs.
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        let y = b.add_var("y", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        b.add_row("pick", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.0, RowTag::Local);
        b.add_objective(x, 2.0);
        b.add_objective(y, 5.0);
        let p = b.build();
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.node_count, 1);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_integer_problem() {
        // 2x = 1 with x integer.
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Integer, 0.0, 5.0, Stage::First, None);
        b.add_row("odd", vec![(x, 2.0)], Sense::Eq, 1.0, RowTag::Local);
        b.add_objective(x, 1.0);
        let p = b.build();
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }
}
