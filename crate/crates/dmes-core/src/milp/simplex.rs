//! Bounded-variable revised simplex with dual extraction.
//!
//! Dense explicit basis inverse with product-form updates and periodic
//! refactorization; this is adequate at district desk scale and keeps the
//! dual solution exact enough for Benders cuts. Phase 1 runs the composite
//! (infeasibility-sum) method from any starting basis, which doubles as the
//! warm-start path: re-solves after objective, rhs or bound changes restart
//! from the previous basis and typically finish in a handful of pivots.

use super::{MilpError, MilpProblem, Sense};

const PIVOT_TOL: f64 = 1e-9;
const DEGEN_STEP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LpConfig {
    /// Primal feasibility tolerance on basic-variable bound violations.
    pub feas_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub opt_tol: f64,
    /// Pivot cap; 0 means auto-scale with problem size.
    pub max_iters: usize,
    /// Refactorize the basis inverse every this many pivots.
    pub refactor_every: usize,
    /// Switch to Bland's rule after this many consecutive degenerate pivots.
    pub bland_after: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            max_iters: 0,
            refactor_every: 100,
            bland_after: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values. Populated for `Optimal`; best-effort otherwise.
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual per constraint, signed as the objective change per unit
    /// increase of the rhs. For `Infeasible` these are the phase-1 duals
    /// (a Farkas-style infeasibility certificate).
    pub duals: Vec<f64>,
    /// One reduced cost per structural variable (zero on basics).
    pub reduced_costs: Vec<f64>,
}

impl LpSolution {
    /// Dual objective via the identity `c·x = y·b + Σ d_j·x_j`; deviation
    /// from the primal objective measures accumulated factorization error.
    pub fn dual_objective(&self, problem: &MilpProblem) -> f64 {
        let rows: f64 = self
            .duals
            .iter()
            .zip(&problem.constraints)
            .map(|(y, c)| y * c.rhs)
            .sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&self.x)
            .map(|(d, x)| d * x)
            .sum();
        rows + bounds
    }
}

/// Simplex basis snapshot for warm starts.
#[derive(Debug, Clone)]
pub struct Basis {
    basic: Vec<usize>,
    state: Vec<ColState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
    FreeZero,
}

pub fn solve_lp(problem: &MilpProblem, config: &LpConfig) -> Result<LpSolution, MilpError> {
    solve_lp_warm(problem, config, None).map(|(s, _)| s)
}

/// Solves the LP relaxation, optionally warm-starting from a previous basis
/// of a problem with the same variable/constraint shape.
pub fn solve_lp_warm(
    problem: &MilpProblem,
    config: &LpConfig,
    warm: Option<&Basis>,
) -> Result<(LpSolution, Basis), MilpError> {
    problem.check()?;
    if problem.constraints.is_empty() {
        return solve_unconstrained(problem);
    }
    let mut w = Worker::new(problem, config);
    match warm {
        Some(b) if w.load_basis(b) => {}
        _ => w.cold_basis(),
    }
    if w.refactorize().is_err() {
        // Warm basis singular for this data; fall back to the slack basis.
        w.cold_basis();
        w.refactorize()
            .map_err(|_| MilpError::NumericalFailure("singular slack basis".into()))?;
    }
    let status = w.primal()?;
    Ok(w.extract(status))
}

fn solve_unconstrained(problem: &MilpProblem) -> Result<(LpSolution, Basis), MilpError> {
    let c = problem.objective_dense();
    let mut x = vec![0.0; problem.variables.len()];
    let mut objective = 0.0;
    for (j, v) in problem.variables.iter().enumerate() {
        let cj = c[j];
        let val = if cj > 0.0 {
            v.lower
        } else if cj < 0.0 {
            v.upper
        } else if v.lower.is_finite() {
            v.lower
        } else if v.upper.is_finite() {
            v.upper
        } else {
            0.0
        };
        if !val.is_finite() && cj != 0.0 {
            return Ok((
                LpSolution {
                    status: LpStatus::Unbounded,
                    x: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    duals: Vec::new(),
                    reduced_costs: Vec::new(),
                },
                Basis {
                    basic: Vec::new(),
                    state: Vec::new(),
                },
            ));
        }
        let val = if val.is_finite() { val } else { 0.0 };
        x[j] = val;
        objective += cj * val;
    }
    let reduced_costs = c;
    Ok((
        LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            duals: Vec::new(),
            reduced_costs,
        },
        Basis {
            basic: Vec::new(),
            state: Vec::new(),
        },
    ))
}

struct Worker {
    cfg: LpConfig,
    m: usize,
    n: usize,
    ncols: usize,
    /// Structural columns, sparse by row.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    basic: Vec<usize>,
    where_basic: Vec<usize>,
    state: Vec<ColState>,
    /// Row-major m x m basis inverse.
    binv: Vec<f64>,
    beta: Vec<f64>,
    // Scratch
    work_col: Vec<f64>,
    duals: Vec<f64>,
    pivots_since_refactor: usize,
    degen_streak: usize,
    bland: bool,
    iters: usize,
    max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

enum Step {
    Optimal,
    Unbounded,
    Progress,
}

const NONE: usize = usize::MAX;

impl Worker {
    fn new(problem: &MilpProblem, config: &LpConfig) -> Self {
        let m = problem.constraints.len();
        let n = problem.variables.len();
        let ncols = n + m;
        let mut cols = vec![Vec::new(); n];
        for (i, c) in problem.constraints.iter().enumerate() {
            for &(j, a) in &c.terms {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        // Merge duplicate variable references within one row.
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(i, a) in col.iter() {
                match merged.last_mut() {
                    Some((k, acc)) if *k == i => *acc += a,
                    _ => merged.push((i, a)),
                }
            }
            *col = merged;
        }
        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        for v in &problem.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for c in &problem.constraints {
            match c.sense {
                Sense::Le => {
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                }
                Sense::Ge => {
                    lower.push(f64::NEG_INFINITY);
                    upper.push(0.0);
                }
                Sense::Eq => {
                    lower.push(0.0);
                    upper.push(0.0);
                }
            }
        }
        let mut cost = problem.objective_dense();
        cost.resize(ncols, 0.0);
        let rhs: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
        let max_iters = if config.max_iters > 0 {
            config.max_iters
        } else {
            2_000 + 60 * (m + n)
        };
        Self {
            cfg: config.clone(),
            m,
            n,
            ncols,
            cols,
            lower,
            upper,
            cost,
            rhs,
            basic: vec![0; m],
            where_basic: vec![NONE; ncols],
            state: vec![ColState::AtLower; ncols],
            binv: vec![0.0; m * m],
            beta: vec![0.0; m],
            work_col: vec![0.0; m],
            duals: vec![0.0; m],
            pivots_since_refactor: 0,
            degen_streak: 0,
            bland: false,
            iters: 0,
            max_iters,
        }
    }

    fn cold_basis(&mut self) {
        self.where_basic.iter_mut().for_each(|w| *w = NONE);
        for j in 0..self.n {
            self.state[j] = if self.lower[j].is_finite() {
                ColState::AtLower
            } else if self.upper[j].is_finite() {
                ColState::AtUpper
            } else {
                ColState::FreeZero
            };
        }
        for i in 0..self.m {
            let s = self.n + i;
            self.basic[i] = s;
            self.where_basic[s] = i;
            self.state[s] = ColState::Basic;
        }
    }

    fn load_basis(&mut self, b: &Basis) -> bool {
        if b.basic.len() != self.m || b.state.len() != self.ncols {
            return false;
        }
        let mut count = 0usize;
        for (j, &st) in b.state.iter().enumerate() {
            if st == ColState::Basic {
                count += 1;
            } else {
                // Bounds may have changed since the basis was captured.
                let fixed = match st {
                    ColState::AtLower if !self.lower[j].is_finite() => false,
                    ColState::AtUpper if !self.upper[j].is_finite() => false,
                    _ => true,
                };
                if !fixed {
                    return false;
                }
            }
        }
        if count != self.m {
            return false;
        }
        self.where_basic.iter_mut().for_each(|w| *w = NONE);
        for (i, &j) in b.basic.iter().enumerate() {
            if j >= self.ncols || b.state[j] != ColState::Basic {
                return false;
            }
            self.basic[i] = j;
            self.where_basic[j] = i;
        }
        self.state.copy_from_slice(&b.state);
        true
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::AtLower => self.lower[j],
            ColState::AtUpper => self.upper[j],
            ColState::FreeZero => 0.0,
            ColState::Basic => unreachable!("basic column has no nonbasic value"),
        }
    }

    /// Rebuilds the dense inverse and the basic values from scratch.
    fn refactorize(&mut self) -> Result<(), ()> {
        let m = self.m;
        // Assemble B column-wise into a scratch matrix (row-major).
        let mut mat = vec![0.0; m * m];
        for (pos, &j) in self.basic.iter().enumerate() {
            if j >= self.n {
                mat[(j - self.n) * m + pos] = 1.0;
            } else {
                for &(i, a) in &self.cols[j] {
                    mat[i * m + pos] = a;
                }
            }
        }
        // Gauss-Jordan with partial pivoting.
        let binv = &mut self.binv;
        binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = mat[col * m + col].abs();
            for r in col + 1..m {
                let a = mat[r * m + col].abs();
                if a > best {
                    best = a;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return Err(());
            }
            if piv != col {
                // Row swaps on the augmented system [B | I] are elementary
                // operations; the accumulated product is still exactly B^-1.
                for k in 0..m {
                    mat.swap(col * m + k, piv * m + k);
                    binv.swap(col * m + k, piv * m + k);
                }
            }
            let d = mat[col * m + col];
            let inv = 1.0 / d;
            for k in 0..m {
                mat[col * m + k] *= inv;
                binv[col * m + k] *= inv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        mat[r * m + k] -= f * mat[col * m + k];
                        binv[r * m + k] -= f * binv[col * m + k];
                    }
                }
            }
        }
        self.recompute_beta();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn recompute_beta(&mut self) {
        let m = self.m;
        let mut rhs_eff = self.rhs.clone();
        for j in 0..self.ncols {
            if self.state[j] == ColState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v == 0.0 {
                continue;
            }
            if j >= self.n {
                rhs_eff[j - self.n] -= v;
            } else {
                for &(i, a) in &self.cols[j] {
                    rhs_eff[i] -= a * v;
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.beta[r] = row.iter().zip(&rhs_eff).map(|(a, b)| a * b).sum();
        }
    }

    /// w = B^-1 A_j into `work_col`.
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        self.work_col.iter_mut().for_each(|v| *v = 0.0);
        if j >= self.n {
            let i = j - self.n;
            for r in 0..m {
                self.work_col[r] = self.binv[r * m + i];
            }
        } else {
            for &(i, a) in &self.cols[j] {
                for r in 0..m {
                    self.work_col[r] += a * self.binv[r * m + i];
                }
            }
        }
    }

    /// y = c_B^T B^-1 for the given per-column cost accessor.
    fn compute_duals(&mut self, phase: Phase) {
        let m = self.m;
        self.duals.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..m {
            let cb = self.basic_cost(r, phase);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (y, a) in self.duals.iter_mut().zip(row) {
                    *y += cb * a;
                }
            }
        }
    }

    fn basic_cost(&self, pos: usize, phase: Phase) -> f64 {
        match phase {
            Phase::Two => self.cost[self.basic[pos]],
            Phase::One => {
                let j = self.basic[pos];
                let v = self.beta[pos];
                if v < self.lower[j] - self.cfg.feas_tol {
                    -1.0
                } else if v > self.upper[j] + self.cfg.feas_tol {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, phase: Phase) -> f64 {
        let cj = match phase {
            Phase::Two => self.cost[j],
            Phase::One => 0.0,
        };
        if j >= self.n {
            cj - self.duals[j - self.n]
        } else {
            let mut d = cj;
            for &(i, a) in &self.cols[j] {
                d -= a * self.duals[i];
            }
            d
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for r in 0..self.m {
            let j = self.basic[r];
            let v = self.beta[r];
            if v < self.lower[j] {
                total += self.lower[j] - v;
            } else if v > self.upper[j] {
                total += v - self.upper[j];
            }
        }
        total
    }

    fn primal(&mut self) -> Result<LpStatus, MilpError> {
        loop {
            if self.infeasibility() <= self.cfg.feas_tol * (1.0 + self.rhs_scale()) {
                break;
            }
            match self.iterate(Phase::One)? {
                Step::Optimal => {
                    // Phase-1 optimum with residual infeasibility: keep the
                    // current duals as the infeasibility certificate.
                    self.compute_duals(Phase::One);
                    return Ok(LpStatus::Infeasible);
                }
                Step::Unbounded => {
                    return Err(MilpError::NumericalFailure(
                        "unbounded phase-1 direction".into(),
                    ))
                }
                Step::Progress => {}
            }
        }
        loop {
            match self.iterate(Phase::Two)? {
                Step::Optimal => return Ok(LpStatus::Optimal),
                Step::Unbounded => return Ok(LpStatus::Unbounded),
                Step::Progress => {
                    // Phase-2 pivots can push a basic variable out of bounds
                    // only through numerical drift; re-enter phase 1 if so.
                    if self.pivots_since_refactor == 0
                        && self.infeasibility() > self.cfg.feas_tol * (1.0 + self.rhs_scale())
                    {
                        return self.primal();
                    }
                }
            }
        }
    }

    fn rhs_scale(&self) -> f64 {
        self.rhs.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    fn iterate(&mut self, phase: Phase) -> Result<Step, MilpError> {
        self.iters += 1;
        if self.iters > self.max_iters {
            return Err(MilpError::NumericalFailure(format!(
                "iteration cap {} exceeded",
                self.max_iters
            )));
        }
        if self.pivots_since_refactor >= self.cfg.refactor_every {
            self.refactorize()
                .map_err(|_| MilpError::NumericalFailure("singular basis on refactor".into()))?;
        }
        self.compute_duals(phase);

        // Pricing.
        let mut enter = NONE;
        let mut enter_d = 0.0;
        let mut best = self.cfg.opt_tol;
        for j in 0..self.ncols {
            let st = self.state[j];
            if st == ColState::Basic {
                continue;
            }
            let d = self.reduced_cost(j, phase);
            let eligible = match st {
                ColState::AtLower => d < -self.cfg.opt_tol,
                ColState::AtUpper => d > self.cfg.opt_tol,
                ColState::FreeZero => d.abs() > self.cfg.opt_tol,
                ColState::Basic => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                enter = j;
                enter_d = d;
                break;
            }
            if d.abs() > best {
                best = d.abs();
                enter = j;
                enter_d = d;
            }
        }
        if enter == NONE {
            return Ok(Step::Optimal);
        }
        let dir = if enter_d < 0.0 { 1.0 } else { -1.0 };

        self.ftran(enter);

        // Ratio test: smallest step that drives a basic variable to a
        // blocking bound, or flips the entering variable to its other bound.
        let mut t_best = f64::INFINITY;
        let mut leave_pos = NONE;
        let mut leave_to_upper = false;
        let mut bound_flip = false;
        let enter_range = self.upper[enter] - self.lower[enter];
        if enter_range.is_finite() && self.state[enter] != ColState::FreeZero {
            t_best = enter_range;
            bound_flip = true;
        }
        for r in 0..self.m {
            let s = dir * self.work_col[r];
            if s.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basic[r];
            let v = self.beta[r];
            let feas_low = v >= self.lower[j] - self.cfg.feas_tol;
            let feas_high = v <= self.upper[j] + self.cfg.feas_tol;
            // Basic value moves as v - t*s.
            let (limit, to_upper) = if s > 0.0 {
                if phase == Phase::One && !feas_high {
                    // Infeasible above: block where it regains feasibility.
                    (self.upper[j], true)
                } else if phase == Phase::One && !feas_low {
                    // Moving down worsens it; no block from this row.
                    (f64::NEG_INFINITY, false)
                } else {
                    (self.lower[j], false)
                }
            } else if phase == Phase::One && !feas_low {
                (self.lower[j], false)
            } else if phase == Phase::One && !feas_high {
                (f64::INFINITY, true)
            } else {
                (self.upper[j], true)
            };
            if !limit.is_finite() {
                continue;
            }
            let t = (v - limit) / s;
            if t < -self.cfg.feas_tol {
                continue;
            }
            let t = t.max(0.0);
            if t < t_best - 1e-12
                || (t < t_best + 1e-12
                    && leave_pos != NONE
                    && self.work_col[r].abs() > self.work_col[leave_pos].abs())
            {
                t_best = t;
                leave_pos = r;
                leave_to_upper = to_upper;
                bound_flip = false;
            }
        }

        if !t_best.is_finite() {
            return match phase {
                Phase::Two => Ok(Step::Unbounded),
                Phase::One => Err(MilpError::NumericalFailure(
                    "unblocked phase-1 step".into(),
                )),
            };
        }

        if t_best <= DEGEN_STEP {
            self.degen_streak += 1;
            if self.degen_streak > self.cfg.bland_after {
                self.bland = true;
            }
        } else {
            self.degen_streak = 0;
            self.bland = false;
        }

        // Apply the step to all basic variables.
        if t_best > 0.0 {
            for r in 0..self.m {
                let s = dir * self.work_col[r];
                if s != 0.0 {
                    self.beta[r] -= t_best * s;
                }
            }
        }

        if bound_flip {
            self.state[enter] = match self.state[enter] {
                ColState::AtLower => ColState::AtUpper,
                ColState::AtUpper => ColState::AtLower,
                other => other,
            };
            return Ok(Step::Progress);
        }

        let r = leave_pos;
        let leaving = self.basic[r];
        let w_r = self.work_col[r];
        if w_r.abs() < PIVOT_TOL {
            return Err(MilpError::NumericalFailure("tiny pivot".into()));
        }
        let enter_val = match self.state[enter] {
            ColState::AtLower => self.lower[enter],
            ColState::AtUpper => self.upper[enter],
            ColState::FreeZero => 0.0,
            ColState::Basic => unreachable!(),
        } + dir * t_best;

        self.state[leaving] = if leave_to_upper {
            ColState::AtUpper
        } else {
            ColState::AtLower
        };
        self.where_basic[leaving] = NONE;
        self.basic[r] = enter;
        self.where_basic[enter] = r;
        self.state[enter] = ColState::Basic;
        self.beta[r] = enter_val;

        // Product-form update of the inverse.
        let m = self.m;
        let inv_piv = 1.0 / w_r;
        // Split borrow: copy pivot row once, then update the others.
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.work_col[i] * inv_piv;
            if f != 0.0 {
                let row = &mut self.binv[i * m..(i + 1) * m];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            for v in row.iter_mut() {
                *v *= inv_piv;
            }
        }
        self.pivots_since_refactor += 1;
        Ok(Step::Progress)
    }

    fn extract(mut self, status: LpStatus) -> (LpSolution, Basis) {
        let basis = Basis {
            basic: self.basic.clone(),
            state: self.state.clone(),
        };
        match status {
            LpStatus::Unbounded => (
                LpSolution {
                    status,
                    x: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    duals: vec![0.0; self.m],
                    reduced_costs: vec![0.0; self.n],
                },
                basis,
            ),
            LpStatus::Infeasible => {
                // `duals` already holds the phase-1 certificate.
                let duals = self.duals.clone();
                (
                    LpSolution {
                        status,
                        x: Vec::new(),
                        objective: f64::INFINITY,
                        duals,
                        reduced_costs: vec![0.0; self.n],
                    },
                    basis,
                )
            }
            LpStatus::Optimal => {
                self.compute_duals(Phase::Two);
                let mut x = vec![0.0; self.n];
                for j in 0..self.n {
                    x[j] = match self.state[j] {
                        ColState::Basic => self.beta[self.where_basic[j]],
                        _ => self.nonbasic_value(j),
                    };
                }
                #[cfg(debug_assertions)]
                for (j, v) in x.iter().enumerate() {
                    let slack = 1e-5 * (1.0 + v.abs());
                    debug_assert!(
                        *v >= self.lower[j] - slack && *v <= self.upper[j] + slack,
                        "optimal point violates bounds: x[{j}] = {v} not in [{}, {}] (state {:?})",
                        self.lower[j],
                        self.upper[j],
                        self.state[j]
                    );
                }
                let mut reduced = vec![0.0; self.n];
                for j in 0..self.n {
                    if self.state[j] != ColState::Basic {
                        reduced[j] = self.reduced_cost(j, Phase::Two);
                    }
                }
                let objective = x
                    .iter()
                    .zip(&self.cost[..self.n])
                    .map(|(v, c)| v * c)
                    .sum();
                (
                    LpSolution {
                        status,
                        x,
                        objective,
                        duals: self.duals.clone(),
                        reduced_costs: reduced,
                    },
                    basis,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ProblemBuilder, RowTag, Sense, Stage, VarKind};
    use super::*;

    fn lp() -> LpConfig {
        LpConfig::default()
    }

    #[test]
    fn one_variable_binding_row() {
        // min x s.t. x >= 3, x >= 0
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        b.add_row("r", vec![(x, 1.0)], Sense::Ge, 3.0, RowTag::Local);
        b.add_objective(x, 1.0);
        let p = b.build();
        let s = solve_lp(&p, &lp()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_box() {
        // min x s.t. x >= 3 and x <= 2
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        b.add_row("lo", vec![(x, 1.0)], Sense::Ge, 3.0, RowTag::Local);
        b.add_row("hi", vec![(x, 1.0)], Sense::Le, 2.0, RowTag::Local);
        b.add_objective(x, 1.0);
        let p = b.build();
        let s = solve_lp(&p, &lp()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        // min -x s.t. x >= 0
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        b.add_row("r", vec![(x, 1.0)], Sense::Ge, 0.0, RowTag::Local);
        b.add_objective(x, -1.0);
        let p = b.build();
        let s = solve_lp(&p, &lp()).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_duals() {
        // min 2a + 3b s.t. a + b = 10, a <= 6  ->  a=6, b=4, obj 24.
        let mut b = ProblemBuilder::new();
        let a = b.add_var("a", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        let bb = b.add_var("b", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        b.add_row("sum", vec![(a, 1.0), (bb, 1.0)], Sense::Eq, 10.0, RowTag::Local);
        b.add_row("cap", vec![(a, 1.0)], Sense::Le, 6.0, RowTag::Local);
        b.add_objective(a, 2.0);
        b.add_objective(bb, 3.0);
        let p = b.build();
        let s = solve_lp(&p, &lp()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 6.0).abs() < 1e-8);
        assert!((s.x[1] - 4.0).abs() < 1e-8);
        assert!((s.objective - 24.0).abs() < 1e-8);
        // Raising the equality rhs by 1 costs 3 (b absorbs), relaxing the cap
        // swaps b for a and saves 1.
        assert!((s.duals[0] - 3.0).abs() < 1e-8);
        assert!((s.duals[1] + 1.0).abs() < 1e-8);
        let gap = (s.objective - s.dual_objective(&p)).abs();
        assert!(gap < 1e-8, "duality gap {gap}");
    }

    #[test]
    fn free_variable() {
        // min x + y, x free, y >= 0, x + y >= 2, x >= -5
        let mut b = ProblemBuilder::new();
        let x = b.add_var(
            "x",
            VarKind::Continuous,
            f64::NEG_INFINITY,
            f64::INFINITY,
            Stage::Second,
            None,
        );
        let y = b.add_var("y", VarKind::Continuous, 0.0, f64::INFINITY, Stage::Second, None);
        b.add_row("c1", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 2.0, RowTag::Local);
        b.add_row("c2", vec![(x, 1.0)], Sense::Ge, -5.0, RowTag::Local);
        b.add_objective(x, 1.0);
        b.add_objective(y, 1.0);
        let p = b.build();
        let s = solve_lp(&p, &lp()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-8);
    }

    #[test]
    fn warm_restart_after_objective_change() {
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x", VarKind::Continuous, 0.0, 10.0, Stage::Second, None);
        let y = b.add_var("y", VarKind::Continuous, 0.0, 10.0, Stage::Second, None);
        b.add_row("c", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 5.0, RowTag::Local);
        b.add_objective(x, 1.0);
        b.add_objective(y, 2.0);
        let p = b.build();
        let (s1, basis) = solve_lp_warm(&p, &lp(), None).unwrap();
        assert!((s1.objective - 5.0).abs() < 1e-8);

        let mut p2 = p.clone();
        p2.objective = vec![(0, 3.0), (1, 1.0)];
        let (s2, _) = solve_lp_warm(&p2, &lp(), Some(&basis)).unwrap();
        assert!((s2.objective - 5.0).abs() < 1e-8);
        assert!((s2.x[1] - 5.0).abs() < 1e-8);
    }
}
