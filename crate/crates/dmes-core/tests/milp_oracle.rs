//! Randomized cross-checks of the embedded solver against exhaustive
//! enumeration, plus duality and bound-behavior properties.

use dmes_core::milp::{
    solve_lp, solve_milp, LpConfig, LpStatus, MilpConfig, MilpProblem, MilpStatus, ProblemBuilder,
    RowTag, Sense, Stage, VarKind,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng) -> MilpProblem {
    let n_int = rng.gen_range(1..=6);
    let n_cont = rng.gen_range(0..=2);
    let mut b = ProblemBuilder::new();
    let mut domain_product = 1usize;
    for i in 0..n_int {
        let lo = rng.gen_range(0..=2) as f64;
        let width = rng.gen_range(0..=5).min(9 / n_int) as f64;
        domain_product *= width as usize + 1;
        b.add_var(
            format!("i{i}"),
            VarKind::Integer,
            lo,
            lo + width,
            Stage::First,
            None,
        );
    }
    if domain_product > 4096 {
        // Keep the enumeration oracle cheap; resample.
        return random_problem(rng);
    }
    for i in 0..n_cont {
        b.add_var(
            format!("c{i}"),
            VarKind::Continuous,
            0.0,
            rng.gen_range(1.0..6.0_f64).round(),
            Stage::Second,
            None,
        );
    }
    let n = n_int + n_cont;
    let rows = rng.gen_range(1..=4);
    for r in 0..rows {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let c = rng.gen_range(-3..=3);
                if c != 0 {
                    terms.push((j, c as f64));
                }
            }
        }
        if terms.is_empty() {
            terms.push((rng.gen_range(0..n), 1.0));
        }
        let sense = match rng.gen_range(0..6) {
            0 | 1 => Sense::Le,
            2 | 3 => Sense::Ge,
            4 => Sense::Eq,
            _ => Sense::Le,
        };
        let rhs = rng.gen_range(-6..=8) as f64;
        b.add_row(format!("r{r}"), terms, sense, rhs, RowTag::Local);
    }
    for j in 0..n {
        let c = rng.gen_range(-4..=4);
        if c != 0 {
            b.add_objective(j, c as f64);
        }
    }
    b.build()
}

/// Enumerates all integer assignments, solving the continuous remainder per
/// assignment, fully independent of branch and bound.
fn enumerate_optimum(p: &MilpProblem) -> Option<f64> {
    let ints: Vec<usize> = p
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Integer)
        .map(|(j, _)| j)
        .collect();
    let mut assignment: Vec<f64> = ints.iter().map(|&j| p.variables[j].lower).collect();
    let mut best: Option<f64> = None;
    loop {
        let mut fixed = p.clone();
        for (k, &j) in ints.iter().enumerate() {
            fixed.variables[j].lower = assignment[k];
            fixed.variables[j].upper = assignment[k];
            fixed.variables[j].kind = VarKind::Continuous;
        }
        if let Ok(sol) = solve_lp(&fixed, &LpConfig::default()) {
            if sol.status == LpStatus::Optimal {
                best = Some(match best {
                    Some(b) => b.min(sol.objective),
                    None => sol.objective,
                });
            }
        }
        // Advance the odometer.
        let mut k = 0;
        loop {
            if k == ints.len() {
                return best;
            }
            assignment[k] += 1.0;
            if assignment[k] <= p.variables[ints[k]].upper + 0.5 {
                break;
            }
            assignment[k] = p.variables[ints[k]].lower;
            k += 1;
        }
    }
}

#[test]
fn milp_matches_enumeration_on_1000_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_911);
    let cfg = MilpConfig::default();
    let mut optimal = 0;
    for case in 0..1000 {
        let p = random_problem(&mut rng);
        let milp = solve_milp(&p, &cfg).expect("solver failure");
        let oracle = enumerate_optimum(&p);
        match (milp.status, oracle) {
            (MilpStatus::Optimal, Some(reference)) => {
                optimal += 1;
                let diff = (milp.objective - reference).abs();
                assert!(
                    diff <= 1e-6 * (1.0 + reference.abs()),
                    "case {case}: milp {} vs enumeration {reference}",
                    milp.objective
                );
                assert!(
                    milp.objective >= milp.bound - 1e-6 * (1.0 + milp.objective.abs()),
                    "case {case}: objective below proven bound"
                );
                // Returned point must be feasible and integral.
                for c in &p.constraints {
                    assert!(
                        MilpProblem::row_violation(c, &milp.x) <= 1e-6,
                        "case {case}: row {} violated",
                        c.id
                    );
                }
                for (j, v) in p.variables.iter().enumerate() {
                    if v.kind == VarKind::Integer {
                        assert!((milp.x[j] - milp.x[j].round()).abs() <= 1e-6);
                    }
                }
            }
            (MilpStatus::Infeasible, None) => {}
            (status, reference) => {
                panic!("case {case}: status {status:?} vs oracle {reference:?}");
            }
        }
    }
    // The generator should produce a healthy mix of feasible instances.
    assert!(optimal > 300, "only {optimal} feasible instances");
}

#[test]
fn lp_duality_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7_771);
    for case in 0..500 {
        let p = random_problem(&mut rng);
        let sol = solve_lp(&p, &LpConfig::default()).expect("solver failure");
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let gap = (sol.objective - sol.dual_objective(&p)).abs();
        assert!(
            gap <= 1e-6 * (1.0 + sol.objective.abs()),
            "case {case}: duality gap {gap}"
        );
        // Complementary slackness: nonbinding rows carry zero duals.
        for (i, c) in p.constraints.iter().enumerate() {
            let lhs = MilpProblem::eval_terms(&c.terms, &sol.x);
            let slack = match c.sense {
                Sense::Le => c.rhs - lhs,
                Sense::Ge => lhs - c.rhs,
                Sense::Eq => 0.0,
            };
            assert!(
                (slack * sol.duals[i]).abs() <= 1e-5 * (1.0 + sol.objective.abs()),
                "case {case}: complementary slackness violated on row {i}"
            );
        }
        // Primal feasibility of the reported point.
        for c in &p.constraints {
            assert!(MilpProblem::row_violation(c, &sol.x) <= 1e-6);
        }
    }
}

#[test]
fn warm_start_agrees_with_cold_start_after_bound_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let p = random_problem(&mut rng);
        let cfg = LpConfig::default();
        let Ok((first, basis)) = dmes_core::milp::solve_lp_warm(&p, &cfg, None) else {
            continue;
        };
        if first.status != LpStatus::Optimal {
            continue;
        }
        let mut tightened = p.clone();
        let j = rng.gen_range(0..tightened.variables.len());
        let v = &mut tightened.variables[j];
        if v.upper.is_finite() && v.upper > v.lower {
            v.upper = (v.upper - 1.0).max(v.lower);
        }
        let warm = dmes_core::milp::solve_lp_warm(&tightened, &cfg, Some(&basis)).unwrap();
        let cold = solve_lp(&tightened, &cfg).unwrap();
        assert_eq!(warm.0.status, cold.status);
        if cold.status == LpStatus::Optimal {
            assert!(
                (warm.0.objective - cold.objective).abs() <= 1e-6 * (1.0 + cold.objective.abs())
            );
        }
    }
}
