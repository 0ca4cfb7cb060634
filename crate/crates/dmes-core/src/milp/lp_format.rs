//! Debug export to the industry-standard LP text format, for cross-checking
//! problems with third-party solvers.

use super::{MilpProblem, Sense, VarKind};
use std::io::{self, Write};

pub fn write_lp(problem: &MilpProblem, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    if problem.objective.is_empty() {
        write!(out, " 0 {}", sanitize(&problem.variables[0].id))?;
    }
    for &(j, c) in &problem.objective {
        write!(out, " {} {}", signed(c), sanitize(&problem.variables[j].id))?;
    }
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    for (i, row) in problem.constraints.iter().enumerate() {
        write!(out, " {}:", sanitize_row(&row.id, i))?;
        if row.terms.is_empty() {
            write!(out, " 0 {}", sanitize(&problem.variables[0].id))?;
        }
        for &(j, a) in &row.terms {
            write!(out, " {} {}", signed(a), sanitize(&problem.variables[j].id))?;
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(out, " {} {}", op, row.rhs)?;
    }

    writeln!(out, "Bounds")?;
    for v in &problem.variables {
        let id = sanitize(&v.id);
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => writeln!(out, " {} <= {} <= {}", v.lower, id, v.upper)?,
            (true, false) => writeln!(out, " {} >= {}", id, v.lower)?,
            (false, true) => writeln!(out, " -inf <= {} <= {}", id, v.upper)?,
            (false, false) => writeln!(out, " {} free", id)?,
        }
    }

    let generals: Vec<&str> = problem
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Integer)
        .map(|v| v.id.as_str())
        .collect();
    if !generals.is_empty() {
        writeln!(out, "General")?;
        for g in generals {
            writeln!(out, " {}", sanitize(g))?;
        }
    }
    let binaries: Vec<&str> = problem
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id.as_str())
        .collect();
    if !binaries.is_empty() {
        writeln!(out, "Binary")?;
        for b in binaries {
            writeln!(out, " {}", sanitize(b))?;
        }
    }
    writeln!(out, "End")
}

fn signed(c: f64) -> String {
    if c >= 0.0 {
        format!("+{}", c)
    } else {
        format!("{}", c)
    }
}

/// LP format forbids several characters common in our structured ids.
fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn sanitize_row(id: &str, idx: usize) -> String {
    if id.is_empty() {
        format!("r{}", idx)
    } else {
        sanitize(id)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ProblemBuilder, RowTag, Sense, Stage, VarKind};
    use super::*;

    #[test]
    fn exports_readable_text() {
        let mut b = ProblemBuilder::new();
        let x = b.add_var("x.1", VarKind::Binary, 0.0, 1.0, Stage::First, None);
        let y = b.add_var("y", VarKind::Continuous, 0.0, 4.5, Stage::Second, None);
        b.add_row("cover", vec![(x, 2.0), (y, -1.0)], Sense::Ge, 1.0, RowTag::Local);
        b.add_objective(x, 3.0);
        b.add_objective(y, 1.0);
        let p = b.build();
        let mut buf = Vec::new();
        write_lp(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains("cover: +2 x_1 -1 y >= 1"));
        assert!(text.contains("Binary"));
        assert!(text.ends_with("End\n"));
    }
}
