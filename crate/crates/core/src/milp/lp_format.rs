use super::{MilpModel, VarKind};
use std::io::{self, Write};

fn term(out: &mut impl Write, coef: f64, name: &str, first: bool) -> io::Result<()> {
    if coef < 0.0 {
        write!(out, " - {} {name}", -coef)
    } else if first {
        write!(out, " {coef} {name}")
    } else {
        write!(out, " + {coef} {name}")
    }
}

fn expression(out: &mut impl Write, model: &MilpModel, terms: &[(usize, f64)]) -> io::Result<()> {
    if terms.is_empty() {
        return write!(out, " 0 {}", model.vars.first().map_or("x", |v| v.name.as_str()));
    }
    for (k, &(col, coef)) in terms.iter().enumerate() {
        term(out, coef, &model.vars[col].name, k == 0)?;
    }
    Ok(())
}

/// Writes `model` in CPLEX LP format. Two-sided rows become a pair of rows.
pub fn write_lp(model: &MilpModel, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    let objective: Vec<(usize, f64)> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.cost != 0.0)
        .map(|(c, v)| (c, v.cost))
        .collect();
    expression(&mut out, model, &objective)?;
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (k, row) in model.rows.iter().enumerate() {
        let name = format!("{}_{k}", row.tag.short_name());
        let mut side = |suffix: &str, sense: &str, rhs: f64| -> io::Result<()> {
            write!(out, " {name}{suffix}:")?;
            expression(&mut out, model, &row.terms)?;
            writeln!(out, " {sense} {rhs}")
        };
        if row.lower == row.upper {
            side("", "=", row.lower)?;
        } else {
            let both = row.lower.is_finite() && row.upper.is_finite();
            if row.lower.is_finite() {
                side(if both { "_lo" } else { "" }, ">=", row.lower)?;
            }
            if row.upper.is_finite() {
                side(if both { "_up" } else { "" }, "<=", row.upper)?;
            }
        }
    }
    writeln!(out, "Bounds")?;
    for v in &model.vars {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper)?,
            (true, false) => writeln!(out, " {} >= {}", v.name, v.lower)?,
            (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, v.upper)?,
            (false, false) => writeln!(out, " {} free", v.name)?,
        }
    }
    for (section, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        let names: Vec<&str> = model.vars.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if !names.is_empty() {
            writeln!(out, "{section}")?;
            for chunk in names.chunks(8) {
                writeln!(out, " {}", chunk.join(" "))?;
            }
        }
    }
    writeln!(out, "End")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConstraintTag;

    #[test]
    fn small_model_round_trips_to_text() {
        let mut m = MilpModel::default();
        let a = m.add_var("a".into(), VarKind::Binary, 0.0, 1.0, 2.0);
        let b = m.add_var("b".into(), VarKind::Continuous, 0.0, f64::INFINITY, 0.5);
        m.add_row(ConstraintTag::MandatoryAssignment, vec![(a, 1.0)], 1.0, 1.0);
        m.add_row(ConstraintTag::RoomTime, vec![(a, 3.0), (b, -1.0)], 0.0, 4.0);
        let mut buf = Vec::new();
        write_lp(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Minimize\n obj: 2 a + 0.5 b\n"));
        assert!(text.contains("_1_lo: 3 a - 1 b >= 0\n"));
        assert!(text.contains("_1_up: 3 a - 1 b <= 4\n"));
        assert!(text.contains(" b >= 0\n"));
        assert!(text.contains("Binaries\n a\n"));
        assert!(text.ends_with("End\n"));
    }
}
