//! CPLEX LP text export, for inspecting models in external tools.

use std::fmt::Write;

use super::{LinearProgram, Sense, VarId};

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out
        .chars()
        .next()
        .is_none_or(|c| c.is_ascii_digit() || c == '.')
    {
        out.insert(0, '_');
    }
    out
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (i, &(v, a)) in terms.iter().enumerate() {
        let sign = if a < 0.0 {
            "-"
        } else if i == 0 {
            ""
        } else {
            "+"
        };
        let _ = write!(out, " {sign} {} {}", a.abs(), names[v.0]);
    }
}

/// Render `lp` in CPLEX LP format. Variables in `binaries` go to the
/// `Binaries` section instead of `Bounds`.
pub fn write_lp_format(lp: &LinearProgram, binaries: &[VarId]) -> String {
    let names: Vec<String> = lp.variables.iter().map(|v| sanitize(&v.name)).collect();
    let mut is_bin = vec![false; lp.num_vars()];
    for b in binaries {
        is_bin[b.0] = true;
    }
    let mut out = String::from("\\ generated by netslice\nMinimize\n obj:");
    write_terms(&mut out, &lp.objective, &names);
    if lp.objective_offset != 0.0 {
        let _ = write!(out, " + {} __offset", lp.objective_offset);
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " r{i}_{}:", sanitize(&row.name));
        write_terms(&mut out, &row.coeffs, &names);
        let sym = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {sym} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    if lp.objective_offset != 0.0 {
        out.push_str(" __offset = 1\n");
    }
    for (j, v) in lp.variables.iter().enumerate() {
        if is_bin[j] {
            continue;
        }
        if v.upper.is_infinite() {
            let _ = writeln!(out, " {} >= {}", names[j], v.lower);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, names[j], v.upper);
        }
    }
    if binaries.iter().any(|_| true) {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {}", names[b.0]);
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_in_order() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x[1,2]", 0.0, 1.0);
        let r = lp.add_var("r", 0.0, f64::INFINITY);
        lp.add_row("cap", vec![(x, 2.0), (r, -1.0)], Sense::Le, 3.0);
        lp.objective = vec![(x, 1.5)];
        let text = write_lp_format(&lp, &[x]);
        let pos: Vec<usize> = ["Minimize", "Subject To", "Bounds", "Binaries", "End"]
            .iter()
            .map(|s| text.find(s).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("x[1_2]"));
        assert!(text.contains("- 1 r <= 3"));
        assert!(text.contains(" r >= 0"));
    }
}
