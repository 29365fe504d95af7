//! Export to the CPLEX LP text format.

use std::fmt::Write as _;

use super::{ProblemSpec, Relation, Sense, VarKind, VarRef};

const TERMS_PER_LINE: usize = 8;

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, spec: &ProblemSpec, terms: &[(VarRef, f64)]) {
    for (i, &(v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let name = &spec.vars[v.index()].name;
        if c.abs() == 1.0 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {} {name}", num(c.abs()));
        }
    }
}

/// Render a problem in LP format. Variable and constraint names are written
/// verbatim, so the output is stable across runs.
pub fn write_lp(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", spec.name);
    out.push_str(match spec.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let obj = spec.objective.normalized();
    write_terms(&mut out, spec, &obj);
    if spec.objective.constant != 0.0 {
        let c = spec.objective.constant;
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", num(c.abs()));
    } else if obj.is_empty() {
        out.push_str(" 0");
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &spec.constraints {
        let _ = write!(out, " {}:", c.name);
        let terms = c.expr.normalized();
        if terms.is_empty() {
            if let Some(first) = spec.vars.first() {
                let _ = write!(out, " 0 {}", first.name);
            }
        }
        write_terms(&mut out, spec, &terms);
        let op = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", num(c.effective_rhs()));
    }

    let mut bounds = String::new();
    for v in &spec.vars {
        let default = match v.kind {
            VarKind::Binary => v.lower == 0.0 && v.upper == 1.0,
            _ => v.lower == 0.0 && v.upper == f64::INFINITY,
        };
        if default {
            continue;
        }
        if v.lower == v.upper {
            let _ = writeln!(bounds, " {} = {}", v.name, num(v.lower));
        } else if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(bounds, " {} free", v.name);
        } else {
            let _ = writeln!(bounds, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    if !bounds.is_empty() {
        out.push_str("Bounds\n");
        out.push_str(&bounds);
    }

    let binaries: Vec<&str> = spec
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
