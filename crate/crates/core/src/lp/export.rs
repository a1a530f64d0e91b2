//! Fixed-format text listing of an [`LpModel`], for debugging.
//!
//! ```text
//! NAME     nwdro-lp
//! VARS     <n>
//! ROWS     <m>
//! OBJECTIVE
//!  <j> <c_j>              one line per nonzero cost
//! CONSTRAINTS
//!  R<i> <rel> <rhs>       rel is one of <=, =, >=
//!   <j> <a_ij>            one line per nonzero coefficient
//! BOUNDS
//!  <j> <lo> <hi>          one line per variable; infinities as -inf / inf
//! ENDATA
//! ```
//!
//! Numbers use 17 significant digits in scientific notation.

use std::fmt::Write;

use super::LpModel;

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub(super) fn listing(model: &LpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME     nwdro-lp");
    let _ = writeln!(out, "VARS     {}", model.num_vars());
    let _ = writeln!(out, "ROWS     {}", model.num_constraints());
    let _ = writeln!(out, "OBJECTIVE");
    for (j, &c) in model.objective().iter().enumerate() {
        if c != 0.0 {
            let _ = writeln!(out, " {j} {}", num(c));
        }
    }
    let _ = writeln!(out, "CONSTRAINTS");
    for (i, row) in model.constraints().iter().enumerate() {
        let _ = writeln!(out, " R{i} {} {}", row.relation.symbol(), num(row.rhs));
        for (j, &a) in row.coeffs.iter().enumerate() {
            if a != 0.0 {
                let _ = writeln!(out, "  {j} {}", num(a));
            }
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for (j, (&lo, &hi)) in model.lower().iter().zip(model.upper()).enumerate() {
        let _ = writeln!(out, " {j} {} {}", num(lo), num(hi));
    }
    let _ = writeln!(out, "ENDATA");
    out
}
