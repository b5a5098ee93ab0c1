use std::io::{self, Write};

use crate::engine::csv::format_f64;

use super::solver::FbpSolution;

/// `t,R_t,x_1..x_K` with the grid coordinates as column names, then one row
/// of density values per snapshot.
pub fn write_snapshots(sol: &FbpSolution, mut w: impl Write) -> io::Result<()> {
    let first = sol.final_state();
    write!(w, "t,R_t")?;
    for k in 0..first.len() {
        // Shortest decimal after removing the rounding noise of `(k - c) h`.
        write!(w, ",{}", (first.x(k) * 1e12).round() / 1e12)?;
    }
    writeln!(w)?;
    for s in &sol.snapshots {
        write!(w, "{},{}", format_f64(s.time()), format_f64(s.radius()))?;
        for v in s.values() {
            write!(w, ",{}", format_f64(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `t,R_t`
pub fn write_boundary(sol: &FbpSolution, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "t,R_t")?;
    for (t, r) in &sol.boundary {
        writeln!(w, "{},{}", format_f64(*t), format_f64(*r))?;
    }
    Ok(())
}
