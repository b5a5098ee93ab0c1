//! Trajectory CSV: `time,event_kind,i,pos_1,...,pos_N`.
//!
//! Grid rows carry `sample` and an empty `i`; event rows carry `branch`, the
//! duplicated rank and the post-event configuration. Rows are time-ordered and
//! a sample precedes an event at the same time. Numbers are written with 17
//! significant digits so they parse back to the same bits.

use std::io::{self, BufRead, Write};

use super::{Configuration, EngineError, Trajectory};

/// One parsed data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub time: f64,
    /// `Some(rank)` for a branch row, `None` for a sample row.
    pub branch_index: Option<usize>,
    pub positions: Configuration,
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header(n: usize) -> String {
    let mut h = String::from("time,event_kind,i");
    for k in 1..=n {
        h.push_str(&format!(",pos_{k}"));
    }
    h
}

fn write_row(w: &mut impl Write, time: f64, branch: Option<usize>, positions: &[f64]) -> io::Result<()> {
    write!(w, "{}", format_f64(time))?;
    match branch {
        Some(i) => write!(w, ",branch,{i}")?,
        None => write!(w, ",sample,")?,
    }
    for x in positions {
        write!(w, ",{}", format_f64(*x))?;
    }
    writeln!(w)
}

pub fn write_trajectory(traj: &Trajectory, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", header(traj.n_particles()))?;
    let samples: Vec<(f64, &[f64])> = traj.grid().map(|g| g.rows().collect()).unwrap_or_default();
    let mut si = samples.into_iter().peekable();
    for e in traj.events() {
        while let Some(&(t, row)) = si.peek() {
            if t > e.time {
                break;
            }
            write_row(&mut w, t, None, row)?;
            si.next();
        }
        write_row(&mut w, e.time, Some(e.branch_index), e.post_config.as_slice())?;
    }
    for (t, row) in si {
        write_row(&mut w, t, None, row)?;
    }
    Ok(())
}

pub fn trajectory_to_string(traj: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_trajectory(traj, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

pub fn read_trajectory(r: impl BufRead) -> Result<Vec<CsvRow>, EngineError> {
    let mut lines = r.lines();
    let err = |line: usize, reason: String| EngineError::Csv { line, reason };
    let head = lines.next().ok_or_else(|| err(1, "missing header".into()))?.map_err(|e| err(1, e.to_string()))?;
    let cols: Vec<&str> = head.split(',').collect();
    if cols.len() < 4 || cols[..3] != ["time", "event_kind", "i"] {
        return Err(err(1, format!("unexpected header `{head}`")));
    }
    let n = cols.len() - 3;
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != n + 3 {
            return Err(err(lineno, format!("expected {} fields, got {}", n + 3, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(lineno, format!("`{s}`: {e}")));
        let time = num(f[0])?;
        let branch_index = match f[1] {
            "sample" => None,
            "branch" => Some(f[2].parse::<usize>().map_err(|e| err(lineno, format!("rank `{}`: {e}", f[2])))?),
            other => return Err(err(lineno, format!("unknown event kind `{other}`"))),
        };
        let positions = f[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
        let positions = Configuration::new(positions).map_err(|e| err(lineno, e.to_string()))?;
        rows.push(CsvRow { time, branch_index, positions });
    }
    Ok(rows)
}
