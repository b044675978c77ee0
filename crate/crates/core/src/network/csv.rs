//! CSV export of paths and event logs.

use super::EventLog;
use crate::path::PiecewisePath;
use std::io::{self, Write};

/// Writes `t, x_1..x_K` at each grid time.
pub fn write_path<W: Write>(mut w: W, path: &impl PiecewisePath, grid: &[f64]) -> io::Result<()> {
    write!(w, "t")?;
    for k in 1..=path.dim() {
        write!(w, ",x_{k}")?;
    }
    writeln!(w)?;
    for &t in grid {
        write!(w, "{t}")?;
        for v in path.eval(t) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes `t, event_type, node_from, node_to`; nodes are 1-based and the
/// outside world is left blank.
pub fn write_event_log<W: Write>(mut w: W, log: &EventLog) -> io::Result<()> {
    writeln!(w, "t,event_type,node_from,node_to")?;
    let fmt = |n: Option<u16>| n.map(|v| (v + 1).to_string()).unwrap_or_default();
    for (t, kind) in log.times().iter().zip(log.kinds()) {
        let (from, to) = kind.endpoints();
        writeln!(w, "{t},{},{},{}", kind.label(), fmt(from), fmt(to))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EventKind;

    #[test]
    fn event_log_rows() {
        let mut log = EventLog::new(vec![0, 0]);
        log.push(0.5, EventKind::Arrival { node: 1 });
        log.push(1.5, EventKind::Move { from: 1, to: 0 });
        log.set_horizon(2.0);
        let mut out = Vec::new();
        write_event_log(&mut out, &log).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,event_type,node_from,node_to\n0.5,arrival,,2\n1.5,move,2,1\n");
        let mut out = Vec::new();
        write_path(&mut out, &log.to_path(), &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,x_1,x_2\n0,0,0\n1,0,1\n2,1,0\n");
    }
}
