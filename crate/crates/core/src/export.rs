//! CSV layouts for traces and scan grids.
//!
//! Trace CSV, one row per device evaluation:
//!
//! ```text
//! evaluation,start,iteration,phase_0..phase_{n-1},intensity_0..intensity_{n-1},relative_target,best_relative
//! ```
//!
//! Scan CSV is the grid itself: a header row `phase_a\phase_b,<axis...>`, then
//! one row per first-channel phase holding that phase followed by the
//! objective values along the second channel.

use std::io::Write;

use crate::calibration::{ConvergenceTrace, ScanGrid};

/// Column names of the trace CSV for `n` ports.
pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["evaluation".to_string(), "start".into(), "iteration".into()];
    h.extend((0..n).map(|j| format!("phase_{j}")));
    h.extend((0..n).map(|j| format!("intensity_{j}")));
    h.push("relative_target".into());
    h.push("best_relative".into());
    h
}

pub fn write_trace_csv<W: Write>(trace: &ConvergenceTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.n))?;
    for row in &trace.rows {
        let mut rec = vec![
            row.evaluation.to_string(),
            row.start.to_string(),
            row.iteration.to_string(),
        ];
        rec.extend(row.phases.iter().map(f64::to_string));
        rec.extend(row.per_port.iter().map(f64::to_string));
        rec.push(row.relative_target.to_string());
        rec.push(row.best_relative.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(grid: &ScanGrid, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![format!(
        "phase_{}\\phase_{}",
        grid.channels.0, grid.channels.1
    )];
    header.extend(grid.axis.iter().map(f64::to_string));
    w.write_record(&header)?;
    for (a, row) in grid.axis.iter().zip(&grid.values) {
        let mut rec = vec![a.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
