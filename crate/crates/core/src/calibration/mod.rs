//! Learning codewords from intensity readings alone.
//!
//! Every routine here talks to the device through [`IntensityOracle`] only.
//! The figure of merit is the relative intensity of the target port; the
//! optimisers minimise `J_k(x) = −I_k(x)`.

mod gbnm;
mod nelder_mead;
mod scan;
mod systematic;

pub use gbnm::{
    calibrate_codebook, gbnm_calibrate, single_start_calibrate, CodebookCalibration, GbnmConfig,
    GbnmOutcome, StartSummary,
};
pub use nelder_mead::{NelderMead, NelderMeadCoefficients, NelderMeadOutcome, Termination};
pub use scan::{analyze_scan, scan_error_space, CellMinima, ScanAnalysis, ScanGrid, ScanRequest};
pub use systematic::{systematic_calibrate, ChannelMapping, StageMapping, SweepPair};

use serde::{Deserialize, Serialize};

use crate::device::{IntensityOracle, IntensityReading, PhaseProfile};
use crate::error::{Error, Result};

/// `J_k(x) = −I_k(x)`: one device evaluation.
pub fn evaluate_objective<O: IntensityOracle + ?Sized>(
    dev: &mut O,
    k: usize,
    x: &PhaseProfile,
) -> Result<f64> {
    check_port(dev.ports(), k)?;
    Ok(-dev.measure(x)?.per_port[k])
}

pub(crate) fn check_port(n: usize, k: usize) -> Result<()> {
    if k >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k,
            context: "target port",
        });
    }
    Ok(())
}

/// One device evaluation made during a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub evaluation: usize,
    pub start: usize,
    pub iteration: usize,
    pub phases: Vec<f64>,
    pub per_port: Vec<f64>,
    pub relative_target: f64,
    /// Running maximum of `relative_target` up to and including this row.
    pub best_relative: f64,
}

/// Every evaluation of one calibration run, plus the best point seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub n: usize,
    pub target_port: usize,
    pub rows: Vec<TraceRow>,
    pub best_phases: Vec<f64>,
    pub best_relative: f64,
}

impl ConvergenceTrace {
    pub fn new(n: usize, target_port: usize) -> Self {
        Self {
            n,
            target_port,
            rows: Vec::new(),
            best_phases: Vec::new(),
            best_relative: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, start: usize, iteration: usize, x: &PhaseProfile, reading: &IntensityReading) {
        let relative_target = reading.relative[self.target_port];
        if relative_target > self.best_relative || self.rows.is_empty() {
            self.best_relative = relative_target;
            self.best_phases = x.phases.clone();
        }
        self.rows.push(TraceRow {
            evaluation: self.rows.len(),
            start,
            iteration,
            phases: x.phases.clone(),
            per_port: reading.per_port.clone(),
            relative_target,
            best_relative: self.best_relative,
        });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Measures through `dev` and records every reading in a trace.
pub(crate) struct Recorder<'a, O: IntensityOracle + ?Sized> {
    dev: &'a mut O,
    pub trace: ConvergenceTrace,
    pub start: usize,
    pub iteration: usize,
}

impl<'a, O: IntensityOracle + ?Sized> Recorder<'a, O> {
    pub fn new(dev: &'a mut O, target_port: usize) -> Self {
        let n = dev.ports();
        Self {
            dev,
            trace: ConvergenceTrace::new(n, target_port),
            start: 0,
            iteration: 0,
        }
    }

    pub fn measure(&mut self, x: &PhaseProfile) -> Result<IntensityReading> {
        let reading = self.dev.measure(x)?;
        self.trace.push(self.start, self.iteration, x, &reading);
        Ok(reading)
    }

    /// `J_k` at `x`, recorded.
    pub fn objective(&mut self, x: &PhaseProfile) -> Result<f64> {
        let k = self.trace.target_port;
        Ok(-self.measure(x)?.per_port[k])
    }
}
