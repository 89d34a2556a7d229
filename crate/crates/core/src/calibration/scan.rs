//! Two-channel slices of the objective landscape.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::check_port;
use crate::device::{IntensityOracle, PhaseProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub target_port: usize,
    pub channels: (usize, usize),
    pub range: (f64, f64),
    pub resolution: usize,
    /// Phases of the channels that are not scanned; zeros when `None`.
    pub base: Option<Vec<f64>>,
}

/// `values[i][j]` is `J_k` with the first channel at `axis[i]` and the second at `axis[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub target_port: usize,
    pub channels: (usize, usize),
    pub axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ScanGrid {
    pub fn resolution(&self) -> usize {
        self.axis.len()
    }

    fn step(&self) -> f64 {
        (self.axis[self.axis.len() - 1] - self.axis[0]) / (self.axis.len() - 1) as f64
    }

    /// Samples per 2π when the grid step divides 2π and the span is a whole
    /// number of periods.
    pub fn samples_per_period(&self) -> Option<usize> {
        let step = self.step();
        let per = TAU / step;
        let rounded = per.round();
        if rounded < 1.0 || (per - rounded).abs() > 1e-6 {
            return None;
        }
        let per = rounded as usize;
        if !(self.axis.len() - 1).is_multiple_of(per) {
            return None;
        }
        Some(per)
    }
}

/// Evaluates `J_k` on a `resolution × resolution` grid over `range` for two channels.
pub fn scan_error_space<O: IntensityOracle + ?Sized>(
    dev: &mut O,
    request: &ScanRequest,
) -> Result<ScanGrid> {
    let n = dev.ports();
    check_port(n, request.target_port)?;
    let (a, b) = request.channels;
    if a >= n || b >= n || a == b {
        return Err(Error::InvalidConfig(format!(
            "scan needs two distinct channels below {n}, got ({a}, {b})"
        )));
    }
    if request.resolution < 3 {
        return Err(Error::InvalidConfig(format!(
            "scan resolution must be >= 3, got {}",
            request.resolution
        )));
    }
    let (lo, hi) = request.range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidConfig(format!("invalid scan range [{lo}, {hi}]")));
    }
    let base = match &request.base {
        Some(b) if b.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
                context: "scan base profile",
            })
        }
        Some(b) => b.clone(),
        None => vec![0.0; n],
    };
    let res = request.resolution;
    let step = (hi - lo) / (res - 1) as f64;
    let axis: Vec<f64> = (0..res)
        .map(|i| if i == res - 1 { hi } else { lo + i as f64 * step })
        .collect();
    let mut values = Vec::with_capacity(res);
    let mut x = PhaseProfile::new(base);
    for &pa in &axis {
        let mut row = Vec::with_capacity(res);
        x.phases[a] = pa;
        for &pb in &axis {
            x.phases[b] = pb;
            row.push(-dev.measure(&x)?.per_port[request.target_port]);
        }
        values.push(row);
    }
    Ok(ScanGrid {
        target_port: request.target_port,
        channels: request.channels,
        axis,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMinima {
    pub row: usize,
    pub col: usize,
    pub minima: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAnalysis {
    /// Largest difference between samples one period apart, when the grid is periodic.
    pub periodicity_residual: Option<f64>,
    /// Grid indices of strict local minima.
    pub minima: Vec<(usize, usize)>,
    /// Strict local minima per 2π × 2π cell.
    pub cells: Vec<CellMinima>,
    /// Whether neighbours were taken with periodic wrap-around.
    pub periodic: bool,
}

/// Periodicity check, strict local minima and their count per 2π cell.
///
/// When the grid spans whole periods its last row and column repeat the first
/// and it is treated as a torus, so minima on cell borders are neither lost
/// nor double counted. Otherwise only interior points are tested.
pub fn analyze_scan(grid: &ScanGrid) -> ScanAnalysis {
    let res = grid.resolution();
    let v = &grid.values;
    let period = grid.samples_per_period();
    let periodicity_residual = period.map(|p| {
        let mut worst = 0.0f64;
        for i in 0..res {
            for j in 0..res {
                if i + p < res {
                    worst = worst.max((v[i][j] - v[i + p][j]).abs());
                }
                if j + p < res {
                    worst = worst.max((v[i][j] - v[i][j + p]).abs());
                }
            }
        }
        worst
    });

    let (size, periodic) = match period {
        Some(_) => (res - 1, true),
        None => (res, false),
    };
    let mut minima = Vec::new();
    for i in 0..size {
        for j in 0..size {
            if !periodic && (i == 0 || j == 0 || i == size - 1 || j == size - 1) {
                continue;
            }
            let centre = v[i][j];
            let mut strict = true;
            'nb: for di in [-1i64, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = (i as i64 + di).rem_euclid(size as i64) as usize;
                    let nj = (j as i64 + dj).rem_euclid(size as i64) as usize;
                    if v[ni][nj] <= centre {
                        strict = false;
                        break 'nb;
                    }
                }
            }
            if strict {
                minima.push((i, j));
            }
        }
    }

    let lo = grid.axis[0];
    let span = grid.axis[res - 1] - lo;
    let cells_per_axis = ((span / TAU) - 1e-9).ceil().max(1.0) as usize;
    let cell_of = |idx: usize| -> usize {
        (((grid.axis[idx] - lo) / TAU + 1e-9).floor() as usize).min(cells_per_axis - 1)
    };
    let mut cells: Vec<CellMinima> = (0..cells_per_axis)
        .flat_map(|row| (0..cells_per_axis).map(move |col| CellMinima { row, col, minima: 0 }))
        .collect();
    for &(i, j) in &minima {
        cells[cell_of(i) * cells_per_axis + cell_of(j)].minima += 1;
    }

    ScanAnalysis {
        periodicity_residual,
        minima,
        cells,
        periodic,
    }
}
