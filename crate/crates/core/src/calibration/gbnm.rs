//! Globalised bounded Nelder–Mead (GBNM).
//!
//! Nelder–Mead runs from up to `n_starts` random points. A start ends when its
//! simplex collapses below `tolerance`, when the best vertex has not improved
//! for `stagnation_evaluations` evaluations, or after `max_iters_per_start`
//! iterations; the next start is drawn uniformly in the bounds, rejecting
//! points within `exclusion_radius` of the minima already found.
//!
//! Channel 0 is the phase reference and stays at 0 (clamped into the bounds);
//! the simplex lives in the remaining `n − 1` phases. Without that gauge fix
//! the simplex never collapses along the flat global-phase direction.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{NelderMead, NelderMeadCoefficients, Termination};
use super::{check_port, ConvergenceTrace, Recorder};
use crate::codebook::{Codebook, Codeword};
use crate::device::{IntensityOracle, PhaseProfile};
use crate::error::{Error, Result};

const START_DRAW_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbnmConfig {
    pub n_starts: usize,
    pub max_iters_per_start: usize,
    /// Simplex diameter (radians) at which a start counts as converged.
    pub tolerance: f64,
    pub initial_edge: f64,
    pub coefficients: NelderMeadCoefficients,
    /// Per-channel phase bounds; `None` uses the device's actuator range.
    pub bounds: Option<(f64, f64)>,
    pub exclusion_radius: f64,
    /// Restart when the best value is unimproved for this many evaluations.
    pub stagnation_evaluations: Option<usize>,
    /// Hard cap on device evaluations over all starts.
    pub max_evaluations: Option<usize>,
    /// Relative intensity a channel must reach to be reported as converged.
    pub convergence_threshold: f64,
    /// Re-measure every start's best point once after the last start and
    /// return the one that reads best now, instead of the best point ever seen.
    pub reassess_minima: bool,
    pub seed: u64,
}

impl Default for GbnmConfig {
    fn default() -> Self {
        Self {
            n_starts: 12,
            max_iters_per_start: 100,
            tolerance: 1e-3,
            initial_edge: FRAC_PI_2,
            coefficients: NelderMeadCoefficients::default(),
            bounds: None,
            exclusion_radius: FRAC_PI_4,
            stagnation_evaluations: Some(30),
            max_evaluations: None,
            convergence_threshold: 0.9,
            reassess_minima: true,
            seed: 0,
        }
    }
}

impl GbnmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig("n_starts must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.initial_edge > 0.0 && self.exclusion_radius >= 0.0) {
            return Err(Error::InvalidConfig(
                "tolerance, initial_edge and exclusion_radius must be non-negative (edge > 0)".into(),
            ));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!("invalid bounds [{lo}, {hi}]")));
            }
        }
        self.coefficients.validate()
    }

    /// Largest number of device evaluations a run with this configuration may use on `n` ports.
    pub fn evaluation_bound(&self, n: usize) -> usize {
        let d = n.saturating_sub(1).max(1);
        let per_start = self.max_iters_per_start.saturating_mul(d + 2).saturating_add(d + 1);
        let reassess = if self.reassess_minima && self.n_starts > 1 { self.n_starts } else { 0 };
        let total = self.n_starts.saturating_mul(per_start).saturating_add(reassess);
        self.max_evaluations.map_or(total, |cap| cap.min(total))
    }
}

/// How one start of a GBNM run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: usize,
    pub initial_phases: Vec<f64>,
    pub best_phases: Vec<f64>,
    pub best_objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbnmOutcome {
    pub codeword: Codeword,
    pub trace: ConvergenceTrace,
    /// Some start met the simplex tolerance and the best relative intensity
    /// reached the configured threshold.
    pub converged: bool,
    pub starts: Vec<StartSummary>,
    pub evaluations: usize,
}

fn full_profile(reference: f64, free: &[f64]) -> PhaseProfile {
    let mut phases = Vec::with_capacity(free.len() + 1);
    phases.push(reference);
    phases.extend_from_slice(free);
    PhaseProfile::new(phases)
}

fn resolve_bounds<O: IntensityOracle + ?Sized>(dev: &O, cfg: &GbnmConfig) -> Result<(f64, f64)> {
    let (dlo, dhi) = dev.bounds();
    let (lo, hi) = cfg.bounds.unwrap_or((dlo, dhi));
    if lo < dlo || hi > dhi {
        return Err(Error::InvalidConfig(format!(
            "bounds [{lo}, {hi}] exceed the actuator range [{dlo}, {dhi}]"
        )));
    }
    Ok((lo, hi))
}

fn draw_start(
    rng: &mut ChaCha8Rng,
    dim: usize,
    (lo, hi): (f64, f64),
    minima: &[Vec<f64>],
    radius: f64,
) -> Vec<f64> {
    let mut candidate = Vec::new();
    for _ in 0..START_DRAW_ATTEMPTS {
        candidate = (0..dim).map(|_| rng.random_range(lo..=hi)).collect();
        let clear = minima.iter().all(|m| {
            m.iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= radius
        });
        if clear {
            break;
        }
    }
    candidate
}

/// Learns the codeword for port `k` with restarted bounded Nelder–Mead.
///
/// Never fails on poor progress: a best point is always returned and
/// `converged` reports whether it is trustworthy.
pub fn gbnm_calibrate<O: IntensityOracle + ?Sized>(
    dev: &mut O,
    k: usize,
    cfg: &GbnmConfig,
) -> Result<GbnmOutcome> {
    let n = dev.ports();
    check_port(n, k)?;
    cfg.validate()?;
    let bounds = resolve_bounds(dev, cfg)?;
    let reference = 0.0f64.clamp(bounds.0, bounds.1);
    let dim = n - 1;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(k as u64);

    let mut recorder = Recorder::new(dev, k);
    let mut minima: Vec<Vec<f64>> = Vec::new();
    let mut starts = Vec::with_capacity(cfg.n_starts);
    let mut used = 0usize;
    let mut met_tolerance = false;

    for s in 0..cfg.n_starts {
        let remaining = cfg.max_evaluations.map(|cap| cap.saturating_sub(used));
        if remaining == Some(0) {
            break;
        }
        let initial = draw_start(&mut rng, dim, bounds, &minima, cfg.exclusion_radius);
        let nm = NelderMead {
            coefficients: cfg.coefficients,
            lower: vec![bounds.0; dim],
            upper: vec![bounds.1; dim],
            initial_edge: cfg.initial_edge,
            tolerance: cfg.tolerance,
            max_iterations: cfg.max_iters_per_start,
            max_evaluations: remaining,
            stagnation_evaluations: cfg.stagnation_evaluations,
        };
        recorder.start = s;
        let out = nm.minimize(&initial, |free, iteration| {
            recorder.iteration = iteration;
            recorder.objective(&full_profile(reference, free))
        })?;
        used += out.evaluations;
        met_tolerance |= out.termination == Termination::Converged;
        starts.push(StartSummary {
            start: s,
            initial_phases: full_profile(reference, &initial).phases,
            best_phases: full_profile(reference, &out.best).phases,
            best_objective: out.best_value,
            iterations: out.iterations,
            evaluations: out.evaluations,
            termination: out.termination,
        });
        minima.push(out.best);
    }

    let mut selected = recorder.trace.best_phases.clone();
    let mut selected_relative = recorder.trace.best_relative;
    if cfg.reassess_minima && starts.len() > 1 {
        recorder.start = starts.len();
        recorder.iteration = 0;
        selected_relative = f64::NEG_INFINITY;
        for summary in &starts {
            if cfg.max_evaluations.is_some_and(|cap| used >= cap) {
                break;
            }
            let x = PhaseProfile::new(summary.best_phases.clone());
            let relative = recorder.measure(&x)?.relative[k];
            used += 1;
            if relative > selected_relative {
                selected_relative = relative;
                selected = x.phases;
            }
        }
        if selected_relative == f64::NEG_INFINITY {
            selected = recorder.trace.best_phases.clone();
            selected_relative = recorder.trace.best_relative;
        }
    }

    let trace = recorder.trace;
    let codeword = Codeword::new(k, &selected);
    let converged = met_tolerance && selected_relative >= cfg.convergence_threshold;
    Ok(GbnmOutcome {
        codeword,
        trace,
        converged,
        starts,
        evaluations: used,
    })
}

/// Plain Nelder–Mead from one random start, no restarts, running until
/// `evaluation_budget` device evaluations are spent. Baseline for judging restarts.
pub fn single_start_calibrate<O: IntensityOracle + ?Sized>(
    dev: &mut O,
    k: usize,
    cfg: &GbnmConfig,
    evaluation_budget: usize,
) -> Result<GbnmOutcome> {
    let single = GbnmConfig {
        n_starts: 1,
        max_iters_per_start: usize::MAX,
        tolerance: 0.0,
        stagnation_evaluations: None,
        max_evaluations: Some(evaluation_budget),
        reassess_minima: false,
        ..cfg.clone()
    };
    gbnm_calibrate(dev, k, &single)
}

/// A codebook learned port by port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookCalibration {
    pub codebook: Codebook,
    pub channels: Vec<GbnmOutcome>,
    /// `|⟨cw_i, cw_j⟩| / n` of the learned codewords.
    pub gram: Vec<Vec<f64>>,
}

impl CodebookCalibration {
    pub fn all_converged(&self) -> bool {
        self.channels.iter().all(|c| c.converged)
    }
}

/// Runs [`gbnm_calibrate`] for every port in turn on the same device.
pub fn calibrate_codebook<O: IntensityOracle + ?Sized>(
    dev: &mut O,
    cfg: &GbnmConfig,
) -> Result<CodebookCalibration> {
    let n = dev.ports();
    let mut channels = Vec::with_capacity(n);
    for k in 0..n {
        channels.push(gbnm_calibrate(dev, k, cfg)?);
    }
    let codebook = Codebook {
        n,
        output_scale: (n as f64).sqrt(),
        codewords: channels.iter().map(|c| c.codeword.clone()).collect(),
        amplitude_deviation: Vec::new(),
    };
    let gram = codebook.normalized_gram()?;
    Ok(CodebookCalibration {
        codebook,
        channels,
        gram,
    })
}
