//! Intensity-only device emulation.
//!
//! A [`DeviceModel`] wraps a transfer matrix and hides it behind
//! [`IntensityOracle`]: callers command input phases and read back per-port
//! intensities, nothing else. The commanded phases go through, in order,
//!
//! 1. actuator backlash: each actuator only moves once the command leaves a
//!    band of half-width `hysteresis_backlash` around its current position;
//! 2. drift: a per-channel Gaussian random walk, one step per evaluation;
//! 3. the coherent network `|A·x̃|²`, mixed with an incoherent background of
//!    weight `1 − visibility` spread evenly over the ports;
//! 4. multiplicative Gaussian detector noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;
use crate::network::{build, CouplerSpec, NetworkSpec};
use crate::phase::phasor;

/// Default actuator range, `[-4π, 4π]`.
pub const DEFAULT_BOUNDS: (f64, f64) = (-4.0 * PI, 4.0 * PI);

const MEASURE_STREAM: u64 = 0;
const CONSTRUCTION_STREAM: u64 = 1;
const PRESET_STREAM: u64 = 2;

/// Commanded input phases (radians); amplitudes are always 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseProfile {
    pub phases: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            phases: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

impl From<Vec<f64>> for PhaseProfile {
    fn from(phases: Vec<f64>) -> Self {
        Self { phases }
    }
}

/// Detector readings for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityReading {
    pub per_port: Vec<f64>,
    pub relative: Vec<f64>,
}

impl IntensityReading {
    pub fn new(per_port: Vec<f64>) -> Self {
        let total: f64 = per_port.iter().sum();
        let relative = if total > 0.0 {
            per_port.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; per_port.len()]
        };
        Self { per_port, relative }
    }

    pub fn total(&self) -> f64 {
        self.per_port.iter().sum()
    }
}

/// Imperfections applied by a [`DeviceModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Random-walk step per evaluation, radians.
    pub drift_sigma: f64,
    /// Actuator dead-band half-width, radians.
    pub hysteresis_backlash: f64,
    /// Fringe visibility in `(0, 1]`.
    pub visibility: f64,
    /// Relative standard deviation of detector noise.
    pub detector_sigma_rel: f64,
    /// Coupler power splits are drawn uniformly from `0.5 ± splitting_tolerance`.
    pub splitting_tolerance: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            drift_sigma: 0.0,
            hysteresis_backlash: 0.0,
            visibility: 1.0,
            detector_sigma_rel: 0.0,
            splitting_tolerance: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("drift_sigma", self.drift_sigma),
            ("hysteresis_backlash", self.hysteresis_backlash),
            ("detector_sigma_rel", self.detector_sigma_rel),
            ("splitting_tolerance", self.splitting_tolerance),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "visibility must lie in (0, 1], got {}",
                self.visibility
            )));
        }
        if self.splitting_tolerance > 0.5 {
            return Err(Error::InvalidConfig(
                "splitting_tolerance must not exceed 0.5".into(),
            ));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.drift_sigma == 0.0
            && self.hysteresis_backlash == 0.0
            && self.visibility == 1.0
            && self.detector_sigma_rel == 0.0
            && self.splitting_tolerance == 0.0
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Named noise settings. Only the visibility and splitting ranges of
/// `Experiment` come from a measured setup; drift, backlash and detector noise
/// magnitudes in every preset are synthetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePreset {
    None,
    Experiment,
    Drift,
    Harsh,
}

impl NoisePreset {
    /// Resolves the preset into a concrete configuration; ranged parameters
    /// are drawn from `seed`.
    pub fn resolve(self, seed: u64) -> NoiseConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(PRESET_STREAM);
        let (vis_lo, vis_hi, split, drift, backlash, detector) = match self {
            NoisePreset::None => return NoiseConfig { seed, ..NoiseConfig::noiseless() },
            NoisePreset::Experiment => (0.95, 0.99, 0.03, 0.002, 0.01, 0.005),
            NoisePreset::Drift => (0.95, 0.99, 0.03, 0.01, 0.05, 0.01),
            NoisePreset::Harsh => (0.85, 0.95, 0.06, 0.02, 0.1, 0.03),
        };
        NoiseConfig {
            drift_sigma: drift,
            hysteresis_backlash: backlash,
            visibility: rng.random_range(vis_lo..=vis_hi),
            detector_sigma_rel: detector,
            splitting_tolerance: split,
            seed,
        }
    }
}

impl std::str::FromStr for NoisePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoisePreset::None),
            "experiment" => Ok(NoisePreset::Experiment),
            "drift" => Ok(NoisePreset::Drift),
            "harsh" => Ok(NoisePreset::Harsh),
            other => Err(Error::InvalidConfig(format!("unknown noise preset '{other}'"))),
        }
    }
}

/// Mutable part of a device, enough to resume a measurement sequence exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub drift: Vec<f64>,
    pub actuator: Option<Vec<f64>>,
    pub evaluations: u64,
    pub rng_word_pos: u128,
}

/// The only view of a device that calibration routines get.
pub trait IntensityOracle {
    fn ports(&self) -> usize;

    /// Actuator range `(lo, hi)` shared by all channels.
    fn bounds(&self) -> (f64, f64);

    fn measure(&mut self, x: &PhaseProfile) -> Result<IntensityReading>;

    /// Number of measurements taken so far.
    fn evaluations(&self) -> u64;
}

/// A transfer matrix plus noise state, exposed as an intensity oracle.
#[derive(Debug, Clone)]
pub struct DeviceModel {
    matrix: TransferMatrix,
    noise: NoiseConfig,
    bounds: (f64, f64),
    drift: Vec<f64>,
    actuator: Option<Vec<f64>>,
    evaluations: u64,
    rng: ChaCha8Rng,
    realized_spec: Option<NetworkSpec>,
}

impl DeviceModel {
    /// Device around an already-built matrix. The splitting tolerance is not
    /// applied here since the couplers are baked into `matrix`.
    pub fn new(matrix: TransferMatrix, noise: NoiseConfig) -> Result<Self> {
        noise.validate()?;
        let n = matrix.n();
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(MEASURE_STREAM);
        Ok(Self {
            matrix,
            noise,
            bounds: DEFAULT_BOUNDS,
            drift: vec![0.0; n],
            actuator: None,
            evaluations: 0,
            rng,
            realized_spec: None,
        })
    }

    /// Device built from `spec`, with every coupler's power split redrawn
    /// uniformly from `0.5 ± splitting_tolerance` (seeded).
    pub fn from_spec(spec: &NetworkSpec, noise: NoiseConfig) -> Result<Self> {
        noise.validate()?;
        spec.validate()?;
        let mut realized = spec.clone();
        if noise.splitting_tolerance > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(CONSTRUCTION_STREAM);
            let tol = noise.splitting_tolerance;
            let k = spec.stages()?;
            realized.couplers = (0..k)
                .map(|_| {
                    (0..spec.n / 2)
                        .map(|_| CouplerSpec::from_power_split(rng.random_range(0.5 - tol..=0.5 + tol)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        }
        let matrix = build(&realized)?;
        let mut dev = Self::new(matrix, noise)?;
        dev.realized_spec = Some(realized);
        Ok(dev)
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!("invalid bounds [{lo}, {hi}]")));
        }
        self.bounds = (lo, hi);
        Ok(self)
    }

    /// The underlying matrix. Not reachable through [`IntensityOracle`].
    pub fn matrix(&self) -> &TransferMatrix {
        &self.matrix
    }

    /// Network actually built by [`DeviceModel::from_spec`], couplers included.
    pub fn realized_spec(&self) -> Option<&NetworkSpec> {
        self.realized_spec.as_ref()
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    /// Clears drift and backlash memory.
    pub fn reset(&mut self) {
        self.drift.iter_mut().for_each(|d| *d = 0.0);
        self.actuator = None;
    }

    pub fn snapshot(&self) -> DeviceState {
        DeviceState {
            drift: self.drift.clone(),
            actuator: self.actuator.clone(),
            evaluations: self.evaluations,
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(&mut self, state: &DeviceState) -> Result<()> {
        let n = self.matrix.n();
        if state.drift.len() != n || state.actuator.as_ref().is_some_and(|a| a.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: state.drift.len(),
                context: "device state",
            });
        }
        self.drift = state.drift.clone();
        self.actuator = state.actuator.clone();
        self.evaluations = state.evaluations;
        self.rng.set_word_pos(state.rng_word_pos);
        Ok(())
    }

    /// Current per-channel drift offsets.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    fn check(&self, x: &PhaseProfile) -> Result<()> {
        let n = self.matrix.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
                context: "phase profile length",
            });
        }
        let (lo, hi) = self.bounds;
        for (channel, &phase) in x.phases.iter().enumerate() {
            if !(phase >= lo && phase <= hi) {
                return Err(Error::OutOfBounds {
                    channel,
                    phase,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    fn actuate(&mut self, commanded: &[f64]) -> Vec<f64> {
        let w = self.noise.hysteresis_backlash;
        let positions = match self.actuator.take() {
            Some(prev) if w > 0.0 => prev
                .iter()
                .zip(commanded)
                .map(|(&p, &c)| p.clamp(c - w, c + w))
                .collect(),
            _ => commanded.to_vec(),
        };
        self.actuator = Some(positions.clone());
        positions
    }
}

impl IntensityOracle for DeviceModel {
    fn ports(&self) -> usize {
        self.matrix.n()
    }

    fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn measure(&mut self, x: &PhaseProfile) -> Result<IntensityReading> {
        self.check(x)?;
        let n = self.matrix.n();
        let positions = self.actuate(&x.phases);
        if self.noise.drift_sigma > 0.0 {
            for d in self.drift.iter_mut() {
                let step: f64 = self.rng.sample(StandardNormal);
                *d += self.noise.drift_sigma * step;
            }
        }
        let field: Vec<_> = positions
            .iter()
            .zip(&self.drift)
            .map(|(p, d)| phasor(p + d))
            .collect();
        let y = self.matrix.apply(&field)?;
        let v = self.noise.visibility;
        let input_power: f64 = field.iter().map(|z| z.norm_sqr()).sum();
        let background = (1.0 - v) * input_power / n as f64;
        let mut per_port: Vec<f64> = y.iter().map(|z| v * z.norm_sqr() + background).collect();
        if self.noise.detector_sigma_rel > 0.0 {
            for p in per_port.iter_mut() {
                let g: f64 = self.rng.sample(StandardNormal);
                *p = (*p * (1.0 + self.noise.detector_sigma_rel * g)).max(0.0);
            }
        }
        self.evaluations += 1;
        Ok(IntensityReading::new(per_port))
    }

    fn evaluations(&self) -> u64 {
        self.evaluations
    }
}

/// Sum of all port intensities for one evaluation.
pub fn total_intensity<O: IntensityOracle + ?Sized>(dev: &mut O, x: &PhaseProfile) -> Result<f64> {
    Ok(dev.measure(x)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_ideal;

    fn ideal4(noise: NoiseConfig) -> DeviceModel {
        DeviceModel::new(build_ideal(4).unwrap(), noise).unwrap()
    }

    #[test]
    fn out_of_bounds_command_rejected() {
        let mut dev = ideal4(NoiseConfig::noiseless());
        let x = PhaseProfile::new(vec![0.0, 0.0, 13.0, 0.0]);
        assert!(matches!(dev.measure(&x), Err(Error::OutOfBounds { channel: 2, .. })));
        let nan = PhaseProfile::new(vec![f64::NAN, 0.0, 0.0, 0.0]);
        assert!(dev.measure(&nan).is_err());
        assert_eq!(dev.evaluations(), 0);
    }

    #[test]
    fn wrong_length_rejected() {
        let mut dev = ideal4(NoiseConfig::noiseless());
        assert!(matches!(
            dev.measure(&PhaseProfile::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_noise_rejected() {
        let bad = NoiseConfig {
            visibility: 1.2,
            ..NoiseConfig::noiseless()
        };
        assert!(DeviceModel::new(build_ideal(2).unwrap(), bad).is_err());
        let neg = NoiseConfig {
            drift_sigma: -0.1,
            ..NoiseConfig::noiseless()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn backlash_lags_on_reversal() {
        let noise = NoiseConfig {
            hysteresis_backlash: 0.1,
            ..NoiseConfig::noiseless()
        };
        let mut dev = ideal4(noise);
        dev.measure(&PhaseProfile::new(vec![1.0; 4])).unwrap();
        dev.measure(&PhaseProfile::new(vec![1.05; 4])).unwrap();
        assert_eq!(dev.actuator.as_ref().unwrap()[0], 1.0);
        dev.measure(&PhaseProfile::new(vec![1.5; 4])).unwrap();
        assert!((dev.actuator.as_ref().unwrap()[0] - 1.4).abs() < 1e-12);
        dev.measure(&PhaseProfile::new(vec![1.0; 4])).unwrap();
        assert!((dev.actuator.as_ref().unwrap()[0] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn presets_resolve_in_range() {
        for seed in 0..50 {
            let cfg = NoisePreset::Experiment.resolve(seed);
            assert!((0.95..=0.99).contains(&cfg.visibility));
            assert_eq!(cfg.splitting_tolerance, 0.03);
            cfg.validate().unwrap();
        }
        assert!(NoisePreset::None.resolve(3).is_noiseless());
    }

    #[test]
    fn split_tolerance_draws_lossless_couplers() {
        let spec = NetworkSpec::ideal(8).unwrap();
        let noise = NoiseConfig {
            splitting_tolerance: 0.03,
            seed: 11,
            ..NoiseConfig::noiseless()
        };
        let dev = DeviceModel::from_spec(&spec, noise).unwrap();
        let realized = dev.realized_spec().unwrap();
        assert_eq!(realized.couplers.len(), 3);
        for c in realized.couplers.iter().flatten() {
            assert!(c.is_lossless());
            assert!((c.t * c.t - 0.5).abs() <= 0.03 + 1e-12);
        }
        assert!(dev.matrix().unitarity_residual() < 1e-10);
    }
}
