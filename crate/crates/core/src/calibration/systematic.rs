//! Stage-by-stage phase sweeps.
//!
//! Works down the butterfly one stage at a time. At each stage every pair of
//! already-combined channel groups is interfered by sweeping a common phase
//! offset on one group until the output half that should stay dark (the half
//! not containing the target port) is minimised. After the last stage all
//! light leaves through the target.
//!
//! This needs to know how the device pairs its inputs, which
//! [`ChannelMapping`] declares.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{check_port, ConvergenceTrace, Recorder};
use crate::codebook::Codeword;
use crate::device::{IntensityOracle, PhaseProfile};
use crate::error::{Error, Result};
use crate::network::{stage_count, NetworkSpec};
use crate::phase::wrap;

/// Contrast below this fraction of the mean total intensity counts as none.
const MIN_CONTRAST: f64 = 1e-9;

/// Two channel groups interfering at one stage; `swept` receives the offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPair {
    pub swept: Vec<usize>,
    pub partner: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMapping {
    pub pairs: Vec<SweepPair>,
    /// The two output halves this stage steers between.
    pub halves: [Vec<usize>; 2],
}

impl StageMapping {
    fn dark_half(&self, target: usize) -> &[usize] {
        if self.halves[0].contains(&target) {
            &self.halves[1]
        } else {
            &self.halves[0]
        }
    }
}

/// Which input channels interfere at each stage and which output halves they feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMapping {
    pub n: usize,
    pub stages: Vec<StageMapping>,
}

impl ChannelMapping {
    /// Mapping implied by a network's stage layout and input routing.
    pub fn for_network(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let mut channel_at = vec![0usize; n];
        for channel in 0..n {
            channel_at[spec.register_of(channel)] = channel;
        }
        let k = stage_count(n)?;
        let stages = (0..k)
            .map(|s| {
                let group_span = 1usize << s;
                let pairs = (0..n)
                    .step_by(2 * group_span)
                    .map(|base| SweepPair {
                        swept: (base..base + group_span).map(|r| channel_at[r]).collect(),
                        partner: (base + group_span..base + 2 * group_span)
                            .map(|r| channel_at[r])
                            .collect(),
                    })
                    .collect();
                let halves = [
                    (0..n).filter(|p| (p >> s) & 1 == 0).collect(),
                    (0..n).filter(|p| (p >> s) & 1 == 1).collect(),
                ];
                StageMapping { pairs, halves }
            })
            .collect();
        Ok(Self { n, stages })
    }

    /// Mapping of a network with straight-through input wiring.
    pub fn butterfly(n: usize) -> Result<Self> {
        Self::for_network(&NetworkSpec::ideal(n)?)
    }

    pub fn validate(&self, ports: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMapping(msg));
        if self.n != ports {
            return bad(format!("mapping is for {} ports, device has {ports}", self.n));
        }
        let k = stage_count(ports)?;
        if self.stages.len() != k {
            return bad(format!("expected {k} stages, found {}", self.stages.len()));
        }
        for (s, stage) in self.stages.iter().enumerate() {
            let mut seen = vec![false; ports];
            for pair in &stage.pairs {
                if pair.swept.is_empty() || pair.partner.is_empty() {
                    return bad(format!("stage {s} has an empty channel group"));
                }
                for &c in pair.swept.iter().chain(&pair.partner) {
                    if c >= ports || seen[c] {
                        return bad(format!("stage {s} uses channel {c} twice or out of range"));
                    }
                    seen[c] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return bad(format!("stage {s} leaves channels unpaired"));
            }
            let mut out = vec![0u8; ports];
            for half in &stage.halves {
                for &p in half {
                    if p >= ports {
                        return bad(format!("stage {s} names output port {p}"));
                    }
                    out[p] += 1;
                }
            }
            if out.iter().any(|&c| c != 1) {
                return bad(format!("stage {s} output halves do not partition the ports"));
            }
        }
        Ok(())
    }
}

/// Sub-sample position of the minimum of a parabola through three equally
/// spaced samples, in units of the spacing and clamped to `[-1, 1]`.
fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * centre + right;
    if curvature <= 0.0 {
        return 0.0;
    }
    (0.5 * (left - right) / curvature).clamp(-1.0, 1.0)
}

fn command(phases: &[f64]) -> PhaseProfile {
    PhaseProfile::new(phases.iter().map(|&p| wrap(p)).collect())
}

/// Builds the codeword for port `k` from one phase sweep per channel-group pair.
///
/// Each sweep takes `sweep_resolution` samples over one period and refines the
/// best sample with a three-point parabolic fit. The final codeword is
/// measured once more and that reading closes the trace.
pub fn systematic_calibrate<O: IntensityOracle + ?Sized>(
    dev: &mut O,
    k: usize,
    mapping: &ChannelMapping,
    sweep_resolution: usize,
) -> Result<(Codeword, ConvergenceTrace)> {
    let n = dev.ports();
    check_port(n, k)?;
    mapping.validate(n)?;
    if sweep_resolution < 3 {
        return Err(Error::InvalidConfig(format!(
            "sweep resolution must be >= 3, got {sweep_resolution}"
        )));
    }
    let step = TAU / sweep_resolution as f64;
    let mut phases = vec![0.0; n];
    let mut recorder = Recorder::new(dev, k);

    for (s, stage) in mapping.stages.iter().enumerate() {
        let dark = stage.dark_half(k);
        recorder.start = s;
        for pair in &stage.pairs {
            let mut cost = Vec::with_capacity(sweep_resolution);
            let mut total = 0.0;
            for i in 0..sweep_resolution {
                recorder.iteration = i;
                let mut trial = phases.clone();
                for &c in &pair.swept {
                    trial[c] += i as f64 * step;
                }
                let reading = recorder.measure(&command(&trial))?;
                total += reading.total();
                cost.push(dark.iter().map(|&p| reading.per_port[p]).sum::<f64>());
            }
            let (lo, hi) = cost
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let mean_total = total / sweep_resolution as f64;
            if !(hi - lo > MIN_CONTRAST * mean_total) {
                return Err(Error::DegenerateInterference { stage: s });
            }
            let best = (0..sweep_resolution)
                .min_by(|&a, &b| cost[a].total_cmp(&cost[b]))
                .unwrap_or(0);
            let left = cost[(best + sweep_resolution - 1) % sweep_resolution];
            let right = cost[(best + 1) % sweep_resolution];
            let offset = (best as f64 + parabolic_offset(left, cost[best], right)) * step;
            for &c in &pair.swept {
                phases[c] = wrap(phases[c] + offset);
            }
        }
    }

    recorder.start = mapping.stages.len();
    recorder.iteration = 0;
    recorder.measure(&command(&phases))?;
    Ok((Codeword::new(k, &phases), recorder.trace))
}
