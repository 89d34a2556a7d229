//! Transfer matrices of FFT-butterfly networks.
//!
//! A network on `n = 2^K` ports is `K` coupler stages interleaved with
//! diagonal phase layers:
//!
//! ```text
//! A = L_K · S_{K-1} · L_{K-1} · … · L_1 · S_0 · L_0 · R
//! ```
//!
//! `R` is the input wiring (identity unless the spec routes inputs), `L_0`
//! and `L_K` are the input/output phase layers, `L_1 … L_{K-1}` sit in the
//! gaps between stages and `S_s` couples every pair of register positions that
//! differ only in bit `s`, lower index first. Stage 0 therefore pairs
//! `(0,1), (2,3), …` and the last stage pairs `(j, j + n/2)`.
//!
//! The Hadamard and Butler flavors use the same symmetric couplers and realise
//! their asymmetric beamsplitters through the phase layers.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;

/// Tolerance on `t² + r² = 1` for a coupler to count as lossless.
pub const LOSSLESS_TOLERANCE: f64 = 1e-12;

/// Directional coupler `[[t, i·r], [i·r, t]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerSpec {
    pub t: f64,
    pub r: f64,
}

impl CouplerSpec {
    pub fn new(t: f64, r: f64) -> Result<Self> {
        let spec = Self { t, r };
        spec.validate()?;
        Ok(spec)
    }

    /// The balanced coupler `t = r = √2/2`.
    pub fn ideal() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { t: h, r: h }
    }

    /// Lossless coupler sending `power_split` of the power straight through.
    pub fn from_power_split(power_split: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&power_split) {
            return Err(Error::InvalidConfig(format!(
                "power split {power_split} outside [0, 1]"
            )));
        }
        Self::new(power_split.sqrt(), (1.0 - power_split).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if ok(self.t) && ok(self.r) {
            Ok(())
        } else {
            Err(Error::InvalidCoupler {
                t: self.t,
                r: self.r,
            })
        }
    }

    pub fn is_lossless(&self) -> bool {
        (self.t * self.t + self.r * self.r - 1.0).abs() < LOSSLESS_TOLERANCE
    }

    fn entries(&self) -> [[Complex64; 2]; 2] {
        let t = Complex64::new(self.t, 0.0);
        let ir = Complex64::new(0.0, self.r);
        [[t, ir], [ir, t]]
    }
}

impl Default for CouplerSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

/// 2×2 transfer matrix of a single coupler.
pub fn coupler_matrix(spec: CouplerSpec) -> Result<TransferMatrix> {
    spec.validate()?;
    let e = spec.entries();
    TransferMatrix::from_row_major(2, &[e[0][0], e[0][1], e[1][0], e[1][1]])
}

/// A diagonal layer of phase shifts, one angle (radians) per port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseLayer {
    pub phases: Vec<f64>,
}

impl PhaseLayer {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            phases: vec![0.0; n],
        }
    }

    /// Independent uniform phases in `[-π, π)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            phases: (0..n).map(|_| rng.random_range(-PI..PI)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn matrix(&self) -> TransferMatrix {
        TransferMatrix::phase_diagonal(&self.phases)
    }

    fn add(&mut self, other: &PhaseLayer) {
        for (a, b) in self.phases.iter_mut().zip(&other.phases) {
            *a += *b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Ideal,
    Hadamard,
    Butler,
    Custom,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Flavor::Ideal => "ideal",
            Flavor::Hadamard => "hadamard",
            Flavor::Butler => "butler",
            Flavor::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Flavor::Ideal),
            "hadamard" => Ok(Flavor::Hadamard),
            "butler" => Ok(Flavor::Butler),
            "custom" => Ok(Flavor::Custom),
            other => Err(Error::InvalidConfig(format!("unknown flavor '{other}'"))),
        }
    }
}

/// Number of coupler stages for `n` ports, or an error when `n` is not `2^K`, `K ≥ 1`.
pub fn stage_count(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Register-position pairs `(lo, hi)` coupled by stage `stage`, in coupler order.
pub fn stage_pairs(n: usize, stage: usize) -> Vec<(usize, usize)> {
    let bit = 1usize << stage;
    (0..n)
        .filter(|j| j & bit == 0)
        .map(|lo| (lo, lo | bit))
        .collect()
}

/// Bit-reversal permutation on `n = 2^K` indices.
pub fn bit_reversal(n: usize) -> Result<Vec<usize>> {
    let k = stage_count(n)?;
    Ok((0..n)
        .map(|j| j.reverse_bits() >> (usize::BITS as usize - k))
        .collect())
}

/// Full description of a butterfly network.
///
/// Empty `phase_layers` means no phase shifts anywhere; otherwise there are
/// `K + 1` layers (input, the `K - 1` gaps, output). Empty `couplers` means
/// every coupler is ideal; otherwise `K` stages of `n / 2` couplers.
/// `input_routing[j]` is the register position physical input `j` is wired to
/// (empty means straight through).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub flavor: Flavor,
    #[serde(default)]
    pub phase_layers: Vec<PhaseLayer>,
    #[serde(default)]
    pub couplers: Vec<Vec<CouplerSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_routing: Vec<usize>,
}

impl NetworkSpec {
    /// Symmetric couplers, no phase shifts.
    pub fn ideal(n: usize) -> Result<Self> {
        stage_count(n)?;
        Ok(Self {
            n,
            flavor: Flavor::Ideal,
            phase_layers: Vec::new(),
            couplers: Vec::new(),
            input_routing: Vec::new(),
        })
    }

    /// Every coupler turned into `(√2/2)[[1, 1], [1, −1]]` by
    /// `diag(−i, −1) · A₂ · diag(i, 1)`.
    pub fn hadamard(n: usize) -> Result<Self> {
        let k = stage_count(n)?;
        let stage_in = vec![(FRAC_PI_2, 0.0); k];
        let stage_out = vec![(-FRAC_PI_2, PI); k];
        let layers = fold_coupler_phases(n, &stage_in, &stage_out);
        Ok(Self {
            n,
            flavor: Flavor::Hadamard,
            phase_layers: layers,
            couplers: Vec::new(),
            input_routing: Vec::new(),
        })
    }

    /// Butler matrix with DFT-structured outputs.
    ///
    /// Each coupler is the Butler stage `(√2/2)[[1, i], [1, −i]] =
    /// diag(−i, −1) · A₂ · diag(i, i)`. For `n ≥ 4` the gaps additionally carry
    /// the radix-2 twiddles and a `−π/2` on the upper input of every stage
    /// (turning the Butler stage into a plain butterfly), and the inputs are
    /// wired in bit-reversed order, so that `A ∝ DFT` up to one phase per
    /// output port. For `n = 2` the network is the bare Butler stage.
    pub fn butler(n: usize) -> Result<Self> {
        let k = stage_count(n)?;
        let stage_in = vec![(FRAC_PI_2, FRAC_PI_2); k];
        let stage_out = vec![(-FRAC_PI_2, PI); k];
        let mut layers = fold_coupler_phases(n, &stage_in, &stage_out);
        let mut routing = Vec::new();
        if k >= 2 {
            for (s, layer) in layers.iter_mut().take(k).enumerate() {
                let span = 1usize << s;
                for (j, phase) in layer.phases.iter_mut().enumerate() {
                    let x = (j >> s) & 1;
                    if x == 1 {
                        let low = j & (span - 1);
                        *phase += -TAU * low as f64 / (2 * span) as f64 - FRAC_PI_2;
                    }
                }
            }
            routing = bit_reversal(n)?;
        }
        Ok(Self {
            n,
            flavor: Flavor::Butler,
            phase_layers: layers,
            couplers: Vec::new(),
            input_routing: routing,
        })
    }

    pub fn for_flavor(flavor: Flavor, n: usize) -> Result<Self> {
        match flavor {
            Flavor::Ideal => Self::ideal(n),
            Flavor::Hadamard => Self::hadamard(n),
            Flavor::Butler => Self::butler(n),
            Flavor::Custom => {
                let mut spec = Self::ideal(n)?;
                spec.flavor = Flavor::Custom;
                Ok(spec)
            }
        }
    }

    pub fn stages(&self) -> Result<usize> {
        stage_count(self.n)
    }

    /// Checks every size and range invariant.
    pub fn validate(&self) -> Result<()> {
        let k = stage_count(self.n)?;
        if !self.phase_layers.is_empty() {
            if self.phase_layers.len() != k + 1 {
                return Err(Error::DimensionMismatch {
                    expected: k + 1,
                    found: self.phase_layers.len(),
                    context: "phase layer count (input, gaps, output)",
                });
            }
            for layer in &self.phase_layers {
                if layer.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.n,
                        found: layer.len(),
                        context: "phase layer length",
                    });
                }
                if layer.phases.iter().any(|p| !p.is_finite()) {
                    return Err(Error::InvalidConfig("non-finite phase".into()));
                }
            }
        }
        if !self.couplers.is_empty() {
            if self.couplers.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: self.couplers.len(),
                    context: "coupler stage count",
                });
            }
            for stage in &self.couplers {
                if stage.len() != self.n / 2 {
                    return Err(Error::DimensionMismatch {
                        expected: self.n / 2,
                        found: stage.len(),
                        context: "couplers per stage",
                    });
                }
                for c in stage {
                    c.validate()?;
                }
            }
        }
        if !self.input_routing.is_empty() {
            if self.input_routing.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: self.input_routing.len(),
                    context: "input routing length",
                });
            }
            let mut seen = vec![false; self.n];
            for &p in &self.input_routing {
                if p >= self.n || seen[p] {
                    return Err(Error::InvalidConfig(
                        "input routing is not a permutation".into(),
                    ));
                }
                seen[p] = true;
            }
        }
        Ok(())
    }

    pub fn coupler(&self, stage: usize, index: usize) -> CouplerSpec {
        self.couplers
            .get(stage)
            .map(|s| s[index])
            .unwrap_or_default()
    }

    /// Register position of physical input `channel`.
    pub fn register_of(&self, channel: usize) -> usize {
        if self.input_routing.is_empty() {
            channel
        } else {
            self.input_routing[channel]
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.couplers.iter().flatten().all(CouplerSpec::is_lossless)
    }

    /// Copy of this spec with `gap_errors` added to the inter-stage layers and,
    /// when given, the couplers replaced.
    pub fn with_errors(
        &self,
        gap_errors: &[PhaseLayer],
        couplers: Option<&[Vec<CouplerSpec>]>,
    ) -> Result<Self> {
        self.validate()?;
        let k = self.stages()?;
        if gap_errors.len() != k - 1 {
            return Err(Error::DimensionMismatch {
                expected: k - 1,
                found: gap_errors.len(),
                context: "inter-stage error layers",
            });
        }
        for layer in gap_errors {
            if layer.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: layer.len(),
                    context: "error layer length",
                });
            }
        }
        let mut out = self.clone();
        if !gap_errors.is_empty() {
            if out.phase_layers.is_empty() {
                out.phase_layers = vec![PhaseLayer::zeros(self.n); k + 1];
            }
            for (gap, layer) in gap_errors.iter().enumerate() {
                out.phase_layers[gap + 1].add(layer);
            }
        }
        if let Some(c) = couplers {
            out.couplers = c.to_vec();
        }
        out.validate()?;
        Ok(out)
    }
}

/// Folds per-stage coupler phase decompositions `(lo, hi)` into `K + 1` layers.
fn fold_coupler_phases(
    n: usize,
    stage_in: &[(f64, f64)],
    stage_out: &[(f64, f64)],
) -> Vec<PhaseLayer> {
    let k = stage_in.len();
    let mut layers = vec![PhaseLayer::zeros(n); k + 1];
    for s in 0..k {
        for j in 0..n {
            let upper = (j >> s) & 1 == 1;
            let (in_lo, in_hi) = stage_in[s];
            let (out_lo, out_hi) = stage_out[s];
            layers[s].phases[j] += if upper { in_hi } else { in_lo };
            layers[s + 1].phases[j] += if upper { out_hi } else { out_lo };
        }
    }
    layers
}

/// Matrix of stage `stage` alone (couplers only, no phases).
pub fn stage_matrix(n: usize, stage: usize, couplers: &[CouplerSpec]) -> Result<TransferMatrix> {
    let k = stage_count(n)?;
    if stage >= k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: stage,
            context: "stage index",
        });
    }
    if couplers.len() != n / 2 {
        return Err(Error::DimensionMismatch {
            expected: n / 2,
            found: couplers.len(),
            context: "couplers per stage",
        });
    }
    let mut m = TransferMatrix::from_row_major(n, &vec![Complex64::new(0.0, 0.0); n * n])?;
    for (&(lo, hi), c) in stage_pairs(n, stage).iter().zip(couplers) {
        c.validate()?;
        let e = c.entries();
        m.set(lo, lo, e[0][0]);
        m.set(lo, hi, e[0][1]);
        m.set(hi, lo, e[1][0]);
        m.set(hi, hi, e[1][1]);
    }
    Ok(m)
}

/// Transfer matrix of `spec`.
pub fn build(spec: &NetworkSpec) -> Result<TransferMatrix> {
    spec.validate()?;
    let n = spec.n;
    let k = spec.stages()?;
    let mut a = if spec.input_routing.is_empty() {
        TransferMatrix::identity(n)
    } else {
        TransferMatrix::permutation(&spec.input_routing)
    };
    if let Some(layer) = spec.phase_layers.first() {
        a = &layer.matrix() * &a;
    }
    for s in 0..k {
        let couplers: Vec<CouplerSpec> = (0..n / 2).map(|i| spec.coupler(s, i)).collect();
        a = &stage_matrix(n, s, &couplers)? * &a;
        if let Some(layer) = spec.phase_layers.get(s + 1) {
            a = &layer.matrix() * &a;
        }
    }
    Ok(a)
}

pub fn build_ideal(n: usize) -> Result<TransferMatrix> {
    build(&NetworkSpec::ideal(n)?)
}

pub fn build_hadamard(n: usize) -> Result<TransferMatrix> {
    build(&NetworkSpec::hadamard(n)?)
}

pub fn build_butler(n: usize) -> Result<TransferMatrix> {
    build(&NetworkSpec::butler(n)?)
}

/// `base` with inter-stage phase errors and optional replacement couplers.
pub fn build_with_errors(
    base: &NetworkSpec,
    gap_errors: &[PhaseLayer],
    couplers: Option<&[Vec<CouplerSpec>]>,
) -> Result<TransferMatrix> {
    build(&base.with_errors(gap_errors, couplers)?)
}

/// One recursion step: the `n/2`-port network applied to the even and the odd
/// sub-registers, `half ⊗ I₂`.
pub fn shuffle_stage(n: usize, half: &TransferMatrix) -> Result<TransferMatrix> {
    stage_count(n)?;
    if half.n() * 2 != n {
        return Err(Error::DimensionMismatch {
            expected: n / 2,
            found: half.n(),
            context: "half network size",
        });
    }
    Ok(half.kron(&TransferMatrix::identity(2)))
}

/// Builds `A_n = (A_{n/2} ⊗ I₂) · (I_{n/2} ⊗ A₂)` recursively from one 2×2 element.
pub fn build_recursive(n: usize, element: &TransferMatrix) -> Result<TransferMatrix> {
    stage_count(n)?;
    if element.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: element.n(),
            context: "butterfly element size",
        });
    }
    if n == 2 {
        return Ok(element.clone());
    }
    let half = build_recursive(n / 2, element)?;
    let first = TransferMatrix::identity(n / 2).kron(element);
    Ok(&shuffle_stage(n, &half)? * &first)
}

/// Random gap layers for a network on `n` ports, uniform in `[-π, π)`.
pub fn random_gap_errors<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<PhaseLayer>> {
    let k = stage_count(n)?;
    Ok((0..k - 1).map(|_| PhaseLayer::random(n, rng)).collect())
}
