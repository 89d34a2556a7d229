//! Analytic codebooks: `H = A⁻¹ · √n`, one unit-modulus codeword per output port.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;
use crate::phase::{phasor, wrap};

/// Input phase profile that routes all power to `target_port`.
///
/// The first phase is the gauge reference and is always 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codeword {
    pub target_port: usize,
    #[serde(rename = "phases_rad")]
    pub phases: Vec<f64>,
}

impl Codeword {
    /// Gauge-normalises `phases` (first entry 0, the rest wrapped into `(-π, π]`).
    pub fn new(target_port: usize, phases: &[f64]) -> Self {
        Self {
            target_port,
            phases: gauge_normalize(phases),
        }
    }

    /// Codeword from complex entries; only their arguments are kept.
    pub fn from_field(target_port: usize, field: &[Complex64]) -> Self {
        let phases: Vec<f64> = field.iter().map(|z| z.arg()).collect();
        Self::new(target_port, &phases)
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Unit-amplitude input field `e^{i·phases}`.
    pub fn field(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| phasor(p)).collect()
    }
}

/// Shifts all phases so the first is 0 and wraps the rest into `(-π, π]`.
pub fn gauge_normalize(phases: &[f64]) -> Vec<f64> {
    match phases.first() {
        None => Vec::new(),
        Some(&reference) => phases
            .iter()
            .enumerate()
            .map(|(j, &p)| if j == 0 { 0.0 } else { wrap(p - reference) })
            .collect(),
    }
}

/// One codeword per output port plus the expected output field magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub output_scale: f64,
    pub codewords: Vec<Codeword>,
    /// Largest `| |h_jk| − 1 |` per codeword; only present for lossy networks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub amplitude_deviation: Vec<f64>,
}

impl Codebook {
    pub fn codeword(&self, port: usize) -> Option<&Codeword> {
        self.codewords.iter().find(|c| c.target_port == port)
    }

    /// Codeword vectors as columns of an `n × n` matrix (unit modulus).
    pub fn matrix(&self) -> Result<TransferMatrix> {
        let n = self.n;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for (col, cw) in self.codewords.iter().enumerate() {
            if cw.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: cw.len(),
                    context: "codeword length",
                });
            }
            for (row, z) in cw.field().into_iter().enumerate() {
                entries[row * n + col] = z;
            }
        }
        TransferMatrix::from_row_major(n, &entries)
    }

    /// `|⟨cw_i, cw_j⟩| / n` for every pair.
    pub fn normalized_gram(&self) -> Result<Vec<Vec<f64>>> {
        let g = self.matrix()?.gram();
        let n = self.n as f64;
        Ok(g.rows()
            .into_iter()
            .map(|row| row.into_iter().map(|z| z.norm() / n).collect())
            .collect())
    }

    /// Largest off-diagonal entry of [`Codebook::normalized_gram`].
    pub fn max_cross_talk(&self) -> Result<f64> {
        let g = self.normalized_gram()?;
        let mut worst = 0.0f64;
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    worst = worst.max(*v);
                }
            }
        }
        Ok(worst)
    }
}

/// Raw (un-normalised) codebook matrix `A⁻¹ · √n`.
pub fn codebook_matrix(a: &TransferMatrix) -> Result<TransferMatrix> {
    let scale = (a.n() as f64).sqrt();
    Ok(a.inverse()?.scale(Complex64::new(scale, 0.0)))
}

/// Inverts `a` and returns its gauge-normalised codebook.
///
/// For lossy networks the codewords keep only their phases; the per-codeword
/// amplitude deviation from 1 is reported in `amplitude_deviation`.
pub fn extract_codebook(a: &TransferMatrix) -> Result<Codebook> {
    let n = a.n();
    let h = codebook_matrix(a)?;
    let mut codewords = Vec::with_capacity(n);
    let mut deviation = Vec::with_capacity(n);
    for k in 0..n {
        let col = h.column(k);
        deviation.push(
            col.iter()
                .map(|z| (z.norm() - 1.0).abs())
                .fold(0.0, f64::max),
        );
        codewords.push(Codeword::from_field(k, &col));
    }
    let lossy = deviation.iter().any(|&d| d > 1e-9);
    Ok(Codebook {
        n,
        output_scale: (n as f64).sqrt(),
        codewords,
        amplitude_deviation: if lossy { deviation } else { Vec::new() },
    })
}

/// Fraction of output power landing on each codeword's target port.
pub fn verify_codebook(h: &Codebook, a: &TransferMatrix) -> Result<Vec<f64>> {
    if h.n != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: h.n,
            context: "codebook size",
        });
    }
    h.codewords
        .iter()
        .map(|cw| routed_fraction(a, cw))
        .collect()
}

/// `|y_k|² / Σ|y|²` with `y = A · e^{i·phases}` and `k` the codeword's target.
pub fn routed_fraction(a: &TransferMatrix, cw: &Codeword) -> Result<f64> {
    if cw.target_port >= a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: cw.target_port,
            context: "target port",
        });
    }
    let y = a.apply(&cw.field())?;
    let total: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    Ok(y[cw.target_port].norm_sqr() / total)
}

/// Gauge-invariant distance between two phase profiles.
///
/// `min_ψ Σ_j |wrap(a_j − b_j − ψ)|`. The objective is piecewise linear in
/// `ψ` with convex kinks only at the offsets `a_j − b_j`, so the minimum is
/// attained at one of them.
pub fn codeword_distance(a: &Codeword, b: &Codeword) -> f64 {
    phase_distance(&a.phases, &b.phases)
}

/// [`codeword_distance`] on raw phase vectors.
pub fn phase_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "phase_distance on unequal lengths");
    if a.is_empty() {
        return 0.0;
    }
    let offsets: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    offsets
        .iter()
        .map(|&psi| offsets.iter().map(|&d| wrap(d - psi).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}
