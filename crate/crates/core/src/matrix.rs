//! Dense square complex matrices used as network transfer functions.
//!
//! Storage and the heavy lifting (products, Kronecker products, LU inversion)
//! sit on `nalgebra`; this type adds the handful of operations the optical
//! models need and a row-major JSON layout:
//!
//! ```json
//! {"n": 2, "entries": [[[0.7071, 0.0], [0.0, 0.7071]], [[0.0, 0.7071], [0.7071, 0.0]]]}
//! ```

use std::ops::Mul;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::phase::phasor;

/// Largest 1-norm condition number accepted by [`TransferMatrix::inverse`].
pub const MAX_CONDITION: f64 = 1e8;

/// An `n × n` complex matrix mapping input field amplitudes to output amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    inner: DMatrix<Complex64>,
}

impl TransferMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(n: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
                context: "row-major entry count",
            });
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(n, n, entries),
        })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                    context: "row length",
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_major(n, &flat)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Diagonal matrix `diag(e^{iφ₀}, …, e^{iφₙ₋₁})`.
    pub fn phase_diagonal(phases: &[f64]) -> Self {
        let n = phases.len();
        let mut inner = DMatrix::zeros(n, n);
        for (j, &p) in phases.iter().enumerate() {
            inner[(j, j)] = phasor(p);
        }
        Self { inner }
    }

    /// Permutation matrix sending input `j` to output `perm[j]`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut inner = DMatrix::zeros(n, n);
        for (j, &p) in perm.iter().enumerate() {
            inner[(p, j)] = Complex64::new(1.0, 0.0);
        }
        Self { inner }
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.inner[(row, col)] = value;
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.n())
            .map(|r| (0..self.n()).map(|c| self.inner[(r, c)]).collect())
            .collect()
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        self.inner.column(col).iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            inner: self.inner.map(|z| z * factor),
        }
    }

    /// `self ⊗ other`.
    pub fn kron(&self, other: &TransferMatrix) -> Self {
        Self {
            inner: self.inner.kronecker(&other.inner),
        }
    }

    /// `A†A`.
    pub fn gram(&self) -> Self {
        Self {
            inner: self.inner.adjoint() * &self.inner,
        }
    }

    /// Forward propagation `y = A·x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
                context: "input field length",
            });
        }
        Ok((0..n)
            .map(|r| (0..n).map(|c| self.inner[(r, c)] * x[c]).sum())
            .collect())
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &TransferMatrix) -> f64 {
        assert_eq!(self.n(), other.n(), "max_abs_diff on mismatched sizes");
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖A†A − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        self.gram().max_abs_diff(&Self::identity(self.n()))
    }

    /// Largest modulus among off-diagonal entries of `A†A`.
    pub fn column_orthogonality_residual(&self) -> f64 {
        let g = self.gram();
        let n = self.n();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    worst = worst.max(g.get(r, c).norm());
                }
            }
        }
        worst
    }

    fn one_norm(m: &DMatrix<Complex64>) -> f64 {
        m.column_iter()
            .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Inverse together with its 1-norm condition number.
    ///
    /// Fails with [`Error::Singular`] when LU factorisation breaks down or the
    /// condition number reaches [`MAX_CONDITION`].
    pub fn inverse_with_condition(&self) -> Result<(Self, f64)> {
        let inv = self
            .inner
            .clone()
            .try_inverse()
            .ok_or(Error::Singular {
                condition: f64::INFINITY,
            })?;
        let condition = Self::one_norm(&self.inner) * Self::one_norm(&inv);
        if !condition.is_finite() || condition >= MAX_CONDITION {
            return Err(Error::Singular { condition });
        }
        Ok((Self { inner: inv }, condition))
    }

    pub fn inverse(&self) -> Result<Self> {
        self.inverse_with_condition().map(|(m, _)| m)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for &TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: &TransferMatrix) -> TransferMatrix {
        assert_eq!(self.n(), rhs.n(), "matrix product on mismatched sizes");
        TransferMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        &self * &rhs
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    n: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for TransferMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .rows()
            .into_iter()
            .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
            .collect();
        MatrixRepr {
            n: self.n(),
            entries,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TransferMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.entries.len() != repr.n {
            return Err(serde::de::Error::custom(format!(
                "expected {} rows, found {}",
                repr.n,
                repr.entries.len()
            )));
        }
        let rows: Vec<Vec<Complex64>> = repr
            .entries
            .iter()
            .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            .collect();
        let m = TransferMatrix::from_rows(&rows).map_err(serde::de::Error::custom)?;
        if !m.is_finite() {
            return Err(serde::de::Error::custom("matrix entries must be finite"));
        }
        Ok(m)
    }
}
