//! Simulation and calibration of FFT-butterfly optical networks (Green
//! Machines and Butler matrices).
//!
//! - [`network`] builds transfer matrices for ideal, Hadamard, Butler and
//!   phase-error networks of any power-of-two size.
//! - [`codebook`] inverts a transfer matrix into its codebook and checks it.
//! - [`device`] turns a matrix into a noisy, intensity-only black box.
//! - [`calibration`] learns codewords from that black box (GBNM, stage sweeps)
//!   and scans the objective landscape.
//! - [`experiment`] emulates the full 4-port calibration experiment.
//! - [`export`] writes traces and scans as CSV.

pub mod calibration;
pub mod codebook;
pub mod device;
pub mod error;
pub mod experiment;
pub mod export;
pub mod matrix;
pub mod network;
pub mod phase;

pub use codebook::{codeword_distance, extract_codebook, verify_codebook, Codebook, Codeword};
pub use device::{DeviceModel, IntensityOracle, IntensityReading, NoiseConfig, NoisePreset, PhaseProfile};
pub use error::{Error, Result};
pub use matrix::TransferMatrix;
pub use network::{
    build, build_butler, build_hadamard, build_ideal, build_with_errors, coupler_matrix, CouplerSpec,
    Flavor, NetworkSpec, PhaseLayer,
};
pub use num_complex::Complex64;
