//! Spectral engine for the signature operator.
pub mod assembly;
pub mod decay;
pub mod fourier;
pub mod fredholm;
pub mod homotopy;
pub mod kernel;
pub mod parametrix;
pub mod report;
pub mod signature;
pub mod solver;
