//! Guaranteed cost analysis and coherent controller synthesis for uncertain
//! linear quantum systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`numkernel`] dense complex linear algebra (Hermitian eigensolver,
//!   general eigenvalues, Lyapunov solves, PSD square roots).
//! * [`qmodel`] doubled-up system matrices and the plant record.
//! * [`lmi`] affine Hermitian matrix expressions over real decision vectors.
//! * [`sdp`] a small dense log-barrier interior-point LMI solver.
//! * [`analysis`] and [`synthesis`] the certificate LMIs themselves.
//! * [`oracle`] independent moment-dynamics validation of certified bounds.
//! * [`runner`] configuration files, sweeps, CSV and SVG output.

pub mod analysis;
pub mod lmi;
pub mod numkernel;
pub mod oracle;
pub mod qmodel;
pub mod runner;
pub mod sdp;
pub mod synthesis;

pub use num_complex::Complex64;
