//! Frequency-domain adaptive echo cancellation with partitioned-block
//! Kalman filtering.
//!
//! The crate provides four block-adaptive algorithms behind one streaming
//! interface — the partitioned-block frequency-domain Kalman filter
//! (PFKF), a modified variant (MPFKF) whose steady state stays optimal
//! when the adaptive filter is shorter than the true echo path, the
//! full-band frequency-domain Kalman filter (FKF) and a bin-normalized
//! frequency-domain block LMS (FBLMS) — together with the supporting
//! pieces an identification experiment needs: block DFT/overlap-save
//! primitives, deterministic signal generation, a Toeplitz Wiener solver
//! for the optimal deficient-length reference solution, and misalignment
//! metrics.

pub mod adaptive;
pub mod error;
pub mod metrics;
pub mod signals;
pub mod spectral;
pub mod wiener;

pub use error::{Error, Result};
pub use spectral::{BlockDft, FrameGeometry, Spectrum, TimeBlock};
