//! The adaptive algorithm bank: PFKF, MPFKF, FKF and FBLMS behind one
//! block-streaming interface, plus a dense time-domain reference
//! implementation used to validate the frequency-domain updates.

mod fblms;
mod kalman;

pub mod dense;

pub use fblms::{Fblms, FblmsParams};
pub use kalman::{Fkf, KalmanVariant, PartitionedFilterState, PartitionedKalman};

use crate::error::{Error, Result};
use crate::spectral::{FrameGeometry, Spectrum};

/// One processed block: the echo estimate for the newest `L` microphone
/// samples and the residual error. `error[i] == microphone[i] -
/// echo_estimate[i]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub echo_estimate: Vec<f64>,
    pub error: Vec<f64>,
}

/// How the per-partition process noise PSD is derived each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessNoiseRule {
    /// `(1 - A^2) |W_b[j]|^2`, the stationary choice for the first-order
    /// Markov weight model. Zero when `A = 1`.
    ScaledWeightPower,
    /// A fixed per-bin constant.
    Constant(f64),
}

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const DEFAULT_P_INIT: f64 = 10.0;

/// Tuning of the Kalman recursions shared by PFKF, MPFKF and FKF.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanParams {
    /// Markov transition parameter `A`, in `(0, 1]`. `A = 1` models a
    /// static echo path.
    pub transition_a: f64,
    /// Observation-noise PSD per bin (length `M`).
    pub noise_psd: Vec<f64>,
    pub process_noise: ProcessNoiseRule,
    /// Regularization added to the step-size denominator.
    pub epsilon: f64,
    /// Initial per-bin error covariance; large values give an NLMS-like
    /// fast initial convergence.
    pub p_init: f64,
    /// Optional lower bound on the error covariance (0 disables it).
    pub p_floor: f64,
}

impl KalmanParams {
    pub fn new(transition_a: f64, noise_psd: Vec<f64>) -> Self {
        Self {
            transition_a,
            noise_psd,
            process_noise: ProcessNoiseRule::ScaledWeightPower,
            epsilon: DEFAULT_EPSILON,
            p_init: DEFAULT_P_INIT,
            p_floor: 0.0,
        }
    }

    pub(crate) fn validate(&self, geom: &FrameGeometry) -> Result<()> {
        if !(self.transition_a > 0.0 && self.transition_a <= 1.0) {
            return Err(Error::Parameter(format!(
                "transition parameter {} not in (0, 1]",
                self.transition_a
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        if !(self.p_init > 0.0) || !(self.p_floor >= 0.0) {
            return Err(Error::Parameter("covariance init/floor must be nonnegative".into()));
        }
        if self.noise_psd.len() != geom.fft_len() {
            return Err(Error::Dimension(format!(
                "noise PSD has {} bins, transform needs {}",
                self.noise_psd.len(),
                geom.fft_len()
            )));
        }
        if self.noise_psd.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Parameter("noise PSD must be nonnegative".into()));
        }
        if let ProcessNoiseRule::Constant(c) = self.process_noise {
            if !(c >= 0.0) {
                return Err(Error::Parameter("process noise constant must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Flat observation-noise PSD for white noise of the given variance at
/// transform size `M`: `sigma^2 * M` per bin.
pub fn flat_noise_psd(noise_variance: f64, fft_len: usize) -> Vec<f64> {
    vec![noise_variance * fft_len as f64; fft_len]
}

/// Smoothed-periodogram estimate of the observation-noise PSD in the
/// block convention the filters use (`F [0_L; s]` frames of shift `L`).
/// Available when the noise variance is not known a priori.
pub fn estimate_noise_psd(noise: &[f64], fft_len: usize, smoothing: f64) -> Result<Vec<f64>> {
    use crate::spectral::{BlockDft, TimeBlock};
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Parameter(format!("smoothing {smoothing} not in [0, 1)")));
    }
    let half = fft_len / 2;
    if noise.len() < half {
        return Err(Error::Parameter("noise record shorter than one block".into()));
    }
    let dft = BlockDft::new(fft_len)?;
    let mut psd = vec![0.0; fft_len];
    let mut first = true;
    for chunk in noise.chunks_exact(half) {
        let mut block = vec![0.0; fft_len];
        block[half..].copy_from_slice(chunk);
        let spec = dft.forward(&TimeBlock::new(block))?;
        for (p, bin) in psd.iter_mut().zip(spec.bins()) {
            let power = bin.norm_sqr();
            if first {
                *p = power;
            } else {
                *p = smoothing * *p + (1.0 - smoothing) * power;
            }
        }
        first = false;
    }
    Ok(psd)
}

/// Per-bin step sizes of the simplified Kalman recursion:
/// `mu_b[j] = (L/M) P_b[j] / (sum_m |X_m[j]|^2 P_m[j] + psd[j] + eps)`.
/// Every factor is diagonal, so the matrix inverse reduces to an
/// elementwise division.
pub fn compute_step_size(
    err_cov: &[Vec<f64>],
    reference: &[Spectrum],
    noise_psd: &[f64],
    epsilon: f64,
    geom: &FrameGeometry,
) -> Vec<Vec<f64>> {
    let m = geom.fft_len();
    let ratio = geom.block_len() as f64 / m as f64;
    let mut denom = vec![epsilon; m];
    for (p_b, x_b) in err_cov.iter().zip(reference) {
        for j in 0..m {
            denom[j] += x_b.bins()[j].norm_sqr() * p_b[j];
        }
    }
    for (d, psd) in denom.iter_mut().zip(noise_psd) {
        *d += psd;
    }
    err_cov
        .iter()
        .map(|p_b| (0..m).map(|j| ratio * p_b[j] / denom[j]).collect())
        .collect()
}

/// Error-covariance recursion:
/// `P_b[j] <- A^2 (1 - (L/M) mu_b[j] |X_b[j]|^2) P_b[j] + psi_b[j]`,
/// clamped to stay nonnegative. `weights` feeds the scaled-weight-power
/// process noise rule.
pub fn update_err_cov(
    err_cov: &mut [Vec<f64>],
    reference: &[Spectrum],
    step_size: &[Vec<f64>],
    weights: &[Spectrum],
    params: &KalmanParams,
    geom: &FrameGeometry,
) {
    let m = geom.fft_len();
    let ratio = geom.block_len() as f64 / m as f64;
    let a_sq = params.transition_a * params.transition_a;
    let scaled = 1.0 - a_sq;
    for b in 0..err_cov.len() {
        for j in 0..m {
            let psi = match params.process_noise {
                ProcessNoiseRule::ScaledWeightPower => scaled * weights[b].bins()[j].norm_sqr(),
                ProcessNoiseRule::Constant(c) => c,
            };
            let shrink = 1.0 - ratio * step_size[b][j] * reference[b].bins()[j].norm_sqr();
            err_cov[b][j] = (a_sq * shrink * err_cov[b][j] + psi).max(params.p_floor).max(0.0);
        }
    }
}

/// Common streaming surface of the four algorithms. Each call consumes
/// `frame_shift()` new reference and microphone samples and yields the
/// corresponding output block. Instances own their state; run one per
/// thread for concurrent trials.
pub trait AdaptiveFilter {
    /// Samples consumed per `step` call (`L` for the partitioned
    /// filters, `N` for the full-band ones).
    fn frame_shift(&self) -> usize;

    /// Number of modeled taps `N`.
    fn filter_len(&self) -> usize;

    /// Process one block of new samples.
    fn step(&mut self, x_new: &[f64], y: &[f64]) -> Result<FilterOutput>;

    /// Current time-domain estimate: the causal `L` taps of each
    /// partition concatenated into an `N`-vector (wraparound parts are
    /// discarded).
    fn time_weights(&self) -> Vec<f64>;
}
