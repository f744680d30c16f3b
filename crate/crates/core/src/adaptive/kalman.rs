//! Partitioned-block frequency-domain Kalman filtering.
//!
//! Both variants share the observation path and the step-size /
//! covariance recursions; they differ only in where the causal
//! constraint sits in the weight update, and that placement is exactly
//! what decides whether the steady state stays optimal when the filter
//! is too short for the echo path:
//!
//! * standard update: the constraint wraps the whole gain term,
//!   `W_b <- A (W_b + G_causal(mu_b . conj(X_b) . E))`, so the stored
//!   weights always have causal support;
//! * modified update: the constraint is applied before the step-size
//!   product, `W_b <- A (W_b + mu_b . G_causal(conj(X_b) . E))`. The
//!   stored weights then pick up a wraparound half, which is projected
//!   away when computing the filter output.

use crate::adaptive::{
    compute_step_size, update_err_cov, AdaptiveFilter, FilterOutput, KalmanParams,
};
use crate::error::{Error, Result};
use crate::spectral::{BlockDft, FrameGeometry, Spectrum, TimeBlock};

/// Which placement of the causal constraint the update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KalmanVariant {
    /// Standard partitioned-block update (PFKF).
    Pfkf,
    /// Modified update with the constraint inside the gain (MPFKF);
    /// converges to the length-`N` Wiener solution even under
    /// deficient-length modeling.
    Mpfkf,
}

/// Adaptive state of a partitioned filter bank.
#[derive(Debug, Clone)]
pub struct PartitionedFilterState {
    /// Per-partition weight spectra, `B` of length `M`.
    pub weights: Vec<Spectrum>,
    /// Per-partition diagonal error covariance, `B` vectors of length `M`.
    pub err_cov: Vec<Vec<f64>>,
    /// The last `(B + 1) L` reference samples, oldest first.
    pub history: Vec<f64>,
}

impl PartitionedFilterState {
    fn new(geom: &FrameGeometry, p_init: f64) -> Self {
        Self {
            weights: vec![Spectrum::zeros(geom.fft_len()); geom.partitions()],
            err_cov: vec![vec![p_init; geom.fft_len()]; geom.partitions()],
            history: vec![0.0; (geom.partitions() + 1) * geom.block_len()],
        }
    }
}

/// PFKF / MPFKF streaming filter.
pub struct PartitionedKalman {
    geom: FrameGeometry,
    variant: KalmanVariant,
    params: KalmanParams,
    dft: BlockDft,
    state: PartitionedFilterState,
}

impl PartitionedKalman {
    pub fn new(geom: FrameGeometry, variant: KalmanVariant, params: KalmanParams) -> Result<Self> {
        params.validate(&geom)?;
        let dft = BlockDft::new(geom.fft_len())?;
        let state = PartitionedFilterState::new(&geom, params.p_init);
        Ok(Self {
            geom,
            variant,
            params,
            dft,
            state,
        })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geom
    }

    pub fn variant(&self) -> KalmanVariant {
        self.variant
    }

    pub fn state(&self) -> &PartitionedFilterState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut PartitionedFilterState {
        &mut self.state
    }

    /// Load known time-domain taps (length `N`) into the weight spectra;
    /// mostly useful for tests and warm starts.
    pub fn set_time_weights(&mut self, taps: &[f64]) -> Result<()> {
        if taps.len() != self.geom.filter_len() {
            return Err(Error::Dimension(format!(
                "expected {} taps, got {}",
                self.geom.filter_len(),
                taps.len()
            )));
        }
        let l = self.geom.block_len();
        for (b, w) in self.state.weights.iter_mut().enumerate() {
            let mut block = vec![0.0; self.geom.fft_len()];
            block[..l].copy_from_slice(&taps[b * l..(b + 1) * l]);
            *w = self.dft.forward(&TimeBlock::new(block))?;
        }
        Ok(())
    }

    /// Reference spectrum of partition `b` for the current frame: the
    /// `M` most recent samples delayed by `b L`.
    fn partition_spectrum(&self, b: usize) -> Result<Spectrum> {
        let l = self.geom.block_len();
        let m = self.geom.fft_len();
        let start = (self.geom.partitions() - 1 - b) * l;
        self.dft
            .reference_spectrum(&TimeBlock::new(self.state.history[start..start + m].to_vec()))
    }
}

impl AdaptiveFilter for PartitionedKalman {
    fn frame_shift(&self) -> usize {
        self.geom.block_len()
    }

    fn filter_len(&self) -> usize {
        self.geom.filter_len()
    }

    fn step(&mut self, x_new: &[f64], y: &[f64]) -> Result<FilterOutput> {
        let l = self.geom.block_len();
        let m = self.geom.fft_len();
        let partitions = self.geom.partitions();
        if x_new.len() != l || y.len() != l {
            return Err(Error::Dimension(format!(
                "step expects {l} reference and microphone samples, got {} and {}",
                x_new.len(),
                y.len()
            )));
        }

        // slide the reference window forward by one block
        self.state.history.copy_within(l.., 0);
        let n_hist = self.state.history.len();
        self.state.history[n_hist - l..].copy_from_slice(x_new);

        let reference: Vec<Spectrum> = (0..partitions)
            .map(|b| self.partition_spectrum(b))
            .collect::<Result<_>>()?;

        // echo estimate: overlap-save output of the (projected) weights
        let mut sum = Spectrum::zeros(m);
        for (x_b, w_b) in reference.iter().zip(&self.state.weights) {
            let w_eff = match self.variant {
                KalmanVariant::Pfkf => None,
                KalmanVariant::Mpfkf => Some(self.dft.project_causal(w_b)?),
            };
            let w_bins = w_eff.as_ref().unwrap_or(w_b).bins();
            for (s, (x, w)) in sum.bins_mut().iter_mut().zip(x_b.bins().iter().zip(w_bins)) {
                *s += x * w;
            }
        }
        let full = self.dft.inverse(&sum)?;
        let echo_estimate = full.samples()[l..].to_vec();
        let error: Vec<f64> = y.iter().zip(&echo_estimate).map(|(a, b)| a - b).collect();

        // frequency-domain error block F [0_L; e]
        let mut err_block = vec![0.0; m];
        err_block[l..].copy_from_slice(&error);
        let err_spec = self.dft.forward(&TimeBlock::new(err_block))?;

        let step_size = compute_step_size(
            &self.state.err_cov,
            &reference,
            &self.params.noise_psd,
            self.params.epsilon,
            &self.geom,
        );

        let a = self.params.transition_a;
        for b in 0..partitions {
            let x_b = &reference[b];
            let gain = match self.variant {
                KalmanVariant::Pfkf => {
                    let grad = Spectrum::new(
                        (0..m)
                            .map(|j| step_size[b][j] * x_b.bins()[j].conj() * err_spec.bins()[j])
                            .collect(),
                    );
                    self.dft.project_causal(&grad)?
                }
                KalmanVariant::Mpfkf => {
                    let grad = Spectrum::new(
                        (0..m)
                            .map(|j| x_b.bins()[j].conj() * err_spec.bins()[j])
                            .collect(),
                    );
                    let constrained = self.dft.project_causal(&grad)?;
                    Spectrum::new(
                        (0..m)
                            .map(|j| step_size[b][j] * constrained.bins()[j])
                            .collect(),
                    )
                }
            };
            for (w, g) in self.state.weights[b].bins_mut().iter_mut().zip(gain.bins()) {
                *w = a * (*w + g);
            }
        }

        update_err_cov(
            &mut self.state.err_cov,
            &reference,
            &step_size,
            &self.state.weights,
            &self.params,
            &self.geom,
        );

        Ok(FilterOutput {
            echo_estimate,
            error,
        })
    }

    fn time_weights(&self) -> Vec<f64> {
        let l = self.geom.block_len();
        let mut taps = Vec::with_capacity(self.geom.filter_len());
        for w in &self.state.weights {
            let block = self
                .dft
                .inverse(w)
                .expect("weight spectrum length matches the planned transform");
            taps.extend_from_slice(&block.samples()[..l]);
        }
        taps
    }
}

/// Full-band frequency-domain Kalman filter: the single-partition
/// specialization running at transform size `2N` with frame shift `N`.
pub struct Fkf {
    inner: PartitionedKalman,
}

impl Fkf {
    pub fn new(filter_len: usize, params: KalmanParams) -> Result<Self> {
        Ok(Self {
            inner: PartitionedKalman::new(
                FrameGeometry::full_band(filter_len)?,
                KalmanVariant::Pfkf,
                params,
            )?,
        })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        self.inner.geometry()
    }

    pub fn state(&self) -> &PartitionedFilterState {
        self.inner.state()
    }
}

impl AdaptiveFilter for Fkf {
    fn frame_shift(&self) -> usize {
        self.inner.frame_shift()
    }

    fn filter_len(&self) -> usize {
        self.inner.filter_len()
    }

    fn step(&mut self, x_new: &[f64], y: &[f64]) -> Result<FilterOutput> {
        self.inner.step(x_new, y)
    }

    fn time_weights(&self) -> Vec<f64> {
        self.inner.time_weights()
    }
}
