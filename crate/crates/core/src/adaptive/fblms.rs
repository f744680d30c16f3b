//! Bin-normalized frequency-domain block LMS (overlap-save, constrained).

use crate::adaptive::{AdaptiveFilter, FilterOutput};
use crate::error::{Error, Result};
use crate::spectral::{BlockDft, FrameGeometry, Spectrum, TimeBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct FblmsParams {
    /// Normalized step size.
    pub step_size: f64,
    /// Exponential smoothing factor for the per-bin reference power.
    pub power_smoothing: f64,
    /// Regularization added to the power normalization.
    pub epsilon: f64,
}

impl Default for FblmsParams {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            power_smoothing: 0.9,
            epsilon: 1e-10,
        }
    }
}

impl FblmsParams {
    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Parameter("step size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.power_smoothing) {
            return Err(Error::Parameter(format!(
                "power smoothing {} not in [0, 1)",
                self.power_smoothing
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Classic constrained FDAF: one partition, transform size `2N`, frame
/// shift `N`, gradient normalized per bin by the smoothed reference
/// power:
/// `W <- W + G_causal(mu . conj(X) . E / (P_x + eps))`.
pub struct Fblms {
    geom: FrameGeometry,
    params: FblmsParams,
    dft: BlockDft,
    weights: Spectrum,
    power: Vec<f64>,
    history: Vec<f64>,
    primed: bool,
}

impl Fblms {
    /// `geom` must be single-partition (use [`FrameGeometry::full_band`]).
    pub fn new(geom: FrameGeometry, params: FblmsParams) -> Result<Self> {
        if geom.partitions() != 1 {
            return Err(Error::Parameter(
                "FBLMS runs full-band: partition count must be 1".into(),
            ));
        }
        params.validate()?;
        let dft = BlockDft::new(geom.fft_len())?;
        Ok(Self {
            geom,
            params,
            dft,
            weights: Spectrum::zeros(geom.fft_len()),
            power: vec![0.0; geom.fft_len()],
            history: vec![0.0; geom.fft_len()],
            primed: false,
        })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geom
    }

    pub fn weight_spectrum(&self) -> &Spectrum {
        &self.weights
    }
}

impl AdaptiveFilter for Fblms {
    fn frame_shift(&self) -> usize {
        self.geom.block_len()
    }

    fn filter_len(&self) -> usize {
        self.geom.filter_len()
    }

    fn step(&mut self, x_new: &[f64], y: &[f64]) -> Result<FilterOutput> {
        let l = self.geom.block_len();
        let m = self.geom.fft_len();
        if x_new.len() != l || y.len() != l {
            return Err(Error::Dimension(format!(
                "step expects {l} reference and microphone samples, got {} and {}",
                x_new.len(),
                y.len()
            )));
        }

        self.history.copy_within(l.., 0);
        self.history[m - l..].copy_from_slice(x_new);
        let x_spec = self
            .dft
            .reference_spectrum(&TimeBlock::new(self.history.clone()))?;

        // the first frame seeds the power estimate directly, so the
        // normalized step starts at its intended size instead of the
        // huge value a zero-initialized power would give
        if self.primed {
            let gamma = self.params.power_smoothing;
            for (p, bin) in self.power.iter_mut().zip(x_spec.bins()) {
                *p = gamma * *p + (1.0 - gamma) * bin.norm_sqr();
            }
        } else {
            for (p, bin) in self.power.iter_mut().zip(x_spec.bins()) {
                *p = bin.norm_sqr();
            }
            self.primed = true;
        }

        let prod = Spectrum::new(
            x_spec
                .bins()
                .iter()
                .zip(self.weights.bins())
                .map(|(x, w)| x * w)
                .collect(),
        );
        let full = self.dft.inverse(&prod)?;
        let echo_estimate = full.samples()[l..].to_vec();
        let error: Vec<f64> = y.iter().zip(&echo_estimate).map(|(a, b)| a - b).collect();

        let mut err_block = vec![0.0; m];
        err_block[l..].copy_from_slice(&error);
        let err_spec = self.dft.forward(&TimeBlock::new(err_block))?;

        let mu = self.params.step_size;
        let eps = self.params.epsilon;
        let grad = Spectrum::new(
            (0..m)
                .map(|j| {
                    mu * x_spec.bins()[j].conj() * err_spec.bins()[j] / (self.power[j] + eps)
                })
                .collect(),
        );
        let gain = self.dft.project_causal(&grad)?;
        for (w, g) in self.weights.bins_mut().iter_mut().zip(gain.bins()) {
            *w += g;
        }

        Ok(FilterOutput {
            echo_estimate,
            error,
        })
    }

    fn time_weights(&self) -> Vec<f64> {
        let block = self
            .dft
            .inverse(&self.weights)
            .expect("weight spectrum length matches the planned transform");
        block.samples()[..self.geom.block_len()].to_vec()
    }
}
