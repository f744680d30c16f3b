//! Block DFT primitives shared by all the frequency-domain filters:
//! overlap-save framing, forward/inverse transforms and the two
//! constraint projections that zero out half of a block in the time
//! domain.
//!
//! Conventions: the forward transform is the plain unnormalized DFT,
//! `X[j] = sum_n x[n] exp(-i 2 pi j n / M)`, and the inverse carries the
//! `1/M` factor. With this scaling, elementwise multiplication of two
//! spectra corresponds exactly to circular convolution of their time
//! blocks, which is what the partitioned filters rely on.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Frame geometry shared by a partitioned filter bank: an `N`-tap filter
/// split into `B` partitions of `L` taps each, processed at transform
/// size `M = 2L` with a frame shift of `L` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    filter_len: usize,
    partitions: usize,
    block_len: usize,
    fft_len: usize,
}

impl FrameGeometry {
    /// Build a geometry from the filter length `N` and partition count `B`.
    /// `L = N / B` must divide evenly and be a power of two.
    pub fn new(filter_len: usize, partitions: usize) -> Result<Self> {
        if filter_len == 0 || partitions == 0 {
            return Err(Error::Parameter(
                "filter length and partition count must be positive".into(),
            ));
        }
        if filter_len % partitions != 0 {
            return Err(Error::Parameter(format!(
                "partition count {partitions} does not divide filter length {filter_len}"
            )));
        }
        let block_len = filter_len / partitions;
        if !block_len.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "block length {block_len} is not a power of two"
            )));
        }
        Ok(Self {
            filter_len,
            partitions,
            block_len,
            fft_len: 2 * block_len,
        })
    }

    /// Full-band geometry: a single partition covering all `N` taps,
    /// transform size `2N`, frame shift `N`.
    pub fn full_band(filter_len: usize) -> Result<Self> {
        Self::new(filter_len, 1)
    }

    /// Total number of adaptive taps `N`.
    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// Partition count `B`.
    pub fn partitions(&self) -> usize {
        self.partitions
    }

    /// Block shift `L` (new samples consumed per frame).
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Transform size `M = 2L`.
    pub fn fft_len(&self) -> usize {
        self.fft_len
    }
}

/// A real time-domain block of length `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBlock(Vec<f64>);

impl TimeBlock {
    pub fn new(samples: Vec<f64>) -> Self {
        Self(samples)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A complex frequency-domain block of length `M`. Conjugate symmetry is
/// a property of spectra obtained from real blocks, not a structural
/// invariant; intermediate quantities (weight gradients, projected
/// spectra) are kept as full complex vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<Complex64>);

impl Spectrum {
    pub fn new(bins: Vec<Complex64>) -> Self {
        Self(bins)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.0
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

/// Forward/inverse DFT pair bound to one transform size, plus the two
/// half-block constraint projections.
///
/// The planner is consulted once at construction; the per-frame calls
/// reuse the planned transforms.
pub struct BlockDft {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl BlockDft {
    /// Plan transforms for blocks of length `len` (must be a power of two).
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "transform size {len} is not a power of two"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        })
    }

    /// Transform size `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check_len(&self, got: usize, what: &str) -> Result<()> {
        if got != self.len {
            return Err(Error::Dimension(format!(
                "{what} has length {got}, transform expects {}",
                self.len
            )));
        }
        Ok(())
    }

    /// Unnormalized forward DFT of a real block.
    pub fn forward(&self, block: &TimeBlock) -> Result<Spectrum> {
        self.check_len(block.len(), "time block")?;
        let mut buf: Vec<Complex64> = block
            .samples()
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        self.fwd.process(&mut buf);
        Ok(Spectrum::new(buf))
    }

    /// Inverse DFT (with the `1/M` factor), discarding the imaginary part.
    pub fn inverse(&self, spec: &Spectrum) -> Result<TimeBlock> {
        Ok(TimeBlock::new(
            self.inverse_complex(spec)?.iter().map(|c| c.re).collect(),
        ))
    }

    /// Inverse DFT keeping the complex result. The projections and the
    /// symmetry tests need the imaginary part.
    pub fn inverse_complex(&self, spec: &Spectrum) -> Result<Vec<Complex64>> {
        self.check_len(spec.len(), "spectrum")?;
        let mut buf = spec.bins().to_vec();
        self.inv.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        for c in &mut buf {
            *c *= scale;
        }
        Ok(buf)
    }

    /// Constraint projection keeping the causal half: transforms to the
    /// time domain, zeroes the LAST `L = M/2` samples and transforms
    /// back. Applied to weight gradients it confines the update to the
    /// first `L` taps of a partition.
    pub fn project_causal(&self, spec: &Spectrum) -> Result<Spectrum> {
        self.project(spec, false)
    }

    /// Complementary projection: zeroes the FIRST `L` time-domain
    /// samples. Applied to an overlap-save product it keeps exactly the
    /// samples that form a valid linear convolution.
    pub fn project_anticausal(&self, spec: &Spectrum) -> Result<Spectrum> {
        self.project(spec, true)
    }

    fn project(&self, spec: &Spectrum, zero_first_half: bool) -> Result<Spectrum> {
        let mut buf = self.inverse_complex(spec)?;
        let half = self.len / 2;
        let range = if zero_first_half { 0..half } else { half..self.len };
        for c in &mut buf[range] {
            *c = Complex64::new(0.0, 0.0);
        }
        self.fwd.process(&mut buf);
        Ok(Spectrum::new(buf))
    }

    /// Spectrum of a reference block. Multiplying another spectrum
    /// elementwise by this one realizes multiplication by the diagonal
    /// reference matrix, i.e. circular convolution with the block.
    pub fn reference_spectrum(&self, block: &TimeBlock) -> Result<Spectrum> {
        self.forward(block)
    }
}
