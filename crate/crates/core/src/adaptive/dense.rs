//! Dense time-domain reference implementation of the partitioned Kalman
//! updates.
//!
//! This is the brute-force mirror of [`PartitionedKalman`]: reference
//! spectra come from an explicit O(M^2) DFT matrix, the diagonal
//! reference and step-size matrices are conjugated back to the time
//! domain as dense circulant matrices, and the weight updates are plain
//! matrix-vector products on those. Nothing here shares code with the
//! FFT path, which is the point — it exists so the fast implementation
//! can be checked against the equations it is supposed to realize, and
//! it is only practical at toy sizes.

use num_complex::Complex64;

use crate::adaptive::{FilterOutput, KalmanParams, KalmanVariant, ProcessNoiseRule};
use crate::error::{Error, Result};
use crate::spectral::FrameGeometry;

type CMatrix = Vec<Vec<Complex64>>;

fn dft_matrix(m: usize) -> CMatrix {
    (0..m)
        .map(|j| {
            (0..m)
                .map(|n| {
                    let phase = -2.0 * std::f64::consts::PI * (j * n) as f64 / m as f64;
                    Complex64::new(phase.cos(), phase.sin())
                })
                .collect()
        })
        .collect()
}

fn idft_matrix(m: usize) -> CMatrix {
    (0..m)
        .map(|n| {
            (0..m)
                .map(|j| {
                    let phase = 2.0 * std::f64::consts::PI * (j * n) as f64 / m as f64;
                    Complex64::new(phase.cos(), phase.sin()) / m as f64
                })
                .collect()
        })
        .collect()
}

fn mat_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn mat_vec(a: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// `F^{-1} diag(d) F` as a dense matrix.
fn conjugated_diagonal(f: &CMatrix, finv: &CMatrix, diag: &[Complex64]) -> CMatrix {
    let m = f.len();
    let mut scaled = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for (i, row) in f.iter().enumerate() {
        for j in 0..m {
            scaled[i][j] = diag[i] * row[j];
        }
    }
    mat_mul(finv, &scaled)
}

/// Conjugate transpose. Since `F^{-1} = F^H / M`, the Hermitian of
/// `F^{-1} diag(d) F` is exactly `F^{-1} diag(conj(d)) F`, i.e. the
/// time-domain image of the conjugated reference matrix.
fn hermitian(a: &CMatrix) -> CMatrix {
    let m = a.len();
    (0..m)
        .map(|i| (0..m).map(|j| a[j][i].conj()).collect())
        .collect()
}

/// Dense-matrix twin of the partitioned Kalman filter.
pub struct DenseKalman {
    geom: FrameGeometry,
    variant: KalmanVariant,
    params: KalmanParams,
    /// Per-partition time-domain weight blocks of length `M`: the first
    /// `L` entries are the causal taps, the last `L` the wraparound part
    /// (identically zero for the standard variant).
    time_weights: Vec<Vec<f64>>,
    err_cov: Vec<Vec<f64>>,
    history: Vec<f64>,
    f: CMatrix,
    finv: CMatrix,
}

impl DenseKalman {
    pub fn new(geom: FrameGeometry, variant: KalmanVariant, params: KalmanParams) -> Result<Self> {
        params.validate(&geom)?;
        let m = geom.fft_len();
        Ok(Self {
            geom,
            variant,
            time_weights: vec![vec![0.0; m]; geom.partitions()],
            err_cov: vec![vec![params.p_init; m]; geom.partitions()],
            history: vec![0.0; (geom.partitions() + 1) * geom.block_len()],
            params,
            f: dft_matrix(m),
            finv: idft_matrix(m),
        })
    }

    /// Load causal taps (length `N`), clearing any wraparound part.
    pub fn set_causal_weights(&mut self, taps: &[f64]) -> Result<()> {
        if taps.len() != self.geom.filter_len() {
            return Err(Error::Dimension(format!(
                "expected {} taps, got {}",
                self.geom.filter_len(),
                taps.len()
            )));
        }
        let l = self.geom.block_len();
        for (b, w) in self.time_weights.iter_mut().enumerate() {
            w.fill(0.0);
            w[..l].copy_from_slice(&taps[b * l..(b + 1) * l]);
        }
        Ok(())
    }

    pub fn err_cov(&self) -> &[Vec<f64>] {
        &self.err_cov
    }

    pub fn err_cov_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.err_cov
    }

    /// Concatenated causal taps, the quantity misalignment is measured on.
    pub fn causal_weights(&self) -> Vec<f64> {
        let l = self.geom.block_len();
        self.time_weights.iter().flat_map(|w| w[..l].to_vec()).collect()
    }

    /// Full per-partition time blocks including wraparound halves.
    pub fn full_time_weights(&self) -> &[Vec<f64>] {
        &self.time_weights
    }

    pub fn step(&mut self, x_new: &[f64], y: &[f64]) -> Result<FilterOutput> {
        let l = self.geom.block_len();
        let m = self.geom.fft_len();
        let partitions = self.geom.partitions();
        if x_new.len() != l || y.len() != l {
            return Err(Error::Dimension(format!(
                "step expects {l} samples, got {} and {}",
                x_new.len(),
                y.len()
            )));
        }

        self.history.copy_within(l.., 0);
        let n_hist = self.history.len();
        self.history[n_hist - l..].copy_from_slice(x_new);

        // per-partition reference spectra and circulant matrices
        let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(partitions);
        let mut circulants: Vec<CMatrix> = Vec::with_capacity(partitions);
        for b in 0..partitions {
            let start = (partitions - 1 - b) * l;
            let block: Vec<Complex64> = self.history[start..start + m]
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect();
            let spec = mat_vec(&self.f, &block);
            circulants.push(conjugated_diagonal(&self.f, &self.finv, &spec));
            spectra.push(spec);
        }

        // echo estimate: bottom half of C_b [w_causal; 0] summed over b
        let mut echo = vec![0.0; l];
        for b in 0..partitions {
            let w_vec: Vec<Complex64> = (0..m)
                .map(|i| {
                    if i < l {
                        Complex64::new(self.time_weights[b][i], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let out = mat_vec(&circulants[b], &w_vec);
            for t in 0..l {
                echo[t] += out[l + t].re;
            }
        }
        let error: Vec<f64> = y.iter().zip(&echo).map(|(a, b)| a - b).collect();

        // step sizes, same per-bin arithmetic as the recursion defines
        let ratio = l as f64 / m as f64;
        let mut denom = vec![self.params.epsilon; m];
        for b in 0..partitions {
            for j in 0..m {
                denom[j] += spectra[b][j].norm_sqr() * self.err_cov[b][j];
            }
        }
        for (d, psd) in denom.iter_mut().zip(&self.params.noise_psd) {
            *d += psd;
        }
        let step_size: Vec<Vec<f64>> = self
            .err_cov
            .iter()
            .map(|p_b| (0..m).map(|j| ratio * p_b[j] / denom[j]).collect())
            .collect();

        // weight update through the dense circulant step-size matrix
        let padded_error: Vec<Complex64> = (0..m)
            .map(|i| {
                if i < l {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(error[i - l], 0.0)
                }
            })
            .collect();
        let a = self.params.transition_a;
        for b in 0..partitions {
            let mu_diag: Vec<Complex64> = step_size[b]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            let mu_mat = conjugated_diagonal(&self.f, &self.finv, &mu_diag);

            // the gain correlates the error with the reference, so the
            // update drives through the Hermitian of the circulant
            let driven = mat_vec(&hermitian(&circulants[b]), &padded_error);
            let update: Vec<Complex64> = match self.variant {
                KalmanVariant::Pfkf => {
                    // constrain after the step-size product: keep the top
                    // half of M_b C_b [0; e]
                    let full = mat_vec(&mu_mat, &driven);
                    (0..m)
                        .map(|i| if i < l { full[i] } else { Complex64::new(0.0, 0.0) })
                        .collect()
                }
                KalmanVariant::Mpfkf => {
                    // constrain before the step-size product: both halves
                    // of M_b [driven_top; 0] survive
                    let constrained: Vec<Complex64> = (0..m)
                        .map(|i| if i < l { driven[i] } else { Complex64::new(0.0, 0.0) })
                        .collect();
                    mat_vec(&mu_mat, &constrained)
                }
            };
            for i in 0..m {
                debug_assert!(update[i].im.abs() < 1e-9);
                self.time_weights[b][i] = a * (self.time_weights[b][i] + update[i].re);
            }
        }

        // covariance recursion, process noise from the updated weights
        let a_sq = a * a;
        for b in 0..partitions {
            let weight_spec = mat_vec(
                &self.f,
                &self.time_weights[b]
                    .iter()
                    .map(|&w| Complex64::new(w, 0.0))
                    .collect::<Vec<_>>(),
            );
            for j in 0..m {
                let psi = match self.params.process_noise {
                    ProcessNoiseRule::ScaledWeightPower => {
                        (1.0 - a_sq) * weight_spec[j].norm_sqr()
                    }
                    ProcessNoiseRule::Constant(c) => c,
                };
                let shrink = 1.0 - ratio * step_size[b][j] * spectra[b][j].norm_sqr();
                self.err_cov[b][j] =
                    (a_sq * shrink * self.err_cov[b][j] + psi).max(self.params.p_floor).max(0.0);
            }
        }

        Ok(FilterOutput {
            echo_estimate: echo,
            error,
        })
    }
}
