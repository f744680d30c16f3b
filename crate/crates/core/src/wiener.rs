//! The optimal deficient-length reference solution.
//!
//! When the adaptive filter is shorter than the true echo path, the best
//! length-`N` filter in the mean-square sense solves the symmetric
//! Toeplitz system `R_x w = p`, with `R_x` built from the reference
//! autocorrelation lags and `p` the reference/microphone
//! cross-correlation. That solution is the reference every misalignment
//! trace is measured against.

use crate::error::{Error, Result};
use crate::signals::EchoPath;

/// Autocorrelation lags `R_x(0..N-1)` and cross-correlation `p_0..p_{N-1}`
/// defining the length-`N` normal equations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    autocorr: Vec<f64>,
    crosscorr: Vec<f64>,
}

impl CorrelationModel {
    pub fn new(autocorr: Vec<f64>, crosscorr: Vec<f64>) -> Result<Self> {
        if autocorr.is_empty() || autocorr.len() != crosscorr.len() {
            return Err(Error::Parameter(
                "correlation vectors must be nonempty and equal length".into(),
            ));
        }
        Ok(Self { autocorr, crosscorr })
    }

    pub fn len(&self) -> usize {
        self.autocorr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.autocorr.is_empty()
    }

    pub fn autocorr(&self) -> &[f64] {
        &self.autocorr
    }

    pub fn crosscorr(&self) -> &[f64] {
        &self.crosscorr
    }
}

/// Biased time-average estimators of the first `n` correlation lags:
/// `R_x(i) = (1/T) sum x(t) x(t-i)`, `p_i = (1/T) sum y(t) x(t-i)`.
/// The biased form keeps the Toeplitz matrix positive semidefinite.
pub fn estimate_correlations(x: &[f64], y: &[f64], n: usize) -> Result<CorrelationModel> {
    if n == 0 {
        return Err(Error::Parameter("need at least one lag".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Parameter("reference and microphone streams differ in length".into()));
    }
    if x.len() < 10 * n {
        return Err(Error::Parameter(format!(
            "streams of length {} are too short to estimate {n} lags (need >= {})",
            x.len(),
            10 * n
        )));
    }
    let t = x.len() as f64;
    let mut autocorr = vec![0.0; n];
    let mut crosscorr = vec![0.0; n];
    for (i, (r, p)) in autocorr.iter_mut().zip(crosscorr.iter_mut()).enumerate() {
        let mut acc_r = 0.0;
        let mut acc_p = 0.0;
        for t in i..x.len() {
            acc_r += x[t] * x[t - i];
            acc_p += y[t] * x[t - i];
        }
        *r = acc_r / t;
        *p = acc_p / t;
    }
    CorrelationModel::new(autocorr, crosscorr)
}

/// Exact correlations for a scene where the reference is unit-variance
/// white noise through the FIR `coloring` and the microphone is the
/// reference through `path` plus independent noise. Independent
/// observation noise leaves both correlations unchanged, so its variance
/// does not enter the formulas.
pub fn analytic_correlations(
    coloring: &[f64],
    path: &EchoPath,
    _noise_var: f64,
    n: usize,
) -> Result<CorrelationModel> {
    if coloring.is_empty() || n == 0 {
        return Err(Error::Parameter("coloring filter and lag count must be nonempty".into()));
    }
    // R_x(i) = sum_j h[j] h[j+i] for the white-driven FIR reference
    let max_lag = coloring.len();
    let rx = |lag: usize| -> f64 {
        if lag >= max_lag {
            return 0.0;
        }
        coloring
            .iter()
            .zip(&coloring[lag..])
            .map(|(a, b)| a * b)
            .sum()
    };
    let autocorr: Vec<f64> = (0..n).map(&rx).collect();

    // p_i = sum_j w0[j] R_x(i - j), using R_x(-i) = R_x(i)
    let crosscorr: Vec<f64> = (0..n as isize)
        .map(|i| {
            path.taps()
                .iter()
                .enumerate()
                .map(|(j, &w)| w * rx((i - j as isize).unsigned_abs()))
                .sum()
        })
        .collect();
    CorrelationModel::new(autocorr, crosscorr)
}

// Reflection coefficients this close to the unit circle make the
// recursion numerically untrustworthy; fall through to dense Cholesky.
const REFLECTION_LIMIT: f64 = 1.0 - 1e-12;
const RESIDUAL_LIMIT: f64 = 1e-8;

/// Solve the length-`N` normal equations `R_x w = p`.
///
/// Levinson recursion on the symmetric Toeplitz structure, with a dense
/// Cholesky fallback when a reflection coefficient approaches the unit
/// circle. Accepted solutions satisfy a relative residual below `1e-8`;
/// anything else is reported as a numerical failure with the offending
/// diagnostic.
pub fn solve_wiener(model: &CorrelationModel) -> Result<Vec<f64>> {
    let r = model.autocorr();
    let p = model.crosscorr();
    if r[0] <= 0.0 {
        return Err(Error::Numerical(format!(
            "autocorrelation matrix is not positive definite: R_x(0) = {}",
            r[0]
        )));
    }

    let solution = match levinson_solve(r, p) {
        Ok(w) => w,
        Err(_) => cholesky_solve(r, p)?,
    };

    let residual = relative_residual(r, p, &solution);
    if residual > RESIDUAL_LIMIT {
        // the recursion lost accuracy; try the dense route before giving up
        let dense = cholesky_solve(r, p)?;
        let dense_residual = relative_residual(r, p, &dense);
        if dense_residual > RESIDUAL_LIMIT {
            return Err(Error::Numerical(format!(
                "normal equations too ill-conditioned: relative residual {dense_residual:.3e}"
            )));
        }
        return Ok(dense);
    }
    Ok(solution)
}

/// Levinson recursion for a symmetric Toeplitz system with a general
/// right-hand side. O(N^2) time, O(N) extra space.
fn levinson_solve(r: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = r.len();
    let mut x = vec![b[0] / r[0]];
    if n == 1 {
        return Ok(x);
    }
    let mut y = vec![-r[1] / r[0]]; // prediction vector, T_k y = -(r_1..r_k)
    if y[0].abs() > REFLECTION_LIMIT {
        return Err(Error::Numerical("reflection coefficient at unit circle".into()));
    }
    let mut err = r[0] * (1.0 - y[0] * y[0]); // prediction error power E_k

    for k in 1..n {
        // expand x to order k+1
        let dot_x: f64 = (0..k).map(|i| r[k - i] * x[i]).sum();
        let nu = (b[k] - dot_x) / err;
        let mut next_x = vec![0.0; k + 1];
        for i in 0..k {
            next_x[i] = x[i] + nu * y[k - 1 - i];
        }
        next_x[k] = nu;
        x = next_x;

        if k == n - 1 {
            break;
        }

        // expand the prediction vector to order k+1
        let dot_y: f64 = (1..=k).map(|i| r[k + 1 - i] * y[i - 1]).sum();
        let mu = -(r[k + 1] + dot_y) / err;
        if mu.abs() > REFLECTION_LIMIT {
            return Err(Error::Numerical("reflection coefficient at unit circle".into()));
        }
        let mut next_y = vec![0.0; k + 1];
        for i in 0..k {
            next_y[i] = y[i] + mu * y[k - 1 - i];
        }
        next_y[k] = mu;
        y = next_y;
        err *= 1.0 - mu * mu;
        if !(err > 0.0) {
            return Err(Error::Numerical("prediction error collapsed to zero".into()));
        }
    }
    Ok(x)
}

/// Dense Cholesky solve of the explicit Toeplitz matrix.
fn cholesky_solve(r: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = r.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = r[i.abs_diff(j)];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "Cholesky pivot {sum:.3e} at row {i}: matrix not positive definite"
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // forward then backward substitution
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * z[k];
        }
        z[i] = sum / l[i][i];
    }
    let mut w = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in i + 1..n {
            sum -= l[k][i] * w[k];
        }
        w[i] = sum / l[i][i];
    }
    Ok(w)
}

fn relative_residual(r: &[f64], p: &[f64], w: &[f64]) -> f64 {
    let n = r.len();
    let p_norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if p_norm == 0.0 {
        return 0.0;
    }
    let mut resid = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            row += r[i.abs_diff(j)] * wj;
        }
        resid += (row - p[i]) * (row - p[i]);
    }
    resid.sqrt() / p_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{
        design_coloring_filter, fir_filter, gen_white_noise, mix_at_snr, seeded_rng,
        ColoringFilter,
    };

    /// Gaussian elimination with partial pivoting; independent of both
    /// solver routes above.
    fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(row, &rhs)| {
                let mut r = row.clone();
                r.push(rhs);
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            m.swap(col, pivot);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut sum = m[row][n];
            for k in row + 1..n {
                sum -= m[row][k] * x[k];
            }
            x[row] = sum / m[row][row];
        }
        x
    }

    fn toeplitz(r: &[f64]) -> Vec<Vec<f64>> {
        let n = r.len();
        (0..n)
            .map(|i| (0..n).map(|j| r[i.abs_diff(j)]).collect())
            .collect()
    }

    #[test]
    fn zero_streams_give_zero_model_and_failing_solve() {
        let x = vec![0.0; 200];
        let model = estimate_correlations(&x, &x, 8).unwrap();
        assert!(model.autocorr().iter().all(|&v| v == 0.0));
        assert!(model.crosscorr().iter().all(|&v| v == 0.0));
        assert!(solve_wiener(&model).is_err());
    }

    #[test]
    fn estimator_rejects_short_streams() {
        let x = vec![1.0; 50];
        assert!(estimate_correlations(&x, &x, 8).is_err());
        assert!(estimate_correlations(&x, &x[..40], 4).is_err());
    }

    #[test]
    fn white_noise_correlations() {
        let t = 200_000;
        let x = gen_white_noise(&mut seeded_rng(21), t, 1.0).unwrap();
        let model = estimate_correlations(&x, &x, 6).unwrap();
        let bound = 3.0 / (t as f64).sqrt();
        assert!((model.autocorr()[0] - 1.0).abs() < bound * 3.0);
        for &lag in &model.autocorr()[1..] {
            assert!(lag.abs() < bound, "lag {lag} exceeds {bound}");
        }
    }

    #[test]
    fn crosscorr_matches_convolution_identity() {
        let t = 400_000;
        let n = 12;
        let x = gen_white_noise(&mut seeded_rng(22), t, 1.0).unwrap();
        let w0 = EchoPath::new(vec![0.9, -0.4, 0.25, 0.1]).unwrap();
        let echo = fir_filter(&x, w0.taps()).unwrap();
        let (y, _, _) = mix_at_snr(&echo, &mut seeded_rng(23), 30.0).unwrap();

        let model = estimate_correlations(&x, &y, n).unwrap();
        // analytic p for white reference: p_i = w0[i]
        for i in 0..n {
            let expect = w0.taps().get(i).copied().unwrap_or(0.0);
            assert!(
                (model.crosscorr()[i] - expect).abs() < 0.02,
                "lag {i}: {} vs {expect}",
                model.crosscorr()[i]
            );
        }
    }

    #[test]
    fn analytic_white_reference_is_identity() {
        let path = EchoPath::new(vec![0.5, -0.3, 0.2, 0.1, 0.05]).unwrap();
        let model = analytic_correlations(&[1.0], &path, 0.01, 3).unwrap();
        assert_eq!(model.autocorr(), &[1.0, 0.0, 0.0]);
        assert_eq!(model.crosscorr(), &path.taps()[..3]);
    }

    #[test]
    fn analytic_two_tap_boxcar() {
        let path = EchoPath::new(vec![1.0]).unwrap();
        let model = analytic_correlations(&[1.0, 1.0], &path, 0.0, 4).unwrap();
        assert_eq!(model.autocorr(), &[2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn analytic_matches_monte_carlo_estimate() {
        let n = 256;
        let t = 1_000_000;
        let lowpass = design_coloring_filter(ColoringFilter::Lowpass4);
        let highpass = design_coloring_filter(ColoringFilter::Highpass512);
        let path = EchoPath::new(highpass).unwrap();

        let white = gen_white_noise(&mut seeded_rng(24), t, 1.0).unwrap();
        let x = fir_filter(&white, &lowpass).unwrap();
        let echo = fir_filter(&x, path.taps()).unwrap();
        let (y, _, noise_var) = mix_at_snr(&echo, &mut seeded_rng(25), 20.0).unwrap();

        let analytic = analytic_correlations(&lowpass, &path, noise_var, n).unwrap();
        let estimated = estimate_correlations(&x, &y, n).unwrap();

        let r_scale = analytic.autocorr()[0];
        for (a, e) in analytic.autocorr().iter().zip(estimated.autocorr()) {
            assert!((a - e).abs() < 0.01 * r_scale, "autocorr {a} vs {e}");
        }
        let p_scale = analytic
            .crosscorr()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (a, e) in analytic.crosscorr().iter().zip(estimated.crosscorr()) {
            assert!((a - e).abs() < 0.01 * p_scale, "crosscorr {a} vs {e}");
        }
    }

    #[test]
    fn white_reference_truncates_long_path() {
        let n = 8;
        let true_taps = gen_white_noise(&mut seeded_rng(26), 20, 1.0).unwrap();
        let path = EchoPath::new(true_taps.clone()).unwrap();
        let model = analytic_correlations(&[1.0], &path, 0.0, n).unwrap();
        let w = solve_wiener(&model).unwrap();
        for i in 0..n {
            assert!((w[i] - true_taps[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_system() {
        let model = CorrelationModel::new(vec![4.0], vec![2.0]).unwrap();
        assert_eq!(solve_wiener(&model).unwrap(), vec![0.5]);
    }

    #[test]
    fn levinson_matches_dense_solve() {
        // diagonally dominant random Toeplitz is safely positive definite
        let n = 8;
        let mut r = gen_white_noise(&mut seeded_rng(27), n, 1.0).unwrap();
        r[0] = r.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
        let p = gen_white_noise(&mut seeded_rng(28), n, 1.0).unwrap();

        let model = CorrelationModel::new(r.clone(), p.clone()).unwrap();
        let fast = solve_wiener(&model).unwrap();
        let dense = gauss_solve(&toeplitz(&r), &p);
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(relative_residual(&r, &p, &fast) < 1e-8);
    }

    #[test]
    fn sufficient_length_recovers_path_exactly() {
        let n = 16;
        let true_taps = gen_white_noise(&mut seeded_rng(29), 10, 1.0).unwrap();
        let path = EchoPath::new(true_taps.clone()).unwrap();
        let coloring = design_coloring_filter(ColoringFilter::Lowpass4);
        let model = analytic_correlations(&coloring, &path, 0.0, n).unwrap();
        let w = solve_wiener(&model).unwrap();
        for i in 0..n {
            let expect = true_taps.get(i).copied().unwrap_or(0.0);
            assert!((w[i] - expect).abs() < 1e-8, "tap {i}: {} vs {expect}", w[i]);
        }
    }

    #[test]
    fn solution_is_mse_optimal_against_perturbations() {
        // deficient length (26-tap path, 24-tap solution) over a record
        // long enough that the realized optimum sits well inside the 1%
        // perturbation radius
        let n = 24;
        let true_taps = gen_white_noise(&mut seeded_rng(30), 26, 1.0).unwrap();
        let path = EchoPath::new(true_taps).unwrap();
        let model = analytic_correlations(&[1.0], &path, 0.0, n).unwrap();
        let w = solve_wiener(&model).unwrap();

        // held-out realization
        let t = 300_000;
        let x = gen_white_noise(&mut seeded_rng(31), t, 1.0).unwrap();
        let echo = fir_filter(&x, path.taps()).unwrap();
        let (y, _, _) = mix_at_snr(&echo, &mut seeded_rng(32), 30.0).unwrap();

        let residual_power = |taps: &[f64]| -> f64 {
            let est = fir_filter(&x, taps).unwrap();
            y.iter()
                .zip(&est)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / t as f64
        };

        let base = residual_power(&w);
        let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut rng = seeded_rng(33);
        for _ in 0..100 {
            let delta = gen_white_noise(&mut rng, n, 1.0).unwrap();
            let d_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = 0.01 * w_norm / d_norm;
            let perturbed: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| a + d * scale).collect();
            assert!(residual_power(&perturbed) >= base);
        }
    }
}
