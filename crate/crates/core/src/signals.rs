//! Deterministic test-signal generation and WAV ingestion.
//!
//! Every generator is a pure function of an explicit RNG (or of fixed
//! constants), so a scene is reproduced bit-exactly from its seed. The
//! RNG is ChaCha8, which is seedable from a 64-bit value, portable
//! across platforms and supports independent substreams via
//! [`rand_chacha::ChaCha8Rng::set_stream`]; trial `t` of a run seeded
//! with `base` uses `trial_seed(base, t)`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};

/// The generator used throughout; one instance per trial and substream.
pub type TrialRng = ChaCha8Rng;

/// Construct the trial generator for a seed.
pub fn seeded_rng(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}

/// Per-trial seed derivation: `base_seed + trial_index` (wrapping).
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    base_seed.wrapping_add(trial)
}

/// A loudspeaker-to-microphone impulse response. Its length may exceed
/// the adaptive filter length, which is the under-modeling case the
/// modified Kalman update is built for.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoPath {
    taps: Vec<f64>,
}

impl EchoPath {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Parameter("echo path must have at least one tap".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("echo path taps must be finite".into()));
        }
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// One synthesized experiment scene: reference stream, microphone stream
/// built as `y = w0 * x + s`, the noise stream itself and its variance
/// (needed to construct the observation-noise PSD).
#[derive(Debug, Clone)]
pub struct Scene {
    pub reference: Vec<f64>,
    pub microphone: Vec<f64>,
    pub noise: Vec<f64>,
    pub noise_variance: f64,
}

impl Scene {
    /// Convolve the reference with the echo path and add white noise at
    /// the requested SNR.
    pub fn synthesize(
        reference: Vec<f64>,
        path: &EchoPath,
        rng: &mut TrialRng,
        snr_db: f64,
    ) -> Result<Self> {
        let echo = fir_filter(&reference, path.taps())?;
        let (microphone, noise, noise_variance) = mix_at_snr(&echo, rng, snr_db)?;
        Ok(Self {
            reference,
            microphone,
            noise,
            noise_variance,
        })
    }
}

/// i.i.d. Gaussian samples with the given variance.
pub fn gen_white_noise(rng: &mut TrialRng, n: usize, variance: f64) -> Result<Vec<f64>> {
    if !(variance >= 0.0) {
        return Err(Error::Parameter(format!("variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let dist = Normal::new(0.0, variance.sqrt())
        .map_err(|e| Error::Parameter(format!("bad normal parameters: {e}")))?;
    Ok((0..n).map(|_| rng.sample(dist)).collect())
}

/// Direct-form FIR filtering with zero initial history:
/// `y[n] = sum_j h[j] x[n - j]`.
pub fn fir_filter(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if h.is_empty() {
        return Err(Error::Parameter("FIR filter needs at least one tap".into()));
    }
    let mut y = vec![0.0; x.len()];
    for (n, out) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &hj) in h.iter().enumerate().take(n + 1) {
            acc += hj * x[n - j];
        }
        *out = acc;
    }
    Ok(y)
}

/// Add white Gaussian noise scaled so the measured echo-to-noise ratio
/// over the full record equals `snr_db` exactly. Returns the microphone
/// stream, the noise stream and the realized noise variance.
///
/// `snr_db = f64::INFINITY` is the noise-free sentinel.
pub fn mix_at_snr(
    echo: &[f64],
    rng: &mut TrialRng,
    snr_db: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let echo_power = mean_power(echo);
    if echo_power <= 0.0 {
        return Err(Error::Parameter("echo stream has zero power".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok((echo.to_vec(), vec![0.0; echo.len()], 0.0));
    }
    let target_power = echo_power / 10f64.powf(snr_db / 10.0);
    let raw = gen_white_noise(rng, echo.len(), 1.0)?;
    let raw_power = mean_power(&raw);
    if raw_power <= 0.0 {
        return Err(Error::Parameter("degenerate noise draw".into()));
    }
    let scale = (target_power / raw_power).sqrt();
    let noise: Vec<f64> = raw.iter().map(|s| s * scale).collect();
    let microphone: Vec<f64> = echo.iter().zip(&noise).map(|(e, s)| e + s).collect();
    Ok((microphone, noise, target_power))
}

fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

/// The two fixed coloring filters used by the synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColoringFilter {
    /// 4-tap lowpass with unit DC gain. The taps are asymmetric on
    /// purpose: a symmetric even-length filter has an exact null at
    /// Nyquist (and a moving average adds more on the circle), which
    /// leaves weight-space directions with no excitation at all and
    /// makes the deficient-length Wiener reference unreachable. These
    /// taps keep `|H|` >= 0.2 everywhere.
    Lowpass4,
    /// 512-tap Hamming-windowed-sinc highpass, cutoff at half Nyquist.
    Highpass512,
}

/// Coefficients of one of the pinned coloring filters.
pub fn design_coloring_filter(kind: ColoringFilter) -> Vec<f64> {
    match kind {
        ColoringFilter::Lowpass4 => vec![0.4, 0.3, 0.2, 0.1],
        ColoringFilter::Highpass512 => {
            // Windowed-sinc lowpass at fc = 0.25 cycles/sample, then
            // spectral reversal. The reversed filter is antisymmetric
            // (type IV), so its DC gain is exactly zero.
            let taps = 512usize;
            let fc = 0.25;
            let center = (taps - 1) as f64 / 2.0;
            (0..taps)
                .map(|n| {
                    let t = n as f64 - center;
                    let lp = 2.0 * fc * sinc(2.0 * fc * t) * hamming(n, taps);
                    if n % 2 == 0 {
                        lp
                    } else {
                        -lp
                    }
                })
                .collect()
        }
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let p = std::f64::consts::PI * t;
        p.sin() / p
    }
}

fn hamming(n: usize, len: usize) -> f64 {
    0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos()
}

/// Synthetic room impulse response: white Gaussian noise under an
/// exponential envelope that decays 60 dB over `rt60_s`, truncated to
/// `n_taps` and peak-normalized.
pub fn gen_synthetic_rir(
    rng: &mut TrialRng,
    n_taps: usize,
    rt60_s: f64,
    fs_hz: f64,
) -> Result<EchoPath> {
    if n_taps == 0 || !(rt60_s > 0.0) || !(fs_hz > 0.0) {
        return Err(Error::Parameter(
            "RIR needs positive tap count, RT60 and sample rate".into(),
        ));
    }
    let decay = 3.0 * std::f64::consts::LN_10 / (rt60_s * fs_hz);
    let noise = gen_white_noise(rng, n_taps, 1.0)?;
    let mut taps: Vec<f64> = noise
        .iter()
        .enumerate()
        .map(|(i, g)| g * (-decay * i as f64).exp())
        .collect();
    let peak = taps.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    if peak > 0.0 {
        for t in &mut taps {
            *t /= peak;
        }
    }
    EchoPath::new(taps)
}

// Fixed speech-tilt shaping kernel (unit energy) for the bundled
// reference generator, so the AEC scene runs without external assets.
const SPEECH_SHAPING: [f64; 8] = [1.0, 0.72, 0.52, 0.36, 0.24, 0.16, 0.10, 0.06];

/// Speech-shaped noise: white Gaussian noise through the fixed 8-tap
/// shaping FIR above, scaled to unit-energy taps.
pub fn gen_speech_shaped_noise(rng: &mut TrialRng, n: usize) -> Result<Vec<f64>> {
    let energy: f64 = SPEECH_SHAPING.iter().map(|h| h * h).sum();
    let scale = energy.sqrt().recip();
    let taps: Vec<f64> = SPEECH_SHAPING.iter().map(|h| h * scale).collect();
    let white = gen_white_noise(rng, n, 1.0)?;
    fir_filter(&white, &taps)
}

/// Read a mono PCM16 or 32-bit-float WAV file. Samples are normalized to
/// `[-1, 1]` (PCM16 divides by 32768).
pub fn load_wav<P: AsRef<Path>>(path: P) -> Result<(Vec<f64>, u32)> {
    let mut reader = hound::WavReader::open(&path)
        .map_err(|e| Error::Format(format!("cannot open WAV: {e}")))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!(
            "only mono WAV is supported, file has {} channels",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("bad WAV data: {e}")))?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("bad WAV data: {e}")))?,
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "unsupported WAV codec: {bits}-bit {fmt:?} (PCM16 and float32 only)"
            )))
        }
    };
    Ok((samples, spec.sample_rate))
}

/// Write a mono 32-bit-float WAV file.
pub fn write_wav<P: AsRef<Path>>(path: P, samples: &[f64], fs_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(&path, spec)
        .map_err(|e| Error::Format(format!("cannot create WAV: {e}")))?;
    for &s in samples {
        writer
            .write_sample(s as f32)
            .map_err(|e| Error::Format(format!("WAV write failed: {e}")))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Format(format!("WAV finalize failed: {e}")))?;
    Ok(())
}

/// Write a mono 16-bit PCM WAV file. Uses the same 32768 scale as
/// [`load_wav`], so a round trip is exact to within one LSB.
pub fn write_wav_pcm16<P: AsRef<Path>>(path: P, samples: &[f64], fs_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(&path, spec)
        .map_err(|e| Error::Format(format!("cannot create WAV: {e}")))?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::Format(format!("WAV write failed: {e}")))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Format(format!("WAV finalize failed: {e}")))?;
    Ok(())
}
