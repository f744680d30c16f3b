//! End-to-end identification behavior of the four algorithms: reaching
//! the true path under sufficient length, and the split between the
//! standard and modified updates under deficient length.

use pfkf::adaptive::{
    flat_noise_psd, AdaptiveFilter, Fblms, FblmsParams, Fkf, KalmanParams, KalmanVariant,
    PartitionedKalman,
};
use pfkf::metrics::{misalignment_db, steady_state_value, MisalignmentTrace};
use pfkf::signals::{
    design_coloring_filter, fir_filter, gen_white_noise, mix_at_snr, seeded_rng, ColoringFilter,
    EchoPath,
};
use pfkf::spectral::FrameGeometry;
use pfkf::wiener::{analytic_correlations, solve_wiener};

/// Drive a filter over a scene in blocks of its own frame shift and
/// return the final misalignment against `w_ref`.
fn run_filter(
    filter: &mut dyn AdaptiveFilter,
    x: &[f64],
    y: &[f64],
    w_ref: &[f64],
) -> MisalignmentTrace {
    let shift = filter.frame_shift();
    let frames = x.len() / shift;
    let mut trace = MisalignmentTrace::new("test", Some(0), shift);
    for k in 0..frames {
        filter
            .step(&x[k * shift..(k + 1) * shift], &y[k * shift..(k + 1) * shift])
            .unwrap();
        trace
            .values_db
            .push(misalignment_db(&filter.time_weights(), w_ref).unwrap());
    }
    trace
}

#[test]
fn sufficient_length_filters_identify_the_true_path() {
    let n = 32;
    let frames = 2000;
    let geom = FrameGeometry::new(n, 2).unwrap();
    let l = geom.block_len();

    let mut rng = seeded_rng(400);
    let true_path = gen_white_noise(&mut rng, 16, 1.0).unwrap();
    let x = gen_white_noise(&mut rng, frames * l, 1.0).unwrap();
    let echo = fir_filter(&x, &true_path).unwrap();
    let (y, _, noise_var) = mix_at_snr(&echo, &mut rng, 30.0).unwrap();

    let mut w_ref = true_path.clone();
    w_ref.resize(n, 0.0);

    let mut pfkf = PartitionedKalman::new(
        geom,
        KalmanVariant::Pfkf,
        KalmanParams::new(1.0, flat_noise_psd(noise_var, geom.fft_len())),
    )
    .unwrap();
    let trace = run_filter(&mut pfkf, &x, &y, &w_ref);
    let steady = steady_state_value(&trace, 0.1).unwrap();
    assert!(steady < -20.0, "PFKF steady state {steady:.1} dB");

    let mut mpfkf = PartitionedKalman::new(
        geom,
        KalmanVariant::Mpfkf,
        KalmanParams::new(1.0, flat_noise_psd(noise_var, geom.fft_len())),
    )
    .unwrap();
    let trace = run_filter(&mut mpfkf, &x, &y, &w_ref);
    let steady = steady_state_value(&trace, 0.1).unwrap();
    assert!(steady < -20.0, "MPFKF steady state {steady:.1} dB");

    let mut fkf = Fkf::new(n, KalmanParams::new(1.0, flat_noise_psd(noise_var, 2 * n))).unwrap();
    let trace = run_filter(&mut fkf, &x, &y, &w_ref);
    let steady = steady_state_value(&trace, 0.1).unwrap();
    assert!(steady < -20.0, "FKF steady state {steady:.1} dB");
}

#[test]
fn deficient_length_splits_standard_and_modified_updates() {
    // colored reference through a long highpass echo path, adaptive
    // length 256 against 512 true taps; single trial
    let n = 256;
    let partitions = 4;
    let frames = 4000;
    let geom = FrameGeometry::new(n, partitions).unwrap();
    let l = geom.block_len();

    let lowpass = design_coloring_filter(ColoringFilter::Lowpass4);
    let highpass = design_coloring_filter(ColoringFilter::Highpass512);
    let path = EchoPath::new(highpass).unwrap();

    let mut rng = seeded_rng(500);
    let white = gen_white_noise(&mut rng, frames * l, 1.0).unwrap();
    let x = fir_filter(&white, &lowpass).unwrap();
    let echo = fir_filter(&x, path.taps()).unwrap();
    let (y, _, noise_var) = mix_at_snr(&echo, &mut rng, 20.0).unwrap();

    let wiener = solve_wiener(&analytic_correlations(&lowpass, &path, noise_var, n).unwrap()).unwrap();

    let mut mpfkf = PartitionedKalman::new(
        geom,
        KalmanVariant::Mpfkf,
        KalmanParams::new(1.0, flat_noise_psd(noise_var, geom.fft_len())),
    )
    .unwrap();
    let mpfkf_steady =
        steady_state_value(&run_filter(&mut mpfkf, &x, &y, &wiener), 0.1).unwrap();

    let mut pfkf = PartitionedKalman::new(
        geom,
        KalmanVariant::Pfkf,
        KalmanParams::new(1.0, flat_noise_psd(noise_var, geom.fft_len())),
    )
    .unwrap();
    let pfkf_steady = steady_state_value(&run_filter(&mut pfkf, &x, &y, &wiener), 0.1).unwrap();

    let mut fblms = Fblms::new(FrameGeometry::full_band(n).unwrap(), FblmsParams::default()).unwrap();
    let fblms_steady = steady_state_value(&run_filter(&mut fblms, &x, &y, &wiener), 0.1).unwrap();

    println!(
        "steady state vs Wiener: mpfkf {mpfkf_steady:.1} dB, pfkf {pfkf_steady:.1} dB, fblms {fblms_steady:.1} dB"
    );
    assert!(mpfkf_steady < -20.0, "MPFKF should reach the Wiener solution, got {mpfkf_steady:.1} dB");
    assert!(
        pfkf_steady >= mpfkf_steady + 10.0,
        "PFKF bias should cost at least 10 dB: {pfkf_steady:.1} vs {mpfkf_steady:.1}"
    );
    assert!(
        fblms_steady > mpfkf_steady,
        "FBLMS should deviate more than MPFKF: {fblms_steady:.1} vs {mpfkf_steady:.1}"
    );
}

/// Partition indexing: a unit tap in partition `b` delays the reference
/// by `bL` samples, which is the sliding-window structure the
/// partitioned reference blocks implement.
#[test]
fn partition_taps_implement_block_delays() {
    let n = 16;
    let geom = FrameGeometry::new(n, 2).unwrap();
    let l = geom.block_len();
    let x = gen_white_noise(&mut seeded_rng(600), l * 6, 1.0).unwrap();

    for (tap, delay) in [(0usize, 0usize), (1, 1), (l, l), (l + 2, l + 2)] {
        let mut filter = PartitionedKalman::new(
            geom,
            KalmanVariant::Pfkf,
            KalmanParams::new(1.0, flat_noise_psd(1.0, geom.fft_len())),
        )
        .unwrap();
        let mut taps = vec![0.0; n];
        taps[tap] = 1.0;
        filter.set_time_weights(&taps).unwrap();

        // feed zeros as microphone; the echo estimate must be x delayed
        let mut estimates = Vec::new();
        for k in 0..6 {
            let out = filter.step(&x[k * l..(k + 1) * l], &vec![0.0; l]).unwrap();
            estimates.extend(out.echo_estimate);
            // freeze adaptation effects by reloading the taps
            filter.set_time_weights(&taps).unwrap();
        }
        for t in 0..estimates.len() {
            let expect = if t >= delay { x[t - delay] } else { 0.0 };
            assert!(
                (estimates[t] - expect).abs() < 1e-10,
                "tap {tap}: sample {t} got {} want {expect}",
                estimates[t]
            );
        }
    }
}
