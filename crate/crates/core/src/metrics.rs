//! Normalized misalignment and trace aggregation.

use crate::error::{Error, Result};

/// Traces are clamped here so an exact match stays finite in CSV output.
pub const MISALIGNMENT_FLOOR_DB: f64 = -300.0;

/// Normalized misalignment in dB:
/// `10 log10(||w_hat - w_ref||^2 / ||w_ref||^2)`, clamped at -300 dB.
/// The normalization uses the reference only, so the arguments are not
/// interchangeable.
pub fn misalignment_db(w_hat: &[f64], w_ref: &[f64]) -> Result<f64> {
    if w_hat.len() != w_ref.len() {
        return Err(Error::Dimension(format!(
            "weight vectors differ in length: {} vs {}",
            w_hat.len(),
            w_ref.len()
        )));
    }
    let ref_energy: f64 = w_ref.iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(Error::Parameter("reference weights have zero norm".into()));
    }
    let err_energy: f64 = w_hat
        .iter()
        .zip(w_ref)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((10.0 * (err_energy / ref_energy).log10()).max(MISALIGNMENT_FLOOR_DB))
}

/// Per-frame misalignment of one algorithm over one trial (or the
/// average of several trials, in which case `trial` is `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct MisalignmentTrace {
    pub algorithm: String,
    pub trial: Option<u32>,
    /// Samples consumed per trace entry.
    pub frame_shift: usize,
    pub values_db: Vec<f64>,
}

impl MisalignmentTrace {
    pub fn new(algorithm: impl Into<String>, trial: Option<u32>, frame_shift: usize) -> Self {
        Self {
            algorithm: algorithm.into(),
            trial,
            frame_shift,
            values_db: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }
}

/// Per-frame arithmetic mean of the dB values across trials. All traces
/// must have the same label and length.
pub fn average_traces(traces: &[MisalignmentTrace]) -> Result<MisalignmentTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Parameter("no traces to average".into()))?;
    for t in traces {
        if t.len() != first.len() {
            return Err(Error::Parameter(format!(
                "trace lengths differ: {} vs {}",
                t.len(),
                first.len()
            )));
        }
        if t.algorithm != first.algorithm {
            return Err(Error::Parameter(format!(
                "cannot average traces of different algorithms: {} vs {}",
                t.algorithm, first.algorithm
            )));
        }
    }
    let mut mean = MisalignmentTrace::new(first.algorithm.clone(), None, first.frame_shift);
    mean.values_db = (0..first.len())
        .map(|i| traces.iter().map(|t| t.values_db[i]).sum::<f64>() / traces.len() as f64)
        .collect();
    Ok(mean)
}

/// Mean of the final `ceil(fraction * len)` trace values — the
/// steady-state level read off the tail of a convergence curve.
pub fn steady_state_value(trace: &MisalignmentTrace, fraction: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Parameter("empty trace".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!("fraction {fraction} not in (0, 1]")));
    }
    let count = ((fraction * trace.len() as f64).ceil() as usize).clamp(1, trace.len());
    let tail = &trace.values_db[trace.len() - count..];
    Ok(tail.iter().sum::<f64>() / count as f64)
}
