use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::tape::Mat;

/// Denominator floor for the relative error, so that coordinates whose true
/// gradient is zero are judged by absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_relative_error: f64,
    /// (tensor, flat index, analytic, numeric) of the worst probe.
    pub worst: (usize, usize, f64, f64),
}

/// Compares `analytic` against central differences of `loss` at
/// `probe_count` coordinates drawn uniformly without replacement.
/// Relative error is `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn grad_check<F>(
    params: &[Mat],
    analytic: &[Mat],
    probe_count: usize,
    step: f64,
    seed: u64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Mat]) -> Result<f64>,
{
    if analytic.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), found: analytic.len() });
    }
    for (p, a) in params.iter().zip(analytic) {
        if p.dim() != a.dim() {
            return Err(Error::invalid("analytic gradient shape differs from its parameter"));
        }
    }
    let total: usize = params.iter().map(Mat::len).sum();
    if probe_count == 0 || total == 0 {
        return Err(Error::NothingToProbe);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, total, probe_count.min(total)).into_vec();
    picks.sort_unstable();

    let mut work: Vec<Mat> = params.to_vec();
    let mut report = GradCheckReport { probes: picks.len(), max_relative_error: 0.0, worst: (0, 0, 0.0, 0.0) };
    let (mut tensor, mut base) = (0, 0);
    for flat in picks {
        while flat >= base + params[tensor].len() {
            base += params[tensor].len();
            tensor += 1;
        }
        let k = flat - base;
        let original = params[tensor].as_slice().expect("standard layout")[k];
        work[tensor].as_slice_mut().expect("standard layout")[k] = original + step;
        let plus = loss(&work)?;
        work[tensor].as_slice_mut().expect("standard layout")[k] = original - step;
        let minus = loss(&work)?;
        work[tensor].as_slice_mut().expect("standard layout")[k] = original;

        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[tensor].as_slice().expect("standard layout")[k];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        if err > report.max_relative_error || report.max_relative_error.is_nan() {
            report.max_relative_error = err;
            report.worst = (tensor, k, a, numeric);
        }
    }
    Ok(report)
}
