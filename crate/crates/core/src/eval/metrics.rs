use std::time::Duration;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{EvalError, ResultCode};

/// Share of RES3 and RES5 codes, in percent.
pub fn accuracy(codes: &[ResultCode]) -> Result<f64, EvalError> {
    if codes.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let correct = codes.iter().filter(|c| c.is_correct()).count();
    Ok(100.0 * correct as f64 / codes.len() as f64)
}

/// Nearest-rank percentiles: the value at sorted position `ceil(p/100 · n)`.
pub fn latency_percentiles(durations: &[Duration], ranks: &[f64]) -> Result<Vec<(f64, Duration)>, EvalError> {
    if durations.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut sorted = durations.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    ranks
        .iter()
        .map(|&p| {
            if !(p > 0.0 && p <= 100.0) {
                return Err(EvalError::InvalidRank(p));
            }
            let position = ((p / 100.0) * n as f64).ceil() as usize;
            Ok((p, sorted[position.clamp(1, n) - 1]))
        })
        .collect()
}

/// Judge-versus-human agreement, in percent rounded to two decimals.
/// `None` marks a ratio whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn alignment_metrics(tp: u64, fp: u64, fn_: u64, tn: u64) -> Result<AlignmentMetrics, EvalError> {
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(AlignmentMetrics {
        accuracy: ratio(tp + tn, total).map(|v| round2(100.0 * v)),
        precision: precision.map(|v| round2(100.0 * v)),
        recall: recall.map(|v| round2(100.0 * v)),
        f1: f1.map(|v| round2(100.0 * v)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    /// Half-width of the two-sided interval.
    pub margin: f64,
    pub t_critical: f64,
    pub sample_sd: f64,
    pub trials: usize,
    pub level: f64,
}

/// Two-sided Student t critical value.
pub fn t_critical(level: f64, df: f64) -> Result<f64, EvalError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    let t = StudentsT::new(0.0, 1.0, df).map_err(|_| EvalError::TooFewTrials(df as usize + 1))?;
    Ok(t.inverse_cdf(0.5 + level / 2.0))
}

/// Mean ± t(level, n−1) · s / √n.
pub fn confidence_interval(trials: &[f64], level: f64) -> Result<ConfidenceInterval, EvalError> {
    let n = trials.len();
    if n < 2 {
        return Err(EvalError::TooFewTrials(n));
    }
    let mean = trials.iter().sum::<f64>() / n as f64;
    let var = trials.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = t_critical(level, (n - 1) as f64)?;
    Ok(ConfidenceInterval {
        mean,
        margin: t * sd / (n as f64).sqrt(),
        t_critical: t,
        sample_sd: sd,
        trials: n,
        level,
    })
}
