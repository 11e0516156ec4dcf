use serde::{Deserialize, Serialize};

use crate::scalar::{distance, l2_norm, Scalar};

/// Offset added to errors before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// `||x - x_ref|| / ||x_ref||`.
pub fn relative_error<T: Scalar>(x: &[T], x_ref: &[T]) -> f64 {
    distance(x, x_ref) / l2_norm(x_ref)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogStats {
    /// Mean of `log10(e + LOG_FLOOR)`.
    pub log_mean: f64,
    /// Sample standard deviation of the same; 0 for a single value.
    pub log_std: f64,
    pub n: usize,
    /// False when there were fewer than two values.
    pub std_defined: bool,
}

pub fn log_stats(errors: &[f64]) -> LogStats {
    let n = errors.len();
    let logs: Vec<f64> = errors.iter().map(|e| (e + LOG_FLOOR).log10()).collect();
    let log_mean = logs.iter().sum::<f64>() / n as f64;
    let std_defined = n >= 2;
    let log_std = if std_defined {
        (logs.iter().map(|l| (l - log_mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    LogStats {
        log_mean,
        log_std,
        n,
        std_defined,
    }
}

/// Quantile of sorted data by linear interpolation between closest ranks.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values beyond 1.5 interquartile ranges from the box.
    pub outliers: Vec<f64>,
}

impl BoxplotSummary {
    pub fn new(values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q1 = quantile(&s, 0.25);
        let q3 = quantile(&s, 0.75);
        let iqr = q3 - q1;
        Self {
            min: s[0],
            q1,
            median: quantile(&s, 0.5),
            q3,
            max: s[s.len() - 1],
            outliers: s
                .iter()
                .copied()
                .filter(|&v| v < q1 - 1.5 * iqr || v > q3 + 1.5 * iqr)
                .collect(),
        }
    }
}
