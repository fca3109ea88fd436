//! Summary statistics, pooled t-tests, the deployment-time formulas and
//! calibration tables built from measurements.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

mod measurements;
mod table;

pub use measurements::{load_measurements, load_measurements_path, write_measurements, MeasurementSample, Metric, HEADER};
pub use table::{calibrate, Calibration, CalibrationTable, OverheadFactor, OverheadPoint, TcEntry};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: {reason}")]
    NegativeValue { line: usize, reason: String },
    #[error("unit mismatch: {0}")]
    UnitMismatch(String),
    #[error("calibration table is empty")]
    EmptyTable,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CalibrationError> = std::result::Result<T, E>;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (divisor N-1).
    pub std: f64,
    pub count: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Significance level of the interval.
    pub alpha: f64,
}

impl SummaryStats {
    /// Stats from published moments, with the interval recomputed.
    pub fn from_moments(mean: f64, std: f64, count: usize, alpha: f64) -> Result<Self> {
        if count < 2 {
            return Err(CalibrationError::InsufficientData { needed: 2, got: count });
        }
        check_alpha(alpha)?;
        let half = z_quantile(alpha) * std / (count as f64).sqrt();
        Ok(SummaryStats { mean, std, count, ci_low: mean - half, ci_high: mean + half, alpha })
    }

    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CalibrationError::Invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Two-sided standard normal quantile `z_{1 - alpha/2}`.
pub fn z_quantile(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Two-sided Student t quantile `t_{1 - alpha/2, df}`.
pub fn t_quantile(alpha: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(1.0 - alpha / 2.0)
}

/// Mean, sample standard deviation and a normal-approximation confidence
/// interval at level `1 - alpha`.
pub fn summarize(values: &[f64], alpha: f64) -> Result<SummaryStats> {
    let n = values.len();
    if n < 2 {
        return Err(CalibrationError::InsufficientData { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    SummaryStats::from_moments(mean, var.sqrt(), n, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestDecision {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    /// True when the means differ significantly.
    pub reject_h0: bool,
    pub alpha: f64,
}

/// Two-sample t-test assuming equal variances; H0 is equality of the means.
pub fn pooled_t_test(a: &SummaryStats, b: &SummaryStats, alpha: f64) -> Result<TTestDecision> {
    for s in [a, b] {
        if s.count < 2 {
            return Err(CalibrationError::InsufficientData { needed: 2, got: s.count });
        }
    }
    check_alpha(alpha)?;
    let (n1, n2) = (a.count as f64, b.count as f64);
    let df = a.count + b.count - 2;
    let pooled = ((n1 - 1.0) * a.std.powi(2) + (n2 - 1.0) * b.std.powi(2)) / df as f64;
    let se = pooled.sqrt() * (1.0 / n1 + 1.0 / n2).sqrt();
    let diff = a.mean - b.mean;
    let t = if diff == 0.0 { 0.0 } else { diff / se };
    let critical = t_quantile(alpha, df as f64);
    Ok(TTestDecision { t_statistic: t, degrees_of_freedom: df, critical_value: critical, reject_h0: t.abs() > critical, alpha })
}

/// Average bandwidth of one container given the summed bandwidth of `c`.
pub fn avg_bandwidth_per_container(total_bandwidth: f64, c: u64) -> f64 {
    total_bandwidth / c.max(1) as f64
}

/// Deployment time of `c` containers in `pods` pods on `n` machines when
/// one container takes `creation_s` to create.
pub fn predict_deploy_time(c: u64, pods: u64, n: u64, creation_s: f64) -> f64 {
    c as f64 * creation_s / pods.min(n) as f64
}

/// Per-container creation time implied by a measured deployment time.
pub fn creation_time_from_deploy(deploy_s: f64, c: u64, pods: u64, n: u64) -> f64 {
    deploy_s * pods.min(n) as f64 / c as f64
}

pub fn predict_total_time(deploy_s: f64, download_s: f64) -> f64 {
    deploy_s + download_s
}

/// A mean tagged with what it measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    pub metric: Metric,
    pub mean: f64,
}

impl MetricMean {
    pub fn new(metric: Metric, mean: f64) -> Self {
        MetricMean { metric, mean }
    }

    /// Time to move `volume` at this bandwidth, so that lower is better.
    pub fn as_transfer_time(self, volume: f64) -> Result<MetricMean> {
        if self.metric != Metric::BandwidthGb {
            return Err(CalibrationError::UnitMismatch(format!("{} is not a bandwidth", self.metric)));
        }
        if !(self.mean > 0.0) {
            return Err(CalibrationError::Invalid(format!("bandwidth must be > 0, got {}", self.mean)));
        }
        Ok(MetricMean { metric: Metric::ExecTimeS, mean: volume / self.mean })
    }
}

/// Execution-time overhead of a configuration against the one-container-per-pod
/// baseline. Values above 1 mean the configuration is slower.
pub fn overhead_alpha(evaluated: MetricMean, baseline: MetricMean) -> Result<f64> {
    if evaluated.metric != baseline.metric {
        return Err(CalibrationError::UnitMismatch(format!("{} vs {}", evaluated.metric, baseline.metric)));
    }
    if !evaluated.metric.is_time() {
        return Err(CalibrationError::UnitMismatch(format!(
            "{} is higher-is-better; convert it to a transfer time first",
            evaluated.metric
        )));
    }
    if !(evaluated.mean > 0.0 && baseline.mean > 0.0) {
        return Err(CalibrationError::Invalid("means must be > 0".into()));
    }
    Ok(evaluated.mean / baseline.mean)
}
