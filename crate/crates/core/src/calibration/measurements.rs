//! Measurement CSV files:
//! `experiment,n,pods,containers,repetition,metric,value,unit`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CalibrationError, Result};

pub const HEADER: [&str; 8] = ["experiment", "n", "pods", "containers", "repetition", "metric", "value", "unit"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DeployTimeS,
    TotalTimeS,
    ExecTimeS,
    BandwidthGb,
    StopTimeS,
}

impl Metric {
    pub fn is_time(self) -> bool {
        self != Metric::BandwidthGb
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::DeployTimeS => "deploy_time_s",
            Metric::TotalTimeS => "total_time_s",
            Metric::ExecTimeS => "exec_time_s",
            Metric::BandwidthGb => "bandwidth_gb",
            Metric::StopTimeS => "stop_time_s",
        }
    }

    fn canonical_unit(self) -> &'static str {
        if self.is_time() {
            "s"
        } else {
            "GB"
        }
    }

    /// Factor that converts `unit` into the metric's canonical unit.
    fn scale(self, unit: &str) -> Option<f64> {
        let u = unit.trim();
        if self.is_time() {
            match u.to_ascii_lowercase().as_str() {
                "" | "s" | "sec" | "secs" | "second" | "seconds" => Some(1.0),
                "ms" => Some(1e-3),
                "min" | "minutes" => Some(60.0),
                _ => None,
            }
        } else {
            match u {
                "" | "GB" | "gb" => Some(1.0),
                "MB" | "mb" => Some(1.0 / 1024.0),
                "KB" | "kb" => Some(1.0 / (1024.0 * 1024.0)),
                _ => None,
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of a measurement file, with `value` in seconds or GB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub experiment: String,
    pub n: u32,
    pub pods: u32,
    pub containers: u32,
    pub repetition: u32,
    pub metric: Metric,
    pub value: f64,
    pub unit: String,
}

impl MeasurementSample {
    pub fn rho(&self) -> f64 {
        self.pods as f64 / self.containers as f64
    }
}

pub fn load_measurements<R: Read>(source: R) -> Result<Vec<MeasurementSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = rdr.headers().map_err(|e| CalibrationError::Schema(e.to_string()))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(CalibrationError::Schema(format!(
            "header must be `{}`, got `{}`",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<MeasurementSample>().enumerate() {
        let line = i + 2;
        let mut s = row.map_err(|e| CalibrationError::Schema(format!("line {line}: {e}")))?;
        let bad = |reason: String| CalibrationError::NegativeValue { line, reason };
        if !(s.value >= 0.0 && s.value.is_finite()) {
            return Err(bad(format!("value must be finite and >= 0, got {}", s.value)));
        }
        if s.n == 0 || s.pods == 0 || s.containers == 0 {
            return Err(bad("n, pods and containers must be >= 1".into()));
        }
        if s.pods > s.containers {
            return Err(bad(format!("{} pods for {} containers", s.pods, s.containers)));
        }
        let scale = s
            .metric
            .scale(&s.unit)
            .ok_or_else(|| CalibrationError::Schema(format!("line {line}: unit `{}` does not fit {}", s.unit, s.metric)))?;
        s.value *= scale;
        s.unit = s.metric.canonical_unit().to_owned();
        out.push(s);
    }
    Ok(out)
}

pub fn load_measurements_path(path: impl AsRef<Path>) -> Result<Vec<MeasurementSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| CalibrationError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    load_measurements(file)
}

pub fn write_measurements<W: Write>(samples: &[MeasurementSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s).map_err(|e| CalibrationError::Schema(e.to_string()))?;
    }
    if samples.is_empty() {
        w.write_record(HEADER).map_err(|e| CalibrationError::Schema(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
