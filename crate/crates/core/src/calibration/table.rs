//! Creation-time grids and pod overhead factors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::measurements::{MeasurementSample, Metric};
use super::{creation_time_from_deploy, overhead_alpha, CalibrationError, MetricMean, Result};

const RHO_EPS: f64 = 1e-9;

/// Creation time of one container measured at one layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcEntry {
    pub rho: f64,
    pub n: u32,
    pub containers: u32,
    pub creation_s: f64,
}

/// Creation time as a function of (rho, n, C).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub entries: Vec<TcEntry>,
    /// Value for C beyond the grid: the mean over (rho, n) series of the
    /// entry with the largest C.
    pub asymptote_s: f64,
}

fn axis(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= RHO_EPS);
    v
}

/// Index of the lower bracket and the weight of the upper one.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let x = x.clamp(axis[0], axis[axis.len() - 1]);
    match axis.iter().rposition(|&a| a <= x + RHO_EPS) {
        Some(i) if i + 1 < axis.len() => {
            let w = (x - axis[i]) / (axis[i + 1] - axis[i]);
            (i, w.clamp(0.0, 1.0))
        }
        Some(i) => (i, 0.0),
        None => (0, 0.0),
    }
}

impl CalibrationTable {
    pub fn new(entries: Vec<TcEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(CalibrationError::EmptyTable);
        }
        if let Some(e) = entries.iter().find(|e| !(e.creation_s > 0.0 && e.creation_s.is_finite())) {
            return Err(CalibrationError::Invalid(format!("creation time must be > 0, got {}", e.creation_s)));
        }
        let mut largest: Vec<TcEntry> = Vec::new();
        for e in &entries {
            match largest.iter_mut().find(|l| (l.rho - e.rho).abs() <= RHO_EPS && l.n == e.n) {
                Some(l) if e.containers > l.containers => *l = *e,
                Some(_) => {}
                None => largest.push(*e),
            }
        }
        let asymptote_s = largest.iter().map(|e| e.creation_s).sum::<f64>() / largest.len() as f64;
        Ok(CalibrationTable { entries, asymptote_s })
    }

    pub fn max_containers(&self) -> u32 {
        self.entries.iter().map(|e| e.containers).max().unwrap_or(0)
    }

    fn lookup(&self, rho: f64, n: f64, c: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| (e.rho - rho).abs() <= RHO_EPS && e.n as f64 == n && e.containers as f64 == c)
            .map(|e| e.creation_s)
    }

    /// Multilinear interpolation over the grid. Coordinates outside the
    /// grid are clamped to it, except that a C beyond the largest measured
    /// C yields the asymptote. Grid corners without a measurement are left
    /// out and the remaining weights rescaled.
    pub fn creation_time(&self, rho: f64, n: u32, c: u32) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(CalibrationError::EmptyTable);
        }
        if c > self.max_containers() {
            return Ok(self.asymptote_s);
        }
        let rhos = axis(self.entries.iter().map(|e| e.rho).collect());
        let ns = axis(self.entries.iter().map(|e| e.n as f64).collect());
        let cs = axis(self.entries.iter().map(|e| e.containers as f64).collect());
        let brackets = [bracket(&rhos, rho), bracket(&ns, n as f64), bracket(&cs, c as f64)];
        let axes = [&rhos, &ns, &cs];
        let mut acc = 0.0;
        let mut weight = 0.0;
        for corner in 0..8u32 {
            let mut w = 1.0;
            let mut at = [0.0; 3];
            for d in 0..3 {
                let (i, t) = brackets[d];
                let upper = corner >> d & 1 == 1;
                if upper && i + 1 >= axes[d].len() {
                    w = 0.0;
                    break;
                }
                w *= if upper { t } else { 1.0 - t };
                at[d] = axes[d][i + upper as usize];
            }
            if w == 0.0 {
                continue;
            }
            if let Some(v) = self.lookup(at[0], at[1], at[2]) {
                acc += w * v;
                weight += w;
            }
        }
        if weight > 0.0 {
            return Ok(acc / weight);
        }
        // sparse grid: fall back to the nearest measurement
        let span = |a: &[f64]| (a[a.len() - 1] - a[0]).max(1.0);
        let (sr, sn, sc) = (span(&rhos), span(&ns), span(&cs));
        let dist = |e: &TcEntry| {
            ((e.rho - rho) / sr).powi(2) + ((e.n as f64 - n as f64) / sn).powi(2) + ((e.containers as f64 - c as f64) / sc).powi(2)
        };
        let nearest = self.entries.iter().min_by(|a, b| dist(a).total_cmp(&dist(b))).expect("non-empty");
        Ok(nearest.creation_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadPoint {
    pub rho: f64,
    pub alpha: f64,
}

/// Execution-time overhead as a function of rho, with no overhead at rho = 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadFactor {
    pub points: Vec<OverheadPoint>,
}

impl OverheadFactor {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pts: Vec<OverheadPoint> = Vec::new();
        for (rho, alpha) in points {
            if !(rho > 0.0 && rho <= 1.0) || !(alpha > 0.0 && alpha.is_finite()) {
                return Err(CalibrationError::Invalid(format!("overhead point ({rho}, {alpha})")));
            }
            if (rho - 1.0).abs() > RHO_EPS {
                pts.push(OverheadPoint { rho, alpha });
            }
        }
        pts.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        Ok(OverheadFactor { points: pts })
    }

    /// A single overhead value used for every rho below 1.
    pub fn constant(alpha: f64) -> Result<Self> {
        Self::new([(1e-9, alpha)])
    }

    /// Overhead at `rho`: exactly 1 at rho = 1, otherwise interpolated
    /// linearly between measured points and clamped to the outermost ones.
    /// `None` when nothing was measured.
    pub fn at(&self, rho: f64) -> Option<f64> {
        if (rho - 1.0).abs() <= RHO_EPS {
            return Some(1.0);
        }
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts[pts.len() - 1];
        if rho <= first.rho {
            return Some(first.alpha);
        }
        if rho >= last.rho {
            return Some(last.alpha);
        }
        let i = pts.iter().rposition(|p| p.rho <= rho).expect("inside the range");
        let (a, b) = (pts[i], pts[i + 1]);
        Some(a.alpha + (b.alpha - a.alpha) * (rho - a.rho) / (b.rho - a.rho))
    }
}

/// Everything that can be estimated from a set of measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub table: Option<CalibrationTable>,
    pub overhead: OverheadFactor,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Builds the creation-time grid from `deploy_time_s` rows and the overhead
/// factor from `exec_time_s` and `bandwidth_gb` rows, each grouped by layout
/// and compared against the one-container-per-pod layout with the same n and C.
pub fn calibrate(samples: &[MeasurementSample]) -> Result<Calibration> {
    type Layout = (u32, u32, u32);
    let mut groups: BTreeMap<(Metric, Layout), Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups.entry((s.metric, (s.n, s.pods, s.containers))).or_default().push(s.value);
    }

    let mut entries = Vec::new();
    for ((metric, (n, pods, c)), values) in &groups {
        if *metric != Metric::DeployTimeS {
            continue;
        }
        let creation_s = creation_time_from_deploy(mean(values), *c as u64, *pods as u64, *n as u64);
        entries.push(TcEntry { rho: *pods as f64 / *c as f64, n: *n, containers: *c, creation_s });
    }

    let mut alphas: Vec<(f64, Vec<f64>)> = Vec::new();
    for ((metric, (n, pods, c)), values) in &groups {
        if !matches!(metric, Metric::ExecTimeS | Metric::BandwidthGb) || pods == c {
            continue;
        }
        let Some(base) = groups.get(&(*metric, (*n, *c, *c))) else { continue };
        let (mut eval, mut base) = (MetricMean::new(*metric, mean(values)), MetricMean::new(*metric, mean(base)));
        if *metric == Metric::BandwidthGb {
            eval = eval.as_transfer_time(1.0)?;
            base = base.as_transfer_time(1.0)?;
        }
        let rho = *pods as f64 / *c as f64;
        let a = overhead_alpha(eval, base)?;
        match alphas.iter_mut().find(|(r, _)| (r - rho).abs() <= RHO_EPS) {
            Some((_, v)) => v.push(a),
            None => alphas.push((rho, vec![a])),
        }
    }
    let overhead = OverheadFactor::new(alphas.iter().map(|(r, v)| (*r, mean(v))))?;

    if entries.is_empty() && overhead.points.is_empty() {
        return Err(CalibrationError::EmptyTable);
    }
    let table = if entries.is_empty() { None } else { Some(CalibrationTable::new(entries)?) };
    Ok(Calibration { table, overhead })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(rho: f64, n: u32, c: u32, t: f64) -> TcEntry {
        TcEntry { rho, n, containers: c, creation_s: t }
    }

    #[test]
    fn grid_points_and_midpoints() {
        let t = CalibrationTable::new(vec![e(1.0, 8, 10, 2.0), e(1.0, 8, 20, 3.0)]).unwrap();
        assert_eq!(t.creation_time(1.0, 8, 10).unwrap(), 2.0);
        assert_eq!(t.creation_time(1.0, 8, 15).unwrap(), 2.5);
        assert_eq!(t.asymptote_s, 3.0);
        assert_eq!(t.creation_time(1.0, 8, 500).unwrap(), 3.0);
        // clamped below the grid
        assert_eq!(t.creation_time(0.5, 2, 1).unwrap(), 2.0);
    }

    #[test]
    fn bilinear_over_rho_and_c() {
        let t = CalibrationTable::new(vec![
            e(0.5, 8, 10, 1.0),
            e(0.5, 8, 20, 2.0),
            e(1.0, 8, 10, 3.0),
            e(1.0, 8, 20, 4.0),
        ])
        .unwrap();
        assert!((t.creation_time(0.75, 8, 15).unwrap() - 2.5).abs() < 1e-12);
        assert!((t.creation_time(0.625, 8, 10).unwrap() - 1.5).abs() < 1e-12);
        assert!((t.asymptote_s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_or_invalid_tables() {
        assert!(matches!(CalibrationTable::new(vec![]), Err(CalibrationError::EmptyTable)));
        assert!(CalibrationTable::new(vec![e(1.0, 8, 1, 0.0)]).is_err());
        let empty = CalibrationTable { entries: vec![], asymptote_s: 1.0 };
        assert!(matches!(empty.creation_time(1.0, 1, 1), Err(CalibrationError::EmptyTable)));
    }

    #[test]
    fn overhead_is_one_at_rho_one() {
        let f = OverheadFactor::new([(1.0, 1.3), (0.25, 1.02), (0.5, 1.04)]).unwrap();
        assert_eq!(f.at(1.0), Some(1.0));
        assert_eq!(f.at(0.25), Some(1.02));
        assert_eq!(f.at(0.1), Some(1.02));
        assert_eq!(f.at(0.9), Some(1.04));
        assert!((f.at(0.375).unwrap() - 1.03).abs() < 1e-12);
        assert_eq!(OverheadFactor::default().at(0.5), None);
        assert_eq!(OverheadFactor::default().at(1.0), Some(1.0));
        assert_eq!(OverheadFactor::constant(1.05).unwrap().at(0.3), Some(1.05));
    }
}
