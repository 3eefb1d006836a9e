use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::EngineError;
use crate::geometry::{PointCloud, Vec3};

/// One row of the metrics trace: a round, or a time window in event mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RoundMetrics {
    /// Round number, or window end in seconds for event mode.
    pub round_or_time: f64,
    pub hd: f64,
    pub swarm_count: usize,
    pub localizing_min: usize,
    pub localizing_avg: f64,
    pub localizing_max: usize,
    pub anchor_count: usize,
    pub merged_swarms_per_anchor_min: usize,
    pub merged_swarms_per_anchor_avg: f64,
    pub merged_swarms_per_anchor_max: usize,
    pub dist_localizing: f64,
    pub dist_swarm_follow: f64,
    pub dist_total: f64,
    pub bytes_tx: u64,
    pub localizations: usize,
    pub anchors_served: usize,
    pub thawed_swarms: usize,
    pub leases_expired: usize,
}

/// Column order of the metrics CSV.
pub const METRICS_COLUMNS: [&str; 18] = [
    "round_or_time",
    "hd",
    "swarm_count",
    "localizing_min",
    "localizing_avg",
    "localizing_max",
    "anchor_count",
    "merged_swarms_per_anchor_min",
    "merged_swarms_per_anchor_avg",
    "merged_swarms_per_anchor_max",
    "dist_localizing",
    "dist_swarm_follow",
    "dist_total",
    "bytes_tx",
    "localizations",
    "anchors_served",
    "thawed_swarms",
    "leases_expired",
];

/// `(min, avg, max)` of a sample, zeros when empty.
pub fn min_avg_max(xs: &[usize]) -> (usize, f64, usize) {
    if xs.is_empty() {
        return (0, 0.0, 0);
    }
    let min = *xs.iter().min().expect("non-empty");
    let max = *xs.iter().max().expect("non-empty");
    (min, xs.iter().sum::<usize>() as f64 / xs.len() as f64, max)
}

pub fn metrics_csv(trace: &[RoundMetrics]) -> Result<Vec<u8>, EngineError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_COLUMNS).map_err(EngineError::Csv)?;
    for row in trace {
        w.serialize(row).map_err(EngineError::Csv)?;
    }
    w.into_inner().map_err(|e| EngineError::Csv(e.into_error().into()))
}

pub fn emit_metrics(trace: &[RoundMetrics], path: &Path) -> Result<(), EngineError> {
    let bytes = metrics_csv(trace)?;
    std::fs::write(path, bytes).map_err(|source| EngineError::Io { path: path.display().to_string(), source })
}

pub fn snapshot_name(index: usize) -> String {
    format!("snap_{index}.xyz")
}

/// Writes `est` in the point-cloud text format as `snap_<index>.xyz`.
pub fn emit_snapshot(est: &[Vec3], planar: bool, index: usize, dir: &Path) -> Result<(), EngineError> {
    let path = dir.join(snapshot_name(index));
    let mut out = String::with_capacity(est.len() * 24);
    for p in est {
        if planar {
            writeln!(out, "{} {}", p.l, p.h)
        } else {
            writeln!(out, "{} {} {}", p.l, p.h, p.d)
        }
        .expect("string write");
    }
    std::fs::write(&path, out).map_err(|source| EngineError::Io { path: path.display().to_string(), source })
}

/// Reads a snapshot back. Estimated positions of distinct FLSs can in
/// principle coincide, so duplicates are kept.
pub fn read_snapshot(path: &Path) -> Result<Vec<Vec3>, EngineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| EngineError::Io { path: path.display().to_string(), source })?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| EngineError::Snapshot(format!("{}:{}: {e}", path.display(), i + 1)))?;
        match cols[..] {
            [l, h] => pts.push(Vec3::planar(l, h)),
            [l, h, d] => pts.push(Vec3::new(l, h, d)),
            _ => return Err(EngineError::Snapshot(format!("{}:{}: bad column count", path.display(), i + 1))),
        }
    }
    Ok(pts)
}

/// Convenience for callers that want a validated cloud from a snapshot.
pub fn snapshot_cloud(path: &Path) -> Result<PointCloud, EngineError> {
    PointCloud::new(read_snapshot(path)?).map_err(EngineError::Geometry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_empty_trace() {
        let s = String::from_utf8(metrics_csv(&[]).unwrap()).unwrap();
        assert_eq!(s.trim_end(), METRICS_COLUMNS.join(","));
    }

    #[test]
    fn rows_follow_header_order() {
        let row = RoundMetrics {
            round_or_time: 2.0,
            hd: 0.5,
            dist_localizing: 1.0,
            dist_swarm_follow: 2.0,
            dist_total: 3.0,
            ..Default::default()
        };
        let s = String::from_utf8(metrics_csv(&[row.clone(), row]).unwrap()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), METRICS_COLUMNS.len());
        assert_eq!(cells[0], "2.0");
        assert_eq!(cells[12], "3.0");
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![Vec3::new(0.1, 1.0 / 3.0, -2.5), Vec3::new(1e-17, 4.0, 7.125)];
        emit_snapshot(&pts, false, 3, dir.path()).unwrap();
        assert_eq!(read_snapshot(&dir.path().join("snap_3.xyz")).unwrap(), pts);
        let flat = vec![Vec3::planar(0.7, 0.2)];
        emit_snapshot(&flat, true, 0, dir.path()).unwrap();
        assert_eq!(read_snapshot(&dir.path().join("snap_0.xyz")).unwrap(), flat);
    }

    #[test]
    fn stats() {
        assert_eq!(min_avg_max(&[]), (0, 0.0, 0));
        assert_eq!(min_avg_max(&[1, 2, 6]), (1, 3.0, 6));
    }
}
