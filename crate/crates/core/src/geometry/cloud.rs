//! Point-cloud container and the plain-text `L H D` file format.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{GeometryError, Vec3};

/// Spatial dimensionality of a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

/// An ordered, duplicate-free, non-empty set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    dim: Dim,
}

/// What [`PointCloud::parse`] saw besides the points themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Lines that repeated an earlier point and were dropped.
    pub duplicates: usize,
    /// Non-comment, non-blank lines read.
    pub lines: usize,
}

fn key(p: Vec3) -> (u64, u64, u64) {
    // +0.0 and -0.0 are the same point
    let norm = |x: f64| if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() };
    (norm(p.l), norm(p.h), norm(p.d))
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input, non-finite coordinates and
    /// duplicates. The dimension is 2 when every point has `d == 0`.
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        let dim = if points.iter().all(|p| p.d == 0.0) { Dim::Two } else { Dim::Three };
        Self::with_dim(points, dim)
    }

    pub fn with_dim(points: Vec<Vec3>, dim: Dim) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite { index: i });
            }
            if dim == Dim::Two && p.d != 0.0 {
                return Err(GeometryError::NotPlanar { index: i });
            }
            if !seen.insert(key(*p)) {
                return Err(GeometryError::Duplicate { index: i });
            }
        }
        Ok(PointCloud { points, dim })
    }

    /// Like [`PointCloud::new`] but silently keeps the first occurrence of
    /// each repeated point. Returns the number of dropped points.
    pub fn dedup(points: Vec<Vec3>) -> Result<(Self, usize), GeometryError> {
        let mut seen = HashSet::with_capacity(points.len());
        let before = points.len();
        let kept: Vec<Vec3> = points.into_iter().filter(|p| seen.insert(key(*p))).collect();
        let dropped = before - kept.len();
        Ok((Self::new(kept)?, dropped))
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; clouds are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.points)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = Vec3::new(lo.l.min(p.l), lo.h.min(p.h), lo.d.min(p.d));
            hi = Vec3::new(hi.l.max(p.l), hi.h.max(p.h), hi.d.max(p.d));
        }
        (lo, hi)
    }

    /// Parses the text format, dropping duplicate points.
    pub fn parse(text: &str) -> Result<(Self, IngestReport), GeometryError> {
        let mut points = Vec::new();
        let mut report = IngestReport::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            report.lines += 1;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 && cols.len() != 3 {
                return Err(GeometryError::Malformed {
                    line: line_no,
                    reason: format!("expected 2 or 3 columns, found {}", cols.len()),
                });
            }
            let mut vals = [0.0f64; 3];
            for (slot, col) in vals.iter_mut().zip(&cols) {
                *slot = col.parse::<f64>().map_err(|e| GeometryError::Malformed {
                    line: line_no,
                    reason: format!("bad number {col:?}: {e}"),
                })?;
                if !slot.is_finite() {
                    return Err(GeometryError::Malformed {
                        line: line_no,
                        reason: format!("non-finite value {col:?}"),
                    });
                }
            }
            points.push(Vec3::new(vals[0], vals[1], vals[2]));
        }
        let (cloud, dropped) = Self::dedup(points)?;
        report.duplicates = dropped;
        Ok((cloud, report))
    }

    pub fn load(path: &Path) -> Result<(Self, IngestReport), GeometryError> {
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serializes using the shortest representation that parses back to
    /// the identical `f64`, so a write/read cycle is lossless.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 24);
        for p in &self.points {
            match self.dim {
                Dim::Two => writeln!(out, "{} {}", p.l, p.h),
                Dim::Three => writeln!(out, "{} {} {}", p.l, p.h, p.d),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_text()).map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let n = points.len().max(1) as f64;
    points.iter().copied().sum::<Vec3>() / n
}
