//! Deterministic synthetic point clouds for tests and experiments.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::geometry::{Dim, GeometryError, PointCloud, Vec3};
use crate::rng::{stream, Stream};

/// Every generated cloud starts this far from the dispatcher on each axis,
/// so deployment flights have non-trivial length.
pub const OFFSET: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Grid,
    Line,
    Ring,
    Blob,
}

impl FromStr for FixtureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(FixtureKind::Grid),
            "line" => Ok(FixtureKind::Line),
            "ring" => Ok(FixtureKind::Ring),
            "blob" => Ok(FixtureKind::Blob),
            _ => Err(format!("unknown fixture kind {s:?} (expected grid, line, ring or blob)")),
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixtureKind::Grid => "grid",
            FixtureKind::Line => "line",
            FixtureKind::Ring => "ring",
            FixtureKind::Blob => "blob",
        })
    }
}

fn side(n: usize, dim: Dim) -> usize {
    let root = match dim {
        Dim::Two => (n as f64).sqrt(),
        Dim::Three => (n as f64).cbrt(),
    };
    let mut s = root.round().max(1.0) as usize;
    while s.pow(dim.as_usize() as u32) < n {
        s += 1;
    }
    s
}

fn lattice(n: usize, dim: Dim, spacing: f64) -> Vec<Vec3> {
    let s = side(n, dim);
    let d_layers = if dim == Dim::Three { s } else { 1 };
    let mut pts = Vec::with_capacity(s * s * d_layers);
    for k in 0..d_layers {
        for j in 0..s {
            for i in 0..s {
                let d = if dim == Dim::Three { OFFSET + k as f64 * spacing } else { 0.0 };
                pts.push(Vec3::new(OFFSET + i as f64 * spacing, OFFSET + j as f64 * spacing, d));
            }
        }
    }
    pts
}

/// Generates `n` points. `seed` only matters for `blob`.
pub fn generate(kind: FixtureKind, n: usize, dim: Dim, spacing: f64, seed: u64) -> Result<PointCloud, GeometryError> {
    if n == 0 {
        return Err(GeometryError::EmptyCloud);
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GeometryError::NonFinite { index: 0 });
    }
    let depth = if dim == Dim::Three { OFFSET } else { 0.0 };
    let pts: Vec<Vec3> = match kind {
        FixtureKind::Grid => {
            let mut p = lattice(n, dim, spacing);
            p.truncate(n);
            p
        }
        FixtureKind::Line => {
            (0..n).map(|i| Vec3::new(OFFSET + i as f64 * spacing, OFFSET, depth)).collect()
        }
        FixtureKind::Ring => {
            // neighbours on the ring are `spacing` apart along the arc
            let r = (n as f64 * spacing / std::f64::consts::TAU).max(spacing);
            let c = OFFSET + r;
            (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    Vec3::new(c + r * a.cos(), c + r * a.sin(), depth)
                })
                .collect()
        }
        FixtureKind::Blob => {
            let mut rng = stream(seed, Stream::Fixture);
            let mut grid = lattice(n * 2, dim, spacing);
            let jitter = 0.25 * spacing;
            for p in grid.iter_mut() {
                p.l += rng.gen_range(-jitter..=jitter);
                p.h += rng.gen_range(-jitter..=jitter);
                if dim == Dim::Three {
                    p.d += rng.gen_range(-jitter..=jitter);
                }
            }
            let c = crate::geometry::centroid(&grid);
            let mut order: Vec<usize> = (0..grid.len()).collect();
            order.sort_by(|&a, &b| grid[a].distance_squared(c).total_cmp(&grid[b].distance_squared(c)).then(a.cmp(&b)));
            order.truncate(n);
            order.sort_unstable();
            order.into_iter().map(|i| grid[i]).collect()
        }
    };
    PointCloud::with_dim(pts, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_has_unit_gaps() {
        let c = generate(FixtureKind::Line, 10, Dim::Two, 1.0, 0).unwrap();
        let p = c.points();
        assert_eq!(p.len(), 10);
        for w in p.windows(2) {
            assert_eq!(w[0].distance(w[1]), 1.0);
            assert_eq!(w[0].h, w[1].h);
        }
    }

    #[test]
    fn grid_is_square_lattice() {
        let c = generate(FixtureKind::Grid, 64, Dim::Two, 1.0, 0).unwrap();
        let ls: std::collections::BTreeSet<i64> = c.points().iter().map(|p| p.l as i64).collect();
        let hs: std::collections::BTreeSet<i64> = c.points().iter().map(|p| p.h as i64).collect();
        assert_eq!((ls.len(), hs.len(), c.len()), (8, 8, 64));
        let c3 = generate(FixtureKind::Grid, 27, Dim::Three, 2.0, 0).unwrap();
        assert_eq!((c3.len(), c3.dim()), (27, Dim::Three));
    }

    #[test]
    fn blob_is_seeded() {
        let a = generate(FixtureKind::Blob, 200, Dim::Three, 1.0, 7).unwrap();
        let b = generate(FixtureKind::Blob, 200, Dim::Three, 1.0, 7).unwrap();
        let c = generate(FixtureKind::Blob, 200, Dim::Three, 1.0, 8).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a.to_text(), c.to_text());
        assert_eq!(a.len(), 200);
    }

    #[test]
    fn ring_spacing() {
        let c = generate(FixtureKind::Ring, 40, Dim::Two, 1.0, 0).unwrap();
        let p = c.points();
        let gap = p[0].distance(p[1]);
        assert!((gap - 1.0).abs() < 0.01, "{gap}");
        assert!(generate(FixtureKind::Ring, 0, Dim::Two, 1.0, 0).is_err());
        assert!("cube".parse::<FixtureKind>().is_err());
    }
}
