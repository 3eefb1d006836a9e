//! Initial placement of FLSs.

use rand::Rng;

use super::config::{Placement, RunConfig};
use super::EngineError;
use crate::geometry::{centroid, DeadReckoning, Dim, PointCloud, Vec3};
use crate::protocol::{on_deploy, Fid, FlsState};
use crate::rng::{stream, Stream};

/// FLSs right after deployment. FIDs are point indices.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub fls: Vec<FlsState>,
    /// Length of each FLS's deployment flight (or its error bound under
    /// random placement).
    pub legs: Vec<f64>,
    pub oracle: Option<Fid>,
    pub dim: Dim,
}

impl Deployment {
    pub fn est(&self) -> Vec<Vec3> {
        self.fls.iter().map(|f| f.est).collect()
    }

    pub fn gt(&self) -> Vec<Vec3> {
        self.fls.iter().map(|f| f.gt).collect()
    }
}

/// The `k` nearest ground-truth neighbors of every point within `max_range`,
/// nearest first, ties by FID.
pub fn known_neighbors(gt: &[Vec3], k: usize, max_range: f64) -> Vec<Vec<(Fid, Vec3)>> {
    gt.iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut near: Vec<(f64, usize)> = gt
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &q)| (p.distance(q), j))
                .filter(|&(d, _)| d <= max_range)
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.truncate(k);
            near.into_iter().map(|(_, j)| (j as Fid, gt[j])).collect()
        })
        .collect()
}

/// Index of the point nearest the ground-truth centroid, lowest on ties.
pub fn central_point(gt: &[Vec3]) -> usize {
    let c = centroid(gt);
    let mut best = 0;
    for (i, p) in gt.iter().enumerate() {
        if p.distance_squared(c) < gt[best].distance_squared(c) {
            best = i;
        }
    }
    best
}

pub fn deploy(cloud: &PointCloud, cfg: &RunConfig) -> Result<Deployment, EngineError> {
    let dim = cloud.dim();
    let gt = cloud.points();
    let mut origin = cfg.dispatcher_origin;
    if dim == Dim::Two {
        origin.d = 0.0;
    }
    let (est, legs): (Vec<Vec3>, Vec<f64>) = match cfg.placement {
        Placement::Deploy => {
            let mut dr = DeadReckoning::new(cfg.epsilon_deg, stream(cfg.seed, Stream::Deploy))?;
            gt.iter().map(|&g| (dr.reckon(origin, g, dim), origin.distance(g))).unzip()
        }
        Placement::Random => {
            let mut rng = stream(cfg.seed, Stream::Placement);
            let (lo, hi) = cloud.bounds();
            let diag = lo.distance(hi);
            let mut draw = |a: f64, b: f64| if b > a { rng.gen_range(a..=b) } else { a };
            gt.iter()
                .map(|_| {
                    let l = draw(lo.l, hi.l);
                    let h = draw(lo.h, hi.h);
                    let d = if dim == Dim::Two { 0.0 } else { draw(lo.d, hi.d) };
                    (Vec3::new(l, h, d), diag)
                })
                .unzip()
        }
    };
    let neighbors = known_neighbors(gt, cfg.k(), cfg.radio_max);
    let oracle = cfg.oracle_mode.then(|| central_point(gt) as Fid);
    let fls = gt
        .iter()
        .zip(est)
        .zip(neighbors)
        .enumerate()
        .map(|(i, ((&g, e), nb))| {
            let mut f = FlsState::new(i as Fid, g, e, cfg.eta);
            f.known_neighbors = nb;
            f.oracle_fid = oracle;
            f.oracle_hw = oracle == Some(i as Fid);
            on_deploy(&mut f);
            f
        })
        .collect();
    Ok(Deployment { fls, legs, oracle, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chord_bound;

    fn line(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Vec3::planar(10.0 + i as f64, 5.0)).collect()).unwrap()
    }

    #[test]
    fn exact_deployment_without_error() {
        let cfg = RunConfig { epsilon_deg: 0.0, ..Default::default() };
        let d = deploy(&line(6), &cfg).unwrap();
        assert_eq!(d.est(), d.gt());
        assert!(d.fls.iter().all(|f| f.swarm_id == f.fid && f.is_available()));
    }

    #[test]
    fn deployment_error_within_chord_bound() {
        let cloud = PointCloud::new(vec![Vec3::new(0.0, 100.0, 0.0), Vec3::new(60.0, 0.0, 80.0)]).unwrap();
        for seed in 0..50 {
            let cfg = RunConfig { seed, epsilon_deg: 5.0, ..Default::default() };
            let d = deploy(&cloud, &cfg).unwrap();
            for f in &d.fls {
                // 2 * 100 * sin(2.5 deg)
                assert!(f.est.distance(f.gt) <= 8.7239 + 1e-9);
                assert!(f.est.distance(f.gt) <= chord_bound(100.0, 5.0) + 1e-9);
            }
        }
    }

    #[test]
    fn neighbors_sorted_and_limited() {
        let nb = known_neighbors(line(10).points(), 3, 2.5);
        assert_eq!(nb[0].iter().map(|n| n.0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(nb[5].iter().map(|n| n.0).collect::<Vec<_>>(), vec![4, 6, 3]);
    }

    #[test]
    fn oracle_is_central_and_random_placement_stays_in_box() {
        let cloud = line(5);
        let cfg = RunConfig { oracle_mode: true, placement: Placement::Random, ..Default::default() };
        let d = deploy(&cloud, &cfg).unwrap();
        assert_eq!(d.oracle, Some(2));
        assert!(d.fls[2].oracle && !d.fls[1].oracle);
        let (lo, hi) = cloud.bounds();
        assert!(d.fls.iter().all(|f| f.est.l >= lo.l && f.est.l <= hi.l && f.est.h == 5.0 && f.est.d == 0.0));
    }
}
