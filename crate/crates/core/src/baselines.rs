//! Comparison yardsticks: per-FLS confidence, three-object triangulation by
//! circle intersection and three-object trilateration.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::geometry::{hd, identity_assignment, Dim, GeometryError, Translation, Vec3};

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum TriangulationFailure {
    #[error("a subtended angle is 0 or 180 degrees")]
    DegenerateAngle,
    #[error("circle centers are {0:.3} cells apart")]
    CentersTooClose(f64),
    #[error("circle intersection does not reproduce the angles (residual {0:.3e} rad)")]
    Residual(f64),
    #[error("triangulation needs planar input")]
    NotPlanar,
}

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum TrilaterationFailure {
    #[error("anchors are collinear")]
    Collinear,
    #[error("circles around anchors 1 and 2 do not intersect")]
    Disjoint,
    #[error("no point matches all three distances (residual {0:.3e})")]
    Residual(f64),
}

/// Eq. 1. `neighbors` holds each neighbor's ground-truth distance, or
/// `None` for a missing neighbor, which contributes the full `1/n`.
pub fn confidence(r: f64, neighbors: &[Option<f64>]) -> f64 {
    if neighbors.is_empty() {
        return 0.0;
    }
    let share = 1.0 / neighbors.len() as f64;
    let lost: f64 = neighbors
        .iter()
        .map(|n| match n {
            Some(dist) => share.min(r / dist),
            None => share,
        })
        .sum();
    (1.0 - lost).clamp(0.0, 1.0)
}

/// How a flight's error radius feeds confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceMode {
    /// Mean error radius over the uniform heading-error distribution.
    Average,
    /// The chord bound `2 L sin(eps / 2)`.
    #[default]
    Worst,
}

impl FromStr for ConfidenceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(ConfidenceMode::Average),
            "worst" => Ok(ConfidenceMode::Worst),
            other => Err(format!("unknown confidence mode {other:?}")),
        }
    }
}

impl fmt::Display for ConfidenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfidenceMode::Average => "average",
            ConfidenceMode::Worst => "worst",
        })
    }
}

/// Error radius attributed to a dead-reckoned flight of length `len`.
pub fn error_radius(len: f64, epsilon_deg: f64, mode: ConfidenceMode) -> f64 {
    let eps = epsilon_deg.to_radians();
    match mode {
        ConfidenceMode::Worst => 2.0 * len * (eps / 2.0).sin(),
        // mean of 2 L sin(|delta| / 2) for delta uniform on [-eps, eps]
        ConfidenceMode::Average if eps > 0.0 => 4.0 * len * (1.0 - (eps / 2.0).cos()) / eps,
        ConfidenceMode::Average => 0.0,
    }
}

fn cross2(a: Vec3, b: Vec3) -> f64 {
    a.l * b.h - a.h * b.l
}

fn perp(v: Vec3) -> Vec3 {
    Vec3::planar(-v.h, v.l)
}

/// Oriented angle at `x` from `p1` to `p2`, in `(-pi, pi]`.
fn subtended(x: Vec3, p1: Vec3, p2: Vec3) -> f64 {
    let (a, b) = (p1 - x, p2 - x);
    cross2(a, b).atan2(a.l * b.l + a.h * b.h)
}

/// Center of the circle through `p1`, `p2` on which `p1 -> p2` subtends the
/// oriented angle `phi`.
fn arc_center(p1: Vec3, p2: Vec3, phi: f64) -> Vec3 {
    let chord = p2 - p1;
    let c = chord.norm();
    let m = (p1 + p2) / 2.0;
    m + perp(chord) / c * (c / (2.0 * phi.tan()))
}

const MIN_CENTER_GAP: f64 = 1.0;
const ANGLE_TOL: f64 = 1e-6;

/// Positions the localizer so it sees the estimated anchors under the
/// angles it has in the ground truth. Planar only.
pub fn triangulate(
    localizer_gt: Vec3,
    anchors_est: [Vec3; 3],
    anchors_gt: [Vec3; 3],
) -> Result<Vec3, TriangulationFailure> {
    if anchors_est.iter().chain(&anchors_gt).chain([&localizer_gt]).any(|p| p.d != 0.0) {
        return Err(TriangulationFailure::NotPlanar);
    }
    let [g1, g2, g3] = anchors_gt;
    let [p1, p2, p3] = anchors_est;
    let a12 = subtended(localizer_gt, g1, g2);
    let a23 = subtended(localizer_gt, g2, g3);
    if a12.sin().abs() < 1e-9 || a23.sin().abs() < 1e-9 {
        return Err(TriangulationFailure::DegenerateAngle);
    }
    if p1.distance(p2) == 0.0 || p2.distance(p3) == 0.0 {
        return Err(TriangulationFailure::DegenerateAngle);
    }
    let o1 = arc_center(p1, p2, a12);
    let o2 = arc_center(p2, p3, a23);
    let gap = o1.distance(o2);
    if !(gap >= MIN_CENTER_GAP) {
        return Err(TriangulationFailure::CentersTooClose(gap));
    }
    // both circles pass through p2; the other intersection is p2 mirrored
    // across the line of centers
    let axis = (o2 - o1) / gap;
    let rel = p2 - o1;
    let foot = o1 + axis * rel.dot(axis);
    let x = foot * 2.0 - p2;
    let wrap = |a: f64| (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    let residual = wrap(subtended(x, p1, p2) - a12).abs().max(wrap(subtended(x, p2, p3) - a23).abs());
    if !(residual <= ANGLE_TOL) {
        return Err(TriangulationFailure::Residual(residual));
    }
    Ok(x)
}

/// Default distance tolerance of [`trilaterate`], in cells.
pub const TRILATERATION_TOL: f64 = 0.01;

/// Places the localizer at the ground-truth distances from the estimated
/// anchors.
pub fn trilaterate(
    localizer_gt: Vec3,
    anchors_est: [Vec3; 3],
    anchors_gt: [Vec3; 3],
    dim: Dim,
    tol: f64,
) -> Result<Vec3, TrilaterationFailure> {
    let dist: [f64; 3] = std::array::from_fn(|i| localizer_gt.distance(anchors_gt[i]));
    let [a1, a2, a3] = anchors_est;
    let ex = match (a2 - a1).normalized() {
        Some(e) => e,
        None => return Err(TrilaterationFailure::Collinear),
    };
    let d = a1.distance(a2);
    let off3 = a3 - a1;
    let i = ex.dot(off3);
    let ey = match (off3 - ex * i).normalized() {
        Some(e) if (off3 - ex * i).norm() > 1e-9 * off3.norm().max(1.0) => e,
        _ => return Err(TrilaterationFailure::Collinear),
    };
    let j = ey.dot(off3);
    let (d1, d2, d3) = (dist[0], dist[1], dist[2]);
    if d > d1 + d2 + tol || d < (d1 - d2).abs() - tol {
        return Err(TrilaterationFailure::Disjoint);
    }
    let x = (d1 * d1 - d2 * d2 + d * d) / (2.0 * d);
    let candidates: Vec<Vec3> = match dim {
        Dim::Two => {
            let h = (d1 * d1 - x * x).max(0.0).sqrt();
            let n = perp(ex);
            vec![a1 + ex * x + n * h, a1 + ex * x - n * h]
        }
        Dim::Three => {
            let y = (d1 * d1 - d3 * d3 + i * i + j * j) / (2.0 * j) - (i / j) * x;
            let z = (d1 * d1 - x * x - y * y).max(0.0).sqrt();
            let ez = ex.cross(ey);
            let base = a1 + ex * x + ey * y;
            // keep the side of the anchor plane the localizer has in truth
            let side = (anchors_gt[1] - anchors_gt[0])
                .cross(anchors_gt[2] - anchors_gt[0])
                .dot(localizer_gt - anchors_gt[0]);
            let sign = if side * ez.dot((a2 - a1).cross(a3 - a1)) >= 0.0 { 1.0 } else { -1.0 };
            vec![base + ez * (z * sign), base - ez * (z * sign)]
        }
    };
    let residual = |p: Vec3| {
        (0..3).map(|k| (p.distance(anchors_est[k]) - dist[k]).abs()).fold(0.0, f64::max)
    };
    let best = match dim {
        Dim::Two => *candidates
            .iter()
            .min_by(|a, b| (a.distance(a3) - d3).abs().total_cmp(&(b.distance(a3) - d3).abs()))
            .expect("two candidates"),
        Dim::Three => candidates[0],
    };
    let r = residual(best);
    if !(r <= tol) {
        return Err(TrilaterationFailure::Residual(r));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Triangulation,
    Trilateration,
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineMethod::Triangulation => "triangulation",
            BaselineMethod::Trilateration => "trilateration",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub confidence_mode: ConfidenceMode,
    pub threshold: f64,
    pub max_iters: usize,
    pub epsilon_deg: f64,
    pub translation: Translation,
    /// Record HD every this many iterations (and always at the end).
    pub trace_every: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub est: Vec<Vec3>,
    /// `(iteration, hd)` pairs; iteration 0 is the starting cloud.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub localized: usize,
    pub failures: usize,
    /// FLSs that could never localize for lack of three neighbors.
    pub skipped: usize,
    pub converged: bool,
    pub distance: f64,
}

impl BaselineRun {
    pub fn final_hd(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.1)
    }
}

/// Iteratively relocates the least-confident FLS against three random
/// neighbors until every FLS is confident or the budget runs out.
///
/// `neighbors[i]` lists indices of FLS `i`'s neighbors, `initial_leg[i]` the
/// length of its deployment flight. Movement is exact.
pub fn run_baseline<R: Rng + ?Sized>(
    gt: &[Vec3],
    est: &[Vec3],
    neighbors: &[Vec<usize>],
    initial_leg: &[f64],
    dim: Dim,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineRun, GeometryError> {
    let n = gt.len();
    if est.len() != n || neighbors.len() != n || initial_leg.len() != n {
        return Err(GeometryError::SizeMismatch { left: n, right: est.len() });
    }
    let assign = identity_assignment(n);
    let mut est = est.to_vec();
    let mut radius: Vec<f64> =
        initial_leg.iter().map(|&l| error_radius(l, cfg.epsilon_deg, cfg.confidence_mode)).collect();
    let conf = |i: usize, radius: &[f64]| -> f64 {
        let ds: Vec<Option<f64>> = neighbors[i].iter().map(|&k| Some(gt[i].distance(gt[k]))).collect();
        confidence(radius[i], &ds)
    };
    let mut c: Vec<f64> = (0..n).map(|i| conf(i, &radius)).collect();
    let skip: Vec<bool> = neighbors.iter().map(|nb| nb.len() < 3).collect();
    let skipped = skip.iter().filter(|&&s| s).count();
    let mut blocked = vec![false; n];
    let mut run = BaselineRun {
        est: Vec::new(),
        trace: vec![(0, hd(&est, gt, &assign, cfg.translation, rng)?)],
        iterations: 0,
        localized: 0,
        failures: 0,
        skipped,
        converged: false,
        distance: 0.0,
    };
    let every = cfg.trace_every.max(1);
    for iter in 1..=cfg.max_iters {
        let eligible: Vec<usize> = (0..n).filter(|&i| !skip[i]).collect();
        if eligible.iter().all(|&i| c[i] > cfg.threshold) {
            run.converged = true;
            break;
        }
        let open: Vec<usize> = eligible.iter().copied().filter(|&i| !blocked[i]).collect();
        let Some(low) = open.iter().map(|&i| c[i]).min_by(f64::total_cmp) else {
            break;
        };
        let ties: Vec<usize> = open.into_iter().filter(|&i| c[i] == low).collect();
        let f = *ties.choose(rng).expect("at least one minimum");
        let picks: Vec<usize> = neighbors[f].choose_multiple(rng, 3).copied().collect();
        let ae = [est[picks[0]], est[picks[1]], est[picks[2]]];
        let ag = [gt[picks[0]], gt[picks[1]], gt[picks[2]]];
        let outcome = match cfg.method {
            BaselineMethod::Triangulation => triangulate(gt[f], ae, ag).map_err(|e| e.to_string()),
            BaselineMethod::Trilateration => {
                trilaterate(gt[f], ae, ag, dim, cfg.tol).map_err(|e| e.to_string())
            }
        };
        run.iterations = iter;
        match outcome {
            Ok(p) => {
                let leg = est[f].distance(p);
                run.distance += leg;
                est[f] = p;
                radius[f] = error_radius(leg, cfg.epsilon_deg, cfg.confidence_mode);
                run.localized += 1;
                blocked.iter_mut().for_each(|b| *b = false);
                c[f] = conf(f, &radius);
            }
            Err(e) => {
                log::debug!("{}: fls index {f} failed: {e}", cfg.method);
                run.failures += 1;
                blocked[f] = true;
            }
        }
        if iter % every == 0 {
            run.trace.push((iter, hd(&est, gt, &assign, cfg.translation, rng)?));
        }
    }
    if run.trace.last().map(|t| t.0) != Some(run.iterations) {
        run.trace.push((run.iterations, hd(&est, gt, &assign, cfg.translation, rng)?));
    }
    run.est = est;
    Ok(run)
}
