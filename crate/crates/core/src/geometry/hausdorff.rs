use rand::Rng;

use super::{centroid, GeometryError, Vec3};

/// Sample size of the stochastic translation.
pub const STOCHASTIC_SAMPLE: usize = 90;

/// How an estimated cloud is aligned with ground truth before measuring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Translation {
    Centroid,
    Stochastic,
}

pub fn identity_assignment(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Directed max-min distance from every point of `from` to the set `to`.
/// `to_sorted` must be `to` sorted by the `l` coordinate.
fn directed(from: &[Vec3], to_sorted: &[Vec3]) -> f64 {
    let mut worst = 0.0f64;
    for &p in from {
        let start = to_sorted.partition_point(|q| q.l < p.l);
        let mut best = f64::INFINITY;
        // walk outward in both directions until the l gap alone exceeds best
        for q in &to_sorted[start..] {
            let dl = q.l - p.l;
            if dl * dl > best {
                break;
            }
            best = best.min(p.distance_squared(*q));
        }
        for q in to_sorted[..start].iter().rev() {
            let dl = p.l - q.l;
            if dl * dl > best {
                break;
            }
            best = best.min(p.distance_squared(*q));
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

fn sorted_by_l(pts: &[Vec3]) -> Vec<Vec3> {
    let mut v = pts.to_vec();
    v.sort_by(|a, b| a.l.total_cmp(&b.l));
    v
}

/// Symmetric Hausdorff distance between two point sets. Sizes may differ.
pub fn hausdorff_raw(e: &[Vec3], g: &[Vec3]) -> Result<f64, GeometryError> {
    if e.is_empty() || g.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let eg = directed(e, &sorted_by_l(g));
    let ge = directed(g, &sorted_by_l(e));
    Ok(eg.max(ge))
}

/// `centroid(G) - centroid(E)`.
pub fn translate_centroid(e: &[Vec3], g: &[Vec3]) -> Result<Vec3, GeometryError> {
    if e.len() != g.len() {
        return Err(GeometryError::SizeMismatch { left: e.len(), right: g.len() });
    }
    if e.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(centroid(g) - centroid(e))
}

fn check_assignment(e: &[Vec3], g: &[Vec3], assignment: &[usize]) -> Result<(), GeometryError> {
    if e.len() != g.len() || assignment.len() != e.len() {
        return Err(GeometryError::SizeMismatch { left: e.len(), right: g.len() });
    }
    if e.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    if let Some(index) = assignment.iter().copied().find(|&a| a >= g.len()) {
        return Err(GeometryError::BadAssignment { index });
    }
    Ok(())
}

/// Result of the stochastic translation search, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticChoice {
    pub vector: Vec3,
    /// E index of the winning candidate.
    pub candidate: usize,
    pub residual: f64,
    /// Sampled E indices, ascending.
    pub sample: Vec<usize>,
}

/// Picks `sample` E points at random, tries each one's own error vector as
/// the translation for the whole sample and keeps the vector with the least
/// summed residual distance. Ties go to the lowest E index.
pub fn translate_stochastic<R: Rng + ?Sized>(
    e: &[Vec3],
    g: &[Vec3],
    assignment: &[usize],
    sample: usize,
    rng: &mut R,
) -> Result<StochasticChoice, GeometryError> {
    check_assignment(e, g, assignment)?;
    let mut idx: Vec<usize> = if e.len() <= sample {
        (0..e.len()).collect()
    } else {
        rand::seq::index::sample(rng, e.len(), sample).into_vec()
    };
    idx.sort_unstable();
    let mut best: Option<(f64, usize, Vec3)> = None;
    for &i in &idx {
        let cand = g[assignment[i]] - e[i];
        let residual: f64 = idx.iter().map(|&j| (e[j] + cand).distance(g[assignment[j]])).sum();
        if best.map_or(true, |(r, _, _)| residual < r) {
            best = Some((residual, i, cand));
        }
    }
    let (residual, candidate, vector) = best.expect("sample is non-empty");
    Ok(StochasticChoice { vector, candidate, residual, sample: idx })
}

/// Translation-corrected Hausdorff distance. `E[i]` is matched with
/// `G[assignment[i]]`. Inputs are never modified.
pub fn hd<R: Rng + ?Sized>(
    e: &[Vec3],
    g: &[Vec3],
    assignment: &[usize],
    method: Translation,
    rng: &mut R,
) -> Result<f64, GeometryError> {
    check_assignment(e, g, assignment)?;
    let shift = match method {
        Translation::Centroid => translate_centroid(e, g)?,
        Translation::Stochastic => {
            translate_stochastic(e, g, assignment, STOCHASTIC_SAMPLE, rng)?.vector
        }
    };
    let moved: Vec<Vec3> = e.iter().map(|&p| p + shift).collect();
    hausdorff_raw(&moved, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest, Strategy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(a: &[Vec3], b: &[Vec3]) -> f64 {
        let dir = |x: &[Vec3], y: &[Vec3]| {
            x.iter()
                .map(|p| {
                    y.iter()
                        .map(|q| {
                            let (dl, dh, dd) = (p.l - q.l, p.h - q.h, p.d - q.d);
                            (dl * dl + dh * dh + dd * dd).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        dir(a, b).max(dir(b, a))
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn worked_examples() {
        let o = Vec3::ZERO;
        assert_eq!(hausdorff_raw(&[o], &[Vec3::new(3.0, 4.0, 0.0)]).unwrap(), 5.0);
        assert_eq!(hausdorff_raw(&[o, Vec3::L_AXIS], &[o]).unwrap(), 1.0);
        assert!(matches!(hausdorff_raw(&[], &[o]), Err(GeometryError::EmptyCloud)));
    }

    #[test]
    fn centroid_examples() {
        let e = [Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)];
        let g = [Vec3::new(1.0, 1.0, 0.0), Vec3::new(3.0, 1.0, 0.0)];
        assert_eq!(translate_centroid(&e, &g).unwrap(), Vec3::new(1.0, 1.0, 0.0));
        assert!(matches!(
            translate_centroid(&e, &g[..1]),
            Err(GeometryError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn stochastic_on_uniform_shift() {
        let g: Vec<Vec3> = (0..30).map(|i| Vec3::new(i as f64, (i * i) as f64, 1.0)).collect();
        let e: Vec<Vec3> = g.iter().map(|&p| p + Vec3::new(0.0, 0.0, 5.0)).collect();
        let id = identity_assignment(g.len());
        let c = translate_stochastic(&e, &g, &id, STOCHASTIC_SAMPLE, &mut rng()).unwrap();
        assert_eq!(c.vector, Vec3::new(0.0, 0.0, -5.0));
        assert_eq!(hd(&e, &g, &id, Translation::Stochastic, &mut rng()).unwrap(), 0.0);
    }

    #[test]
    fn stochastic_picks_exhaustive_minimum() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let g: Vec<Vec3> =
            (0..20).map(|i| Vec3::new(i as f64, r.gen_range(0.0..3.0), 0.0)).collect();
        let mut e: Vec<Vec3> = g
            .iter()
            .map(|&p| p + Vec3::new(r.gen_range(-0.2..0.2), r.gen_range(-0.2..0.2), 0.0))
            .collect();
        e[7] += Vec3::new(10.0, 0.0, 0.0);
        let id = identity_assignment(20);
        let c = translate_stochastic(&e, &g, &id, 20, &mut rng()).unwrap();
        let cost = |v: Vec3| (0..20).map(|j| (e[j] + v).distance(g[j])).sum::<f64>();
        let best = (0..20).map(|i| cost(g[i] - e[i])).fold(f64::INFINITY, f64::min);
        assert_ne!(c.candidate, 7);
        assert_eq!(c.vector, g[c.candidate] - e[c.candidate]);
        assert_eq!(cost(c.vector), best);
    }

    #[test]
    fn centroid_hd_of_rotated_cloud_matches_brute_force() {
        let g: Vec<Vec3> = (0..12)
            .map(|i| Vec3::new((i % 4) as f64, (i / 4) as f64 * 2.0, (i % 3) as f64))
            .collect();
        // quarter turn about H: (l, h, d) -> (d, h, -l)
        let e: Vec<Vec3> = g.iter().map(|p| Vec3::new(p.d, p.h, -p.l)).collect();
        let id = identity_assignment(g.len());
        let got = hd(&e, &g, &id, Translation::Centroid, &mut rng()).unwrap();
        let cg = g.iter().fold(Vec3::ZERO, |a, &p| a + p) / 12.0;
        let ce = e.iter().fold(Vec3::ZERO, |a, &p| a + p) / 12.0;
        let moved: Vec<Vec3> = e.iter().map(|&p| p + (cg - ce)).collect();
        assert!((got - brute(&moved, &g)).abs() < 1e-12);
        assert!(got > 0.5);
    }

    fn cloud(max: usize) -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 1..max)
            .prop_map(|v| v.into_iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect())
    }

    proptest! {
        #[test]
        fn raw_matches_brute_force(a in cloud(60), b in cloud(60)) {
            let got = hausdorff_raw(&a, &b).unwrap();
            prop_assert_eq!(got, brute(&a, &b));
            prop_assert_eq!(got, hausdorff_raw(&b, &a).unwrap());
            prop_assert_eq!(hausdorff_raw(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn centroid_hd_ignores_uniform_shift(
            pairs in prop::collection::vec(
                (prop::array::uniform3(-20.0f64..20.0), prop::array::uniform3(-1.0f64..1.0)), 1..40),
            t in prop::array::uniform3(-100.0f64..100.0),
        ) {
            let g: Vec<Vec3> = pairs.iter().map(|(p, _)| Vec3::new(p[0], p[1], p[2])).collect();
            let e: Vec<Vec3> = pairs.iter().map(|(p, n)| Vec3::new(p[0] + n[0], p[1] + n[1], p[2] + n[2])).collect();
            let shift = Vec3::new(t[0], t[1], t[2]);
            let moved: Vec<Vec3> = e.iter().map(|&p| p + shift).collect();
            let id = identity_assignment(g.len());
            let a = hd(&e, &g, &id, Translation::Centroid, &mut rng()).unwrap();
            let b = hd(&moved, &g, &id, Translation::Centroid, &mut rng()).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn stochastic_choice_is_a_sampled_minimum(
            pairs in prop::collection::vec(
                (prop::array::uniform3(-20.0f64..20.0), prop::array::uniform3(-2.0f64..2.0)), 1..120),
            seed in any::<u64>(),
        ) {
            let g: Vec<Vec3> = pairs.iter().map(|(p, _)| Vec3::new(p[0], p[1], p[2])).collect();
            let e: Vec<Vec3> = pairs.iter().map(|(p, n)| Vec3::new(p[0] + n[0], p[1] + n[1], p[2] + n[2])).collect();
            let id = identity_assignment(g.len());
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let c = translate_stochastic(&e, &g, &id, STOCHASTIC_SAMPLE, &mut r).unwrap();
            prop_assert!(c.sample.contains(&c.candidate));
            prop_assert_eq!(c.vector, g[c.candidate] - e[c.candidate]);
            for &i in &c.sample {
                let v = g[i] - e[i];
                let cost: f64 = c.sample.iter().map(|&j| (e[j] + v).distance(g[j])).sum();
                prop_assert!(c.residual <= cost);
            }
        }
    }
}
