use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Fid, ProtocolError, SwarmId};

/// How the anchor of a merge is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorPolicy {
    Random,
    /// The FLS that expanded its radio range and issued the challenge.
    Challenger,
    #[default]
    LowestSwarmId,
    LargestSwarm,
    SmallestSwarm,
}

impl AnchorPolicy {
    pub const ALL: [AnchorPolicy; 5] = [
        AnchorPolicy::Random,
        AnchorPolicy::Challenger,
        AnchorPolicy::LowestSwarmId,
        AnchorPolicy::LargestSwarm,
        AnchorPolicy::SmallestSwarm,
    ];
}

impl FromStr for AnchorPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "random" => AnchorPolicy::Random,
            "challenger" => AnchorPolicy::Challenger,
            "lowest_swarm_id" => AnchorPolicy::LowestSwarmId,
            "largest_swarm" => AnchorPolicy::LargestSwarm,
            "smallest_swarm" => AnchorPolicy::SmallestSwarm,
            other => return Err(format!("unknown anchor policy {other:?}")),
        })
    }
}

impl fmt::Display for AnchorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnchorPolicy::Random => "random",
            AnchorPolicy::Challenger => "challenger",
            AnchorPolicy::LowestSwarmId => "lowest_swarm_id",
            AnchorPolicy::LargestSwarm => "largest_swarm",
            AnchorPolicy::SmallestSwarm => "smallest_swarm",
        })
    }
}

/// Maximum number of swarms fused by one merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeLimit {
    Bounded(u32),
    #[default]
    Unbounded,
}

impl MergeLimit {
    /// How many foreign swarms a challenger may pull in.
    pub fn foreign_slots(self) -> usize {
        match self {
            MergeLimit::Bounded(m) => m.saturating_sub(1) as usize,
            MergeLimit::Unbounded => usize::MAX,
        }
    }
}

impl FromStr for MergeLimit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "infinity" | "∞" => Ok(MergeLimit::Unbounded),
            n => match n.parse::<u32>() {
                Ok(m) if m >= 2 => Ok(MergeLimit::Bounded(m)),
                _ => Err(format!("M must be an integer >= 2 or inf, got {n:?}")),
            },
        }
    }
}

impl fmt::Display for MergeLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeLimit::Bounded(m) => write!(f, "{m}"),
            MergeLimit::Unbounded => f.write_str("inf"),
        }
    }
}

/// One swarm taking part in a merge, as seen by anchor selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub fid: Fid,
    pub swarm_id: SwarmId,
    pub swarm_size: usize,
    pub oracle: bool,
    pub challenger: bool,
}

/// Orders candidates by preference under `policy`, best first. Oracle
/// swarms always lead. Ties fall back to the lower swarm id, then FID.
pub fn rank<R: Rng + ?Sized>(cands: &mut [Candidate], policy: AnchorPolicy, rng: &mut R) {
    if policy == AnchorPolicy::Random {
        cands.shuffle(rng);
    }
    let tie = |a: &Candidate, b: &Candidate| (a.swarm_id, a.fid).cmp(&(b.swarm_id, b.fid));
    cands.sort_by(|a, b| {
        b.oracle.cmp(&a.oracle).then_with(|| match policy {
            AnchorPolicy::Random => std::cmp::Ordering::Equal,
            AnchorPolicy::Challenger => b.challenger.cmp(&a.challenger).then_with(|| tie(a, b)),
            AnchorPolicy::LowestSwarmId => tie(a, b),
            AnchorPolicy::LargestSwarm => {
                b.swarm_size.cmp(&a.swarm_size).then_with(|| tie(a, b))
            }
            AnchorPolicy::SmallestSwarm => {
                a.swarm_size.cmp(&b.swarm_size).then_with(|| tie(a, b))
            }
        })
    });
}

/// Picks the anchor FID among the merging swarms.
pub fn select_anchor<R: Rng + ?Sized>(
    candidates: &[Candidate],
    policy: AnchorPolicy,
    rng: &mut R,
) -> Result<Fid, ProtocolError> {
    let mut c = candidates.to_vec();
    if c.is_empty() {
        return Err(ProtocolError::NoCandidates);
    }
    rank(&mut c, policy, rng);
    Ok(c[0].fid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(fid: Fid, swarm_id: SwarmId, swarm_size: usize) -> Candidate {
        Candidate { fid, swarm_id, swarm_size, oracle: false, challenger: false }
    }

    fn pick(cands: &[Candidate], p: AnchorPolicy) -> Fid {
        select_anchor(cands, p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn lowest_swarm_id() {
        assert_eq!(pick(&[c(17, 7, 1), c(13, 3, 1), c(19, 9, 1)], AnchorPolicy::LowestSwarmId), 13);
    }

    #[test]
    fn size_ties_go_to_lower_swarm_id() {
        let cs = [c(21, 8, 5), c(22, 4, 5), c(23, 1, 2)];
        assert_eq!(pick(&cs, AnchorPolicy::LargestSwarm), 22);
        assert_eq!(pick(&cs, AnchorPolicy::SmallestSwarm), 23);
    }

    #[test]
    fn challenger_and_oracle() {
        let mut cs = [c(5, 5, 1), c(2, 2, 9)];
        cs[0].challenger = true;
        assert_eq!(pick(&cs, AnchorPolicy::Challenger), 5);
        cs[0].challenger = false;
        cs[0].oracle = true;
        for p in AnchorPolicy::ALL {
            assert_eq!(pick(&cs, p), 5);
        }
    }

    #[test]
    fn single_and_empty() {
        for p in AnchorPolicy::ALL {
            assert_eq!(pick(&[c(4, 4, 1)], p), 4);
            assert!(select_anchor(&[], p, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        }
    }

    #[test]
    fn random_is_seeded() {
        let cs: Vec<Candidate> = (1..=20).map(|i| c(i, i, 1)).collect();
        let a: Vec<Fid> = (0..10)
            .map(|s| select_anchor(&cs, AnchorPolicy::Random, &mut ChaCha8Rng::seed_from_u64(s)).unwrap())
            .collect();
        let b: Vec<Fid> = (0..10)
            .map(|s| select_anchor(&cs, AnchorPolicy::Random, &mut ChaCha8Rng::seed_from_u64(s)).unwrap())
            .collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|&f| f != a[0]));
    }

    #[test]
    fn parse_merge_limit() {
        assert_eq!("2".parse::<MergeLimit>().unwrap(), MergeLimit::Bounded(2));
        assert_eq!("inf".parse::<MergeLimit>().unwrap(), MergeLimit::Unbounded);
        assert!("1".parse::<MergeLimit>().is_err());
        assert_eq!(MergeLimit::Bounded(2).foreign_slots(), 1);
    }
}
