//! Round-based simulator. Each round, every available FLS that is not
//! R-Complete challenges in ascending FID order; the merges it sets up are
//! then carried out in the order they were formed.

use std::collections::BTreeMap;

use super::config::RunConfig;
use super::deploy::deploy;
use super::metrics::{min_avg_max, RoundMetrics};
use super::world::{set_distances, wire, World};
use super::{EngineError, RunCounters, RunOutcome, RunStatus};
use crate::geometry::{PointCloud, Vec3};
use crate::protocol::{
    busy_neighbor_join, issue_challenge, on_challenge, on_thaw, select_anchor, update_r_complete, Body,
    BusyRole, Candidate, ChallengeReply, Discovered, Fid, NeighborView, Role, SwarmId,
};
use crate::rng::{stream, Stream};

/// One anchor and the localizers it serves this round.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub anchor: Fid,
    pub localizers: Vec<Fid>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Engaged {
    Anchor(usize),
    Localizing,
}

/// What phase A decided for one round.
#[derive(Debug, Default)]
struct Plan {
    merges: Vec<Merge>,
    bytes: u64,
}

pub fn run_rounds(cloud: &PointCloud, cfg: &RunConfig) -> Result<RunOutcome, EngineError> {
    let dep = deploy(cloud, cfg)?;
    let mut w = World::new(dep, cfg)?;
    let mut policy_rng = stream(cfg.seed, Stream::Policy);
    let radio = cfg.radio()?;
    let mut counters = RunCounters::default();

    let mut trace = Vec::new();
    let mut row = RoundMetrics { hd: w.hd()?, swarm_count: w.swarm_count(), ..Default::default() };
    let mut status = RunStatus::LimitReached;
    let mut to_threshold = None;
    let mut round = 0;
    loop {
        let converged = row.hd < cfg.hd_stop_threshold;
        if row.swarm_count == 1 && counters.first_single_swarm.is_none() {
            counters.first_single_swarm = Some(round as f64);
        }
        if row.swarm_count == 1 && !converged && w.fls.len() > 1 {
            // one swarm but still off: restart localization in place
            for f in w.fls.iter_mut() {
                on_thaw(f);
            }
            row.thawed_swarms = 1;
        }
        let last = converged || round == cfg.round_limit;
        trace.push(row);
        w.maybe_snapshot(round, last, |_| true);
        if converged {
            status = RunStatus::Converged;
            to_threshold = Some(round as f64);
        }
        if last {
            break;
        }
        round += 1;

        let plan = plan_round(&mut w, cfg, &radio.expand_schedule, &mut policy_rng)?;
        row = execute(&mut w, &plan, round)?;
        row.round_or_time = round as f64;
        row.hd = w.hd()?;
        row.swarm_count = w.swarm_count();
    }

    let final_hd = trace.last().map_or(0.0, |r| r.hd);
    Ok(RunOutcome {
        trace,
        snapshots: std::mem::take(&mut w.snapshots),
        status,
        final_hd,
        to_threshold,
        deployed: w.deployed.clone(),
        final_est: w.est(),
        final_swarm_ids: w.fls.iter().map(|f| f.swarm_id).collect(),
        alive: vec![true; w.fls.len()],
        gt: w.gt.clone(),
        oracle: w.oracle,
        planar: w.dim == crate::geometry::Dim::Two,
        counters,
    })
}

fn plan_round<R: rand::Rng>(
    w: &mut World,
    cfg: &RunConfig,
    schedule: &[f64],
    rng: &mut R,
) -> Result<Plan, EngineError> {
    let n = w.fls.len();
    let mut sizes: BTreeMap<SwarmId, usize> = BTreeMap::new();
    for f in &w.fls {
        *sizes.entry(f.swarm_id).or_default() += 1;
    }
    let seen: Vec<(SwarmId, Vec3)> = w.fls.iter().map(|f| (f.swarm_id, f.est)).collect();
    let mut engaged: BTreeMap<SwarmId, Engaged> = BTreeMap::new();
    let mut plan = Plan::default();

    for i in 0..n {
        let me = &w.fls[i];
        let sw = me.swarm_id;
        if engaged.contains_key(&sw) || !me.is_available() {
            continue;
        }
        if update_r_complete(&mut w.fls[i], cfg.match_tolerance, |f| seen.get(f as usize).copied()) {
            continue;
        }
        let me = &w.fls[i];
        let visible = |j: usize| {
            let f = &w.fls[j];
            f.swarm_id != sw
                && match engaged.get(&f.swarm_id) {
                    None => true,
                    Some(Engaged::Anchor(m)) => plan.merges[*m].anchor == f.fid,
                    Some(Engaged::Localizing) => false,
                }
        };
        let mut found = Vec::new();
        for &range in schedule {
            found = (0..n)
                .filter(|&j| visible(j))
                .map(|j| (j, me.gt.distance(w.fls[j].gt)))
                .filter(|&(_, d)| d <= range)
                .map(|(j, distance)| Discovered {
                    fid: j as Fid,
                    swarm_id: w.fls[j].swarm_id,
                    swarm_size: sizes[&w.fls[j].swarm_id],
                    oracle: w.fls[j].oracle,
                    distance,
                })
                .collect();
            if !found.is_empty() {
                break;
            }
        }
        if found.is_empty() {
            continue;
        }
        let targets = issue_challenge(me, &found, cfg.m, cfg.anchor_policy, rng);
        if targets.is_empty() {
            continue;
        }
        let my_oracle = me.oracle;
        plan.bytes += wire(Body::Challenge { targets: targets.clone() });
        let mut accepted: Vec<Fid> = Vec::new();
        for &t in &targets {
            let mut probe = w.fls[t as usize].clone();
            match on_challenge(&mut probe, sw, my_oracle)? {
                ChallengeReply::Accept { role } => {
                    plan.bytes += wire(Body::ChallengeAccept { target: i as Fid, anchor: role == Role::Anchor, lease_us: 0 });
                    accepted.push(t);
                }
                ChallengeReply::Decline => plan.bytes += wire(Body::ChallengeDecline { target: i as Fid }),
            }
        }

        if accepted.is_empty() {
            // a lone FLS next to a busy anchor localizes against it anyway
            if sizes[&sw] != 1 {
                continue;
            }
            let views: Vec<NeighborView> = found
                .iter()
                .map(|d| &w.fls[d.fid as usize])
                .filter(|f| f.role == Role::Anchor)
                .map(|f| NeighborView { fid: f.fid, swarm_id: f.swarm_id, status: f.status })
                .collect();
            if let Some(a) = busy_neighbor_join(&w.fls[i], &views) {
                if let Some(&Engaged::Anchor(m)) = engaged.get(&w.fls[a as usize].swarm_id) {
                    plan.merges[m].localizers.push(i as Fid);
                    w.fls[i].set_role(Role::Localizing);
                    engaged.insert(sw, Engaged::Localizing);
                    plan.bytes += wire(Body::SetBusy { role: BusyRole::Localizing });
                }
            }
            continue;
        }

        let busy_anchor = |f: Fid| w.fls[f as usize].role == Role::Anchor;
        let mut parts: Vec<Fid> = vec![i as Fid];
        parts.extend(accepted.iter().copied());
        let oracle = parts.iter().copied().find(|&f| w.fls[f as usize].oracle);
        let forced = oracle.or_else(|| accepted.iter().copied().find(|&f| busy_anchor(f)));
        // at most one existing merge can absorb this one
        parts.retain(|&f| !busy_anchor(f) || Some(f) == forced);
        let anchor = match forced {
            Some(a) => a,
            None => {
                let cands: Vec<Candidate> = parts
                    .iter()
                    .map(|&f| {
                        let s = &w.fls[f as usize];
                        Candidate {
                            fid: f,
                            swarm_id: s.swarm_id,
                            swarm_size: sizes[&s.swarm_id],
                            oracle: s.oracle,
                            challenger: f == i as Fid,
                        }
                    })
                    .collect();
                select_anchor(&cands, cfg.anchor_policy, rng)?
            }
        };
        let locs: Vec<Fid> = parts.iter().copied().filter(|&f| f != anchor).collect();
        let a_swarm = w.fls[anchor as usize].swarm_id;
        let m = match engaged.get(&a_swarm) {
            Some(&Engaged::Anchor(m)) => m,
            _ => {
                plan.merges.push(Merge { anchor, localizers: Vec::new() });
                engaged.insert(a_swarm, Engaged::Anchor(plan.merges.len() - 1));
                w.fls[anchor as usize].set_role(Role::Anchor);
                plan.bytes += wire(Body::SetBusy { role: BusyRole::Anchor });
                plan.merges.len() - 1
            }
        };
        for l in locs {
            plan.merges[m].localizers.push(l);
            w.fls[l as usize].set_role(Role::Localizing);
            engaged.insert(w.fls[l as usize].swarm_id, Engaged::Localizing);
            plan.bytes += wire(Body::SetBusy { role: BusyRole::Localizing });
        }
    }
    Ok(plan)
}

fn execute(w: &mut World, plan: &Plan, round: usize) -> Result<RoundMetrics, EngineError> {
    let mut members = w.members();
    let mut row = RoundMetrics { bytes_tx: plan.bytes, ..Default::default() };
    let (mut d_loc, mut d_follow) = (0.0, 0.0);
    let mut per_anchor = Vec::new();
    for merge in &plan.merges {
        let a = merge.anchor as usize;
        let mut served = 0;
        for &l in &merge.localizers {
            let (step, mr, un) = w.localize(l as usize, a, round as u64)?;
            d_loc += step.flown;
            row.bytes_tx += wire(mr) + wire(un);
            let followers = members.remove(&step.old_swarm).unwrap_or_default();
            for &j in &followers {
                if j != l as usize {
                    d_follow += w.follow(j, &step).unwrap_or(0.0);
                }
            }
            members.entry(step.new_swarm).or_default().extend(followers);
            served += 1;
        }
        w.fls[a].release();
        row.bytes_tx += wire(Body::SetBusy { role: BusyRole::Released });
        per_anchor.push(served);
        row.localizations += served;
    }
    for f in w.fls.iter_mut() {
        f.release();
    }
    set_distances(&mut row, d_loc, d_follow);
    row.anchor_count = plan.merges.len();
    row.anchors_served = per_anchor.iter().filter(|&&s| s > 0).count();
    let (lo, avg, hi) = min_avg_max(&per_anchor);
    row.merged_swarms_per_anchor_min = lo;
    row.merged_swarms_per_anchor_avg = avg;
    row.merged_swarms_per_anchor_max = hi;
    row.localizing_min = row.localizations;
    row.localizing_avg = row.localizations as f64;
    row.localizing_max = row.localizations;
    Ok(row)
}
