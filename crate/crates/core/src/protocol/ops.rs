//! Per-FLS protocol transitions. Each function touches one FLS's state and
//! returns what that FLS would put on the air; delivery is someone else's job.

use rand::Rng;

use crate::geometry::{DeadReckoning, Dim, Vec3};

use super::anchor::{rank, AnchorPolicy, Candidate, MergeLimit};
use super::message::Body;
use super::{Fid, FlsState, HeldLease, ProtocolError, Role, SimTime, Status, SwarmId};

/// Resets an FLS that has just reached its deployment point.
pub fn on_deploy(fls: &mut FlsState) {
    fls.swarm_id = fls.fid;
    fls.release();
    fls.r_complete = false;
    fls.oracle = fls.oracle_hw;
}

/// A foreign FLS found by radio-range expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discovered {
    pub fid: Fid,
    pub swarm_id: SwarmId,
    pub swarm_size: usize,
    pub oracle: bool,
    pub distance: f64,
}

/// Chooses whom to challenge: one representative (the nearest member) per
/// foreign swarm, at most `M - 1` swarms, preferred per `policy`.
pub fn issue_challenge<R: Rng + ?Sized>(
    fls: &FlsState,
    discovered: &[Discovered],
    limit: MergeLimit,
    policy: AnchorPolicy,
    rng: &mut R,
) -> Vec<Fid> {
    if !fls.is_available() || fls.r_complete {
        return Vec::new();
    }
    let mut near: Vec<&Discovered> =
        discovered.iter().filter(|d| d.swarm_id != fls.swarm_id).collect();
    near.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.fid.cmp(&b.fid)));
    let mut reps: Vec<Candidate> = Vec::new();
    for d in near {
        if !reps.iter().any(|c| c.swarm_id == d.swarm_id) {
            reps.push(Candidate {
                fid: d.fid,
                swarm_id: d.swarm_id,
                swarm_size: d.swarm_size,
                oracle: d.oracle,
                // under the challenger policy the nearest swarm is preferred
                challenger: false,
            });
        }
    }
    if policy == AnchorPolicy::Challenger {
        // keep distance order, oracle first
        reps.sort_by_key(|c| !c.oracle);
    } else {
        rank(&mut reps, policy, rng);
    }
    reps.truncate(limit.foreign_slots());
    reps.into_iter().map(|c| c.fid).collect()
}

/// Decides whether swarm `a` anchors a pairwise merge with swarm `b`.
pub fn a_is_anchor(
    a_swarm: SwarmId,
    a_oracle: bool,
    b_swarm: SwarmId,
    b_oracle: bool,
) -> Result<bool, ProtocolError> {
    match (a_oracle, b_oracle) {
        (true, true) => Err(ProtocolError::DoubleOracle),
        (true, false) => Ok(true),
        (false, true) => Ok(false),
        (false, false) => Ok(a_swarm < b_swarm),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChallengeReply {
    /// Accepted; the receiver now holds `role`.
    Accept { role: Role },
    Decline,
}

/// Handles a challenge from a swarm other than the receiver's.
pub fn on_challenge(
    receiver: &mut FlsState,
    sender_swarm: SwarmId,
    sender_oracle: bool,
) -> Result<ChallengeReply, ProtocolError> {
    if sender_swarm == receiver.swarm_id {
        return Err(ProtocolError::SameSwarm { fid: receiver.fid, swarm: sender_swarm });
    }
    match (receiver.status, receiver.role) {
        (Status::Available, _) => {
            let anchor = a_is_anchor(receiver.swarm_id, receiver.oracle, sender_swarm, sender_oracle)?;
            let role = if anchor { Role::Anchor } else { Role::Localizing };
            receiver.set_role(role);
            Ok(ChallengeReply::Accept { role })
        }
        (Status::Busy, Role::Anchor) if receiver.swarm_id < sender_swarm && !sender_oracle => {
            Ok(ChallengeReply::Accept { role: Role::Anchor })
        }
        (Status::Busy, Role::Anchor) if receiver.oracle && !sender_oracle => {
            Ok(ChallengeReply::Accept { role: Role::Anchor })
        }
        _ => Ok(ChallengeReply::Decline),
    }
}

/// What happened when an FLS processed a MoveAndRejoin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rejoin {
    /// The message named another swarm; nothing changed.
    Discarded,
    /// Swarm re-homed. `moved` is the flight length, zero when suppressed.
    Applied { from: Vec3, to: Vec3, moved: f64 },
}

/// Follower side of a merge: adopt `new_swarm` and replay `v` when the
/// receiver still belongs to `old_swarm`.
#[allow(clippy::too_many_arguments)]
pub fn apply_move_and_rejoin(
    receiver: &mut FlsState,
    old_swarm: SwarmId,
    new_swarm: SwarmId,
    v: Vec3,
    phi: f64,
    threshold: f64,
    reckoning: &mut DeadReckoning,
    dim: Dim,
) -> Rejoin {
    if receiver.swarm_id != old_swarm || old_swarm == new_swarm {
        return Rejoin::Discarded;
    }
    let from = receiver.est;
    let to = if v.norm() > threshold { reckoning.reckon(from, from + v, dim) } else { from };
    receiver.est = to;
    receiver.orientation += phi;
    rehome(receiver, new_swarm);
    Rejoin::Applied { from, to, moved: from.distance(to) }
}

fn rehome(fls: &mut FlsState, new_swarm: SwarmId) {
    fls.swarm_id = new_swarm;
    fls.oracle = fls.oracle_hw || fls.oracle_fid == Some(new_swarm);
    fls.release();
    fls.r_complete = false;
}

/// Localizer side of a merge once `V` is known. The localizer re-homes to
/// the anchor's swarm and returns the MoveAndRejoin for its old swarm and
/// the Unanchor for the anchor. Moving the localizer itself is up to the
/// caller since a plugin may have already flown part of the way.
pub fn complete_localization(
    localizer: &mut FlsState,
    anchor_fid: Fid,
    anchor_swarm: SwarmId,
    swarm_vector: Vec3,
    phi: f64,
    now: SimTime,
) -> Result<(Body, Body), ProtocolError> {
    if localizer.role != Role::Localizing {
        return Err(ProtocolError::NotLocalizing { fid: localizer.fid });
    }
    if anchor_swarm == localizer.swarm_id {
        return Err(ProtocolError::SameSwarm { fid: localizer.fid, swarm: anchor_swarm });
    }
    if let Some(l) = localizer.lease_held {
        if l.expires < now {
            log::info!("fls {}: lease on anchor {} expired before completion", localizer.fid, l.anchor);
        }
    }
    let old_swarm = localizer.swarm_id;
    rehome(localizer, anchor_swarm);
    localizer.orientation += phi;
    Ok((
        Body::MoveAndRejoin { old_swarm, new_swarm: anchor_swarm, v: swarm_vector, phi },
        Body::Unanchor { target: anchor_fid },
    ))
}

/// Yaw change that aligns the localizer's bearing to its anchor with the
/// ground-truth bearing, measured in the L-H plane.
pub fn yaw_correction(me_est: Vec3, anchor_est: Vec3, me_gt: Vec3, anchor_gt: Vec3) -> f64 {
    let bearing = |a: Vec3, b: Vec3| (b.h - a.h).atan2(b.l - a.l);
    let raw = bearing(me_gt, anchor_gt) - bearing(me_est, anchor_est);
    // wrap into (-pi, pi]
    let tau = std::f64::consts::TAU;
    let w = raw.rem_euclid(tau);
    if w > std::f64::consts::PI {
        w - tau
    } else {
        w
    }
}

/// Re-evaluates R-Complete. The FLS looks at its `eta` nearest ground-truth
/// neighbors; `lookup` yields each one's current swarm id and estimated
/// position, or `None` if it cannot be observed. Every one of them must be
/// in the same swarm and sit within `tolerance` of its expected place.
pub fn update_r_complete<F>(fls: &mut FlsState, tolerance: f64, lookup: F) -> bool
where
    F: Fn(Fid) -> Option<(SwarmId, Vec3)>,
{
    let eta = fls.eta.max(1);
    let mut matched = 0;
    for &(fid, gt) in fls.known_neighbors.iter().take(eta) {
        if let Some((swarm, est)) = lookup(fid) {
            let err = (est - fls.est) - (gt - fls.gt);
            if swarm == fls.swarm_id && err.norm() <= tolerance {
                matched += 1;
            }
        }
    }
    fls.r_complete = matched >= eta;
    fls.r_complete
}

/// A neighbor's externally visible state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborView {
    pub fid: Fid,
    pub swarm_id: SwarmId,
    pub status: Status,
}

/// An available FLS next to busy members of another swarm must localize
/// against one of them. Returns the chosen neighbor (lowest FID).
pub fn busy_neighbor_join(fls: &FlsState, observed: &[NeighborView]) -> Option<Fid> {
    // the oracle never localizes, not even against a busy neighbor
    if !fls.is_available() || fls.oracle {
        return None;
    }
    observed
        .iter()
        .filter(|n| n.status == Status::Busy && n.swarm_id != fls.swarm_id)
        .map(|n| n.fid)
        .min()
}

/// Lease timing. Times are in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaseConfig {
    pub delta: SimTime,
    pub renew_fraction: f64,
}

impl Default for LeaseConfig {
    fn default() -> Self {
        LeaseConfig { delta: 1_000_000, renew_fraction: 0.5 }
    }
}

impl LeaseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.delta == 0 {
            return Err("lease duration must be positive".into());
        }
        if !(self.renew_fraction > 0.0 && self.renew_fraction < 1.0) {
            return Err(format!("renew fraction {} not in (0, 1)", self.renew_fraction));
        }
        Ok(())
    }

    fn renew_after(&self) -> SimTime {
        (self.delta as f64 * self.renew_fraction).round() as SimTime
    }
}

/// Anchor grants (or refreshes) a lease to `holder`.
pub fn grant_lease(anchor: &mut FlsState, holder: Fid, now: SimTime, cfg: &LeaseConfig) {
    anchor.set_role(Role::Anchor);
    anchor.leases_granted.insert(holder, now + cfg.delta);
}

/// Localizer records the lease it was granted.
pub fn hold_lease(localizer: &mut FlsState, anchor: Fid, now: SimTime, cfg: &LeaseConfig) {
    localizer.lease_held =
        Some(HeldLease { anchor, expires: now + cfg.delta, renew_at: now + cfg.renew_after() });
}

/// Anchor handles a LeaseRenew. Returns false for unknown (expired) leases.
pub fn renew_lease(anchor: &mut FlsState, holder: Fid, now: SimTime, cfg: &LeaseConfig) -> bool {
    match anchor.leases_granted.get_mut(&holder) {
        Some(exp) => {
            *exp = now + cfg.delta;
            true
        }
        None => false,
    }
}

/// Anchor handles an Unanchor. Returns true when it became available.
pub fn release_lease(anchor: &mut FlsState, holder: Fid) -> bool {
    anchor.leases_granted.remove(&holder);
    if anchor.role == Role::Anchor && anchor.leases_granted.is_empty() {
        anchor.release();
        return true;
    }
    false
}

/// Output of [`lease_tick`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeaseTick {
    /// Renewal to send to this anchor.
    pub renew: Option<Fid>,
    /// Holders whose lease lapsed.
    pub expired: Vec<Fid>,
    /// The anchor released itself because its last lease lapsed.
    pub unanchored: bool,
}

pub fn lease_tick(fls: &mut FlsState, now: SimTime, cfg: &LeaseConfig) -> LeaseTick {
    let mut out = LeaseTick::default();
    if let Some(held) = fls.lease_held.as_mut() {
        if fls.role == Role::Localizing && now >= held.renew_at {
            held.expires = now + cfg.delta;
            held.renew_at = now + cfg.renew_after();
            out.renew = Some(held.anchor);
        }
    }
    let expired: Vec<Fid> =
        fls.leases_granted.iter().filter(|(_, &exp)| exp < now).map(|(&f, _)| f).collect();
    for f in &expired {
        fls.leases_granted.remove(f);
    }
    if !expired.is_empty() && fls.leases_granted.is_empty() && fls.role == Role::Anchor {
        fls.release();
        out.unanchored = true;
    }
    out.expired = expired;
    out
}

/// `H = log2 F`, floored at one second so tiny deployments still quiesce.
pub fn thaw_base_seconds(fls_count: usize) -> f64 {
    (fls_count.max(1) as f64).log2().max(1.0)
}

/// Draws a thaw delay uniformly from `[H, 2H]` seconds.
pub fn draw_thaw_delay<R: Rng + ?Sized>(fls_count: usize, rng: &mut R) -> SimTime {
    let h = thaw_base_seconds(fls_count);
    (rng.gen_range(h..=2.0 * h) * 1e6).round() as SimTime
}

/// Thaw: every FLS becomes its own swarm again without moving.
pub fn on_thaw(fls: &mut FlsState) {
    fls.swarm_id = fls.fid;
    fls.release();
    fls.r_complete = false;
    fls.oracle = fls.oracle_hw;
}
