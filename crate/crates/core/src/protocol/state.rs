use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Unique FLS identifier, assigned at deployment starting from 1.
pub type Fid = u32;
/// Swarm identifier. A fresh FLS forms a swarm whose id equals its FID.
pub type SwarmId = u32;
/// Simulated time in microseconds.
pub type SimTime = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Available,
    Busy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    None,
    Anchor,
    Localizing,
}

/// Lease a localizing FLS holds on its anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeldLease {
    pub anchor: Fid,
    pub expires: SimTime,
    pub renew_at: SimTime,
}

/// Complete protocol state of one FLS.
#[derive(Debug, Clone, PartialEq)]
pub struct FlsState {
    pub fid: Fid,
    pub swarm_id: SwarmId,
    pub status: Status,
    pub role: Role,
    pub gt: Vec3,
    pub est: Vec3,
    /// Yaw in radians.
    pub orientation: f64,
    pub r_complete: bool,
    pub eta: usize,
    /// Ground-truth neighbors provisioned at deployment, nearest first.
    pub known_neighbors: Vec<(Fid, Vec3)>,
    /// Lease holder -> expiry.
    pub leases_granted: BTreeMap<Fid, SimTime>,
    pub lease_held: Option<HeldLease>,
    pub last_msg_id_seen: BTreeMap<Fid, u64>,
    /// Whether this FLS currently belongs to the oracle swarm.
    pub oracle: bool,
    /// Whether this FLS is the oracle itself.
    pub oracle_hw: bool,
    /// FID of the deployment's oracle FLS, if any. The oracle swarm never
    /// localizes, so its swarm id is always this FID.
    pub oracle_fid: Option<Fid>,
    next_msg_id: u64,
}

impl FlsState {
    pub fn new(fid: Fid, gt: Vec3, est: Vec3, eta: usize) -> Self {
        FlsState {
            fid,
            swarm_id: fid,
            status: Status::Available,
            role: Role::None,
            gt,
            est,
            orientation: 0.0,
            r_complete: false,
            eta,
            known_neighbors: Vec::new(),
            leases_granted: BTreeMap::new(),
            lease_held: None,
            last_msg_id_seen: BTreeMap::new(),
            oracle: false,
            oracle_hw: false,
            oracle_fid: None,
            next_msg_id: 0,
        }
    }

    /// Allocates the next outgoing message id. Ids start at 1.
    pub fn next_msg_id(&mut self) -> u64 {
        self.next_msg_id += 1;
        self.next_msg_id
    }

    pub fn is_available(&self) -> bool {
        self.status == Status::Available
    }

    pub fn is_busy(&self) -> bool {
        self.status == Status::Busy
    }

    /// Enters a merge role.
    pub fn set_role(&mut self, role: Role) {
        self.role = role;
        self.status = if role == Role::None { Status::Available } else { Status::Busy };
    }

    /// Leaves any merge role and drops lease bookkeeping.
    pub fn release(&mut self) {
        self.set_role(Role::None);
        self.leases_granted.clear();
        self.lease_held = None;
    }

    /// Checks the state invariants that hold at every instant.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.est.is_finite() || !self.gt.is_finite() {
            return Err(format!("fls {} has non-finite coordinates", self.fid));
        }
        if self.role != Role::None && self.status != Status::Busy {
            return Err(format!("fls {} holds role {:?} while available", self.fid, self.role));
        }
        if !self.leases_granted.is_empty() && self.role != Role::Anchor {
            return Err(format!("fls {} granted leases without being an anchor", self.fid));
        }
        Ok(())
    }
}
