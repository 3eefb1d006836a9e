//! The SwarMer per-FLS state machine.

mod anchor;
mod message;
mod ops;
mod state;

pub use anchor::{rank, select_anchor, AnchorPolicy, Candidate, MergeLimit};
pub use message::{Body, BusyRole, Message, HEADER_LEN};
pub use ops::{
    a_is_anchor, apply_move_and_rejoin, busy_neighbor_join, complete_localization,
    draw_thaw_delay, grant_lease, hold_lease, issue_challenge, lease_tick, on_challenge,
    on_deploy, on_thaw, release_lease, renew_lease, thaw_base_seconds, update_r_complete,
    yaw_correction, ChallengeReply, Discovered, LeaseConfig, LeaseTick, NeighborView, Rejoin,
};
pub use state::{Fid, FlsState, HeldLease, Role, SimTime, Status, SwarmId};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("fls {fid} received a challenge from its own swarm {swarm}")]
    SameSwarm { fid: Fid, swarm: SwarmId },
    #[error("fls {fid} is not localizing")]
    NotLocalizing { fid: Fid },
    #[error("anchor selection needs at least one candidate")]
    NoCandidates,
    #[error("two oracle swarms cannot merge")]
    DoubleOracle,
    #[error("malformed message: {0}")]
    Decode(String),
}
