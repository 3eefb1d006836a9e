//! Protocol messages and their little-endian wire encoding.
//!
//! Header: kind (1) | sender_fid (4) | sender_swarm_id (4) | msg_id (8).

use crate::geometry::Vec3;

use super::{Fid, ProtocolError, SwarmId};

pub const HEADER_LEN: usize = 17;

/// Role announced by [`Body::SetBusy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusyRole {
    Anchor,
    Localizing,
    /// The merge is over; the swarm may become available again.
    Released,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// Addressed to one representative FLS per challenged swarm.
    Challenge { targets: Vec<Fid> },
    /// `anchor` tells the challenger whether the replier takes the anchor
    /// role. `lease_us` is the granted lease when it does.
    ChallengeAccept { target: Fid, anchor: bool, lease_us: u32 },
    ChallengeDecline { target: Fid },
    SetBusy { role: BusyRole },
    MoveAndRejoin { old_swarm: SwarmId, new_swarm: SwarmId, v: Vec3, phi: f64 },
    Unanchor { target: Fid },
    LeaseRenew { target: Fid },
    Thaw { swarm_id: SwarmId },
    ReplacementArrived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender_fid: Fid,
    pub sender_swarm: SwarmId,
    pub msg_id: u64,
    pub body: Body,
}

impl Body {
    pub fn kind(&self) -> u8 {
        match self {
            Body::Challenge { .. } => 0,
            Body::ChallengeAccept { .. } => 1,
            Body::ChallengeDecline { .. } => 2,
            Body::SetBusy { .. } => 3,
            Body::MoveAndRejoin { .. } => 4,
            Body::Unanchor { .. } => 5,
            Body::LeaseRenew { .. } => 6,
            Body::Thaw { .. } => 7,
            Body::ReplacementArrived => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Body::Challenge { .. } => "Challenge",
            Body::ChallengeAccept { .. } => "ChallengeAccept",
            Body::ChallengeDecline { .. } => "ChallengeDecline",
            Body::SetBusy { .. } => "SetBusy",
            Body::MoveAndRejoin { .. } => "MoveAndRejoin",
            Body::Unanchor { .. } => "Unanchor",
            Body::LeaseRenew { .. } => "LeaseRenew",
            Body::Thaw { .. } => "Thaw",
            Body::ReplacementArrived => "ReplacementArrived",
        }
    }

    /// The FLS a directed message is meant for, if any.
    pub fn target(&self) -> Option<Fid> {
        match *self {
            Body::ChallengeAccept { target, .. }
            | Body::ChallengeDecline { target }
            | Body::Unanchor { target }
            | Body::LeaseRenew { target } => Some(target),
            _ => None,
        }
    }

    fn body_len(&self) -> usize {
        match self {
            Body::Challenge { targets } => 2 + 4 * targets.len(),
            Body::ChallengeAccept { .. } => 9,
            Body::ChallengeDecline { .. } | Body::Unanchor { .. } | Body::LeaseRenew { .. } => 4,
            Body::SetBusy { .. } => 1,
            Body::MoveAndRejoin { .. } => 40,
            Body::Thaw { .. } => 4,
            Body::ReplacementArrived => 0,
        }
    }
}

impl Message {
    pub fn new(sender_fid: Fid, sender_swarm: SwarmId, msg_id: u64, body: Body) -> Self {
        Message { sender_fid, sender_swarm, msg_id, body }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.body.body_len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.push(self.body.kind());
        out.extend_from_slice(&self.sender_fid.to_le_bytes());
        out.extend_from_slice(&self.sender_swarm.to_le_bytes());
        out.extend_from_slice(&self.msg_id.to_le_bytes());
        match &self.body {
            Body::Challenge { targets } => {
                let n = u16::try_from(targets.len()).expect("at most 65535 challenge targets");
                out.extend_from_slice(&n.to_le_bytes());
                for t in targets {
                    out.extend_from_slice(&t.to_le_bytes());
                }
            }
            Body::ChallengeAccept { target, anchor, lease_us } => {
                out.extend_from_slice(&target.to_le_bytes());
                out.push(u8::from(*anchor));
                out.extend_from_slice(&lease_us.to_le_bytes());
            }
            Body::ChallengeDecline { target }
            | Body::Unanchor { target }
            | Body::LeaseRenew { target } => out.extend_from_slice(&target.to_le_bytes()),
            Body::SetBusy { role } => out.push(match role {
                BusyRole::Anchor => 0,
                BusyRole::Localizing => 1,
                BusyRole::Released => 2,
            }),
            Body::MoveAndRejoin { old_swarm, new_swarm, v, phi } => {
                out.extend_from_slice(&old_swarm.to_le_bytes());
                out.extend_from_slice(&new_swarm.to_le_bytes());
                for x in [v.l, v.h, v.d, *phi] {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            Body::Thaw { swarm_id } => out.extend_from_slice(&swarm_id.to_le_bytes()),
            Body::ReplacementArrived => {}
        }
        debug_assert_eq!(out.len(), self.wire_len());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Message, ProtocolError> {
        let mut r = Reader { buf, pos: 0 };
        let kind = r.u8()?;
        let sender_fid = r.u32()?;
        let sender_swarm = r.u32()?;
        let msg_id = r.u64()?;
        let body = match kind {
            0 => {
                let n = r.u16()? as usize;
                let targets = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
                Body::Challenge { targets }
            }
            1 => Body::ChallengeAccept { target: r.u32()?, anchor: r.u8()? != 0, lease_us: r.u32()? },
            2 => Body::ChallengeDecline { target: r.u32()? },
            3 => Body::SetBusy {
                role: match r.u8()? {
                    0 => BusyRole::Anchor,
                    1 => BusyRole::Localizing,
                    2 => BusyRole::Released,
                    b => return Err(ProtocolError::Decode(format!("bad busy role {b}"))),
                },
            },
            4 => Body::MoveAndRejoin {
                old_swarm: r.u32()?,
                new_swarm: r.u32()?,
                v: Vec3::new(r.f64()?, r.f64()?, r.f64()?),
                phi: r.f64()?,
            },
            5 => Body::Unanchor { target: r.u32()? },
            6 => Body::LeaseRenew { target: r.u32()? },
            7 => Body::Thaw { swarm_id: r.u32()? },
            8 => Body::ReplacementArrived,
            k => return Err(ProtocolError::Decode(format!("unknown kind {k}"))),
        };
        if r.pos != buf.len() {
            return Err(ProtocolError::Decode(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Message { sender_fid, sender_swarm, msg_id, body })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], ProtocolError> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| ProtocolError::Decode("truncated message".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice has length N"))
    }
    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}
