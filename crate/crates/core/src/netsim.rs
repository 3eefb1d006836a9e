//! Simulated broadcast radio. Delivery is decided on ground-truth distance,
//! packets may be lost at the sender, the receiver or both, and deliveries
//! come out in a fixed total order so runs replay exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::protocol::{Body, Fid, Message, SimTime, SwarmId};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("range {range} exceeds transmitter power (max {max})")]
    RangeTooLarge { range: f64, max: f64 },
    #[error("invalid radio configuration: {0}")]
    BadRadio(String),
    #[error("loss rate {0} outside [0, 1]")]
    BadRate(f64),
}

/// Radio ranges in cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub default_range: f64,
    pub max_range: f64,
    /// Ranges tried in order when searching; ends at `max_range`.
    pub expand_schedule: Vec<f64>,
}

impl RadioConfig {
    /// Doubling schedule from `default_range` up to `max_range`.
    pub fn doubling(default_range: f64, max_range: f64) -> Result<Self, NetError> {
        if !(default_range > 0.0 && default_range <= max_range && max_range.is_finite()) {
            return Err(NetError::BadRadio(format!(
                "need 0 < default ({default_range}) <= max ({max_range})"
            )));
        }
        let mut schedule = Vec::new();
        let mut r = default_range;
        while r < max_range {
            schedule.push(r);
            r *= 2.0;
        }
        schedule.push(max_range);
        Ok(RadioConfig { default_range, max_range, expand_schedule: schedule })
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig::doubling(2.0, 128.0).expect("valid defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    #[default]
    None,
    Tx,
    Rx,
    Both,
}

impl FromStr for LossMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => LossMode::None,
            "tx" => LossMode::Tx,
            "rx" => LossMode::Rx,
            "both" => LossMode::Both,
            other => return Err(format!("unknown loss mode {other:?}")),
        })
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::None => "none",
            LossMode::Tx => "tx",
            LossMode::Rx => "rx",
            LossMode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossModel {
    pub mode: LossMode,
    pub rate: f64,
}

impl LossModel {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(NetError::BadRate(self.rate));
        }
        Ok(())
    }
}

/// One radio as the medium sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub fid: Fid,
    pub gt: Vec3,
}

/// A message queued for one recipient.
#[derive(Debug, Clone, PartialEq)]
pub struct InFlight {
    pub msg: Message,
    pub sender_pos: Vec3,
    pub range: f64,
    pub deliver_at: SimTime,
}

/// Ordering key of queued deliveries.
type Key = (SimTime, Fid, Fid, u64);

/// Counters kept by the medium.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetStats {
    pub broadcasts: u64,
    pub bytes_tx: u64,
    pub delivered: u64,
    pub dropped_tx: u64,
    pub dropped_rx: u64,
}

#[derive(Debug)]
pub struct Medium {
    radio: RadioConfig,
    loss: LossModel,
    latency: SimTime,
    rng: ChaCha8Rng,
    queue: BTreeMap<Key, InFlight>,
    stats: NetStats,
}

impl Medium {
    pub fn new(
        radio: RadioConfig,
        loss: LossModel,
        latency: SimTime,
        rng: ChaCha8Rng,
    ) -> Result<Self, NetError> {
        loss.validate()?;
        Ok(Medium { radio, loss, latency, rng, queue: BTreeMap::new(), stats: NetStats::default() })
    }

    pub fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Stations within `range` of `sender`, excluding the sender itself, in
    /// ascending FID order.
    pub fn in_range<'a>(
        sender: Station,
        range: f64,
        stations: impl IntoIterator<Item = &'a Station>,
    ) -> Vec<Fid> {
        let r2 = range * range;
        let mut out: Vec<Fid> = stations
            .into_iter()
            .filter(|s| s.fid != sender.fid && s.gt.distance_squared(sender.gt) <= r2)
            .map(|s| s.fid)
            .collect();
        out.sort_unstable();
        out
    }

    /// Sends `msg` to every station within `range`. Returns the recipients
    /// whose copy survived loss. Bytes are charged once per broadcast.
    pub fn broadcast<'a>(
        &mut self,
        now: SimTime,
        sender: Station,
        msg: Message,
        range: f64,
        stations: impl IntoIterator<Item = &'a Station>,
    ) -> Result<Vec<Fid>, NetError> {
        if range > self.radio.max_range {
            return Err(NetError::RangeTooLarge { range, max: self.radio.max_range });
        }
        self.stats.broadcasts += 1;
        self.stats.bytes_tx += msg.wire_len() as u64;
        let recipients = Self::in_range(sender, range, stations);
        let tx_loss = matches!(self.loss.mode, LossMode::Tx | LossMode::Both);
        let rx_loss = matches!(self.loss.mode, LossMode::Rx | LossMode::Both);
        if tx_loss && self.rng.gen_bool(self.loss.rate) {
            self.stats.dropped_tx += 1;
            return Ok(Vec::new());
        }
        let deliver_at = now + self.latency;
        let mut kept = Vec::with_capacity(recipients.len());
        for fid in recipients {
            if rx_loss && self.rng.gen_bool(self.loss.rate) {
                self.stats.dropped_rx += 1;
                continue;
            }
            let key = (deliver_at, fid, msg.sender_fid, msg.msg_id);
            self.queue.insert(
                key,
                InFlight { msg: msg.clone(), sender_pos: sender.gt, range, deliver_at },
            );
            kept.push(fid);
        }
        Ok(kept)
    }

    /// Time of the earliest queued delivery.
    pub fn next_delivery(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|k| k.0)
    }

    /// Removes and returns the next delivery due at or before `now`.
    pub fn pop_due(&mut self, now: SimTime) -> Option<(Fid, InFlight)> {
        let (&key, _) = self.queue.iter().next()?;
        if key.0 > now {
            return None;
        }
        let item = self.queue.remove(&key).expect("key just observed");
        self.stats.delivered += 1;
        Some((key.1, item))
    }

    /// Drops everything queued for `fid`, e.g. after it failed.
    pub fn purge_recipient(&mut self, fid: Fid) {
        self.queue.retain(|k, _| k.1 != fid);
    }
}

/// Drops challenges between members of the same swarm before they reach the
/// receiving agent.
pub fn wrapper_filter(receiver_swarm: SwarmId, msg: &Message) -> bool {
    !(matches!(msg.body, Body::Challenge { .. }) && msg.sender_swarm == receiver_swarm)
}

/// Accepts a message only if its id is above the sender's watermark, and
/// raises the watermark on acceptance.
pub fn dedup_filter(watermarks: &mut BTreeMap<Fid, u64>, msg: &Message) -> bool {
    let seen = watermarks.entry(msg.sender_fid).or_insert(0);
    if msg.msg_id > *seen {
        *seen = msg.msg_id;
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn medium(mode: LossMode, rate: f64) -> Medium {
        Medium::new(
            RadioConfig::doubling(2.0, 64.0).unwrap(),
            LossModel { mode, rate },
            1_000,
            stream(1, Stream::Loss),
        )
        .unwrap()
    }

    fn line(n: u32) -> Vec<Station> {
        (1..=n).map(|i| Station { fid: i, gt: Vec3::new(i as f64, 0.0, 0.0) }).collect()
    }

    fn msg(from: Fid, id: u64) -> Message {
        Message::new(from, from, id, Body::Thaw { swarm_id: from })
    }

    #[test]
    fn doubling_schedule() {
        let r = RadioConfig::doubling(2.0, 20.0).unwrap();
        assert_eq!(r.expand_schedule, vec![2.0, 4.0, 8.0, 16.0, 20.0]);
        assert!(RadioConfig::doubling(0.0, 1.0).is_err());
        assert!(RadioConfig::doubling(3.0, 1.0).is_err());
    }

    #[test]
    fn lossless_delivers_to_range() {
        let st = line(10);
        let mut m = medium(LossMode::None, 0.0);
        let got = m.broadcast(0, st[4], msg(5, 1), 2.0, &st).unwrap();
        assert_eq!(got, vec![3, 4, 6, 7]);
        assert_eq!(m.next_delivery(), Some(1_000));
        assert!(m.pop_due(999).is_none());
        let order: Vec<Fid> = std::iter::from_fn(|| m.pop_due(1_000)).map(|(f, _)| f).collect();
        assert_eq!(order, vec![3, 4, 6, 7]);
        assert!(m.broadcast(0, st[0], msg(1, 2), 65.0, &st).is_err());
    }

    #[test]
    fn certain_tx_loss_drops_everything() {
        let st = line(10);
        let mut m = medium(LossMode::Tx, 1.0);
        assert!(m.broadcast(0, st[0], msg(1, 1), 64.0, &st).unwrap().is_empty());
        assert_eq!(m.pending(), 0);
        assert_eq!(m.stats().bytes_tx, msg(1, 1).wire_len() as u64);
    }

    #[test]
    fn delivery_order_key() {
        let st = line(4);
        let mut m = medium(LossMode::None, 0.0);
        m.broadcast(5, st[3], msg(4, 9), 10.0, &st).unwrap();
        m.broadcast(0, st[2], msg(3, 2), 10.0, &st).unwrap();
        m.broadcast(0, st[1], msg(2, 1), 10.0, &st).unwrap();
        let seq: Vec<(Fid, Fid)> =
            std::iter::from_fn(|| m.pop_due(u64::MAX)).map(|(r, f)| (r, f.msg.sender_fid)).collect();
        assert_eq!(seq, vec![(1, 2), (1, 3), (2, 3), (3, 2), (4, 2), (4, 3), (1, 4), (2, 4), (3, 4)]);
    }

    #[test]
    fn rx_loss_rate_matches_binomial() {
        let st = line(3);
        let mut m = medium(LossMode::Rx, 0.1);
        let n = 100_000;
        let mut got = 0usize;
        for i in 0..n {
            got += m.broadcast(0, st[1], msg(2, i + 1), 1.0, &st).unwrap().len();
            m.purge_recipient(1);
            m.purge_recipient(3);
        }
        let frac = got as f64 / (2 * n) as f64;
        assert!((frac - 0.9).abs() < 0.005, "{frac}");
    }

    #[test]
    fn filters() {
        let ch = Message::new(1, 4, 1, Body::Challenge { targets: vec![2] });
        assert!(!wrapper_filter(4, &ch));
        assert!(wrapper_filter(5, &ch));
        let mr = Message::new(
            1,
            4,
            2,
            Body::MoveAndRejoin { old_swarm: 4, new_swarm: 2, v: Vec3::ZERO, phi: 0.0 },
        );
        assert!(wrapper_filter(4, &mr));

        let mut w = BTreeMap::new();
        let ids = |seq: &[u64], w: &mut BTreeMap<Fid, u64>| -> Vec<bool> {
            seq.iter().map(|&i| dedup_filter(w, &msg(7, i))).collect()
        };
        assert_eq!(ids(&[1, 2, 3], &mut w), vec![true; 3]);
        w.clear();
        assert_eq!(ids(&[1, 3, 2], &mut w), vec![true, true, false]);
        w.clear();
        assert_eq!(ids(&[3, 3], &mut w), vec![true, false]);
    }
}
