//! Discrete-event simulator. FLSs challenge on jittered λ timers, talk only
//! through the lossy medium, hold leases, thaw on quiescence timers and can
//! fail and be replaced.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{secs, RunConfig, ThawSetting};
use super::deploy::deploy;
use super::kinematics::{travel_time, VelocityProfile};
use super::metrics::{min_avg_max, RoundMetrics};
use super::world::{set_distances, MovePlan, World};
use super::{EngineError, RunCounters, RunOutcome, RunStatus};
use crate::geometry::{DeadReckoning, Dim, PointCloud, Vec3};
use crate::netsim::{dedup_filter, wrapper_filter, Medium, Station};
use crate::protocol::{
    busy_neighbor_join, grant_lease, hold_lease, issue_challenge, lease_tick, on_challenge, on_deploy, on_thaw,
    release_lease, renew_lease, select_anchor, thaw_base_seconds, update_r_complete, Body, BusyRole, Candidate,
    ChallengeReply, Discovered, Fid, FlsState, LeaseConfig, Message, NeighborView, Role, SimTime, Status, SwarmId,
};
use crate::rng::{stream, Stream};

/// Sub-samples per metrics window.
const SUBSAMPLES: u64 = 10;
/// Period of the lease and timeout sweep.
const SWEEP: SimTime = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Sample,
    Sweep,
    Failure,
    Tick(Fid),
    ChallengeTimeout(Fid, u64),
    LocalizeDone(Fid, u64),
    ThawTimer(Fid),
    Replacement(usize),
}

#[derive(Debug)]
struct Pending {
    seq: u64,
    targets: Vec<Fid>,
    /// `(fid, replier is anchor)` for every accept received.
    accepts: Vec<(Fid, bool)>,
}

#[derive(Debug)]
struct Flight {
    seq: u64,
    anchor: Fid,
    anchor_swarm: SwarmId,
    plan: MovePlan,
    /// Whether the anchor granted a lease and expects an Unanchor.
    leased: bool,
}

#[derive(Debug, Default)]
struct Agent {
    alive: bool,
    /// Index of the ground-truth point this FLS illuminates.
    slot: usize,
    pending: Option<Pending>,
    flight: Option<Flight>,
    moving_until: SimTime,
    busy_since: SimTime,
    waiting_since: Option<SimTime>,
    thaw_deadline: SimTime,
    thaw_event_at: SimTime,
}

#[derive(Debug, Default)]
struct Window {
    d_loc: f64,
    d_follow: f64,
    localizations: usize,
    served: BTreeMap<Fid, usize>,
    thaws: usize,
    leases_expired: usize,
    loc_samples: Vec<usize>,
    bytes_at_start: u64,
}

struct Sim<'c> {
    cfg: &'c RunConfig,
    w: World,
    agents: Vec<Agent>,
    medium: Medium,
    queue: BTreeMap<(SimTime, u64), Event>,
    seq: u64,
    now: SimTime,
    end: SimTime,
    stations: Vec<Station>,
    /// Per slot, every other slot by ascending ground-truth distance.
    by_distance: Vec<Vec<(f64, usize)>>,
    owner: Vec<Fid>,
    schedule: Vec<f64>,
    max_range: f64,
    lease: LeaseConfig,
    latency: SimTime,
    lambda: SimTime,
    profile: VelocityProfile,
    jitter_rng: ChaCha8Rng,
    thaw_rng: ChaCha8Rng,
    failure_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    replace_dr: DeadReckoning,
    origin: Vec3,
    thaw_h: f64,
    thaw_repeat: f64,
    sizes: Option<BTreeMap<SwarmId, usize>>,
    window: Window,
    sample_period: SimTime,
    samples: u64,
    trace: Vec<RoundMetrics>,
    counters: RunCounters,
    /// Armed targeted kills, earliest first.
    kill_after: Vec<SimTime>,
}

/// Fault injection on top of the random failure process: kills the first
/// FLS that starts a leased localization at or after `after_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetedKill {
    pub after_s: f64,
}

pub fn run_events(cloud: &PointCloud, cfg: &RunConfig) -> Result<RunOutcome, EngineError> {
    run_events_with(cloud, cfg, &[])
}

pub fn run_events_with(cloud: &PointCloud, cfg: &RunConfig, kills: &[TargetedKill]) -> Result<RunOutcome, EngineError> {
    let dep = deploy(cloud, cfg)?;
    let f0 = dep.fls.len();
    let mut origin = cfg.dispatcher_origin;
    if dep.dim == Dim::Two {
        origin.d = 0.0;
    }
    let w = World::new(dep, cfg)?;
    let radio = cfg.radio()?;
    let by_distance = (0..f0)
        .map(|i| {
            let mut v: Vec<(f64, usize)> = (0..f0)
                .filter(|&j| j != i)
                .map(|j| (w.gt[i].distance(w.gt[j]), j))
                .filter(|&(d, _)| d <= radio.max_range)
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v
        })
        .collect();
    let thaw_h = match cfg.thaw {
        ThawSetting::Auto => thaw_base_seconds(f0),
        ThawSetting::Fixed(h) => h,
    };
    let mut sim = Sim {
        cfg,
        agents: (0..f0).map(|slot| Agent { alive: true, slot, ..Default::default() }).collect(),
        medium: Medium::new(radio.clone(), cfg.loss, secs(cfg.latency_ms / 1e3), stream(cfg.seed, Stream::Loss))?,
        queue: BTreeMap::new(),
        seq: 0,
        now: 0,
        end: secs(cfg.duration_s),
        stations: Vec::new(),
        by_distance,
        owner: (0..f0 as Fid).collect(),
        schedule: radio.expand_schedule.clone(),
        max_range: radio.max_range,
        lease: cfg.lease_config(),
        latency: secs(cfg.latency_ms / 1e3),
        lambda: secs(cfg.lambda_ms / 1e3).max(1),
        profile: VelocityProfile { v_max: cfg.v_max, a_max: cfg.a_max },
        jitter_rng: stream(cfg.seed, Stream::Jitter),
        thaw_rng: stream(cfg.seed, Stream::Thaw),
        failure_rng: stream(cfg.seed, Stream::Failure),
        policy_rng: stream(cfg.seed, Stream::Policy),
        replace_dr: DeadReckoning::new(cfg.epsilon_deg, stream(cfg.seed, Stream::Replacement))?,
        origin,
        thaw_h,
        // about log2 F echoes per thaw so a lossy receiver rarely misses all
        thaw_repeat: (thaw_base_seconds(f0) / f0 as f64).min(1.0),
        sizes: None,
        window: Window::default(),
        sample_period: (secs(cfg.hd_sample_ms / 1e3) / SUBSAMPLES).max(1),
        samples: 0,
        trace: Vec::new(),
        counters: RunCounters::default(),
        kill_after: {
            let mut k: Vec<SimTime> = kills.iter().map(|k| secs(k.after_s)).collect();
            k.sort_unstable();
            k
        },
        w,
    };
    sim.start()?;
    sim.run()?;
    Ok(sim.finish())
}

impl<'c> Sim<'c> {
    fn push(&mut self, at: SimTime, ev: Event) {
        self.seq += 1;
        self.queue.insert((at, self.seq), ev);
    }

    fn rebuild_stations(&mut self) {
        self.stations = self
            .w
            .fls
            .iter()
            .zip(&self.agents)
            .filter(|(_, a)| a.alive)
            .map(|(f, _)| Station { fid: f.fid, gt: f.gt })
            .collect();
    }

    fn alive(&self, fid: Fid) -> bool {
        self.agents.get(fid as usize).is_some_and(|a| a.alive)
    }

    fn start(&mut self) -> Result<(), EngineError> {
        self.rebuild_stations();
        for fid in 0..self.w.fls.len() as Fid {
            let first = self.jitter_rng.gen_range(0..self.lambda);
            self.push(first, Event::Tick(fid));
            self.reset_thaw(fid);
        }
        self.push(self.sample_period, Event::Sample);
        self.push(SWEEP, Event::Sweep);
        self.schedule_failure();
        let hd = self.hd()?;
        self.trace.push(RoundMetrics { hd, swarm_count: self.swarm_count(), ..Default::default() });
        self.note_single_swarm(0.0);
        let lit = self.lit();
        self.w.maybe_snapshot(0, false, |i| lit[i]);
        self.window.bytes_at_start = self.medium.stats().bytes_tx;
        Ok(())
    }

    fn run(&mut self) -> Result<(), EngineError> {
        loop {
            let next_ev = self.queue.keys().next().map(|k| k.0);
            let next_net = self.medium.next_delivery();
            let t = match (next_ev, next_net) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => break,
            };
            if t > self.end {
                break;
            }
            self.now = t;
            if next_net == Some(t) {
                let (to, item) = self.medium.pop_due(t).expect("delivery due");
                self.deliver(to, item.msg)?;
            } else {
                let (&key, _) = self.queue.iter().next().expect("event due");
                let ev = self.queue.remove(&key).expect("key just observed");
                self.handle(ev)?;
            }
        }
        let last_t = self.trace.last().map_or(0.0, |r| r.round_or_time);
        if (self.end as f64 / 1e6) > last_t {
            self.now = self.end;
            self.close_window()?;
        }
        Ok(())
    }

    fn finish(mut self) -> RunOutcome {
        let lit = self.lit();
        let idx = self.trace.len() - 1;
        if self.w.snapshots.last().map_or(true, |s| s.index != idx) {
            self.w.maybe_snapshot(idx, true, |i| lit[i]);
        }
        let final_hd = self.trace.last().map_or(0.0, |r| r.hd);
        let th = self.cfg.hd_stop_threshold;
        let to_threshold = self.trace.iter().find(|r| r.hd < th).map(|r| r.round_or_time);
        RunOutcome {
            status: if final_hd < th { RunStatus::Converged } else { RunStatus::LimitReached },
            final_hd,
            to_threshold,
            snapshots: std::mem::take(&mut self.w.snapshots),
            deployed: self.w.deployed.clone(),
            final_est: self.w.est(),
            final_swarm_ids: self.w.fls.iter().map(|f| f.swarm_id).collect(),
            alive: lit,
            gt: self.w.gt.clone(),
            oracle: self.w.oracle,
            planar: self.w.dim == Dim::Two,
            counters: self.counters,
            trace: self.trace,
        }
    }

    fn lit(&self) -> Vec<bool> {
        self.agents.iter().map(|a| a.alive).collect()
    }

    fn hd(&mut self) -> Result<f64, EngineError> {
        let lit = self.lit();
        self.w.hd_where(|i| lit[i])
    }

    fn swarm_count(&self) -> usize {
        let mut ids: Vec<SwarmId> =
            self.w.fls.iter().zip(&self.agents).filter(|(_, a)| a.alive).map(|(f, _)| f.swarm_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    fn note_single_swarm(&mut self, t: f64) {
        if self.counters.first_single_swarm.is_none() && self.swarm_count() == 1 {
            self.counters.first_single_swarm = Some(t);
        }
    }

    fn sizes(&mut self) -> &BTreeMap<SwarmId, usize> {
        if self.sizes.is_none() {
            let mut m = BTreeMap::new();
            for (f, a) in self.w.fls.iter().zip(&self.agents) {
                if a.alive {
                    *m.entry(f.swarm_id).or_default() += 1;
                }
            }
            self.sizes = Some(m);
        }
        self.sizes.as_ref().expect("just filled")
    }

    fn range_to(&self, a: Fid, b: Fid) -> f64 {
        let d = self.w.fls[a as usize].gt.distance(self.w.fls[b as usize].gt);
        (d * (1.0 + 1e-9) + 1e-9).min(self.max_range)
    }

    fn send(&mut self, from: Fid, body: Body, range: f64) -> Result<(), EngineError> {
        let f = &mut self.w.fls[from as usize];
        let id = f.next_msg_id();
        let msg = Message::new(from, f.swarm_id, id, body);
        let st = Station { fid: from, gt: f.gt };
        self.medium.broadcast(self.now, st, msg, range.min(self.max_range), &self.stations)?;
        Ok(())
    }

    fn to_swarm(&mut self, from: Fid, body: Body) -> Result<(), EngineError> {
        self.send(from, body, self.max_range)
    }

    fn reset_thaw(&mut self, fid: Fid) {
        let h = self.thaw_h;
        let delay = secs(self.thaw_rng.gen_range(h..=2.0 * h)).max(1);
        let deadline = self.now + delay;
        let a = &mut self.agents[fid as usize];
        a.thaw_deadline = deadline;
        if a.thaw_event_at <= self.now || deadline < a.thaw_event_at {
            a.thaw_event_at = deadline;
            self.push(deadline, Event::ThawTimer(fid));
        }
    }

    fn schedule_failure(&mut self) {
        let alive = self.agents.iter().filter(|a| a.alive).count();
        let rate = self.cfg.failure_rate_per_fls_per_s * alive as f64;
        if rate <= 0.0 {
            return;
        }
        let u: f64 = self.failure_rng.gen_range(f64::MIN_POSITIVE..1.0);
        let wait = secs(-u.ln() / rate).max(1);
        self.push(self.now + wait, Event::Failure);
    }

    fn idle(&self, fid: Fid) -> bool {
        let a = &self.agents[fid as usize];
        a.alive && a.pending.is_none() && a.flight.is_none() && self.now >= a.moving_until
    }

    fn handle(&mut self, ev: Event) -> Result<(), EngineError> {
        match ev {
            Event::Sample => self.sample()?,
            Event::Sweep => self.sweep()?,
            Event::Failure => self.fail()?,
            Event::Tick(fid) => {
                if self.alive(fid) {
                    let j = self.lambda / 10;
                    let next = self.lambda - j + self.jitter_rng.gen_range(0..=2 * j);
                    self.push(self.now + next.max(1), Event::Tick(fid));
                    self.tick(fid)?;
                }
            }
            Event::ChallengeTimeout(fid, seq) => self.resolve_challenge(fid, seq)?,
            Event::LocalizeDone(fid, seq) => self.localize_done(fid, seq)?,
            Event::ThawTimer(fid) => self.thaw_timer(fid)?,
            Event::Replacement(slot) => self.replace(slot)?,
        }
        Ok(())
    }

    fn sample(&mut self) -> Result<(), EngineError> {
        let localizing = self
            .w
            .fls
            .iter()
            .zip(&self.agents)
            .filter(|(f, a)| a.alive && f.role == Role::Localizing)
            .count();
        self.window.loc_samples.push(localizing);
        self.samples += 1;
        if self.samples % SUBSAMPLES == 0 {
            self.close_window()?;
        }
        self.push(self.now + self.sample_period, Event::Sample);
        Ok(())
    }

    fn close_window(&mut self) -> Result<(), EngineError> {
        let win = std::mem::take(&mut self.window);
        let bytes = self.medium.stats().bytes_tx;
        self.window.bytes_at_start = bytes;
        let t = self.now as f64 / 1e6;
        let mut row = RoundMetrics {
            round_or_time: t,
            hd: self.hd()?,
            swarm_count: self.swarm_count(),
            bytes_tx: bytes - win.bytes_at_start,
            localizations: win.localizations,
            anchors_served: win.served.len(),
            thawed_swarms: win.thaws,
            leases_expired: win.leases_expired,
            ..Default::default()
        };
        let (lo, avg, hi) = min_avg_max(&win.loc_samples);
        row.localizing_min = lo;
        row.localizing_avg = avg;
        row.localizing_max = hi;
        row.anchor_count =
            self.w.fls.iter().zip(&self.agents).filter(|(f, a)| a.alive && f.role == Role::Anchor).count();
        let served: Vec<usize> = win.served.values().copied().collect();
        let (lo, avg, hi) = min_avg_max(&served);
        row.merged_swarms_per_anchor_min = lo;
        row.merged_swarms_per_anchor_avg = avg;
        row.merged_swarms_per_anchor_max = hi;
        set_distances(&mut row, win.d_loc, win.d_follow);
        self.trace.push(row);
        self.note_single_swarm(t);
        let idx = self.trace.len() - 1;
        let lit = self.lit();
        self.w.maybe_snapshot(idx, false, |i| lit[i]);
        Ok(())
    }

    /// Lease renewals and expiries, plus timeouts for FLSs left busy by
    /// lost messages.
    fn sweep(&mut self) -> Result<(), EngineError> {
        self.push(self.now + SWEEP, Event::Sweep);
        let delta = self.lease.delta;
        for i in 0..self.w.fls.len() {
            if !self.agents[i].alive {
                continue;
            }
            let fid = i as Fid;
            let tick = lease_tick(&mut self.w.fls[i], self.now, &self.lease);
            if let Some(anchor) = tick.renew {
                let r = self.range_to(fid, anchor);
                self.send(fid, Body::LeaseRenew { target: anchor }, r)?;
            }
            self.window.leases_expired += tick.expired.len();
            self.counters.leases_expired_on_failure +=
                tick.expired.iter().filter(|&&h| !self.alive(h)).count();
            if tick.unanchored {
                self.to_swarm(fid, Body::SetBusy { role: BusyRole::Released })?;
            }
            let f = &self.w.fls[i];
            let a = &self.agents[i];
            if f.status == Status::Busy && f.role == Role::None && self.now >= a.busy_since + 2 * delta {
                self.w.fls[i].status = Status::Available;
            }
            let f = &self.w.fls[i];
            let a = &self.agents[i];
            if f.role == Role::Localizing
                && f.lease_held.is_none()
                && a.flight.is_none()
                && a.pending.is_none()
                && a.waiting_since.is_some_and(|t| self.now >= t + delta)
            {
                self.w.fls[i].release();
                self.agents[i].waiting_since = None;
                self.to_swarm(fid, Body::SetBusy { role: BusyRole::Released })?;
            }
        }
        Ok(())
    }

    fn tick(&mut self, fid: Fid) -> Result<(), EngineError> {
        let i = fid as usize;
        if !self.idle(fid) || !self.w.fls[i].is_available() {
            return Ok(());
        }
        let my_swarm = self.w.fls[i].swarm_id;
        if self.sizes().get(&my_swarm).copied() == Some(1) {
            let views: Vec<NeighborView> = self.w.fls[i]
                .known_neighbors
                .iter()
                .filter(|(n, _)| self.alive(*n))
                .map(|&(n, _)| {
                    let f = &self.w.fls[n as usize];
                    NeighborView { fid: n, swarm_id: f.swarm_id, status: f.status }
                })
                .collect();
            if let Some(n) = busy_neighbor_join(&self.w.fls[i], &views) {
                self.w.fls[i].set_role(Role::Localizing);
                return self.start_localization(fid, n, false);
            }
        }
        let eta = self.w.fls[i].eta.max(1);
        let observed: Vec<(Fid, Option<(SwarmId, Vec3)>)> = self.w.fls[i]
            .known_neighbors
            .iter()
            .take(eta)
            .map(|&(n, _)| {
                let f = &self.w.fls[n as usize];
                (n, self.alive(n).then_some((f.swarm_id, f.est)))
            })
            .collect();
        let lookup = |f: Fid| observed.iter().find(|o| o.0 == f).and_then(|o| o.1);
        if update_r_complete(&mut self.w.fls[i], self.cfg.match_tolerance, lookup) {
            return Ok(());
        }
        let Some((range, found)) = self.discover(fid) else {
            return Ok(());
        };
        let targets = issue_challenge(&self.w.fls[i], &found, self.cfg.m, self.cfg.anchor_policy, &mut self.policy_rng);
        if targets.is_empty() {
            return Ok(());
        }
        self.send(fid, Body::Challenge { targets: targets.clone() }, range)?;
        self.seq += 1;
        let seq = self.seq;
        self.agents[i].pending = Some(Pending { seq, targets, accepts: Vec::new() });
        self.push(self.now + 2 * self.latency + 1, Event::ChallengeTimeout(fid, seq));
        Ok(())
    }

    /// Radio-range expansion: the smallest range step that reaches another
    /// swarm, and everything foreign within it.
    fn discover(&mut self, fid: Fid) -> Option<(f64, Vec<Discovered>)> {
        let i = fid as usize;
        let slot = self.agents[i].slot;
        let me = self.w.fls[i].swarm_id;
        let mut first = None;
        for &(d, s) in &self.by_distance[slot] {
            let o = self.owner[s];
            if self.alive(o) && self.w.fls[o as usize].swarm_id != me {
                first = Some(d);
                break;
            }
        }
        let first = first?;
        let range = self.schedule.iter().copied().find(|&r| r >= first)?;
        self.sizes();
        let sizes = self.sizes.as_ref().expect("filled");
        let found = self.by_distance[slot]
            .iter()
            .take_while(|&&(d, _)| d <= range)
            .map(|&(d, s)| (d, self.owner[s]))
            .filter(|&(_, o)| self.agents[o as usize].alive && self.w.fls[o as usize].swarm_id != me)
            .map(|(distance, o)| {
                let f = &self.w.fls[o as usize];
                Discovered {
                    fid: o,
                    swarm_id: f.swarm_id,
                    swarm_size: sizes.get(&f.swarm_id).copied().unwrap_or(1),
                    oracle: f.oracle,
                    distance,
                }
            })
            .collect();
        Some((range, found))
    }

    fn resolve_challenge(&mut self, fid: Fid, seq: u64) -> Result<(), EngineError> {
        let i = fid as usize;
        if !self.agents[i].alive || self.agents[i].pending.as_ref().map_or(true, |p| p.seq != seq) {
            return Ok(());
        }
        let p = self.agents[i].pending.take().expect("checked");
        if p.accepts.is_empty() {
            return Ok(());
        }
        if !self.w.fls[i].is_available() {
            for &(t, _) in &p.accepts {
                let r = self.range_to(fid, t);
                self.send(fid, Body::Unanchor { target: t }, r)?;
            }
            return Ok(());
        }
        let anchors: Vec<Fid> = p.accepts.iter().filter(|a| a.1).map(|a| a.0).collect();
        if !anchors.is_empty() {
            let sizes = self.sizes().clone();
            let cands: Vec<Candidate> = anchors
                .iter()
                .map(|&a| {
                    let f = &self.w.fls[a as usize];
                    Candidate {
                        fid: a,
                        swarm_id: f.swarm_id,
                        swarm_size: sizes.get(&f.swarm_id).copied().unwrap_or(1),
                        oracle: f.oracle,
                        challenger: false,
                    }
                })
                .collect();
            let chosen = select_anchor(&cands, self.cfg.anchor_policy, &mut self.policy_rng)?;
            for &(t, _) in p.accepts.iter().filter(|a| a.0 != chosen) {
                let r = self.range_to(fid, t);
                self.send(fid, Body::Unanchor { target: t }, r)?;
            }
            self.w.fls[i].set_role(Role::Localizing);
            hold_lease(&mut self.w.fls[i], chosen, self.now, &self.lease);
            self.to_swarm(fid, Body::SetBusy { role: BusyRole::Localizing })?;
            self.reset_thaw(fid);
            return self.start_localization(fid, chosen, true);
        }
        // every acceptor localizes against the challenger
        self.w.fls[i].set_role(Role::Anchor);
        self.to_swarm(fid, Body::SetBusy { role: BusyRole::Anchor })?;
        let lease_us = self.lease.delta.min(u32::MAX as u64) as u32;
        for &(t, _) in &p.accepts {
            grant_lease(&mut self.w.fls[i], t, self.now, &self.lease);
            let r = self.range_to(fid, t);
            self.send(fid, Body::ChallengeAccept { target: t, anchor: true, lease_us }, r)?;
        }
        self.reset_thaw(fid);
        let _ = p.targets;
        Ok(())
    }

    fn start_localization(&mut self, fid: Fid, anchor: Fid, leased: bool) -> Result<(), EngineError> {
        let (l, a) = (fid as usize, anchor as usize);
        let plan = self.w.measure(l, a);
        let cell = self.cfg.cell_size_m;
        let dt = travel_time(plan.staging_distance, self.profile, cell) + travel_time(plan.v_flight, self.profile, cell);
        self.seq += 1;
        let seq = self.seq;
        let anchor_swarm = self.w.fls[a].swarm_id;
        self.agents[l].flight = Some(Flight { seq, anchor, anchor_swarm, plan, leased });
        self.agents[l].waiting_since = None;
        self.push(self.now + secs(dt).max(1), Event::LocalizeDone(fid, seq));
        if leased && self.kill_after.first().is_some_and(|&t| self.now >= t) {
            self.kill_after.remove(0);
            self.kill(l)?;
        }
        Ok(())
    }

    fn localize_done(&mut self, fid: Fid, seq: u64) -> Result<(), EngineError> {
        let l = fid as usize;
        if !self.agents[l].alive || self.agents[l].flight.as_ref().map_or(true, |f| f.seq != seq) {
            return Ok(());
        }
        let fl = self.agents[l].flight.take().expect("checked");
        self.sizes = None;
        self.window.d_loc += fl.plan.flown();
        let f = &self.w.fls[l];
        if f.role == Role::Localizing && f.swarm_id != fl.anchor_swarm {
            let (_, mr, un) = self.w.finish(l, fl.anchor, fl.anchor_swarm, &fl.plan, self.now)?;
            self.to_swarm(fid, mr)?;
            if fl.leased {
                let r = self.range_to(fid, fl.anchor);
                self.send(fid, un, r)?;
            }
            self.window.localizations += 1;
            *self.window.served.entry(fl.anchor).or_default() += 1;
        } else {
            // thawed or re-homed mid-flight: the flight still happened
            self.w.fls[l].est = fl.plan.pos;
            if self.w.fls[l].role == Role::Localizing {
                self.w.fls[l].release();
            }
        }
        self.reset_thaw(fid);
        Ok(())
    }

    fn thaw_timer(&mut self, fid: Fid) -> Result<(), EngineError> {
        let i = fid as usize;
        let a = &self.agents[i];
        if !a.alive || a.thaw_event_at != self.now {
            return Ok(());
        }
        if self.now < a.thaw_deadline {
            let d = a.thaw_deadline;
            self.agents[i].thaw_event_at = d;
            self.push(d, Event::ThawTimer(fid));
            return Ok(());
        }
        if self.idle(fid) && self.w.fls[i].is_available() {
            let swarm_id = self.w.fls[i].swarm_id;
            self.to_swarm(fid, Body::Thaw { swarm_id })?;
            on_thaw(&mut self.w.fls[i]);
            self.sizes = None;
            self.window.thaws += 1;
        }
        self.reset_thaw(fid);
        Ok(())
    }

    fn fail(&mut self) -> Result<(), EngineError> {
        let alive: Vec<usize> = (0..self.agents.len()).filter(|&i| self.agents[i].alive).collect();
        if alive.is_empty() {
            return Ok(());
        }
        let victim = alive[self.failure_rng.gen_range(0..alive.len())];
        self.kill(victim)?;
        self.schedule_failure();
        Ok(())
    }

    fn kill(&mut self, victim: usize) -> Result<(), EngineError> {
        if self.w.fls[victim].role == Role::Localizing {
            self.counters.killed_localizing += 1;
        }
        log::info!("t={:.3}s: fls {} failed", self.now as f64 / 1e6, victim);
        let a = &mut self.agents[victim];
        a.alive = false;
        a.pending = None;
        a.flight = None;
        self.counters.failures += 1;
        self.medium.purge_recipient(victim as Fid);
        self.rebuild_stations();
        self.sizes = None;
        let slot = self.agents[victim].slot;
        let leg = self.origin.distance(self.w.gt[victim]);
        let fly = travel_time(leg, self.profile, self.cfg.cell_size_m);
        self.push(self.now + secs(self.cfg.replacement_delay_s + fly).max(1), Event::Replacement(slot));
        Ok(())
    }

    fn replace(&mut self, slot: usize) -> Result<(), EngineError> {
        let dead = self.owner[slot];
        let fid = self.w.fls.len() as Fid;
        let gt = self.w.gt[dead as usize];
        let est = self.replace_dr.reckon(self.origin, gt, self.w.dim);
        let mut f = FlsState::new(fid, gt, est, self.cfg.eta);
        f.known_neighbors = self.w.fls[dead as usize].known_neighbors.clone();
        f.oracle_fid = self.w.oracle;
        on_deploy(&mut f);
        for other in self.w.fls.iter_mut() {
            for n in other.known_neighbors.iter_mut() {
                if n.0 == dead {
                    n.0 = fid;
                }
            }
        }
        self.w.fls.push(f);
        self.w.gt.push(gt);
        self.w.deployed.push(est);
        self.agents.push(Agent { alive: true, slot, ..Default::default() });
        self.owner[slot] = fid;
        self.rebuild_stations();
        self.sizes = None;
        self.counters.replacements += 1;
        self.counters.replacement_arrivals.push(self.now as f64 / 1e6);
        log::info!("t={:.3}s: replacement {} arrived for {}", self.now as f64 / 1e6, fid, dead);
        self.to_swarm(fid, Body::ReplacementArrived)?;
        let first = self.jitter_rng.gen_range(0..self.lambda);
        self.push(self.now + first, Event::Tick(fid));
        self.reset_thaw(fid);
        Ok(())
    }

    fn deliver(&mut self, to: Fid, msg: Message) -> Result<(), EngineError> {
        let r = to as usize;
        if !self.agents[r].alive {
            return Ok(());
        }
        if !wrapper_filter(self.w.fls[r].swarm_id, &msg) || !dedup_filter(&mut self.w.fls[r].last_msg_id_seen, &msg) {
            return Ok(());
        }
        let from = msg.sender_fid;
        let for_me = msg.body.target().map_or(true, |t| t == to);
        if !for_me {
            if matches!(msg.body, Body::Challenge { .. }) {
                self.reset_thaw(to);
            }
            return Ok(());
        }
        match msg.body {
            Body::Challenge { ref targets } => {
                self.reset_thaw(to);
                if targets.contains(&to) {
                    self.on_challenge_msg(to, from, msg.sender_swarm)?;
                }
            }
            Body::ChallengeAccept { anchor, .. } => {
                let a = &mut self.agents[r];
                match a.pending.as_mut() {
                    Some(p) if p.targets.contains(&from) => p.accepts.push((from, anchor)),
                    _ => {
                        let f = &self.w.fls[r];
                        let waiting = f.role == Role::Localizing && f.lease_held.is_none() && a.flight.is_none();
                        if anchor && waiting {
                            hold_lease(&mut self.w.fls[r], from, self.now, &self.lease);
                            self.reset_thaw(to);
                            self.start_localization(to, from, true)?;
                        } else if anchor {
                            let rg = self.range_to(to, from);
                            self.send(to, Body::Unanchor { target: from }, rg)?;
                        }
                    }
                }
            }
            Body::ChallengeDecline { .. } => {}
            Body::SetBusy { role } => {
                let f = &mut self.w.fls[r];
                if msg.sender_swarm == f.swarm_id && f.role == Role::None {
                    match role {
                        BusyRole::Anchor | BusyRole::Localizing => {
                            f.status = Status::Busy;
                            self.agents[r].busy_since = self.now;
                        }
                        BusyRole::Released => f.status = Status::Available,
                    }
                    self.reset_thaw(to);
                }
            }
            Body::MoveAndRejoin { old_swarm, new_swarm, v, phi } => {
                let f = &self.w.fls[r];
                if f.role == Role::None && self.agents[r].flight.is_none() && f.swarm_id == old_swarm {
                    let step = super::world::Localized { old_swarm, new_swarm, swarm_vector: v, phi, flown: 0.0 };
                    if let Some(moved) = self.w.follow(r, &step) {
                        self.window.d_follow += moved;
                        let dt = travel_time(moved, self.profile, self.cfg.cell_size_m);
                        self.agents[r].moving_until = self.now + secs(dt);
                        self.agents[r].pending = None;
                        self.sizes = None;
                        self.reset_thaw(to);
                    }
                }
            }
            Body::Unanchor { .. } => {
                let f = &self.w.fls[r];
                if f.role == Role::Anchor {
                    if release_lease(&mut self.w.fls[r], from) {
                        self.to_swarm(to, Body::SetBusy { role: BusyRole::Released })?;
                    }
                } else if f.role == Role::Localizing && f.lease_held.is_none() && self.agents[r].flight.is_none() {
                    // the challenger went elsewhere
                    self.w.fls[r].release();
                    self.agents[r].waiting_since = None;
                    self.to_swarm(to, Body::SetBusy { role: BusyRole::Released })?;
                }
            }
            Body::LeaseRenew { .. } => {
                renew_lease(&mut self.w.fls[r], from, self.now, &self.lease);
            }
            Body::Thaw { swarm_id } => {
                if self.w.fls[r].swarm_id == swarm_id {
                    on_thaw(&mut self.w.fls[r]);
                    if self.thaw_rng.gen_bool(self.thaw_repeat) {
                        self.to_swarm(to, Body::Thaw { swarm_id })?;
                    }
                    self.agents[r].pending = None;
                    self.agents[r].waiting_since = None;
                    self.sizes = None;
                    self.reset_thaw(to);
                }
            }
            Body::ReplacementArrived => {}
        }
        Ok(())
    }

    fn on_challenge_msg(&mut self, to: Fid, from: Fid, sender_swarm: SwarmId) -> Result<(), EngineError> {
        let r = to as usize;
        let f = &self.w.fls[r];
        if f.swarm_id == sender_swarm {
            return Ok(());
        }
        let rg = self.range_to(to, from);
        let busy_gate = self.agents[r].pending.is_some()
            || self.agents[r].flight.is_some()
            || self.now < self.agents[r].moving_until;
        // members learn the oracle's swarm from its FID
        let sender_oracle = f.oracle_fid == Some(sender_swarm);
        let was_available = f.is_available();
        let reply = if busy_gate { ChallengeReply::Decline } else { on_challenge(&mut self.w.fls[r], sender_swarm, sender_oracle)? };
        match reply {
            ChallengeReply::Accept { role: Role::Anchor } => {
                grant_lease(&mut self.w.fls[r], from, self.now, &self.lease);
                let lease_us = self.lease.delta.min(u32::MAX as u64) as u32;
                self.send(to, Body::ChallengeAccept { target: from, anchor: true, lease_us }, rg)?;
                if was_available {
                    self.to_swarm(to, Body::SetBusy { role: BusyRole::Anchor })?;
                }
            }
            ChallengeReply::Accept { .. } => {
                self.agents[r].waiting_since = Some(self.now);
                self.send(to, Body::ChallengeAccept { target: from, anchor: false, lease_us: 0 }, rg)?;
                self.to_swarm(to, Body::SetBusy { role: BusyRole::Localizing })?;
            }
            ChallengeReply::Decline => self.send(to, Body::ChallengeDecline { target: from }, rg)?,
        }
        Ok(())
    }
}
