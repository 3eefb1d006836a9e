//! State shared by both simulators: the FLSs, the movement model and the
//! HD observer.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::deploy::Deployment;
use super::metrics::RoundMetrics;
use super::{EngineError, Snapshot};
use crate::geometry::{hd, identity_assignment, DeadReckoning, Dim, Translation, Vec3};
use crate::localization::{Localizer, LocalizeCtx, MeasurementNoise, Pose};
use crate::protocol::{
    apply_move_and_rejoin, complete_localization, yaw_correction, Body, Fid, FlsState, Message, Rejoin,
    SimTime, SwarmId,
};
use crate::rng::{stream, Stream};

pub(crate) fn wire(body: Body) -> u64 {
    Message::new(0, 0, 0, body).wire_len() as u64
}

/// Where a localizer will be once its flights are done.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MovePlan {
    pub pos: Vec3,
    pub staging_distance: f64,
    pub v_flight: f64,
    pub swarm_vector: Vec3,
    pub phi: f64,
}

impl MovePlan {
    pub fn flown(&self) -> f64 {
        self.staging_distance + self.v_flight
    }
}

/// Result of one localizer finishing a merge step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Localized {
    pub old_swarm: SwarmId,
    pub new_swarm: SwarmId,
    pub swarm_vector: Vec3,
    pub phi: f64,
    /// Distance flown by the localizer itself.
    pub flown: f64,
}

pub(crate) struct World {
    pub fls: Vec<FlsState>,
    pub gt: Vec<Vec3>,
    pub deployed: Vec<Vec3>,
    pub oracle: Option<Fid>,
    pub dim: Dim,
    movement: DeadReckoning,
    noise_rng: ChaCha8Rng,
    noise: MeasurementNoise,
    plugin: Box<dyn Localizer>,
    threshold: f64,
    translation: Translation,
    hd_rng: ChaCha8Rng,
    snapshot_every: usize,
    pub snapshots: Vec<Snapshot>,
}

impl World {
    pub fn new(dep: Deployment, cfg: &RunConfig) -> Result<Self, EngineError> {
        Ok(World {
            gt: dep.gt(),
            deployed: dep.est(),
            fls: dep.fls,
            oracle: dep.oracle,
            dim: dep.dim,
            movement: DeadReckoning::new(cfg.epsilon_deg, stream(cfg.seed, Stream::Movement))?,
            noise_rng: stream(cfg.seed, Stream::Noise),
            noise: cfg.noise,
            plugin: cfg.localizer.build(cfg.standoff),
            threshold: cfg.movement_threshold,
            translation: cfg.effective_translation(),
            hd_rng: stream(cfg.seed, Stream::Translation),
            snapshot_every: cfg.snapshot_every,
            snapshots: Vec::new(),
        })
    }

    pub fn est(&self) -> Vec<Vec3> {
        self.fls.iter().map(|f| f.est).collect()
    }

    /// Translation-corrected HD over the FLSs selected by `lit`.
    pub fn hd_where(&mut self, lit: impl Fn(usize) -> bool) -> Result<f64, EngineError> {
        let idx: Vec<usize> = (0..self.fls.len()).filter(|&i| lit(i)).collect();
        if idx.is_empty() {
            return Ok(0.0);
        }
        let e: Vec<Vec3> = idx.iter().map(|&i| self.fls[i].est).collect();
        let g: Vec<Vec3> = idx.iter().map(|&i| self.gt[i]).collect();
        Ok(hd(&e, &g, &identity_assignment(e.len()), self.translation, &mut self.hd_rng)?)
    }

    pub fn hd(&mut self) -> Result<f64, EngineError> {
        self.hd_where(|_| true)
    }

    pub fn swarm_count(&self) -> usize {
        self.members().len()
    }

    pub fn members(&self) -> BTreeMap<SwarmId, Vec<usize>> {
        let mut m: BTreeMap<SwarmId, Vec<usize>> = BTreeMap::new();
        for (i, f) in self.fls.iter().enumerate() {
            m.entry(f.swarm_id).or_default().push(i);
        }
        m
    }

    /// Runs the plugin for localizer `l` against anchor `a` and works out
    /// where the localizer ends up. Nothing is changed yet.
    pub fn measure(&mut self, l: usize, a: usize) -> MovePlan {
        let me = Pose { est: self.fls[l].est, gt: self.fls[l].gt };
        let anchor = Pose { est: self.fls[a].est, gt: self.fls[a].gt };
        let phi = yaw_correction(me.est, anchor.est, me.gt, anchor.gt);
        let corr = {
            let mut ctx = LocalizeCtx {
                dim: self.dim,
                reckoning: &mut self.movement,
                noise: self.noise,
                noise_rng: &mut self.noise_rng,
            };
            self.plugin.localize(me, anchor, &mut ctx)
        };
        let mut pos = corr.staging.unwrap_or(me.est);
        let mut v_flight = 0.0;
        if corr.v.norm() > self.threshold {
            let to = self.movement.reckon(pos, pos + corr.v, self.dim);
            v_flight = pos.distance(to);
            pos = to;
        }
        MovePlan {
            pos,
            staging_distance: corr.staging_distance,
            v_flight,
            swarm_vector: corr.swarm_vector,
            phi,
        }
    }

    /// Moves localizer `l` to the end of `plan` and re-homes it into
    /// `anchor_swarm`.
    pub fn finish(
        &mut self,
        l: usize,
        anchor_fid: Fid,
        anchor_swarm: SwarmId,
        plan: &MovePlan,
        now: SimTime,
    ) -> Result<(Localized, Body, Body), EngineError> {
        self.fls[l].est = plan.pos;
        let old_swarm = self.fls[l].swarm_id;
        let (mr, un) =
            complete_localization(&mut self.fls[l], anchor_fid, anchor_swarm, plan.swarm_vector, plan.phi, now)?;
        let step = Localized {
            old_swarm,
            new_swarm: anchor_swarm,
            swarm_vector: plan.swarm_vector,
            phi: plan.phi,
            flown: plan.flown(),
        };
        Ok((step, mr, un))
    }

    /// Measure and finish in one step.
    pub fn localize(&mut self, l: usize, a: usize, now: SimTime) -> Result<(Localized, Body, Body), EngineError> {
        let plan = self.measure(l, a);
        let (fid, swarm) = (self.fls[a].fid, self.fls[a].swarm_id);
        self.finish(l, fid, swarm, &plan, now)
    }

    /// Applies a MoveAndRejoin at FLS `i`. Returns the distance flown, or
    /// `None` when the message did not concern it.
    pub fn follow(&mut self, i: usize, step: &Localized) -> Option<f64> {
        match apply_move_and_rejoin(
            &mut self.fls[i],
            step.old_swarm,
            step.new_swarm,
            step.swarm_vector,
            step.phi,
            self.threshold,
            &mut self.movement,
            self.dim,
        ) {
            Rejoin::Applied { moved, .. } => Some(moved),
            Rejoin::Discarded => None,
        }
    }

    /// Records a snapshot for metrics row `index` when due.
    pub fn maybe_snapshot(&mut self, index: usize, last: bool, lit: impl Fn(usize) -> bool) {
        let due = index == 0 || last || (self.snapshot_every > 0 && index % self.snapshot_every == 0);
        if due && self.snapshots.last().map_or(true, |s| s.index != index) {
            let est = (0..self.fls.len()).filter(|&i| lit(i)).map(|i| self.fls[i].est).collect();
            self.snapshots.push(Snapshot { index, est });
        }
    }
}

/// Fills the split/total distance columns so the total is their sum.
pub(crate) fn set_distances(row: &mut RoundMetrics, localizing: f64, follow: f64) {
    row.dist_localizing = localizing;
    row.dist_swarm_follow = follow;
    row.dist_total = localizing + follow;
}
