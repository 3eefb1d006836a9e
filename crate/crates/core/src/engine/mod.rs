//! Whole-run drivers: deployment, the round-based simulator and the
//! discrete-event simulator, plus the metrics they produce.

pub mod compare;
pub mod config;
pub mod deploy;
pub mod events;
pub mod kinematics;
pub mod metrics;
pub mod rounds;
mod world;

use thiserror::Error;

use crate::geometry::{GeometryError, PointCloud, Vec3};
use crate::netsim::NetError;
use crate::protocol::{Fid, ProtocolError};

pub use compare::{compare, emit_comparison, Comparison};
pub use config::{secs, ConfigError, Mode, Placement, RunConfig, ThawSetting, TranslationChoice};
pub use deploy::{deploy, known_neighbors, Deployment};
pub use kinematics::{travel_time, VelocityProfile};
pub use metrics::{emit_metrics, emit_snapshot, metrics_csv, read_snapshot, snapshot_name, RoundMetrics, METRICS_COLUMNS};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("csv: {0}")]
    Csv(csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("snapshot {0}")]
    Snapshot(String),
}

/// HD values below this are reported as converged to zero.
pub const HD_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// HD dropped below the stop threshold.
    Converged,
    /// Round limit or duration reached first.
    LimitReached,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::LimitReached => "limit reached",
        }
    }
}

/// Estimated cloud at one metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub est: Vec<Vec3>,
}

/// Counters not tied to a single metrics row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunCounters {
    pub failures: usize,
    pub replacements: usize,
    /// Leases that lapsed while the holder was dead.
    pub leases_expired_on_failure: usize,
    /// Failures that hit an FLS in the middle of localizing.
    pub killed_localizing: usize,
    /// Time (rows' `round_or_time` units) when one swarm first formed.
    pub first_single_swarm: Option<f64>,
    /// Simulated seconds at which each replacement arrived.
    pub replacement_arrivals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Vec<RoundMetrics>,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub final_hd: f64,
    /// First `round_or_time` with HD under the threshold.
    pub to_threshold: Option<f64>,
    pub gt: Vec<Vec3>,
    /// Positions right after deployment.
    pub deployed: Vec<Vec3>,
    pub final_est: Vec<Vec3>,
    pub final_swarm_ids: Vec<u32>,
    /// False for FLSs that failed; indexed like `final_est`.
    pub alive: Vec<bool>,
    pub oracle: Option<Fid>,
    pub planar: bool,
    pub counters: RunCounters,
}

impl RunOutcome {
    pub fn dist_localizing(&self) -> f64 {
        self.trace.iter().map(|r| r.dist_localizing).sum()
    }

    pub fn dist_swarm_follow(&self) -> f64 {
        self.trace.iter().map(|r| r.dist_swarm_follow).sum()
    }

    pub fn dist_total(&self) -> f64 {
        self.trace.iter().map(|r| r.dist_total).sum()
    }

    pub fn bytes_tx(&self) -> u64 {
        self.trace.iter().map(|r| r.bytes_tx).sum()
    }

    pub fn localizations(&self) -> usize {
        self.trace.iter().map(|r| r.localizations).sum()
    }

    pub fn leases_expired(&self) -> usize {
        self.trace.iter().map(|r| r.leases_expired).sum()
    }

    pub fn thaws(&self) -> usize {
        self.trace.iter().map(|r| r.thawed_swarms).sum()
    }

    pub fn final_swarm_count(&self) -> usize {
        self.trace.last().map_or(0, |r| r.swarm_count)
    }

    /// `centroid(E) - centroid(G)` at the end of the run.
    pub fn centroid_offset(&self) -> Vec3 {
        let lit: Vec<usize> = (0..self.gt.len()).filter(|&i| self.alive[i]).collect();
        let e: Vec<Vec3> = lit.iter().map(|&i| self.final_est[i]).collect();
        let g: Vec<Vec3> = lit.iter().map(|&i| self.gt[i]).collect();
        crate::geometry::centroid(&e) - crate::geometry::centroid(&g)
    }

    /// `key = value` summary lines.
    pub fn summary_text(&self, cfg: &RunConfig) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let unit = match cfg.mode {
            Mode::Rounds => "rounds",
            Mode::Events => "seconds",
        };
        let hd = if self.final_hd < HD_FLOOR { 0.0 } else { self.final_hd };
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        kv("status", self.status.as_str().into());
        kv("fls", self.gt.len().to_string());
        kv("final_hd", hd.to_string());
        kv(
            &format!("{unit}_to_threshold"),
            self.to_threshold.map_or("none".into(), |t| t.to_string()),
        );
        kv(&format!("{unit}_run"), self.trace.last().map_or(0.0, |r| r.round_or_time).to_string());
        kv("swarms", self.final_swarm_count().to_string());
        kv("dist_localizing", self.dist_localizing().to_string());
        kv("dist_swarm_follow", self.dist_swarm_follow().to_string());
        kv("dist_total", self.dist_total().to_string());
        kv("bytes_tx", self.bytes_tx().to_string());
        kv("localizations", self.localizations().to_string());
        kv("thaws", self.thaws().to_string());
        kv("leases_expired", self.leases_expired().to_string());
        kv("failures", self.counters.failures.to_string());
        kv("replacements", self.counters.replacements.to_string());
        let off = self.centroid_offset();
        kv("centroid_offset", format!("{},{},{}", off.l, off.h, off.d));
        s
    }
}

/// Runs `cfg` on `cloud` in the configured mode.
pub fn run(cloud: &PointCloud, cfg: &RunConfig) -> Result<RunOutcome, EngineError> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Rounds => rounds::run_rounds(cloud, cfg),
        Mode::Events => events::run_events(cloud, cfg),
    }
}

/// Loads `cfg.cloud_path`.
pub fn load_cloud(cfg: &RunConfig) -> Result<PointCloud, EngineError> {
    let path = cfg
        .cloud_path
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid("cloud_path is required".into()))?;
    Ok(PointCloud::load(std::path::Path::new(path))?.0)
}
