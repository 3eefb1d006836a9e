//! Run configuration and its flat `key = value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::baselines::ConfidenceMode;
use crate::geometry::{Translation, Vec3};
use crate::localization::{LocalizerKind, MeasurementNoise};
use crate::netsim::{LossMode, LossModel, RadioConfig};
use crate::protocol::{AnchorPolicy, LeaseConfig, MergeLimit, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: bad value for {key:?}: {reason}")]
    BadValue { key: String, line: usize, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Rounds,
    Events,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    #[default]
    Deploy,
    Random,
}

/// Translation used by the HD observer. `Auto` picks stochastic in round
/// mode and centroid in event mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranslationChoice {
    #[default]
    Auto,
    Fixed(Translation),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThawSetting {
    /// Timer in `[H, 2H]` with `H = log2 F`.
    #[default]
    Auto,
    /// Timer in `[H, 2H]` with the given `H` in seconds.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cloud_path: Option<String>,
    pub epsilon_deg: f64,
    pub m: MergeLimit,
    pub eta: usize,
    pub anchor_policy: AnchorPolicy,
    pub localizer: LocalizerKind,
    pub translation: TranslationChoice,
    pub mode: Mode,
    pub lambda_ms: f64,
    pub lease_delta_s: f64,
    pub lease_renew_fraction: f64,
    pub thaw: ThawSetting,
    pub loss: LossModel,
    pub radio_default: f64,
    pub radio_max: f64,
    pub latency_ms: f64,
    pub failure_rate_per_fls_per_s: f64,
    pub replacement_delay_s: f64,
    pub hd_stop_threshold: f64,
    pub round_limit: usize,
    pub duration_s: f64,
    pub seed: u64,
    pub dispatcher_origin: Vec3,
    pub v_max: f64,
    pub a_max: f64,
    pub cell_size_m: f64,
    pub oracle_mode: bool,
    pub placement: Placement,
    pub movement_threshold: f64,
    pub match_tolerance: f64,
    /// Known neighbors per FLS; 0 means `max(eta + 2, 8)`.
    pub k_neighbors: usize,
    pub standoff: f64,
    pub noise: MeasurementNoise,
    pub hd_sample_ms: f64,
    pub snapshot_every: usize,
    pub baseline_confidence_mode: ConfidenceMode,
    pub baseline_threshold: f64,
    /// 0 means `50 F`.
    pub baseline_max_iters: usize,
    pub baseline_trace_every: usize,
    pub baseline_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cloud_path: None,
            epsilon_deg: 5.0,
            m: MergeLimit::Unbounded,
            eta: 5,
            anchor_policy: AnchorPolicy::LowestSwarmId,
            localizer: LocalizerKind::Ss,
            translation: TranslationChoice::Auto,
            mode: Mode::Rounds,
            lambda_ms: 200.0,
            lease_delta_s: 1.0,
            lease_renew_fraction: 0.5,
            thaw: ThawSetting::Auto,
            loss: LossModel::default(),
            radio_default: 2.0,
            radio_max: 100.0,
            latency_ms: 1.0,
            failure_rate_per_fls_per_s: 0.0,
            replacement_delay_s: 2.0,
            hd_stop_threshold: 0.09,
            round_limit: 100,
            duration_s: 60.0,
            seed: 1,
            dispatcher_origin: Vec3::ZERO,
            v_max: 3.0,
            a_max: 3.0,
            cell_size_m: 0.05,
            oracle_mode: false,
            placement: Placement::Deploy,
            movement_threshold: 0.01,
            match_tolerance: 0.25,
            k_neighbors: 0,
            standoff: 1.0,
            noise: MeasurementNoise::default(),
            hd_sample_ms: 250.0,
            snapshot_every: 0,
            baseline_confidence_mode: ConfidenceMode::Worst,
            baseline_threshold: 0.9,
            baseline_max_iters: 0,
            baseline_trace_every: 1,
            baseline_tol: crate::baselines::TRILATERATION_TOL,
        }
    }
}

fn parse<T: FromStr>(key: &str, line: usize, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        line,
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, line: usize, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), line, reason: format!("not a boolean: {v:?}") }),
    }
}

fn parse_vec3(key: &str, line: usize, v: &str) -> Result<Vec3, ConfigError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(ConfigError::BadValue { key: key.into(), line, reason: "expected l,h,d".into() });
    }
    Ok(Vec3::new(parse(key, line, parts[0])?, parse(key, line, parts[1])?, parse(key, line, parts[2])?))
}

fn fmt_translation(t: TranslationChoice) -> &'static str {
    match t {
        TranslationChoice::Auto => "auto",
        TranslationChoice::Fixed(Translation::Centroid) => "centroid",
        TranslationChoice::Fixed(Translation::Stochastic) => "stochastic",
    }
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "cloud_path", "epsilon_deg", "M", "eta", "anchor_policy", "localizer", "translation",
        "mode", "lambda_ms", "lease_delta_s", "lease_renew_fraction", "thaw", "loss.mode",
        "loss.rate", "radio.default", "radio.max", "latency_ms", "failure_rate_per_fls_per_s",
        "replacement_delay_s", "hd_stop_threshold", "round_limit", "duration_s", "seed",
        "dispatcher_origin", "velocity.v_max", "velocity.a_max", "cell_size_m", "oracle_mode",
        "placement", "movement_threshold", "match_tolerance", "k_neighbors", "standoff",
        "noise.distance_rel_error", "noise.angle_error_deg", "hd_sample_ms", "snapshot_every",
        "baseline.confidence_mode", "baseline.threshold", "baseline.max_iters",
        "baseline.trace_every", "baseline.tol",
    ];

    /// Applies one setting. `line` is only used in error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "cloud_path" => self.cloud_path = Some(v.to_string()),
            "epsilon_deg" => self.epsilon_deg = parse(key, line, v)?,
            "M" => self.m = parse(key, line, v)?,
            "eta" => self.eta = parse(key, line, v)?,
            "anchor_policy" => self.anchor_policy = parse(key, line, v)?,
            "localizer" => self.localizer = parse(key, line, v)?,
            "translation" => {
                self.translation = match v {
                    "auto" => TranslationChoice::Auto,
                    "centroid" => TranslationChoice::Fixed(Translation::Centroid),
                    "stochastic" => TranslationChoice::Fixed(Translation::Stochastic),
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            line,
                            reason: format!("expected auto, centroid or stochastic, got {v:?}"),
                        })
                    }
                }
            }
            "mode" => {
                self.mode = match v {
                    "rounds" => Mode::Rounds,
                    "events" => Mode::Events,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            line,
                            reason: format!("expected rounds or events, got {v:?}"),
                        })
                    }
                }
            }
            "lambda_ms" => self.lambda_ms = parse(key, line, v)?,
            "lease_delta_s" => self.lease_delta_s = parse(key, line, v)?,
            "lease_renew_fraction" => self.lease_renew_fraction = parse(key, line, v)?,
            "thaw" => {
                self.thaw = if v == "auto" {
                    ThawSetting::Auto
                } else {
                    ThawSetting::Fixed(parse(key, line, v)?)
                }
            }
            "loss.mode" => self.loss.mode = parse::<LossMode>(key, line, v)?,
            "loss.rate" => self.loss.rate = parse(key, line, v)?,
            "radio.default" => self.radio_default = parse(key, line, v)?,
            "radio.max" => self.radio_max = parse(key, line, v)?,
            "latency_ms" => self.latency_ms = parse(key, line, v)?,
            "failure_rate_per_fls_per_s" => self.failure_rate_per_fls_per_s = parse(key, line, v)?,
            "replacement_delay_s" => self.replacement_delay_s = parse(key, line, v)?,
            "hd_stop_threshold" => self.hd_stop_threshold = parse(key, line, v)?,
            "round_limit" => self.round_limit = parse(key, line, v)?,
            "duration_s" => self.duration_s = parse(key, line, v)?,
            "seed" => self.seed = parse(key, line, v)?,
            "dispatcher_origin" => self.dispatcher_origin = parse_vec3(key, line, v)?,
            "velocity.v_max" => self.v_max = parse(key, line, v)?,
            "velocity.a_max" => self.a_max = parse(key, line, v)?,
            "cell_size_m" => self.cell_size_m = parse(key, line, v)?,
            "oracle_mode" => self.oracle_mode = parse_bool(key, line, v)?,
            "placement" => {
                self.placement = match v {
                    "deploy" => Placement::Deploy,
                    "random" => Placement::Random,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            line,
                            reason: format!("expected deploy or random, got {v:?}"),
                        })
                    }
                }
            }
            "movement_threshold" => self.movement_threshold = parse(key, line, v)?,
            "match_tolerance" => self.match_tolerance = parse(key, line, v)?,
            "k_neighbors" => self.k_neighbors = parse(key, line, v)?,
            "standoff" => self.standoff = parse(key, line, v)?,
            "noise.distance_rel_error" => self.noise.distance_rel_error = parse(key, line, v)?,
            "noise.angle_error_deg" => self.noise.angle_error_deg = parse(key, line, v)?,
            "hd_sample_ms" => self.hd_sample_ms = parse(key, line, v)?,
            "snapshot_every" => self.snapshot_every = parse(key, line, v)?,
            "baseline.confidence_mode" => self.baseline_confidence_mode = parse(key, line, v)?,
            "baseline.threshold" => self.baseline_threshold = parse(key, line, v)?,
            "baseline.max_iters" => self.baseline_max_iters = parse(key, line, v)?,
            "baseline.trace_every" => self.baseline_trace_every = parse(key, line, v)?,
            "baseline.tol" => self.baseline_tol = parse(key, line, v)?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string(), line }),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v, i + 1)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a `key=value` override (line number 0 in errors).
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v, 0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..180.0).contains(&self.epsilon_deg) {
            return bad(format!("epsilon_deg {} not in [0, 180)", self.epsilon_deg));
        }
        if self.eta == 0 {
            return bad("eta must be at least 1".into());
        }
        if !(self.hd_stop_threshold > 0.0) {
            return bad("hd_stop_threshold must be positive".into());
        }
        if self.mode == Mode::Events && !(self.lambda_ms > 0.0) {
            return bad("lambda_ms must be positive in event mode".into());
        }
        if !(self.v_max > 0.0 && self.a_max > 0.0 && self.cell_size_m > 0.0) {
            return bad("velocity limits and cell size must be positive".into());
        }
        if !(self.lease_delta_s > 0.0) {
            return bad("lease_delta_s must be positive".into());
        }
        self.lease_config().validate().map_err(ConfigError::Invalid)?;
        self.loss.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.radio().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.latency_ms < 0.0 || self.failure_rate_per_fls_per_s < 0.0 {
            return bad("latency and failure rate must be non-negative".into());
        }
        if self.noise.distance_rel_error < 0.0 || self.noise.angle_error_deg < 0.0 {
            return bad("noise parameters must be non-negative".into());
        }
        if !(self.hd_sample_ms > 0.0) {
            return bad("hd_sample_ms must be positive".into());
        }
        if let ThawSetting::Fixed(h) = self.thaw {
            if !(h > 0.0) {
                return bad("thaw must be auto or a positive number of seconds".into());
            }
        }
        Ok(())
    }

    pub fn radio(&self) -> Result<RadioConfig, crate::netsim::NetError> {
        RadioConfig::doubling(self.radio_default, self.radio_max)
    }

    pub fn lease_config(&self) -> LeaseConfig {
        LeaseConfig {
            delta: secs(self.lease_delta_s),
            renew_fraction: self.lease_renew_fraction,
        }
    }

    pub fn k(&self) -> usize {
        if self.k_neighbors == 0 {
            (self.eta + 2).max(8)
        } else {
            self.k_neighbors
        }
    }

    pub fn effective_translation(&self) -> Translation {
        match (self.translation, self.mode) {
            (TranslationChoice::Fixed(t), _) => t,
            (TranslationChoice::Auto, Mode::Rounds) => Translation::Stochastic,
            (TranslationChoice::Auto, Mode::Events) => Translation::Centroid,
        }
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        if let Some(p) = &self.cloud_path {
            kv("cloud_path", p.clone());
        }
        kv("epsilon_deg", self.epsilon_deg.to_string());
        kv("M", self.m.to_string());
        kv("eta", self.eta.to_string());
        kv("anchor_policy", self.anchor_policy.to_string());
        kv("localizer", self.localizer.to_string());
        kv("translation", fmt_translation(self.translation).into());
        kv("mode", match self.mode { Mode::Rounds => "rounds", Mode::Events => "events" }.into());
        kv("lambda_ms", self.lambda_ms.to_string());
        kv("lease_delta_s", self.lease_delta_s.to_string());
        kv("lease_renew_fraction", self.lease_renew_fraction.to_string());
        kv("thaw", match self.thaw { ThawSetting::Auto => "auto".into(), ThawSetting::Fixed(h) => h.to_string() });
        kv("loss.mode", self.loss.mode.to_string());
        kv("loss.rate", self.loss.rate.to_string());
        kv("radio.default", self.radio_default.to_string());
        kv("radio.max", self.radio_max.to_string());
        kv("latency_ms", self.latency_ms.to_string());
        kv("failure_rate_per_fls_per_s", self.failure_rate_per_fls_per_s.to_string());
        kv("replacement_delay_s", self.replacement_delay_s.to_string());
        kv("hd_stop_threshold", self.hd_stop_threshold.to_string());
        kv("round_limit", self.round_limit.to_string());
        kv("duration_s", self.duration_s.to_string());
        kv("seed", self.seed.to_string());
        let o = self.dispatcher_origin;
        kv("dispatcher_origin", format!("{},{},{}", o.l, o.h, o.d));
        kv("velocity.v_max", self.v_max.to_string());
        kv("velocity.a_max", self.a_max.to_string());
        kv("cell_size_m", self.cell_size_m.to_string());
        kv("oracle_mode", self.oracle_mode.to_string());
        kv("placement", match self.placement { Placement::Deploy => "deploy", Placement::Random => "random" }.into());
        kv("movement_threshold", self.movement_threshold.to_string());
        kv("match_tolerance", self.match_tolerance.to_string());
        kv("k_neighbors", self.k_neighbors.to_string());
        kv("standoff", self.standoff.to_string());
        kv("noise.distance_rel_error", self.noise.distance_rel_error.to_string());
        kv("noise.angle_error_deg", self.noise.angle_error_deg.to_string());
        kv("hd_sample_ms", self.hd_sample_ms.to_string());
        kv("snapshot_every", self.snapshot_every.to_string());
        kv("baseline.confidence_mode", self.baseline_confidence_mode.to_string());
        kv("baseline.threshold", self.baseline_threshold.to_string());
        kv("baseline.max_iters", self.baseline_max_iters.to_string());
        kv("baseline.trace_every", self.baseline_trace_every.to_string());
        kv("baseline.tol", self.baseline_tol.to_string());
        s
    }
}

/// Seconds to simulated microseconds.
pub fn secs(s: f64) -> SimTime {
    (s * 1e6).round().max(0.0) as SimTime
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_unknown_keys() {
        let cfg = RunConfig::from_text("# c\nepsilon_deg = 3\nM = 2\nloss.mode = rx\n\nloss.rate=0.1\n")
            .unwrap();
        assert_eq!(cfg.epsilon_deg, 3.0);
        assert_eq!(cfg.m, MergeLimit::Bounded(2));
        assert_eq!(cfg.loss, LossModel { mode: LossMode::Rx, rate: 0.1 });
        let err = RunConfig::from_text("seed = 1\nbogus = 2\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { key: "bogus".into(), line: 2 });
        assert!(err.to_string().contains("bogus"));
        assert!(matches!(RunConfig::from_text("seed 1"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            RunConfig::from_text("M = 1"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
    }

    #[test]
    fn overrides_are_last_wins() {
        let mut cfg = RunConfig::from_text("seed = 4\n").unwrap();
        cfg.apply_override("seed=5").unwrap();
        cfg.apply_override("seed=6").unwrap();
        assert_eq!(cfg.seed, 6);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Events;
        cfg.thaw = ThawSetting::Fixed(3.5);
        cfg.dispatcher_origin = Vec3::new(1.0, -2.0, 0.5);
        cfg.cloud_path = Some("x.xyz".into());
        cfg.translation = TranslationChoice::Fixed(Translation::Centroid);
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        for key in RunConfig::KEYS {
            assert!(cfg.to_text().contains(&format!("{key} = ")), "{key} missing");
        }
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.hd_stop_threshold = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.loss.rate = 1.5;
        assert!(cfg.validate().is_err());
        assert_eq!(RunConfig::default().k(), 8);
    }
}
