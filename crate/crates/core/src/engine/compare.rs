//! SwarMer against the triangulation and trilateration baselines, all
//! starting from the same deployment.

use std::path::Path;

use super::config::RunConfig;
use super::deploy::deploy;
use super::{run, EngineError, RunOutcome};
use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod, BaselineRun};
use crate::geometry::PointCloud;
use crate::localization::LocalizerKind;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone)]
pub struct Comparison {
    pub swarmer: RunOutcome,
    pub triangulation: BaselineRun,
    pub trilateration: BaselineRun,
}

impl Comparison {
    pub fn baseline(&self, method: BaselineMethod) -> &BaselineRun {
        match method {
            BaselineMethod::Triangulation => &self.triangulation,
            BaselineMethod::Trilateration => &self.trilateration,
        }
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "swarmer_final_hd = {}\nswarmer_dist_total = {}\n",
            self.swarmer.final_hd,
            self.swarmer.dist_total()
        );
        for m in [BaselineMethod::Triangulation, BaselineMethod::Trilateration] {
            let b = self.baseline(m);
            s += &format!(
                "{m}_final_hd = {}\n{m}_iterations = {}\n{m}_localized = {}\n{m}_failures = {}\n{m}_skipped = {}\n{m}_dist_total = {}\n",
                b.final_hd(),
                b.iterations,
                b.localized,
                b.failures,
                b.skipped,
                b.distance
            );
        }
        s
    }
}

/// Runs SwarMer with the signal-strength localizer and both baselines.
/// Baselines see the same deployed positions and known-neighbor lists.
pub fn compare(cloud: &PointCloud, cfg: &RunConfig) -> Result<Comparison, EngineError> {
    let mut sw_cfg = cfg.clone();
    sw_cfg.localizer = LocalizerKind::Ss;
    let swarmer = run(cloud, &sw_cfg)?;

    let dep = deploy(cloud, cfg)?;
    let gt = dep.gt();
    let est = dep.est();
    let neighbors: Vec<Vec<usize>> =
        dep.fls.iter().map(|f| f.known_neighbors.iter().map(|&(fid, _)| fid as usize).collect()).collect();
    let max_iters = if cfg.baseline_max_iters == 0 { 50 * gt.len() } else { cfg.baseline_max_iters };
    let one = |method| -> Result<BaselineRun, EngineError> {
        let bc = BaselineConfig {
            method,
            confidence_mode: cfg.baseline_confidence_mode,
            threshold: cfg.baseline_threshold,
            max_iters,
            epsilon_deg: cfg.epsilon_deg,
            translation: cfg.effective_translation(),
            trace_every: cfg.baseline_trace_every,
            tol: cfg.baseline_tol,
        };
        let mut rng = stream(cfg.seed, Stream::Baseline);
        Ok(run_baseline(&gt, &est, &neighbors, &dep.legs, dep.dim, &bc, &mut rng)?)
    };
    Ok(Comparison {
        swarmer,
        triangulation: one(BaselineMethod::Triangulation)?,
        trilateration: one(BaselineMethod::Trilateration)?,
    })
}

/// `step,hd` CSV for one method's trace.
pub fn hd_trace_csv(trace: impl IntoIterator<Item = (f64, f64)>) -> Result<Vec<u8>, EngineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "hd"]).map_err(EngineError::Csv)?;
    for (step, hd) in trace {
        w.write_record([step.to_string(), hd.to_string()]).map_err(EngineError::Csv)?;
    }
    w.into_inner().map_err(|e| EngineError::Csv(e.into_error().into()))
}

/// Writes `hd_<method>.csv` for all three methods and `compare_summary.txt`.
pub fn emit_comparison(c: &Comparison, dir: &Path) -> Result<(), EngineError> {
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| EngineError::Io { path: path.display().to_string(), source })
    };
    write("hd_swarmer.csv", &hd_trace_csv(c.swarmer.trace.iter().map(|r| (r.round_or_time, r.hd)))?)?;
    for m in [BaselineMethod::Triangulation, BaselineMethod::Trilateration] {
        let t = c.baseline(m).trace.iter().map(|&(i, hd)| (i as f64, hd));
        write(&format!("hd_{m}.csv"), &hd_trace_csv(t)?)?;
    }
    write("compare_summary.txt", c.summary_text().as_bytes())
}
