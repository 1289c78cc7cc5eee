//! CSV formats, run artifacts and the export/rollout entry points.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::TrainConfig;
use super::episode::{run_episode, EpisodeMetrics, EpisodeMode, EpisodeRecord, MetricsRow, Purpose, TerminalCause, TrajectoryRow};
use super::models::{ModelSet, DECISION_DIR, FOLLOWING_DIR, LANE_CHANGE_DIR};
use super::train::{stream, TrainingCurves};
use crate::error::{Error, Result};
use crate::sim::{canonical_scenario, spawn_scenario};
use crate::value::{save_dqn, save_quadratic};

pub const METRICS_HEADER: &str = "t,phase,a_l,accel,steer,r_decision,r_adjust";
pub const TRAJECTORY_HEADER: &str = "t,id,role,x,y,heading,v,a,lane";
pub const EPISODES_HEADER: &str = "episode,seed,cumulative_reward,steps,cause,mean_abs_dv_tail,completed";
pub const LOSS_HEADER: &str = "step,loss";

const ROLLOUT_STREAM: u64 = 4;

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.phase, r.a_l, r.accel, r.steer, r.r_decision, r.r_adjust
        )?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(mut out: W, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        let v = &r.vehicle;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            v.id,
            v.role.as_str(),
            v.x,
            v.y,
            v.heading,
            v.v,
            v.a,
            v.lane
        )?;
    }
    Ok(())
}

pub fn write_episodes_csv<W: Write>(mut out: W, episodes: &[EpisodeMetrics]) -> std::io::Result<()> {
    writeln!(out, "{EPISODES_HEADER}")?;
    for e in episodes {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.episode,
            e.seed,
            e.cumulative_reward,
            e.steps,
            e.cause.as_str(),
            e.mean_abs_dv_tail,
            e.completed
        )?;
    }
    Ok(())
}

pub fn write_loss_csv<W: Write>(mut out: W, losses: &[(u64, f64)]) -> std::io::Result<()> {
    writeln!(out, "{LOSS_HEADER}")?;
    for (step, loss) in losses {
        writeln!(out, "{step},{loss}")?;
    }
    Ok(())
}

fn bad(detail: String) -> Error {
    Error::Parse {
        what: "episodes CSV",
        detail,
    }
}

/// Parses the output of [`write_episodes_csv`].
pub fn read_episodes_csv(text: &str) -> Result<Vec<EpisodeMetrics>> {
    let mut lines = text.lines();
    if lines.next() != Some(EPISODES_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("row {}: expected 7 fields", n + 1)));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| bad(format!("row {}: {e}", n + 1)));
            let int = |i: usize| f[i].parse::<u64>().map_err(|e| bad(format!("row {}: {e}", n + 1)));
            Ok(EpisodeMetrics {
                episode: int(0)? as usize,
                seed: int(1)?,
                cumulative_reward: num(2)?,
                steps: int(3)? as u32,
                cause: TerminalCause::from_name(f[4]).ok_or_else(|| bad(format!("row {}: cause {:?}", n + 1, f[4])))?,
                mean_abs_dv_tail: num(5)?,
                completed: f[6].parse().map_err(|e| bad(format!("row {}: {e}", n + 1)))?,
            })
        })
        .collect()
}

/// Creates `path` and streams CSV into it.
pub fn write_csv_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `<name>_loss.csv` and `<name>_episodes.csv` into `dir`.
pub fn write_curves(dir: &Path, name: &str, curves: &TrainingCurves) -> Result<Vec<PathBuf>> {
    let loss = dir.join(format!("{name}_loss.csv"));
    let episodes = dir.join(format!("{name}_episodes.csv"));
    write_csv_file(&loss, |w| write_loss_csv(w, &curves.losses))?;
    write_csv_file(&episodes, |w| write_episodes_csv(w, &curves.episodes))?;
    Ok(vec![loss, episodes])
}

/// Writes `metrics.csv` and `trajectory.csv` for one recorded episode.
pub fn write_episode(dir: &Path, record: &EpisodeRecord) -> Result<Vec<PathBuf>> {
    let metrics = dir.join("metrics.csv");
    let trajectory = dir.join("trajectory.csv");
    write_csv_file(&metrics, |w| write_metrics_csv(w, &record.rows))?;
    write_csv_file(&trajectory, |w| write_trajectory_csv(w, &record.trajectory))?;
    Ok(vec![metrics, trajectory])
}

/// One greedy full-hierarchy episode on the scenario drawn from `seed`, recorded.
pub fn rollout(models: &ModelSet, cfg: &TrainConfig, seed: u64) -> Result<EpisodeRecord> {
    let world = spawn_scenario(seed, &cfg.scenario)?;
    let mut rng = stream(seed, ROLLOUT_STREAM);
    let (mut record, _) = run_episode(world, cfg, Purpose::Full, models.view(), EpisodeMode::Eval, &mut rng, true)?;
    record.metrics.seed = seed;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Metrics,
    Trajectory,
    Checkpoint,
}

impl ExportKind {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "metrics" => Some(Self::Metrics),
            "trajectory" => Some(Self::Trajectory),
            "checkpoint" => Some(Self::Checkpoint),
            _ => None,
        }
    }
}

/// Exports artifacts of the run in `run_dir` into `out`.
///
/// `checkpoint` re-saves every model the run holds; `metrics` and `trajectory` record a greedy
/// full-hierarchy episode in the canonical scenario. Returns the files or directories written.
pub fn export(run_dir: &Path, what: ExportKind, out: &Path, cfg: &TrainConfig) -> Result<Vec<PathBuf>> {
    let (models, missing) = ModelSet::load_or_fresh(run_dir, cfg.seed)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match what {
        ExportKind::Checkpoint => {
            let mut written = Vec::new();
            if !missing.contains(&DECISION_DIR) {
                save_dqn(&out.join(DECISION_DIR), &models.dqn, cfg.gamma, 0)?;
                written.push(out.join(DECISION_DIR));
            }
            for (name, m) in [(FOLLOWING_DIR, &models.following), (LANE_CHANGE_DIR, &models.lane_change)] {
                if !missing.contains(&name) {
                    save_quadratic(&out.join(name), m, cfg.gamma, 0)?;
                    written.push(out.join(name));
                }
            }
            if written.is_empty() {
                return Err(Error::Contract(format!("{} holds no model checkpoints", run_dir.display())));
            }
            Ok(written)
        }
        ExportKind::Metrics | ExportKind::Trajectory => {
            let world = canonical_scenario(&cfg.scenario)?;
            let mut rng = stream(cfg.seed, ROLLOUT_STREAM);
            let (record, _) = run_episode(world, cfg, Purpose::Full, models.view(), EpisodeMode::Eval, &mut rng, true)?;
            let path = if what == ExportKind::Metrics {
                let p = out.join("metrics.csv");
                write_csv_file(&p, |w| write_metrics_csv(w, &record.rows))?;
                p
            } else {
                let p = out.join("trajectory.csv");
                write_csv_file(&p, |w| write_trajectory_csv(w, &record.trajectory))?;
                p
            };
            Ok(vec![path])
        }
    }
}
