use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::AgentModels;
use crate::error::{Error, Result};
use crate::sim::STATE_DIM;
use crate::value::{load_dqn, load_quadratic, save_dqn, save_quadratic, DqnModel, QuadraticQModel, MANIFEST_FILE};

pub const FOLLOWING_DIR: &str = "following";
pub const LANE_CHANGE_DIR: &str = "lane_change";
pub const DECISION_DIR: &str = "decision";

/// The three learned components of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub dqn: DqnModel,
    pub following: QuadraticQModel,
    pub lane_change: QuadraticQModel,
}

impl ModelSet {
    /// Freshly initialized models (adjustment heads pinned).
    pub fn fresh(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            dqn: DqnModel::new(STATE_DIM, &mut rng)?,
            following: QuadraticQModel::new(STATE_DIM, &mut rng)?,
            lane_change: QuadraticQModel::new(STATE_DIM, &mut rng)?,
        })
    }

    pub fn view(&self) -> AgentModels<'_> {
        AgentModels {
            dqn: &self.dqn,
            following: &self.following,
            lane_change: &self.lane_change,
        }
    }

    /// Loads whatever components `dir` holds and initializes the rest from `seed`.
    /// Also returns the names of the components that were not found.
    pub fn load_or_fresh(dir: &Path, seed: u64) -> Result<(Self, Vec<&'static str>)> {
        let mut set = Self::fresh(seed)?;
        let mut missing = Vec::new();
        let present = |name: &str| dir.join(name).join(MANIFEST_FILE).is_file();
        std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if present(DECISION_DIR) {
            set.dqn = load_dqn(&dir.join(DECISION_DIR))?.0;
        } else {
            missing.push(DECISION_DIR);
        }
        if present(FOLLOWING_DIR) {
            set.following = load_quadratic(&dir.join(FOLLOWING_DIR))?.0;
        } else {
            missing.push(FOLLOWING_DIR);
        }
        if present(LANE_CHANGE_DIR) {
            set.lane_change = load_quadratic(&dir.join(LANE_CHANGE_DIR))?.0;
        } else {
            missing.push(LANE_CHANGE_DIR);
        }
        Ok((set, missing))
    }

    pub fn save(&self, dir: &Path, gamma: f64) -> Result<()> {
        save_dqn(&dir.join(DECISION_DIR), &self.dqn, gamma, 0)?;
        save_quadratic(&dir.join(FOLLOWING_DIR), &self.following, gamma, 0)?;
        save_quadratic(&dir.join(LANE_CHANGE_DIR), &self.lane_change, gamma, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = ModelSet::fresh(9).unwrap();
        set.save(dir.path(), 0.99).unwrap();
        let (back, missing) = ModelSet::load_or_fresh(dir.path(), 0).unwrap();
        assert!(missing.is_empty());
        assert_eq!(back.dqn.checksum(), set.dqn.checksum());
        assert_eq!(back.following.checksum(), set.following.checksum());
        assert_eq!(back.lane_change.checksum(), set.lane_change.checksum());
    }

    #[test]
    fn partial_directories_report_missing_parts() {
        let dir = tempfile::tempdir().unwrap();
        let set = ModelSet::fresh(1).unwrap();
        save_quadratic(&dir.path().join(FOLLOWING_DIR), &set.following, 0.99, 5).unwrap();
        let (back, missing) = ModelSet::load_or_fresh(dir.path(), 1).unwrap();
        assert_eq!(missing, vec![DECISION_DIR, LANE_CHANGE_DIR]);
        assert_eq!(back, set);
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let err = ModelSet::load_or_fresh(Path::new("/nonexistent/run"), 0).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run"));
    }
}
