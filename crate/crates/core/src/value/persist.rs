//! Model directories: one checkpoint per network plus `manifest.txt`.
//!
//! ```text
//! lanehrl-model 1
//! kind quadratic
//! action_bounds -4 2
//! gamma 0.99
//! train_step 100000
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::dqn::DqnModel;
use super::quadratic::QuadraticQModel;
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, save_checkpoint};

const MAGIC: &str = "lanehrl-model 1";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Quadratic,
    Dqn,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Quadratic => "quadratic",
            ModelKind::Dqn => "dqn",
        }
    }
}

/// Everything in a model directory besides the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelManifest {
    pub kind: ModelKind,
    /// Only meaningful for quadratic models.
    pub action_bounds: (f64, f64),
    pub gamma: f64,
    /// Training steps taken so far (exploration schedule position).
    pub train_step: u64,
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Parse {
        what: "model manifest",
        detail: detail.into(),
    }
}

impl ModelManifest {
    fn encode(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "kind {}", self.kind.name()).unwrap();
        writeln!(s, "action_bounds {} {}", self.action_bounds.0, self.action_bounds.1).unwrap();
        writeln!(s, "gamma {}", self.gamma).unwrap();
        writeln!(s, "train_step {}", self.train_step).unwrap();
        s
    }

    fn decode(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing header line"));
        }
        let (mut kind, mut bounds, mut gamma, mut step) = (None, None, None, None);
        for line in lines {
            let (key, value) = line.split_once(' ').ok_or_else(|| bad(format!("no value in {line:?}")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {v:?}: {e}")));
            match key {
                "kind" => {
                    kind = Some(match value {
                        "quadratic" => ModelKind::Quadratic,
                        "dqn" => ModelKind::Dqn,
                        other => return Err(bad(format!("unknown kind {other:?}"))),
                    })
                }
                "action_bounds" => {
                    let (lo, hi) = value.split_once(' ').ok_or_else(|| bad("action_bounds needs two values"))?;
                    bounds = Some((num(lo)?, num(hi.trim())?));
                }
                "gamma" => gamma = Some(num(value)?),
                "train_step" => step = Some(value.parse::<u64>().map_err(|e| bad(format!("train_step: {e}")))?),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(Self {
            kind: kind.ok_or_else(|| bad("missing kind"))?,
            action_bounds: bounds.ok_or_else(|| bad("missing action_bounds"))?,
            gamma: gamma.ok_or_else(|| bad("missing gamma"))?,
            train_step: step.ok_or_else(|| bad("missing train_step"))?,
        })
    }
}

fn write_manifest(dir: &Path, manifest: &ModelManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.encode()).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<ModelManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    ModelManifest::decode(&text)
}

pub fn save_quadratic(dir: &Path, m: &QuadraticQModel, gamma: f64, train_step: u64) -> Result<()> {
    write_manifest(
        dir,
        &ModelManifest {
            kind: ModelKind::Quadratic,
            action_bounds: m.action_bounds,
            gamma,
            train_step,
        },
    )?;
    save_checkpoint(&m.net_a, &dir.join("A.ckpt"))?;
    save_checkpoint(&m.net_b, &dir.join("B.ckpt"))?;
    save_checkpoint(&m.net_c, &dir.join("C.ckpt"))
}

pub fn load_quadratic(dir: &Path) -> Result<(QuadraticQModel, ModelManifest)> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != ModelKind::Quadratic {
        return Err(bad(format!("{} holds a {} model", dir.display(), manifest.kind.name())));
    }
    let m = QuadraticQModel::from_nets(
        load_checkpoint(&dir.join("A.ckpt"))?,
        load_checkpoint(&dir.join("B.ckpt"))?,
        load_checkpoint(&dir.join("C.ckpt"))?,
        manifest.action_bounds,
    )?;
    Ok((m, manifest))
}

pub fn save_dqn(dir: &Path, d: &DqnModel, gamma: f64, train_step: u64) -> Result<()> {
    write_manifest(
        dir,
        &ModelManifest {
            kind: ModelKind::Dqn,
            action_bounds: (0.0, 1.0),
            gamma,
            train_step,
        },
    )?;
    save_checkpoint(&d.net, &dir.join("dqn.ckpt"))
}

pub fn load_dqn(dir: &Path) -> Result<(DqnModel, ModelManifest)> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != ModelKind::Dqn {
        return Err(bad(format!("{} holds a {} model", dir.display(), manifest.kind.name())));
    }
    Ok((DqnModel::from_net(load_checkpoint(&dir.join("dqn.ckpt"))?)?, manifest))
}
