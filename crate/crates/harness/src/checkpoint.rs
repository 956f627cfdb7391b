//! Versioned JSON checkpoints: learner parameters, their layout descriptor,
//! the hash of the config that produced them and the evaluation task.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subgoal_core::env::EnvConfig;
use subgoal_core::learn::{Layout, LearnerParams};

use crate::config::TaskKind;
use crate::error::{HarnessError, Result};
use crate::output;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub task: TaskKind,
    pub layout: Layout,
    pub config_hash: String,
    /// Environment the greedy policy is evaluated on.
    pub eval_env: EnvConfig,
    pub params: LearnerParams,
}

impl Checkpoint {
    pub fn new(task: TaskKind, config_hash: String, eval_env: EnvConfig, params: LearnerParams) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            task,
            layout: params.layout(),
            config_hash,
            eval_env,
            params,
        }
    }

    /// Rejects unknown versions, descriptors that disagree with the stored
    /// parameters, and non-finite weights.
    pub fn check(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(HarnessError::Mismatch(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.params.check_layout(&self.layout)?;
        self.params.validate()?;
        Ok(())
    }

    /// Writes the checkpoint and returns the hex SHA-256 of the file.
    pub fn save(&self, path: &Path) -> Result<String> {
        output::write_json(path, self)?;
        file_hash(path)
    }

    /// Loads and checks a checkpoint; returns it with its file hash.
    pub fn load(path: &Path) -> Result<(Checkpoint, String)> {
        let c: Checkpoint = output::read_json(path)?;
        c.check()?;
        Ok((c, file_hash(path)?))
    }
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
