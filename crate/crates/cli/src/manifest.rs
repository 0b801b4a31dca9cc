use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::Result;
use crate::io::write_json;

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Record of one invocation. Timestamps make it the only output that differs
/// between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub args: Value,
    pub config: Value,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
    pub status: String,
}

fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default()
}

pub struct RunRecorder {
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn start(subcommand: &str, seed: Option<u64>, args: &impl Serialize, config: &impl Serialize) -> Self {
        Self {
            manifest: RunManifest {
                subcommand: subcommand.into(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                seed,
                args: serde_json::to_value(args).unwrap_or(Value::Null),
                config: serde_json::to_value(config).unwrap_or(Value::Null),
                started_at: now(),
                finished_at: String::new(),
                outputs: Vec::new(),
                status: String::new(),
            },
        }
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.manifest.outputs.push(path.into());
    }

    /// Writes `run_manifest.json` into `dir` with the given status.
    pub fn finish(mut self, dir: &Path, status: &str) -> Result<RunManifest> {
        self.manifest.finished_at = now();
        self.manifest.status = status.into();
        write_json(&dir.join(RUN_MANIFEST), &self.manifest)?;
        Ok(self.manifest)
    }
}
