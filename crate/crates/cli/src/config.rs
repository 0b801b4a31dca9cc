//! TOML configuration shared by all subcommands. Every section is optional.
//!
//! ```toml
//! [generator]
//! seed = 7
//! points_per_chart = [8, 40]
//!
//! [training]          # perturbations for refine_correct samples
//! omission_rate = 0.1
//!
//! [simulator]
//! fix_prob = 0.7
//! initial = { shift_sigma_px = 4.0 }
//!
//! [client]
//! kind = "remote"     # or "simulator"
//!
//! [remote]
//! base_url = "http://localhost:8000/v1"
//! model = "chart-parser"
//!
//! [prompts]
//! dir = "prompts"     # localize.txt, verify.txt, decode.txt, direct.txt
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use chartrefine_core::engine::{GeneratorConfig, PerturbationSpec};
use chartrefine_core::prompts::PromptTemplates;
use chartrefine_core::refine::SimulatorSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::remote::EndpointConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    #[default]
    Simulator,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSection {
    pub kind: ClientKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    /// Directory holding replacement templates; missing files keep the defaults.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub generator: GeneratorConfig,
    pub training: PerturbationSpec,
    pub simulator: SimulatorSpec,
    pub client: ClientSection,
    pub remote: Option<EndpointConfig>,
    pub prompts: PromptSection,
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let config: Config = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("{}: {}", origin.display(), e.to_string().trim_end())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Config::parse(&text, p)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, e: chartrefine_core::Error| CliError::Config(format!("[{section}] {e}"));
        self.generator.validate().map_err(|e| wrap("generator", e))?;
        self.training.validate().map_err(|e| wrap("training", e))?;
        self.simulator.validate().map_err(|e| wrap("simulator", e))?;
        if self.client.kind == ClientKind::Remote && self.remote.is_none() {
            return Err(CliError::Config(
                "[client] kind = \"remote\" needs a [remote] section".into(),
            ));
        }
        Ok(())
    }

    pub fn prompt_templates(&self) -> Result<PromptTemplates> {
        let mut t = PromptTemplates::default();
        let Some(dir) = &self.prompts.dir else { return Ok(t) };
        for (name, slot) in [
            ("localize.txt", &mut t.localize),
            ("verify.txt", &mut t.verify),
            ("decode.txt", &mut t.decode),
            ("direct.txt", &mut t.direct),
        ] {
            let path = dir.join(name);
            if path.is_file() {
                *slot = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            }
        }
        Ok(t)
    }
}
