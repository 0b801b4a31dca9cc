//! Prompt templates with `{name}` placeholders.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::geom::PixelPoint;

/// Literal verify reply meaning "localizations are correct".
pub const CONFIRM_TOKEN: &str = "CONFIRM";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub localize: String,
    pub verify: String,
    pub decode: String,
    /// Decode without localizations (single-shot baseline).
    pub direct: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            localize: include_str!("../prompts/localize.txt").into(),
            verify: include_str!("../prompts/verify.txt").into(),
            decode: include_str!("../prompts/decode.txt").into(),
            direct: include_str!("../prompts/direct.txt").into(),
        }
    }
}

/// Replaces each `{key}` with its value. Unknown placeholders stay untouched.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::from(template);
    for (k, v) in vars {
        out = out.replace(&alloc::format!("{{{k}}}"), v);
    }
    out
}

/// `[[x, y], ...]`, the wire format for localization lists.
pub fn points_json(points: &[PixelPoint]) -> String {
    let items: Vec<String> = points.iter().map(|p| alloc::format!("[{}, {}]", p.x, p.y)).collect();
    alloc::format!("[{}]", items.join(", "))
}

impl PromptTemplates {
    pub fn localize(&self, width: u32, height: u32) -> String {
        fill(
            &self.localize,
            &[("width", &width.to_string()), ("height", &height.to_string())],
        )
    }

    pub fn verify(&self, width: u32, height: u32, current: &[PixelPoint]) -> String {
        fill(
            &self.verify,
            &[
                ("width", &width.to_string()),
                ("height", &height.to_string()),
                ("localizations", &points_json(current)),
            ],
        )
    }

    pub fn decode(&self, width: u32, height: u32, anchors: Option<&[PixelPoint]>) -> String {
        let w = width.to_string();
        let h = height.to_string();
        match anchors {
            Some(a) => fill(
                &self.decode,
                &[("width", &w), ("height", &h), ("localizations", &points_json(a))],
            ),
            None => fill(&self.direct, &[("width", &w), ("height", &h)]),
        }
    }
}
