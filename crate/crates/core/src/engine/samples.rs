//! Training samples for the three refine roles and the decode role.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::annotation::ParseResult;
use crate::engine::perturb::{inject_errors, PerturbationSpec, Perturbed};
use crate::error::Result;
use crate::geom::PixelPoint;
use crate::prompts::{PromptTemplates, CONFIRM_TOKEN};
use crate::raster::Raster;
use crate::render::{overlay_markers, RenderedChart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    RefineFromScratch,
    RefineCorrect,
    RefineConfirm,
    Decode,
}

/// Which image a sample refers to; the writer maps roles to file paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageRole {
    Original,
    ConfirmOverlay,
    CorrectOverlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleTarget {
    Localizations(Vec<PixelPoint>),
    Token(String),
    Parse(ParseResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub chart_id: String,
    pub kind: SampleKind,
    pub images: Vec<ImageRole>,
    pub prompt: String,
    pub target: SampleTarget,
}

/// Samples plus the overlay images they reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<TrainingSample>,
    pub confirm_overlay: Raster,
    pub correct_overlay: Raster,
    pub perturbed: Perturbed,
}

impl TrainingSet {
    pub fn image(&self, role: ImageRole) -> Option<&Raster> {
        match role {
            ImageRole::Original => None,
            ImageRole::ConfirmOverlay => Some(&self.confirm_overlay),
            ImageRole::CorrectOverlay => Some(&self.correct_overlay),
        }
    }
}

pub fn build_training_samples(
    rc: &RenderedChart,
    spec: &PerturbationSpec,
    seed: u64,
    prompts: &PromptTemplates,
) -> Result<TrainingSet> {
    let ann = &rc.annotation;
    let (w, h) = (ann.image.width, ann.image.height);
    let anchors = ann.anchors();
    let perturbed = inject_errors(ann, spec, seed)?;
    let id = ann.chart_id.clone();
    let sample = |kind, images, prompt, target| TrainingSample {
        chart_id: id.clone(),
        kind,
        images,
        prompt,
        target,
    };
    let samples = vec![
        sample(
            SampleKind::RefineFromScratch,
            vec![ImageRole::Original],
            prompts.localize(w, h),
            SampleTarget::Localizations(anchors.clone()),
        ),
        sample(
            SampleKind::RefineConfirm,
            vec![ImageRole::Original, ImageRole::ConfirmOverlay],
            prompts.verify(w, h, &anchors),
            SampleTarget::Token(CONFIRM_TOKEN.into()),
        ),
        sample(
            SampleKind::RefineCorrect,
            vec![ImageRole::Original, ImageRole::CorrectOverlay],
            prompts.verify(w, h, &perturbed.points),
            SampleTarget::Localizations(anchors.clone()),
        ),
        sample(
            SampleKind::Decode,
            vec![ImageRole::Original],
            prompts.decode(w, h, Some(&anchors)),
            SampleTarget::Parse(ParseResult::from(ann)),
        ),
    ];
    Ok(TrainingSet {
        samples,
        confirm_overlay: overlay_markers(&rc.image, &anchors).image,
        correct_overlay: overlay_markers(&rc.image, &perturbed.points).image,
        perturbed,
    })
}
