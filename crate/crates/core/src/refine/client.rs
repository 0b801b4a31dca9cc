use alloc::string::String;
use alloc::vec::Vec;

use crate::annotation::ParseResult;
use crate::geom::PixelPoint;
use crate::raster::Raster;

/// Verify-stage answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Confirm,
    /// Full replacement localization list.
    Corrected(Vec<PixelPoint>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unparseable model reply: {raw:?}")]
    Protocol { raw: String },
    #[error("{0}")]
    Other(String),
}

/// The three model roles. Every successful method call is one inference call.
pub trait ModelClient {
    fn localize(&mut self, image: &Raster) -> Result<Vec<PixelPoint>, ClientError>;

    fn verify(&mut self, original: &Raster, overlaid: &Raster, current: &[PixelPoint]) -> Result<Verdict, ClientError>;

    /// `anchors` is `None` for the single-shot baseline.
    fn decode(&mut self, image: &Raster, anchors: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError>;
}

impl<C: ModelClient + ?Sized> ModelClient for &mut C {
    fn localize(&mut self, image: &Raster) -> Result<Vec<PixelPoint>, ClientError> {
        (**self).localize(image)
    }

    fn verify(&mut self, original: &Raster, overlaid: &Raster, current: &[PixelPoint]) -> Result<Verdict, ClientError> {
        (**self).verify(original, overlaid, current)
    }

    fn decode(&mut self, image: &Raster, anchors: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError> {
        (**self).decode(image, anchors)
    }
}
