//! Hierarchical localization: retrieval, co-visibility clustering, local
//! matching, per-cluster PnP.

mod gallery;
mod localize;
mod matching;

pub use gallery::{build_gallery, global_descriptor, GalleryMap, GalleryParams, GalleryPoint, GlobalProjector, Keyframe};
pub use localize::{localize, LocalizeParams, PoseEstimate};
pub use matching::{covis_cluster, match_nn_ratio, retrieve};

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct KeyframeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VlocError {
    #[error("the route yields no keyframes")]
    EmptyGallery,
    #[error("invalid gallery parameters: {0}")]
    InvalidParams(&'static str),
    #[error("gallery is inconsistent: {0}")]
    Inconsistent(&'static str),
}
