//! Model ports and their deterministic mock implementations.
//!
//! The pipeline never talks to a model directly. Detection, recognition,
//! erasing, layout planning, text editing and prompt augmentation all sit
//! behind the traits below so they can be served in-process by the mocks or
//! remotely over the JSON wire protocol in [`protocol`].

pub mod corpus;
pub mod font;
pub mod mock;
pub mod protocol;
pub mod rater;
pub mod scan;
pub mod scene;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{BBox, ImagingError, Polygon, RasterImage};
use crate::layoutgen::LayoutElement;

pub use mock::{
    ByzantinePlanner, FlakyEditor, MockAugmenter, MockDetector, MockEraser, MockPlanner,
    MockRecognizer,
};
pub use scene::{render_scene, Placement, SceneError, SyntheticScene};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no free band left on the canvas for {0:?}")]
    Overflow(Vec<String>),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub type BackendResult<T> = Result<T, BackendError>;

/// One word to render inside a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTarget {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOutput {
    pub image: RasterImage,
    /// Indices of targets that could not be rendered inside their box.
    pub skipped: Vec<usize>,
}

pub trait TextDetector: Send + Sync {
    fn detect(&self, image: &RasterImage) -> BackendResult<Vec<Polygon>>;
}

pub trait TextRecognizer: Send + Sync {
    /// One string per region, in region order. Blank regions read as `""`.
    fn recognize(&self, image: &RasterImage, regions: &[Polygon]) -> BackendResult<Vec<String>>;
}

pub trait TextEraser: Send + Sync {
    fn erase(&self, image: &RasterImage, masks: &[BBox], erase_all: bool)
        -> BackendResult<RasterImage>;
}

pub trait LayoutPlanner: Send + Sync {
    /// Elements are returned unvalidated; bounds and coverage are checked by
    /// the caller.
    fn plan(
        &self,
        image: &RasterImage,
        existing: &[LayoutElement],
        missing: &[String],
    ) -> BackendResult<Vec<LayoutElement>>;
}

pub trait TextEditor: Send + Sync {
    /// Render every target onto a copy of `image`. `seed` identifies the call
    /// so stochastic editors stay reproducible.
    fn edit(&self, image: &RasterImage, targets: &[EditTarget], seed: u64)
        -> BackendResult<EditOutput>;
}

pub trait PromptAugmenter: Send + Sync {
    fn augment(&self, prompt: &str) -> BackendResult<String>;
}

/// The full set of ports a pipeline run needs.
#[derive(Clone)]
pub struct Ports {
    pub detector: Arc<dyn TextDetector>,
    pub recognizer: Arc<dyn TextRecognizer>,
    pub eraser: Arc<dyn TextEraser>,
    pub planner: Arc<dyn LayoutPlanner>,
    pub editor: Arc<dyn TextEditor>,
    pub augmenter: Arc<dyn PromptAugmenter>,
}

impl Ports {
    /// All-mock ports with a flaky editor of the given success probability.
    pub fn mock(editor_success: f64, editor_seed: u64) -> Self {
        Self {
            detector: Arc::new(MockDetector),
            recognizer: Arc::new(MockRecognizer),
            eraser: Arc::new(MockEraser),
            planner: Arc::new(MockPlanner),
            editor: Arc::new(FlakyEditor::new(editor_success, editor_seed)),
            augmenter: Arc::new(MockAugmenter),
        }
    }
}

impl fmt::Debug for Ports {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Ports { .. }")
    }
}

/// Where a port is served from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EndpointTarget {
    /// `mock` or `mock:<name>`.
    Mock(Option<String>),
    Remote(String),
}

impl FromStr for EndpointTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "mock" {
            return Ok(Self::Mock(None));
        }
        if let Some(name) = s.strip_prefix("mock:") {
            if name.is_empty() {
                return Err("empty mock name".into());
            }
            return Ok(Self::Mock(Some(name.to_owned())));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(Self::Remote(s.trim_end_matches('/').to_owned()));
        }
        Err(format!("endpoint {s:?} is neither a URL nor mock[:name]"))
    }
}

impl TryFrom<String> for EndpointTarget {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EndpointTarget> for String {
    fn from(t: EndpointTarget) -> Self {
        t.to_string()
    }
}

impl fmt::Display for EndpointTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mock(None) => f.write_str("mock"),
            Self::Mock(Some(name)) => write!(f, "mock:{name}"),
            Self::Remote(url) => f.write_str(url),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub target: EndpointTarget,
    #[serde(default = "BackendEndpoint::default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "BackendEndpoint::default_retries")]
    pub retries: u32,
}

impl BackendEndpoint {
    fn default_timeout() -> f64 {
        60.0
    }

    fn default_retries() -> u32 {
        5
    }

    pub fn mock() -> Self {
        Self {
            target: EndpointTarget::Mock(None),
            timeout_secs: Self::default_timeout(),
            retries: Self::default_retries(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for a string id (FNV-1a).
pub fn seed_for_id(id: &str) -> u64 {
    id.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
