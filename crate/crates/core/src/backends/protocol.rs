//! JSON wire protocol shared by remote clients and the mock server.
//!
//! Images travel as base64-encoded PNG. The transport itself (HTTP client
//! and server) lives outside this crate; [`dispatch`] maps an endpoint path
//! and request body onto a set of [`Ports`] so any server only has to route
//! bytes.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BackendError, BackendResult, EditTarget, Ports};
use crate::imaging::{BBox, Polygon, RasterImage};
use crate::layoutgen::LayoutElement;

pub const DETECT: &str = "/v1/detect";
pub const RECOGNIZE: &str = "/v1/recognize";
pub const ERASE: &str = "/v1/erase";
pub const PLAN_LAYOUT: &str = "/v1/plan_layout";
pub const EDIT_TEXT: &str = "/v1/edit_text";
pub const AUGMENT: &str = "/v1/augment";
pub const CAPABILITIES: &str = "/v1/capabilities";

/// JSON Schema (draft 2020-12) for every request and response body, keyed
/// under `$defs` by message name.
pub const WIRE_SCHEMA: &str = include_str!("../../data/schemas/wire.schema.json");

pub const ENDPOINTS: [&str; 6] = [DETECT, RECOGNIZE, ERASE, PLAN_LAYOUT, EDIT_TEXT, AUGMENT];

pub fn encode_image(image: &RasterImage) -> BackendResult<String> {
    Ok(STANDARD.encode(image.to_png_bytes()?))
}

pub fn decode_image(data: &str) -> BackendResult<RasterImage> {
    let bytes = STANDARD
        .decode(data.trim())
        .map_err(|e| BackendError::Malformed(format!("image is not base64: {e}")))?;
    Ok(RasterImage::from_png_bytes(&bytes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizeRequest {
    pub image: String,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognizeResponse {
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraseRequest {
    pub image: String,
    pub masks: Vec<BBox>,
    #[serde(default)]
    pub erase_all: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageResponse {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanLayoutRequest {
    pub image: String,
    pub existing: Vec<LayoutElement>,
    pub missing: Vec<String>,
    /// Instructions for model-backed planners; mocks ignore it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanLayoutResponse {
    pub elements: Vec<LayoutElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTextRequest {
    pub image: String,
    pub targets: Vec<EditTarget>,
    /// Per-call seed for stochastic editors.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTextResponse {
    pub image: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentRequest {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentResponse {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub ports: Vec<String>,
    /// `"concurrent"` or `"serialized"` per port.
    pub concurrency: BTreeMap<String, String>,
}

impl Capabilities {
    pub fn all_concurrent() -> Self {
        let ports: Vec<String> = ["detect", "recognize", "erase", "plan_layout", "edit_text", "augment"]
            .into_iter()
            .map(String::from)
            .collect();
        let concurrency = ports.iter().map(|p| (p.clone(), "concurrent".to_owned())).collect();
        Self { ports, concurrency }
    }
}

/// A failed request as a server reports it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub status: u16,
    pub body: ErrorBody,
}

impl Rejection {
    fn new(status: u16, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody { error: error.into() },
        }
    }
}

impl From<BackendError> for Rejection {
    fn from(e: BackendError) -> Self {
        let status = match &e {
            BackendError::Malformed(_) | BackendError::InvalidRequest(_) | BackendError::Imaging(_) => 400,
            BackendError::Overflow(_) => 422,
            BackendError::Status { status, .. } => *status,
            BackendError::Transport(_) => 502,
        };
        Self::new(status, e.to_string())
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, Rejection> {
    serde_json::from_slice(body).map_err(|e| Rejection::new(400, format!("bad request body: {e}")))
}

fn reply<T: Serialize>(value: &T) -> Result<Vec<u8>, Rejection> {
    serde_json::to_vec(value).map_err(|e| Rejection::new(500, e.to_string()))
}

/// Serve one POST request against `ports`. Returns the JSON response body.
pub fn dispatch(ports: &Ports, path: &str, body: &[u8]) -> Result<Vec<u8>, Rejection> {
    match path {
        DETECT => {
            let req: DetectRequest = parse(body)?;
            let image = decode_image(&req.image)?;
            let regions = ports.detector.detect(&image)?;
            reply(&DetectResponse {
                regions: regions.into_iter().map(|polygon| Region { polygon }).collect(),
            })
        }
        RECOGNIZE => {
            let req: RecognizeRequest = parse(body)?;
            let image = decode_image(&req.image)?;
            let polys: Vec<Polygon> = req.regions.into_iter().map(|r| r.polygon).collect();
            let words = ports.recognizer.recognize(&image, &polys)?;
            if words.len() != polys.len() {
                return Err(Rejection::new(500, "recognizer returned the wrong number of words"));
            }
            reply(&RecognizeResponse { words })
        }
        ERASE => {
            let req: EraseRequest = parse(body)?;
            let image = decode_image(&req.image)?;
            let out = ports.eraser.erase(&image, &req.masks, req.erase_all)?;
            reply(&ImageResponse {
                image: encode_image(&out)?,
            })
        }
        PLAN_LAYOUT => {
            let req: PlanLayoutRequest = parse(body)?;
            let image = decode_image(&req.image)?;
            let elements = ports.planner.plan(&image, &req.existing, &req.missing)?;
            reply(&PlanLayoutResponse { elements })
        }
        EDIT_TEXT => {
            let req: EditTextRequest = parse(body)?;
            let image = decode_image(&req.image)?;
            let out = ports.editor.edit(&image, &req.targets, req.seed)?;
            reply(&EditTextResponse {
                image: encode_image(&out.image)?,
                skipped: out.skipped,
            })
        }
        AUGMENT => {
            let req: AugmentRequest = parse(body)?;
            let prompt = ports.augmenter.augment(&req.prompt)?;
            reply(&AugmentResponse { prompt })
        }
        other => Err(Rejection::new(404, format!("no such endpoint {other}"))),
    }
}
