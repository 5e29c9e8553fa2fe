use std::sync::Arc;
use std::thread;
use std::time::Duration;

use glyphfix::backends::protocol::{
    self, AugmentRequest, AugmentResponse, DetectRequest, DetectResponse, EditTextRequest,
    EditTextResponse, EraseRequest, ErrorBody, ImageResponse, PlanLayoutRequest,
    PlanLayoutResponse, RecognizeRequest, RecognizeResponse, Region,
};
use glyphfix::backends::{
    BackendEndpoint, BackendError, BackendResult, EditOutput, EditTarget, EndpointTarget,
    LayoutPlanner, PromptAugmenter, TextDetector, TextEditor, TextEraser, TextRecognizer,
};
use glyphfix::imaging::{BBox, Polygon, RasterImage};
use glyphfix::layoutgen::{LayoutElement, LAYOUT_SYSTEM_PROMPT};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

const BACKOFF_BASE: Duration = Duration::from_millis(50);
const BACKOFF_CAP: Duration = Duration::from_secs(2);

/// One remote endpoint. Implements every port trait; which ones are used
/// depends on where it is plugged in.
#[derive(Debug, Clone)]
pub struct RemotePort {
    base: String,
    retries: u32,
    client: Client,
}

impl RemotePort {
    pub fn new(endpoint: &BackendEndpoint) -> BackendResult<Self> {
        endpoint.validate().map_err(BackendError::InvalidRequest)?;
        let EndpointTarget::Remote(base) = &endpoint.target else {
            return Err(BackendError::InvalidRequest(format!(
                "{} is not a remote endpoint",
                endpoint.target
            )));
        };
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(endpoint.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            base: base.clone(),
            retries: endpoint.retries,
            client,
        })
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(&self, url: &str, body: &Req) -> Result<Resp, (bool, BackendError)> {
        let response = self
            .client
            .post(url)
            .json(body)
            .send()
            .map_err(|e| (true, BackendError::Transport(format!("{url}: {e}"))))?;
        let status = response.status();
        if status.is_success() {
            return response
                .json::<Resp>()
                .map_err(|e| (false, BackendError::Malformed(format!("{url}: {e}"))));
        }
        let text = response.text().unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text)
            .map(|b| b.error)
            .unwrap_or(text);
        let transient = status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS;
        Err((
            transient,
            BackendError::Status {
                status: status.as_u16(),
                message,
            },
        ))
    }

    /// POST with retries on transport failures and 5xx/429 answers. Other
    /// client errors are deterministic and surface immediately.
    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> BackendResult<Resp> {
        let url = format!("{}{}", self.base, path);
        let mut delay = BACKOFF_BASE;
        let mut tries = 0;
        loop {
            match self.attempt(&url, body) {
                Ok(r) => return Ok(r),
                Err((true, _)) if tries < self.retries => {
                    tries += 1;
                    thread::sleep(delay);
                    delay = (delay * 2).min(BACKOFF_CAP);
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}

impl TextDetector for RemotePort {
    fn detect(&self, image: &RasterImage) -> BackendResult<Vec<Polygon>> {
        let resp: DetectResponse = self.post(
            protocol::DETECT,
            &DetectRequest {
                image: protocol::encode_image(image)?,
            },
        )?;
        Ok(resp.regions.into_iter().map(|r| r.polygon).collect())
    }
}

impl TextRecognizer for RemotePort {
    fn recognize(&self, image: &RasterImage, regions: &[Polygon]) -> BackendResult<Vec<String>> {
        let resp: RecognizeResponse = self.post(
            protocol::RECOGNIZE,
            &RecognizeRequest {
                image: protocol::encode_image(image)?,
                regions: regions.iter().map(|p| Region { polygon: p.clone() }).collect(),
            },
        )?;
        if resp.words.len() != regions.len() {
            return Err(BackendError::Malformed(format!(
                "{} words for {} regions",
                resp.words.len(),
                regions.len()
            )));
        }
        Ok(resp.words)
    }
}

impl TextEraser for RemotePort {
    fn erase(&self, image: &RasterImage, masks: &[BBox], erase_all: bool) -> BackendResult<RasterImage> {
        let resp: ImageResponse = self.post(
            protocol::ERASE,
            &EraseRequest {
                image: protocol::encode_image(image)?,
                masks: masks.to_vec(),
                erase_all,
            },
        )?;
        protocol::decode_image(&resp.image)
    }
}

impl LayoutPlanner for RemotePort {
    fn plan(&self, image: &RasterImage, existing: &[LayoutElement], missing: &[String]) -> BackendResult<Vec<LayoutElement>> {
        let resp: PlanLayoutResponse = self.post(
            protocol::PLAN_LAYOUT,
            &PlanLayoutRequest {
                image: protocol::encode_image(image)?,
                existing: existing.to_vec(),
                missing: missing.to_vec(),
                system_prompt: Some(LAYOUT_SYSTEM_PROMPT.to_owned()),
            },
        )?;
        Ok(resp.elements)
    }
}

impl TextEditor for RemotePort {
    fn edit(&self, image: &RasterImage, targets: &[EditTarget], seed: u64) -> BackendResult<EditOutput> {
        let resp: EditTextResponse = self.post(
            protocol::EDIT_TEXT,
            &EditTextRequest {
                image: protocol::encode_image(image)?,
                targets: targets.to_vec(),
                seed,
            },
        )?;
        Ok(EditOutput {
            image: protocol::decode_image(&resp.image)?,
            skipped: resp.skipped,
        })
    }
}

impl PromptAugmenter for RemotePort {
    fn augment(&self, prompt: &str) -> BackendResult<String> {
        let resp: AugmentResponse = self.post(
            protocol::AUGMENT,
            &AugmentRequest {
                prompt: prompt.to_owned(),
            },
        )?;
        Ok(resp.prompt)
    }
}

/// Every port pointed at the same server.
pub fn remote_ports(endpoint: &BackendEndpoint) -> BackendResult<glyphfix::backends::Ports> {
    let port = Arc::new(RemotePort::new(endpoint)?);
    Ok(glyphfix::backends::Ports {
        detector: port.clone(),
        recognizer: port.clone(),
        eraser: port.clone(),
        planner: port.clone(),
        editor: port.clone(),
        augmenter: port,
    })
}
