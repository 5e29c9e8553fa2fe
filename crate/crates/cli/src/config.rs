//! Declarative run configuration: pipeline knobs, mock settings and one
//! endpoint per port. Command-line flags are applied on top.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use glyphfix::backends::{
    BackendEndpoint, ByzantinePlanner, EndpointTarget, FlakyEditor, LayoutPlanner, MockAugmenter,
    MockDetector, MockEraser, MockPlanner, MockRecognizer, Ports, PromptAugmenter, TextDetector,
    TextEditor, TextEraser, TextRecognizer,
};
use glyphfix::pipeline::PipelineConfig;
use glyphfix_remote::RemotePort;
use serde::Deserialize;

pub const PORTS: [&str; 6] = ["detect", "recognize", "erase", "plan_layout", "edit_text", "augment"];

/// `"mock"`, `"mock:<name>"`, a URL, or a full endpoint table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EndpointSpec {
    Short(EndpointTarget),
    Full(BackendEndpoint),
}

impl EndpointSpec {
    pub fn endpoint(&self) -> BackendEndpoint {
        match self {
            Self::Short(target) => BackendEndpoint {
                target: target.clone(),
                ..BackendEndpoint::mock()
            },
            Self::Full(e) => e.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSettings {
    /// Success probability of the mock editor.
    pub editor_success: f64,
    pub editor_seed: u64,
    /// Seed for `mock:byzantine` planners.
    pub planner_seed: u64,
}

impl Default for MockSettings {
    fn default() -> Self {
        Self {
            editor_success: 1.0,
            editor_seed: 0,
            planner_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub mock: MockSettings,
    /// Pipeline ports; anything missing is the default mock.
    pub endpoints: BTreeMap<String, EndpointSpec>,
    /// Evaluation OCR (`detect`, `recognize`), kept apart from the pipeline's.
    pub eval: BTreeMap<String, EndpointSpec>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate().map_err(anyhow::Error::msg)?;
        if !(0.0..=1.0).contains(&self.mock.editor_success) {
            bail!("mock.editor_success must lie in [0, 1]");
        }
        for (table, map, allowed) in [
            ("endpoints", &self.endpoints, &PORTS[..]),
            ("eval", &self.eval, &PORTS[..2]),
        ] {
            for (port, spec) in map {
                if !allowed.contains(&port.as_str()) {
                    bail!("{table}.{port}: unknown port (expected one of {})", allowed.join(", "));
                }
                spec.endpoint().validate().map_err(|e| anyhow::anyhow!("{table}.{port}: {e}"))?;
            }
        }
        Ok(())
    }

    fn endpoint(map: &BTreeMap<String, EndpointSpec>, port: &str) -> BackendEndpoint {
        map.get(port).map(EndpointSpec::endpoint).unwrap_or_else(BackendEndpoint::mock)
    }

    pub fn ports(&self) -> Result<Ports> {
        let e = |p| Self::endpoint(&self.endpoints, p);
        let m = &self.mock;
        Ok(Ports {
            detector: port::<dyn TextDetector>(&e("detect"), Arc::new(MockDetector), vec![])?,
            recognizer: port::<dyn TextRecognizer>(&e("recognize"), Arc::new(MockRecognizer), vec![])?,
            eraser: port::<dyn TextEraser>(&e("erase"), Arc::new(MockEraser), vec![])?,
            planner: port::<dyn LayoutPlanner>(
                &e("plan_layout"),
                Arc::new(MockPlanner),
                vec![
                    ("band", Arc::new(MockPlanner)),
                    ("byzantine", Arc::new(ByzantinePlanner::new(m.planner_seed))),
                ],
            )?,
            editor: port::<dyn TextEditor>(
                &e("edit_text"),
                Arc::new(FlakyEditor::new(m.editor_success, m.editor_seed)),
                vec![],
            )?,
            augmenter: port::<dyn PromptAugmenter>(&e("augment"), Arc::new(MockAugmenter), vec![])?,
        })
    }

    /// Detector and recognizer used for scoring.
    pub fn eval_ports(&self) -> Result<Ports> {
        let mut ports = Ports::mock(self.mock.editor_success, self.mock.editor_seed);
        ports.detector = port::<dyn TextDetector>(&Self::endpoint(&self.eval, "detect"), Arc::new(MockDetector), vec![])?;
        ports.recognizer =
            port::<dyn TextRecognizer>(&Self::endpoint(&self.eval, "recognize"), Arc::new(MockRecognizer), vec![])?;
        Ok(ports)
    }
}

/// Resolve one endpoint: plain `mock` is the port's default mock, `mock:<name>`
/// one of the named alternatives.
fn port<T: ?Sized>(endpoint: &BackendEndpoint, default: Arc<T>, named: Vec<(&str, Arc<T>)>) -> Result<Arc<T>>
where
    RemotePort: IntoArc<T>,
{
    match &endpoint.target {
        EndpointTarget::Mock(None) => Ok(default),
        EndpointTarget::Mock(Some(name)) => match named.into_iter().find(|(n, _)| n == name) {
            Some((_, p)) => Ok(p),
            None => bail!("unknown mock {name:?}"),
        },
        EndpointTarget::Remote(_) => Ok(RemotePort::new(endpoint)?.into_arc()),
    }
}

pub trait IntoArc<T: ?Sized> {
    fn into_arc(self) -> Arc<T>;
}

macro_rules! into_arc {
    ($($t:path),*) => {$(
        impl IntoArc<dyn $t> for RemotePort {
            fn into_arc(self) -> Arc<dyn $t> {
                Arc::new(self)
            }
        }
    )*};
}

into_arc!(TextDetector, TextRecognizer, TextEraser, LayoutPlanner, TextEditor, PromptAugmenter);
