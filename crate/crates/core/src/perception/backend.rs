use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::remote::{InflightLimiter, JsonEndpoint, RemoteConfig};

use super::entities::extract_entities_fallback;
use super::{DetectionRecord, EntityQueue, PerceptionError, PerceptionFrame};

/// The three perception capabilities. `extract_entities` defaults to the
/// rule-based extractor.
pub trait PerceptionBackend: Send + Sync {
    fn extract_entities(&self, question: &str) -> Result<EntityQueue, PerceptionError> {
        extract_entities_fallback(question)
    }

    /// Detections for `frame`, keeping only those matching an entity and
    /// ordered by entity priority. An empty queue keeps everything in frame
    /// order.
    fn detect(
        &self,
        entities: &EntityQueue,
        frame: &PerceptionFrame,
    ) -> Result<Vec<DetectionRecord>, PerceptionError>;

    /// One depth in meters per frame detection.
    fn estimate_depth(&self, frame: &PerceptionFrame) -> Result<Vec<f64>, PerceptionError>;
}

fn filter_by_priority(entities: &EntityQueue, records: &[DetectionRecord]) -> Vec<DetectionRecord> {
    if entities.is_empty() {
        return records.to_vec();
    }
    let mut ranked: Vec<(usize, &DetectionRecord)> = records
        .iter()
        .filter_map(|d| entities.priority_of(d).map(|r| (r, d)))
        .collect();
    ranked.sort_by_key(|(r, _)| *r);
    ranked.into_iter().map(|(_, d)| d.clone()).collect()
}

/// Ground truth: the frame's own records are the detections and depths.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticBackend;

impl PerceptionBackend for SyntheticBackend {
    fn detect(
        &self,
        entities: &EntityQueue,
        frame: &PerceptionFrame,
    ) -> Result<Vec<DetectionRecord>, PerceptionError> {
        Ok(filter_by_priority(entities, &frame.detections))
    }

    fn estimate_depth(&self, frame: &PerceptionFrame) -> Result<Vec<f64>, PerceptionError> {
        Ok(frame.depths.clone())
    }
}

/// Pre-recorded perception output, looked up by the frame's `image_ref` and
/// `t`. Frames with no recording are reported as unavailable.
#[derive(Debug, Clone, Default)]
pub struct FileBackend {
    recordings: Vec<PerceptionFrame>,
}

impl FileBackend {
    pub fn new(recordings: Vec<PerceptionFrame>) -> Self {
        Self { recordings }
    }

    pub fn load(paths: &[impl AsRef<Path>]) -> Result<Self, PerceptionError> {
        let recordings = paths
            .iter()
            .map(super::load_scene)
            .collect::<Result<_, _>>()?;
        Ok(Self { recordings })
    }

    fn recording(&self, frame: &PerceptionFrame) -> Result<&PerceptionFrame, PerceptionError> {
        self.recordings
            .iter()
            .find(|r| r.image_ref == frame.image_ref && r.t == frame.t)
            .ok_or_else(|| {
                PerceptionError::BackendUnavailable(format!(
                    "no recording for `{}` at t={}",
                    frame.image_ref, frame.t
                ))
            })
    }
}

impl PerceptionBackend for FileBackend {
    fn detect(
        &self,
        entities: &EntityQueue,
        frame: &PerceptionFrame,
    ) -> Result<Vec<DetectionRecord>, PerceptionError> {
        Ok(filter_by_priority(
            entities,
            &self.recording(frame)?.detections,
        ))
    }

    fn estimate_depth(&self, frame: &PerceptionFrame) -> Result<Vec<f64>, PerceptionError> {
        Ok(self.recording(frame)?.depths.clone())
    }
}

/// Request body sent to a remote perception endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PerceptionRequest {
    ExtractEntities {
        question: String,
    },
    Detect {
        entities: Vec<String>,
        image_ref: String,
        t: u64,
    },
    EstimateDepth {
        image_ref: String,
        t: u64,
        detections: Vec<DetectionRecord>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerceptionResponse {
    Entities { entities: Vec<String> },
    Detections { detections: Vec<DetectionRecord> },
    Depths { depths: Vec<f64> },
}

/// Forwards each capability to an external model service as a JSON POST.
/// Entity labels returned by the service are re-parsed locally so that
/// matching stays rule-based.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    endpoint: JsonEndpoint,
}

impl RemoteBackend {
    pub fn new(cfg: &RemoteConfig, limiter: Arc<InflightLimiter>) -> Result<Self, PerceptionError> {
        Ok(Self {
            endpoint: JsonEndpoint::from_config(cfg, limiter)?,
        })
    }

    fn call(&self, req: &PerceptionRequest) -> Result<PerceptionResponse, PerceptionError> {
        Ok(self.endpoint.post(req)?)
    }

    fn unexpected(&self, what: &str) -> PerceptionError {
        PerceptionError::BackendUnavailable(format!(
            "{} returned an unexpected response to {what}",
            self.endpoint.url()
        ))
    }
}

impl PerceptionBackend for RemoteBackend {
    fn extract_entities(&self, question: &str) -> Result<EntityQueue, PerceptionError> {
        if question.trim().is_empty() {
            return Err(PerceptionError::EmptyQuestion);
        }
        match self.call(&PerceptionRequest::ExtractEntities {
            question: question.into(),
        })? {
            PerceptionResponse::Entities { entities } => {
                let parsed = entities
                    .iter()
                    .filter_map(|label| extract_entities_fallback(label).ok())
                    .filter_map(|q| q.entries().first().cloned())
                    .collect();
                Ok(EntityQueue::new(parsed))
            }
            _ => Err(self.unexpected("extract_entities")),
        }
    }

    fn detect(
        &self,
        entities: &EntityQueue,
        frame: &PerceptionFrame,
    ) -> Result<Vec<DetectionRecord>, PerceptionError> {
        let req = PerceptionRequest::Detect {
            entities: entities.labels().into_iter().map(str::to_string).collect(),
            image_ref: frame.image_ref.clone(),
            t: frame.t,
        };
        match self.call(&req)? {
            PerceptionResponse::Detections { detections } => Ok(detections),
            _ => Err(self.unexpected("detect")),
        }
    }

    fn estimate_depth(&self, frame: &PerceptionFrame) -> Result<Vec<f64>, PerceptionError> {
        let req = PerceptionRequest::EstimateDepth {
            image_ref: frame.image_ref.clone(),
            t: frame.t,
            detections: frame.detections.clone(),
        };
        match self.call(&req)? {
            PerceptionResponse::Depths { depths } => Ok(depths),
            _ => Err(self.unexpected("estimate_depth")),
        }
    }
}
