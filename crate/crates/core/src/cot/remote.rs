use std::sync::Arc;

use crate::remote::{InflightLimiter, JsonEndpoint, RemoteConfig};

use super::claim::Grounding;
use super::{CotError, LmClient, Proposal, ProposalRequest};

/// Sends each [`ProposalRequest`] as a JSON POST body and reads a
/// [`Proposal`] back. Only the rendered context leaves the process; the
/// grounding stays local and is used for validation.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    endpoint: JsonEndpoint,
}

impl RemoteClient {
    pub fn new(cfg: &RemoteConfig, limiter: Arc<InflightLimiter>) -> Result<Self, CotError> {
        Ok(Self {
            endpoint: JsonEndpoint::from_config(cfg, limiter)?,
        })
    }
}

impl LmClient for RemoteClient {
    fn name(&self) -> &str {
        "remote"
    }

    fn propose(
        &self,
        request: &ProposalRequest,
        _grounding: &Grounding,
    ) -> Result<Proposal, CotError> {
        Ok(self.endpoint.post(request)?)
    }
}
