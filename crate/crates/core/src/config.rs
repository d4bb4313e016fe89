//! Engine configuration: thresholds, camera and brick layout, workspace
//! envelope, reasoning client, perception backend, and worker count.
//!
//! Every field has a default, so `{}` is a complete configuration. Remote
//! endpoints may be left unset and supplied through `ESPATIAL_ENDPOINT`;
//! tokens are only ever read from the environment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cot::{CotError, FallbackReasoner, LmClient, Policy, RemoteClient};
use crate::files::{self, FileError};
use crate::geometry::{CameraModel, Thresholds};
use crate::lego::BrickLayout;
use crate::perception::{
    FileBackend, PerceptionBackend, PerceptionError, RemoteBackend, SyntheticBackend,
};
use crate::query::WorkspaceEnvelope;
use crate::remote::{InflightLimiter, RemoteConfig};
use crate::scene::Dynamics;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    #[default]
    Fallback,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub kind: ClientKind,
    pub remote: RemoteConfig,
    #[serde(flatten)]
    pub policy: Policy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Synthetic,
    File,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Recorded scene files for the file backend.
    pub files: Vec<PathBuf>,
    pub remote: RemoteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub thresholds: Thresholds,
    pub camera: CameraModel,
    pub layout: BrickLayout,
    pub workspace: WorkspaceEnvelope,
    pub client: ClientConfig,
    pub backend: BackendConfig,
    /// Benchmark worker threads; 0 picks one per core.
    pub workers: usize,
    /// Largest distance error, in meters, still scored as correct.
    pub distance_tolerance_m: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            camera: CameraModel::default(),
            layout: BrickLayout::default(),
            workspace: WorkspaceEnvelope::default(),
            client: ClientConfig::default(),
            backend: BackendConfig::default(),
            workers: 0,
            distance_tolerance_m: 0.01,
        }
    }
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, FileError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let inner = e.inner();
            if inner.is_syntax() || inner.is_eof() {
                FileError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                }
            } else {
                FileError::Field {
                    field: e.path().to_string(),
                    message: inner.to_string(),
                }
            }
        })?;
        de.end().map_err(|e| FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.workspace
            .validate()
            .map_err(|e| FileError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FileError> {
        Self::from_json(&files::read(path)?)
    }

    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            thresholds: self.thresholds,
            camera: self.camera,
            layout: self.layout,
        }
    }

    pub fn client(&self) -> Result<Box<dyn LmClient>, CotError> {
        Ok(match self.client.kind {
            ClientKind::Fallback => Box::new(FallbackReasoner),
            ClientKind::Remote => {
                let limiter = Arc::new(InflightLimiter::new(self.client.remote.max_in_flight));
                Box::new(RemoteClient::new(&self.client.remote, limiter)?)
            }
        })
    }

    pub fn backend(&self) -> Result<Box<dyn PerceptionBackend>, PerceptionError> {
        Ok(match self.backend.kind {
            BackendKind::Synthetic => Box::new(SyntheticBackend),
            BackendKind::File => Box::new(FileBackend::load(&self.backend.files)?),
            BackendKind::Remote => {
                let limiter = Arc::new(InflightLimiter::new(self.backend.remote.max_in_flight));
                Box::new(RemoteBackend::new(&self.backend.remote, limiter)?)
            }
        })
    }
}
