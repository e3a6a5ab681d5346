//! The two model roles the engine talks to.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::grammar::Question;
use crate::perception::{query, NoiseModel, ViewQuery};
use crate::protocol::wire::{Message, PerceptionQueryRequest, PerceptionQueryResponse, View};
use crate::rng;
use crate::scene::Scene;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("backend rejected request: {0}")]
    Rejected(String),
}

/// The controller side: reads the dialogue so far and answers in the canonical
/// grammar.
pub trait ControllerBackend: Send + Sync {
    /// Next active-perception turn (`command:` / `question:` lines).
    fn next_turn(&self, history: &[Message]) -> Result<String, BackendError>;

    /// Summary and validation targets (`description:` / `caption:` /
    /// `validate:` lines).
    fn summary(&self, history: &[Message]) -> Result<String, BackendError>;
}

/// The perception side: answers one question about one view.
pub trait PerceptionBackend: Send + Sync {
    fn query(&self, request: &PerceptionQueryRequest) -> Result<PerceptionQueryResponse, BackendError>;
}

impl<T: ControllerBackend + ?Sized> ControllerBackend for &T {
    fn next_turn(&self, history: &[Message]) -> Result<String, BackendError> {
        (**self).next_turn(history)
    }
    fn summary(&self, history: &[Message]) -> Result<String, BackendError> {
        (**self).summary(history)
    }
}

impl<T: PerceptionBackend + ?Sized> PerceptionBackend for &T {
    fn query(&self, request: &PerceptionQueryRequest) -> Result<PerceptionQueryResponse, BackendError> {
        (**self).query(request)
    }
}

/// In-process perception backed by the synthetic oracle. Scenes are looked
/// up by name from structured views; image views are rejected.
#[derive(Clone, Debug)]
pub struct OracleBackend {
    scenes: HashMap<String, Arc<Scene>>,
    noise: NoiseModel,
}

impl OracleBackend {
    pub fn new(noise: NoiseModel) -> Self {
        Self {
            scenes: HashMap::new(),
            noise,
        }
    }

    pub fn with_scene(mut self, scene: Arc<Scene>) -> Self {
        self.add_scene(scene);
        self
    }

    pub fn add_scene(&mut self, scene: Arc<Scene>) {
        self.scenes.insert(scene.name.clone(), scene);
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
}

impl PerceptionBackend for OracleBackend {
    fn query(&self, request: &PerceptionQueryRequest) -> Result<PerceptionQueryResponse, BackendError> {
        let view = match &request.view {
            View::Structured(v) => v,
            View::Image(_) => {
                return Err(BackendError::Rejected(
                    "the synthetic oracle needs a structured view".into(),
                ))
            }
        };
        let scene = self
            .scenes
            .get(&view.scene)
            .ok_or_else(|| BackendError::Rejected(format!("unknown scene {:?}", view.scene)))?;
        let vq = ViewQuery {
            pose: view.pose,
            question: Question::parse(&request.question),
        };
        let mut stream = rng::stream(rng::derive_indexed(self.noise.seed, view.sample_seed));
        let result = query(scene, &vq, &self.noise, &mut stream).map_err(|e| BackendError::Rejected(e.to_string()))?;
        Ok(PerceptionQueryResponse {
            answer: result.answer,
            caption: result.caption,
            match_score: result.match_score,
            salience: Some(result.salience),
        })
    }
}
