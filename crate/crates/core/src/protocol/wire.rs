//! JSON bodies exchanged with model backends (schema version 1).

use serde::{Deserialize, Serialize};

use crate::engine::Mode;
use crate::geometry::Pose;
use crate::perception::SalienceGrid;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Engine,
    Controller,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn engine(text: impl Into<String>) -> Self {
        Self {
            role: Role::Engine,
            text: text.into(),
        }
    }

    pub fn controller(text: impl Into<String>) -> Self {
        Self {
            role: Role::Controller,
            text: text.into(),
        }
    }
}

/// Body of `POST /controller/turn` and `POST /controller/summary`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerTurnRequest {
    pub history: Vec<Message>,
    pub mode: Mode,
    pub preamble_id: String,
}

/// Response envelope for both controller endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerTextResponse {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredView {
    pub pose: Pose,
    pub scene: String,
    /// Seed of the perception noise stream for this single query.
    pub sample_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageView {
    /// Base64-encoded image bytes.
    pub data: String,
}

/// Exactly one of the two view forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum View {
    Structured(StructuredView),
    Image(ImageView),
}

/// Body of `POST /perception/query`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionQueryRequest {
    pub question: String,
    pub view: View,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionQueryResponse {
    pub answer: String,
    pub caption: String,
    pub match_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salience: Option<SalienceGrid>,
}

/// Structured error body returned with 4xx/5xx statuses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub code: String,
}
