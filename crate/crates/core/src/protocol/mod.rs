//! HTTP/JSON transport for remote controller and perception models.
//!
//! Three endpoints, all `POST` with JSON bodies and an `Idempotency-Key`
//! header: `/controller/turn`, `/controller/summary` and
//! `/perception/query`. The bodies are the types in [`wire`]; their JSON
//! Schemas ship in `schemas/v1/`.

pub mod client;
pub mod preamble;
pub mod server;
pub mod wire;

pub use client::{BackendEndpoint, Called, ClientError, ProtocolClient, RemoteController, RemotePerception};
pub use preamble::{build_controller_preamble, PreambleConfig, PREAMBLE_ID};
pub use server::{FaultPlan, Handler, HttpServer, IncomingRequest, ReferenceService};
