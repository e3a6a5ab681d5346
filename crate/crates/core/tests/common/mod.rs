#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Mutex;

use dronedialog::engine::{BackendError, ControllerBackend};
use dronedialog::harness::Matrix;
use dronedialog::protocol::wire::Message;
use dronedialog::scene::{parse_scene, Scene};

pub mod strategies;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn default_matrix() -> Matrix {
    Matrix::load(repo_root().join("matrix.toml")).expect("shipped matrix loads")
}

pub fn shipped_scene(name: &str) -> Scene {
    dronedialog::scene::load_scene_file(repo_root().join("scenes").join(format!("{name}.json")))
        .expect("shipped scene loads")
}

/// Object spec: (id, label, attributes, center, extent, anomaly, occluder).
pub type Obj<'a> = (&'a str, &'a str, &'a [&'a str], [f64; 3], [f64; 3], bool, bool);

/// A small scene with spawn at (0, 0, 10) facing +x, 90° FOV, 80 m range.
pub fn scene(name: &str, objects: &[Obj]) -> Scene {
    let objs: Vec<String> = objects
        .iter()
        .map(|(id, label, attrs, c, e, anomaly, occluder)| {
            format!(
                r#"{{"id": "{id}", "label": "{label}", "attributes": {attrs:?}, "center": {c:?}, "extent": {e:?}, "is_anomaly": {anomaly}, "is_occluder": {occluder}}}"#
            )
        })
        .collect();
    let doc = format!(
        r#"{{"name": "{name}", "bounds": {{"min": [-50, -50, 0], "max": [100, 50, 40]}},
            "spawn": {{"position": [0, 0, 10], "yaw": 0}},
            "camera": {{"fov_deg": 90, "max_range": 80}},
            "objects": [{}]}}"#,
        objs.join(",")
    );
    parse_scene(&doc).expect("test scene is valid")
}

/// Replays canned controller outputs; once the turn queue is empty it
/// answers `command: i know enough`.
#[derive(Default)]
pub struct QueueController {
    turns: Mutex<VecDeque<String>>,
    summary: String,
    pub seen: Mutex<Vec<Vec<Message>>>,
}

impl QueueController {
    pub fn new(turns: &[&str], summary: &str) -> Self {
        Self {
            turns: Mutex::new(turns.iter().map(|s| s.to_string()).collect()),
            summary: summary.to_string(),
            seen: Mutex::new(Vec::new()),
        }
    }
}

impl ControllerBackend for QueueController {
    fn next_turn(&self, history: &[Message]) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push(history.to_vec());
        Ok(self
            .turns
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| "command: i know enough".to_string()))
    }

    fn summary(&self, history: &[Message]) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push(history.to_vec());
        Ok(self.summary.clone())
    }
}

/// Perception stub answering every question "yes" with probability `p_yes`,
/// drawn from the request's own seed, and never reporting any objects.
pub struct CoinPerception {
    pub p_yes: f64,
}

impl dronedialog::engine::PerceptionBackend for CoinPerception {
    fn query(
        &self,
        request: &dronedialog::protocol::wire::PerceptionQueryRequest,
    ) -> Result<dronedialog::protocol::wire::PerceptionQueryResponse, BackendError> {
        use rand::Rng;
        let dronedialog::protocol::wire::View::Structured(view) = &request.view else {
            return Err(BackendError::Rejected("structured views only".into()));
        };
        let yes = dronedialog::rng::stream(view.sample_seed).random::<f64>() < self.p_yes;
        Ok(dronedialog::protocol::wire::PerceptionQueryResponse {
            answer: if yes { "yes" } else { "no" }.to_string(),
            caption: dronedialog::fact::EMPTY_CAPTION.to_string(),
            match_score: 0.0,
            salience: None,
        })
    }
}

/// P(X > n/2) for X ~ Binomial(n, p), n odd.
pub fn majority_probability(n: u32, p: f64) -> f64 {
    let choose = |n: u32, k: u32| (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1));
    (n / 2 + 1..=n)
        .map(|k| choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
        .sum()
}
