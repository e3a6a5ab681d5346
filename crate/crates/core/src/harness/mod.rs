//! Baseline-versus-pipeline experiment runner.
//!
//! A matrix names environments, anomaly placements and a seed count. Every
//! environment contributes anomaly-free trials (for the caption score table)
//! and one trial per placement and seed (for the detection table). Each trial
//! runs the single-query baseline and a full episode from the same seed, on
//! independent random streams:
//!
//! * baseline perception seed: `derive_seed(seed, "baseline")`
//! * episode seed: `derive_seed(seed, "episode")`

mod invariants;
mod report;

pub use invariants::check_episode;
pub use report::{aggregate, EnvironmentSummary, ExperimentReport, PlacementSummary};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    run_episode, ControllerBackend, EngineError, EpisodeConfig, EpisodeOutcome, OracleBackend, PerceptionBackend,
};
use crate::fact::parse_caption;
use crate::grammar::BOOTSTRAP_QUESTION;
use crate::perception::NoiseModel;
use crate::protocol::wire::{PerceptionQueryRequest, StructuredView, View};
use crate::rng;
use crate::scene::{load_scene_file, Scene, SceneError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Near,
    Far,
    Occluded,
}

impl Placement {
    pub const ALL: [Placement; 3] = [Placement::Near, Placement::Far, Placement::Occluded];
}

/// Which scene file of an environment a trial uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Clean,
    Near,
    Far,
    Occluded,
}

impl Variant {
    pub fn placement(self) -> Option<Placement> {
        match self {
            Variant::Clean => None,
            Variant::Near => Some(Placement::Near),
            Variant::Far => Some(Placement::Far),
            Variant::Occluded => Some(Placement::Occluded),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Clean => "clean",
            Variant::Near => "near",
            Variant::Far => "far",
            Variant::Occluded => "occluded",
        }
    }
}

impl From<Placement> for Variant {
    fn from(p: Placement) -> Self {
        match p {
            Placement::Near => Variant::Near,
            Placement::Far => Variant::Far,
            Placement::Occluded => Variant::Occluded,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scene file name for one environment variant.
pub fn scene_file_name(environment: &str, variant: Variant) -> String {
    format!("{environment}_{variant}.json")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    /// Directory of scene files, relative to the matrix file.
    pub scene_dir: PathBuf,
    pub environments: Vec<String>,
    #[serde(default = "default_placements")]
    pub placements: Vec<Placement>,
    #[serde(default = "default_seeds")]
    pub seeds: u32,
    #[serde(default = "default_true")]
    pub clean_runs: bool,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub episode: EpisodeConfig,
}

fn default_placements() -> Vec<Placement> {
    Placement::ALL.to_vec()
}

fn default_seeds() -> u32 {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("matrix file {path}: {source}")]
    Matrix {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("scene {path}: {source}")]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error("invalid matrix: {0}")]
    Invalid(String),
    #[error("no trials to aggregate")]
    Empty,
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("building worker pool: {0}")]
    Pool(String),
}

impl Matrix {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads a matrix file; `scene_dir` is resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m = Matrix::parse(&text).map_err(|source| HarnessError::Matrix {
            path: path.to_path_buf(),
            source,
        })?;
        if m.scene_dir.is_relative() {
            m.scene_dir = path.parent().unwrap_or(Path::new(".")).join(&m.scene_dir);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.environments.is_empty() {
            return Err(HarnessError::Invalid("no environments".into()));
        }
        if self.seeds == 0 {
            return Err(HarnessError::Invalid("seeds must be at least 1".into()));
        }
        if !self.noise.is_valid() {
            return Err(HarnessError::Invalid("noise probabilities must lie in [0, 1]".into()));
        }
        self.episode
            .validate()
            .map_err(|e| HarnessError::Invalid(e.to_string()))
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut v = Vec::new();
        if self.clean_runs {
            v.push(Variant::Clean);
        }
        v.extend(self.placements.iter().map(|p| Variant::from(*p)));
        v
    }

    /// Every (environment, variant, seed) cell in report order.
    pub fn cells(&self) -> Vec<TrialSpec> {
        let mut out = Vec::new();
        for env in &self.environments {
            for variant in self.variants() {
                for seed in 0..u64::from(self.seeds) {
                    out.push(TrialSpec {
                        environment: env.clone(),
                        variant,
                        seed,
                    });
                }
            }
        }
        out
    }

    /// Loads every scene the matrix needs.
    pub fn load_scenes(&self) -> Result<SceneSet, HarnessError> {
        let mut scenes = BTreeMap::new();
        for env in &self.environments {
            for variant in self.variants() {
                let path = self.scene_dir.join(scene_file_name(env, variant));
                let scene = load_scene_file(&path).map_err(|source| HarnessError::Scene {
                    path: path.clone(),
                    source,
                })?;
                scenes.insert((env.clone(), variant), Arc::new(scene));
            }
        }
        Ok(SceneSet { scenes })
    }
}

#[derive(Clone, Debug, Default)]
pub struct SceneSet {
    pub scenes: BTreeMap<(String, Variant), Arc<Scene>>,
}

impl SceneSet {
    pub fn get(&self, environment: &str, variant: Variant) -> Option<&Arc<Scene>> {
        self.scenes.get(&(environment.to_string(), variant))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Scene>> {
        self.scenes.values()
    }

    /// A synthetic perception backend that knows every scene in the set.
    pub fn oracle(&self, noise: NoiseModel) -> OracleBackend {
        let mut oracle = OracleBackend::new(noise);
        for s in self.iter() {
            oracle.add_scene(Arc::clone(s));
        }
        oracle
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialSpec {
    pub environment: String,
    pub variant: Variant,
    pub seed: u64,
}

impl TrialSpec {
    /// Identifier used in output file names.
    pub fn episode_id(&self) -> String {
        format!("{}_{}_{}", self.environment, self.variant, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub environment: String,
    pub variant: Variant,
    pub seed: u64,
    pub baseline_score: f64,
    pub proposed_score: f64,
    pub baseline_detected: bool,
    pub proposed_detected: bool,
    pub active_steps: u32,
    pub total_queries: u32,
    pub validation_queries: u32,
    pub saved_positions: u32,
    pub validation_targets: u32,
    pub early_stopped: bool,
    /// Empty for completed trials, otherwise the abort reason.
    pub failure: String,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        !self.failure.is_empty()
    }
}

/// A trial with the finished episode, when it completed.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub spec: TrialSpec,
    pub result: TrialResult,
    pub episode: Option<EpisodeOutcome>,
    /// Invariant violations found in the episode.
    pub violations: Vec<String>,
}

/// One "What do you see?" query at spawn.
pub fn eval_baseline(scene: &Scene, perception: &dyn PerceptionBackend, seed: u64) -> Result<(f64, bool), EngineError> {
    let request = PerceptionQueryRequest {
        question: BOOTSTRAP_QUESTION.to_string(),
        view: View::Structured(StructuredView {
            pose: scene.spawn,
            scene: scene.name.clone(),
            sample_seed: rng::derive_seed(seed, "baseline"),
        }),
    };
    let response = perception
        .query(&request)
        .map_err(|source| EngineError::Backend { turn: 0, source })?;
    let facts = parse_caption(&response.caption).map_err(|e| EngineError::BadResponse {
        turn: 0,
        message: e.to_string(),
    })?;
    Ok((response.match_score, facts.iter().any(|f| f.is_anomalous())))
}

pub fn run_trial(
    spec: &TrialSpec,
    scene: &Scene,
    config: &EpisodeConfig,
    controller: &dyn ControllerBackend,
    perception: &dyn PerceptionBackend,
) -> TrialOutcome {
    let mut result = TrialResult {
        environment: spec.environment.clone(),
        variant: spec.variant,
        seed: spec.seed,
        baseline_score: 0.0,
        proposed_score: 0.0,
        baseline_detected: false,
        proposed_detected: false,
        active_steps: 0,
        total_queries: 0,
        validation_queries: 0,
        saved_positions: 0,
        validation_targets: 0,
        early_stopped: false,
        failure: String::new(),
    };
    let baseline = eval_baseline(scene, perception, spec.seed);
    let episode_config = config.clone().with_seed(rng::derive_seed(spec.seed, "episode"));
    let episode = run_episode(scene, &episode_config, controller, perception);
    let (episode, violations) = match (baseline, episode) {
        (Ok((score, detected)), Ok(outcome)) => {
            let m = &outcome.report.metrics;
            result.baseline_score = score;
            result.baseline_detected = detected;
            result.proposed_score = m.mean_position_score();
            result.proposed_detected = m.anomaly_detected;
            result.active_steps = m.active_steps;
            result.total_queries = m.total_queries;
            result.validation_queries = m.validation_queries;
            result.saved_positions = m.saved_positions;
            result.validation_targets = m.validation_targets;
            result.early_stopped = m.early_stopped;
            let violations = check_episode(&outcome, &episode_config);
            (Some(outcome), violations)
        }
        (Err(e), _) | (_, Err(e)) => {
            log::warn!("trial {} failed: {e}", spec.episode_id());
            result.failure = e.to_string();
            (None, Vec::new())
        }
    };
    TrialOutcome {
        spec: spec.clone(),
        result,
        episode,
        violations,
    }
}

/// Runs every matrix cell on a pool of `parallel` workers. Results come back
/// in [`Matrix::cells`] order whatever the scheduling.
pub fn run_matrix(
    matrix: &Matrix,
    scenes: &SceneSet,
    controller: &dyn ControllerBackend,
    perception: &dyn PerceptionBackend,
    parallel: usize,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    let cells = matrix.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|spec| {
                let scene = scenes
                    .get(&spec.environment, spec.variant)
                    .expect("scenes are loaded for every cell");
                run_trial(spec, scene, &matrix.episode, controller, perception)
            })
            .collect()
    });
    Ok(outcomes)
}

/// Writes `report.csv`, `report.json`, one transcript per episode and the
/// explanation grids into `out`.
pub fn write_outputs(out: &Path, outcomes: &[TrialOutcome], report: &ExperimentReport) -> Result<(), HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Output { path, source }
    };
    let transcripts = out.join("transcripts");
    let salience = out.join("salience");
    for dir in [out, &transcripts, &salience] {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }

    let csv_path = out.join("report.csv");
    std::fs::write(&csv_path, report::trials_csv(&report.trials)).map_err(io(&csv_path))?;
    let json_path = out.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&json_path, json + "\n").map_err(io(&json_path))?;

    for o in outcomes {
        let Some(ep) = &o.episode else { continue };
        let id = o.spec.episode_id();
        let path = transcripts.join(format!("{id}.jsonl"));
        std::fs::write(&path, ep.state.transcript.to_jsonl()).map_err(io(&path))?;
        for pair in &ep.report.explanation_pairs {
            let path = salience.join(crate::engine::explanation_file_name(&id, pair.step));
            let mut buf = Vec::new();
            pair.salience.write_pgm(&mut buf).map_err(io(&path))?;
            std::fs::write(&path, buf).map_err(io(&path))?;
        }
    }
    Ok(())
}
