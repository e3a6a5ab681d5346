//! The three-mode dialogue loop.
//!
//! An episode starts with the bootstrap question at the spawn pose, then
//! alternates controller turns and perception queries (active perception).
//! When the controller says it knows enough, the step budget runs out, or an
//! anomaly is heard with early stop enabled, the engine asks the controller
//! for a summary and validation targets and revisits the saved positions
//! under Gaussian pose noise, asking one presence question per target at
//! each perturbed pose (validation). Targets are settled by majority vote.
//! Finally the drone returns to spawn and the confirmed facts are composed
//! into the report together with salience maps for the best-scoring
//! supporting views (explanation).
//!
//! Each target's vote is taken at its *anchor*: the saved position closest
//! to where the fact was first heard. Every target is still queried at every
//! saved position, and those answers feed the score metrics and the choice
//! of explanation views.

mod backend;
mod ledger;
pub mod messages;
mod transcript;

pub use backend::{BackendError, ControllerBackend, OracleBackend, PerceptionBackend};
pub use ledger::{FactLedger, FactStatus, LedgerEntry};
pub use transcript::*;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{compose_final, SafetyTable};
use crate::fact::{parse_caption, Fact, FactError, Polarity, ANOMALY_LEXICON};
use crate::geometry::Pose;
use crate::grammar::{
    parse_summary, parse_turn, Command, GrammarError, Question, SummaryDirective, BOOTSTRAP_QUESTION,
};
use crate::motion::{apply_move, perturb_pose};
use crate::perception::{render_salience, GridDims, SalienceGrid, DEFAULT_GRID};
use crate::protocol::wire::{Message, PerceptionQueryRequest, StructuredView, View};
use crate::rng::{self, SimRng};
use crate::scene::Scene;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ActivePerception,
    Validation,
    Explanation,
    Done,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ActivePerception => "active_perception",
            Mode::Validation => "validation",
            Mode::Explanation => "explanation",
            Mode::Done => "done",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    /// Standard deviation of the revisit noise, meters.
    pub sigma: f64,
    /// Perturbed samples per saved position; must be odd.
    pub validation_samples: u32,
    pub early_stop: bool,
    pub anomaly_lexicon: BTreeSet<String>,
    pub seed: u64,
    pub grid: GridDims,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 24,
            sigma: 1.0,
            validation_samples: 3,
            early_stop: true,
            anomaly_lexicon: ANOMALY_LEXICON.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            grid: DEFAULT_GRID,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if self.validation_samples < 1 || self.validation_samples.is_multiple_of(2) {
            return bad("validation_samples must be odd and at least 1");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be a finite non-negative number");
        }
        if self.grid.width < 1 || self.grid.height < 1 {
            return bad("salience grid dimensions must be at least 1");
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn is_anomalous(&self, fact: &Fact) -> bool {
        fact.polarity == Polarity::Present && fact.tokens().any(|t| self.anomaly_lexicon.contains(t))
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid episode config: {0}")]
    Config(String),
    #[error("backend failure at turn {turn}: {source}")]
    Backend {
        turn: u32,
        #[source]
        source: BackendError,
    },
    #[error("controller output unparseable twice at turn {turn}: {error}")]
    ControllerParse { turn: u32, error: GrammarError },
    #[error("controller summary unparseable: {0}")]
    SummaryParse(GrammarError),
    #[error("bad perception response at turn {turn}: {message}")]
    BadResponse { turn: u32, message: String },
    #[error("operation needs mode {expected:?} but episode is in {actual:?}")]
    WrongMode { expected: Mode, actual: Mode },
}

/// Highest-scoring supporting view for one validation target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPair {
    pub target: Fact,
    pub question: String,
    pub pose: Pose,
    pub match_score: f64,
    pub step: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    pub mode: Mode,
    pub pose: Pose,
    pub saved: Vec<Pose>,
    pub ledger: FactLedger,
    pub transcript: Transcript,
    /// Active-perception turns taken.
    pub step: u32,
    pub anomaly_flag: bool,
    /// Sorted by descending match score.
    pub best_pairs: Vec<BestPair>,
    pub history: Vec<Message>,
    pub summary: Option<SummaryDirective>,
    pub validation_targets: Vec<Fact>,
    /// Perception queries issued so far.
    pub queries: u32,
    /// Match scores of the spawn query and every validation query.
    pub position_scores: Vec<f64>,
    pub early_stopped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPair {
    pub question: String,
    pub target: Fact,
    pub pose: Pose,
    pub match_score: f64,
    pub step: u32,
    pub salience: SalienceGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub position_scores: Vec<f64>,
    pub active_steps: u32,
    pub validation_queries: u32,
    pub total_queries: u32,
    pub saved_positions: u32,
    pub validation_targets: u32,
    pub anomaly_detected: bool,
    pub early_stopped: bool,
}

impl EpisodeMetrics {
    pub fn mean_position_score(&self) -> f64 {
        if self.position_scores.is_empty() {
            return 0.0;
        }
        self.position_scores.iter().sum::<f64>() / self.position_scores.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub final_description: String,
    pub final_caption: String,
    pub safety_notes: Vec<String>,
    pub confirmed_facts: Vec<Fact>,
    pub explanation_pairs: Vec<ExplanationPair>,
    pub metrics: EpisodeMetrics,
}

struct Observation {
    answer: String,
    caption: String,
    facts: Vec<Fact>,
    score: f64,
}

fn affirmative(answer: &str) -> bool {
    answer.trim().to_lowercase().starts_with("yes")
}

/// One episode in flight.
pub struct Episode<'a> {
    scene: &'a Scene,
    config: &'a EpisodeConfig,
    controller: &'a dyn ControllerBackend,
    perception: &'a dyn PerceptionBackend,
    state: EpisodeState,
    perception_seed: u64,
    validation_rng: SimRng,
}

impl<'a> Episode<'a> {
    /// Asks the bootstrap question at spawn and seeds the ledger.
    pub fn start(
        scene: &'a Scene,
        config: &'a EpisodeConfig,
        controller: &'a dyn ControllerBackend,
        perception: &'a dyn PerceptionBackend,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let mut ep = Episode {
            scene,
            config,
            controller,
            perception,
            state: EpisodeState {
                mode: Mode::ActivePerception,
                pose: scene.spawn,
                saved: Vec::new(),
                ledger: FactLedger::default(),
                transcript: Transcript::default(),
                step: 0,
                anomaly_flag: false,
                best_pairs: Vec::new(),
                history: Vec::new(),
                summary: None,
                validation_targets: Vec::new(),
                queries: 0,
                position_scores: Vec::new(),
                early_stopped: false,
            },
            perception_seed: rng::derive_seed(config.seed, "perception"),
            validation_rng: rng::stream(rng::derive_seed(config.seed, "validation")),
        };
        let question = Question::bootstrap();
        let obs = ep.perceive(&question, scene.spawn)?;
        let record_step = ep.state.transcript.next_step();
        let fresh = ep.state.ledger.merge(&obs.facts, record_step, scene.spawn);
        ep.state.position_scores.push(obs.score);
        ep.state.history.push(Message::engine(messages::perception_message(
            Some(BOOTSTRAP_QUESTION),
            &obs.answer,
            &obs.caption,
            obs.score,
            false,
        )));
        let mut flags = vec![FLAG_BOOTSTRAP.to_string()];
        ep.note_anomalies(&fresh, &mut flags);
        ep.state.transcript.push(TurnRecord {
            step: record_step,
            mode: Mode::ActivePerception,
            directive_text: format!("question: {BOOTSTRAP_QUESTION}"),
            answer: Some(obs.answer),
            caption: Some(obs.caption),
            match_score: Some(obs.score),
            pose: scene.spawn,
            flags,
        });
        Ok(ep)
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn into_state(self) -> EpisodeState {
        self.state
    }

    fn expect_mode(&self, expected: Mode) -> Result<(), EngineError> {
        if self.state.mode == expected {
            Ok(())
        } else {
            Err(EngineError::WrongMode {
                expected,
                actual: self.state.mode,
            })
        }
    }

    fn perceive(&mut self, question: &Question, pose: Pose) -> Result<Observation, EngineError> {
        let turn = self.state.transcript.next_step();
        let request = PerceptionQueryRequest {
            question: question.raw.clone(),
            view: View::Structured(StructuredView {
                pose,
                scene: self.scene.name.clone(),
                sample_seed: rng::derive_indexed(self.perception_seed, u64::from(self.state.queries)),
            }),
        };
        self.state.queries += 1;
        let response = self
            .perception
            .query(&request)
            .map_err(|source| EngineError::Backend { turn, source })?;
        if !(0.0..=1.0).contains(&response.match_score) {
            return Err(EngineError::BadResponse {
                turn,
                message: format!("match score {} outside [0, 1]", response.match_score),
            });
        }
        let facts = parse_caption(&response.caption).map_err(|e: FactError| EngineError::BadResponse {
            turn,
            message: format!("caption {:?}: {e}", response.caption),
        })?;
        Ok(Observation {
            answer: response.answer,
            caption: response.caption,
            facts,
            score: response.match_score,
        })
    }

    /// Sets the anomaly flag for anomalous facts and, with early stop on,
    /// ends exploration, saving the current pose so validation can revisit
    /// the sighting.
    fn note_anomalies(&mut self, fresh: &[Fact], flags: &mut Vec<String>) {
        if !fresh.iter().any(|f| self.config.is_anomalous(f)) {
            return;
        }
        self.state.anomaly_flag = true;
        flags.push(FLAG_ANOMALY.to_string());
        if self.config.early_stop && self.state.mode == Mode::ActivePerception {
            self.state.early_stopped = true;
            flags.push(FLAG_EARLY_STOP.to_string());
            if !self.state.saved.contains(&self.state.pose) {
                self.state.saved.push(self.state.pose);
                flags.push(FLAG_AUTO_SAVE.to_string());
            }
            self.state.mode = Mode::Validation;
        }
    }

    /// One controller turn. Malformed controller output is retried once.
    pub fn step_active(&mut self) -> Result<(), EngineError> {
        self.expect_mode(Mode::ActivePerception)?;
        let mut retried = false;
        let directive = loop {
            let turn = self.state.transcript.next_step();
            let text = self
                .controller
                .next_turn(&self.state.history)
                .map_err(|source| EngineError::Backend { turn, source })?;
            match parse_turn(&text) {
                Ok(d) => {
                    self.state.history.push(Message::controller(text.clone()));
                    break d;
                }
                Err(error) => {
                    self.state.transcript.push(TurnRecord {
                        step: turn,
                        mode: Mode::ActivePerception,
                        directive_text: text.clone(),
                        answer: None,
                        caption: None,
                        match_score: None,
                        pose: self.state.pose,
                        flags: vec![FLAG_PARSE_ERROR.to_string()],
                    });
                    if retried {
                        return Err(EngineError::ControllerParse { turn, error });
                    }
                    retried = true;
                    self.state.history.push(Message::controller(text));
                    self.state
                        .history
                        .push(Message::engine(messages::error_message(&error.to_string())));
                }
            }
        };

        self.state.step += 1;
        let record_step = self.state.transcript.next_step();
        let mut flags = vec![FLAG_TURN.to_string()];
        let mut clamped = false;
        if let Some(mv) = directive.command.as_move() {
            let (pose, c) = apply_move(self.state.pose, mv, &self.scene.bounds);
            self.state.pose = pose;
            clamped = c;
            if c {
                flags.push(FLAG_CLAMPED.to_string());
            }
        }
        let mut record = TurnRecord {
            step: record_step,
            mode: Mode::ActivePerception,
            directive_text: crate::grammar::serialize_turn(&directive),
            answer: None,
            caption: None,
            match_score: None,
            pose: self.state.pose,
            flags: Vec::new(),
        };
        match (&directive.command, &directive.question) {
            (Command::SavePosition, _) => {
                self.state.saved.push(self.state.pose);
                flags.push(FLAG_SAVED.to_string());
                self.state
                    .history
                    .push(Message::engine(messages::saved_message(self.state.saved.len())));
            }
            (Command::IKnowEnough, _) => {
                self.state.mode = Mode::Validation;
            }
            (_, Some(question)) => {
                let obs = self.perceive(question, self.state.pose)?;
                let fresh = self.state.ledger.merge(&obs.facts, record_step, self.state.pose);
                self.state.history.push(Message::engine(messages::perception_message(
                    None,
                    &obs.answer,
                    &obs.caption,
                    obs.score,
                    clamped,
                )));
                record.answer = Some(obs.answer);
                record.caption = Some(obs.caption);
                record.match_score = Some(obs.score);
                self.note_anomalies(&fresh, &mut flags);
            }
            (_, None) => {
                self.state
                    .history
                    .push(Message::engine(messages::moved_message(clamped)));
            }
        }
        if self.state.step >= self.config.max_steps && self.state.mode == Mode::ActivePerception {
            self.state.mode = Mode::Validation;
        }
        record.flags = flags;
        self.state.transcript.push(record);
        Ok(())
    }

    /// Index of the saved position closest to `pose` (first on ties).
    fn anchor_for(positions: &[Pose], pose: &Pose) -> usize {
        positions
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.position
                    .distance(pose.position)
                    .total_cmp(&b.position.distance(pose.position))
            })
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Summary, perturbed revisits and majority voting.
    pub fn run_validation(&mut self) -> Result<(), EngineError> {
        self.expect_mode(Mode::Validation)?;
        self.state
            .history
            .push(Message::engine(messages::mode_message(Mode::Validation.as_str())));
        let turn = self.state.transcript.next_step();
        let text = self
            .controller
            .summary(&self.state.history)
            .map_err(|source| EngineError::Backend { turn, source })?;
        let summary = parse_summary(&text).map_err(EngineError::SummaryParse)?;
        self.state.history.push(Message::controller(text));

        let mut targets: Vec<Fact> = Vec::new();
        for t in &summary.validation_targets {
            if !targets.contains(t) {
                targets.push(t.clone());
            }
        }
        let spawn_fallback = self.state.saved.is_empty();
        let positions: Vec<Pose> = if spawn_fallback {
            vec![self.scene.spawn]
        } else {
            self.state.saved.clone()
        };
        let mut summary_flags = vec![FLAG_SUMMARY.to_string()];
        if spawn_fallback {
            summary_flags.push(FLAG_SPAWN_FALLBACK.to_string());
        }
        self.state.transcript.push(TurnRecord {
            step: turn,
            mode: Mode::Validation,
            directive_text: crate::grammar::serialize_summary(&summary),
            answer: None,
            caption: Some(summary.caption.clone()),
            match_score: None,
            pose: self.state.pose,
            flags: summary_flags,
        });

        let spawn = self.scene.spawn;
        let anchors: Vec<usize> = targets
            .iter()
            .map(|t| {
                let entry = self.state.ledger.ensure(t, turn, spawn);
                entry.votes_for = 0;
                entry.votes_against = 0;
                Self::anchor_for(&positions, &entry.source_pose.clone())
            })
            .collect();

        let mut best: Vec<Option<BestPair>> = vec![None; targets.len()];
        for (pos_idx, saved) in positions.iter().enumerate() {
            for _ in 0..self.config.validation_samples {
                let pose = perturb_pose(*saved, self.config.sigma, &self.scene.bounds, &mut self.validation_rng);
                self.state.pose = pose;
                for (t_idx, target) in targets.iter().enumerate() {
                    let question = Question::presence(&target.phrase());
                    let step = self.state.transcript.next_step();
                    let obs = self.perceive(&question, pose)?;
                    let supports = affirmative(&obs.answer) == (target.polarity == Polarity::Present);
                    if pos_idx == anchors[t_idx] {
                        let entry = self.state.ledger.find_mut(target).expect("target ensured above");
                        if supports {
                            entry.votes_for += 1;
                        } else {
                            entry.votes_against += 1;
                        }
                    }
                    if supports && best[t_idx].as_ref().is_none_or(|b| obs.score > b.match_score) {
                        best[t_idx] = Some(BestPair {
                            target: target.clone(),
                            question: question.raw.clone(),
                            pose,
                            match_score: obs.score,
                            step,
                        });
                    }
                    self.state.position_scores.push(obs.score);
                    self.state.transcript.push(TurnRecord {
                        step,
                        mode: Mode::Validation,
                        directive_text: format!("question: {}", question.raw),
                        answer: Some(obs.answer),
                        caption: Some(obs.caption),
                        match_score: Some(obs.score),
                        pose,
                        flags: vec![
                            FLAG_VALIDATION_QUERY.to_string(),
                            if supports { FLAG_VOTE_FOR } else { FLAG_VOTE_AGAINST }.to_string(),
                            format!("target={target}"),
                            format!("position={pos_idx}"),
                            format!("anchor={}", pos_idx == anchors[t_idx]),
                        ],
                    });
                }
            }
        }

        for entry in self.state.ledger.entries_mut() {
            if targets.contains(&entry.fact) {
                entry.settle();
            } else if entry.sightings >= 2 {
                // repeated independent sightings stand in for votes
                entry.votes_for = entry.sightings;
                entry.votes_against = 0;
                entry.settle();
            }
        }

        let mut pairs: Vec<BestPair> = best.into_iter().flatten().collect();
        pairs.sort_by(|a, b| b.match_score.total_cmp(&a.match_score));
        self.state.best_pairs = pairs;
        self.state.summary = Some(summary);
        self.state.validation_targets = targets;
        self.state.mode = Mode::Explanation;
        Ok(())
    }

    /// Returns to spawn and composes the report.
    pub fn finalize(&mut self) -> Result<EpisodeReport, EngineError> {
        self.expect_mode(Mode::Explanation)?;
        self.state.pose = self.scene.spawn;
        let confirmed: Vec<Fact> = self
            .state
            .ledger
            .with_status(FactStatus::Confirmed)
            .map(|e| e.fact.clone())
            .collect();
        let (description, caption, safety_notes) = compose_final(&confirmed, &SafetyTable::default());
        let explanation_pairs = self
            .state
            .best_pairs
            .iter()
            .map(|b| ExplanationPair {
                question: b.question.clone(),
                target: b.target.clone(),
                pose: b.pose,
                match_score: b.match_score,
                step: b.step,
                salience: render_salience(self.scene, &b.pose, std::slice::from_ref(&b.target), self.config.grid),
            })
            .collect();
        let anomaly_detected = confirmed.iter().any(|f| self.config.is_anomalous(f));
        let validation_queries = self.state.transcript.validation_queries().count() as u32;
        self.state.transcript.push(TurnRecord {
            step: self.state.transcript.next_step(),
            mode: Mode::Done,
            directive_text: format!("description: {description}\ncaption: {caption}"),
            answer: None,
            caption: Some(caption.clone()),
            match_score: None,
            pose: self.state.pose,
            flags: vec![FLAG_FINAL.to_string()],
        });
        self.state.mode = Mode::Done;
        Ok(EpisodeReport {
            final_description: description,
            final_caption: caption,
            safety_notes,
            confirmed_facts: confirmed,
            explanation_pairs,
            metrics: EpisodeMetrics {
                position_scores: self.state.position_scores.clone(),
                active_steps: self.state.step,
                validation_queries,
                total_queries: self.state.queries,
                saved_positions: self.state.saved.len() as u32,
                validation_targets: self.state.validation_targets.len() as u32,
                anomaly_detected,
                early_stopped: self.state.early_stopped,
            },
        })
    }
}

/// A finished episode.
#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub report: EpisodeReport,
    pub state: EpisodeState,
}

/// Runs an episode from bootstrap to report.
pub fn run_episode(
    scene: &Scene,
    config: &EpisodeConfig,
    controller: &dyn ControllerBackend,
    perception: &dyn PerceptionBackend,
) -> Result<EpisodeOutcome, EngineError> {
    let mut ep = Episode::start(scene, config, controller, perception)?;
    while ep.state.mode == Mode::ActivePerception {
        ep.step_active()?;
    }
    ep.run_validation()?;
    let report = ep.finalize()?;
    Ok(EpisodeOutcome {
        report,
        state: ep.into_state(),
    })
}

/// Grid file name for one explanation pair.
pub fn explanation_file_name(episode: &str, step: u32) -> String {
    format!("explain_{episode}_{step}.pgm")
}
