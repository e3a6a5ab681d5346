//! Synthetic visual question answering.
//!
//! [`query`] plays the role of the VQA model: given a pose and a question it
//! returns an answer, a template caption, a caption/view matching score and a
//! salience grid. Perception is imperfect in two calibrated ways: visible
//! objects are missed with a probability that grows with distance and
//! occlusion, and occasionally a spurious object is reported.

mod salience;

pub use salience::{project, render_salience, GridDims, SalienceGrid, DEFAULT_GRID};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact::{is_anomaly_token, render_caption, Fact, Polarity};
use crate::geometry::Pose;
use crate::grammar::{Question, QuestionKind};
use crate::scene::Scene;
use crate::visibility::{visible_objects, Visibility};

/// Most facts a caption mentions.
pub const CAPTION_CAP: usize = 4;

/// Labels the oracle may report spuriously, alongside the scene's own labels.
pub const DISTRACTOR_LABELS: [&str; 5] = ["bird", "bench", "boat", "car", "person"];

#[derive(Clone, Debug, PartialEq)]
pub struct ViewQuery {
    pub pose: Pose,
    pub question: Question,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub miss_base: f64,
    pub miss_per_meter: f64,
    pub hallucination_rate: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            miss_base: 0.05,
            miss_per_meter: 0.007,
            hallucination_rate: 0.02,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            miss_base: 0.0,
            miss_per_meter: 0.0,
            hallucination_rate: 0.0,
            seed: 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.miss_base, self.miss_per_meter, self.hallucination_rate]
            .iter()
            .all(|p| (0.0..=1.0).contains(p))
    }

    /// `min(1, base + slope · distance · (1 − fraction/2))`.
    pub fn miss_probability(&self, visibility: &Visibility) -> f64 {
        (self.miss_base + self.miss_per_meter * visibility.distance * (1.0 - visibility.fraction * 0.5)).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionResult {
    pub answer: String,
    pub caption: String,
    pub caption_facts: Vec<Fact>,
    /// For presence questions: the subject with the polarity the answer implies.
    pub answer_fact: Option<Fact>,
    pub match_score: f64,
    pub salience: SalienceGrid,
}

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("pose {0:?} is outside the scene bounds")]
    PoseOutOfBounds(Pose),
    #[error("noise model probabilities must lie in [0, 1]")]
    InvalidNoise,
}

/// One detected (or hallucinated) object.
#[derive(Clone, Debug)]
struct Detection {
    fact: Fact,
    fraction: f64,
}

/// Answers `vq` against the scene.
///
/// RNG consumption is fixed per call: one uniform per object in the
/// frustum, then three uniforms for the hallucination trial.
pub fn query<R: Rng + ?Sized>(
    scene: &Scene,
    vq: &ViewQuery,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<PerceptionResult, PerceptionError> {
    if !noise.is_valid() {
        return Err(PerceptionError::InvalidNoise);
    }
    if !scene.bounds.contains(vq.pose.position) {
        return Err(PerceptionError::PoseOutOfBounds(vq.pose));
    }
    let visible = visible_objects(scene, &vq.pose);
    let mut detected: Vec<Detection> = Vec::new();
    for vis in &visible {
        let roll: f64 = rng.random();
        if vis.fraction > 0.0 && roll >= noise.miss_probability(vis) {
            let obj = scene
                .object(&vis.object_id)
                .expect("visibility ids come from the scene");
            detected.push(Detection {
                fact: Fact {
                    subject_label: obj.label.clone(),
                    attributes: obj.attributes.clone(),
                    polarity: Polarity::Present,
                },
                fraction: vis.fraction,
            });
        }
    }

    let lexicon = hallucination_lexicon(scene);
    let roll: f64 = rng.random();
    let pick = rng.random_range(0..lexicon.len());
    let fake_fraction: f64 = rng.random();
    if roll < noise.hallucination_rate {
        let at = detected
            .iter()
            .position(|d| d.fraction < fake_fraction)
            .unwrap_or(detected.len());
        detected.insert(
            at,
            Detection {
                fact: Fact::present(lexicon[pick].clone(), &[]),
                fraction: fake_fraction,
            },
        );
    }

    let mut caption_facts: Vec<Fact> = Vec::new();
    for d in &detected {
        if caption_facts.len() == CAPTION_CAP {
            break;
        }
        if !caption_facts.contains(&d.fact) {
            caption_facts.push(d.fact.clone());
        }
    }
    let caption = render_caption(&caption_facts);
    let (answer, answer_fact) = answer_question(&vq.question, &detected, &caption);

    let mut salience_targets = caption_facts.clone();
    if let Some(f) = answer_fact.as_ref().filter(|f| f.polarity == Polarity::Present) {
        salience_targets.push(f.clone());
    }
    let salience = render_salience(scene, &vq.pose, &salience_targets, DEFAULT_GRID);
    let match_score = match_score(&caption_facts, &visible, scene);

    Ok(PerceptionResult {
        answer,
        caption,
        caption_facts,
        answer_fact,
        match_score,
        salience,
    })
}

fn hallucination_lexicon(scene: &Scene) -> Vec<String> {
    let mut lex: Vec<String> = scene
        .labels()
        .into_iter()
        .filter(|l| !is_anomaly_token(l))
        .map(str::to_string)
        .collect();
    for d in DISTRACTOR_LABELS {
        if !lex.iter().any(|l| l == d) {
            lex.push(d.to_string());
        }
    }
    lex.sort();
    lex
}

fn matching<'a>(subject: &'a Fact, detected: &'a [Detection]) -> impl Iterator<Item = &'a Detection> {
    detected
        .iter()
        .filter(move |d| subject.describes(&d.fact.subject_label, &d.fact.attributes))
}

fn answer_question(question: &Question, detected: &[Detection], caption: &str) -> (String, Option<Fact>) {
    let subject = question.subject_fact();
    match (question.kind, subject) {
        (QuestionKind::Presence, Some(subject)) => {
            let present = matching(&subject, detected).next().is_some();
            let answer = if present { "yes" } else { "no" };
            let polarity = if present { Polarity::Present } else { Polarity::Absent };
            (answer.to_string(), Some(subject.with_polarity(polarity)))
        }
        (QuestionKind::Count, Some(subject)) => {
            let mut n = matching(&subject, detected).count();
            if n == 0 {
                if let Some(singular) = subject.subject_label.strip_suffix('s').filter(|s| !s.is_empty()) {
                    let singular = Fact {
                        subject_label: singular.to_string(),
                        ..subject.clone()
                    };
                    n = matching(&singular, detected).count();
                }
            }
            (n.to_string(), None)
        }
        (QuestionKind::Attribute, Some(subject)) => {
            let answer = match matching(&subject, detected).next() {
                Some(d) if d.fact.attributes.is_empty() => "plain".to_string(),
                Some(d) => d.fact.attributes.join(" "),
                None => "unknown".to_string(),
            };
            (answer, None)
        }
        _ => (caption.to_string(), None),
    }
}

fn verifiable(fact: &Fact, ground_visible: &[Visibility], scene: &Scene) -> bool {
    let seen = ground_visible
        .iter()
        .filter(|v| v.fraction > 0.0)
        .filter_map(|v| scene.object(&v.object_id))
        .any(|o| fact.describes(&o.label, &o.attributes));
    match fact.polarity {
        Polarity::Present => seen,
        Polarity::Absent => !seen,
    }
}

/// Share of caption facts that hold in the ground-truth view. An empty
/// caption scores 0.
pub fn match_score(caption_facts: &[Fact], ground_visible: &[Visibility], scene: &Scene) -> f64 {
    if caption_facts.is_empty() {
        return 0.0;
    }
    let ok = caption_facts
        .iter()
        .filter(|f| verifiable(f, ground_visible, scene))
        .count();
    ok as f64 / caption_facts.len() as f64
}
