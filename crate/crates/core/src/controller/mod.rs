//! The reference controller: a fixed rule list over a belief rebuilt from
//! the dialogue text alone.
//!
//! Because the belief is derived only from the message history, the same
//! controller behaves identically in-process and behind the wire protocol.

mod compose;

pub use compose::{compose_final, SafetyTable, CRASH_NOTE, FIRE_NOTE, NOTHING_CONFIRMED, SMOKE_NOTE};

use std::collections::BTreeSet;

use crate::engine::messages::EngineMessage;
use crate::engine::{BackendError, ControllerBackend};
use crate::fact::{render_caption, Fact, Polarity};
use crate::grammar::{
    parse_turn, serialize_summary, serialize_turn, Command, Question, QuestionKind, SummaryDirective, TurnDirective,
};
use crate::motion::{BACK_STEP_M, FORWARD_STEP_M, LATERAL_STEP_M};
use crate::perception::CAPTION_CAP;
use crate::protocol::wire::{Message, Role};

pub const WATCHLIST: [&str; 6] = ["fire", "smoke", "flame", "crash", "crashed", "burning"];
pub const SWEEP_QUESTION: &str = "what do you see?";
/// Number of scores considered when deciding whether getting closer helps.
pub const SCORE_WINDOW: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactTally {
    pub fact: Fact,
    pub count: u32,
    /// Index of the perception message that last mentioned the fact.
    pub last_seen: usize,
    pub first_seen: usize,
}

/// What the controller knows, reconstructed from the history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControllerBelief {
    pub facts: Vec<FactTally>,
    pub scores: Vec<f64>,
    /// The last engine message is a perception result not yet acted on.
    pub fresh: bool,
    /// The latest perception result introduced a label not heard before.
    pub new_label: bool,
    /// Dead-reckoned offset from spawn in meters: (forward, lateral-left).
    pub offset: (f64, f64),
    pub saved_offsets: Vec<(f64, f64)>,
    pub closer_moves: u32,
    pub sweep_moves: u32,
    pub asked_tokens: BTreeSet<String>,
}

impl ControllerBelief {
    pub fn from_history(history: &[Message]) -> Self {
        let mut b = ControllerBelief::default();
        let mut labels: BTreeSet<String> = BTreeSet::new();
        let mut perception_index = 0usize;
        for msg in history {
            match msg.role {
                Role::Engine => match EngineMessage::parse(&msg.text) {
                    EngineMessage::Perception {
                        caption_facts, score, ..
                    } => {
                        b.new_label = false;
                        for fact in caption_facts.iter().filter(|f| f.polarity == Polarity::Present) {
                            if labels.insert(fact.subject_label.clone()) {
                                b.new_label = true;
                            }
                            match b.facts.iter_mut().find(|t| &t.fact == fact) {
                                Some(t) => {
                                    t.count += 1;
                                    t.last_seen = perception_index;
                                }
                                None => b.facts.push(FactTally {
                                    fact: fact.clone(),
                                    count: 1,
                                    last_seen: perception_index,
                                    first_seen: perception_index,
                                }),
                            }
                        }
                        b.scores.push(score);
                        b.fresh = true;
                        perception_index += 1;
                    }
                    _ => b.fresh = false,
                },
                Role::Controller => {
                    let Ok(d) = parse_turn(&msg.text) else { continue };
                    b.apply(&d);
                }
            }
        }
        b
    }

    fn apply(&mut self, d: &TurnDirective) {
        let (f, l) = &mut self.offset;
        match d.command {
            Command::MoveCloser => {
                *f += FORWARD_STEP_M;
                self.closer_moves += 1;
            }
            Command::MoveBack => *f -= BACK_STEP_M,
            Command::MoveLeft => {
                *l += LATERAL_STEP_M;
                self.sweep_moves += 1;
            }
            Command::MoveRight => {
                *l -= LATERAL_STEP_M;
                self.sweep_moves += 1;
            }
            Command::SavePosition => self.saved_offsets.push(self.offset),
            _ => {}
        }
        if let Some(q) = d.question.as_ref().filter(|q| q.kind == QuestionKind::Presence) {
            if let Some(subject) = q.subject_fact() {
                self.asked_tokens.extend(subject.tokens().map(str::to_string));
            }
        }
    }

    pub fn here_saved(&self) -> bool {
        self.saved_offsets.contains(&self.offset)
    }

    /// The last `SCORE_WINDOW` scores, if there are at least two and they
    /// strictly increase.
    pub fn scores_improving(&self) -> bool {
        let start = self.scores.len().saturating_sub(SCORE_WINDOW);
        let window = &self.scores[start..];
        window.len() >= 2 && window.windows(2).all(|w| w[1] > w[0])
    }
}

/// Tunables of the scripted controller.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedController {
    pub save_budget: u32,
    pub closer_cap: u32,
    pub save_score: f64,
    pub watchlist: BTreeSet<String>,
    /// Lateral moves of the exploration sweep, in order.
    pub sweep: Vec<Command>,
}

impl Default for ScriptedController {
    fn default() -> Self {
        Self {
            save_budget: 3,
            closer_cap: 3,
            save_score: 0.8,
            watchlist: WATCHLIST.iter().map(|s| s.to_string()).collect(),
            // left of spawn, then across to the right of spawn
            sweep: vec![Command::MoveLeft, Command::MoveRight, Command::MoveRight],
        }
    }
}

impl ScriptedController {
    fn on_watchlist(&self, fact: &Fact) -> bool {
        fact.tokens().any(|t| self.watchlist.contains(t))
    }

    pub fn next_directive(&self, belief: &ControllerBelief) -> TurnDirective {
        let saves = belief.saved_offsets.len() as u32;
        let last_score = belief.scores.last().copied().unwrap_or(0.0);
        if belief.fresh
            && !belief.here_saved()
            && saves < self.save_budget
            && (belief.new_label || last_score >= self.save_score)
        {
            return TurnDirective::bare(Command::SavePosition);
        }
        if let Some(t) = belief
            .facts
            .iter()
            .find(|t| self.on_watchlist(&t.fact) && !t.fact.tokens().any(|tok| belief.asked_tokens.contains(tok)))
        {
            return TurnDirective::new(Command::AskQuestion, Some(Question::presence(&t.fact.phrase())));
        }
        if belief.scores_improving() && belief.closer_moves < self.closer_cap {
            return TurnDirective::new(Command::MoveCloser, Some(Question::open(SWEEP_QUESTION)));
        }
        if let Some(cmd) = self.sweep.get(belief.sweep_moves as usize) {
            return TurnDirective::new(*cmd, Some(Question::open(SWEEP_QUESTION)));
        }
        TurnDirective::bare(Command::IKnowEnough)
    }

    pub fn summary_directive(&self, belief: &ControllerBelief) -> SummaryDirective {
        let mut by_recency: Vec<&FactTally> = belief.facts.iter().collect();
        by_recency.sort_by(|a, b| b.last_seen.cmp(&a.last_seen).then(a.first_seen.cmp(&b.first_seen)));
        let description = if by_recency.is_empty() {
            "I did not observe anything notable.".to_string()
        } else {
            let listed: Vec<String> = by_recency.iter().map(|t| t.fact.to_string()).collect();
            format!("I observed {}.", listed.join(", "))
        };

        let mut by_count: Vec<&FactTally> = belief.facts.iter().collect();
        by_count.sort_by(|a, b| b.count.cmp(&a.count).then(a.first_seen.cmp(&b.first_seen)));
        let top: Vec<Fact> = by_count.iter().take(CAPTION_CAP).map(|t| t.fact.clone()).collect();

        let targets: Vec<Fact> = belief
            .facts
            .iter()
            .filter(|t| t.count == 1 || self.on_watchlist(&t.fact))
            .map(|t| t.fact.clone())
            .collect();
        SummaryDirective {
            description,
            caption: render_caption(&top),
            validation_targets: targets,
        }
    }
}

pub fn scripted_next_turn(history: &[Message]) -> TurnDirective {
    ScriptedController::default().next_directive(&ControllerBelief::from_history(history))
}

pub fn scripted_summary(history: &[Message]) -> SummaryDirective {
    ScriptedController::default().summary_directive(&ControllerBelief::from_history(history))
}

impl ControllerBackend for ScriptedController {
    fn next_turn(&self, history: &[Message]) -> Result<String, BackendError> {
        Ok(serialize_turn(
            &self.next_directive(&ControllerBelief::from_history(history)),
        ))
    }

    fn summary(&self, history: &[Message]) -> Result<String, BackendError> {
        Ok(serialize_summary(
            &self.summary_directive(&ControllerBelief::from_history(history)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::messages::{perception_message, saved_message};

    fn seen(caption: &str, score: f64) -> Message {
        Message::engine(perception_message(None, caption, caption, score, false))
    }

    fn said(d: TurnDirective) -> Message {
        Message::controller(serialize_turn(&d))
    }

    #[test]
    fn saves_after_new_label_then_sweeps() {
        let mut h = vec![seen("a tree", 0.5)];
        assert_eq!(scripted_next_turn(&h), TurnDirective::bare(Command::SavePosition));
        h.push(said(TurnDirective::bare(Command::SavePosition)));
        h.push(Message::engine(saved_message(1)));
        let d = scripted_next_turn(&h);
        assert_eq!(d.command, Command::MoveLeft);
        assert_eq!(d.question.unwrap().raw, SWEEP_QUESTION);
    }

    #[test]
    fn asks_about_watchlist_fact_once() {
        let mut h = vec![seen("a burning tree", 0.5)];
        h.push(said(TurnDirective::bare(Command::SavePosition)));
        h.push(Message::engine(saved_message(1)));
        let d = scripted_next_turn(&h);
        assert_eq!(
            d,
            TurnDirective::new(Command::AskQuestion, Some(Question::presence("burning tree")))
        );
        h.push(said(d));
        h.push(seen("a burning tree", 0.5));
        assert_ne!(scripted_next_turn(&h).command, Command::AskQuestion);
    }

    #[test]
    fn rising_scores_move_closer_up_to_cap() {
        let mut b = ControllerBelief {
            scores: vec![0.2, 0.5, 0.9],
            ..Default::default()
        };
        let c = ScriptedController::default();
        assert_eq!(c.next_directive(&b).command, Command::MoveCloser);
        b.closer_moves = 3;
        assert_eq!(c.next_directive(&b).command, Command::MoveLeft);
        b.scores = vec![0.2, 0.5, 0.5];
        b.closer_moves = 0;
        assert_eq!(c.next_directive(&b).command, Command::MoveLeft);
    }

    #[test]
    fn ends_after_sweep() {
        let b = ControllerBelief {
            sweep_moves: 3,
            ..Default::default()
        };
        assert_eq!(
            ScriptedController::default().next_directive(&b),
            TurnDirective::bare(Command::IKnowEnough)
        );
    }

    #[test]
    fn dead_reckoning_tracks_saved_spot() {
        let h = vec![
            said(TurnDirective::bare(Command::SavePosition)),
            said(TurnDirective::new(
                Command::MoveLeft,
                Some(Question::open(SWEEP_QUESTION)),
            )),
            said(TurnDirective::new(
                Command::MoveRight,
                Some(Question::open(SWEEP_QUESTION)),
            )),
        ];
        let b = ControllerBelief::from_history(&h);
        assert_eq!(b.offset, (0.0, 0.0));
        assert!(b.here_saved());
    }

    #[test]
    fn summary_targets() {
        let h = vec![seen("a tree and a rock", 0.5), seen("a tree and a house", 0.5)];
        let s = scripted_summary(&h);
        assert_eq!(s.caption, "a tree and a rock and a house");
        assert_eq!(
            s.validation_targets,
            vec![Fact::present("rock", &[]), Fact::present("house", &[])]
        );
        assert_eq!(s.description, "I observed tree, house, rock.");
        let h = vec![seen("a tree", 0.5), seen("a tree and a fire", 0.5), seen("a fire", 0.5)];
        assert_eq!(
            scripted_summary(&h).validation_targets,
            vec![Fact::present("fire", &[])]
        );
        let empty = scripted_summary(&[]);
        assert!(empty.validation_targets.is_empty());
        assert_eq!(empty.caption, "nothing notable");
    }
}
