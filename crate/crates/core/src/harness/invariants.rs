//! Post-hoc checks of a finished episode against its own transcript.

use std::collections::BTreeSet;

use crate::engine::{
    EpisodeConfig, EpisodeOutcome, FLAG_EARLY_STOP, FLAG_SPAWN_FALLBACK, FLAG_SUMMARY, FLAG_TURN,
    FLAG_VALIDATION_QUERY, FLAG_VOTE_FOR,
};
use crate::fact::{parse_caption, Polarity};

/// Returns one message per violated invariant; empty when the episode is
/// consistent.
pub fn check_episode(outcome: &EpisodeOutcome, config: &EpisodeConfig) -> Vec<String> {
    let mut v = Vec::new();
    let records = &outcome.state.transcript.records;
    let report = &outcome.report;

    if records.windows(2).any(|w| w[1].mode < w[0].mode) {
        v.push("mode sequence is not monotone".to_string());
    }

    let turns = records.iter().filter(|r| r.has_flag(FLAG_TURN)).count() as u32;
    if turns > config.max_steps {
        v.push(format!(
            "{turns} active steps exceed the budget of {}",
            config.max_steps
        ));
    }
    if turns != report.metrics.active_steps {
        v.push(format!(
            "transcript has {turns} turns, report says {}",
            report.metrics.active_steps
        ));
    }

    if let Some(stop) = records.iter().position(|r| r.has_flag(FLAG_EARLY_STOP)) {
        if records[stop + 1..].iter().any(|r| r.has_flag(FLAG_TURN)) {
            v.push("active steps continued after early stop".to_string());
        }
    }

    let positions = match records.iter().find(|r| r.has_flag(FLAG_SUMMARY)) {
        Some(r) if r.has_flag(FLAG_SPAWN_FALLBACK) => 1,
        _ => outcome.state.saved.len(),
    };
    let expected = positions * outcome.state.validation_targets.len() * config.validation_samples as usize;
    let actual = records.iter().filter(|r| r.has_flag(FLAG_VALIDATION_QUERY)).count();
    if actual != expected {
        v.push(format!("{actual} validation queries, expected {expected}"));
    }

    if records
        .iter()
        .filter_map(|r| r.match_score)
        .any(|s| !(0.0..=1.0).contains(&s))
    {
        v.push("match score outside [0, 1]".to_string());
    }

    match parse_caption(&report.final_caption) {
        Ok(facts) => {
            if let Some(f) = facts.iter().find(|f| !report.confirmed_facts.contains(f)) {
                v.push(format!("final caption fact {f} is not confirmed"));
            }
        }
        Err(e) => v.push(format!("final caption does not parse: {e}")),
    }

    let supported: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.has_flag(FLAG_VOTE_FOR))
        .filter_map(|r| r.flag_value("target"))
        .collect();
    if supported.len() != report.explanation_pairs.len() {
        v.push(format!(
            "{} explanation pairs, but {} targets had a supporting query",
            report.explanation_pairs.len(),
            supported.len()
        ));
    }
    if report
        .explanation_pairs
        .windows(2)
        .any(|w| w[1].match_score > w[0].match_score)
    {
        v.push("explanation pairs are not sorted by score".to_string());
    }

    let detected = report
        .confirmed_facts
        .iter()
        .any(|f| f.polarity == Polarity::Present && f.tokens().any(|t| config.anomaly_lexicon.contains(t)));
    if detected != report.metrics.anomaly_detected {
        v.push("anomaly flag disagrees with the confirmed facts".to_string());
    }
    v
}
