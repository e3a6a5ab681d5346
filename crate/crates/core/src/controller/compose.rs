//! Turning confirmed facts into the final report.

use crate::fact::{render_caption, Fact};
use crate::perception::CAPTION_CAP;

/// Maps anomaly tokens to operator-facing safety notes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyTable {
    entries: Vec<(String, String)>,
}

pub const FIRE_NOTE: &str = "Open fire observed: alert the fire service and keep people clear of the area.";
pub const SMOKE_NOTE: &str = "Smoke observed: investigate the source before approaching.";
pub const CRASH_NOTE: &str = "Crash site observed: notify emergency services.";

impl Default for SafetyTable {
    fn default() -> Self {
        let mut t = Self { entries: Vec::new() };
        for token in ["fire", "flame", "burning"] {
            t.insert(token, FIRE_NOTE);
        }
        t.insert("smoke", SMOKE_NOTE);
        t.insert("crash", CRASH_NOTE);
        t.insert("crashed", CRASH_NOTE);
        t
    }
}

impl SafetyTable {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn insert(&mut self, token: &str, note: &str) {
        self.entries.retain(|(t, _)| t != token);
        self.entries.push((token.to_string(), note.to_string()));
    }

    pub fn note_for(&self, token: &str) -> Option<&str> {
        self.entries.iter().find(|(t, _)| t == token).map(|(_, n)| n.as_str())
    }

    /// Notes triggered by `facts`, deduplicated by text, in first-trigger
    /// order.
    pub fn notes(&self, facts: &[Fact]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for fact in facts {
            for token in fact.anomaly_tokens() {
                if let Some(note) = self.note_for(token) {
                    if !out.iter().any(|n| n == note) {
                        out.push(note.to_string());
                    }
                }
            }
        }
        out
    }
}

pub const NOTHING_CONFIRMED: &str = "No observation could be confirmed.";

/// Builds `(description, caption, safety_notes)` from confirmed facts.
///
/// The description lists every fact; the caption puts anomalous facts first
/// and keeps at most [`CAPTION_CAP`] of them.
pub fn compose_final(confirmed: &[Fact], safety: &SafetyTable) -> (String, String, Vec<String>) {
    let description = if confirmed.is_empty() {
        NOTHING_CONFIRMED.to_string()
    } else {
        let listed: Vec<String> = confirmed.iter().map(Fact::to_string).collect();
        format!("Confirmed observations: {}.", listed.join("; "))
    };
    let mut ordered: Vec<Fact> = confirmed.iter().filter(|f| f.is_anomalous()).cloned().collect();
    ordered.extend(confirmed.iter().filter(|f| !f.is_anomalous()).cloned());
    ordered.truncate(CAPTION_CAP);
    (description, render_caption(&ordered), safety.notes(confirmed))
}
