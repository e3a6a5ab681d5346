//! Instructions sent to a language-model controller before the dialogue.

use crate::grammar::{Command, BOOTSTRAP_QUESTION};
use crate::motion::{BACK_STEP_M, FORWARD_STEP_M, LATERAL_STEP_M};

/// Version tag carried in every controller request.
pub const PREAMBLE_ID: &str = "dronedialog-preamble-v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreambleConfig {
    pub early_stop: bool,
    pub anomaly_tokens: Vec<String>,
}

impl Default for PreambleConfig {
    fn default() -> Self {
        Self {
            early_stop: true,
            anomaly_tokens: crate::fact::ANOMALY_LEXICON.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub const EARLY_STOP_SENTENCE: &str = "If any answer or caption mentions one of the hazards above, immediately stop exploring and reply with `command: i know enough`.";

fn meters(m: f64) -> String {
    format!("{m:.0} meters")
}

fn command_line(c: Command) -> String {
    let what = match c {
        Command::MoveCloser => format!("fly {} forward along your heading", meters(FORWARD_STEP_M)),
        Command::MoveBack => format!("fly {} backward", meters(BACK_STEP_M)),
        Command::MoveLeft => format!("fly {} to your left", meters(LATERAL_STEP_M)),
        Command::MoveRight => format!("fly {} to your right", meters(LATERAL_STEP_M)),
        Command::SavePosition => "remember the current position so it can be revisited later".into(),
        Command::AskQuestion => "stay in place and ask the camera model a question".into(),
        Command::IKnowEnough => "end exploration and move on to the summary".into(),
    };
    format!("- `{}`: {what}", c.name())
}

/// Deterministic prompt text: framing, commands, rules, goal and (when
/// enabled) the early-stop instruction, in that order.
pub fn build_controller_preamble(config: &PreambleConfig) -> String {
    let mut out = String::new();
    out.push_str("You are playing a game. You pilot a simulated drone and cannot see anything yourself. ");
    out.push_str("A camera model looks through the drone's camera and answers your questions with a short answer, ");
    out.push_str("a caption and a score between 0 and 1 telling how well the caption fits the view.\n\n");

    out.push_str("Commands:\n");
    for c in Command::ALL {
        out.push_str(&command_line(c));
        out.push('\n');
    }

    out.push_str("\nMovement rules:\n");
    out.push_str("- Move only with the commands above, one command per turn.\n");
    out.push_str("- Save a position whenever the view there shows something new or scores well.\n");
    out.push_str("\nQuestion rules:\n");
    out.push_str(&format!("- The first question is always \"{BOOTSTRAP_QUESTION}\".\n"));
    out.push_str("- Ask short questions such as `is there a <thing>?`, `how many <things>?` or `what <attribute> is the <thing>?`.\n");
    out.push_str("- Do not invent objects the camera model has not mentioned.\n");
    out.push_str("\nFormat rules:\n");
    out.push_str("- During exploration reply with a `command:` line, optionally followed by a `question:` line.\n");
    out.push_str("- When asked for a summary reply with `description:`, `caption:` and one `validate:` line per fact to check.\n");

    out.push_str("\nGoal: build a detailed description of the scene and stay alert for hazards (");
    out.push_str(&config.anomaly_tokens.join(", "));
    out.push_str(").\n");
    if config.early_stop {
        out.push_str(EARLY_STOP_SENTENCE);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mentions_exact_distances() {
        let p = build_controller_preamble(&PreambleConfig::default());
        assert!(p.contains("10 meters"));
        assert!(p.contains("5 meters"));
        for c in Command::ALL {
            assert!(p.contains(c.name()));
        }
    }

    #[test]
    fn early_stop_is_conditional() {
        let on = build_controller_preamble(&PreambleConfig::default());
        let off = build_controller_preamble(&PreambleConfig {
            early_stop: false,
            ..Default::default()
        });
        assert!(on.contains(EARLY_STOP_SENTENCE));
        assert!(!off.contains(EARLY_STOP_SENTENCE));
    }

    #[test]
    fn sections_appear_in_order() {
        let p = build_controller_preamble(&PreambleConfig::default());
        let at = |s: &str| p.find(s).unwrap();
        assert!(at("game") < at("Commands:"));
        assert!(at("Commands:") < at("Movement rules:"));
        assert!(at("Movement rules:") < at("Question rules:"));
        assert!(at("Question rules:") < at("Format rules:"));
        assert!(at("Format rules:") < at("Goal:"));
        assert!(at("Goal:") < at(EARLY_STOP_SENTENCE));
        assert_eq!(p, build_controller_preamble(&PreambleConfig::default()));
    }
}
