//! Text the engine sends to the controller.
//!
//! Perception results are rendered as the concatenated answer and caption
//! plus the matching score:
//!
//! ```text
//! answer: yes
//! caption: a burning tree and a rock
//! score: 1.0000
//! ```
//!
//! Other messages are single `key: value` lines (`saved:`, `moved:`,
//! `error:`, `mode:`). The bootstrap message additionally starts with a
//! `question:` line.

use crate::fact::{parse_caption, Fact};

pub fn perception_message(question: Option<&str>, answer: &str, caption: &str, score: f64, clamped: bool) -> String {
    let mut out = String::new();
    if let Some(q) = question {
        out.push_str(&format!("question: {q}\n"));
    }
    out.push_str(&format!("answer: {answer}\ncaption: {caption}\nscore: {score:.4}"));
    if clamped {
        out.push_str("\nnote: move clamped at the scene boundary");
    }
    out
}

pub fn saved_message(index: usize) -> String {
    format!("saved: position {index}")
}

pub fn moved_message(clamped: bool) -> String {
    if clamped {
        "moved: clamped at the scene boundary".into()
    } else {
        "moved: ok".into()
    }
}

pub fn error_message(err: &str) -> String {
    format!("error: {}", err.replace('\n', " "))
}

pub fn mode_message(mode: &str) -> String {
    format!("mode: {mode}")
}

/// An engine message as read back by a controller.
#[derive(Clone, Debug, PartialEq)]
pub enum EngineMessage {
    Perception {
        answer: String,
        caption_facts: Vec<Fact>,
        score: f64,
    },
    Saved,
    Moved,
    Error,
    Mode(String),
    Other,
}

impl EngineMessage {
    pub fn parse(text: &str) -> EngineMessage {
        let mut answer = None;
        let mut caption = None;
        let mut score = None;
        let mut first_key = None;
        let mut mode = None;
        for line in text.lines() {
            let Some((k, v)) = line.split_once(':') else { continue };
            let (k, v) = (k.trim().to_lowercase(), v.trim());
            if first_key.is_none() {
                first_key = Some(k.clone());
            }
            match k.as_str() {
                "answer" => answer = Some(v.to_string()),
                "caption" => caption = Some(v.to_string()),
                "score" => score = v.parse::<f64>().ok(),
                "mode" => mode = Some(v.to_string()),
                _ => {}
            }
        }
        if let (Some(answer), Some(caption), Some(score)) = (answer, caption, score) {
            return EngineMessage::Perception {
                answer,
                caption_facts: parse_caption(&caption).unwrap_or_default(),
                score,
            };
        }
        match first_key.as_deref() {
            Some("saved") => EngineMessage::Saved,
            Some("moved") => EngineMessage::Moved,
            Some("error") => EngineMessage::Error,
            Some("mode") => EngineMessage::Mode(mode.unwrap_or_default()),
            _ => EngineMessage::Other,
        }
    }
}
