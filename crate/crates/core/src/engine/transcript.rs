//! Per-episode turn log, exported as JSON lines.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::geometry::Pose;

pub const FLAG_BOOTSTRAP: &str = "bootstrap";
pub const FLAG_TURN: &str = "turn";
pub const FLAG_PARSE_ERROR: &str = "parse_error";
pub const FLAG_CLAMPED: &str = "clamped";
pub const FLAG_SAVED: &str = "saved";
pub const FLAG_ANOMALY: &str = "anomaly";
pub const FLAG_EARLY_STOP: &str = "early_stop";
pub const FLAG_AUTO_SAVE: &str = "auto_save";
pub const FLAG_SUMMARY: &str = "summary";
pub const FLAG_SPAWN_FALLBACK: &str = "spawn_fallback";
pub const FLAG_VALIDATION_QUERY: &str = "validation_query";
pub const FLAG_VOTE_FOR: &str = "vote_for";
pub const FLAG_VOTE_AGAINST: &str = "vote_against";
pub const FLAG_FINAL: &str = "final";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub step: u32,
    pub mode: Mode,
    pub directive_text: String,
    pub answer: Option<String>,
    pub caption: Option<String>,
    pub match_score: Option<f64>,
    pub pose: Pose,
    pub flags: Vec<String>,
}

impl TurnRecord {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// Value of a `key=value` flag.
    pub fn flag_value(&self, key: &str) -> Option<&str> {
        self.flags
            .iter()
            .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<TurnRecord>,
}

impl Transcript {
    pub fn push(&mut self, record: TurnRecord) {
        self.records.push(record);
    }

    pub fn next_step(&self) -> u32 {
        self.records.len() as u32
    }

    pub fn validation_queries(&self) -> impl Iterator<Item = &TurnRecord> {
        self.records.iter().filter(|r| r.has_flag(FLAG_VALIDATION_QUERY))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str) -> serde_json::Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }
}
