//! Atomic scene claims shared by captions, the ledger and validation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokens that mark a hazardous scene element.
pub const ANOMALY_LEXICON: [&str; 6] = ["fire", "smoke", "flame", "crash", "crashed", "burning"];

pub fn is_anomaly_token(token: &str) -> bool {
    ANOMALY_LEXICON.contains(&token)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Present,
    Absent,
}

/// `(label, attributes, polarity)`, e.g. "burning tree" or "no smoke".
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub subject_label: String,
    pub attributes: Vec<String>,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactError {
    #[error("empty fact")]
    Empty,
    #[error("invalid token {0:?}: expected lowercase letters or hyphens")]
    BadToken(String),
    #[error("fact {0:?} has no subject label")]
    MissingLabel(String),
}

/// A word usable as a label or attribute.
pub fn is_valid_token(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(|c| c.is_ascii_lowercase() || c == '-')
}

impl Fact {
    pub fn present<S: Into<String>>(label: S, attributes: &[&str]) -> Self {
        Self {
            subject_label: label.into(),
            attributes: attributes.iter().map(|a| a.to_string()).collect(),
            polarity: Polarity::Present,
        }
    }

    pub fn absent<S: Into<String>>(label: S, attributes: &[&str]) -> Self {
        Self {
            polarity: Polarity::Absent,
            ..Self::present(label, attributes)
        }
    }

    /// Parses `[no] [a|an] <attribute>* <label>`. Input is lowercased and
    /// whitespace-collapsed first.
    pub fn parse(text: &str) -> Result<Self, FactError> {
        let lowered = text.trim().to_lowercase();
        let mut tokens: Vec<&str> = lowered.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(FactError::Empty);
        }
        let polarity = if tokens[0] == "no" {
            tokens.remove(0);
            Polarity::Absent
        } else {
            Polarity::Present
        };
        if matches!(tokens.first(), Some(&"a") | Some(&"an")) {
            tokens.remove(0);
        }
        let Some(label) = tokens.pop() else {
            return Err(FactError::MissingLabel(text.to_string()));
        };
        for t in tokens.iter().chain(std::iter::once(&label)) {
            if !is_valid_token(t) {
                return Err(FactError::BadToken(t.to_string()));
            }
        }
        Ok(Self {
            subject_label: label.to_string(),
            attributes: tokens.into_iter().map(str::to_string).collect(),
            polarity,
        })
    }

    /// Attributes and label without the polarity marker: "burning tree".
    pub fn phrase(&self) -> String {
        let mut out = String::new();
        for a in &self.attributes {
            out.push_str(a);
            out.push(' ');
        }
        out.push_str(&self.subject_label);
        out
    }

    pub fn with_polarity(&self, polarity: Polarity) -> Self {
        Self {
            polarity,
            ..self.clone()
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.attributes
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.subject_label.as_str()))
    }

    /// Anomaly tokens carried by a present-polarity fact.
    pub fn anomaly_tokens(&self) -> Vec<&str> {
        if self.polarity == Polarity::Absent {
            return Vec::new();
        }
        self.tokens().filter(|t| is_anomaly_token(t)).collect()
    }

    pub fn is_anomalous(&self) -> bool {
        !self.anomaly_tokens().is_empty()
    }

    /// True when an object with this label and attribute set satisfies the
    /// fact's subject (ignores polarity).
    pub fn describes(&self, label: &str, attributes: &[String]) -> bool {
        self.subject_label == label && self.attributes.iter().all(|a| attributes.contains(a))
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.polarity == Polarity::Absent {
            f.write_str("no ")?;
        }
        f.write_str(&self.phrase())
    }
}

pub const EMPTY_CAPTION: &str = "nothing notable";

/// Renders facts as `a <attributes> <label>` clauses joined by "and".
pub fn render_caption(facts: &[Fact]) -> String {
    if facts.is_empty() {
        return EMPTY_CAPTION.to_string();
    }
    facts
        .iter()
        .map(|f| match f.polarity {
            Polarity::Present => format!("a {}", f.phrase()),
            Polarity::Absent => format!("no {}", f.phrase()),
        })
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Inverse of [`render_caption`].
pub fn parse_caption(caption: &str) -> Result<Vec<Fact>, FactError> {
    let caption = caption.trim();
    if caption.is_empty() || caption.eq_ignore_ascii_case(EMPTY_CAPTION) {
        return Ok(Vec::new());
    }
    caption.split(" and ").map(Fact::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_polarity_and_article() {
        assert_eq!(Fact::parse("no smoke").unwrap(), Fact::absent("smoke", &[]));
        assert_eq!(
            Fact::parse("A Burning  tree").unwrap(),
            Fact::present("tree", &["burning"])
        );
        assert_eq!(Fact::parse("no"), Err(FactError::MissingLabel("no".into())));
        assert!(matches!(Fact::parse("tree!"), Err(FactError::BadToken(_))));
    }

    #[test]
    fn caption_round_trip() {
        let facts = vec![
            Fact::present("tree", &["burning"]),
            Fact::present("rock", &[]),
            Fact::absent("smoke", &[]),
        ];
        let text = render_caption(&facts);
        assert_eq!(text, "a burning tree and a rock and no smoke");
        assert_eq!(parse_caption(&text).unwrap(), facts);
        assert_eq!(parse_caption(EMPTY_CAPTION).unwrap(), vec![]);
    }

    #[test]
    fn absent_facts_carry_no_anomaly() {
        assert!(Fact::present("tree", &["burning"]).is_anomalous());
        assert!(!Fact::absent("fire", &[]).is_anomalous());
    }
}
