//! Line-oriented surface syntax for controller utterances.
//!
//! A turn is a `command:` line, optionally followed by a `question:` line:
//!
//! ```text
//! command: move closer
//! question: is there a fire?
//! ```
//!
//! A summary carries `description:`, `caption:` and any number of
//! `validate:` lines. Keys are case-insensitive and surrounding whitespace is
//! ignored. Parsing is strict: anything that does not fit is an error, never
//! a guess.

use std::fmt;

use thiserror::Error;

use crate::fact::{Fact, FactError, Polarity};
use crate::motion::MoveCommand;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    MoveCloser,
    MoveBack,
    MoveLeft,
    MoveRight,
    SavePosition,
    AskQuestion,
    IKnowEnough,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::MoveCloser,
        Command::MoveBack,
        Command::MoveLeft,
        Command::MoveRight,
        Command::SavePosition,
        Command::AskQuestion,
        Command::IKnowEnough,
    ];

    /// Canonical spelling used on the wire.
    pub fn name(self) -> &'static str {
        match self {
            Command::MoveCloser => "move closer",
            Command::MoveBack => "move back",
            Command::MoveLeft => "move left",
            Command::MoveRight => "move right",
            Command::SavePosition => "save position",
            Command::AskQuestion => "ask a question",
            Command::IKnowEnough => "i know enough",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        let norm = normalize(name);
        Command::ALL.into_iter().find(|c| c.name() == norm)
    }

    pub fn as_move(self) -> Option<MoveCommand> {
        match self {
            Command::MoveCloser => Some(MoveCommand::Closer),
            Command::MoveBack => Some(MoveCommand::Back),
            Command::MoveLeft => Some(MoveCommand::Left),
            Command::MoveRight => Some(MoveCommand::Right),
            _ => None,
        }
    }

    pub fn accepts_question(self) -> bool {
        !matches!(self, Command::SavePosition | Command::IKnowEnough)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuestionKind {
    Presence,
    Count,
    Attribute,
    Open,
}

/// A question in the closed grammar. `raw` is the trimmed original text and
/// determines `kind` and `subject`; build values with [`Question::parse`] or
/// the constructors so the three stay consistent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Question {
    pub kind: QuestionKind,
    pub subject: String,
    pub raw: String,
}

pub const BOOTSTRAP_QUESTION: &str = "What do you see?";

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl Question {
    pub fn parse(text: &str) -> Question {
        let raw = text.trim().to_string();
        let norm = normalize(raw.trim_end_matches(|c: char| c == '?' || c.is_whitespace()));
        let open = |raw: String| Question {
            kind: QuestionKind::Open,
            subject: String::new(),
            raw,
        };
        let pick = |kind, subject: &str| {
            let subject = subject.trim();
            if subject.is_empty() {
                None
            } else {
                Some((kind, subject.to_string()))
            }
        };
        let parsed = if let Some(rest) = ["is there an ", "is there a "]
            .iter()
            .find_map(|p| norm.strip_prefix(p))
        {
            pick(QuestionKind::Presence, rest)
        } else if let Some(rest) = norm.strip_prefix("how many ") {
            let rest = rest
                .strip_suffix(" are there")
                .or_else(|| rest.strip_suffix(" do you see"))
                .unwrap_or(rest);
            pick(QuestionKind::Count, rest)
        } else if let Some(rest) = norm.strip_prefix("what ") {
            rest.split_once(" is the ")
                .filter(|(attr, _)| !attr.is_empty() && !attr.contains(' '))
                .and_then(|(_, subject)| pick(QuestionKind::Attribute, subject))
        } else {
            None
        };
        match parsed {
            Some((kind, subject)) => Question { kind, subject, raw },
            None => open(raw),
        }
    }

    pub fn presence(subject: &str) -> Question {
        Question::parse(&format!("is there a {subject}?"))
    }

    pub fn count(subject: &str) -> Question {
        Question::parse(&format!("how many {subject}?"))
    }

    pub fn attribute(attribute: &str, subject: &str) -> Question {
        Question::parse(&format!("what {attribute} is the {subject}?"))
    }

    pub fn open(text: &str) -> Question {
        Question::parse(text)
    }

    pub fn bootstrap() -> Question {
        Question::parse(BOOTSTRAP_QUESTION)
    }

    /// Subject phrase read as a fact, for presence/count/attribute lookups.
    pub fn subject_fact(&self) -> Option<Fact> {
        if self.subject.is_empty() {
            return None;
        }
        Fact::parse(&self.subject)
            .ok()
            .filter(|f| f.polarity == Polarity::Present)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TurnDirective {
    pub command: Command,
    pub question: Option<Question>,
}

impl TurnDirective {
    pub fn new(command: Command, question: Option<Question>) -> Self {
        Self { command, question }
    }

    pub fn bare(command: Command) -> Self {
        Self {
            command,
            question: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummaryDirective {
    pub description: String,
    pub caption: String,
    pub validation_targets: Vec<Fact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("empty input")]
    Empty,
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
    #[error("more than one `command:` line")]
    MultipleCommands,
    #[error("more than one `question:` line")]
    MultipleQuestions,
    #[error("no `command:` line")]
    MissingCommand,
    #[error("`{0}` does not take a question")]
    QuestionNotAllowed(Command),
    #[error("`ask a question` needs a `question:` line")]
    MissingQuestion,
    #[error("empty question")]
    EmptyQuestion,
    #[error("unexpected line {0:?}")]
    UnexpectedLine(String),
    #[error("missing `description:` section")]
    MissingDescription,
    #[error("missing `caption:` section")]
    MissingCaption,
    #[error("duplicate `{0}:` section")]
    DuplicateSection(&'static str),
    #[error("unparseable fact {text:?}: {source}")]
    BadFact { text: String, source: FactError },
}

/// Splits `key: value`, lowercasing the key.
fn split_key(line: &str) -> Option<(String, &str)> {
    let (key, value) = line.split_once(':')?;
    Some((key.trim().to_lowercase(), value.trim()))
}

pub fn parse_turn(text: &str) -> Result<TurnDirective, GrammarError> {
    let mut command = None;
    let mut question: Option<&str> = None;
    let mut any = false;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        any = true;
        match split_key(line) {
            Some((key, value)) if key == "command" => {
                if command.is_some() {
                    return Err(GrammarError::MultipleCommands);
                }
                command =
                    Some(Command::from_name(value).ok_or_else(|| GrammarError::UnknownCommand(value.to_string()))?);
            }
            Some((key, value)) if key == "question" => {
                if question.is_some() {
                    return Err(GrammarError::MultipleQuestions);
                }
                question = Some(value);
            }
            _ => return Err(GrammarError::UnexpectedLine(line.to_string())),
        }
    }
    if !any {
        return Err(GrammarError::Empty);
    }
    let command = command.ok_or(GrammarError::MissingCommand)?;
    let question = match question {
        Some("") => return Err(GrammarError::EmptyQuestion),
        Some(_) if !command.accepts_question() => return Err(GrammarError::QuestionNotAllowed(command)),
        Some(q) => Some(Question::parse(q)),
        None if command == Command::AskQuestion => return Err(GrammarError::MissingQuestion),
        None => None,
    };
    Ok(TurnDirective { command, question })
}

/// [`parse_turn`] over raw bytes; invalid UTF-8 is a structured error.
pub fn parse_turn_bytes(bytes: &[u8]) -> Result<TurnDirective, GrammarError> {
    std::str::from_utf8(bytes)
        .map_err(|_| GrammarError::NotUtf8)
        .and_then(parse_turn)
}

pub fn parse_summary(text: &str) -> Result<SummaryDirective, GrammarError> {
    let mut description = None;
    let mut caption = None;
    let mut targets = Vec::new();
    let mut any = false;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        any = true;
        let Some((key, value)) = split_key(line) else {
            return Err(GrammarError::UnexpectedLine(line.to_string()));
        };
        match key.as_str() {
            "description" => {
                if description.replace(value.to_string()).is_some() {
                    return Err(GrammarError::DuplicateSection("description"));
                }
            }
            "caption" => {
                if caption.replace(value.to_string()).is_some() {
                    return Err(GrammarError::DuplicateSection("caption"));
                }
            }
            "validate" => targets.push(Fact::parse(value).map_err(|source| GrammarError::BadFact {
                text: value.to_string(),
                source,
            })?),
            _ => return Err(GrammarError::UnexpectedLine(line.to_string())),
        }
    }
    if !any {
        return Err(GrammarError::Empty);
    }
    Ok(SummaryDirective {
        description: description.ok_or(GrammarError::MissingDescription)?,
        caption: caption.ok_or(GrammarError::MissingCaption)?,
        validation_targets: targets,
    })
}

pub fn serialize_turn(directive: &TurnDirective) -> String {
    let mut out = format!("command: {}", directive.command.name());
    if let Some(q) = &directive.question {
        out.push_str("\nquestion: ");
        out.push_str(&q.raw);
    }
    out
}

pub fn serialize_summary(summary: &SummaryDirective) -> String {
    let mut out = format!("description: {}\ncaption: {}", summary.description, summary.caption);
    for fact in &summary.validation_targets {
        out.push_str("\nvalidate: ");
        out.push_str(&fact.to_string());
    }
    out
}

impl fmt::Display for TurnDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_turn(self))
    }
}

impl fmt::Display for SummaryDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_summary(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn move_with_presence_question() {
        let d = parse_turn("Command: move closer\nQuestion: is there a fire?").unwrap();
        assert_eq!(d.command, Command::MoveCloser);
        let q = d.question.unwrap();
        assert_eq!((q.kind, q.subject.as_str()), (QuestionKind::Presence, "fire"));
    }

    #[test]
    fn command_is_case_insensitive() {
        assert_eq!(
            parse_turn("command: I KNOW ENOUGH").unwrap(),
            TurnDirective::bare(Command::IKnowEnough)
        );
        assert_eq!(
            parse_turn("  COMMAND :  Move   Left  ").unwrap(),
            TurnDirective::bare(Command::MoveLeft)
        );
    }

    #[test]
    fn error_kinds_are_distinct() {
        assert_eq!(
            parse_turn("Command: hover"),
            Err(GrammarError::UnknownCommand("hover".into()))
        );
        assert_eq!(
            parse_turn("command: move left\ncommand: move right"),
            Err(GrammarError::MultipleCommands)
        );
        assert_eq!(
            parse_turn("command: save position\nquestion: is there a fire?"),
            Err(GrammarError::QuestionNotAllowed(Command::SavePosition))
        );
        assert_eq!(parse_turn(""), Err(GrammarError::Empty));
        assert_eq!(parse_turn(" \n \n"), Err(GrammarError::Empty));
        assert_eq!(
            parse_turn("command: ask a question"),
            Err(GrammarError::MissingQuestion)
        );
        assert_eq!(
            parse_turn("question: is there a fire?"),
            Err(GrammarError::MissingCommand)
        );
        assert_eq!(
            parse_turn("command: move left\nquestion:"),
            Err(GrammarError::EmptyQuestion)
        );
        assert!(matches!(
            parse_turn("sure, moving left"),
            Err(GrammarError::UnexpectedLine(_))
        ));
        assert_eq!(parse_turn_bytes(&[0xff, 0xfe]), Err(GrammarError::NotUtf8));
    }

    #[test]
    fn question_grammar() {
        let q = Question::parse("How many trees are there?");
        assert_eq!((q.kind, q.subject.as_str()), (QuestionKind::Count, "trees"));
        let q = Question::parse("what color is the car?");
        assert_eq!((q.kind, q.subject.as_str()), (QuestionKind::Attribute, "car"));
        let q = Question::parse("What do you see?");
        assert_eq!(q.kind, QuestionKind::Open);
        assert_eq!(q.raw, BOOTSTRAP_QUESTION);
        assert_eq!(Question::parse("is there a?").kind, QuestionKind::Open);
        assert_eq!(
            Question::presence("burning tree").subject_fact(),
            Some(Fact::present("tree", &["burning"]))
        );
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(
            serialize_turn(&TurnDirective::bare(Command::MoveLeft)),
            "command: move left"
        );
        let d = TurnDirective::new(Command::AskQuestion, Some(Question::presence("smoke")));
        let text = serialize_turn(&d);
        assert_eq!(text, "command: ask a question\nquestion: is there a smoke?");
        assert_eq!(parse_turn(&text).unwrap(), d);
    }

    #[test]
    fn summary_sections() {
        let s = parse_summary("description: d\ncaption: c\nvalidate: burning tree").unwrap();
        assert_eq!(s.validation_targets, vec![Fact::present("tree", &["burning"])]);
        assert_eq!(parse_summary("caption: c"), Err(GrammarError::MissingDescription));
        assert_eq!(parse_summary("description: d"), Err(GrammarError::MissingCaption));
        let s = parse_summary("description: d\ncaption: c\nvalidate: no smoke").unwrap();
        assert_eq!(s.validation_targets, vec![Fact::absent("smoke", &[])]);
        assert!(matches!(
            parse_summary("description: d\ncaption: c\nvalidate: 42!"),
            Err(GrammarError::BadFact { .. })
        ));
    }
}
